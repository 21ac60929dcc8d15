#pragma once

#include "vnav/geometry.hpp"
#include "vnav/grid_env.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace vnav {

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GraphEdge {
  int to = 0;
  double weight = 0.0;
};

/// 8-connected graph over coarse blocks of the map. A block of
/// downsample x downsample fine cells becomes a node when more than half of it
/// is water (cells beyond the map edge count as land).
struct PlanningGraph {
  int downsample = 1;
  int coarse_rows = 0;
  int coarse_cols = 0;
  GeoTransform transform;
  std::uint64_t map_hash = 0;
  std::vector<Point> centers;
  std::vector<CellIndex> blocks;
  /// coarse_rows x coarse_cols, node index or -1.
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> node_at;
  /// Neighbours in ascending index order.
  std::vector<std::vector<GraphEdge>> adjacency;

  int node_count() const { return static_cast<int>(centers.size()); }

  /// Node of the block containing p, falling back to the nearest node centre
  /// (lowest index on ties). -1 for an empty graph.
  int node_of(const Point& p) const;
};

/// Throws PlanError when no block qualifies as water.
PlanningGraph build_planning_graph(const GridMap& map, int downsample);

struct NextHopMatrix {
  static constexpr std::int32_t kUnreachable = -1;

  using DistMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using NextMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  DistMatrix dist;
  NextMatrix next;

  int node_count() const { return static_cast<int>(dist.rows()); }
  bool reachable(int from, int to) const { return next(from, to) != kUnreachable; }

  /// Node sequence from -> to following first hops; empty when unreachable.
  std::vector<int> node_path(int from, int to) const;

  friend bool operator==(const NextHopMatrix& a, const NextHopMatrix& b) {
    return a.dist.rows() == b.dist.rows() && a.dist.cols() == b.dist.cols() &&
           a.next.rows() == b.next.rows() && a.next.cols() == b.next.cols() &&
           (a.dist.array() == b.dist.array()).all() && (a.next.array() == b.next.array()).all();
  }
};

/// Floyd-Warshall with first-hop reconstruction. Relaxation runs in ascending
/// node order with a strict comparison, so ties keep the earliest path found.
NextHopMatrix floyd_all_pairs(const PlanningGraph& graph);

/// [src, node centres..., dst]; just [src, dst] when both map to one node.
/// Throws PlanError when the nodes are disconnected.
std::vector<Point> shortest_path(const PlanningGraph& graph, const NextHopMatrix& matrix,
                                 const Point& src, const Point& dst);

/// Ramer-Douglas-Peucker with point-to-segment distance. Keeps both endpoints
/// and every point farther than epsilon from the simplified chord.
template <typename Scalar>
std::vector<Eigen::Matrix<Scalar, 2, 1>> rdp_simplify(
    std::span<const Eigen::Matrix<Scalar, 2, 1>> polyline, Scalar epsilon) {
  const std::size_t n = polyline.size();
  if (n <= 2) return {polyline.begin(), polyline.end()};
  std::vector<bool> keep(n, false);
  keep.front() = keep.back() = true;

  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
  while (!stack.empty()) {
    const auto [first, last] = stack.back();
    stack.pop_back();
    Scalar worst = Scalar(-1);
    std::size_t index = first;
    for (std::size_t i = first + 1; i < last; ++i) {
      const Scalar d = segment_distance(polyline[i], polyline[first], polyline[last]);
      if (d > worst) {
        worst = d;
        index = i;
      }
    }
    if (index != first && worst > epsilon) {
      keep[index] = true;
      stack.emplace_back(index, last);
      stack.emplace_back(first, index);
    }
  }
  std::vector<Eigen::Matrix<Scalar, 2, 1>> out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(polyline[i]);
  return out;
}

inline std::vector<Point> rdp_simplify(const std::vector<Point>& polyline, double epsilon) {
  return rdp_simplify<double>(std::span<const Point>(polyline), epsilon);
}

/// True when every sample along [a, b] (quarter-cell spacing) lies on water.
bool line_of_sight(const GridMap& map, const Point& a, const Point& b);

/// Greedy string pulling: from each anchor, jump to the farthest later vertex
/// still in line of sight, then merge two-vertex turns into the single corner
/// where their legs meet when that corner is visible. Endpoints are kept.
std::vector<Point> shortcut_path(const GridMap& map, const std::vector<Point>& polyline);

struct PlanSpec {
  Point origin = Point::Zero();
  Point destination = Point::Zero();
  /// Intermediary goals; the last one is the destination.
  std::vector<Point> waypoints;
};

inline constexpr double kPlanEpsilon = 0.001;

/// shortest_path -> shortcut_path -> rdp_simplify; the origin is dropped from
/// the waypoint list. Throws PlanError for unreachable destinations and
/// std::invalid_argument for endpoints on land.
PlanSpec make_plan(const GridMap& map, const PlanningGraph& graph, const NextHopMatrix& matrix,
                   const Point& origin, const Point& destination,
                   double epsilon = kPlanEpsilon);

// ---------------------------------------------------------------------------
// Plan cache: "VNPC", version byte, u32 node count, f64 dist[n*n], i32 next[n*n],
// u64 map content hash. All little-endian, row-major.

class PlanCacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint8_t kPlanCacheVersion = 1;

void save_plan_cache(const std::filesystem::path& path, const NextHopMatrix& matrix,
                     std::uint64_t map_hash);

struct PlanCache {
  NextHopMatrix matrix;
  std::uint64_t map_hash = 0;
};

PlanCache load_plan_cache(const std::filesystem::path& path);

/// Loads and checks the stored hash; throws PlanCacheError on a stale cache.
NextHopMatrix load_plan_cache(const std::filesystem::path& path, std::uint64_t expected_hash);

/// Canonical cache file name for a (map hash, downsample) pair.
std::string plan_cache_filename(std::uint64_t map_hash, int downsample);

}  // namespace vnav
