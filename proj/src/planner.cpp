#include "vnav/planner.hpp"

#include "vnav/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace vnav {

int PlanningGraph::node_of(const Point& p) const {
  if (centers.empty()) return -1;
  const double block = transform.cell_size * downsample;
  const int row = static_cast<int>(std::floor((transform.y_max - p.y()) / block + 1e-7));
  const int col = static_cast<int>(std::floor((p.x() - transform.x_min) / block + 1e-7));
  if (row >= 0 && col >= 0 && row < coarse_rows && col < coarse_cols && node_at(row, col) >= 0)
    return node_at(row, col);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < node_count(); ++i) {
    const double d = (centers[static_cast<std::size_t>(i)] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

PlanningGraph build_planning_graph(const GridMap& map, int downsample) {
  if (downsample < 1) throw std::invalid_argument("downsample must be at least 1");
  PlanningGraph g;
  g.downsample = downsample;
  g.transform = map.transform();
  g.map_hash = map.content_hash();
  g.coarse_rows = (map.nrows() + downsample - 1) / downsample;
  g.coarse_cols = (map.ncols() + downsample - 1) / downsample;
  g.node_at.setConstant(g.coarse_rows, g.coarse_cols, -1);

  const int block_cells = downsample * downsample;
  const double cs = map.transform().cell_size;
  for (int br = 0; br < g.coarse_rows; ++br) {
    for (int bc = 0; bc < g.coarse_cols; ++bc) {
      const int r0 = br * downsample, c0 = bc * downsample;
      const int r1 = std::min(r0 + downsample, map.nrows());
      const int c1 = std::min(c0 + downsample, map.ncols());
      int water = 0;
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) water += map.is_water(r, c) ? 1 : 0;
      if (2 * water <= block_cells) continue;
      g.node_at(br, bc) = g.node_count();
      g.blocks.push_back({br, bc});
      // Lattice centre; a majority-water block always has it inside the map.
      g.centers.emplace_back(map.transform().x_min + (c0 + 0.5 * downsample) * cs,
                             map.transform().y_max - (r0 + 0.5 * downsample) * cs);
    }
  }
  if (g.centers.empty()) throw PlanError("planning graph has no water nodes");

  const double axial = cs * downsample;
  const double diagonal = axial * std::sqrt(2.0);
  g.adjacency.resize(g.centers.size());
  for (int i = 0; i < g.node_count(); ++i) {
    const CellIndex b = g.blocks[static_cast<std::size_t>(i)];
    auto& edges = g.adjacency[static_cast<std::size_t>(i)];
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int nr = b.row + dr, nc = b.col + dc;
        if (nr < 0 || nc < 0 || nr >= g.coarse_rows || nc >= g.coarse_cols) continue;
        const int j = g.node_at(nr, nc);
        if (j < 0) continue;
        edges.push_back({j, (dr != 0 && dc != 0) ? diagonal : axial});
      }
    std::sort(edges.begin(), edges.end(), [](const GraphEdge& a, const GraphEdge& b) { return a.to < b.to; });
  }
  return g;
}

std::vector<int> NextHopMatrix::node_path(int from, int to) const {
  if (!reachable(from, to)) return {};
  std::vector<int> path{from};
  int cur = from;
  while (cur != to) {
    cur = next(cur, to);
    path.push_back(cur);
    if (path.size() > static_cast<std::size_t>(node_count()))
      throw std::logic_error("next-hop matrix contains a cycle");
  }
  return path;
}

NextHopMatrix floyd_all_pairs(const PlanningGraph& graph) {
  const int n = graph.node_count();
  if (n == 0) throw PlanError("empty planning graph");
  constexpr double inf = std::numeric_limits<double>::infinity();
  NextHopMatrix m;
  m.dist.setConstant(n, n, inf);
  m.next.setConstant(n, n, NextHopMatrix::kUnreachable);
  for (int i = 0; i < n; ++i) {
    m.dist(i, i) = 0.0;
    m.next(i, i) = i;
    for (const auto& e : graph.adjacency[static_cast<std::size_t>(i)]) {
      if (e.weight < m.dist(i, e.to)) {
        m.dist(i, e.to) = e.weight;
        m.next(i, e.to) = e.to;
      }
    }
  }
  for (int k = 0; k < n; ++k) {
    const double* dk = m.dist.row(k).data();
    for (int i = 0; i < n; ++i) {
      const double dik = m.dist(i, k);
      if (dik == inf) continue;
      double* di = m.dist.row(i).data();
      std::int32_t* ni = m.next.row(i).data();
      const std::int32_t hop = ni[k];
      for (int j = 0; j < n; ++j) {
        const double candidate = dik + dk[j];
        if (candidate < di[j]) {
          di[j] = candidate;
          ni[j] = hop;
        }
      }
    }
  }
  return m;
}

std::vector<Point> shortest_path(const PlanningGraph& graph, const NextHopMatrix& matrix,
                                 const Point& src, const Point& dst) {
  const int a = graph.node_of(src), b = graph.node_of(dst);
  if (a < 0 || b < 0) throw PlanError("empty planning graph");
  if (a == b) return {src, dst};
  const auto nodes = matrix.node_path(a, b);
  if (nodes.empty()) throw PlanError("destination is unreachable from the origin");
  std::vector<Point> out;
  out.reserve(nodes.size() + 2);
  out.push_back(src);
  for (int n : nodes) out.push_back(graph.centers[static_cast<std::size_t>(n)]);
  out.push_back(dst);
  return out;
}

bool line_of_sight(const GridMap& map, const Point& a, const Point& b) {
  const double spacing = 0.25 * map.transform().cell_size;
  const int samples = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
  for (int i = 0; i <= samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    if (!map.is_water(Point(a + t * (b - a)))) return false;
  }
  return true;
}

std::vector<Point> shortcut_path(const GridMap& map, const std::vector<Point>& polyline) {
  if (polyline.size() <= 2) return polyline;
  std::vector<Point> out{polyline.front()};
  std::size_t anchor = 0;
  const std::size_t last = polyline.size() - 1;
  while (anchor < last) {
    std::size_t reach = anchor + 1;
    for (std::size_t j = last; j > anchor + 1; --j) {
      if (line_of_sight(map, polyline[anchor], polyline[j])) {
        reach = j;
        break;
      }
    }
    out.push_back(polyline[reach]);
    anchor = reach;
  }
  // A turn the coarse graph chamfered into two vertices becomes one corner
  // where the incoming and outgoing legs meet, if that corner is visible.
  for (std::size_t i = 1; i + 2 < out.size();) {
    const Point& prev = out[i - 1];
    const Point& next = out[i + 2];
    const Point in = out[i] - prev;
    const Point outward = next - out[i + 1];
    const double denom = in.x() * outward.y() - in.y() * outward.x();
    if (std::abs(denom) > 1e-12 * in.norm() * outward.norm()) {
      const Point w = out[i + 1] - prev;
      const double t = (w.x() * outward.y() - w.y() * outward.x()) / denom;
      const double u = (w.x() * in.y() - w.y() * in.x()) / denom;
      const Point corner = prev + t * in;
      if (t >= 1.0 && u <= 0.0 && line_of_sight(map, prev, corner) && line_of_sight(map, corner, next)) {
        out[i] = corner;
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        continue;
      }
    }
    ++i;
  }
  return out;
}

PlanSpec make_plan(const GridMap& map, const PlanningGraph& graph, const NextHopMatrix& matrix,
                   const Point& origin, const Point& destination, double epsilon) {
  if (!map.is_water(origin)) throw std::invalid_argument("plan origin is not on water");
  if (!map.is_water(destination)) throw std::invalid_argument("plan destination is not on water");
  PlanSpec plan{origin, destination, {}};
  const auto path = shortest_path(graph, matrix, origin, destination);
  const auto simplified = rdp_simplify(shortcut_path(map, path), epsilon);
  plan.waypoints.assign(simplified.begin() + 1, simplified.end());
  return plan;
}

// ---------------------------------------------------------------------------

void save_plan_cache(const std::filesystem::path& path, const NextHopMatrix& matrix,
                     std::uint64_t map_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PlanCacheError("cannot write plan cache " + path.string());
  out.write("VNPC", 4);
  binary::write_le<std::uint8_t>(out, kPlanCacheVersion);
  const auto n = static_cast<std::uint32_t>(matrix.node_count());
  binary::write_le<std::uint32_t>(out, n);
  for (Eigen::Index i = 0; i < matrix.dist.size(); ++i) binary::write_le<double>(out, matrix.dist.data()[i]);
  for (Eigen::Index i = 0; i < matrix.next.size(); ++i)
    binary::write_le<std::int32_t>(out, matrix.next.data()[i]);
  binary::write_le<std::uint64_t>(out, map_hash);
  if (!out) throw PlanCacheError("failed writing plan cache " + path.string());
}

PlanCache load_plan_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlanCacheError("cannot open plan cache " + path.string());
  try {
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != "VNPC") throw PlanCacheError("not a plan cache file");
    const auto version = binary::read_le<std::uint8_t>(in);
    if (version != kPlanCacheVersion)
      throw PlanCacheError("unsupported plan cache version " + std::to_string(version));
    const auto n = static_cast<Eigen::Index>(binary::read_le<std::uint32_t>(in));
    if (n > 100000) throw PlanCacheError("node count out of range");
    PlanCache cache;
    cache.matrix.dist.resize(n, n);
    cache.matrix.next.resize(n, n);
    for (Eigen::Index i = 0; i < n * n; ++i) cache.matrix.dist.data()[i] = binary::read_le<double>(in);
    for (Eigen::Index i = 0; i < n * n; ++i) {
      const auto hop = binary::read_le<std::int32_t>(in);
      if (hop < -1 || hop >= n) throw PlanCacheError("next-hop index out of range");
      cache.matrix.next.data()[i] = hop;
    }
    cache.map_hash = binary::read_le<std::uint64_t>(in);
    if (in.peek() != std::char_traits<char>::eof()) throw PlanCacheError("trailing bytes in plan cache");
    return cache;
  } catch (const binary::TruncatedInput&) {
    throw PlanCacheError("plan cache is truncated");
  }
}

NextHopMatrix load_plan_cache(const std::filesystem::path& path, std::uint64_t expected_hash) {
  auto cache = load_plan_cache(path);
  if (cache.map_hash != expected_hash) throw PlanCacheError("plan cache is stale for this map");
  return std::move(cache.matrix);
}

std::string plan_cache_filename(std::uint64_t map_hash, int downsample) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "plan-%016llx-f%d.vnpc", static_cast<unsigned long long>(map_hash),
                downsample);
  return buf;
}

}  // namespace vnav
