#pragma once

#include "vnav/geometry.hpp"
#include "vnav/rng.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vnav {

// ---------------------------------------------------------------------------
// Map geometry

enum class Cell : std::uint8_t { Water = 0, Land = 1 };

struct CellIndex {
  int row = 0;
  int col = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Geographic bounding box and raster resolution. Row 0 is the northern edge.
struct GeoTransform {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double cell_size = 0.001;

  static GeoTransform from_corner(double xll, double yll, int ncols, int nrows,
                                  double cell_size);

  int ncols() const;
  int nrows() const;
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }

  /// Throws std::invalid_argument when the box or cell size is degenerate.
  void validate() const;

  friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

/// Water/land raster. Anything outside the bounding box reads as Land.
class GridMap {
 public:
  using Cells = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  GridMap() = default;
  GridMap(GeoTransform transform, Cells cells);

  const GeoTransform& transform() const { return transform_; }
  const Cells& cells() const { return cells_; }
  int nrows() const { return static_cast<int>(cells_.rows()); }
  int ncols() const { return static_cast<int>(cells_.cols()); }

  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < nrows() && col < ncols();
  }
  Cell at(int row, int col) const {
    return contains(row, col) ? static_cast<Cell>(cells_(row, col)) : Cell::Land;
  }
  bool is_water(int row, int col) const { return at(row, col) == Cell::Water; }
  bool is_water(CellIndex c) const { return is_water(c.row, c.col); }
  bool is_water(const Point& p) const;

  /// Cell containing p; nullopt outside the bounding box.
  std::optional<CellIndex> cell_of(const Point& p) const;
  /// Cell index p would have on an unbounded raster sharing this transform.
  CellIndex raw_cell_of(const Point& p) const;
  Point cell_center(CellIndex c) const;

  std::size_t water_count() const;
  /// Water area in square degrees.
  double water_area() const;

  /// FNV-1a over the transform and cell bytes.
  std::uint64_t content_hash() const;

  friend bool operator==(const GridMap& a, const GridMap& b) {
    return a.transform_ == b.transform_ && a.cells_.rows() == b.cells_.rows() &&
           a.cells_.cols() == b.cells_.cols() && (a.cells_ == b.cells_).all();
  }

 private:
  GeoTransform transform_;
  Cells cells_;
};

class MapParseError : public std::runtime_error {
 public:
  MapParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// ASCII grid: `ncols`, `nrows`, `xll`, `yll`, `cellsize` header lines followed
/// by nrows rows of ncols '0'/'1' characters, northernmost row first.
GridMap parse_map(std::istream& in);
GridMap load_map(const std::filesystem::path& path);
void write_map(std::ostream& out, const GridMap& map);
void save_map(const std::filesystem::path& path, const GridMap& map);

struct MapGenParams {
  int ncols = 100;
  int nrows = 75;
  double x_min = -63.69;
  double y_min = 44.58;
  double cell_size = 0.001;
  double water_fraction = 0.6;
  /// Lattice spacing of the coarsest noise octave, in cells.
  int feature_cells = 16;
  int octaves = 3;
};

/// Procedural coastline from seeded value noise. Only the largest 8-connected
/// water component is kept. Throws std::invalid_argument when water_fraction is
/// outside (0, 1].
GridMap generate_map(std::uint64_t seed, const MapGenParams& params);

// ---------------------------------------------------------------------------
// Actions and outcomes

enum class Action : std::uint8_t { N = 0, S, E, W, NE, NW, SE, SW };
inline constexpr int kNumActions = 8;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::N, Action::S, Action::E, Action::W, Action::NE, Action::NW, Action::SE, Action::SW};

/// Unit direction vector in (east, north) coordinates.
Eigen::Vector2d direction(Action a);
inline Action action_from_index(int index) { return static_cast<Action>(index); }
inline int action_index(Action a) { return static_cast<int>(a); }
std::string_view to_string(Action a);

enum class Outcome : std::uint8_t { HitObstacle, HitLand, ArriveTarget, VanishTarget, NormalMovement };
std::string_view to_string(Outcome o);

// ---------------------------------------------------------------------------
// Dynamic obstacles

struct Obstacle {
  Point position = Point::Zero();
  Action heading = Action::N;
  double speed = 0.0;
};

struct ObstacleField {
  std::vector<Obstacle> obstacles;
  double density = 0.0;
  std::uint64_t rng_seed = 0;
  double turn_probability = 0.0;
  Rng rng;
};

struct ObstacleSpawnParams {
  /// Obstacles per square degree of water.
  double density = 50.0;
  double speed = 0.0005;
  /// Chance per tick that an obstacle picks a new heading.
  double turn_probability = 0.05;
  /// No obstacle spawns closer than this to any keep-clear point.
  double clearance = 0.003;
};

/// Places round(density * water_area) obstacles on random water cell centers.
ObstacleField spawn_obstacles(const GridMap& map, const ObstacleSpawnParams& params,
                              std::uint64_t seed, const std::vector<Point>& keep_clear = {});

/// One motion tick. Obstacles that would leave the water re-sample a heading
/// (up to all 8) and stand still when none is viable.
ObstacleField advance_obstacles(const GridMap& map, ObstacleField field);

/// +infinity when the field is empty.
double nearest_obstacle_distance(const Point& position, const ObstacleField& field);

// ---------------------------------------------------------------------------
// Reward and outcome rules

enum class DeltaDMode { Progress, Displacement };
enum class DeltaOdMode { Approach, Absolute };

struct RewardParams {
  double psi = 1000.0;
  double phi = 20.0;
  double kappa = 0.01;
  double terminal_reward = 5.0;
  DeltaDMode delta_d_mode = DeltaDMode::Progress;
  DeltaOdMode delta_od_mode = DeltaOdMode::Approach;
};

/// -5 for land/obstacle/vanish, +5 for arrival, psi*dd - phi*dod - kappa otherwise.
double reward(Outcome outcome, double delta_d, double delta_od, const RewardParams& params = {});

struct EnvConfig {
  double step_length = 0.001;
  double arrival_radius = 0.001;
  double collision_radius = 0.001;
  double vanish_margin = 0.02;
  double max_steps_factor = 4.0;
  RewardParams reward;
  ObstacleSpawnParams obstacles;
};

struct AgentState {
  Point position = Point::Zero();
  Point goal = Point::Zero();
  int steps_taken = 0;
  int max_steps = 1;
  double initial_goal_distance = 0.0;
};

struct EpisodeSpec {
  Point origin = Point::Zero();
  Point destination = Point::Zero();
  int max_steps = 1;
};

/// ceil(factor * distance / step_length), at least 1.
int default_max_steps(double distance, const EnvConfig& config);

/// Precedence: HitLand > HitObstacle > ArriveTarget > VanishTarget > NormalMovement.
/// `obstacles` must already be advanced to the tick the agent moves into.
Outcome classify_outcome(const GridMap& map, const Point& new_position, const AgentState& state,
                         const ObstacleField& obstacles, const EnvConfig& config);

struct StepResult {
  Outcome outcome = Outcome::NormalMovement;
  double reward = 0.0;
  AgentState next_state;
  bool terminal = false;
};

/// Single-agent simulator over a shared immutable map.
class Environment {
 public:
  Environment(std::shared_ptr<const GridMap> map, EnvConfig config);

  /// Places the agent at the origin. Throws std::invalid_argument when either
  /// endpoint is on land or max_steps < 1.
  const AgentState& reset(const EpisodeSpec& spec, ObstacleField obstacles);

  /// Starts a new episode toward `goal` from the current position, keeping the
  /// obstacle field. Used for consecutive episodes of a plan.
  const AgentState& retarget(const Point& goal, int max_steps);

  /// Throws std::logic_error after the episode terminated.
  StepResult step(Action action);

  const AgentState& state() const { return state_; }
  const ObstacleField& obstacles() const { return obstacles_; }
  const GridMap& map() const { return *map_; }
  const std::shared_ptr<const GridMap>& map_ptr() const { return map_; }
  const EnvConfig& config() const { return config_; }
  bool terminal() const { return terminal_; }

 private:
  std::shared_ptr<const GridMap> map_;
  EnvConfig config_;
  AgentState state_;
  ObstacleField obstacles_;
  bool terminal_ = true;
};

}  // namespace vnav
