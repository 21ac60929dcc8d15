#include "vnav/grid_env.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

namespace vnav {

namespace {

// Absorbs round-off in degree -> cell conversions of points that sit on grid lines.
constexpr double kCellSnap = 1e-7;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

GeoTransform GeoTransform::from_corner(double xll, double yll, int ncols, int nrows,
                                       double cell_size) {
  GeoTransform t;
  t.x_min = xll;
  t.y_min = yll;
  t.x_max = xll + ncols * cell_size;
  t.y_max = yll + nrows * cell_size;
  t.cell_size = cell_size;
  return t;
}

int GeoTransform::ncols() const { return static_cast<int>(std::lround(width() / cell_size)); }
int GeoTransform::nrows() const { return static_cast<int>(std::lround(height() / cell_size)); }

void GeoTransform::validate() const {
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
  if (!(x_min < x_max)) throw std::invalid_argument("x_min must be below x_max");
  if (!(y_min < y_max)) throw std::invalid_argument("y_min must be below y_max");
}

GridMap::GridMap(GeoTransform transform, Cells cells)
    : transform_(transform), cells_(std::move(cells)) {
  transform_.validate();
  if (cells_.rows() != transform_.nrows() || cells_.cols() != transform_.ncols())
    throw std::invalid_argument("cell array does not match the transform dimensions");
  if ((cells_ > 1).any()) throw std::invalid_argument("cells must be 0 (water) or 1 (land)");
}

CellIndex GridMap::raw_cell_of(const Point& p) const {
  const double cs = transform_.cell_size;
  return {static_cast<int>(std::floor((transform_.y_max - p.y()) / cs + kCellSnap)),
          static_cast<int>(std::floor((p.x() - transform_.x_min) / cs + kCellSnap))};
}

std::optional<CellIndex> GridMap::cell_of(const Point& p) const {
  const CellIndex c = raw_cell_of(p);
  if (!contains(c.row, c.col)) return std::nullopt;
  return c;
}

bool GridMap::is_water(const Point& p) const {
  const auto c = cell_of(p);
  return c && is_water(*c);
}

Point GridMap::cell_center(CellIndex c) const {
  const double cs = transform_.cell_size;
  return {transform_.x_min + (c.col + 0.5) * cs, transform_.y_max - (c.row + 0.5) * cs};
}

std::size_t GridMap::water_count() const {
  return static_cast<std::size_t>((cells_ == 0).count());
}

double GridMap::water_area() const {
  return static_cast<double>(water_count()) * transform_.cell_size * transform_.cell_size;
}

std::uint64_t GridMap::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const double header[] = {transform_.x_min, transform_.y_min, transform_.x_max, transform_.y_max,
                           transform_.cell_size};
  fnv_mix(h, header, sizeof(header));
  const std::int64_t dims[] = {cells_.rows(), cells_.cols()};
  fnv_mix(h, dims, sizeof(dims));
  fnv_mix(h, cells_.data(), static_cast<std::size_t>(cells_.size()));
  return h;
}

// ---------------------------------------------------------------------------

Eigen::Vector2d direction(Action a) {
  constexpr double d = M_SQRT1_2;
  switch (a) {
    case Action::N: return {0.0, 1.0};
    case Action::S: return {0.0, -1.0};
    case Action::E: return {1.0, 0.0};
    case Action::W: return {-1.0, 0.0};
    case Action::NE: return {d, d};
    case Action::NW: return {-d, d};
    case Action::SE: return {d, -d};
    case Action::SW: return {-d, -d};
  }
  throw std::invalid_argument("unknown action");
}

std::string_view to_string(Action a) {
  constexpr std::array<std::string_view, kNumActions> names = {"N", "S", "E", "W",
                                                               "NE", "NW", "SE", "SW"};
  return names.at(static_cast<std::size_t>(a));
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::HitObstacle: return "HitObstacle";
    case Outcome::HitLand: return "HitLand";
    case Outcome::ArriveTarget: return "ArriveTarget";
    case Outcome::VanishTarget: return "VanishTarget";
    case Outcome::NormalMovement: return "NormalMovement";
  }
  return "?";
}

// ---------------------------------------------------------------------------

ObstacleField spawn_obstacles(const GridMap& map, const ObstacleSpawnParams& params,
                              std::uint64_t seed, const std::vector<Point>& keep_clear) {
  if (params.density < 0.0 || params.speed < 0.0)
    throw std::invalid_argument("obstacle density and speed must be non-negative");
  ObstacleField field;
  field.density = params.density;
  field.rng_seed = seed;
  field.turn_probability = params.turn_probability;
  field.rng = Rng(seed);

  std::vector<CellIndex> water;
  water.reserve(map.water_count());
  for (int r = 0; r < map.nrows(); ++r)
    for (int c = 0; c < map.ncols(); ++c)
      if (map.is_water(r, c)) water.push_back({r, c});
  if (water.empty()) return field;

  const auto count = static_cast<std::size_t>(std::llround(params.density * map.water_area()));
  constexpr int kMaxTries = 100;
  for (std::size_t i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
      const Point p = map.cell_center(water[field.rng.below(water.size())]);
      const auto heading = action_from_index(static_cast<int>(field.rng.below(kNumActions)));
      bool clear = true;
      for (const auto& k : keep_clear) clear = clear && (p - k).norm() >= params.clearance;
      if (!clear) continue;
      field.obstacles.push_back({p, heading, params.speed});
      break;
    }
  }
  return field;
}

ObstacleField advance_obstacles(const GridMap& map, ObstacleField field) {
  for (auto& ob : field.obstacles) {
    if (field.turn_probability > 0.0 && field.rng.bernoulli(field.turn_probability))
      ob.heading = action_from_index(static_cast<int>(field.rng.below(kNumActions)));
    if (ob.speed == 0.0) continue;

    const Point ahead = ob.position + ob.speed * direction(ob.heading);
    if (map.is_water(ahead)) {
      ob.position = ahead;
      continue;
    }
    std::array<int, kNumActions> order;
    std::iota(order.begin(), order.end(), 0);
    for (int i = kNumActions - 1; i > 0; --i)
      std::swap(order[i], order[field.rng.below(static_cast<std::uint64_t>(i) + 1)]);
    for (int idx : order) {
      const Action h = action_from_index(idx);
      const Point p = ob.position + ob.speed * direction(h);
      if (map.is_water(p)) {
        ob.heading = h;
        ob.position = p;
        break;
      }
    }
  }
  return field;
}

double nearest_obstacle_distance(const Point& position, const ObstacleField& field) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ob : field.obstacles) best = std::min(best, (ob.position - position).norm());
  return best;
}

// ---------------------------------------------------------------------------

double reward(Outcome outcome, double delta_d, double delta_od, const RewardParams& params) {
  switch (outcome) {
    case Outcome::VanishTarget:
    case Outcome::HitObstacle:
    case Outcome::HitLand:
      return -params.terminal_reward;
    case Outcome::ArriveTarget:
      return params.terminal_reward;
    case Outcome::NormalMovement:
      break;
  }
  return params.psi * delta_d - params.phi * delta_od - params.kappa;
}

int default_max_steps(double distance, const EnvConfig& config) {
  const double steps = std::ceil(config.max_steps_factor * distance / config.step_length - 1e-9);
  return std::max(1, static_cast<int>(steps));
}

Outcome classify_outcome(const GridMap& map, const Point& new_position, const AgentState& state,
                         const ObstacleField& obstacles, const EnvConfig& config) {
  if (!map.is_water(new_position)) return Outcome::HitLand;
  if (nearest_obstacle_distance(new_position, obstacles) < config.collision_radius)
    return Outcome::HitObstacle;
  const double goal_distance = (new_position - state.goal).norm();
  if (goal_distance < config.arrival_radius) return Outcome::ArriveTarget;
  if (goal_distance > state.initial_goal_distance + config.vanish_margin)
    return Outcome::VanishTarget;
  return Outcome::NormalMovement;
}

// ---------------------------------------------------------------------------

Environment::Environment(std::shared_ptr<const GridMap> map, EnvConfig config)
    : map_(std::move(map)), config_(config) {
  if (!map_) throw std::invalid_argument("environment needs a map");
}

const AgentState& Environment::reset(const EpisodeSpec& spec, ObstacleField obstacles) {
  if (!map_->is_water(spec.origin)) throw std::invalid_argument("origin is not on water");
  if (!map_->is_water(spec.destination)) throw std::invalid_argument("destination is not on water");
  if (spec.max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  obstacles_ = std::move(obstacles);
  state_ = AgentState{};
  state_.position = spec.origin;
  state_.goal = spec.destination;
  state_.max_steps = spec.max_steps;
  state_.initial_goal_distance = (spec.destination - spec.origin).norm();
  terminal_ = false;
  return state_;
}

const AgentState& Environment::retarget(const Point& goal, int max_steps) {
  if (!map_->is_water(goal)) throw std::invalid_argument("goal is not on water");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  state_.goal = goal;
  state_.steps_taken = 0;
  state_.max_steps = max_steps;
  state_.initial_goal_distance = (goal - state_.position).norm();
  terminal_ = false;
  return state_;
}

StepResult Environment::step(Action action) {
  if (terminal_) throw std::logic_error("step() called on a terminated episode");

  StepResult result;
  result.next_state = state_;
  AgentState& next = result.next_state;
  ++next.steps_taken;

  const double prev_goal = (state_.position - state_.goal).norm();
  if (prev_goal < config_.arrival_radius) {
    // Degenerate episode: the agent starts on its goal.
    result.outcome = Outcome::ArriveTarget;
    result.reward = reward(result.outcome, 0.0, 0.0, config_.reward);
  } else {
    const Point new_position = state_.position + config_.step_length * direction(action);
    const double prev_obstacle = nearest_obstacle_distance(state_.position, obstacles_);
    obstacles_ = advance_obstacles(*map_, std::move(obstacles_));
    result.outcome = classify_outcome(*map_, new_position, state_, obstacles_, config_);
    next.position = new_position;

    const double new_goal = (new_position - state_.goal).norm();
    const double new_obstacle = nearest_obstacle_distance(new_position, obstacles_);
    const double delta_d = config_.reward.delta_d_mode == DeltaDMode::Progress
                               ? prev_goal - new_goal
                               : (new_position - state_.position).norm();
    double delta_od = 0.0;
    if (std::isfinite(new_obstacle)) {
      delta_od = config_.reward.delta_od_mode == DeltaOdMode::Approach
                     ? prev_obstacle - new_obstacle
                     : new_obstacle;
    }
    result.reward = reward(result.outcome, delta_d, delta_od, config_.reward);
  }
  result.terminal = result.outcome != Outcome::NormalMovement || next.steps_taken >= next.max_steps;
  state_ = next;
  terminal_ = result.terminal;
  return result;
}

}  // namespace vnav
