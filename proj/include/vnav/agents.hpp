#pragma once

#include "vnav/dqn.hpp"
#include "vnav/grid_env.hpp"
#include "vnav/localview.hpp"
#include "vnav/planner.hpp"

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

namespace vnav {

enum class AgentKind { Vvn, Vnplv };

std::string_view to_string(AgentKind kind);
/// Accepts "vvn" or "vnplv".
AgentKind parse_agent_kind(std::string_view text);

/// Default network for each agent; the VNPLV input is the 3-channel local view.
std::string default_descriptor(AgentKind kind, const LocalViewParams& view = {});

/// Current position and final destination, min-max normalised to the bounding
/// box and clamped to [0, 1].
struct VvnObservation {
  Eigen::Vector4d coords = Eigen::Vector4d::Zero();

  Eigen::Index input_size() const { return 4; }
  void write_to(Eigen::Ref<Eigen::VectorXd> out) const { out = coords; }
};

VvnObservation vvn_encode(const Point& agent, const Point& destination, const GeoTransform& transform);
inline VvnObservation vvn_encode(const AgentState& agent, const Point& destination, const GeoTransform& transform) {
  return vvn_encode(agent.position, destination, transform);
}

/// Bit-packed local view, the replay-buffer form of a VNPLV observation.
class VnplvObservation {
 public:
  VnplvObservation() = default;
  explicit VnplvObservation(const LocalView& view);

  int size() const { return size_; }
  ViewCell goal_cell() const { return goal_; }
  bool land(int row, int col) const { return bit(land_, row * size_ + col); }
  bool obstacle(int row, int col) const { return bit(obstacles_, row * size_ + col); }

  Eigen::Index input_size() const { return 3 * static_cast<Eigen::Index>(size_) * size_; }
  void write_to(Eigen::Ref<Eigen::VectorXd> out) const;

  friend bool operator==(const VnplvObservation&, const VnplvObservation&) = default;

 private:
  static bool bit(const std::vector<std::uint64_t>& bits, int i) {
    return (bits[static_cast<std::size_t>(i) / 64] >> (i % 64)) & 1U;
  }

  int size_ = 0;
  std::vector<std::uint64_t> land_;
  std::vector<std::uint64_t> obstacles_;
  ViewCell goal_;
};

struct PlanProgress {
  PlanSpec plan;
  std::size_t current_waypoint = 0;

  const Point& current_goal() const { return plan.waypoints.at(current_waypoint); }
  bool at_last() const { return current_waypoint + 1 >= plan.waypoints.size(); }
};

/// Moves to the next waypoint once the agent is within arrival_radius of the
/// current one. The final waypoint is never passed.
PlanProgress advance_plan(PlanProgress progress, const Point& agent_position, double arrival_radius = 0.001);

/// Local view aimed at the current intermediary goal.
VnplvObservation vnplv_encode(const GridMap& map, const ObstacleField& obstacles, const Point& agent,
                              const PlanProgress& progress, const LocalViewParams& params);

/// Q-network action choice mapped onto [N, S, E, W, NE, NW, SE, SW].
template <Observation Obs>
Action act(const nn::Network<double>& net, const Obs& observation, double explore_prob, Rng& rng) {
  return action_from_index(select_action(net, encode(observation), explore_prob, rng));
}

// ---------------------------------------------------------------------------
// Rollouts

struct RolloutResult {
  bool success = false;
  Outcome final_outcome = Outcome::NormalMovement;
  int steps = 0;
  int episodes = 0;
  /// Goal of every episode in the order it was pursued.
  std::vector<Point> goals;
};

/// A rollout driver supplies actions and receives every transition.
template <class D, class Obs>
concept RolloutDriver = requires(D& d, const Obs& o, Action a, const StepResult& r) {
  { d.choose(o) } -> std::convertible_to<Action>;
  d.record(o, a, r, o);
};

/// One origin -> destination episode fed with VVN observations.
template <class Driver>
  requires RolloutDriver<Driver, VvnObservation>
RolloutResult run_vvn_episode(Environment& env, const EpisodeSpec& spec, ObstacleField obstacles, Driver& driver) {
  RolloutResult result;
  env.reset(spec, std::move(obstacles));
  result.episodes = 1;
  result.goals.push_back(spec.destination);
  const GeoTransform& t = env.map().transform();
  VvnObservation obs = vvn_encode(env.state(), spec.destination, t);
  while (true) {
    const Action a = driver.choose(obs);
    const StepResult r = env.step(a);
    ++result.steps;
    const VvnObservation next = vvn_encode(r.next_state, spec.destination, t);
    driver.record(obs, a, r, next);
    if (r.terminal) {
      result.final_outcome = r.outcome;
      result.success = r.outcome == Outcome::ArriveTarget;
      return result;
    }
    obs = next;
  }
}

/// A plan executed as consecutive episodes, one per waypoint. Any failed
/// episode fails the plan; success means arriving at the final waypoint.
template <class Driver>
  requires RolloutDriver<Driver, VnplvObservation>
RolloutResult run_vnplv_plan(Environment& env, const PlanSpec& plan, ObstacleField obstacles,
                             const LocalViewParams& view, Driver& driver) {
  RolloutResult result;
  if (plan.waypoints.empty()) throw std::invalid_argument("plan has no waypoints");
  PlanProgress progress{plan, 0};
  const auto& cfg = env.config();
  const Point& first = progress.current_goal();
  env.reset({plan.origin, first, default_max_steps((first - plan.origin).norm(), cfg)}, std::move(obstacles));
  result.episodes = 1;
  result.goals.push_back(first);

  VnplvObservation obs = vnplv_encode(env.map(), env.obstacles(), env.state().position, progress, view);
  while (true) {
    const Action a = driver.choose(obs);
    const StepResult r = env.step(a);
    ++result.steps;
    VnplvObservation next = vnplv_encode(env.map(), env.obstacles(), r.next_state.position, progress, view);
    driver.record(obs, a, r, next);
    if (!r.terminal) {
      obs = std::move(next);
      continue;
    }
    if (r.outcome != Outcome::ArriveTarget || progress.at_last()) {
      result.final_outcome = r.outcome;
      result.success = r.outcome == Outcome::ArriveTarget && progress.at_last();
      return result;
    }
    const std::size_t before = progress.current_waypoint;
    progress = advance_plan(std::move(progress), r.next_state.position, cfg.arrival_radius);
    if (progress.current_waypoint == before) {
      // Arrival was declared but the waypoint test disagrees; treat as failure.
      result.final_outcome = r.outcome;
      return result;
    }
    const Point& goal = progress.current_goal();
    env.retarget(goal, default_max_steps((goal - r.next_state.position).norm(), cfg));
    ++result.episodes;
    result.goals.push_back(goal);
    obs = vnplv_encode(env.map(), env.obstacles(), env.state().position, progress, view);
  }
}

/// Greedy (or epsilon-greedy) driver that only reads the network.
struct PolicyDriver {
  const nn::Network<double>* net = nullptr;
  double explore_prob = 0.0;
  Rng* rng = nullptr;

  template <Observation Obs>
  Action choose(const Obs& o) {
    return act(*net, o, explore_prob, *rng);
  }
  template <Observation Obs>
  void record(const Obs&, Action, const StepResult&, const Obs&) {}
};

}  // namespace vnav
