#include "vnav/agents.hpp"

#include <algorithm>
#include <stdexcept>

namespace vnav {

std::string_view to_string(AgentKind kind) { return kind == AgentKind::Vvn ? "vvn" : "vnplv"; }

AgentKind parse_agent_kind(std::string_view text) {
  if (text == "vvn") return AgentKind::Vvn;
  if (text == "vnplv") return AgentKind::Vnplv;
  throw std::invalid_argument("unknown agent '" + std::string(text) + "' (expected vvn or vnplv)");
}

std::string default_descriptor(AgentKind kind, const LocalViewParams& view) {
  if (kind == AgentKind::Vvn) return "in=4 dense(64) relu dense(64) relu dense(8) linear";
  const std::string k = std::to_string(view.size);
  return "in=3x" + k + "x" + k +
         " conv(16,3,2) relu conv(32,3,2) relu flatten dense(128) relu dense(8) linear";
}

VvnObservation vvn_encode(const Point& agent, const Point& destination, const GeoTransform& t) {
  const auto nx = [&](double x) { return std::clamp((x - t.x_min) / t.width(), 0.0, 1.0); };
  const auto ny = [&](double y) { return std::clamp((y - t.y_min) / t.height(), 0.0, 1.0); };
  VvnObservation o;
  o.coords << nx(agent.x()), ny(agent.y()), nx(destination.x()), ny(destination.y());
  return o;
}

VnplvObservation::VnplvObservation(const LocalView& view) : size_(view.size), goal_(view.goal_cell) {
  const std::size_t cells = static_cast<std::size_t>(size_) * static_cast<std::size_t>(size_);
  land_.assign((cells + 63) / 64, 0);
  obstacles_.assign((cells + 63) / 64, 0);
  for (int i = 0; i < size_; ++i)
    for (int j = 0; j < size_; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i * size_ + j);
      if (view.land(i, j)) land_[idx / 64] |= std::uint64_t{1} << (idx % 64);
      if (view.obstacles(i, j)) obstacles_[idx / 64] |= std::uint64_t{1} << (idx % 64);
    }
}

void VnplvObservation::write_to(Eigen::Ref<Eigen::VectorXd> out) const {
  const int cells = size_ * size_;
  for (int i = 0; i < cells; ++i) {
    out(i) = bit(land_, i) ? 1.0 : 0.0;
    out(cells + i) = bit(obstacles_, i) ? 1.0 : 0.0;
    out(2 * cells + i) = 0.0;
  }
  out(2 * cells + goal_.row * size_ + goal_.col) = 1.0;
}

PlanProgress advance_plan(PlanProgress progress, const Point& agent_position, double arrival_radius) {
  if (!progress.at_last() && (agent_position - progress.current_goal()).norm() < arrival_radius)
    ++progress.current_waypoint;
  return progress;
}

VnplvObservation vnplv_encode(const GridMap& map, const ObstacleField& obstacles, const Point& agent,
                              const PlanProgress& progress, const LocalViewParams& params) {
  return VnplvObservation(extract(map, obstacles, agent, progress.current_goal(), params));
}

}  // namespace vnav
