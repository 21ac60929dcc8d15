#include "vnav/localview.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vnav {

namespace {

CellIndex unbounded_cell(const GeoTransform& t, const Point& p) {
  return {static_cast<int>(std::floor((t.y_max - p.y()) / t.cell_size + 1e-7)),
          static_cast<int>(std::floor((p.x() - t.x_min) / t.cell_size + 1e-7))};
}

}  // namespace

void LocalViewParams::validate() const {
  if (size < 1 || size % 2 == 0) throw std::invalid_argument("local view size must be odd");
  if (margin < 0 || 2 * margin >= size)
    throw std::invalid_argument("local view margin must be below size / 2");
}

Eigen::VectorXd LocalView::flatten() const {
  const Eigen::Index n = static_cast<Eigen::Index>(size) * size;
  Eigen::VectorXd out(3 * n);
  out.segment(0, n) = Eigen::Map<const Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>>(land.data(), n).cast<double>();
  out.segment(n, n) =
      Eigen::Map<const Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>>(obstacles.data(), n).cast<double>();
  out.segment(2 * n, n) =
      Eigen::Map<const Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>>(goal.data(), n).cast<double>();
  return out;
}

ViewCell shadow_cell(const Eigen::Vector2d& offset, const LocalViewParams& params) {
  const int c = params.center();
  const int inner = params.inner_radius();
  const double reach = offset.cwiseAbs().maxCoeff();
  if (reach <= inner + 0.5) {
    return {c + static_cast<int>(std::lround(offset.x())), c + static_cast<int>(std::lround(offset.y()))};
  }
  const Eigen::Vector2d scaled = offset * (inner / reach);
  const auto clamp = [&](double v) {
    return std::clamp(c + static_cast<int>(std::lround(v)), c - inner, c + inner);
  };
  return {clamp(scaled.x()), clamp(scaled.y())};
}

ViewCell shadow_goal(const GeoTransform& transform, const Point& agent, const Point& goal,
                     const LocalViewParams& params) {
  const CellIndex a = unbounded_cell(transform, agent);
  const CellIndex g = unbounded_cell(transform, goal);
  const int dr = g.row - a.row, dc = g.col - a.col;
  const int inner = params.inner_radius();
  if (std::abs(dr) <= inner && std::abs(dc) <= inner) return {params.center() + dr, params.center() + dc};
  const Eigen::Vector2d offset((agent.y() - goal.y()) / transform.cell_size,
                               (goal.x() - agent.x()) / transform.cell_size);
  return shadow_cell(offset, params);
}

LocalView extract(const GridMap& map, const ObstacleField& obstacles, const Point& agent,
                  const Point& goal, const LocalViewParams& params) {
  const int k = params.size;
  const int c = params.center();
  const CellIndex a = unbounded_cell(map.transform(), agent);

  LocalView view;
  view.size = k;
  view.land.resize(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) view.land(i, j) = map.is_water(a.row - c + i, a.col - c + j) ? 0 : 1;

  view.obstacles = LocalView::Mask::Zero(k, k);
  for (const auto& ob : obstacles.obstacles) {
    const CellIndex o = unbounded_cell(map.transform(), ob.position);
    const int i = o.row - a.row + c, j = o.col - a.col + c;
    if (i >= 0 && j >= 0 && i < k && j < k) view.obstacles(i, j) = 1;
  }

  view.goal = LocalView::Mask::Zero(k, k);
  view.goal_cell = shadow_goal(map.transform(), agent, goal, params);
  view.goal(view.goal_cell.row, view.goal_cell.col) = 1;
  return view;
}

}  // namespace vnav
