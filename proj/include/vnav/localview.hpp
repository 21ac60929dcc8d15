#pragma once

#include "vnav/geometry.hpp"
#include "vnav/grid_env.hpp"

#include <Eigen/Core>

namespace vnav {

/// Cell inside a local view; (0, 0) is the north-west corner.
struct ViewCell {
  int row = 0;
  int col = 0;
  friend bool operator==(const ViewCell&, const ViewCell&) = default;
};

struct LocalViewParams {
  /// Odd window edge length in cells.
  int size = 33;
  /// Shadow goals stay this many cells inside the window edge.
  int margin = 3;

  int center() const { return size / 2; }
  int inner_radius() const { return size / 2 - margin; }
  /// Throws std::invalid_argument unless size is odd and margin < size / 2.
  void validate() const;
};

/// Agent-centred window with land, obstacle and goal channels, each 0/1.
struct LocalView {
  using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int size = 0;
  Mask land;
  Mask obstacles;
  Mask goal;
  ViewCell goal_cell;

  int center() const { return size / 2; }
  /// Channel-major (land, obstacles, goal) flattening, row-major within a channel.
  Eigen::VectorXd flatten() const;
};

/// Projects a goal offset onto the window shrunk by the margin. `offset` is
/// goal minus agent in cells as (rows southward, cols eastward). Offsets
/// already inside the shrunk window map to their own cell.
ViewCell shadow_cell(const Eigen::Vector2d& offset, const LocalViewParams& params);

/// Shadow of `goal` in the view centred on the agent's cell. Goals whose cell
/// falls inside the shrunk window return that cell; a goal on the agent's cell
/// returns the centre.
ViewCell shadow_goal(const GeoTransform& transform, const Point& agent, const Point& goal,
                     const LocalViewParams& params);

/// Rasterises the neighbourhood of the agent's cell. Cells off the map read as land.
LocalView extract(const GridMap& map, const ObstacleField& obstacles, const Point& agent,
                  const Point& goal, const LocalViewParams& params);

}  // namespace vnav
