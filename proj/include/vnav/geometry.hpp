#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace vnav {

/// (longitude, latitude) in degrees.
using Point = Eigen::Vector2d;

/// Perpendicular distance from p to the segment [a, b]. A zero-length segment
/// degrades to the point-to-point distance.
template <typename DerivedP, typename DerivedA, typename DerivedB>
typename DerivedP::Scalar segment_distance(const Eigen::MatrixBase<DerivedP>& p,
                                           const Eigen::MatrixBase<DerivedA>& a,
                                           const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedP::Scalar;
  const auto ab = (b - a).eval();
  const Scalar len2 = ab.squaredNorm();
  if (len2 == Scalar(0)) return (p - a).norm();
  Scalar t = (p - a).dot(ab) / len2;
  t = std::clamp(t, Scalar(0), Scalar(1));
  return (p - (a + t * ab)).norm();
}

/// Distance from p to the infinite line through a and b (point distance when a == b).
template <typename DerivedP, typename DerivedA, typename DerivedB>
typename DerivedP::Scalar line_distance(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedP::Scalar;
  const auto ab = (b - a).eval();
  const Scalar len = ab.norm();
  if (len == Scalar(0)) return (p - a).norm();
  const auto ap = (p - a).eval();
  return std::abs(ab.x() * ap.y() - ab.y() * ap.x()) / len;
}

}  // namespace vnav
