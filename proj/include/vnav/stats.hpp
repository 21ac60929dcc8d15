#pragma once

#include <span>
#include <stdexcept>

namespace vnav {

class DegenerateSample : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  /// Two-sided.
  double p = 1.0;
};

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Two-sided survival probability P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

/// Welch's unequal-variance t-test of mean(a) - mean(b). Throws
/// std::invalid_argument for samples shorter than 2 and DegenerateSample when
/// both samples have zero variance.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace vnav
