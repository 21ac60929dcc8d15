#pragma once

#include "vnav/tinynn.hpp"

#include <algorithm>
#include <cmath>

namespace vnav::testing {

/// Largest relative error between analytic and central-difference gradients
/// of L = sum(weights .* net(x)) over every parameter and every input.
inline double gradient_check(nn::Network<double>& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& weights,
                             double h = 1e-5) {
  auto loss = [&](const Eigen::MatrixXd& in) { return net.predict(in).cwiseProduct(weights).sum(); };
  auto rel = [](double a, double n) { return std::abs(a - n) / std::max(1e-6, std::abs(a) + std::abs(n)); };

  net.zero_grad();
  net.forward(x);
  net.backward(weights);
  double worst = 0.0;
  for (auto& p : net.parameters()) {
    for (Eigen::Index i = 0; i < p.value->size(); ++i) {
      double& w = p.value->data()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss(x);
      w = saved - h;
      const double down = loss(x);
      w = saved;
      worst = std::max(worst, rel(p.grad->data()[i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

}  // namespace vnav::testing
