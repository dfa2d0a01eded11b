#ifndef POMMER_NN_GRADCHECK_HPP_
#define POMMER_NN_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "pommer/nn/network.hpp"

namespace pommer::nn {

struct GradCheckReport {
  double max_relative_error = 0;
  double max_absolute_error = 0;
  int checked = 0;
  int skipped_kinks = 0;  // coordinates whose +/- eps step flipped a ReLU or pool choice
};

/// Compares backward() with central differences on every parameter.
/// `loss(outputs, grad_or_null)` returns the mean batch loss and, when asked,
/// its gradient with respect to the outputs. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor). In Train mode
/// every forward pass redraws the same dropout masks from `dropout_seed`.
template <typename Loss>
GradCheckReport gradient_check(Network<double>& net, const Eigen::MatrixXd& x, Loss&& loss,
                               double eps = 1e-4, double floor = 1e-6,
                               Mode mode = Mode::Eval, std::uint64_t dropout_seed = 0) {
  auto run = [&](typename Network<double>::Cache* cache) {
    Rng rng(dropout_seed);
    return net.forward(x, mode, &rng, cache);
  };
  auto pattern = [&] {
    Rng rng(dropout_seed);
    return net.activation_pattern(x, mode, &rng);
  };
  typename Network<double>::Cache cache;
  const Eigen::MatrixXd out = run(&cache);
  Eigen::MatrixXd d_out;
  loss(out, &d_out);
  std::vector<double> analytic(net.num_params(), 0.0);
  net.backward(cache, d_out, analytic);

  GradCheckReport r;
  auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const auto pattern_plus = pattern();
    const double f_plus = loss(run(nullptr), nullptr);
    params[i] = saved - eps;
    const auto pattern_minus = pattern();
    const double f_minus = loss(run(nullptr), nullptr);
    params[i] = saved;
    if (pattern_plus != pattern_minus) {
      ++r.skipped_kinks;
      continue;
    }
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    const double abs_err = std::abs(analytic[i] - numeric);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    r.max_absolute_error = std::max(r.max_absolute_error, abs_err);
    r.max_relative_error = std::max(r.max_relative_error, abs_err / denom);
    ++r.checked;
  }
  return r;
}

}  // namespace pommer::nn

#endif  // POMMER_NN_GRADCHECK_HPP_
