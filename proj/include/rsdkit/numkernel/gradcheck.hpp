#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "rsdkit/numkernel/tensor.hpp"

namespace rsdkit::numkernel {

/// A differentiable piece of a network frozen at one evaluation point. Inputs
/// whose gradients should be checked are listed as params too.
template <typename Real>
struct GradFragment {
  std::vector<ParamRef<Real>> params;
  std::function<Real()> loss;      // must not change any state besides reading params
  std::function<void()> backward;  // fills every param's grad buffer (overwrite, not accumulate)
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t n_checked = 0;
};

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares analytic gradients against central differences
/// (L(w + eps) - L(w - eps)) / 2 eps for every entry of every param.
template <typename Real>
GradCheckReport grad_check(GradFragment<Real>& fragment, double eps);

}  // namespace rsdkit::numkernel
