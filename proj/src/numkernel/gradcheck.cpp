#include "rsdkit/numkernel/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rsdkit::numkernel {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

template <typename Real>
GradCheckReport grad_check(GradFragment<Real>& fragment, double eps) {
  for (const auto& p : fragment.params)
    if (!p.tensor->has_grad()) p.tensor->enable_grad();
  fragment.backward();
  std::vector<std::vector<Real>> analytic;
  analytic.reserve(fragment.params.size());
  for (const auto& p : fragment.params) analytic.emplace_back(p.tensor->grad().begin(), p.tensor->grad().end());

  GradCheckReport report;
  const auto step = static_cast<Real>(eps);
  for (std::size_t pi = 0; pi < fragment.params.size(); ++pi) {
    auto values = fragment.params[pi].tensor->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Real saved = values[i];
      values[i] = saved + step;
      const double up = static_cast<double>(fragment.loss());
      values[i] = saved - step;
      const double down = static_cast<double>(fragment.loss());
      values[i] = saved;
      // Use the step actually representable in Real.
      const double h = static_cast<double>((saved + step) - (saved - step));
      const double numeric = (up - down) / h;
      const double a = static_cast<double>(analytic[pi][i]);
      const double err = relative_error(a, numeric);
      ++report.n_checked;
      if (err > report.max_relative_error || report.n_checked == 1) {
        report.max_relative_error = err;
        report.worst_param = fragment.params[pi].name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

template GradCheckReport grad_check(GradFragment<float>&, double);
template GradCheckReport grad_check(GradFragment<double>&, double);

}  // namespace rsdkit::numkernel
