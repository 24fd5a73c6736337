#include "seqtune/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "seqtune/errors.hpp"

namespace seqtune {

std::vector<double> finite_difference_gradient(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_difference_gradient: eps must be > 0");
  Tensor probe = x.clone();
  probe.set_requires_grad(false);
  std::vector<double> grad(x.numel());
  for (size_t i = 0; i < x.numel(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + eps;
    const double fp = f(probe);
    probe.data()[i] = orig - eps;
    const double fm = f(probe);
    probe.data()[i] = orig;
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace seqtune
