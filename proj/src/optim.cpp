#include "seqtune/optim.hpp"

#include <cmath>

#include "seqtune/errors.hpp"

namespace seqtune {

void optimizer_step(std::vector<Tensor>& params, OptimState& state, const OptimConfig& cfg) {
  if (!(cfg.lr > 0.0)) {
    throw ConfigError("optimizer_step: learning rate must be > 0, got " + std::to_string(cfg.lr));
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].numel(), 0.0);
      state.v[i].assign(params[i].numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ConfigError("optimizer_step: state holds " + std::to_string(state.m.size()) +
                      " parameters, got " + std::to_string(params.size()));
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (p.has_grad() && p.grad().size() != p.numel()) {
      throw ShapeError("optimizer_step: grad/param size mismatch for parameter " +
                       std::to_string(i));
    }
    if (state.m[i].size() != p.numel()) {
      throw ShapeError("optimizer_step: state/param size mismatch for parameter " +
                       std::to_string(i));
    }
    const double* g = p.has_grad() ? p.grad().data() : nullptr;
    double* w = p.data();
    const size_t n = p.numel();
    switch (cfg.kind) {
      case OptKind::sgd:
        if (g) {
          for (size_t j = 0; j < n; ++j) w[j] -= cfg.lr * g[j];
        }
        break;
      case OptKind::adam: {
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        for (size_t j = 0; j < n; ++j) {
          const double gj = g ? g[j] : 0.0;
          m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
          v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
          const double mhat = m[j] / bc1;
          const double vhat = v[j] / bc2;
          w[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        break;
      }
    }
  }
}

OptKind opt_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptKind::sgd;
  if (s == "adam") return OptKind::adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

std::string to_string(OptKind k) { return k == OptKind::sgd ? "sgd" : "adam"; }

}  // namespace seqtune
