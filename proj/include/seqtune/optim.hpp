#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqtune/tensor.hpp"

namespace seqtune {

enum class OptKind { sgd, adam };

struct OptimConfig {
  OptKind kind = OptKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter moment buffers; sized lazily on the first step.
struct OptimState {
  uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// In-place update of every parameter from its .grad(). SGD: p -= lr*g.
// Adam: bias-corrected first/second moments. Parameters without an allocated
// gradient are treated as zero-gradient.
void optimizer_step(std::vector<Tensor>& params, OptimState& state, const OptimConfig& cfg);

OptKind opt_kind_from_string(const std::string& s);
std::string to_string(OptKind k);

}  // namespace seqtune
