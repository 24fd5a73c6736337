#pragma once

#include <vector>

#include "seqtune/tensor.hpp"

namespace seqtune {

// One training/eval item: input frames plus the reference content tokens in
// the model's vocabulary space (specials are added by the loss/decoder).
struct Sample {
  Tensor frames;
  std::vector<int> target;
};

}  // namespace seqtune
