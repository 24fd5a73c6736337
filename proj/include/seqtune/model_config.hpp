#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "seqtune/errors.hpp"

namespace seqtune {

// Fixed special token ids shared by every vocabulary in the project.
constexpr int kPadId = 0;
constexpr int kBosId = 1;
constexpr int kEosId = 2;
constexpr int kNumSpecialTokens = 3;

struct ModelConfig {
  size_t d_model = 64;
  size_t n_enc_layers = 3;
  size_t n_dec_layers = 3;
  size_t n_heads = 4;
  size_t d_ff = 128;
  size_t vocab_size = 16;
  size_t d_in = 16;
  std::vector<size_t> frontend_strides = {2, 2};
  size_t max_target_len = 64;

  void validate() const {
    if (d_model == 0 || n_heads == 0 || d_ff == 0 || vocab_size == 0 || d_in == 0 ||
        max_target_len == 0) {
      throw ConfigError("ModelConfig: all dimension sizes must be >= 1");
    }
    if (d_model % n_heads != 0) {
      throw ConfigError("ModelConfig: d_model (" + std::to_string(d_model) +
                        ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
    }
    for (size_t s : frontend_strides) {
      if (s == 0) throw ConfigError("ModelConfig: frontend strides must be >= 1");
    }
  }

  size_t frontend_total_stride() const {
    size_t p = 1;
    for (size_t s : frontend_strides) p *= s;
    return p;
  }

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace seqtune
