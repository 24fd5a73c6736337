#pragma once

#include <cstdint>
#include <vector>

#include "seqtune/rng.hpp"
#include "seqtune/tape.hpp"
#include "seqtune/tensor.hpp"

namespace seqtune {

// Boolean attention mask over (query row, key column). Plain data, never on
// the tape.
struct Mask {
  size_t rows = 0, cols = 0;
  std::vector<uint8_t> allow;

  static Mask all_visible(size_t rows, size_t cols) {
    Mask m;
    m.rows = rows;
    m.cols = cols;
    m.allow.assign(rows * cols, 1);
    return m;
  }
  bool at(size_t r, size_t c) const { return allow[r * cols + c] != 0; }
  void set(size_t r, size_t c, bool v) { allow[r * cols + c] = v ? 1 : 0; }
};

// ---------------------------------------------------------------------------
// Differentiable primitives. Each validates shapes (ShapeError names the op
// and both shapes), computes forward, and records itself on the active tape
// when any input requires grad.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);      // (m,k)x(k,n) -> (m,n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);   // (m,k)x(n,k)^T -> (m,n)
Tensor add(const Tensor& a, const Tensor& b);         // same shape
Tensor scale(const Tensor& a, double c);
Tensor add_bias(const Tensor& x, const Tensor& b);    // (t,d) + (d,) broadcast over rows
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, size_t r0, size_t r1);  // rows [r0, r1)
Tensor slice_cols(const Tensor& x, size_t c0, size_t c1);
// Groups `stride` consecutive rows into one row: (t,w) -> (t/stride, stride*w),
// dropping the remainder rows. Forward of the strided frontend convolutions.
Tensor patch_rows(const Tensor& x, size_t stride);
Tensor softmax_rows(const Tensor& x);
// Row softmax over allowed positions only; masked entries are exactly zero.
// A fully masked row is an error.
Tensor masked_softmax_rows(const Tensor& x, const Mask& mask);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact erf form
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
// Mean negative log-likelihood over non-pad positions; all-pad is an error.
Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets, int pad_id);
Tensor sum(const Tensor& x);  // -> scalar

}  // namespace seqtune
