#include "seqtune/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "seqtune/errors.hpp"

namespace seqtune {

namespace {

// ---------------------------------------------------------------------------
// Raw accumulate-kernels shared by forwards and backwards.
// ---------------------------------------------------------------------------

// C(m,n) += A(m,k) * B(k,n)
void mm_acc(const double* A, const double* B, double* C, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = A + i * k;
    double* crow = C + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = B + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m,n) += A(m,k) * B(n,k)^T
void mm_nt_acc(const double* A, const double* B, double* C, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = A + i * k;
    double* crow = C + i * n;
    for (size_t j = 0; j < n; ++j) {
      const double* brow = B + j * k;
      double acc = 0.0;
      for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C(k,n) += A(m,k)^T * B(m,n)
void mm_tn_acc(const double* A, const double* B, double* C, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = A + i * k;
    const double* brow = B + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* crow = C + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Tape* recording(std::initializer_list<const Tensor*> ins) {
  Tape* t = active_tape();
  if (!t) return nullptr;
  for (const Tensor* in : ins) {
    if (in->requires_grad()) return t;
  }
  return nullptr;
}

bool any_grad(std::initializer_list<const Tensor*> ins) {
  for (const Tensor* in : ins) {
    if (in->requires_grad()) return true;
  }
  return false;
}

void require_2d(const char* op, const Tensor& t) {
  if (!t.defined() || t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-d tensor, got " +
                     (t.defined() ? shape_str(t.shape()) : std::string("<undefined>")));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// matmul family
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n}, any_grad({&a, &b}));
  mm_acc(a.data(), b.data(), out.data(), m, k, n);
  if (Tape* t = recording({&a, &b})) {
    t->record("matmul", {a, b}, out, [a, b, out, m, k, n]() mutable {
      const double* dC = out.grad().data();
      if (a.requires_grad()) {
        a.ensure_grad();
        mm_nt_acc(dC, b.data(), a.grad().data(), m, n, k);
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        mm_tn_acc(a.data(), dC, b.grad().data(), m, k, n);
      }
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d("matmul_nt", a);
  require_2d("matmul_nt", b);
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  }
  const size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out = Tensor::zeros({m, n}, any_grad({&a, &b}));
  mm_nt_acc(a.data(), b.data(), out.data(), m, k, n);
  if (Tape* t = recording({&a, &b})) {
    t->record("matmul_nt", {a, b}, out, [a, b, out, m, k, n]() mutable {
      const double* dC = out.grad().data();
      if (a.requires_grad()) {
        a.ensure_grad();
        mm_acc(dC, b.data(), a.grad().data(), m, n, k);
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        mm_tn_acc(dC, a.data(), b.grad().data(), m, n, k);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// elementwise / broadcast
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
    throw ShapeError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros(a.shape(), any_grad({&a, &b}));
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (Tape* t = recording({&a, &b})) {
    t->record("add", {a, b}, out, [a, b, out, n]() mutable {
      const double* dC = out.grad().data();
      if (a.requires_grad()) {
        a.ensure_grad();
        for (size_t i = 0; i < n; ++i) a.grad()[i] += dC[i];
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        for (size_t i = 0; i < n; ++i) b.grad()[i] += dC[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
  const size_t n = a.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = c * a.data()[i];
  if (Tape* t = recording({&a})) {
    t->record("scale", {a}, out, [a, out, c, n]() mutable {
      a.ensure_grad();
      const double* dC = out.grad().data();
      for (size_t i = 0; i < n; ++i) a.grad()[i] += c * dC[i];
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  require_2d("add_bias", x);
  if (!b.defined() || b.numel() != x.cols()) {
    throw ShapeError("add_bias: " + shape_str(x.shape()) + " + bias " + shape_str(b.shape()));
  }
  const size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::zeros(x.shape(), any_grad({&x, &b}));
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) out.data()[r * cols + c] = x.data()[r * cols + c] + b.data()[c];
  }
  if (Tape* t = recording({&x, &b})) {
    t->record("add_bias", {x, b}, out, [x, b, out, rows, cols]() mutable {
      const double* dC = out.grad().data();
      if (x.requires_grad()) {
        x.ensure_grad();
        for (size_t i = 0; i < rows * cols; ++i) x.grad()[i] += dC[i];
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        for (size_t r = 0; r < rows; ++r) {
          for (size_t c = 0; c < cols; ++c) b.grad()[c] += dC[r * cols + c];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// concat / slice / patch
// ---------------------------------------------------------------------------

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const size_t cols = parts[0].cols();
  size_t rows = 0;
  bool grad = false;
  for (const Tensor& p : parts) {
    require_2d("concat_rows", p);
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    rows += p.rows();
    grad = grad || p.requires_grad();
  }
  Tensor out = Tensor::zeros({rows, cols}, grad);
  size_t r = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data(), p.data() + p.numel(), out.data() + r * cols);
    r += p.rows();
  }
  if (Tape* t = active_tape(); t && grad) {
    std::vector<Tensor> ins = parts;
    t->record("concat_rows", ins, out, [ins, out, cols]() mutable {
      const double* dC = out.grad().data();
      size_t r = 0;
      for (Tensor& p : ins) {
        if (p.requires_grad()) {
          p.ensure_grad();
          const size_t n = p.numel();
          double* g = p.grad().data();
          const double* src = dC + r * cols;
          for (size_t i = 0; i < n; ++i) g[i] += src[i];
        }
        r += p.rows();
      }
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const size_t rows = parts[0].rows();
  size_t cols = 0;
  bool grad = false;
  for (const Tensor& p : parts) {
    require_2d("concat_cols", p);
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    cols += p.cols();
    grad = grad || p.requires_grad();
  }
  Tensor out = Tensor::zeros({rows, cols}, grad);
  size_t c0 = 0;
  for (const Tensor& p : parts) {
    for (size_t r = 0; r < rows; ++r) {
      std::copy(p.data() + r * p.cols(), p.data() + (r + 1) * p.cols(),
                out.data() + r * cols + c0);
    }
    c0 += p.cols();
  }
  if (Tape* t = active_tape(); t && grad) {
    std::vector<Tensor> ins = parts;
    t->record("concat_cols", ins, out, [ins, out, rows, cols]() mutable {
      const double* dC = out.grad().data();
      size_t c0 = 0;
      for (Tensor& p : ins) {
        const size_t pc = p.cols();
        if (p.requires_grad()) {
          p.ensure_grad();
          double* g = p.grad().data();
          for (size_t r = 0; r < rows; ++r) {
            const double* src = dC + r * cols + c0;
            for (size_t c = 0; c < pc; ++c) g[r * pc + c] += src[c];
          }
        }
        c0 += pc;
      }
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, size_t r0, size_t r1) {
  require_2d("slice_rows", x);
  if (r0 > r1 || r1 > x.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                     ") out of " + shape_str(x.shape()));
  }
  const size_t cols = x.cols();
  Tensor out = Tensor::zeros({r1 - r0, cols}, x.requires_grad());
  std::copy(x.data() + r0 * cols, x.data() + r1 * cols, out.data());
  if (Tape* t = recording({&x})) {
    t->record("slice_rows", {x}, out, [x, out, r0, cols]() mutable {
      x.ensure_grad();
      const double* dC = out.grad().data();
      double* g = x.grad().data() + r0 * cols;
      const size_t n = out.numel();
      for (size_t i = 0; i < n; ++i) g[i] += dC[i];
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, size_t c0, size_t c1) {
  require_2d("slice_cols", x);
  if (c0 > c1 || c1 > x.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                     ") out of " + shape_str(x.shape()));
  }
  const size_t rows = x.rows(), cols = x.cols(), w = c1 - c0;
  Tensor out = Tensor::zeros({rows, w}, x.requires_grad());
  for (size_t r = 0; r < rows; ++r) {
    std::copy(x.data() + r * cols + c0, x.data() + r * cols + c1, out.data() + r * w);
  }
  if (Tape* t = recording({&x})) {
    t->record("slice_cols", {x}, out, [x, out, c0, rows, cols, w]() mutable {
      x.ensure_grad();
      const double* dC = out.grad().data();
      double* g = x.grad().data();
      for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < w; ++c) g[r * cols + c0 + c] += dC[r * w + c];
      }
    });
  }
  return out;
}

Tensor patch_rows(const Tensor& x, size_t stride) {
  require_2d("patch_rows", x);
  if (stride == 0) throw ShapeError("patch_rows: stride must be >= 1");
  const size_t t_in = x.rows(), w = x.cols();
  const size_t t_out = t_in / stride;
  if (t_out == 0) {
    throw ShapeError("patch_rows: input has " + std::to_string(t_in) +
                     " rows, need at least " + std::to_string(stride));
  }
  Tensor out = Tensor::zeros({t_out, stride * w}, x.requires_grad());
  std::copy(x.data(), x.data() + t_out * stride * w, out.data());
  if (Tape* t = recording({&x})) {
    t->record("patch_rows", {x}, out, [x, out]() mutable {
      x.ensure_grad();
      const double* dC = out.grad().data();
      double* g = x.grad().data();
      const size_t n = out.numel();
      for (size_t i = 0; i < n; ++i) g[i] += dC[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax / normalization / activations
// ---------------------------------------------------------------------------

Tensor masked_softmax_rows(const Tensor& x, const Mask& mask) {
  require_2d("masked_softmax", x);
  if (mask.rows != x.rows() || mask.cols != x.cols()) {
    throw ShapeError("masked_softmax: input " + shape_str(x.shape()) + " vs mask (" +
                     std::to_string(mask.rows) + "x" + std::to_string(mask.cols) + ")");
  }
  const size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = out.data() + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < cols; ++c) {
      if (mask.at(r, c)) mx = std::max(mx, xr[c]);
    }
    if (!std::isfinite(mx) && mx < 0) {
      throw ShapeError("masked_softmax: row " + std::to_string(r) + " is fully masked");
    }
    double z = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      if (mask.at(r, c)) {
        yr[c] = std::exp(xr[c] - mx);
        z += yr[c];
      }
    }
    for (size_t c = 0; c < cols; ++c) {
      if (mask.at(r, c)) yr[c] /= z;
    }
  }
  if (Tape* t = recording({&x})) {
    Mask m = mask;
    t->record("masked_softmax", {x}, out, [x, out, m, rows, cols]() mutable {
      x.ensure_grad();
      const double* P = out.data();
      const double* dP = out.grad().data();
      double* g = x.grad().data();
      for (size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (size_t c = 0; c < cols; ++c) {
          if (m.at(r, c)) s += dP[r * cols + c] * P[r * cols + c];
        }
        for (size_t c = 0; c < cols; ++c) {
          if (m.at(r, c)) g[r * cols + c] += P[r * cols + c] * (dP[r * cols + c] - s);
        }
      }
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_2d("softmax", x);
  return masked_softmax_rows(x, Mask::all_visible(x.rows(), x.cols()));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_2d("layer_norm", x);
  const size_t rows = x.rows(), cols = x.cols();
  if (gain.numel() != cols || bias.numel() != cols) {
    throw ShapeError("layer_norm: input " + shape_str(x.shape()) + " vs gain " +
                     shape_str(gain.shape()) + ", bias " + shape_str(bias.shape()));
  }
  Tensor out = Tensor::zeros(x.shape(), any_grad({&x, &gain, &bias}));
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = out.data() + r * cols;
    double mu = 0.0;
    for (size_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (size_t c = 0; c < cols; ++c) yr[c] = (xr[c] - mu) * inv * gain.data()[c] + bias.data()[c];
  }
  if (Tape* t = recording({&x, &gain, &bias})) {
    t->record("layer_norm", {x, gain, bias}, out, [x, gain, bias, out, rows, cols, eps]() mutable {
      const double* dY = out.grad().data();
      std::vector<double> xhat(cols), dxhat(cols);
      for (size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * cols;
        double mu = 0.0;
        for (size_t c = 0; c < cols; ++c) mu += xr[c];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (size_t c = 0; c < cols; ++c) xhat[c] = (xr[c] - mu) * inv;
        const double* dyr = dY + r * cols;
        if (gain.requires_grad()) {
          gain.ensure_grad();
          for (size_t c = 0; c < cols; ++c) gain.grad()[c] += dyr[c] * xhat[c];
        }
        if (bias.requires_grad()) {
          bias.ensure_grad();
          for (size_t c = 0; c < cols; ++c) bias.grad()[c] += dyr[c];
        }
        if (x.requires_grad()) {
          x.ensure_grad();
          double m1 = 0.0, m2 = 0.0;
          for (size_t c = 0; c < cols; ++c) {
            dxhat[c] = dyr[c] * gain.data()[c];
            m1 += dxhat[c];
            m2 += dxhat[c] * xhat[c];
          }
          m1 /= static_cast<double>(cols);
          m2 /= static_cast<double>(cols);
          double* g = x.grad().data() + r * cols;
          for (size_t c = 0; c < cols; ++c) g[c] += inv * (dxhat[c] - m1 - xhat[c] * m2);
        }
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  const size_t n = x.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  if (Tape* t = recording({&x})) {
    t->record("relu", {x}, out, [x, out, n]() mutable {
      x.ensure_grad();
      const double* dC = out.grad().data();
      for (size_t i = 0; i < n; ++i) {
        if (x.data()[i] > 0.0) x.grad()[i] += dC[i];
      }
    });
  }
  return out;
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double gelu_fwd(double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); }
double gelu_grad(double v) {
  const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
  return cdf + v * pdf;
}
}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  const size_t n = x.numel();
  for (size_t i = 0; i < n; ++i) out.data()[i] = gelu_fwd(x.data()[i]);
  if (Tape* t = recording({&x})) {
    t->record("gelu", {x}, out, [x, out, n]() mutable {
      x.ensure_grad();
      const double* dC = out.grad().data();
      for (size_t i = 0; i < n; ++i) x.grad()[i] += gelu_grad(x.data()[i]) * dC[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// lookup / loss / reductions
// ---------------------------------------------------------------------------

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  require_2d("embedding_lookup", table);
  const size_t vocab = table.rows(), d = table.cols();
  for (int id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab) {
      throw ConfigError("embedding_lookup: token id " + std::to_string(id) +
                        " out of range [0," + std::to_string(vocab) + ")");
    }
  }
  Tensor out = Tensor::zeros({ids.size(), d}, table.requires_grad());
  for (size_t i = 0; i < ids.size(); ++i) {
    std::copy(table.data() + static_cast<size_t>(ids[i]) * d,
              table.data() + (static_cast<size_t>(ids[i]) + 1) * d, out.data() + i * d);
  }
  if (Tape* t = recording({&table})) {
    std::vector<int> idv = ids;
    t->record("embedding_lookup", {table}, out, [table, out, idv, d]() mutable {
      table.ensure_grad();
      const double* dC = out.grad().data();
      for (size_t i = 0; i < idv.size(); ++i) {
        double* g = table.grad().data() + static_cast<size_t>(idv[i]) * d;
        const double* src = dC + i * d;
        for (size_t c = 0; c < d; ++c) g[c] += src[c];
      }
    });
  }
  return out;
}

Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets, int pad_id) {
  require_2d("cross_entropy", logits);
  const size_t rows = logits.rows(), vocab = logits.cols();
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  size_t n_live = 0;
  for (int y : targets) {
    if (y == pad_id) continue;
    if (y < 0 || static_cast<size_t>(y) >= vocab) {
      throw ConfigError("cross_entropy: target id " + std::to_string(y) + " out of range [0," +
                        std::to_string(vocab) + ")");
    }
    ++n_live;
  }
  if (n_live == 0) throw ConfigError("cross_entropy: every position is padding");

  // Keep softmax rows for the backward pass (zeros for pad rows).
  std::vector<double> probs(rows * vocab, 0.0);
  double loss = 0.0;
  for (size_t r = 0; r < rows; ++r) {
    if (targets[r] == pad_id) continue;
    const double* lr = logits.data() + r * vocab;
    double mx = lr[0];
    for (size_t c = 1; c < vocab; ++c) mx = std::max(mx, lr[c]);
    double z = 0.0;
    for (size_t c = 0; c < vocab; ++c) z += std::exp(lr[c] - mx);
    const double lse = mx + std::log(z);
    loss += lse - lr[static_cast<size_t>(targets[r])];
    for (size_t c = 0; c < vocab; ++c) probs[r * vocab + c] = std::exp(lr[c] - lse);
  }
  loss /= static_cast<double>(n_live);
  Tensor out = Tensor::scalar(loss, logits.requires_grad());
  if (Tape* t = recording({&logits})) {
    std::vector<int> tv = targets;
    t->record("cross_entropy", {logits}, out,
              [logits, out, probs = std::move(probs), tv, pad_id, rows, vocab, n_live]() mutable {
                logits.ensure_grad();
                const double dL = out.grad()[0] / static_cast<double>(n_live);
                double* g = logits.grad().data();
                for (size_t r = 0; r < rows; ++r) {
                  if (tv[r] == pad_id) continue;
                  const double* pr = probs.data() + r * vocab;
                  double* gr = g + r * vocab;
                  for (size_t c = 0; c < vocab; ++c) gr[c] += dL * pr[c];
                  gr[static_cast<size_t>(tv[r])] -= dL;
                }
              });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (size_t i = 0; i < x.numel(); ++i) s += x.data()[i];
  Tensor out = Tensor::scalar(s, x.requires_grad());
  if (Tape* t = recording({&x})) {
    t->record("sum", {x}, out, [x, out]() mutable {
      x.ensure_grad();
      const double d = out.grad()[0];
      for (double& g : x.grad()) g += d;
    });
  }
  return out;
}

}  // namespace seqtune
