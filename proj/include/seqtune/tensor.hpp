#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "seqtune/errors.hpp"
#include "seqtune/rng.hpp"

namespace seqtune {

using Shape = std::vector<size_t>;

size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass touches this tensor
  bool requires_grad = false;
};

// Shared-ownership handle over a dense row-major f64 buffer. Copies alias the
// same storage; identity (node pointer) defines graph topology on the tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  size_t ndim() const { return d_->shape.size(); }
  size_t numel() const { return d_->values.size(); }

  // 2-D accessors; rank-1 tensors behave as a single row.
  size_t rows() const { return ndim() == 2 ? d_->shape[0] : 1; }
  size_t cols() const { return ndim() == 2 ? d_->shape[1] : numel(); }

  double* data() { return d_->values.data(); }
  const double* data() const { return d_->values.data(); }
  std::vector<double>& values() { return d_->values; }
  const std::vector<double>& values() const { return d_->values; }

  double& at(size_t r, size_t c) { return d_->values[r * cols() + c]; }
  double at(size_t r, size_t c) const { return d_->values[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return d_ && d_->requires_grad; }
  void set_requires_grad(bool v) { d_->requires_grad = v; }

  bool has_grad() const { return d_ && !d_->grad.empty(); }
  std::vector<double>& grad() { return d_->grad; }
  const std::vector<double>& grad() const { return d_->grad; }
  void ensure_grad() {
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), 0.0);
  }
  void zero_grad() {
    if (!d_->grad.empty()) d_->grad.assign(d_->values.size(), 0.0);
  }

  // Deep copy of values (grad not copied).
  Tensor clone() const;

  TensorData* node() const { return d_.get(); }

  bool all_finite() const;

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<TensorData> d_;
};

}  // namespace seqtune
