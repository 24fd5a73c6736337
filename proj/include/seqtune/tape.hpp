#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "seqtune/tensor.hpp"

namespace seqtune {

// Reverse-mode tape. Forward primitives append one node per application, in
// execution order, so every node's inputs precede it. backward() sweeps the
// recorded range in reverse, pulling gradients from each output into the
// inputs that require them.
//
// A tape is single-threaded; independent tapes may live on different threads.
class Tape {
 public:
  struct Node {
    const char* op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> pull;  // accumulate output grad into input grads
  };

  void record(const char* op, std::vector<Tensor> inputs, Tensor output,
              std::function<void()> pull);

  // Seeds root->grad = 1 and runs the reverse sweep. root must be a scalar
  // produced through this tape. Leaf gradients accumulate; op outputs are
  // re-zeroed, so repeated calls are well defined.
  void backward(const Tensor& root);

  size_t size() const { return nodes_.size(); }
  bool produced(const TensorData* t) const { return output_index_.count(t) > 0; }
  const Node& node(size_t i) const { return nodes_[i]; }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const TensorData*, size_t> output_index_;
};

// Thread-local active tape. Ops record onto it when any input requires grad;
// with no active tape the forward math still runs (inference path).
Tape* active_tape();

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

}  // namespace seqtune
