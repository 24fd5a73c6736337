#include "seqtune/tape.hpp"

#include "seqtune/errors.hpp"

namespace seqtune {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

void Tape::record(const char* op, std::vector<Tensor> inputs, Tensor output,
                  std::function<void()> pull) {
  output_index_[output.node()] = nodes_.size();
  nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(pull)});
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ShapeError("backward: root must be a scalar, got " +
                     (root.defined() ? shape_str(root.shape()) : std::string("<undefined>")));
  }
  auto it = output_index_.find(root.node());
  if (it == output_index_.end()) {
    throw ConfigError("backward: root tensor was not produced through this tape");
  }
  const size_t root_idx = it->second;

  // Fresh adjoints for every op output in the active range; leaves accumulate.
  for (size_t i = 0; i <= root_idx; ++i) {
    Tensor& out = nodes_[i].output;
    out.ensure_grad();
    out.zero_grad();
  }
  nodes_[root_idx].output.grad()[0] = 1.0;

  for (size_t i = root_idx + 1; i-- > 0;) {
    nodes_[i].pull();
  }
}

}  // namespace seqtune
