#pragma once

#include <compare>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "seqtune/model_config.hpp"
#include "seqtune/ops.hpp"
#include "seqtune/tensor.hpp"

namespace seqtune {

enum class Stack { encoder, decoder };

std::string to_string(Stack s);

struct PlacementSite {
  Stack stack;
  size_t layer;  // 0-based
  auto operator<=>(const PlacementSite&) const = default;
};

using Placement = std::set<PlacementSite>;

// Placement grammar: terms "E(f3)", "E(l3)" (or the typographic "E(ℓ3)"),
// "D(all)", joined by '+'. first/last counts resolve against the model's
// actual layer counts; out-of-range specs are rejected with the byte position
// of the offending term.
Placement parse_placement(const std::string& spec, size_t n_enc_layers, size_t n_dec_layers);

std::string placement_to_string(const Placement& p);

struct PromptConfig {
  size_t length_input = 0;  // rows prepended to the layer input
  size_t length_kv = 0;     // rows prepended to attention keys/values
  Placement placement;
  bool apply_to_cross_attention = false;

  void validate(const ModelConfig& model) const;
};

// Trainable prompt vectors for one placed layer. Undefined tensors mean the
// corresponding mechanism is off (length 0).
struct LayerPrompts {
  Tensor input;       // length_input x d_model
  Tensor key, value;  // length_kv x d_model each
  Tensor cross_key, cross_value;
};

struct PromptBank {
  PromptConfig config;
  std::map<PlacementSite, LayerPrompts> entries;

  const LayerPrompts* find(Stack stack, size_t layer) const {
    auto it = entries.find(PlacementSite{stack, layer});
    return it == entries.end() ? nullptr : &it->second;
  }
  // Stable names like "prompt.enc.0.input", in placement order.
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  size_t param_count() const;
};

// Deterministic normal(0, 0.02) initialization from the seed.
PromptBank build_prompt_bank(const PromptConfig& config, const ModelConfig& model, uint64_t seed);

// Eq.-1-style prepend: rows 0..l-1 are the prompts, the rest is g unchanged.
Tensor inject_input_prompts(const Tensor& g, const Tensor& prompts);

}  // namespace seqtune
