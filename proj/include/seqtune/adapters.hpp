#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seqtune/model_config.hpp"
#include "seqtune/prompts.hpp"
#include "seqtune/tensor.hpp"

namespace seqtune {

enum class AdapterActivation { relu, gelu };
enum class AdapterInsertion { after_ffn, after_attention, both };

std::string to_string(AdapterActivation a);
std::string to_string(AdapterInsertion i);
AdapterActivation adapter_activation_from_string(const std::string& s);
AdapterInsertion adapter_insertion_from_string(const std::string& s);

struct AdapterConfig {
  size_t bottleneck = 8;  // r
  Placement placement;
  AdapterActivation activation = AdapterActivation::relu;
  AdapterInsertion insertion = AdapterInsertion::after_ffn;

  void validate(const ModelConfig& model) const;
};

// Residual bottleneck: h <- h + f(h W_down + b_down) W_up + b_up.
// W_up and both biases start at zero, so insertion is an exact identity.
struct Adapter {
  Tensor w_down;  // d x r
  Tensor b_down;  // r
  Tensor w_up;    // r x d
  Tensor b_up;    // d
};

enum class SublayerPoint { attention, ffn };

struct AdapterSite {
  Stack stack;
  size_t layer;
  SublayerPoint point;
  auto operator<=>(const AdapterSite&) const = default;
};

struct AdapterSet {
  AdapterConfig config;
  std::map<AdapterSite, Adapter> entries;

  const Adapter* find(Stack stack, size_t layer, SublayerPoint point) const {
    auto it = entries.find(AdapterSite{stack, layer, point});
    return it == entries.end() ? nullptr : &it->second;
  }
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  size_t param_count() const;
};

AdapterSet build_adapters(const AdapterConfig& config, const ModelConfig& model, uint64_t seed);

Tensor adapter_apply(const Tensor& h, const Adapter& adapter, AdapterActivation activation);

}  // namespace seqtune
