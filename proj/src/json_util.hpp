#pragma once

// JSON (de)serialization helpers shared by checkpoints, tokenizer files,
// run configs and reports. Kept out of the public headers so json.hpp is
// only compiled where it is used.

#include <string>
#include <vector>

#include <json.hpp>

#include "seqtune/adapters.hpp"
#include "seqtune/errors.hpp"
#include "seqtune/model_config.hpp"
#include "seqtune/prompts.hpp"
#include "seqtune/tensor.hpp"

namespace seqtune {

using nlohmann::json;

inline json shape_to_json(const Shape& s) { return json(s); }

inline json tensor_to_json(const Tensor& t) {
  json j;
  j["shape"] = t.shape();
  j["data"] = t.values();
  return j;
}

inline Tensor tensor_from_json(const json& j, bool requires_grad = false) {
  Shape shape = j.at("shape").get<Shape>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  return Tensor::from_values(std::move(shape), std::move(data), requires_grad);
}

inline json model_config_to_json(const ModelConfig& c) {
  return json{{"d_model", c.d_model},
              {"n_enc_layers", c.n_enc_layers},
              {"n_dec_layers", c.n_dec_layers},
              {"n_heads", c.n_heads},
              {"d_ff", c.d_ff},
              {"vocab_size", c.vocab_size},
              {"d_in", c.d_in},
              {"frontend_strides", c.frontend_strides},
              {"max_target_len", c.max_target_len}};
}

inline ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<size_t>();
  c.n_enc_layers = j.at("n_enc_layers").get<size_t>();
  c.n_dec_layers = j.at("n_dec_layers").get<size_t>();
  c.n_heads = j.at("n_heads").get<size_t>();
  c.d_ff = j.at("d_ff").get<size_t>();
  c.vocab_size = j.at("vocab_size").get<size_t>();
  c.d_in = j.at("d_in").get<size_t>();
  c.frontend_strides = j.at("frontend_strides").get<std::vector<size_t>>();
  c.max_target_len = j.at("max_target_len").get<size_t>();
  c.validate();
  return c;
}

inline json placement_to_json(const Placement& p) {
  json arr = json::array();
  for (const PlacementSite& s : p) {
    arr.push_back(json::array({s.stack == Stack::encoder ? "E" : "D", s.layer}));
  }
  return arr;
}

inline Placement placement_from_json(const json& j) {
  Placement p;
  for (const auto& e : j) {
    const std::string stack = e.at(0).get<std::string>();
    if (stack != "E" && stack != "D") throw ConfigError("placement: bad stack '" + stack + "'");
    p.insert(PlacementSite{stack == "E" ? Stack::encoder : Stack::decoder,
                           e.at(1).get<size_t>()});
  }
  return p;
}

inline json prompt_config_to_json(const PromptConfig& c) {
  return json{{"length_input", c.length_input},
              {"length_kv", c.length_kv},
              {"placement", placement_to_json(c.placement)},
              {"apply_to_cross_attention", c.apply_to_cross_attention}};
}

inline PromptConfig prompt_config_from_json(const json& j) {
  PromptConfig c;
  c.length_input = j.at("length_input").get<size_t>();
  c.length_kv = j.at("length_kv").get<size_t>();
  c.placement = placement_from_json(j.at("placement"));
  c.apply_to_cross_attention = j.at("apply_to_cross_attention").get<bool>();
  return c;
}

inline json adapter_config_to_json(const AdapterConfig& c) {
  return json{{"bottleneck", c.bottleneck},
              {"placement", placement_to_json(c.placement)},
              {"activation", to_string(c.activation)},
              {"insertion", to_string(c.insertion)}};
}

inline AdapterConfig adapter_config_from_json(const json& j) {
  AdapterConfig c;
  c.bottleneck = j.at("bottleneck").get<size_t>();
  c.placement = placement_from_json(j.at("placement"));
  c.activation = adapter_activation_from_string(j.at("activation").get<std::string>());
  c.insertion = adapter_insertion_from_string(j.at("insertion").get<std::string>());
  return c;
}

json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace seqtune
