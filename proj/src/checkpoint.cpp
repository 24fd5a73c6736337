#include "seqtune/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace seqtune {

namespace {
constexpr const char* kFormat = "seqtune-checkpoint";
constexpr int kVersion = 1;

json weights_to_json(const std::vector<std::pair<std::string, Tensor>>& named) {
  json w = json::object();
  for (const auto& [name, t] : named) w[name] = tensor_to_json(t);
  return w;
}

void fill_weights_from_json(const json& w,
                            const std::vector<std::pair<std::string, Tensor>>& named,
                            const char* section) {
  size_t used = 0;
  for (const auto& [name, t] : named) {
    auto it = w.find(name);
    if (it == w.end()) {
      throw ConfigError(std::string("checkpoint: missing weight '") + name + "' in " + section);
    }
    Tensor stored = tensor_from_json(*it);
    if (stored.shape() != t.shape()) {
      throw ConfigError(std::string("checkpoint: weight '") + name + "' has shape " +
                        shape_str(stored.shape()) + ", expected " + shape_str(t.shape()));
    }
    Tensor dst = t;
    dst.values() = stored.values();
    ++used;
  }
  if (used != w.size()) {
    throw ConfigError(std::string("checkpoint: ") + section + " holds " +
                      std::to_string(w.size()) + " weights, model expects " +
                      std::to_string(used));
  }
}
}  // namespace

json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f.is_open()) throw ConfigError("cannot open '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("failed to parse '" + path + "': " + e.what());
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f.is_open()) throw ConfigError("cannot write '" + path + "'");
  f << text;
  if (!f.good()) throw ConfigError("write failed for '" + path + "'");
}

void save_checkpoint(const Seq2SeqModel& model, const std::string& path) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["model"] = model_config_to_json(model.config());
  j["settings"] = json{{"keep_prompt_memory", model.keep_prompt_memory()}};
  j["weights"] = weights_to_json(model.base_params().items());
  if (const PromptBank* bank = model.prompt_bank()) {
    j["prompts"] = json{{"config", prompt_config_to_json(bank->config)},
                        {"weights", weights_to_json(bank->named_params())}};
  }
  if (const AdapterSet* set = model.adapter_set()) {
    j["adapters"] = json{{"config", adapter_config_to_json(set->config)},
                         {"weights", weights_to_json(set->named_params())}};
  }
  write_text_file(path, j.dump());
}

Seq2SeqModel load_checkpoint(const std::string& path) {
  json j = load_json_file(path);
  if (!j.is_object() || j.value("format", "") != kFormat) {
    throw ConfigError("'" + path + "' is not a " + kFormat + " file");
  }
  if (j.at("version").get<int>() != kVersion) {
    throw ConfigError("checkpoint version " + j.at("version").dump() + " unsupported");
  }
  ModelConfig cfg = model_config_from_json(j.at("model"));
  Seq2SeqModel model(cfg, /*seed=*/0);
  fill_weights_from_json(j.at("weights"), model.base_params().items(), "weights");
  if (j.contains("settings")) {
    model.set_keep_prompt_memory(j.at("settings").value("keep_prompt_memory", true));
  }
  if (j.contains("prompts")) {
    PromptConfig pc = prompt_config_from_json(j.at("prompts").at("config"));
    PromptBank bank = build_prompt_bank(pc, cfg, /*seed=*/0);
    fill_weights_from_json(j.at("prompts").at("weights"), bank.named_params(), "prompts");
    model.install_prompt_bank(std::move(bank));
  }
  if (j.contains("adapters")) {
    AdapterConfig ac = adapter_config_from_json(j.at("adapters").at("config"));
    AdapterSet set = build_adapters(ac, cfg, /*seed=*/0);
    fill_weights_from_json(j.at("adapters").at("weights"), set.named_params(), "adapters");
    model.install_adapter_set(std::move(set));
  }
  return model;
}

}  // namespace seqtune
