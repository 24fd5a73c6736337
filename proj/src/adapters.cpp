#include "seqtune/adapters.hpp"

#include "seqtune/errors.hpp"
#include "seqtune/ops.hpp"

namespace seqtune {

std::string to_string(AdapterActivation a) {
  return a == AdapterActivation::relu ? "relu" : "gelu";
}

std::string to_string(AdapterInsertion i) {
  switch (i) {
    case AdapterInsertion::after_ffn: return "after_ffn";
    case AdapterInsertion::after_attention: return "after_attention";
    case AdapterInsertion::both: return "both";
  }
  return "after_ffn";
}

AdapterActivation adapter_activation_from_string(const std::string& s) {
  if (s == "relu") return AdapterActivation::relu;
  if (s == "gelu") return AdapterActivation::gelu;
  throw ConfigError("unknown adapter activation '" + s + "' (expected relu or gelu)");
}

AdapterInsertion adapter_insertion_from_string(const std::string& s) {
  if (s == "after_ffn") return AdapterInsertion::after_ffn;
  if (s == "after_attention") return AdapterInsertion::after_attention;
  if (s == "both") return AdapterInsertion::both;
  throw ConfigError("unknown adapter insertion '" + s + "'");
}

void AdapterConfig::validate(const ModelConfig& model) const {
  if (bottleneck == 0) throw ConfigError("adapter config: bottleneck must be >= 1");
  for (const PlacementSite& s : placement) {
    const size_t depth = s.stack == Stack::encoder ? model.n_enc_layers : model.n_dec_layers;
    if (s.layer >= depth) {
      throw ConfigError("adapter placement: layer " + std::to_string(s.layer) +
                        " out of range for " + to_string(s.stack) + " with " +
                        std::to_string(depth) + " layers");
    }
  }
}

namespace {

std::string site_name(const AdapterSite& s) {
  return std::string("adapter.") + (s.stack == Stack::encoder ? "enc." : "dec.") +
         std::to_string(s.layer) + "." +
         (s.point == SublayerPoint::attention ? "attn" : "ffn") + ".";
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> AdapterSet::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [site, a] : entries) {
    const std::string p = site_name(site);
    out.emplace_back(p + "w_down", a.w_down);
    out.emplace_back(p + "b_down", a.b_down);
    out.emplace_back(p + "w_up", a.w_up);
    out.emplace_back(p + "b_up", a.b_up);
  }
  return out;
}

size_t AdapterSet::param_count() const {
  size_t n = 0;
  for (const auto& [name, t] : named_params()) n += t.numel();
  return n;
}

AdapterSet build_adapters(const AdapterConfig& config, const ModelConfig& model, uint64_t seed) {
  config.validate(model);
  AdapterSet set;
  set.config = config;
  Rng rng(seed);
  const size_t d = model.d_model, r = config.bottleneck;
  std::vector<SublayerPoint> points;
  switch (config.insertion) {
    case AdapterInsertion::after_ffn: points = {SublayerPoint::ffn}; break;
    case AdapterInsertion::after_attention: points = {SublayerPoint::attention}; break;
    case AdapterInsertion::both: points = {SublayerPoint::attention, SublayerPoint::ffn}; break;
  }
  for (const PlacementSite& site : config.placement) {
    for (SublayerPoint point : points) {
      Adapter a;
      a.w_down = Tensor::randn({d, r}, rng, 0.02, true);
      a.b_down = Tensor::zeros({r}, true);
      a.w_up = Tensor::zeros({r, d}, true);  // identity at init
      a.b_up = Tensor::zeros({d}, true);
      set.entries.emplace(AdapterSite{site.stack, site.layer, point}, std::move(a));
    }
  }
  return set;
}

Tensor adapter_apply(const Tensor& h, const Adapter& adapter, AdapterActivation activation) {
  if (h.cols() != adapter.w_down.rows()) {
    throw ShapeError("adapter_apply: input " + shape_str(h.shape()) + " vs W_down " +
                     shape_str(adapter.w_down.shape()));
  }
  Tensor z = add_bias(matmul(h, adapter.w_down), adapter.b_down);
  z = activation == AdapterActivation::relu ? relu(z) : gelu(z);
  Tensor up = add_bias(matmul(z, adapter.w_up), adapter.b_up);
  return add(h, up);
}

}  // namespace seqtune
