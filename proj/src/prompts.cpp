#include "seqtune/prompts.hpp"

#include <sstream>

#include "seqtune/errors.hpp"

namespace seqtune {

std::string to_string(Stack s) { return s == Stack::encoder ? "encoder" : "decoder"; }

namespace {

[[noreturn]] void parse_fail(const std::string& spec, size_t pos, const std::string& why) {
  throw ConfigError("placement spec '" + spec + "': " + why + " at position " +
                    std::to_string(pos));
}

}  // namespace

Placement parse_placement(const std::string& spec, size_t n_enc_layers, size_t n_dec_layers) {
  Placement out;
  size_t i = 0;
  const size_t n = spec.size();
  auto skip_ws = [&] {
    while (i < n && (spec[i] == ' ' || spec[i] == '\t')) ++i;
  };
  skip_ws();
  if (i == n) parse_fail(spec, i, "empty spec");

  bool expect_term = true;
  while (i < n) {
    if (!expect_term) {
      if (spec[i] != '+') parse_fail(spec, i, "expected '+'");
      ++i;
      skip_ws();
      expect_term = true;
      continue;
    }
    const size_t term_pos = i;
    Stack stack;
    if (spec[i] == 'E') {
      stack = Stack::encoder;
    } else if (spec[i] == 'D') {
      stack = Stack::decoder;
    } else {
      parse_fail(spec, i, "expected stack 'E' or 'D'");
    }
    ++i;
    if (i >= n || spec[i] != '(') parse_fail(spec, i, "expected '('");
    ++i;

    const size_t n_layers = stack == Stack::encoder ? n_enc_layers : n_dec_layers;
    enum { kFirst, kLast, kAll } mode;
    if (spec.compare(i, 3, "all") == 0) {
      mode = kAll;
      i += 3;
    } else if (spec[i] == 'f') {
      mode = kFirst;
      ++i;
    } else if (spec[i] == 'l') {
      mode = kLast;
      ++i;
    } else if (spec.compare(i, 3, "\xe2\x84\x93") == 0) {  // typographic ℓ
      mode = kLast;
      i += 3;
    } else {
      parse_fail(spec, i, "expected 'f', 'l' or 'all'");
    }

    size_t count = n_layers;
    if (mode != kAll) {
      const size_t num_pos = i;
      size_t v = 0;
      bool any = false;
      while (i < n && spec[i] >= '0' && spec[i] <= '9') {
        v = v * 10 + static_cast<size_t>(spec[i] - '0');
        ++i;
        any = true;
      }
      if (!any) parse_fail(spec, num_pos, "expected layer count");
      if (v == 0) parse_fail(spec, num_pos, "layer count must be >= 1");
      if (v > n_layers) {
        parse_fail(spec, num_pos,
                   "count " + std::to_string(v) + " exceeds " + to_string(stack) + " depth " +
                       std::to_string(n_layers));
      }
      count = v;
    }
    if (i >= n || spec[i] != ')') parse_fail(spec, i, "expected ')'");
    ++i;

    if (n_layers == 0) parse_fail(spec, term_pos, to_string(stack) + " has no layers");
    const size_t begin = mode == kLast ? n_layers - count : 0;
    for (size_t l = begin; l < begin + count; ++l) out.insert(PlacementSite{stack, l});

    skip_ws();
    expect_term = false;
  }
  if (expect_term) parse_fail(spec, i, "trailing '+'");
  return out;
}

std::string placement_to_string(const Placement& p) {
  std::ostringstream os;
  bool first = true;
  for (const PlacementSite& s : p) {
    if (!first) os << "+";
    os << (s.stack == Stack::encoder ? "E" : "D") << "[" << s.layer << "]";
    first = false;
  }
  return os.str();
}

void PromptConfig::validate(const ModelConfig& model) const {
  for (const PlacementSite& s : placement) {
    const size_t depth = s.stack == Stack::encoder ? model.n_enc_layers : model.n_dec_layers;
    if (s.layer >= depth) {
      throw ConfigError("prompt placement: layer " + std::to_string(s.layer) + " out of range for " +
                        to_string(s.stack) + " with " + std::to_string(depth) + " layers");
    }
  }
  if (apply_to_cross_attention && length_kv == 0) {
    throw ConfigError("prompt config: cross-attention prompts need length_kv >= 1");
  }
}

namespace {

std::string site_prefix(const PlacementSite& s) {
  return std::string("prompt.") + (s.stack == Stack::encoder ? "enc." : "dec.") +
         std::to_string(s.layer) + ".";
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> PromptBank::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [site, lp] : entries) {
    const std::string p = site_prefix(site);
    if (lp.input.defined()) out.emplace_back(p + "input", lp.input);
    if (lp.key.defined()) out.emplace_back(p + "key", lp.key);
    if (lp.value.defined()) out.emplace_back(p + "value", lp.value);
    if (lp.cross_key.defined()) out.emplace_back(p + "cross_key", lp.cross_key);
    if (lp.cross_value.defined()) out.emplace_back(p + "cross_value", lp.cross_value);
  }
  return out;
}

size_t PromptBank::param_count() const {
  size_t n = 0;
  for (const auto& [name, t] : named_params()) n += t.numel();
  return n;
}

PromptBank build_prompt_bank(const PromptConfig& config, const ModelConfig& model, uint64_t seed) {
  config.validate(model);
  PromptBank bank;
  bank.config = config;
  Rng rng(seed);
  const size_t d = model.d_model;
  for (const PlacementSite& site : config.placement) {
    LayerPrompts lp;
    if (config.length_input > 0) {
      lp.input = Tensor::randn({config.length_input, d}, rng, 0.02, true);
    }
    if (config.length_kv > 0) {
      lp.key = Tensor::randn({config.length_kv, d}, rng, 0.02, true);
      lp.value = Tensor::randn({config.length_kv, d}, rng, 0.02, true);
      if (config.apply_to_cross_attention && site.stack == Stack::decoder) {
        lp.cross_key = Tensor::randn({config.length_kv, d}, rng, 0.02, true);
        lp.cross_value = Tensor::randn({config.length_kv, d}, rng, 0.02, true);
      }
    }
    bank.entries.emplace(site, std::move(lp));
  }
  return bank;
}

Tensor inject_input_prompts(const Tensor& g, const Tensor& prompts) {
  if (!prompts.defined() || prompts.rows() == 0) return g;
  if (prompts.cols() != g.cols()) {
    throw ShapeError("inject_input_prompts: prompts " + shape_str(prompts.shape()) + " vs input " +
                     shape_str(g.shape()));
  }
  return concat_rows({prompts, g});
}

}  // namespace seqtune
