#include "seqtune/model.hpp"

#include <algorithm>
#include <cmath>

#include "seqtune/errors.hpp"

namespace seqtune {

// ---------------------------------------------------------------------------
// ParamRegistry
// ---------------------------------------------------------------------------

Tensor& ParamRegistry::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw ConfigError("parameter '" + name + "' registered twice");
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(t));
  return items_.back().second;
}

void ParamRegistry::replace(const std::string& name, Tensor t) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("parameter '" + name + "' not registered");
  items_[it->second].second = std::move(t);
}

Tensor* ParamRegistry::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &items_[it->second].second;
}

const Tensor* ParamRegistry::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &items_[it->second].second;
}

size_t ParamRegistry::total_count() const {
  size_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

// ---------------------------------------------------------------------------
// Attention and positional encoding
// ---------------------------------------------------------------------------

Tensor sinusoidal_positions(size_t rows, size_t d_model) {
  Tensor pe = Tensor::zeros({rows, d_model});
  for (size_t pos = 0; pos < rows; ++pos) {
    for (size_t i = 0; 2 * i < d_model; ++i) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d_model));
      pe.at(pos, 2 * i) = std::sin(angle);
      if (2 * i + 1 < d_model) pe.at(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Tensor multi_head_attention(const Tensor& q_src, const Tensor& kv_src,
                            const AttentionWeights& w, size_t n_heads,
                            const Tensor& prefix_k, const Tensor& prefix_v, const Mask& mask,
                            ForwardTrace* trace) {
  const size_t d = q_src.cols();
  if (d % n_heads != 0) {
    throw ShapeError("attention: width " + std::to_string(d) + " not divisible by " +
                     std::to_string(n_heads) + " heads");
  }
  if (kv_src.cols() != d) {
    throw ShapeError("attention: query width " + shape_str(q_src.shape()) + " vs key/value " +
                     shape_str(kv_src.shape()));
  }
  const bool has_prefix = prefix_k.defined() && prefix_k.rows() > 0;
  if (has_prefix != (prefix_v.defined() && prefix_v.rows() > 0)) {
    throw ShapeError("attention: key/value prefixes must be given together");
  }

  Tensor q = add_bias(matmul(q_src, w.wq), w.bq);
  Tensor kin = has_prefix ? concat_rows({prefix_k, kv_src}) : kv_src;
  Tensor vin = has_prefix ? concat_rows({prefix_v, kv_src}) : kv_src;
  Tensor k = add_bias(matmul(kin, w.wk), w.bk);
  Tensor v = add_bias(matmul(vin, w.wv), w.bv);

  if (mask.rows != q.rows() || mask.cols != k.rows()) {
    throw ShapeError("attention: mask (" + std::to_string(mask.rows) + "x" +
                     std::to_string(mask.cols) + ") vs scores (" + std::to_string(q.rows()) +
                     "x" + std::to_string(k.rows()) + ")");
  }

  const size_t dh = d / n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (size_t h = 0; h < n_heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor att = masked_softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt_dh), mask);
    if (trace) trace->attention_rows.push_back(att);
    heads.push_back(matmul(att, vh));
  }
  Tensor cat = n_heads == 1 ? heads[0] : concat_cols(heads);
  return add_bias(matmul(cat, w.wo), w.bo);
}

namespace {

// Decoder self-attention visibility: kv-prefix and input-prompt rows are
// visible to every query; prompt-row queries see only prefixes and prompt
// rows (a leak here would route future-token information past the causal
// mask); real query j additionally sees real positions <= j.
Mask decoder_self_mask(size_t n_prompt, size_t n_real, size_t l_kv) {
  const size_t rows = n_prompt + n_real;
  const size_t cols = l_kv + n_prompt + n_real;
  Mask m;
  m.rows = rows;
  m.cols = cols;
  m.allow.assign(rows * cols, 0);
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < l_kv + n_prompt; ++c) m.set(r, c, true);
    if (r >= n_prompt) {
      const size_t j = r - n_prompt;
      for (size_t c = 0; c <= j; ++c) m.set(r, l_kv + n_prompt + c, true);
    }
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace {
constexpr double kInitStd = 0.02;

std::string layer_name(const char* stack, size_t i, const char* rest) {
  return std::string(stack) + "." + std::to_string(i) + "." + rest;
}
}  // namespace

Seq2SeqModel::Seq2SeqModel(ModelConfig config, uint64_t seed) : cfg_(std::move(config)) {
  cfg_.validate();
  Rng rng(seed);
  const size_t d = cfg_.d_model;

  auto proj = [&](Shape s) { return Tensor::randn(std::move(s), rng, kInitStd, true); };
  auto zeros = [&](Shape s) { return Tensor::zeros(std::move(s), true); };
  auto ones = [&](Shape s) { return Tensor::full(std::move(s), 1.0, true); };

  auto make_ln = [&](const std::string& prefix) {
    LayerNormWeights ln;
    ln.gain = registry_.add(prefix + ".gain", ones({d}));
    ln.bias = registry_.add(prefix + ".bias", zeros({d}));
    return ln;
  };
  auto make_attn = [&](const std::string& prefix) {
    AttentionWeights a;
    a.wq = registry_.add(prefix + ".wq", proj({d, d}));
    a.bq = registry_.add(prefix + ".bq", zeros({d}));
    a.wk = registry_.add(prefix + ".wk", proj({d, d}));
    a.bk = registry_.add(prefix + ".bk", zeros({d}));
    a.wv = registry_.add(prefix + ".wv", proj({d, d}));
    a.bv = registry_.add(prefix + ".bv", zeros({d}));
    a.wo = registry_.add(prefix + ".wo", proj({d, d}));
    a.bo = registry_.add(prefix + ".bo", zeros({d}));
    return a;
  };
  auto make_ffn = [&](const std::string& prefix) {
    FfnWeights f;
    f.w1 = registry_.add(prefix + ".w1", proj({d, cfg_.d_ff}));
    f.b1 = registry_.add(prefix + ".b1", zeros({cfg_.d_ff}));
    f.w2 = registry_.add(prefix + ".w2", proj({cfg_.d_ff, d}));
    f.b2 = registry_.add(prefix + ".b2", zeros({d}));
    return f;
  };

  size_t in_width = cfg_.d_in;
  for (size_t i = 0; i < cfg_.frontend_strides.size(); ++i) {
    FrontendLayer fl;
    fl.stride = cfg_.frontend_strides[i];
    fl.w = registry_.add(layer_name("frontend", i, "w"), proj({fl.stride * in_width, d}));
    fl.b = registry_.add(layer_name("frontend", i, "b"), zeros({d}));
    frontend_.push_back(fl);
    in_width = d;
  }

  for (size_t i = 0; i < cfg_.n_enc_layers; ++i) {
    EncoderLayer L;
    L.ln1 = make_ln(layer_name("enc", i, "ln1"));
    L.attn = make_attn(layer_name("enc", i, "attn"));
    L.ln2 = make_ln(layer_name("enc", i, "ln2"));
    L.ffn = make_ffn(layer_name("enc", i, "ffn"));
    enc_.push_back(L);
  }
  if (cfg_.n_enc_layers > 0) enc_final_ln_ = make_ln("enc.final_ln");

  for (size_t i = 0; i < cfg_.n_dec_layers; ++i) {
    DecoderLayer L;
    L.ln1 = make_ln(layer_name("dec", i, "ln1"));
    L.self_attn = make_attn(layer_name("dec", i, "self_attn"));
    L.ln2 = make_ln(layer_name("dec", i, "ln2"));
    L.cross_attn = make_attn(layer_name("dec", i, "cross_attn"));
    L.ln3 = make_ln(layer_name("dec", i, "ln3"));
    L.ffn = make_ffn(layer_name("dec", i, "ffn"));
    dec_.push_back(L);
  }
  if (cfg_.n_dec_layers > 0) dec_final_ln_ = make_ln("dec.final_ln");

  embedding_ = registry_.add("embed.table", proj({cfg_.vocab_size, d}));
  head_w_ = registry_.add("head.w", proj({d, cfg_.vocab_size}));
  head_b_ = registry_.add("head.b", zeros({cfg_.vocab_size}));
}

// ---------------------------------------------------------------------------
// Adaptation state
// ---------------------------------------------------------------------------

void Seq2SeqModel::install_prompt_bank(PromptBank bank) {
  if (prompts_) throw ConfigError("prompt bank already installed");
  bank.config.validate(cfg_);
  prompts_ = std::move(bank);
}

void Seq2SeqModel::remove_prompt_bank() { prompts_.reset(); }

const AdapterSet& Seq2SeqModel::install_adapters(const AdapterConfig& config, uint64_t seed) {
  if (adapters_) throw ConfigError("adapters already installed at these sites");
  adapters_ = build_adapters(config, cfg_, seed);
  return *adapters_;
}

void Seq2SeqModel::install_adapter_set(AdapterSet set) {
  if (adapters_) throw ConfigError("adapters already installed at these sites");
  set.config.validate(cfg_);
  adapters_ = std::move(set);
}

void Seq2SeqModel::remove_adapters() { adapters_.reset(); }

void Seq2SeqModel::substitute_task_head(size_t new_vocab_size, uint64_t seed) {
  if (new_vocab_size == 0) throw ConfigError("task head: vocab size must be >= 1");
  Rng rng(seed);
  cfg_.vocab_size = new_vocab_size;
  embedding_ = Tensor::randn({new_vocab_size, cfg_.d_model}, rng, kInitStd, true);
  head_w_ = Tensor::randn({cfg_.d_model, new_vocab_size}, rng, kInitStd, true);
  head_b_ = Tensor::zeros({new_vocab_size}, true);
  registry_.replace("embed.table", embedding_);
  registry_.replace("head.w", head_w_);
  registry_.replace("head.b", head_b_);
}

const Adapter* Seq2SeqModel::adapter_at(Stack stack, size_t layer, SublayerPoint point) const {
  return adapters_ ? adapters_->find(stack, layer, point) : nullptr;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

Tensor Seq2SeqModel::frontend_forward(const Tensor& frames) const {
  if (!frames.defined() || frames.ndim() != 2 || frames.cols() != cfg_.d_in) {
    throw ShapeError("frontend: expected (T x " + std::to_string(cfg_.d_in) + ") frames, got " +
                     (frames.defined() ? shape_str(frames.shape()) : std::string("<undefined>")));
  }
  const size_t min_len = cfg_.frontend_total_stride();
  if (frames.rows() < min_len) {
    throw ConfigError("frontend: input has " + std::to_string(frames.rows()) +
                      " frames, minimum is " + std::to_string(min_len));
  }
  Tensor x = frames;
  for (size_t i = 0; i < frontend_.size(); ++i) {
    x = patch_rows(x, frontend_[i].stride);
    x = add_bias(matmul(x, frontend_[i].w), frontend_[i].b);
    if (i + 1 < frontend_.size()) x = gelu(x);
  }
  return x;
}

Tensor Seq2SeqModel::attention_sublayer(const Tensor& x, const LayerNormWeights& ln,
                                        const AttentionWeights& attn, const LayerPrompts* lp,
                                        bool causal, size_t n_prompt_rows,
                                        ForwardTrace* trace) const {
  Tensor u = layer_norm(x, ln.gain, ln.bias);
  Tensor pk, pv;
  size_t l_kv = 0;
  if (lp && lp->key.defined()) {
    pk = lp->key;
    pv = lp->value;
    l_kv = pk.rows();
  }
  Mask mask = causal ? decoder_self_mask(n_prompt_rows, x.rows() - n_prompt_rows, l_kv)
                     : Mask::all_visible(x.rows(), l_kv + x.rows());
  Tensor att = multi_head_attention(u, u, attn, cfg_.n_heads, pk, pv, mask, trace);
  return add(x, att);
}

Tensor Seq2SeqModel::cross_attention_sublayer(const Tensor& x, const LayerNormWeights& ln,
                                              const AttentionWeights& attn,
                                              const LayerPrompts* lp, const Tensor& memory,
                                              ForwardTrace* trace) const {
  Tensor u = layer_norm(x, ln.gain, ln.bias);
  Tensor pk, pv;
  size_t l_kv = 0;
  if (lp && lp->cross_key.defined()) {
    pk = lp->cross_key;
    pv = lp->cross_value;
    l_kv = pk.rows();
  }
  Mask mask = Mask::all_visible(x.rows(), l_kv + memory.rows());
  Tensor att = multi_head_attention(u, memory, attn, cfg_.n_heads, pk, pv, mask, trace);
  return add(x, att);
}

Tensor Seq2SeqModel::ffn_sublayer(const Tensor& x, const LayerNormWeights& ln,
                                  const FfnWeights& ffn) const {
  Tensor u = layer_norm(x, ln.gain, ln.bias);
  Tensor z = gelu(add_bias(matmul(u, ffn.w1), ffn.b1));
  z = add_bias(matmul(z, ffn.w2), ffn.b2);
  return add(x, z);
}

EncodeResult Seq2SeqModel::encoder_forward(const Tensor& g1, ForwardTrace* trace) const {
  if (g1.cols() != cfg_.d_model) {
    throw ShapeError("encoder: expected width " + std::to_string(cfg_.d_model) + ", got " +
                     shape_str(g1.shape()));
  }
  Tensor x = g1;
  size_t carried = 0;
  const AdapterActivation act = adapters_ ? adapters_->config.activation : AdapterActivation::relu;
  for (size_t i = 0; i < enc_.size(); ++i) {
    const LayerPrompts* lp = prompts_ ? prompts_->find(Stack::encoder, i) : nullptr;
    if (lp) {
      // Replace the previous layer's prompt rows with this layer's fresh ones
      // so the sequence stays at l + T instead of growing per layer.
      if (carried > 0) x = slice_rows(x, carried, x.rows());
      carried = 0;
      if (lp->input.defined()) {
        x = inject_input_prompts(x, lp->input);
        carried = lp->input.rows();
      }
    }
    x = attention_sublayer(x, enc_[i].ln1, enc_[i].attn, lp, /*causal=*/false, carried, trace);
    if (const Adapter* a = adapter_at(Stack::encoder, i, SublayerPoint::attention)) {
      x = adapter_apply(x, *a, act);
    }
    x = ffn_sublayer(x, enc_[i].ln2, enc_[i].ffn);
    if (const Adapter* a = adapter_at(Stack::encoder, i, SublayerPoint::ffn)) {
      x = adapter_apply(x, *a, act);
    }
    if (trace) trace->enc_layer_len.push_back(x.rows());
  }
  if (!enc_.empty()) x = layer_norm(x, enc_final_ln_.gain, enc_final_ln_.bias);

  EncodeResult res;
  if (!keep_prompt_memory_ && carried > 0) {
    res.memory = slice_rows(x, carried, x.rows());
    res.prompt_rows = 0;
  } else {
    res.memory = x;
    res.prompt_rows = carried;
  }
  return res;
}

EncodeResult Seq2SeqModel::encode(const Tensor& frames, ForwardTrace* trace) const {
  Tensor g1 = frontend_forward(frames);
  g1 = add(g1, sinusoidal_positions(g1.rows(), cfg_.d_model));
  return encoder_forward(g1, trace);
}

Tensor Seq2SeqModel::decode(const std::vector<int>& tokens, const EncodeResult& memory,
                            ForwardTrace* trace) const {
  if (tokens.empty()) throw ConfigError("decode: token sequence is empty");
  for (int t : tokens) {
    if (t < 0 || static_cast<size_t>(t) >= cfg_.vocab_size) {
      throw ConfigError("decode: token id " + std::to_string(t) + " out of range [0," +
                        std::to_string(cfg_.vocab_size) + ")");
    }
  }
  if (memory.memory.cols() != cfg_.d_model) {
    throw ShapeError("decode: memory width " + shape_str(memory.memory.shape()) + " vs d_model " +
                     std::to_string(cfg_.d_model));
  }
  const size_t t_real = tokens.size();
  Tensor h = embedding_lookup(embedding_, tokens);
  h = add(h, sinusoidal_positions(t_real, cfg_.d_model));

  size_t carried = 0;
  const AdapterActivation act = adapters_ ? adapters_->config.activation : AdapterActivation::relu;
  for (size_t i = 0; i < dec_.size(); ++i) {
    const LayerPrompts* lp = prompts_ ? prompts_->find(Stack::decoder, i) : nullptr;
    if (lp) {
      if (carried > 0) h = slice_rows(h, carried, h.rows());
      carried = 0;
      if (lp->input.defined()) {
        h = inject_input_prompts(h, lp->input);
        carried = lp->input.rows();
      }
    }
    h = attention_sublayer(h, dec_[i].ln1, dec_[i].self_attn, lp, /*causal=*/true, carried, trace);
    if (const Adapter* a = adapter_at(Stack::decoder, i, SublayerPoint::attention)) {
      h = adapter_apply(h, *a, act);
    }
    h = cross_attention_sublayer(h, dec_[i].ln2, dec_[i].cross_attn, lp, memory.memory, trace);
    h = ffn_sublayer(h, dec_[i].ln3, dec_[i].ffn);
    if (const Adapter* a = adapter_at(Stack::decoder, i, SublayerPoint::ffn)) {
      h = adapter_apply(h, *a, act);
    }
    if (trace) trace->dec_layer_len.push_back(h.rows());
  }
  if (!dec_.empty()) h = layer_norm(h, dec_final_ln_.gain, dec_final_ln_.bias);
  if (carried > 0) h = slice_rows(h, carried, h.rows());
  return add_bias(matmul(h, head_w_), head_b_);
}

Tensor Seq2SeqModel::sequence_loss(const Tensor& frames, const std::vector<int>& target_content,
                                   ForwardTrace* trace) const {
  std::vector<int> full;
  full.reserve(target_content.size() + 2);
  full.push_back(kBosId);
  full.insert(full.end(), target_content.begin(), target_content.end());
  full.push_back(kEosId);
  const std::vector<int> dec_in(full.begin(), full.end() - 1);
  const std::vector<int> dec_out(full.begin() + 1, full.end());
  EncodeResult mem = encode(frames, trace);
  Tensor logits = decode(dec_in, mem, trace);
  return cross_entropy_mean(logits, dec_out, kPadId);
}

std::vector<int> Seq2SeqModel::greedy_decode(const Tensor& frames, size_t max_len) const {
  if (max_len == 0) throw ConfigError("greedy_decode: max_len must be >= 1");
  EncodeResult mem = encode(frames);
  std::vector<int> seq = {kBosId};
  std::vector<int> out;
  for (size_t step = 0; step < max_len; ++step) {
    Tensor logits = decode(seq, mem);
    const size_t last = logits.rows() - 1;
    size_t best = 0;
    double best_v = logits.at(last, 0);
    for (size_t c = 1; c < logits.cols(); ++c) {
      if (logits.at(last, c) > best_v) {
        best_v = logits.at(last, c);
        best = c;
      }
    }
    if (static_cast<int>(best) == kEosId) break;
    out.push_back(static_cast<int>(best));
    seq.push_back(static_cast<int>(best));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter access
// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, Tensor>> Seq2SeqModel::all_params() const {
  std::vector<std::pair<std::string, Tensor>> out = registry_.items();
  if (prompts_) {
    auto p = prompts_->named_params();
    out.insert(out.end(), p.begin(), p.end());
  }
  if (adapters_) {
    auto a = adapters_->named_params();
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

size_t Seq2SeqModel::total_param_count() const {
  size_t n = 0;
  for (const auto& [name, t] : all_params()) n += t.numel();
  return n;
}

void Seq2SeqModel::set_all_requires_grad(bool v) {
  for (auto& [name, t] : all_params()) {
    Tensor copy = t;
    copy.set_requires_grad(v);
  }
}

void Seq2SeqModel::zero_all_grads() {
  for (auto& [name, t] : all_params()) {
    Tensor copy = t;
    copy.zero_grad();
  }
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& targets, int pad_id) {
  return cross_entropy_mean(logits, targets, pad_id);
}

}  // namespace seqtune
