#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seqtune/adapters.hpp"
#include "seqtune/model_config.hpp"
#include "seqtune/ops.hpp"
#include "seqtune/prompts.hpp"
#include "seqtune/tensor.hpp"

namespace seqtune {

// ---------------------------------------------------------------------------
// Weight containers
// ---------------------------------------------------------------------------

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct LayerNormWeights {
  Tensor gain, bias;
};

struct FfnWeights {
  Tensor w1, b1, w2, b2;
};

struct EncoderLayer {
  LayerNormWeights ln1, ln2;
  AttentionWeights attn;
  FfnWeights ffn;
};

struct DecoderLayer {
  LayerNormWeights ln1, ln2, ln3;
  AttentionWeights self_attn, cross_attn;
  FfnWeights ffn;
};

// Strided patch projection; kernel width equals the stride.
struct FrontendLayer {
  Tensor w;  // (stride * in_width) x d_model
  Tensor b;  // d_model
  size_t stride = 1;
};

// Ordered name -> tensor table. Iteration order is registration order, which
// fixes optimizer and hashing order across runs.
class ParamRegistry {
 public:
  Tensor& add(const std::string& name, Tensor t);
  void replace(const std::string& name, Tensor t);
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  size_t total_count() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::map<std::string, size_t> index_;
};

// ---------------------------------------------------------------------------
// Forward introspection
// ---------------------------------------------------------------------------

// Optional probe filled during forward passes; used by tests and invariants.
struct ForwardTrace {
  std::vector<size_t> enc_layer_len;  // sequence length after each encoder layer
  std::vector<size_t> dec_layer_len;
  std::vector<Tensor> attention_rows;  // every attention-probability matrix, per head
};

struct EncodeResult {
  Tensor memory;          // (prompt_rows + T) x d_model
  size_t prompt_rows = 0; // leading rows that came from input prompts
};

// Multi-head attention over row-major sequences. q_src supplies queries;
// kv_src supplies keys/values, optionally preceded by pre-projection prompt
// prefixes (prefix_k/prefix_v may be undefined). mask covers
// q_rows x (prefix_rows + kv_rows).
Tensor multi_head_attention(const Tensor& q_src, const Tensor& kv_src,
                            const AttentionWeights& w, size_t n_heads,
                            const Tensor& prefix_k, const Tensor& prefix_v, const Mask& mask,
                            ForwardTrace* trace = nullptr);

// Sinusoidal table, rows x d_model; plain data (no positions for prompts).
Tensor sinusoidal_positions(size_t rows, size_t d_model);

// ---------------------------------------------------------------------------
// Seq2SeqModel
// ---------------------------------------------------------------------------

class Seq2SeqModel {
 public:
  Seq2SeqModel(ModelConfig config, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // --- adaptation state -----------------------------------------------------
  void install_prompt_bank(PromptBank bank);
  void remove_prompt_bank();
  bool has_prompts() const { return prompts_.has_value(); }
  const PromptBank* prompt_bank() const { return prompts_ ? &*prompts_ : nullptr; }

  // Builds adapters from config+seed and installs them; a second insertion is
  // an error; removal restores bit-identical base behavior.
  const AdapterSet& install_adapters(const AdapterConfig& config, uint64_t seed);
  void install_adapter_set(AdapterSet set);
  void remove_adapters();
  bool has_adapters() const { return adapters_.has_value(); }
  const AdapterSet* adapter_set() const { return adapters_ ? &*adapters_ : nullptr; }

  // Keep encoder prompt rows as extra cross-attention memory slots (default)
  // or strip them from the memory.
  void set_keep_prompt_memory(bool keep) { keep_prompt_memory_ = keep; }
  bool keep_prompt_memory() const { return keep_prompt_memory_; }

  // Replaces the embedding table and output projection for a new task
  // vocabulary; no other weight is touched.
  void substitute_task_head(size_t new_vocab_size, uint64_t seed);

  // --- forward --------------------------------------------------------------
  Tensor frontend_forward(const Tensor& frames) const;
  // Encoder layer stack only (prompt/adapter aware); identity for zero layers.
  EncodeResult encoder_forward(const Tensor& g1, ForwardTrace* trace = nullptr) const;
  // frontend + positional encoding + encoder_forward.
  EncodeResult encode(const Tensor& frames, ForwardTrace* trace = nullptr) const;
  Tensor decode(const std::vector<int>& tokens, const EncodeResult& memory,
                ForwardTrace* trace = nullptr) const;  // logits T' x vocab

  // Teacher-forced loss on (frames, target) where target excludes specials;
  // bos/eos handling happens here.
  Tensor sequence_loss(const Tensor& frames, const std::vector<int>& target_content,
                       ForwardTrace* trace = nullptr) const;

  std::vector<int> greedy_decode(const Tensor& frames, size_t max_len) const;

  // --- parameters -----------------------------------------------------------
  const ParamRegistry& base_params() const { return registry_; }
  // Base registry plus installed prompt/adapter parameters.
  std::vector<std::pair<std::string, Tensor>> all_params() const;
  size_t total_param_count() const;
  void set_all_requires_grad(bool v);
  void zero_all_grads();

  Tensor& embedding() { return *registry_.find("embed.table"); }
  const Tensor& embedding() const { return *registry_.find("embed.table"); }

 private:
  Tensor attention_sublayer(const Tensor& x, const LayerNormWeights& ln,
                            const AttentionWeights& attn, const LayerPrompts* lp, bool causal,
                            size_t n_prompt_rows, ForwardTrace* trace) const;
  Tensor cross_attention_sublayer(const Tensor& x, const LayerNormWeights& ln,
                                  const AttentionWeights& attn, const LayerPrompts* lp,
                                  const Tensor& memory, ForwardTrace* trace) const;
  Tensor ffn_sublayer(const Tensor& x, const LayerNormWeights& ln, const FfnWeights& ffn) const;
  const Adapter* adapter_at(Stack stack, size_t layer, SublayerPoint point) const;

  ModelConfig cfg_;
  std::vector<FrontendLayer> frontend_;
  std::vector<EncoderLayer> enc_;
  LayerNormWeights enc_final_ln_;
  std::vector<DecoderLayer> dec_;
  LayerNormWeights dec_final_ln_;
  Tensor embedding_;  // vocab x d_model
  Tensor head_w_;     // d_model x vocab (untied from the embedding)
  Tensor head_b_;     // vocab

  ParamRegistry registry_;
  std::optional<PromptBank> prompts_;
  std::optional<AdapterSet> adapters_;
  bool keep_prompt_memory_ = true;
};

// Mean NLL over non-pad positions of the shifted target sequence.
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& targets, int pad_id);

}  // namespace seqtune
