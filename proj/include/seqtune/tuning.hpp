#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "seqtune/model.hpp"
#include "seqtune/optim.hpp"
#include "seqtune/sample.hpp"

namespace seqtune {

// ---------------------------------------------------------------------------
// Adaptation plans and budgets
// ---------------------------------------------------------------------------

enum class Regime { full_ft, top_n_ft, prompt, adapter };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

struct AdaptPlan {
  Regime regime = Regime::full_ft;
  size_t top_n = 1;        // decoder layers, for top_n_ft
  PromptConfig prompt;     // for regime == prompt (bank must be installed)
  AdapterConfig adapter;   // for regime == adapter (set must be installed)
  bool train_task_head = true;
};

struct BudgetReport {
  size_t backbone = 0;
  size_t prompts = 0;
  size_t adapters = 0;
  size_t task_embedding = 0;
  size_t output_projection = 0;
  size_t total_trainable = 0;
  size_t total_model = 0;
  double trainable_fraction = 0.0;
  double trainable_fraction_excl_head = 0.0;
};

// Resolved trainable weight identifiers, in parameter-registry order.
// prompt -> banks (+ head), adapter -> adapters (+ head), top_n_ft -> last
// top_n decoder layers (+ head), full_ft -> everything. Empty result is an
// error.
std::vector<std::string> resolve_freeze_plan(const Seq2SeqModel& model, const AdaptPlan& plan);

BudgetReport count_parameters(const Seq2SeqModel& model, const AdaptPlan& plan);

enum class BudgetKnob { prompt_length, adapter_r };

struct AlignResult {
  size_t knob_value = 0;
  size_t achieved_count = 0;
  size_t target_count = 0;
  double overshoot = 0.0;  // (achieved - target) / target
};

// Smallest knob value whose total trainable count reaches target_count.
// prompt_length scales length_input (and length_kv when the template uses
// key/value prompts) together; adapter_r scales the bottleneck.
AlignResult align_budgets(const ModelConfig& model_cfg, const AdaptPlan& plan_template,
                          size_t target_count, BudgetKnob knob, size_t knob_max = 8192);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Levenshtein distance (insert/delete/substitute, unit costs).
size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b);

struct EvalResult {
  double ter = 0.0;          // sum(edit) / sum(ref_len)
  double exact_match = 0.0;
  size_t count = 0;
  size_t skipped_empty_refs = 0;
};

EvalResult evaluate(const Seq2SeqModel& model, const std::vector<Sample>& data, size_t max_len);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct Hyperparams {
  OptKind optimizer = OptKind::adam;
  double lr = 1e-3;          // 3e-4 is the full-FT default at the CLI level
  size_t batch_size = 8;
  double clip_norm = 1.0;    // global-norm clip; <= 0 disables
  size_t max_epochs = 300;
  size_t patience = 20;      // evals without valid-TER improvement before stop
  size_t eval_every = 1;     // epochs between validation decodes
};

struct RunReport {
  std::string config_echo;          // effective config as JSON text
  std::vector<double> train_loss;   // mean per-utterance loss per epoch
  std::vector<double> valid_ter;    // one entry per validation pass
  double final_ter = 0.0;           // test metric, filled by the caller
  double exact_match = 0.0;
  double best_valid_ter = std::numeric_limits<double>::infinity();
  size_t best_epoch = 0;
  size_t epochs_run = 0;
  BudgetReport budget;
  uint64_t seed = 0;
  double wall_clock_sec = 0.0;  // reported separately; not part of the
                                // deterministic report body
};

// Teacher-forced training under the plan's freeze set. Only weights in the
// resolved trainable set change (the rest keep requires_grad == false and are
// never stepped). Early-stops on a validation TER plateau and restores the
// best snapshot. lr == 0 runs the forward passes but applies no updates.
// Deterministic given (model state, plan, data, hyperparams, seed).
RunReport train(Seq2SeqModel& model, const AdaptPlan& plan, const std::vector<Sample>& train_set,
                const std::vector<Sample>& valid_set, const Hyperparams& hp, uint64_t seed);

}  // namespace seqtune
