#pragma once

#include <string>
#include <utility>
#include <vector>

#include "seqtune/tensor.hpp"

namespace seqtune {

class Seq2SeqModel;

std::string sha256_hex(const void* data, size_t len);

// Digest over (name, shape, raw IEEE-754 bytes) of each tensor in order.
std::string hash_named_tensors(const std::vector<std::pair<std::string, Tensor>>& tensors);

// Hash of the frozen-backbone surface: every base weight except the task head
// (embedding table + output projection). Prompt banks and adapters are not
// part of the backbone.
std::string backbone_hash(const Seq2SeqModel& model);

bool is_task_head_param(const std::string& name);

}  // namespace seqtune
