#pragma once

#include <string>

#include "seqtune/model.hpp"

namespace seqtune {

// Versioned JSON container mapping weight identifiers to shape + values.
// Prompt banks and adapters live under their own namespaces; a checkpoint
// without them loads as the base model. Round-trips are bit-exact.
void save_checkpoint(const Seq2SeqModel& model, const std::string& path);
Seq2SeqModel load_checkpoint(const std::string& path);

}  // namespace seqtune
