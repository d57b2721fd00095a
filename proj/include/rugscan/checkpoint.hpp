#pragma once

#include <memory>
#include <string>

#include "rugscan/models.hpp"

namespace rugscan {

// Versioned JSON on disk: {format_version, hyperparams, params:{name:{shape,
// data[]}}}. Parameters serialize in registry order with round-trip-exact
// doubles, so identical weights produce identical bytes.
constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const RugModel& model);

// Same content as save_checkpoint, returned as a string (the trainer hashes
// and compares checkpoints without touching the filesystem).
std::string checkpoint_text(const RugModel& model);

// Rebuilds the model from hyperparams and loads every tensor. Unknown
// format_version, missing/extra params, shape or length mismatches and
// non-finite entries are all input errors.
std::unique_ptr<RugModel> load_checkpoint(const std::string& path);
std::unique_ptr<RugModel> load_checkpoint_text(const std::string& text, const std::string& what);

}  // namespace rugscan
