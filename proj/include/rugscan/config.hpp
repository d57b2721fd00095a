#pragma once

#include <cstdint>
#include <string>

#include "rugscan/models.hpp"
#include "rugscan/tfbg.hpp"
#include "rugscan/trainer.hpp"

namespace rugscan {

// Network side of the pipeline. Endpoints empty by default: every command
// works offline from fixtures unless the user opts in.
struct FetchConfig {
  std::string rpc_url;
  std::string explorer_url;
  std::string cache_dir = "cache";
  std::string api_key_env = "RUGSCAN_API_KEY";  // env var consulted, never stored
  int timeout_seconds = 30;
  int page_size = 1000;
  int max_attempts = 3;   // per request, with exponential backoff between tries
  int max_pages = 10;     // explorer paging cap, so one token cannot run away
  int throttle_ms = 0;    // minimum spacing between requests (rate cap)
};

// Every tunable in one place; the CLI --config flag loads a JSON file with
// the same shape as config_json() emits. Omitted keys keep their defaults,
// unknown keys are rejected so typos cannot silently no-op.
struct PipelineConfig {
  size_t window_transfers = 500;  // earliest-N transfer window
  TfbgParams tfbg;                // burst window + centrality solver knobs
  ModelConfig model;
  double threshold = 0.5;         // rug-probability decision cut
  std::string checkpoint_path;    // trained parameters for scan/eval

  double train_lr = 1e-3;
  size_t train_max_epochs = 200;
  size_t train_patience = 10;
  size_t train_threads = 1;

  FetchConfig fetch;
};

PipelineConfig default_config();

// Parse/serialize. load_config reads a file (config_error when unreadable);
// parse_config_json works on in-memory text, `what` names the source in
// error messages. Both validate ranges and reject unknown keys.
PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config_json(const std::string& text, const std::string& what);
std::string config_json(const PipelineConfig& cfg);

// Bridges the config file to the trainer's option block.
TrainOptions train_options(const PipelineConfig& cfg, Variant variant, uint64_t seed);

}  // namespace rugscan
