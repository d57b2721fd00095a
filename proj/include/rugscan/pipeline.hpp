#pragma once

#include <string>
#include <vector>

#include "rugscan/config.hpp"
#include "rugscan/events.hpp"
#include "rugscan/models.hpp"
#include "rugscan/rules.hpp"
#include "rugscan/scg.hpp"
#include "rugscan/srcg.hpp"
#include "rugscan/tfbg.hpp"
#include "rugscan/trainer.hpp"

namespace rugscan {

// Everything one token's bundle turns into before the model runs. Shared by
// scan, the graph-dump command, and the training data loader.
struct AnalyzedToken {
  CodeGraph scg;
  SemanticRiskCodeGraph srcg;
  TokenFlowBehaviorGraph tfbg;
  std::vector<RiskFinding> findings;
  std::vector<std::string> warnings;
  size_t window_transfers = 0;
};

// Lift + rules + risk typing on the code side, window + feature build on the
// event side. Throws Input for empty bytecode or a window with no transfers.
AnalyzedToken analyze_bundle(const TokenBundle& bundle, const PipelineConfig& cfg);

struct StageTimings {
  double lift_ms = 0.0;
  double rules_ms = 0.0;
  double tfbg_ms = 0.0;
  double inference_ms = 0.0;
  double total_ms = 0.0;
};

struct DetectionReport {
  std::string address;
  bool rugpull = false;      // probability >= threshold
  double probability = 0.0;  // rug-class probability
  double w_code = 0.0, w_tx = 0.0;
  std::vector<RiskFinding> findings;
  size_t code_blocks = 0, tx_nodes = 0, tx_edges = 0;
  std::vector<std::string> warnings;
  // Shown by the text renderer only. Keeping wall-clock noise out of the JSON
  // report is what makes repeated scans byte-identical.
  StageTimings timings;
};

DetectionReport scan_bundle(const TokenBundle& bundle, RugModel& model,
                            const PipelineConfig& cfg);

std::string report_json(const DetectionReport& r);
std::string report_text(const DetectionReport& r);

// The findings array exactly as report_json embeds it, for callers that
// render rule results without a full scan (the rules-check command).
std::string findings_json(const std::vector<RiskFinding>& findings);

// Graph dumps for the `graphs` subcommand.
std::string scg_json(const CodeGraph& g);
std::string srcg_json(const SemanticRiskCodeGraph& g);
std::string tfbg_json(const TokenFlowBehaviorGraph& g);

// Dataset manifest: JSON lines, one {id, label, bundle_path} per record.
// Relative bundle paths resolve against the manifest's own directory.
struct ManifestEntry {
  std::string id;
  int label = 0;
  std::string bundle_path;
};
std::vector<ManifestEntry> load_manifest(const std::string& path);
std::vector<LabeledSample> load_dataset(const std::string& manifest_path,
                                        const PipelineConfig& cfg);

}  // namespace rugscan
