#include "rugscan/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "nlohmann/json.hpp"
#include "rugscan/common.hpp"
#include "rugscan/facts.hpp"

namespace rugscan {

namespace {

using ordered = nlohmann::ordered_json;
using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point start) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
}

}  // namespace

AnalyzedToken analyze_bundle(const TokenBundle& bundle, const PipelineConfig& cfg) {
  if (bundle.token.bytecode.empty())
    throw input_error("bundle for " + bundle.token.address + " has empty bytecode");

  AnalyzedToken out;
  out.scg = lift(bundle.token.bytecode);
  if (out.scg.diag.step_budget_exhausted)
    out.warnings.push_back("code lift hit its step budget; graph may be partial");

  Facts facts = derive_base_facts(out.scg);
  out.findings = match_rules(facts, out.scg);
  out.srcg = build_srcg(out.scg, out.findings);

  EventWindow window = select_window(bundle.events, cfg.window_transfers);
  out.window_transfers = window.transfer_count();
  out.tfbg = build_tfbg(window, bundle.token, cfg.tfbg);

  if (out.window_transfers <= 2)
    out.warnings.push_back("degenerate transaction graph (" +
                           std::to_string(out.window_transfers) +
                           " transfers); scanning anyway");
  bool any_approval = false;
  for (const auto& e : window.events) any_approval |= e.kind == EventKind::Approval;
  if (!any_approval)
    out.warnings.push_back("no approval events in window; approve flags default to 0");
  if (!out.tfbg.eigen_converged)
    out.warnings.push_back("eigenvector centrality did not converge; feature zeroed");
  return out;
}

DetectionReport scan_bundle(const TokenBundle& bundle, RugModel& model,
                            const PipelineConfig& cfg) {
  auto t0 = clock_type::now();
  DetectionReport rep;
  rep.address = bundle.token.address;

  // Stage the analysis by hand so the timing table matches what ran.
  if (bundle.token.bytecode.empty())
    throw input_error("bundle for " + bundle.token.address + " has empty bytecode");

  auto t_lift = clock_type::now();
  CodeGraph scg = lift(bundle.token.bytecode);
  rep.timings.lift_ms = ms_since(t_lift);

  auto t_rules = clock_type::now();
  Facts facts = derive_base_facts(scg);
  rep.findings = match_rules(facts, scg);
  SemanticRiskCodeGraph srcg = build_srcg(scg, rep.findings);
  rep.timings.rules_ms = ms_since(t_rules);

  auto t_tfbg = clock_type::now();
  EventWindow window = select_window(bundle.events, cfg.window_transfers);
  TokenFlowBehaviorGraph tfbg = build_tfbg(window, bundle.token, cfg.tfbg);
  rep.timings.tfbg_ms = ms_since(t_tfbg);

  if (scg.diag.step_budget_exhausted)
    rep.warnings.push_back("code lift hit its step budget; graph may be partial");
  if (window.transfer_count() <= 2)
    rep.warnings.push_back("degenerate transaction graph (" +
                           std::to_string(window.transfer_count()) +
                           " transfers); scanning anyway");
  bool any_approval = false;
  for (const auto& e : window.events) any_approval |= e.kind == EventKind::Approval;
  if (!any_approval)
    rep.warnings.push_back("no approval events in window; approve flags default to 0");
  if (!tfbg.eigen_converged)
    rep.warnings.push_back("eigenvector centrality did not converge; feature zeroed");

  auto t_inf = clock_type::now();
  CompiledSample sample = compile_sample(srcg, tfbg);
  Tape tape;
  std::mt19937_64 rng(0);  // eval mode; never drawn from
  auto r = model.forward(tape, sample, Variant::Full, false, rng);
  rep.probability = tape.val(r.prob).at(0, 1);
  rep.w_code = r.w_code;
  rep.w_tx = r.w_tx;
  rep.rugpull = rep.probability >= cfg.threshold;
  rep.timings.inference_ms = ms_since(t_inf);

  rep.code_blocks = srcg.node_count();
  rep.tx_nodes = tfbg.node_count();
  rep.tx_edges = tfbg.edge_count();
  rep.timings.total_ms = ms_since(t0);
  return rep;
}

namespace {

ordered findings_json_obj(const std::vector<RiskFinding>& findings) {
  ordered arr = ordered::array();
  for (const auto& f : findings) {
    ordered fj;
    fj["risk"] = risk_name(f.risk);
    fj["category"] = category_name(f.category);
    fj["critical_blocks"] = f.cb;
    ordered flows = ordered::array();
    for (const auto& [a, b] : f.cf) flows.push_back({a, b});
    fj["critical_flows"] = std::move(flows);
    fj["witness"] = f.witness;
    arr.push_back(std::move(fj));
  }
  return arr;
}

}  // namespace

std::string report_json(const DetectionReport& r) {
  ordered j;
  j["address"] = r.address;
  j["verdict"] = r.rugpull ? "rugpull" : "benign";
  j["probability"] = r.probability;
  j["weights"] = {{"code", r.w_code}, {"transaction", r.w_tx}};
  j["findings"] = findings_json_obj(r.findings);
  j["graph"] = {{"code_blocks", r.code_blocks},
                {"tx_nodes", r.tx_nodes},
                {"tx_edges", r.tx_edges}};
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::string findings_json(const std::vector<RiskFinding>& findings) {
  return findings_json_obj(findings).dump(2) + "\n";
}

std::string report_text(const DetectionReport& r) {
  std::ostringstream out;
  char line[256];
  out << "token     " << r.address << "\n";
  std::snprintf(line, sizeof line, "verdict   %s (p = %.4f)\n",
                r.rugpull ? "RUGPULL" : "benign", r.probability);
  out << line;
  std::snprintf(line, sizeof line, "weights   code %.3f / transaction %.3f\n", r.w_code,
                r.w_tx);
  out << line;
  if (r.findings.empty()) {
    out << "findings  none\n";
  } else {
    for (const auto& f : r.findings) {
      std::snprintf(line, sizeof line, "finding   %s (%s): %zu blocks, %zu flows\n",
                    risk_name(f.risk), category_name(f.category), f.cb.size(), f.cf.size());
      out << line;
    }
  }
  std::snprintf(line, sizeof line, "graph     %zu code blocks, %zu holders, %zu transfers\n",
                r.code_blocks, r.tx_nodes, r.tx_edges);
  out << line;
  for (const auto& w : r.warnings) out << "warning   " << w << "\n";
  std::snprintf(line, sizeof line,
                "timing    lift %.1f ms | rules %.1f ms | tfbg %.1f ms | inference %.1f ms "
                "| total %.1f ms\n",
                r.timings.lift_ms, r.timings.rules_ms, r.timings.tfbg_ms,
                r.timings.inference_ms, r.timings.total_ms);
  out << line;
  return out.str();
}

std::string scg_json(const CodeGraph& g) {
  ordered j;
  ordered blocks = ordered::array();
  for (const auto& [id, block] : g.blocks) {
    ordered bj;
    bj["id"] = id;
    bj["instructions"] = block.instructions.size();
    if (block.function) {
      char sel[12];
      std::snprintf(sel, sizeof sel, "0x%08x", *block.function);
      bj["function"] = sel;
    } else {
      bj["function"] = nullptr;
    }
    blocks.push_back(std::move(bj));
  }
  j["blocks"] = std::move(blocks);
  ordered cf = ordered::array(), dd = ordered::array();
  for (const auto& [a, b] : g.cf_edges) cf.push_back({a, b});
  for (const auto& [a, b] : g.dd_edges) dd.push_back({a, b});
  j["cf_edges"] = std::move(cf);
  j["dd_edges"] = std::move(dd);
  return j.dump(2) + "\n";
}

std::string srcg_json(const SemanticRiskCodeGraph& g) {
  ordered j;
  ordered nodes = ordered::array();
  for (const auto& n : g.nodes) {
    ordered nj;
    nj["block"] = n.block;
    nj["type"] = node_type_name(n.type);
    nj["opcodes"] = to_hex(n.opcodes);
    nodes.push_back(std::move(nj));
  }
  ordered edges = ordered::array();
  for (const auto& e : g.edges) {
    ordered ej;
    ej["src"] = e.src;
    ej["dst"] = e.dst;
    ej["type"] = edge_type_name(e.type);
    edges.push_back(std::move(ej));
  }
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  return j.dump(2) + "\n";
}

std::string tfbg_json(const TokenFlowBehaviorGraph& g) {
  ordered j;
  j["node_feature_names"] = node_feature_names();
  j["edge_feature_names"] = edge_feature_names();
  ordered nodes = ordered::array();
  for (size_t i = 0; i < g.node_count(); ++i) {
    ordered nj;
    nj["address"] = g.addresses[i];
    nj["features"] = g.node_features[i];
    nodes.push_back(std::move(nj));
  }
  ordered edges = ordered::array();
  for (size_t e = 0; e < g.edge_count(); ++e) {
    const auto& edge = g.edges[e];
    ordered ej;
    ej["src"] = edge.src;
    ej["dst"] = edge.dst;
    ej["timestamp"] = edge.t;
    ej["tx_hash"] = edge.tx_hash;
    ej["log_index"] = edge.log_index;
    ej["value"] = edge.value.str();
    ej["gas_limit"] = edge.gas_limit;
    ej["features"] = g.edge_features[e];
    edges.push_back(std::move(ej));
  }
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  j["eigen_converged"] = g.eigen_converged;
  return j.dump(2) + "\n";
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open manifest " + path);

  std::vector<ManifestEntry> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Tolerate blank lines; everything else must be one JSON object.
    bool blank = true;
    for (char c : line) blank = blank && std::isspace(static_cast<unsigned char>(c));
    if (blank) continue;

    ordered j;
    try {
      j = ordered::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw input_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto where = path + ":" + std::to_string(lineno);
    if (!j.is_object()) throw input_error(where + ": expected an object");
    if (!j.contains("id") || !j["id"].is_string())
      throw input_error(where + ": missing string field 'id'");
    if (!j.contains("bundle_path") || !j["bundle_path"].is_string())
      throw input_error(where + ": missing string field 'bundle_path'");
    if (!j.contains("label")) throw input_error(where + ": missing field 'label'");

    ManifestEntry entry;
    entry.id = j["id"].get<std::string>();
    entry.bundle_path = j["bundle_path"].get<std::string>();
    const auto& label = j["label"];
    if (label.is_number_integer()) {
      int v = label.get<int>();
      if (v != 0 && v != 1) throw input_error(where + ": label must be 0 or 1");
      entry.label = v;
    } else if (label.is_string()) {
      std::string s = label.get<std::string>();
      if (s == "rugpull") entry.label = 1;
      else if (s == "benign") entry.label = 0;
      else throw input_error(where + ": label must be 'rugpull' or 'benign'");
    } else {
      throw input_error(where + ": label must be an integer or string");
    }
    out.push_back(std::move(entry));
  }
  if (out.empty()) throw input_error("manifest " + path + " has no entries");
  return out;
}

std::vector<LabeledSample> load_dataset(const std::string& manifest_path,
                                        const PipelineConfig& cfg) {
  auto entries = load_manifest(manifest_path);
  auto base = std::filesystem::path(manifest_path).parent_path();

  std::vector<LabeledSample> out;
  out.reserve(entries.size());
  for (const auto& entry : entries) {
    std::filesystem::path p(entry.bundle_path);
    if (p.is_relative()) p = base / p;
    try {
      TokenBundle bundle = load_bundle(p.string());
      AnalyzedToken at = analyze_bundle(bundle, cfg);
      LabeledSample s;
      s.id = entry.id;
      s.label = entry.label;
      s.srcg = std::move(at.srcg);
      s.tfbg = std::move(at.tfbg);
      out.push_back(std::move(s));
    } catch (const Error& e) {
      throw Error(e.kind(), entry.id + ": " + e.what());
    }
  }
  return out;
}

}  // namespace rugscan
