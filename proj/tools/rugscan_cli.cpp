// Command-line frontend. Everything of substance happens behind the C API;
// this file only parses flags, merges config overrides and renders output.

#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rugscan.h"

namespace {

using json = nlohmann::json;

// Failure that already knows its process exit code.
struct ExitError : std::runtime_error {
  int code;
  ExitError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

// Takes ownership of C API output strings.
struct OutStr {
  char* p = nullptr;
  ~OutStr() { rs_string_free(p); }
  std::string str() const { return p == nullptr ? std::string() : std::string(p); }
};

struct CtxGuard {
  rs_ctx* ctx = nullptr;
  ~CtxGuard() { rs_ctx_free(ctx); }
};

struct GlobalOpts {
  std::string config_path;
  bool offline = false;
  bool as_json = false;
  unsigned long long seed = 0;
  std::string rpc, explorer, cache_dir;
};

[[noreturn]] void raise(rs_status st) {
  throw ExitError(static_cast<int>(st), rs_last_error());
}

void check(rs_status st) {
  if (st != RS_OK) raise(st);
}

// Base config (file or built-in defaults) with the override flags folded in.
// Validation happens in rs_ctx_new; unreadable files fail here with exit 2.
std::string merged_config(const GlobalOpts& g, const std::string& checkpoint) {
  std::string base;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path, std::ios::binary);
    if (!in) throw ExitError(2, "cannot open config " + g.config_path);
    base.assign(std::istreambuf_iterator<char>(in), {});
  } else {
    OutStr def;
    check(rs_default_config_json(&def.p));
    base = def.str();
  }
  // ordered_json keeps the file's (and the built-in dump's) key order, so
  // `rugscan config` round-trips byte-identically when nothing is overridden.
  auto j = nlohmann::ordered_json::parse(base, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ExitError(2, (g.config_path.empty() ? std::string("config") : g.config_path) +
                           ": not a JSON object");
  if (!g.rpc.empty()) j["fetch"]["rpc_url"] = g.rpc;
  if (!g.explorer.empty()) j["fetch"]["explorer_url"] = g.explorer;
  if (!g.cache_dir.empty()) j["fetch"]["cache_dir"] = g.cache_dir;
  if (!checkpoint.empty()) j["scan"]["checkpoint"] = checkpoint;
  return j.dump(2);
}

rs_ctx* make_ctx(CtxGuard& guard, const GlobalOpts& g, const std::string& checkpoint = "") {
  std::string cfg = merged_config(g, checkpoint);
  check(rs_ctx_new(cfg.c_str(), &guard.ctx));
  return guard.ctx;
}

int run_fetch(const GlobalOpts& g, const std::string& address) {
  CtxGuard guard;
  rs_ctx* ctx = make_ctx(guard, g);
  OutStr out;
  check(rs_fetch(ctx, address.c_str(), g.offline ? 1 : 0, &out.p));
  if (g.as_json) {
    std::fputs(out.str().c_str(), stdout);
    return 0;
  }
  json j = json::parse(out.str());
  std::printf("fetched %s: %zu events (%zu pages, %zu duplicate rows)%s\n",
              j["address"].get<std::string>().c_str(), j["events"].get<size_t>(),
              j["pages"].get<size_t>(), j["duplicates"].get<size_t>(),
              j["from_cache"].get<bool>() ? " [cache]" : "");
  std::printf("bundle    %s\n", j["bundle_dir"].get<std::string>().c_str());
  return 0;
}

int run_scan(const GlobalOpts& g, const std::string& target, const std::string& checkpoint) {
  CtxGuard guard;
  rs_ctx* ctx = make_ctx(guard, g, checkpoint);
  OutStr report, text;
  check(rs_scan(ctx, target.c_str(), g.offline ? 1 : 0, &report.p, &text.p));
  std::fputs((g.as_json ? report : text).str().c_str(), stdout);
  return 0;
}

int run_graphs(const GlobalOpts& g, const std::string& target) {
  CtxGuard guard;
  rs_ctx* ctx = make_ctx(guard, g);
  OutStr out;
  check(rs_graphs(ctx, target.c_str(), g.offline ? 1 : 0, &out.p));
  std::fputs(out.str().c_str(), stdout);
  return 0;
}

int run_rules_check(const GlobalOpts& g, const std::string& target, bool selftest) {
  OutStr out;
  if (selftest) {
    check(rs_rules_selftest(&out.p));
    json j = json::parse(out.str());
    if (g.as_json) {
      std::fputs(out.str().c_str(), stdout);
    } else {
      for (const auto& row : j["fixtures"])
        std::printf("%-24s planted %s  defused %s\n", row["risk"].get<std::string>().c_str(),
                    row["planted_ok"].get<bool>() ? "ok" : "FAIL",
                    row["defused_ok"].get<bool>() ? "ok" : "FAIL");
      std::printf("selftest  %s\n", j["pass"].get<bool>() ? "pass" : "FAIL");
    }
    // A broken rule engine is an internal fault, not a usage problem.
    return j["pass"].get<bool>() ? 0 : 4;
  }
  if (target.empty()) throw ExitError(2, "rules check needs a target (or --selftest)");
  CtxGuard guard;
  rs_ctx* ctx = make_ctx(guard, g);
  check(rs_rules_check(ctx, target.c_str(), &out.p));
  std::fputs(out.str().c_str(), stdout);
  return 0;
}

int run_synth(const GlobalOpts& g, const std::string& out_dir, int rug, int benign) {
  OutStr out;
  check(rs_synth(out_dir.c_str(), g.seed, rug, benign, &out.p));
  if (g.as_json) {
    std::fputs(out.str().c_str(), stdout);
    return 0;
  }
  json j = json::parse(out.str());
  std::printf("generated %zu bundles (%d rug / %d benign), seed %llu\n",
              j["tokens"].get<size_t>(), j["rug"].get<int>(), j["benign"].get<int>(),
              j["seed"].get<unsigned long long>());
  std::printf("manifest  %s\n", j["manifest"].get<std::string>().c_str());
  return 0;
}

int run_train(const GlobalOpts& g, const std::string& manifest, const std::string& out_path) {
  CtxGuard guard;
  rs_ctx* ctx = make_ctx(guard, g);
  OutStr out;
  check(rs_train(ctx, manifest.c_str(), out_path.empty() ? nullptr : out_path.c_str(), g.seed,
                 &out.p));
  if (g.as_json) {
    std::fputs(out.str().c_str(), stdout);
    return 0;
  }
  json j = json::parse(out.str());
  std::printf("trained   %zu samples (%d rug / %d benign), %zu epochs, best epoch %zu\n",
              j["samples"].get<size_t>(), j["rug"].get<int>(), j["benign"].get<int>(),
              j["epochs"].get<size_t>(), j["best_epoch"].get<size_t>());
  std::printf("val       F1 %.4f  precision %.4f  recall %.4f\n",
              j["val"]["f1"].get<double>(), j["val"]["precision"].get<double>(),
              j["val"]["recall"].get<double>());
  std::printf("saved     %s\n", j["checkpoint"].get<std::string>().c_str());
  return 0;
}

int run_eval(const GlobalOpts& g, const std::string& manifest, const std::string& checkpoint) {
  CtxGuard guard;
  rs_ctx* ctx = make_ctx(guard, g, checkpoint);
  OutStr out;
  check(rs_eval(ctx, manifest.c_str(), &out.p));
  if (g.as_json) {
    std::fputs(out.str().c_str(), stdout);
    return 0;
  }
  json j = json::parse(out.str());
  const json& m = j["metrics"];
  std::printf("evaluated %zu samples (%d rug / %d benign)\n", j["samples"].get<size_t>(),
              j["rug"].get<int>(), j["benign"].get<int>());
  std::printf("metrics   F1 %.4f  precision %.4f  recall %.4f  FPR %.4f  accuracy %.4f\n",
              m["f1"].get<double>(), m["precision"].get<double>(), m["recall"].get<double>(),
              m["fpr"].get<double>(), m["accuracy"].get<double>());
  return 0;
}

int run_ablation(const GlobalOpts& g, const std::string& manifest) {
  CtxGuard guard;
  rs_ctx* ctx = make_ctx(guard, g);
  OutStr out_json, out_table;
  check(rs_ablation(ctx, manifest.c_str(), g.seed, &out_json.p, &out_table.p));
  std::fputs((g.as_json ? out_json : out_table).str().c_str(), stdout);
  return 0;
}

int run_sweep(const GlobalOpts& g, const std::string& list, const std::string& out_dir,
              int workers) {
  CtxGuard guard;
  rs_ctx* ctx = make_ctx(guard, g);
  OutStr out;
  check(rs_sweep(ctx, list.c_str(), out_dir.c_str(), workers, g.offline ? 1 : 0, &out.p));
  if (g.as_json) {
    std::fputs(out.str().c_str(), stdout);
    return 0;
  }
  json j = json::parse(out.str());
  std::printf("swept     %zu addresses: %zu scanned (%zu rugpull / %zu benign), "
              "%zu skipped, %zu failed\n",
              j["addresses"].get<size_t>(), j["scanned"].get<size_t>(),
              j["rugpull"].get<size_t>(), j["benign"].get<size_t>(),
              j["skipped"].get<size_t>(), j["failed"].get<size_t>());
  std::printf("network   %zu requests\n", j["network_requests"].get<size_t>());
  for (const auto& row : j["rows"]) {
    std::string status = row.value("status", "");
    if (status == "failed")
      std::printf("failed    %s: %s\n", row["address"].get<std::string>().c_str(),
                  row["error"].get<std::string>().c_str());
    else if (status == "skipped")
      std::printf("skipped   %s: %s\n", row["address"].get<std::string>().c_str(),
                  row["reason"].get<std::string>().c_str());
  }
  std::printf("reports   %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOpts g;
  CLI::App app{"rug-pull token scanner (bytecode risk rules + flow-graph model)"};
  app.require_subcommand(1);
  app.fallthrough();  // let global flags appear after the subcommand too
  app.add_option("--config", g.config_path, "JSON config file (see `rugscan config`)");
  app.add_flag("--offline", g.offline, "never touch the network; cache and fixtures only");
  app.add_flag("--json", g.as_json, "machine-readable output");
  app.add_option("--seed", g.seed, "RNG seed for train/ablation")->default_val(0);
  app.add_option("--rpc", g.rpc, "JSON-RPC endpoint URL (overrides config)");
  app.add_option("--explorer", g.explorer, "explorer API URL (overrides config)");
  app.add_option("--cache-dir", g.cache_dir, "bundle cache directory (overrides config)");

  auto* config_cmd = app.add_subcommand("config", "print the effective configuration");

  std::string fetch_address;
  auto* fetch = app.add_subcommand("fetch", "download and cache one token bundle");
  fetch->add_option("address", fetch_address, "token contract address")->required();

  std::string scan_target, scan_checkpoint;
  auto* scan = app.add_subcommand("scan", "detect rug-pull risk for an address or bundle dir");
  scan->add_option("target", scan_target, "token address or bundle directory")->required();
  scan->add_option("--checkpoint", scan_checkpoint, "model checkpoint (overrides config)");

  std::string graphs_target;
  auto* graphs = app.add_subcommand("graphs", "dump the code and flow graphs as JSON");
  graphs->add_option("target", graphs_target, "token address or bundle directory")->required();

  auto* rules = app.add_subcommand("rules", "risk rule utilities");
  rules->require_subcommand(1);
  std::string rules_target;
  bool rules_selftest = false;
  auto* rules_check = rules->add_subcommand("check", "run the risk rules over bytecode");
  rules_check->add_option("target", rules_target, "bundle directory or hex bytecode file");
  rules_check->add_flag("--selftest", rules_selftest,
                        "verify the built-in planted/defused fixture matrix");

  std::string synth_out;
  int synth_rug = 100, synth_benign = 150;
  auto* synth = app.add_subcommand("synth", "write the synthetic labeled benchmark");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--rug", synth_rug, "rug-pull token count")->default_val(100);
  synth->add_option("--benign", synth_benign, "benign token count")->default_val(150);

  std::string train_manifest, train_out;
  auto* train = app.add_subcommand("train", "train the detector on a labeled manifest");
  train->add_option("--data", train_manifest, "manifest.jsonl of {id,label,bundle_path}")
      ->required();
  train->add_option("--out", train_out, "checkpoint output (default: config checkpoint)");

  std::string eval_manifest, eval_checkpoint;
  auto* eval = app.add_subcommand("eval", "evaluate a trained checkpoint on a manifest");
  eval->add_option("--data", eval_manifest, "manifest.jsonl of {id,label,bundle_path}")
      ->required();
  eval->add_option("--checkpoint", eval_checkpoint, "model checkpoint (overrides config)");

  std::string abl_manifest;
  auto* ablation = app.add_subcommand("ablation", "cross-validate all model variants");
  ablation->add_option("--data", abl_manifest, "manifest.jsonl of {id,label,bundle_path}")
      ->required();

  std::string sweep_list, sweep_out;
  int sweep_workers = 1;
  auto* sweep = app.add_subcommand("sweep", "scan a list of addresses with caching");
  sweep->add_option("--list", sweep_list, "text file, one address per line")->required();
  sweep->add_option("--out", sweep_out, "directory for per-token reports")->required();
  sweep->add_option("--workers", sweep_workers, "parallel workers")->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage problems are config errors
  }

  try {
    if (config_cmd->parsed()) {
      std::string cfg = merged_config(g, "");
      check(rs_config_check(cfg.c_str()));
      std::fputs((cfg + "\n").c_str(), stdout);
      return 0;
    }
    if (fetch->parsed()) return run_fetch(g, fetch_address);
    if (scan->parsed()) return run_scan(g, scan_target, scan_checkpoint);
    if (graphs->parsed()) return run_graphs(g, graphs_target);
    if (rules_check->parsed()) return run_rules_check(g, rules_target, rules_selftest);
    if (synth->parsed()) return run_synth(g, synth_out, synth_rug, synth_benign);
    if (train->parsed()) return run_train(g, train_manifest, train_out);
    if (eval->parsed()) return run_eval(g, eval_manifest, eval_checkpoint);
    if (ablation->parsed()) return run_ablation(g, abl_manifest);
    if (sweep->parsed()) return run_sweep(g, sweep_list, sweep_out, sweep_workers);
  } catch (const ExitError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 2;  // unreachable with require_subcommand(1)
}
