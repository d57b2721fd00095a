#include "rugscan.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "rugscan/checkpoint.hpp"
#include "rugscan/config.hpp"
#include "rugscan/events.hpp"
#include "rugscan/fetch.hpp"
#include "rugscan/pipeline.hpp"
#include "rugscan/rules.hpp"
#include "rugscan/synth.hpp"
#include "rugscan/token_builder.hpp"
#include "rugscan/trainer.hpp"

using ordered = nlohmann::ordered_json;

namespace {

thread_local std::string t_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

// Every entry point funnels through here so the error taxonomy maps onto
// status codes in exactly one place.
template <typename Fn>
rs_status guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return RS_OK;
  } catch (const rugscan::Error& e) {
    t_last_error = e.what();
    return static_cast<rs_status>(e.exit_code());
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return RS_ERR_INTERNAL;
  } catch (...) {
    t_last_error = "unknown error";
    return RS_ERR_INTERNAL;
  }
}

void require_arg(const void* p, const char* name) {
  if (p == nullptr) throw rugscan::input_error(std::string("null argument: ") + name);
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rugscan::input_error(std::string("cannot open ") + what + " " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

ordered metrics_json(const rugscan::Metrics& m) {
  return ordered{{"tp", m.tp},
                 {"fp", m.fp},
                 {"fn", m.fn},
                 {"tn", m.tn},
                 {"precision", m.precision},
                 {"recall", m.recall},
                 {"f1", m.f1},
                 {"fpr", m.fpr},
                 {"fnr", m.fnr},
                 {"accuracy", m.accuracy}};
}

}  // namespace

// One validated configuration plus the lazily read checkpoint text. The
// mutex only guards the lazy load; everything else is read-only after
// construction, which is what makes contexts shareable across threads.
struct rs_ctx {
  rugscan::PipelineConfig cfg;
  std::mutex mu;
  std::string checkpoint_text;

  // Missing model configuration is a config error by contract: a scan
  // without a model is a deployment problem, not a data problem.
  const std::string& model_text() {
    std::lock_guard<std::mutex> lock(mu);
    if (!checkpoint_text.empty()) return checkpoint_text;
    if (cfg.checkpoint_path.empty())
      throw rugscan::config_error("no model checkpoint configured (set checkpoint_path)");
    std::ifstream in(cfg.checkpoint_path, std::ios::binary);
    if (!in)
      throw rugscan::config_error("cannot open model checkpoint " + cfg.checkpoint_path);
    checkpoint_text.assign(std::istreambuf_iterator<char>(in), {});
    return checkpoint_text;
  }
};

namespace {

// A target is either a bundle directory on disk or a token address that
// goes through the fetch cache.
rugscan::TokenBundle resolve_bundle(rs_ctx& ctx, const std::string& target, bool offline,
                                    rugscan::FetchStats* stats = nullptr) {
  if (std::filesystem::is_directory(target)) return rugscan::load_bundle(target);
  return rugscan::fetch_token(target, ctx.cfg.fetch, offline, stats);
}

std::vector<int> dataset_labels(const std::vector<rugscan::LabeledSample>& data) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& s : data) labels.push_back(s.label);
  return labels;
}

}  // namespace

extern "C" {

const char* rs_version(void) { return "0.1.0"; }

const char* rs_last_error(void) { return t_last_error.c_str(); }

void rs_string_free(char* s) { std::free(s); }

rs_status rs_default_config_json(char** out_json) {
  return guarded([&] {
    require_arg(out_json, "out_json");
    set_out(out_json, rugscan::config_json(rugscan::default_config()));
  });
}

rs_status rs_config_check(const char* config_json) {
  return guarded([&] {
    require_arg(config_json, "config_json");
    rugscan::parse_config_json(config_json, "config");
  });
}

rs_status rs_ctx_new(const char* config_json, rs_ctx** out_ctx) {
  return guarded([&] {
    require_arg(out_ctx, "out_ctx");
    auto ctx = std::make_unique<rs_ctx>();
    ctx->cfg = config_json == nullptr ? rugscan::default_config()
                                      : rugscan::parse_config_json(config_json, "config");
    *out_ctx = ctx.release();
  });
}

void rs_ctx_free(rs_ctx* ctx) { delete ctx; }

rs_status rs_fetch(rs_ctx* ctx, const char* address, int offline, char** out_stats_json) {
  return guarded([&] {
    require_arg(ctx, "ctx");
    require_arg(address, "address");
    rugscan::FetchStats stats;
    rugscan::TokenBundle b = rugscan::fetch_token(address, ctx->cfg.fetch, offline != 0, &stats);
    ordered j;
    j["address"] = b.token.address;
    j["bundle_dir"] = ctx->cfg.fetch.cache_dir + "/" + b.token.address;
    j["from_cache"] = stats.from_cache;
    j["requests"] = stats.requests;
    j["pages"] = stats.pages;
    j["duplicates"] = stats.duplicates;
    j["events"] = b.events.size();
    j["bytecode_bytes"] = b.token.bytecode.size();
    set_out(out_stats_json, j.dump(2) + "\n");
  });
}

rs_status rs_scan(rs_ctx* ctx, const char* target, int offline, char** out_json,
                  char** out_text) {
  return guarded([&] {
    require_arg(ctx, "ctx");
    require_arg(target, "target");
    // Model problems must surface before bundle problems: a missing model is
    // exit 2 regardless of what the target looks like.
    std::unique_ptr<rugscan::RugModel> model =
        rugscan::load_checkpoint_text(ctx->model_text(), ctx->cfg.checkpoint_path);
    rugscan::TokenBundle b = resolve_bundle(*ctx, target, offline != 0);
    rugscan::DetectionReport rep = rugscan::scan_bundle(b, *model, ctx->cfg);
    set_out(out_json, rugscan::report_json(rep));
    set_out(out_text, rugscan::report_text(rep));
  });
}

rs_status rs_graphs(rs_ctx* ctx, const char* target, int offline, char** out_json) {
  return guarded([&] {
    require_arg(ctx, "ctx");
    require_arg(target, "target");
    rugscan::TokenBundle b = resolve_bundle(*ctx, target, offline != 0);
    rugscan::AnalyzedToken a = rugscan::analyze_bundle(b, ctx->cfg);
    ordered j;
    j["address"] = b.token.address;
    j["window_transfers"] = a.window_transfers;
    j["srcg"] = ordered::parse(rugscan::srcg_json(a.srcg));
    j["tfbg"] = ordered::parse(rugscan::tfbg_json(a.tfbg));
    j["findings"] = ordered::parse(rugscan::findings_json(a.findings));
    j["warnings"] = a.warnings;
    set_out(out_json, j.dump(2) + "\n");
  });
}

rs_status rs_rules_check(rs_ctx* ctx, const char* target, char** out_json) {
  return guarded([&] {
    require_arg(ctx, "ctx");
    require_arg(target, "target");
    namespace fs = std::filesystem;
    rugscan::Bytes code;
    std::string label = target;
    if (fs::is_directory(target)) {
      rugscan::TokenBundle b = rugscan::load_bundle(target);
      code = b.token.bytecode;
      label = b.token.address;
    } else if (fs::is_regular_file(target)) {
      std::string hex = read_file(target, "bytecode file");
      hex.erase(std::remove_if(hex.begin(), hex.end(),
                               [](unsigned char c) { return std::isspace(c) != 0; }),
                hex.end());
      code = rugscan::parse_hex(hex);
    } else {
      throw rugscan::input_error(
          std::string("rules target must be a bundle directory or a hex bytecode file: ") +
          target);
    }
    std::vector<rugscan::RiskFinding> findings = rugscan::scan_code_risks(code);
    ordered j;
    j["target"] = label;
    j["count"] = findings.size();
    j["findings"] = ordered::parse(rugscan::findings_json(findings));
    set_out(out_json, j.dump(2) + "\n");
  });
}

rs_status rs_rules_selftest(char** out_json) {
  return guarded([&] {
    require_arg(out_json, "out_json");
    bool all_ok = true;
    ordered rows = ordered::array();
    for (int r = 0; r < 8; ++r) {
      auto risk = static_cast<rugscan::Risk>(r);
      std::vector<rugscan::RiskFinding> planted =
          rugscan::scan_code_risks(rugscan::risk_fixture(risk));
      std::vector<rugscan::RiskFinding> defused =
          rugscan::scan_code_risks(rugscan::risk_fixture(risk, true));
      bool planted_ok = planted.size() == 1 && planted[0].risk == risk;
      bool defused_ok = defused.empty();
      all_ok = all_ok && planted_ok && defused_ok;
      rows.push_back(ordered{{"risk", rugscan::risk_name(risk)},
                             {"planted_ok", planted_ok},
                             {"defused_ok", defused_ok}});
    }
    ordered j;
    j["pass"] = all_ok;
    j["fixtures"] = std::move(rows);
    set_out(out_json, j.dump(2) + "\n");
  });
}

rs_status rs_synth(const char* out_dir, unsigned long long seed, int rug_count,
                   int benign_count, char** out_json) {
  return guarded([&] {
    require_arg(out_dir, "out_dir");
    if (rug_count < 1 || benign_count < 1)
      throw rugscan::input_error("synth: rug and benign counts must be positive");
    rugscan::SynthSpec spec;
    spec.seed = seed;
    spec.rug_count = static_cast<size_t>(rug_count);
    spec.benign_count = static_cast<size_t>(benign_count);
    std::vector<rugscan::SynthToken> tokens = rugscan::make_benchmark(spec);
    rugscan::write_benchmark(out_dir, tokens);
    ordered j;
    j["dir"] = out_dir;
    j["manifest"] = std::string(out_dir) + "/manifest.jsonl";
    j["tokens"] = tokens.size();
    j["rug"] = rug_count;
    j["benign"] = benign_count;
    j["seed"] = seed;
    set_out(out_json, j.dump(2) + "\n");
  });
}

rs_status rs_train(rs_ctx* ctx, const char* manifest_path, const char* checkpoint_out,
                   unsigned long long seed, char** out_summary_json) {
  return guarded([&] {
    require_arg(ctx, "ctx");
    require_arg(manifest_path, "manifest_path");
    std::string out_path = checkpoint_out != nullptr && *checkpoint_out != '\0'
                               ? checkpoint_out
                               : ctx->cfg.checkpoint_path;
    if (out_path.empty())
      throw rugscan::config_error(
          "no checkpoint output path (pass one or set checkpoint_path)");

    std::vector<rugscan::LabeledSample> data = rugscan::load_dataset(manifest_path, ctx->cfg);
    std::vector<int> labels = dataset_labels(data);
    // The first stratified fold fixes the 20% validation set; its train and
    // test parts together are the 80% training split.
    rugscan::FoldSplit fold = rugscan::stratified_folds(labels, seed)[0];
    std::vector<size_t> train_idx;
    train_idx.reserve(fold.train.size() + fold.test.size());
    std::merge(fold.train.begin(), fold.train.end(), fold.test.begin(), fold.test.end(),
               std::back_inserter(train_idx));

    rugscan::TrainOptions opt = rugscan::train_options(ctx->cfg, rugscan::Variant::Full, seed);
    std::vector<rugscan::CompiledSample> compiled =
        rugscan::compile_dataset(data, rugscan::Variant::Full);
    rugscan::FoldResult res = rugscan::train_fold(compiled, labels, train_idx, fold.val, opt);

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw rugscan::input_error("cannot write checkpoint " + out_path);
    out << res.checkpoint;
    out.close();

    ordered j;
    j["samples"] = data.size();
    j["rug"] = std::count(labels.begin(), labels.end(), 1);
    j["benign"] = std::count(labels.begin(), labels.end(), 0);
    j["train_size"] = train_idx.size();
    j["val_size"] = fold.val.size();
    j["epochs"] = res.history.size();
    j["best_epoch"] = res.best_epoch;
    j["diverged"] = res.diverged;
    j["val"] = metrics_json(res.val);
    j["checkpoint"] = out_path;
    set_out(out_summary_json, j.dump(2) + "\n");
  });
}

rs_status rs_eval(rs_ctx* ctx, const char* manifest_path, char** out_metrics_json) {
  return guarded([&] {
    require_arg(ctx, "ctx");
    require_arg(manifest_path, "manifest_path");
    std::unique_ptr<rugscan::RugModel> model =
        rugscan::load_checkpoint_text(ctx->model_text(), ctx->cfg.checkpoint_path);
    std::vector<rugscan::LabeledSample> data = rugscan::load_dataset(manifest_path, ctx->cfg);
    std::vector<int> labels = dataset_labels(data);
    std::vector<rugscan::CompiledSample> compiled =
        rugscan::compile_dataset(data, rugscan::Variant::Full);
    std::vector<size_t> idx(data.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rugscan::Metrics m = rugscan::evaluate(*model, compiled, labels, idx,
                                           rugscan::Variant::Full, ctx->cfg.threshold);
    ordered j;
    j["samples"] = data.size();
    j["rug"] = std::count(labels.begin(), labels.end(), 1);
    j["benign"] = std::count(labels.begin(), labels.end(), 0);
    j["metrics"] = metrics_json(m);
    set_out(out_metrics_json, j.dump(2) + "\n");
  });
}

rs_status rs_ablation(rs_ctx* ctx, const char* manifest_path, unsigned long long seed,
                      char** out_json, char** out_table) {
  return guarded([&] {
    require_arg(ctx, "ctx");
    require_arg(manifest_path, "manifest_path");
    std::vector<rugscan::LabeledSample> data = rugscan::load_dataset(manifest_path, ctx->cfg);
    rugscan::TrainOptions opt = rugscan::train_options(ctx->cfg, rugscan::Variant::Full, seed);
    std::vector<rugscan::CvResult> results = rugscan::run_ablation(data, opt);
    set_out(out_json, rugscan::cv_report_json(results));
    set_out(out_table, rugscan::cv_report_table(results));
  });
}

rs_status rs_sweep(rs_ctx* ctx, const char* list_path, const char* out_dir, int workers,
                   int offline, char** out_summary_json) {
  return guarded([&] {
    require_arg(ctx, "ctx");
    require_arg(list_path, "list_path");
    require_arg(out_dir, "out_dir");
    namespace fs = std::filesystem;

    // Address list: one per line, blank lines and # comments skipped.
    std::istringstream in(read_file(list_path, "address list"));
    std::vector<std::string> addresses;
    std::string line;
    while (std::getline(in, line)) {
      size_t a = line.find_first_not_of(" \t\r");
      if (a == std::string::npos) continue;
      size_t b = line.find_last_not_of(" \t\r");
      line = line.substr(a, b - a + 1);
      if (line.empty() || line[0] == '#') continue;
      addresses.push_back(line);
    }
    if (addresses.empty()) throw rugscan::input_error("address list is empty");

    // Validate the model once up front; each worker builds its own instance
    // because forward passes keep per-model scratch state.
    const std::string model_text = ctx->model_text();
    rugscan::load_checkpoint_text(model_text, ctx->cfg.checkpoint_path);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
      throw rugscan::input_error(std::string("cannot create sweep output directory ") +
                                 out_dir + ": " + ec.message());

    // Repeat addresses would race on the same cache entry; only the first
    // occurrence runs.
    std::vector<bool> duplicate(addresses.size(), false);
    {
      std::vector<std::string> seen;
      for (size_t i = 0; i < addresses.size(); ++i) {
        std::string key = addresses[i];
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
          duplicate[i] = true;
        else
          seen.push_back(key);
      }
    }

    size_t n_workers = workers <= 0 ? 1 : static_cast<size_t>(workers);
    n_workers = std::min({n_workers, addresses.size(), static_cast<size_t>(32)});

    std::vector<ordered> rows(addresses.size());
    std::atomic<size_t> next{0};
    std::atomic<size_t> net_requests{0};
    std::mutex fail_mu;
    std::vector<std::string> worker_failures;

    auto worker = [&] {
      try {
        std::unique_ptr<rugscan::RugModel> model =
            rugscan::load_checkpoint_text(model_text, ctx->cfg.checkpoint_path);
        for (;;) {
          size_t i = next.fetch_add(1);
          if (i >= addresses.size()) break;
          ordered row;
          row["address"] = addresses[i];
          if (duplicate[i]) {
            row["status"] = "skipped";
            row["reason"] = "duplicate address";
            rows[i] = std::move(row);
            continue;
          }
          try {
            rugscan::FetchStats stats;
            rugscan::TokenBundle b =
                rugscan::fetch_token(addresses[i], ctx->cfg.fetch, offline != 0, &stats);
            net_requests.fetch_add(stats.requests);
            row["address"] = b.token.address;
            row["from_cache"] = stats.from_cache;
            if (!rugscan::looks_like_erc20(b.token.bytecode)) {
              row["status"] = "skipped";
              row["reason"] = "selector screen: not an ERC-20";
            } else {
              rugscan::DetectionReport rep = rugscan::scan_bundle(b, *model, ctx->cfg);
              std::string path = std::string(out_dir) + "/" + b.token.address + ".json";
              std::ofstream out(path, std::ios::binary);
              if (!out) throw rugscan::input_error("cannot write report " + path);
              out << rugscan::report_json(rep);
              row["status"] = "scanned";
              row["verdict"] = rep.rugpull ? "rugpull" : "benign";
              row["probability"] = rep.probability;
              row["report"] = path;
            }
          } catch (const rugscan::Error& e) {
            row["status"] = "failed";
            row["error"] = e.what();
            row["error_code"] = e.exit_code();
          } catch (const std::exception& e) {
            row["status"] = "failed";
            row["error"] = e.what();
            row["error_code"] = static_cast<int>(RS_ERR_INTERNAL);
          }
          rows[i] = std::move(row);
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(fail_mu);
        worker_failures.push_back(e.what());
      }
    };

    std::vector<std::thread> pool;
    for (size_t w = 0; w + 1 < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (!worker_failures.empty())
      throw rugscan::internal_error("sweep worker failed: " + worker_failures.front());

    size_t scanned = 0, rug = 0, benign = 0, skipped = 0, failed = 0;
    for (const ordered& row : rows) {
      std::string status = row.value("status", "failed");
      if (status == "scanned") {
        ++scanned;
        (row.value("verdict", "") == "rugpull" ? rug : benign) += 1;
      } else if (status == "skipped") {
        ++skipped;
      } else {
        ++failed;
      }
    }

    ordered summary;
    summary["addresses"] = addresses.size();
    summary["scanned"] = scanned;
    summary["rugpull"] = rug;
    summary["benign"] = benign;
    summary["skipped"] = skipped;
    summary["failed"] = failed;
    summary["network_requests"] = net_requests.load();
    summary["rows"] = rows;
    std::string text = summary.dump(2) + "\n";

    std::ofstream out(std::string(out_dir) + "/summary.json", std::ios::binary);
    if (!out)
      throw rugscan::input_error(std::string("cannot write ") + out_dir + "/summary.json");
    out << text;
    set_out(out_summary_json, text);
  });
}

}  // extern "C"
