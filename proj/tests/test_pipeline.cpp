// Config parsing, bundle analysis, scan reports, and the synthetic benchmark
// generator.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

#include "doctest.h"
#include "nlohmann/json.hpp"
#include "rugscan/common.hpp"
#include "rugscan/pipeline.hpp"
#include "rugscan/synth.hpp"

using namespace rugscan;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pipe_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.block_dim = 8;
  cfg.attn_heads = 2;
  cfg.encoder_layers = 1;
  cfg.max_block_len = 16;
  cfg.rgcn_layers = 1;
  cfg.tfbg_hidden = 4;
  cfg.uagnn_layers = 1;
  cfg.fusion_dim = 4;
  cfg.dropout = 0.0;
  return cfg;
}

double node_column_max(const TokenFlowBehaviorGraph& g, size_t col) {
  double best = 0.0;
  for (const auto& row : g.node_features) best = std::max(best, row[col]);
  return best;
}

}  // namespace

TEST_CASE("config round trip and validation") {
  PipelineConfig def = default_config();
  std::string text = config_json(def);
  PipelineConfig back = parse_config_json(text, "test");
  CHECK(config_json(back) == text);
  CHECK(back.window_transfers == 500);
  CHECK(back.tfbg.short_window == 3600);
  CHECK(back.model.block_dim == 36);
  CHECK(back.threshold == 0.5);

  SUBCASE("partial files keep defaults") {
    PipelineConfig cfg = parse_config_json(R"({"model": {"block_dim": 12, "attn_heads": 3}})",
                                           "test");
    CHECK(cfg.model.block_dim == 12);
    CHECK(cfg.model.attn_heads == 3);
    CHECK(cfg.model.encoder_layers == def.model.encoder_layers);
    CHECK(cfg.window_transfers == 500);
  }
  SUBCASE("unknown keys are typos, not extensions") {
    try {
      parse_config_json(R"({"model": {"blockdim": 12}})", "test");
      FAIL_CHECK("expected rejection");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
      CHECK(std::string(e.what()).find("blockdim") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_json(R"({"scann": {}})", "test"), Error);
  }
  SUBCASE("range checks") {
    CHECK_THROWS_AS(parse_config_json(R"({"model": {"block_dim": 10, "attn_heads": 4}})",
                                      "test"),
                    Error);
    CHECK_THROWS_AS(parse_config_json(R"({"scan": {"threshold": 1.5}})", "test"), Error);
    CHECK_THROWS_AS(parse_config_json(R"({"model": {"dropout": 1.0}})", "test"), Error);
    CHECK_THROWS_AS(parse_config_json(R"({"window": {"max_transfers": 0}})", "test"), Error);
    CHECK_THROWS_AS(parse_config_json("[1,2]", "test"), Error);
  }
  SUBCASE("missing file is a config error") {
    try {
      load_config("/nonexistent/rugscan.json");
      FAIL_CHECK("expected failure");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
    }
  }
  SUBCASE("wrong scalar type names the key") {
    try {
      parse_config_json(R"({"train": {"lr": "fast"}})", "test");
      FAIL_CHECK("expected rejection");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("lr") != std::string::npos);
    }
  }
}

TEST_CASE("benchmark generator output") {
  SynthSpec spec;
  spec.seed = 5;
  spec.rug_count = 12;
  spec.benign_count = 9;
  auto tokens = make_benchmark(spec);
  REQUIRE(tokens.size() == 21);

  size_t both = 0, code_only = 0, tx_only = 0;
  for (size_t i = 0; i < 12; ++i) {
    CHECK(tokens[i].label == 1);
    switch (tokens[i].signal) {
      case SynthSignal::Both: ++both; break;
      case SynthSignal::CodeOnly: ++code_only; break;
      case SynthSignal::TxOnly: ++tx_only; break;
      default: FAIL_CHECK("rug token without signal");
    }
  }
  CHECK(both == 4);
  CHECK(code_only == 4);
  CHECK(tx_only == 4);
  for (size_t i = 12; i < 21; ++i) {
    CHECK(tokens[i].label == 0);
    CHECK(tokens[i].signal == SynthSignal::None);
  }

  SUBCASE("deterministic under the seed") {
    auto again = make_benchmark(spec);
    for (size_t i = 0; i < tokens.size(); ++i) {
      CHECK(again[i].bundle.token.address == tokens[i].bundle.token.address);
      REQUIRE(again[i].bundle.events.size() == tokens[i].bundle.events.size());
      CHECK(again[i].bundle.events.back().tx_hash == tokens[i].bundle.events.back().tx_hash);
      CHECK(again[i].bundle.token.bytecode == tokens[i].bundle.token.bytecode);
    }
  }

  SUBCASE("code signal tracks the planted mode") {
    for (const auto& tok : tokens) {
      bool planted = tok.signal == SynthSignal::Both || tok.signal == SynthSignal::CodeOnly;
      auto findings = scan_code_risks(tok.bundle.token.bytecode);
      if (planted) {
        CHECK(findings.size() >= 1);
      } else {
        // Benign pool mixes vanilla tokens and defused twins; both must stay
        // silent or the code branch leaks labels into tx-only rugs.
        CHECK(findings.empty());
      }
    }
  }

  SUBCASE("manipulated traces burst harder than organic ones") {
    PipelineConfig cfg = default_config();
    // st_max_out_count is node column 13; wash rings push it far above the
    // organic baseline inside one window span.
    double organic_max = 0.0, wash_min = 1e300;
    size_t organic_seen = 0, wash_seen = 0;
    for (const auto& tok : tokens) {
      bool manipulated =
          tok.signal == SynthSignal::Both || tok.signal == SynthSignal::TxOnly;
      if (!manipulated && organic_seen >= 4 && wash_seen >= 4) break;
      AnalyzedToken at = analyze_bundle(tok.bundle, cfg);
      double burst = node_column_max(at.tfbg, 13);
      if (manipulated && wash_seen < 4) {
        wash_min = std::min(wash_min, burst);
        ++wash_seen;
      } else if (!manipulated && organic_seen < 4) {
        organic_max = std::max(organic_max, burst);
        ++organic_seen;
      }
    }
    REQUIRE(wash_seen == 4);
    REQUIRE(organic_seen == 4);
    CHECK(wash_min > organic_max);
  }

  SUBCASE("bundles survive the disk round trip") {
    TempDir dir;
    write_benchmark(dir.path.string(), {tokens[0], tokens[12]});
    auto entries = load_manifest(dir.file("manifest.jsonl"));
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].id == tokens[0].id);
    CHECK(entries[0].label == 1);
    CHECK(entries[1].label == 0);

    PipelineConfig cfg = default_config();
    auto data = load_dataset(dir.file("manifest.jsonl"), cfg);
    REQUIRE(data.size() == 2);
    CHECK(data[0].label == 1);
    CHECK(data[0].srcg.node_count() > 0);
    CHECK(data[0].tfbg.edge_count() > 0);

    std::ifstream sig(dir.file("signals.json"));
    REQUIRE(sig.good());
    auto sj = nlohmann::json::parse(sig);
    CHECK(sj[tokens[0].id] == "both");
  }
}

TEST_CASE("bundle analysis surfaces warnings") {
  SynthSpec spec;
  spec.seed = 8;
  spec.rug_count = 1;
  spec.benign_count = 1;
  auto tokens = make_benchmark(spec);
  PipelineConfig cfg = default_config();

  SUBCASE("healthy bundle: no degenerate warnings") {
    AnalyzedToken at = analyze_bundle(tokens[1].bundle, cfg);
    CHECK(at.window_transfers > 2);
    CHECK(at.srcg.node_count() > 0);
    CHECK(at.tfbg.node_count() >= 3);
    for (const auto& w : at.warnings) CHECK(w.find("degenerate") == std::string::npos);
  }
  SUBCASE("single transfer draws the degenerate warning") {
    TokenBundle b = tokens[1].bundle;
    // keep only the mint
    b.events.resize(1);
    AnalyzedToken at = analyze_bundle(b, cfg);
    CHECK(at.window_transfers == 1);
    bool warned = false;
    for (const auto& w : at.warnings) warned |= w.find("degenerate") != std::string::npos;
    CHECK(warned);
  }
  SUBCASE("approval-free windows are flagged") {
    TokenBundle b = tokens[1].bundle;
    std::vector<TransferEvent> kept;
    for (const auto& e : b.events)
      if (e.kind == EventKind::Transfer) kept.push_back(e);
    b.events = kept;
    AnalyzedToken at = analyze_bundle(b, cfg);
    bool warned = false;
    for (const auto& w : at.warnings) warned |= w.find("approval") != std::string::npos;
    CHECK(warned);
  }
  SUBCASE("empty bytecode is refused") {
    TokenBundle b = tokens[1].bundle;
    b.token.bytecode.clear();
    try {
      analyze_bundle(b, cfg);
      FAIL_CHECK("expected input error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Input);
    }
  }
  SUBCASE("no transfers at all is refused with the canonical message") {
    TokenBundle b = tokens[1].bundle;
    std::vector<TransferEvent> approvals_only;
    for (const auto& e : b.events)
      if (e.kind == EventKind::Approval) approvals_only.push_back(e);
    b.events = approvals_only;
    try {
      analyze_bundle(b, cfg);
      FAIL_CHECK("expected input error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Input);
      CHECK(std::string(e.what()).find("no transactions") != std::string::npos);
    }
  }
}

TEST_CASE("scan reports") {
  SynthSpec spec;
  spec.seed = 13;
  spec.rug_count = 1;
  spec.benign_count = 1;
  auto tokens = make_benchmark(spec);

  PipelineConfig cfg = default_config();
  cfg.model = tiny_model();
  RugModel model(cfg.model);
  model.init_params(3);

  DetectionReport rep = scan_bundle(tokens[0].bundle, model, cfg);
  CHECK(rep.address == tokens[0].bundle.token.address);
  CHECK(rep.probability >= 0.0);
  CHECK(rep.probability <= 1.0);
  CHECK(rep.w_code + rep.w_tx == doctest::Approx(1.0));
  CHECK(rep.rugpull == (rep.probability >= cfg.threshold));
  CHECK(rep.code_blocks > 0);
  CHECK(rep.tx_nodes > 0);
  CHECK(rep.timings.lift_ms >= 0.0);
  CHECK(rep.timings.total_ms >= rep.timings.inference_ms);

  SUBCASE("json is byte-stable and carries no clock noise") {
    DetectionReport again = scan_bundle(tokens[0].bundle, model, cfg);
    CHECK(report_json(rep) == report_json(again));

    auto j = nlohmann::json::parse(report_json(rep));
    CHECK(j["address"] == rep.address);
    CHECK((j["verdict"] == "rugpull" || j["verdict"] == "benign"));
    CHECK(j["weights"]["code"].is_number());
    CHECK(j["graph"]["code_blocks"] == rep.code_blocks);
    CHECK(!j.contains("timings"));
    CHECK(j["findings"].is_array());
    // planted risk must be visible in the findings list
    CHECK(j["findings"].size() >= 1);
  }
  SUBCASE("text summary shows the timing table") {
    std::string text = report_text(rep);
    CHECK(text.find("verdict") != std::string::npos);
    CHECK(text.find("timing") != std::string::npos);
    CHECK(text.find("code blocks") != std::string::npos);
  }
}

TEST_CASE("graph dumps parse and carry the expected shapes") {
  SynthSpec spec;
  spec.seed = 17;
  spec.rug_count = 1;
  spec.benign_count = 0;
  auto tokens = make_benchmark(spec);
  PipelineConfig cfg = default_config();
  AnalyzedToken at = analyze_bundle(tokens[0].bundle, cfg);

  auto scg = nlohmann::json::parse(scg_json(at.scg));
  CHECK(scg["blocks"].size() == at.scg.blocks.size());
  CHECK(scg["cf_edges"].is_array());

  auto srcg = nlohmann::json::parse(srcg_json(at.srcg));
  CHECK(srcg["nodes"].size() == at.srcg.node_count());
  bool some_critical = false;
  for (const auto& n : srcg["nodes"]) some_critical |= n["type"] == "critical";
  CHECK(some_critical);

  auto tfbg = nlohmann::json::parse(tfbg_json(at.tfbg));
  CHECK(tfbg["nodes"].size() == at.tfbg.node_count());
  CHECK(tfbg["edges"].size() == at.tfbg.edge_count());
  CHECK(tfbg["node_feature_names"].size() == 14);
  CHECK(tfbg["edges"][0]["features"].size() == 14);
  CHECK(tfbg["edges"][0]["value"].is_string());
}

TEST_CASE("manifest parsing") {
  TempDir dir;
  SUBCASE("labels accept both spellings") {
    std::ofstream out(dir.file("m.jsonl"));
    out << R"({"id": "a", "label": 1, "bundle_path": "bundles/a"})" << "\n";
    out << "\n";  // blank lines are fine
    out << R"({"id": "b", "label": "benign", "bundle_path": "bundles/b"})" << "\n";
    out << R"({"id": "c", "label": "rugpull", "bundle_path": "/abs/c"})" << "\n";
    out.close();
    auto entries = load_manifest(dir.file("m.jsonl"));
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].label == 1);
    CHECK(entries[1].label == 0);
    CHECK(entries[2].label == 1);
    CHECK(entries[2].bundle_path == "/abs/c");
  }
  SUBCASE("diagnostics carry the line number") {
    std::ofstream out(dir.file("bad.jsonl"));
    out << R"({"id": "a", "label": 0, "bundle_path": "x"})" << "\n";
    out << R"({"id": "b", "label": 7, "bundle_path": "y"})" << "\n";
    out.close();
    try {
      load_manifest(dir.file("bad.jsonl"));
      FAIL_CHECK("expected rejection");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Input);
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("missing fields and empty files") {
    std::ofstream(dir.file("empty.jsonl")) << "\n\n";
    CHECK_THROWS_AS(load_manifest(dir.file("empty.jsonl")), Error);
    std::ofstream(dir.file("nofield.jsonl")) << R"({"id": "a", "label": 0})" << "\n";
    CHECK_THROWS_AS(load_manifest(dir.file("nofield.jsonl")), Error);
    CHECK_THROWS_AS(load_manifest(dir.file("does_not_exist.jsonl")), Error);
  }
}
