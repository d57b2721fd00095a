// Guards the files we ship next to the code: the report schema must accept
// what scan_bundle actually writes (and reject mutants, or the check is
// vacuous), and the example configs must stay loadable.
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "rugscan/config.hpp"
#include "rugscan/models.hpp"
#include "rugscan/pipeline.hpp"
#include "rugscan/synth.hpp"

using namespace rugscan;
using nlohmann::json;

namespace {

std::string source_file(const std::string& rel) {
  return std::string(RUGSCAN_SOURCE_DIR) + "/" + rel;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "cannot open " << path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Minimal JSON-Schema subset validator: type / required / properties /
// additionalProperties:false / items / enum / minimum / maximum / minItems /
// maxItems. That is everything report.schema.json uses; a full draft-07
// engine would be a dependency for no added coverage.
void validate(const json& schema, const json& inst, const std::string& path,
              std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    const std::string& t = schema["type"].get_ref<const std::string&>();
    bool ok = (t == "object" && inst.is_object()) || (t == "array" && inst.is_array()) ||
              (t == "string" && inst.is_string()) || (t == "number" && inst.is_number()) ||
              (t == "integer" && inst.is_number_integer());
    if (!ok) {
      errors.push_back(path + ": expected " + t);
      return;  // wrong shape; deeper checks would just cascade
    }
  }
  if (schema.contains("enum")) {
    bool hit = false;
    for (const auto& v : schema["enum"])
      if (v == inst) hit = true;
    if (!hit) errors.push_back(path + ": value not in enum");
  }
  if (inst.is_number()) {
    double v = inst.get<double>();
    if (schema.contains("minimum") && v < schema["minimum"].get<double>())
      errors.push_back(path + ": below minimum");
    if (schema.contains("maximum") && v > schema["maximum"].get<double>())
      errors.push_back(path + ": above maximum");
  }
  if (inst.is_object()) {
    if (schema.contains("required"))
      for (const auto& name : schema["required"])
        if (!inst.contains(name.get_ref<const std::string&>()))
          errors.push_back(path + ": missing required key " + name.get<std::string>());
    const json props = schema.value("properties", json::object());
    bool closed = schema.contains("additionalProperties") &&
                  schema["additionalProperties"].is_boolean() &&
                  !schema["additionalProperties"].get<bool>();
    for (const auto& [key, value] : inst.items()) {
      if (props.contains(key))
        validate(props[key], value, path + "." + key, errors);
      else if (closed)
        errors.push_back(path + ": unexpected key " + key);
    }
  }
  if (inst.is_array()) {
    if (schema.contains("minItems") && inst.size() < schema["minItems"].get<size_t>())
      errors.push_back(path + ": too few items");
    if (schema.contains("maxItems") && inst.size() > schema["maxItems"].get<size_t>())
      errors.push_back(path + ": too many items");
    if (schema.contains("items")) {
      size_t i = 0;
      for (const auto& el : inst) validate(schema["items"], el, path + "[" + std::to_string(i++) + "]", errors);
    }
  }
}

std::vector<std::string> check_report(const json& schema, const json& report) {
  std::vector<std::string> errors;
  validate(schema, report, "$", errors);
  return errors;
}

}  // namespace

TEST_CASE("scan reports validate against the shipped schema") {
  json schema = json::parse(slurp(source_file("schemas/report.schema.json")));

  PipelineConfig cfg = default_config();
  cfg.model.block_dim = 8;
  cfg.model.attn_heads = 2;
  cfg.model.encoder_layers = 1;
  cfg.model.max_block_len = 16;
  cfg.model.rgcn_layers = 1;
  cfg.model.tfbg_hidden = 4;
  cfg.model.uagnn_layers = 1;
  cfg.model.fusion_dim = 4;
  cfg.model.dropout = 0.0;
  RugModel model(cfg.model);
  model.init_params(5);

  SynthSpec spec;
  spec.seed = 5;
  spec.rug_count = 2;
  spec.benign_count = 2;
  auto tokens = make_benchmark(spec);
  for (const auto& tok : tokens) {
    DetectionReport rep = scan_bundle(tok.bundle, model, cfg);
    json doc = json::parse(report_json(rep));
    auto errors = check_report(schema, doc);
    CAPTURE(tok.id);
    for (const auto& e : errors) FAIL_CHECK(e);
    CHECK(errors.empty());
  }

  SUBCASE("the validator rejects broken documents") {
    DetectionReport rep = scan_bundle(tokens[0].bundle, model, cfg);
    json good = json::parse(report_json(rep));

    json missing = good;
    missing.erase("verdict");
    CHECK_FALSE(check_report(schema, missing).empty());

    json bad_enum = good;
    bad_enum["verdict"] = "maybe";
    CHECK_FALSE(check_report(schema, bad_enum).empty());

    json extra = good;
    extra["timing_ms"] = 12.5;  // timings are text-rendering-only by design
    CHECK_FALSE(check_report(schema, extra).empty());

    json range = good;
    range["probability"] = 1.5;
    CHECK_FALSE(check_report(schema, range).empty());

    json bad_flow = good;
    bad_flow["findings"] = json::array(
        {{{"risk", "AR"},
          {"category", "SaleRestrict"},
          {"critical_blocks", json::array({1})},
          {"critical_flows", json::array({json::array({1})})},  // pair cut short
          {"witness", "x"}}});
    CHECK_FALSE(check_report(schema, bad_flow).empty());
  }
}

TEST_CASE("shipped config files load") {
  for (const char* rel : {"configs/default.json", "configs/benchmark.json"}) {
    CAPTURE(rel);
    PipelineConfig cfg = parse_config_json(slurp(source_file(rel)), rel);
    // Round trip through the serializer must be loss-free.
    PipelineConfig again = parse_config_json(config_json(cfg), "round trip");
    CHECK(config_json(again) == config_json(cfg));
  }
}

TEST_CASE("default config file matches the built-in defaults") {
  // configs/default.json is generated from config_json(default_config());
  // regenerate it if this ever goes red.
  CHECK(slurp(source_file("configs/default.json")) == config_json(default_config()));
}
