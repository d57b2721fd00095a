#include "rugscan/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace rugscan {

using ojson = nlohmann::ordered_json;

std::string checkpoint_text(const RugModel& model) {
  const ModelConfig& cfg = model.config();
  ojson j;
  j["format_version"] = kCheckpointVersion;
  ojson hp;
  hp["block_dim"] = cfg.block_dim;
  hp["attn_heads"] = cfg.attn_heads;
  hp["encoder_layers"] = cfg.encoder_layers;
  hp["max_block_len"] = cfg.max_block_len;
  hp["rgcn_layers"] = cfg.rgcn_layers;
  hp["tfbg_hidden"] = cfg.tfbg_hidden;
  hp["uagnn_layers"] = cfg.uagnn_layers;
  hp["fusion_dim"] = cfg.fusion_dim;
  hp["dropout"] = cfg.dropout;
  j["hyperparams"] = std::move(hp);
  ojson params = ojson::object();
  for (const Param* p : model.params()) {
    ojson entry;
    entry["shape"] = {p->value.rows, p->value.cols};
    entry["data"] = p->value.v;
    params[p->name] = std::move(entry);
  }
  j["params"] = std::move(params);
  return j.dump(2) + "\n";
}

void save_checkpoint(const std::string& path, const RugModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write checkpoint " + path);
  out << checkpoint_text(model);
  if (!out) throw internal_error("short write on checkpoint " + path);
}

namespace {

const ojson& need(const ojson& j, const char* field, const std::string& what) {
  auto it = j.find(field);
  if (it == j.end()) throw input_error(what + ": missing field '" + field + "'");
  return *it;
}

size_t need_size(const ojson& j, const char* field, const std::string& what) {
  const ojson& v = need(j, field, what);
  if (!v.is_number_unsigned()) throw input_error(what + ": field '" + field + "' must be a size");
  return v.get<size_t>();
}

}  // namespace

std::unique_ptr<RugModel> load_checkpoint_text(const std::string& text, const std::string& what) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::exception& e) {
    throw input_error(what + ": " + e.what());
  }
  int version = need(j, "format_version", what).is_number_integer()
                    ? need(j, "format_version", what).get<int>()
                    : -1;
  if (version != kCheckpointVersion)
    throw input_error(what + ": unsupported format_version " + std::to_string(version));

  const ojson& hp = need(j, "hyperparams", what);
  ModelConfig cfg;
  cfg.block_dim = need_size(hp, "block_dim", what);
  cfg.attn_heads = need_size(hp, "attn_heads", what);
  cfg.encoder_layers = need_size(hp, "encoder_layers", what);
  cfg.max_block_len = need_size(hp, "max_block_len", what);
  cfg.rgcn_layers = need_size(hp, "rgcn_layers", what);
  cfg.tfbg_hidden = need_size(hp, "tfbg_hidden", what);
  cfg.uagnn_layers = need_size(hp, "uagnn_layers", what);
  cfg.fusion_dim = need_size(hp, "fusion_dim", what);
  const ojson& drop = need(hp, "dropout", what);
  if (!drop.is_number()) throw input_error(what + ": field 'dropout' must be a number");
  cfg.dropout = drop.get<double>();

  auto model = std::make_unique<RugModel>(cfg);
  const ojson& params = need(j, "params", what);
  if (!params.is_object()) throw input_error(what + ": 'params' must be an object");
  size_t used = 0;
  for (Param* p : model->params()) {
    auto it = params.find(p->name);
    if (it == params.end()) throw input_error(what + ": missing parameter '" + p->name + "'");
    const ojson& entry = *it;
    const ojson& shape = need(entry, "shape", what + ": " + p->name);
    if (!shape.is_array() || shape.size() != 2 || shape[0].get<size_t>() != p->value.rows ||
        shape[1].get<size_t>() != p->value.cols)
      throw input_error(what + ": parameter '" + p->name + "' has the wrong shape");
    const ojson& data = need(entry, "data", what + ": " + p->name);
    if (!data.is_array() || data.size() != p->value.size())
      throw input_error(what + ": parameter '" + p->name + "' has the wrong length");
    for (size_t i = 0; i < p->value.size(); ++i) {
      if (!data[i].is_number())
        throw input_error(what + ": parameter '" + p->name + "' has a non-numeric entry");
      double v = data[i].get<double>();
      if (!std::isfinite(v))
        throw input_error(what + ": parameter '" + p->name + "' has a non-finite entry");
      p->value.v[i] = v;
    }
    p->zero_grad();
    ++used;
  }
  if (params.size() != used)
    throw input_error(what + ": checkpoint carries unknown parameters");
  return model;
}

std::unique_ptr<RugModel> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open checkpoint " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_checkpoint_text(text, path);
}

}  // namespace rugscan
