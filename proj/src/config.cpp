#include "rugscan/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "nlohmann/json.hpp"
#include "rugscan/common.hpp"

namespace rugscan {

namespace {

using ordered = nlohmann::ordered_json;

// Pulls a typed scalar out of `obj[key]`, keeping the default when the key is
// absent. Tracks consumed keys so the caller can flag leftovers.
template <typename T>
void take(const ordered& obj, std::set<std::string>& used, const std::string& key, T& out,
          const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  used.insert(key);
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error(where + "." + key + " has the wrong type");
  }
}

void reject_unknown(const ordered& obj, const std::set<std::string>& used,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!used.count(it.key()))
      throw config_error(where + ": unknown key '" + it.key() + "'");
  }
}

const ordered* section(const ordered& root, std::set<std::string>& used, const std::string& key) {
  auto it = root.find(key);
  if (it == root.end()) return nullptr;
  if (!it->is_object()) throw config_error("config." + key + " must be an object");
  used.insert(key);
  return &*it;
}

void validate(const PipelineConfig& cfg) {
  if (cfg.window_transfers == 0) throw config_error("window.max_transfers must be positive");
  if (cfg.tfbg.short_window <= 0) throw config_error("window.burst_seconds must be positive");
  if (cfg.model.block_dim == 0 || cfg.model.attn_heads == 0)
    throw config_error("model dimensions must be positive");
  if (cfg.model.block_dim % cfg.model.attn_heads != 0)
    throw config_error("model.block_dim must be divisible by model.attn_heads");
  if (cfg.model.encoder_layers == 0 || cfg.model.rgcn_layers == 0 ||
      cfg.model.uagnn_layers == 0 || cfg.model.tfbg_hidden == 0 || cfg.model.fusion_dim == 0 ||
      cfg.model.max_block_len == 0)
    throw config_error("model layer sizes must be positive");
  if (!(cfg.model.dropout >= 0.0 && cfg.model.dropout < 1.0))
    throw config_error("model.dropout must lie in [0, 1)");
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0))
    throw config_error("scan.threshold must lie in [0, 1]");
  if (!(cfg.train_lr > 0.0) || !std::isfinite(cfg.train_lr))
    throw config_error("train.lr must be positive");
  if (cfg.train_threads == 0) throw config_error("train.threads must be positive");
  if (!(cfg.tfbg.centrality.katz_alpha > 0.0))
    throw config_error("centrality.katz_alpha must be positive");
  if (cfg.fetch.max_attempts <= 0) throw config_error("fetch.max_attempts must be positive");
  if (cfg.fetch.page_size <= 0) throw config_error("fetch.page_size must be positive");
  if (cfg.fetch.timeout_seconds <= 0) throw config_error("fetch.timeout_seconds must be positive");
  if (cfg.fetch.max_pages <= 0) throw config_error("fetch.max_pages must be positive");
  if (cfg.fetch.throttle_ms < 0) throw config_error("fetch.throttle_ms must not be negative");
}

}  // namespace

PipelineConfig default_config() { return PipelineConfig{}; }

PipelineConfig parse_config_json(const std::string& text, const std::string& what) {
  ordered root;
  try {
    root = ordered::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(what + ": " + e.what());
  }
  if (!root.is_object()) throw config_error(what + ": top level must be an object");

  PipelineConfig cfg;
  std::set<std::string> used;

  if (const ordered* w = section(root, used, "window")) {
    std::set<std::string> u;
    take(*w, u, "max_transfers", cfg.window_transfers, "window");
    take(*w, u, "burst_seconds", cfg.tfbg.short_window, "window");
    reject_unknown(*w, u, "window");
  }
  if (const ordered* c = section(root, used, "centrality")) {
    std::set<std::string> u;
    auto& p = cfg.tfbg.centrality;
    take(*c, u, "katz_alpha", p.katz_alpha, "centrality");
    take(*c, u, "katz_beta", p.katz_beta, "centrality");
    take(*c, u, "katz_tol", p.katz_tol, "centrality");
    take(*c, u, "katz_max_iter", p.katz_max_iter, "centrality");
    take(*c, u, "eigen_tol", p.eigen_tol, "centrality");
    take(*c, u, "eigen_max_iter", p.eigen_max_iter, "centrality");
    reject_unknown(*c, u, "centrality");
  }
  if (const ordered* m = section(root, used, "model")) {
    std::set<std::string> u;
    take(*m, u, "block_dim", cfg.model.block_dim, "model");
    take(*m, u, "attn_heads", cfg.model.attn_heads, "model");
    take(*m, u, "encoder_layers", cfg.model.encoder_layers, "model");
    take(*m, u, "max_block_len", cfg.model.max_block_len, "model");
    take(*m, u, "rgcn_layers", cfg.model.rgcn_layers, "model");
    take(*m, u, "tfbg_hidden", cfg.model.tfbg_hidden, "model");
    take(*m, u, "uagnn_layers", cfg.model.uagnn_layers, "model");
    take(*m, u, "fusion_dim", cfg.model.fusion_dim, "model");
    take(*m, u, "dropout", cfg.model.dropout, "model");
    reject_unknown(*m, u, "model");
  }
  if (const ordered* s = section(root, used, "scan")) {
    std::set<std::string> u;
    take(*s, u, "threshold", cfg.threshold, "scan");
    take(*s, u, "checkpoint", cfg.checkpoint_path, "scan");
    reject_unknown(*s, u, "scan");
  }
  if (const ordered* t = section(root, used, "train")) {
    std::set<std::string> u;
    take(*t, u, "lr", cfg.train_lr, "train");
    take(*t, u, "max_epochs", cfg.train_max_epochs, "train");
    take(*t, u, "patience", cfg.train_patience, "train");
    take(*t, u, "threads", cfg.train_threads, "train");
    reject_unknown(*t, u, "train");
  }
  if (const ordered* f = section(root, used, "fetch")) {
    std::set<std::string> u;
    take(*f, u, "rpc_url", cfg.fetch.rpc_url, "fetch");
    take(*f, u, "explorer_url", cfg.fetch.explorer_url, "fetch");
    take(*f, u, "cache_dir", cfg.fetch.cache_dir, "fetch");
    take(*f, u, "api_key_env", cfg.fetch.api_key_env, "fetch");
    take(*f, u, "timeout_seconds", cfg.fetch.timeout_seconds, "fetch");
    take(*f, u, "page_size", cfg.fetch.page_size, "fetch");
    take(*f, u, "max_attempts", cfg.fetch.max_attempts, "fetch");
    take(*f, u, "max_pages", cfg.fetch.max_pages, "fetch");
    take(*f, u, "throttle_ms", cfg.fetch.throttle_ms, "fetch");
    reject_unknown(*f, u, "fetch");
  }
  reject_unknown(root, used, "config");

  validate(cfg);
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str(), path);
}

std::string config_json(const PipelineConfig& cfg) {
  ordered root;
  root["window"] = {{"max_transfers", cfg.window_transfers},
                    {"burst_seconds", cfg.tfbg.short_window}};
  const auto& p = cfg.tfbg.centrality;
  root["centrality"] = {{"katz_alpha", p.katz_alpha},     {"katz_beta", p.katz_beta},
                        {"katz_tol", p.katz_tol},         {"katz_max_iter", p.katz_max_iter},
                        {"eigen_tol", p.eigen_tol},       {"eigen_max_iter", p.eigen_max_iter}};
  root["model"] = {{"block_dim", cfg.model.block_dim},
                   {"attn_heads", cfg.model.attn_heads},
                   {"encoder_layers", cfg.model.encoder_layers},
                   {"max_block_len", cfg.model.max_block_len},
                   {"rgcn_layers", cfg.model.rgcn_layers},
                   {"tfbg_hidden", cfg.model.tfbg_hidden},
                   {"uagnn_layers", cfg.model.uagnn_layers},
                   {"fusion_dim", cfg.model.fusion_dim},
                   {"dropout", cfg.model.dropout}};
  root["scan"] = {{"threshold", cfg.threshold}, {"checkpoint", cfg.checkpoint_path}};
  root["train"] = {{"lr", cfg.train_lr},
                   {"max_epochs", cfg.train_max_epochs},
                   {"patience", cfg.train_patience},
                   {"threads", cfg.train_threads}};
  root["fetch"] = {{"rpc_url", cfg.fetch.rpc_url},
                   {"explorer_url", cfg.fetch.explorer_url},
                   {"cache_dir", cfg.fetch.cache_dir},
                   {"api_key_env", cfg.fetch.api_key_env},
                   {"timeout_seconds", cfg.fetch.timeout_seconds},
                   {"page_size", cfg.fetch.page_size},
                   {"max_attempts", cfg.fetch.max_attempts},
                   {"max_pages", cfg.fetch.max_pages},
                   {"throttle_ms", cfg.fetch.throttle_ms}};
  return root.dump(2) + "\n";
}

TrainOptions train_options(const PipelineConfig& cfg, Variant variant, uint64_t seed) {
  TrainOptions opt;
  opt.model = cfg.model;
  opt.variant = variant;
  opt.lr = cfg.train_lr;
  opt.max_epochs = cfg.train_max_epochs;
  opt.patience = cfg.train_patience;
  opt.threshold = cfg.threshold;
  opt.seed = seed;
  opt.threads = cfg.train_threads;
  return opt;
}

}  // namespace rugscan
