#include "rugscan/tfbg.hpp"

#include <algorithm>
#include <cmath>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace rugscan {

namespace {

using bigfloat = boost::multiprecision::cpp_bin_float_50;

double ln1p_count(int64_t count) { return std::log1p(static_cast<double>(count)); }

// Per-node event timeline: (t, value) ascending.
using Timeline = std::vector<std::pair<int64_t, bigint>>;

bigint timeline_sum(const Timeline& tl) {
  bigint s = 0;
  for (const auto& [t, v] : tl) s += v;
  return s;
}

// Prefix of a timeline strictly before t.
Timeline before(const Timeline& tl, int64_t t) {
  Timeline out;
  for (const auto& [et, v] : tl) {
    if (et >= t) break;
    out.emplace_back(et, v);
  }
  return out;
}

}  // namespace

ShortTermMaxima short_term_maxima(const std::vector<std::pair<int64_t, bigint>>& events,
                                  int64_t window) {
  ShortTermMaxima m;
  size_t n = events.size();
  // Every candidate window starts at an event time and spans [t_i, t_i + W]
  // inclusive. Event lists are capped by the selection window, so the direct
  // scan stays cheap.
  for (size_t i = 0; i < n; ++i) {
    bigint sum = 0;
    int64_t cnt = 0;
    for (size_t j = i; j < n && events[j].first <= events[i].first + window; ++j) {
      sum += events[j].second;
      ++cnt;
    }
    if (sum > m.max_amount) m.max_amount = sum;
    if (cnt > m.max_count) m.max_count = cnt;
  }
  return m;
}

const std::vector<std::string>& node_feature_names() {
  static const std::vector<std::string> names = {
      "degree_centrality",     "indegree_centrality",    "outdegree_centrality",
      "betweenness",           "closeness",              "eigenvector",
      "katz",                  "clustering",             "if_token_creator",
      "fund_in_out_ratio",     "st_max_in_amount",       "st_max_in_count",
      "st_max_out_amount",     "st_max_out_count"};
  return names;
}

const std::vector<std::string>& edge_feature_names() {
  static const std::vector<std::string> names = {
      "creation_interval", "latest_interval",   "if_approve",       "gas_limit",
      "transfer_value",    "harmonic_value",    "cum_in_amount",    "cum_in_count",
      "cum_out_amount",    "cum_out_count",     "st_max_in_amount", "st_max_in_count",
      "st_max_out_amount", "st_max_out_count"};
  return names;
}

TokenFlowBehaviorGraph build_tfbg(const EventWindow& window, const TokenDescriptor& token,
                                  const TfbgParams& params) {
  TokenFlowBehaviorGraph g;
  std::vector<const TransferEvent*> transfers;
  std::vector<const TransferEvent*> approvals;
  for (const auto& e : window.events) {
    if (e.kind == EventKind::Transfer)
      transfers.push_back(&e);
    else
      approvals.push_back(&e);
  }
  if (transfers.empty()) throw input_error("no transactions");

  auto node_id = [&](const std::string& addr) {
    auto it = g.node_of.find(addr);
    if (it != g.node_of.end()) return it->second;
    int id = static_cast<int>(g.addresses.size());
    g.addresses.push_back(addr);
    g.node_of.emplace(addr, id);
    return id;
  };

  for (const TransferEvent* e : transfers) {
    TfbgEdge edge;
    edge.src = node_id(e->from);
    edge.dst = node_id(e->to);
    edge.t = e->timestamp;
    edge.log_index = e->log_index;
    edge.tx_hash = e->tx_hash;
    edge.value = e->value;
    edge.gas_limit = e->gas_limit;
    g.edges.push_back(std::move(edge));
  }

  size_t n = g.addresses.size();
  g.collapsed.resize(n);
  for (const auto& e : g.edges) g.collapsed.add_edge(e.src, e.dst);

  CentralityResult cent = structural_centralities(g.collapsed, params.centrality);
  g.eigen_converged = cent.eigen_converged;

  // Per-node incoming/outgoing timelines in window order.
  std::vector<Timeline> in_tl(n), out_tl(n);
  for (const auto& e : g.edges) {
    out_tl[e.src].emplace_back(e.t, e.value);
    in_tl[e.dst].emplace_back(e.t, e.value);
  }

  unsigned dec = token.decimals;
  g.node_features.assign(n, {});
  for (size_t v = 0; v < n; ++v) {
    auto& f = g.node_features[v];
    f[0] = cent.degree[v];
    f[1] = cent.indegree[v];
    f[2] = cent.outdegree[v];
    f[3] = cent.betweenness[v];
    f[4] = cent.closeness[v];
    f[5] = cent.eigenvector[v];
    f[6] = cent.katz[v];
    f[7] = cent.clustering[v];
    f[8] = g.addresses[v] == token.creator ? 1.0 : 0.0;
    bigint in_sum = timeline_sum(in_tl[v]);
    bigint out_sum = timeline_sum(out_tl[v]);
    if (in_sum == 0 && out_sum == 0) {
      f[9] = 0.5;
    } else {
      bigfloat ratio = bigfloat(in_sum) / (bigfloat(in_sum) + bigfloat(out_sum));
      f[9] = ratio.convert_to<double>();
    }
    ShortTermMaxima in_m = short_term_maxima(in_tl[v], params.short_window);
    ShortTermMaxima out_m = short_term_maxima(out_tl[v], params.short_window);
    f[10] = normalize_value(in_m.max_amount, dec);
    f[11] = ln1p_count(in_m.max_count);
    f[12] = normalize_value(out_m.max_amount, dec);
    f[13] = ln1p_count(out_m.max_count);
  }

  // Approval timestamps by approving address, ascending.
  std::map<std::string, std::vector<int64_t>> approve_ts;
  for (const TransferEvent* a : approvals) approve_ts[a->from].push_back(a->timestamp);
  for (auto& [addr, v] : approve_ts) std::sort(v.begin(), v.end());

  g.edge_features.assign(g.edges.size(), {});
  int64_t prev_t = -1;
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const TfbgEdge& e = g.edges[i];
    auto& f = g.edge_features[i];

    f[0] = std::log1p(static_cast<double>(e.t - token.creation_timestamp));
    f[1] = prev_t < 0 ? 0.0 : std::log1p(static_cast<double>(e.t - prev_t));
    prev_t = e.t;

    f[2] = 0.0;
    auto ap = approve_ts.find(g.addresses[e.src]);
    if (ap != approve_ts.end() && !ap->second.empty() && ap->second.front() < e.t) f[2] = 1.0;

    f[3] = std::log10(1.0 + static_cast<double>(e.gas_limit));
    f[4] = normalize_value(e.value, dec);

    double cu = cent.degree[e.src];
    double cv = cent.degree[e.dst];
    f[5] = (cu + cv) > 0 ? f[4] * (2.0 * cu * cv / (cu + cv)) : 0.0;

    Timeline in_prior = before(in_tl[e.dst], e.t);
    Timeline out_prior = before(out_tl[e.src], e.t);
    f[6] = normalize_value(timeline_sum(in_prior), dec);
    f[7] = ln1p_count(static_cast<int64_t>(in_prior.size()));
    f[8] = normalize_value(timeline_sum(out_prior), dec);
    f[9] = ln1p_count(static_cast<int64_t>(out_prior.size()));

    ShortTermMaxima in_m = short_term_maxima(in_prior, params.short_window);
    ShortTermMaxima out_m = short_term_maxima(out_prior, params.short_window);
    f[10] = normalize_value(in_m.max_amount, dec);
    f[11] = ln1p_count(in_m.max_count);
    f[12] = normalize_value(out_m.max_amount, dec);
    f[13] = ln1p_count(out_m.max_count);
  }

  return g;
}

}  // namespace rugscan
