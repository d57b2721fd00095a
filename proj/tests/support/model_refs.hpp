// Dense, loop-based re-derivations of the two graph encoders plus the random
// graph builders they get tested on. Shared by test_models.cpp and the
// acceptance suite so both compare the production kernels against the same
// independently written reference: the kernels batch through sparse matmuls
// and a tape, the reference walks plain nested loops over std::vector rows.
#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rugscan/models.hpp"

namespace modelref {

using Mat = std::vector<std::vector<double>>;

// Synthetic graph pair: the model layer only sees the structs, so tests can
// shape them directly without running the lifter or the event pipeline.
inline rugscan::SemanticRiskCodeGraph random_srcg(std::mt19937_64& rng, size_t n_nodes) {
  rugscan::SemanticRiskCodeGraph g;
  for (size_t i = 0; i < n_nodes; ++i) {
    rugscan::SrcgNode node;
    node.block = static_cast<int32_t>(i * 7);  // ids need not be dense
    node.type = static_cast<rugscan::NodeType>(rng() % 3);
    size_t len = rng() % 11;  // empty sequences exercise the EMPTY token
    for (size_t k = 0; k < len; ++k) node.opcodes.push_back(static_cast<uint8_t>(rng() % 200));
    g.row_of[node.block] = g.nodes.size();
    g.nodes.push_back(std::move(node));
  }
  size_t n_edges = 1 + rng() % (2 * n_nodes);
  for (size_t e = 0; e < n_edges; ++e) {
    rugscan::SrcgEdge edge;
    edge.src = g.nodes[rng() % n_nodes].block;
    edge.dst = g.nodes[rng() % n_nodes].block;
    edge.type = static_cast<rugscan::EdgeType>(rng() % 3);
    g.edges.push_back(edge);
  }
  return g;
}

inline rugscan::TokenFlowBehaviorGraph random_tfbg(std::mt19937_64& rng, size_t n_nodes,
                                                   size_t n_edges) {
  rugscan::TokenFlowBehaviorGraph g;
  for (size_t i = 0; i < n_nodes; ++i) {
    g.addresses.push_back("0x" + std::to_string(i));
    g.node_of[g.addresses.back()] = static_cast<int>(i);
  }
  g.collapsed.resize(n_nodes);
  int64_t t = 100;
  for (size_t e = 0; e < n_edges; ++e) {
    rugscan::TfbgEdge edge;
    edge.src = static_cast<int>(rng() % n_nodes);
    edge.dst = static_cast<int>(rng() % n_nodes);
    if (rng() % 3) t += static_cast<int64_t>(rng() % 50);  // keep some ties
    edge.t = t;
    edge.log_index = static_cast<int32_t>(e);
    edge.tx_hash = "0xt" + std::to_string(e);
    edge.value = 1;
    g.edges.push_back(edge);
    g.collapsed.add_edge(edge.src, edge.dst);
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  g.node_features.assign(n_nodes, {});
  for (auto& row : g.node_features)
    for (auto& v : row) v = u(rng);
  g.edge_features.assign(n_edges, {});
  for (auto& row : g.edge_features)
    for (auto& v : row) v = u(rng);
  return g;
}

// Throws instead of asserting so both doctest and the standalone acceptance
// binary turn a missing name into a plain failure.
inline rugscan::Param* find_param(rugscan::RugModel& m, const std::string& name) {
  for (rugscan::Param* p : m.params())
    if (p->name == name) return p;
  throw std::runtime_error("missing parameter " + name);
}

inline Mat to_mat(const rugscan::Tensor& t) {
  Mat m(t.rows, std::vector<double>(t.cols, 0.0));
  for (size_t r = 0; r < t.rows; ++r)
    for (size_t c = 0; c < t.cols; ++c) m[r][c] = t.at(r, c);
  return m;
}

inline Mat matmul_ref(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t k = 0; k < b.size(); ++k)
      for (size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline Mat dense_from_sparse(const rugscan::SparseMatrix& s) {
  Mat m(s.rows, std::vector<double>(s.cols, 0.0));
  for (size_t k = 0; k < s.idx.size(); ++k) m[s.idx[k][0]][s.idx[k][1]] += s.w[k];
  return m;
}

// Relational convolution: H' = relu(sum_r omega_r * A_r H W_r) stacked
// cfg.rgcn_layers times, then a mean over rows. `h` is the block-encoder
// output for the sample's nodes.
inline Mat rgcn_reference(rugscan::RugModel& model, const rugscan::CompiledSample& s, Mat h) {
  const rugscan::ModelConfig& cfg = model.config();
  static const char* kRel[3] = {"critical", "dependent", "normal"};
  for (size_t layer = 0; layer < cfg.rgcn_layers; ++layer) {
    Mat acc(h.size(), std::vector<double>(cfg.block_dim, 0.0));
    for (int r = 0; r < 3; ++r) {
      Mat a = dense_from_sparse(*s.code_adj[r]);
      Mat w =
          to_mat(find_param(model, "rgcn" + std::to_string(layer) + ".w_" + kRel[r])->value);
      double omega = find_param(model, std::string("omega_") + kRel[r])->value.v[0];
      Mat prop = matmul_ref(matmul_ref(a, h), w);
      for (size_t i = 0; i < acc.size(); ++i)
        for (size_t j = 0; j < acc[0].size(); ++j) acc[i][j] += omega * prop[i][j];
    }
    for (auto& row : acc)
      for (auto& v : row) v = std::max(v, 0.0);
    h = std::move(acc);
  }
  Mat pooled(1, std::vector<double>(cfg.block_dim, 0.0));
  for (const auto& row : h)
    for (size_t j = 0; j < row.size(); ++j)
      pooled[0][j] += row[j] / static_cast<double>(h.size());
  return pooled;
}

// Edge update reads the current layer's node rows plus the mean over the
// temporal mask; node update propagates through the collapsed adjacency.
// Pools to [mean node | mean edge].
inline Mat uagnn_reference(rugscan::RugModel& model, const rugscan::CompiledSample& s,
                           const rugscan::TokenFlowBehaviorGraph& tfbg) {
  const rugscan::ModelConfig& cfg = model.config();
  size_t nv = s.node_feats.rows;
  size_t ne = s.edge_feats.rows;
  Mat n = to_mat(s.node_feats);
  Mat e = to_mat(s.edge_feats);
  Mat adj = dense_from_sparse(*s.tx_adj);
  for (size_t layer = 0; layer < cfg.uagnn_layers; ++layer) {
    std::string prefix = "uagnn" + std::to_string(layer) + ".";
    Mat wn = to_mat(find_param(model, prefix + "wn")->value);
    Mat bn = to_mat(find_param(model, prefix + "bn")->value);
    Mat we = to_mat(find_param(model, prefix + "we")->value);
    Mat be = to_mat(find_param(model, prefix + "be")->value);

    // Edge update first, reading the current layer's node rows.
    Mat cat(ne, std::vector<double>());
    for (size_t i = 0; i < ne; ++i) {
      std::vector<double> row = e[i];
      const auto& nu = n[s.edge_src[i]];
      const auto& nv_row = n[s.edge_dst[i]];
      row.insert(row.end(), nu.begin(), nu.end());
      row.insert(row.end(), nv_row.begin(), nv_row.end());
      std::vector<double> mean(e[0].size(), 0.0);
      std::vector<size_t> mask = rugscan::temporal_mask(tfbg, i);
      for (size_t m : mask)
        for (size_t j = 0; j < mean.size(); ++j) mean[j] += e[m][j] / mask.size();
      row.insert(row.end(), mean.begin(), mean.end());
      cat[i] = std::move(row);
    }
    Mat e_next = matmul_ref(cat, we);
    for (size_t i = 0; i < ne; ++i)
      for (size_t j = 0; j < e_next[0].size(); ++j)
        e_next[i][j] = std::max(e_next[i][j] + be[0][j], 0.0);

    Mat n_next = matmul_ref(matmul_ref(adj, n), wn);
    for (size_t i = 0; i < nv; ++i)
      for (size_t j = 0; j < n_next[0].size(); ++j)
        n_next[i][j] = std::max(n_next[i][j] + bn[0][j], 0.0);

    n = std::move(n_next);
    e = std::move(e_next);
  }
  Mat pooled(1, std::vector<double>(2 * cfg.tfbg_hidden, 0.0));
  for (size_t i = 0; i < nv; ++i)
    for (size_t j = 0; j < cfg.tfbg_hidden; ++j)
      pooled[0][j] += n[i][j] / static_cast<double>(nv);
  for (size_t i = 0; i < ne; ++i)
    for (size_t j = 0; j < cfg.tfbg_hidden; ++j)
      pooled[0][cfg.tfbg_hidden + j] += e[i][j] / static_cast<double>(ne);
  return pooled;
}

// Worst |x - y| / max(1, |x|, |y|) over all entries. Shape mismatch counts as
// a failure, not an exception: callers report the value.
inline double max_rel_diff(const Mat& a, const rugscan::Tensor& b) {
  if (a.size() != b.rows || a.empty() || a[0].size() != b.cols) return HUGE_VAL;
  double worst = 0.0;
  for (size_t r = 0; r < b.rows; ++r)
    for (size_t c = 0; c < b.cols; ++c) {
      double x = a[r][c];
      double y = b.at(r, c);
      double rel = std::fabs(x - y) / std::max({1.0, std::fabs(x), std::fabs(y)});
      worst = std::max(worst, rel);
    }
  return worst;
}

}  // namespace modelref
