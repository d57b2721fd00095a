#include "rugscan/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace rugscan {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::CodeOnly: return "srcg-only";
    case Variant::CodeNoRisk: return "srcg-no-risk";
    case Variant::TxOnly: return "tfbg-only";
    case Variant::TxNoNodeFeats: return "tfbg-no-node-feats";
    case Variant::TxNoEdgeFeats: return "tfbg-no-edge-feats";
  }
  return "?";
}

bool variant_from_name(const std::string& name, Variant& out) {
  static const std::pair<const char*, Variant> table[] = {
      {"full", Variant::Full},
      {"srcg-only", Variant::CodeOnly},
      {"srcg-no-risk", Variant::CodeNoRisk},
      {"tfbg-only", Variant::TxOnly},
      {"tfbg-no-node-feats", Variant::TxNoNodeFeats},
      {"tfbg-no-edge-feats", Variant::TxNoEdgeFeats},
  };
  for (const auto& [n, v] : table)
    if (name == n) {
      out = v;
      return true;
    }
  return false;
}

std::vector<size_t> temporal_mask(const TokenFlowBehaviorGraph& g, size_t edge_index) {
  const TfbgEdge& e = g.edges.at(edge_index);
  std::vector<size_t> out;
  for (size_t i = 0; i < g.edges.size(); ++i) {
    const TfbgEdge& o = g.edges[i];
    if (o.t >= e.t) continue;
    if (o.src == e.src || o.dst == e.dst) out.push_back(i);
  }
  return out;
}

namespace {

// Symmetric-normalized propagation matrix with self-loops: entry (i, j) =
// a_ij / sqrt(d_i * d_j), message direction dst <- src.
std::shared_ptr<SparseMatrix> normalized_adj(size_t n,
                                             const std::set<std::pair<int32_t, int32_t>>& edges) {
  auto m = std::make_shared<SparseMatrix>(n, n);
  std::vector<std::set<int32_t>> row(n);
  for (size_t i = 0; i < n; ++i) row[i].insert(static_cast<int32_t>(i));
  for (const auto& [src, dst] : edges) row[dst].insert(src);
  std::vector<double> deg(n, 0.0);
  for (size_t i = 0; i < n; ++i) deg[i] = static_cast<double>(row[i].size());
  for (size_t i = 0; i < n; ++i)
    for (int32_t j : row[i])
      m->add(static_cast<int64_t>(i), j, 1.0 / std::sqrt(deg[i] * deg[j]));
  return m;
}

Tensor positional_encoding(size_t len, size_t dim) {
  Tensor p(len, dim);
  for (size_t pos = 0; pos < len; ++pos)
    for (size_t i = 0; i < dim; ++i) {
      double expo = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
      double angle = static_cast<double>(pos) / std::pow(10000.0, expo);
      p.at(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return p;
}

}  // namespace

CompiledSample compile_sample(const SemanticRiskCodeGraph& srcg,
                              const TokenFlowBehaviorGraph& tfbg, bool strip_risk) {
  CompiledSample s;
  s.n_code_nodes = srcg.nodes.size();
  if (s.n_code_nodes == 0) throw input_error("semantic graph has no blocks");

  // Dedup opcode sequences: revert stubs and similar blocks repeat a lot, and
  // identical sequences encode identically.
  std::map<std::vector<int32_t>, int32_t> seq_ids;
  for (const auto& node : srcg.nodes) {
    std::vector<int32_t> toks;
    if (node.opcodes.empty()) {
      toks.push_back(kTokEmpty);
    } else {
      toks.reserve(node.opcodes.size());
      for (uint8_t b : node.opcodes) toks.push_back(b);
    }
    auto [it, fresh] = seq_ids.emplace(std::move(toks), static_cast<int32_t>(s.block_seqs.size()));
    if (fresh) s.block_seqs.push_back(it->first);
    s.node_seq.push_back(it->second);
  }

  std::set<std::pair<int32_t, int32_t>> rel_edges[3];
  for (const auto& e : srcg.edges) {
    EdgeType t = strip_risk ? EdgeType::Normal : e.type;
    int32_t a = static_cast<int32_t>(srcg.row_of.at(e.src));
    int32_t b = static_cast<int32_t>(srcg.row_of.at(e.dst));
    rel_edges[static_cast<int>(t)].emplace(a, b);
  }
  for (int r = 0; r < 3; ++r)
    s.code_adj[r] = normalized_adj(s.n_code_nodes, rel_edges[r]);

  size_t nv = tfbg.node_count();
  size_t ne = tfbg.edge_count();
  std::set<std::pair<int32_t, int32_t>> tx_edges;
  for (size_t u = 0; u < nv; ++u)
    for (int v : tfbg.collapsed.out[u]) tx_edges.emplace(static_cast<int32_t>(u), v);
  s.tx_adj = normalized_adj(nv, tx_edges);

  auto mask = std::make_shared<SparseMatrix>(ne, ne);
  for (size_t e = 0; e < ne; ++e) {
    std::vector<size_t> m = temporal_mask(tfbg, e);
    if (m.empty()) continue;
    double w = 1.0 / static_cast<double>(m.size());
    for (size_t j : m) mask->add(static_cast<int64_t>(e), static_cast<int64_t>(j), w);
  }
  s.mask_mean = mask;

  s.node_feats = Tensor(nv, 14);
  for (size_t i = 0; i < nv; ++i)
    for (size_t j = 0; j < 14; ++j) s.node_feats.at(i, j) = tfbg.node_features[i][j];
  s.edge_feats = Tensor(ne, 14);
  for (size_t i = 0; i < ne; ++i)
    for (size_t j = 0; j < 14; ++j) s.edge_feats.at(i, j) = tfbg.edge_features[i][j];
  for (const auto& e : tfbg.edges) {
    s.edge_src.push_back(e.src);
    s.edge_dst.push_back(e.dst);
  }
  return s;
}

Param& RugModel::make_param(const std::string& name, size_t rows, size_t cols) {
  owned_.push_back(std::make_unique<Param>());
  Param& p = *owned_.back();
  p.name = name;
  p.value = Tensor(rows, cols);
  p.zero_grad();
  registry_.push_back(&p);
  return p;
}

RugModel::RugModel(const ModelConfig& cfg) : cfg_(cfg) {
  size_t d = cfg_.block_dim;
  if (d % cfg_.attn_heads != 0)
    throw config_error("block_dim must be divisible by attn_heads");

  embed_ = &make_param("embed", kVocabSize, d);
  for (size_t l = 0; l < cfg_.encoder_layers; ++l) {
    std::string p = "enc" + std::to_string(l) + ".";
    enc_.push_back(EncLayer{&make_param(p + "wq", d, d), &make_param(p + "wk", d, d),
                            &make_param(p + "wv", d, d), &make_param(p + "wo", d, d),
                            &make_param(p + "bo", 1, d)});
  }
  static const char* kRel[3] = {"critical", "dependent", "normal"};
  for (size_t l = 0; l < cfg_.rgcn_layers; ++l) {
    RgcnLayer layer{};
    for (int r = 0; r < 3; ++r)
      layer.w[r] = &make_param("rgcn" + std::to_string(l) + ".w_" + kRel[r], d, d);
    rgcn_.push_back(layer);
  }
  for (int r = 0; r < 3; ++r) omega_[r] = &make_param(std::string("omega_") + kRel[r], 1, 1);

  size_t h = cfg_.tfbg_hidden;
  size_t nin = 14;
  for (size_t l = 0; l < cfg_.uagnn_layers; ++l) {
    std::string p = "uagnn" + std::to_string(l) + ".";
    size_t ein = l == 0 ? 14 : h;
    UagnnLayer layer{&make_param(p + "wn", nin, h), &make_param(p + "bn", 1, h),
                     &make_param(p + "we", ein + 2 * nin + ein, h), &make_param(p + "be", 1, h)};
    uagnn_.push_back(layer);
    nin = h;
  }

  size_t f = cfg_.fusion_dim;
  wc_ = &make_param("fuse.wc", d, f);
  bc_ = &make_param("fuse.bc", 1, f);
  wt_ = &make_param("fuse.wt", 2 * h, f);
  bt_ = &make_param("fuse.bt", 1, f);
  wa_ = &make_param("fuse.wa", f, f);
  ba_ = &make_param("fuse.ba", 1, f);
  va_ = &make_param("fuse.va", f, 1);
  wf_ = &make_param("cls.w", f, 2);
  bf_ = &make_param("cls.b", 1, 2);
}

void RugModel::init_params(uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (Param* p : registry_) {
    bool is_bias = p->value.rows == 1 && p->name.find(".b") != std::string::npos;
    bool is_omega = p->name.rfind("omega_", 0) == 0;
    if (is_omega) {
      p->value.v[0] = 1.0;  // relation weights start neutral
    } else if (is_bias) {
      p->value = Tensor(p->value.rows, p->value.cols, 0.0);
    } else {
      // Fan-in is the contraction width: rows for weight matrices (x * W).
      p->value = init_uniform(p->value.rows, p->value.cols, p->value.rows, rng);
    }
    p->zero_grad();
  }
}

void RugModel::zero_grads() {
  for (Param* p : registry_) p->zero_grad();
}

TId RugModel::encoder_layer(Tape& tape, TId x, size_t layer) {
  const EncLayer& L = enc_[layer];
  size_t d = cfg_.block_dim;
  size_t heads = cfg_.attn_heads;
  size_t dk = d / heads;
  TId q = tape.matmul(x, tape.bind(*L.wq));
  TId k = tape.matmul(x, tape.bind(*L.wk));
  TId v = tape.matmul(x, tape.bind(*L.wv));
  std::vector<TId> outs;
  for (size_t hh = 0; hh < heads; ++hh) {
    size_t c0 = hh * dk, c1 = (hh + 1) * dk;
    TId qh = tape.slice_cols(q, c0, c1);
    TId kh = tape.slice_cols(k, c0, c1);
    TId vh = tape.slice_cols(v, c0, c1);
    TId scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dk)));
    outs.push_back(tape.matmul(tape.softmax_rows(scores), vh));
  }
  TId merged = tape.concat_cols(outs);
  TId proj = tape.relu(tape.add_rowvec(tape.matmul(merged, tape.bind(*L.wo)), tape.bind(*L.bo)));
  return tape.add(proj, x);  // residual keeps short blocks informative
}

TId RugModel::encode_blocks(Tape& tape, const CompiledSample& s) {
  TId embed_node = tape.bind(*embed_);
  std::vector<TId> uniq;
  for (const auto& seq : s.block_seqs) {
    std::vector<int32_t> toks = seq;
    if (toks.size() > cfg_.max_block_len) toks.resize(cfg_.max_block_len);
    TId x = tape.gather_rows(embed_node, toks);
    TId pos = tape.leaf(positional_encoding(toks.size(), cfg_.block_dim));
    x = tape.add(x, pos);
    for (size_t l = 0; l < cfg_.encoder_layers; ++l) x = encoder_layer(tape, x, l);
    uniq.push_back(tape.mean_rows(x));
  }
  TId stacked = tape.concat_rows(uniq);
  return tape.gather_rows(stacked, s.node_seq);
}

TId RugModel::rgcn_forward(Tape& tape, const CompiledSample& s, TId block_emb) {
  TId h = block_emb;
  for (size_t l = 0; l < rgcn_.size(); ++l) {
    TId acc = -1;
    for (int r = 0; r < 3; ++r) {
      TId prop = tape.matmul(tape.spmm(s.code_adj[r], h), tape.bind(*rgcn_[l].w[r]));
      TId weighted = tape.mul_scalar_node(prop, tape.bind(*omega_[r]));
      acc = acc < 0 ? weighted : tape.add(acc, weighted);
    }
    h = tape.relu(acc);
  }
  return tape.mean_rows(h);
}

TId RugModel::uagnn_forward(Tape& tape, const CompiledSample& s, Variant variant) {
  size_t nv = s.node_feats.rows;
  size_t ne = s.edge_feats.rows;
  TId n_cur = variant == Variant::TxNoNodeFeats ? tape.leaf(Tensor(nv, 14, 0.0))
                                                : tape.leaf(s.node_feats);
  TId e_cur = variant == Variant::TxNoEdgeFeats ? tape.leaf(Tensor(ne, 14, 0.0))
                                                : tape.leaf(s.edge_feats);
  for (const auto& L : uagnn_) {
    TId n_next = tape.relu(tape.add_rowvec(
        tape.matmul(tape.spmm(s.tx_adj, n_cur), tape.bind(*L.wn)), tape.bind(*L.bn)));
    TId e_next = e_cur;
    if (ne > 0) {
      TId eu = tape.gather_rows(n_cur, s.edge_src);
      TId ev = tape.gather_rows(n_cur, s.edge_dst);
      TId mm = tape.spmm(s.mask_mean, e_cur);
      TId cat = tape.concat_cols({e_cur, eu, ev, mm});
      e_next = tape.relu(tape.add_rowvec(tape.matmul(cat, tape.bind(*L.we)), tape.bind(*L.be)));
    }
    n_cur = n_next;
    e_cur = e_next;
  }
  TId node_pool = tape.mean_rows(n_cur);
  TId edge_pool = ne > 0 ? tape.mean_rows(e_cur)
                         : tape.leaf(Tensor(1, cfg_.tfbg_hidden, 0.0));
  return tape.concat_cols({node_pool, edge_pool});
}

ForwardResult RugModel::forward(Tape& tape, const CompiledSample& s, Variant variant, bool train,
                                std::mt19937_64& dropout_rng) {
  ForwardResult out;
  // Feature-ablation variants (zeroed node or edge features) still run both
  // branches; the single-branch variants drop one side and skip fusion.
  bool code_branch = variant != Variant::TxOnly;
  bool tx_branch = variant != Variant::CodeOnly && variant != Variant::CodeNoRisk;

  TId fc = -1, ft = -1;
  if (code_branch) {
    TId blocks = encode_blocks(tape, s);
    TId code_emb = rgcn_forward(tape, s, blocks);
    fc = tape.add_rowvec(tape.matmul(code_emb, tape.bind(*wc_)), tape.bind(*bc_));
  }
  if (tx_branch) {
    TId tx_emb = uagnn_forward(tape, s, variant);
    ft = tape.add_rowvec(tape.matmul(tx_emb, tape.bind(*wt_)), tape.bind(*bt_));
  }

  TId fused;
  if (code_branch && tx_branch) {
    auto score = [&](TId f) {
      TId t = tape.tanh_op(tape.add_rowvec(tape.matmul(f, tape.bind(*wa_)), tape.bind(*ba_)));
      return tape.matmul(t, tape.bind(*va_));
    };
    TId weights = tape.softmax_rows(tape.concat_cols({score(fc), score(ft)}));
    TId w_c = tape.slice_cols(weights, 0, 1);
    TId w_t = tape.slice_cols(weights, 1, 2);
    fused = tape.add(tape.mul_scalar_node(fc, w_c), tape.mul_scalar_node(ft, w_t));
    out.w_code = tape.scalar(w_c);
    out.w_tx = tape.scalar(w_t);
  } else if (code_branch) {
    fused = fc;
    out.w_code = 1.0;
  } else {
    fused = ft;
    out.w_tx = 1.0;
  }

  TId dropped = tape.dropout(fused, cfg_.dropout, dropout_rng, train);
  out.logits = tape.add_rowvec(tape.matmul(dropped, tape.bind(*wf_)), tape.bind(*bf_));
  out.prob = tape.softmax_rows(out.logits);
  return out;
}

}  // namespace rugscan
