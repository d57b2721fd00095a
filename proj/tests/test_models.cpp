#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "doctest.h"
#include "model_refs.hpp"
#include "rugscan/models.hpp"

using namespace rugscan;
using modelref::dense_from_sparse;
using modelref::find_param;
using modelref::random_srcg;
using modelref::random_tfbg;
using modelref::to_mat;
using Mat = modelref::Mat;

namespace {

void check_close(const Mat& a, const Tensor& b, double tol = 1e-6) {
  REQUIRE(a.size() == b.rows);
  REQUIRE(a[0].size() == b.cols);
  for (size_t r = 0; r < b.rows; ++r)
    for (size_t c = 0; c < b.cols; ++c) {
      double x = a[r][c];
      double y = b.at(r, c);
      CAPTURE(r);
      CAPTURE(c);
      CHECK(std::fabs(x - y) <= tol * std::max({1.0, std::fabs(x), std::fabs(y)}));
    }
}

}  // namespace

TEST_CASE("temporal mask equals pairwise enumeration on random multigraphs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    size_t nv = 2 + rng() % 5;
    size_t ne = 1 + rng() % 20;
    TokenFlowBehaviorGraph g = random_tfbg(rng, nv, ne);
    for (size_t e = 0; e < ne; ++e) {
      std::vector<size_t> expect;
      for (size_t o = 0; o < ne; ++o) {
        if (g.edges[o].t >= g.edges[e].t) continue;
        if (g.edges[o].src == g.edges[e].src || g.edges[o].dst == g.edges[e].dst)
          expect.push_back(o);
      }
      CHECK(temporal_mask(g, e) == expect);
    }
  }
}

TEST_CASE("temporal mask walkthrough: shared endpoints, strict past only") {
  TokenFlowBehaviorGraph g;
  g.addresses = {"a", "b", "c"};
  g.collapsed.resize(3);
  auto push = [&](int s, int d, int64_t t) {
    TfbgEdge e;
    e.src = s;
    e.dst = d;
    e.t = t;
    g.edges.push_back(e);
    g.collapsed.add_edge(s, d);
  };
  push(0, 1, 10);  // 0
  push(0, 2, 20);  // 1: shares src with 0
  push(2, 1, 20);  // 2: shares dst with 0, tied in time with 1
  push(1, 2, 30);  // 3: shares dst with 1 only (src/dst do not cross-match)
  CHECK(temporal_mask(g, 0).empty());
  CHECK(temporal_mask(g, 1) == std::vector<size_t>{0});
  CHECK(temporal_mask(g, 2) == std::vector<size_t>{0});
  CHECK(temporal_mask(g, 3) == std::vector<size_t>{1});
}

TEST_CASE("compiled samples dedup repeated blocks and normalize adjacencies") {
  SemanticRiskCodeGraph srcg;
  auto add_node = [&](int32_t id, std::vector<uint8_t> ops) {
    SrcgNode n;
    n.block = id;
    n.opcodes = std::move(ops);
    srcg.row_of[id] = srcg.nodes.size();
    srcg.nodes.push_back(std::move(n));
  };
  add_node(0, {0x60, 0x01});
  add_node(8, {0x60, 0x01});  // same bytes, must share an encoding
  add_node(16, {});           // empty block
  srcg.edges.push_back({0, 8, EdgeType::Critical});
  srcg.edges.push_back({8, 16, EdgeType::Normal});

  std::mt19937_64 rng(1);
  TokenFlowBehaviorGraph tfbg = random_tfbg(rng, 3, 4);
  CompiledSample s = compile_sample(srcg, tfbg);

  CHECK(s.block_seqs.size() == 2);
  CHECK(s.node_seq == std::vector<int32_t>{0, 0, 1});
  CHECK(s.block_seqs[1] == std::vector<int32_t>{kTokEmpty});

  // Critical relation: edge 0->8 plus self-loops everywhere. Row for node 1
  // has degree 2, row for node 0 degree 1, so the off-diagonal entry is
  // 1/sqrt(2).
  Mat crit = dense_from_sparse(*s.code_adj[0]);
  CHECK(crit[1][0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(crit[0][0] == doctest::Approx(1.0));
  CHECK(crit[1][1] == doctest::Approx(0.5));
  CHECK(crit[2][2] == doctest::Approx(1.0));
  CHECK(crit[0][1] == 0.0);  // direction is dst <- src

  SUBCASE("risk stripping reroutes every edge to the normal relation") {
    CompiledSample bare = compile_sample(srcg, tfbg, true);
    // Critical/dependent relations degrade to bare self-loops.
    Mat c0 = dense_from_sparse(*bare.code_adj[0]);
    Mat c1 = dense_from_sparse(*bare.code_adj[1]);
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j) {
        CHECK(c0[i][j] == (i == j ? 1.0 : 0.0));
        CHECK(c1[i][j] == (i == j ? 1.0 : 0.0));
      }
    Mat c2 = dense_from_sparse(*bare.code_adj[2]);
    CHECK(c2[1][0] > 0.0);
    CHECK(c2[2][1] > 0.0);
  }
}

TEST_CASE("relational convolution matches a dense loop reference") {
  std::mt19937_64 rng(77);
  ModelConfig cfg;
  RugModel model(cfg);
  model.init_params(11);

  for (int trial = 0; trial < 20; ++trial) {
    SemanticRiskCodeGraph srcg = random_srcg(rng, 2 + rng() % 9);
    TokenFlowBehaviorGraph tfbg = random_tfbg(rng, 3, 5);
    CompiledSample s = compile_sample(srcg, tfbg);

    Tape tape;
    TId blocks = model.encode_blocks(tape, s);
    // Copy the encoder output out: later ops may reallocate tape storage.
    Tensor h0 = tape.val(blocks);
    TId out = model.rgcn_forward(tape, s, blocks);

    // Dense reference: H' = relu(sum_r omega_r * A_r H W_r) per layer, then a
    // mean over rows. Shared with the acceptance suite.
    Mat pooled = modelref::rgcn_reference(model, s, to_mat(h0));
    check_close(pooled, tape.val(out));
  }
}

TEST_CASE("edge-update network matches a dense loop reference") {
  std::mt19937_64 rng(88);
  ModelConfig cfg;
  RugModel model(cfg);
  model.init_params(22);

  for (int trial = 0; trial < 20; ++trial) {
    SemanticRiskCodeGraph srcg = random_srcg(rng, 3);
    size_t nv = 2 + rng() % 7;
    size_t ne = 1 + rng() % 10;
    TokenFlowBehaviorGraph tfbg = random_tfbg(rng, nv, ne);
    CompiledSample s = compile_sample(srcg, tfbg);

    Tape tape;
    TId out = model.uagnn_forward(tape, s, Variant::Full);

    // Dense reference shared with the acceptance suite: edge update reads the
    // current layer's node rows plus the temporal-mask mean, node update runs
    // through the collapsed adjacency, pooling is [mean node | mean edge].
    Mat pooled = modelref::uagnn_reference(model, s, tfbg);
    check_close(pooled, tape.val(out));
  }
}

TEST_CASE("fusion weights form a convex pair and variants pin them") {
  std::mt19937_64 rng(5);
  ModelConfig cfg;
  RugModel model(cfg);
  model.init_params(33);
  SemanticRiskCodeGraph srcg = random_srcg(rng, 5);
  TokenFlowBehaviorGraph tfbg = random_tfbg(rng, 4, 7);
  CompiledSample s = compile_sample(srcg, tfbg);
  std::mt19937_64 drop(1);

  SUBCASE("full model") {
    Tape tape;
    ForwardResult r = model.forward(tape, s, Variant::Full, false, drop);
    CHECK(r.w_code + r.w_tx == doctest::Approx(1.0));
    CHECK(r.w_code > 0.0);
    CHECK(r.w_tx > 0.0);
    const Tensor& prob = tape.val(r.prob);
    REQUIRE(prob.cols == 2);
    CHECK(prob.v[0] + prob.v[1] == doctest::Approx(1.0));
  }
  SUBCASE("single-branch variants bypass fusion") {
    Tape t1;
    ForwardResult rc = model.forward(t1, s, Variant::CodeOnly, false, drop);
    CHECK(rc.w_code == 1.0);
    CHECK(rc.w_tx == 0.0);
    Tape t2;
    ForwardResult rt = model.forward(t2, s, Variant::TxOnly, false, drop);
    CHECK(rt.w_code == 0.0);
    CHECK(rt.w_tx == 1.0);
  }
  SUBCASE("feature ablations keep both branches") {
    Tape tape;
    ForwardResult r = model.forward(tape, s, Variant::TxNoNodeFeats, false, drop);
    CHECK(r.w_code + r.w_tx == doctest::Approx(1.0));
    CHECK(r.w_code > 0.0);
  }
}

TEST_CASE("zeroed-feature variants actually zero their matrix") {
  std::mt19937_64 rng(6);
  ModelConfig cfg;
  RugModel model(cfg);
  model.init_params(44);
  SemanticRiskCodeGraph srcg = random_srcg(rng, 4);
  TokenFlowBehaviorGraph tfbg = random_tfbg(rng, 4, 6);
  CompiledSample s = compile_sample(srcg, tfbg);

  // Hand-zero the node features and compare against the V4 forward: the
  // outputs must agree exactly, proving the switch zeroes that matrix and
  // nothing else.
  CompiledSample zeroed = s;
  zeroed.node_feats = Tensor(s.node_feats.rows, s.node_feats.cols, 0.0);
  Tape t1, t2;
  TId a = model.uagnn_forward(t1, s, Variant::TxNoNodeFeats);
  TId b = model.uagnn_forward(t2, zeroed, Variant::Full);
  for (size_t i = 0; i < t1.val(a).size(); ++i) CHECK(t1.val(a).v[i] == t2.val(b).v[i]);

  CompiledSample zeroed_e = s;
  zeroed_e.edge_feats = Tensor(s.edge_feats.rows, s.edge_feats.cols, 0.0);
  Tape t3, t4;
  TId c = model.uagnn_forward(t3, s, Variant::TxNoEdgeFeats);
  TId d = model.uagnn_forward(t4, zeroed_e, Variant::Full);
  for (size_t i = 0; i < t3.val(c).size(); ++i) CHECK(t3.val(c).v[i] == t4.val(d).v[i]);
}

TEST_CASE("initialization is seeded, omegas start at one, biases at zero") {
  ModelConfig cfg;
  RugModel a(cfg), b(cfg), c(cfg);
  a.init_params(123);
  b.init_params(123);
  c.init_params(124);
  REQUIRE(a.params().size() == b.params().size());
  bool any_diff_seed_differs = false;
  for (size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params()[i]->name == b.params()[i]->name);
    CHECK(a.params()[i]->value.v == b.params()[i]->value.v);
    if (a.params()[i]->value.v != c.params()[i]->value.v) any_diff_seed_differs = true;
  }
  CHECK(any_diff_seed_differs);

  for (const char* rel : {"omega_critical", "omega_dependent", "omega_normal"})
    CHECK(find_param(a, rel)->value.v[0] == 1.0);
  for (double v : find_param(a, "enc0.bo")->value.v) CHECK(v == 0.0);
  for (double v : find_param(a, "cls.b")->value.v) CHECK(v == 0.0);
}

TEST_CASE("forward is deterministic in eval mode") {
  std::mt19937_64 rng(9);
  ModelConfig cfg;
  RugModel model(cfg);
  model.init_params(55);
  SemanticRiskCodeGraph srcg = random_srcg(rng, 6);
  TokenFlowBehaviorGraph tfbg = random_tfbg(rng, 5, 9);
  CompiledSample s = compile_sample(srcg, tfbg);

  std::mt19937_64 d1(7), d2(99);  // rng must be irrelevant when train=false
  Tape t1, t2;
  ForwardResult r1 = model.forward(t1, s, Variant::Full, false, d1);
  ForwardResult r2 = model.forward(t2, s, Variant::Full, false, d2);
  CHECK(t1.val(r1.logits).v == t2.val(r2.logits).v);
  CHECK(r1.w_code == r2.w_code);
}

TEST_CASE("variant names round trip") {
  for (Variant v : {Variant::Full, Variant::CodeOnly, Variant::CodeNoRisk, Variant::TxOnly,
                    Variant::TxNoNodeFeats, Variant::TxNoEdgeFeats}) {
    Variant back;
    REQUIRE(variant_from_name(variant_name(v), back));
    CHECK(back == v);
  }
  Variant out;
  CHECK_FALSE(variant_from_name("bogus", out));
}

TEST_CASE("whole-model gradients pass finite differences on a small config") {
  // Shrink every width so the finite-difference sweep stays fast while still
  // covering one of each parameter kind end to end.
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
  RugModel model(cfg);
  model.init_params(7);

  std::mt19937_64 rng(3);
  SemanticRiskCodeGraph srcg = random_srcg(rng, 4);
  TokenFlowBehaviorGraph tfbg = random_tfbg(rng, 3, 5);
  CompiledSample s = compile_sample(srcg, tfbg);
  std::vector<double> weights = {1.0, 1.5};

  auto loss_value = [&]() {
    Tape tape;
    std::mt19937_64 drop(1);
    ForwardResult r = model.forward(tape, s, Variant::Full, false, drop);
    return tape.scalar(tape.cross_entropy(r.logits, 1, weights));
  };

  model.zero_grads();
  {
    Tape tape;
    std::mt19937_64 drop(1);
    ForwardResult r = model.forward(tape, s, Variant::Full, false, drop);
    tape.backward(tape.cross_entropy(r.logits, 1, weights));
  }

  auto numeric_at = [&](Param* p, size_t i, double h) {
    double keep = p->value.v[i];
    p->value.v[i] = keep + h;
    double fp = loss_value();
    p->value.v[i] = keep - h;
    double fm = loss_value();
    p->value.v[i] = keep;
    return (fp - fm) / (2.0 * h);
  };
  auto rel_err = [](double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
  };

  size_t checked = 0;
  size_t refined = 0;
  for (Param* p : model.params()) {
    // Probe a bounded number of entries per tensor; full sweeps run in the
    // dedicated acceptance binary.
    size_t stride = std::max<size_t>(1, p->value.size() / 6);
    for (size_t i = 0; i < p->value.size(); i += stride) {
      double analytic = p->grad.v[i];
      double rel = rel_err(analytic, numeric_at(p, i, 1e-3));
      if (rel >= 1e-4) {
        // A relu kink inside the +-1e-3 bracket makes the central difference
        // a two-slope average rather than a derivative estimate. Shrinking h
        // separates that from a real gradient bug: a kink resolves, a bug
        // stays wrong at every step size.
        rel = rel_err(analytic, numeric_at(p, i, 1e-5));
        ++refined;
      }
      CAPTURE(p->name);
      CAPTURE(i);
      CHECK(rel < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 100);
  // Kink hits must stay rare or the h=1e-3 sweep is not testing much.
  CHECK(refined * 20 <= checked);
}

TEST_CASE("pooled outputs ignore node presentation order") {
  // Mean pooling plus symmetric normalization should make the forward pass
  // indifferent to how graph nodes happen to be listed. Shuffle both inputs
  // and demand matching logits. Edge order stays put: it is temporal.
  std::mt19937_64 rng(20260825);
  for (int trial = 0; trial < 8; ++trial) {
    SemanticRiskCodeGraph srcg = random_srcg(rng, 3 + rng() % 6);
    TokenFlowBehaviorGraph tfbg = random_tfbg(rng, 3 + rng() % 5, 4 + rng() % 6);

    // SRCG: permute the node list, remap row_of, shuffle the edge list.
    SemanticRiskCodeGraph srcg_p = srcg;
    std::shuffle(srcg_p.nodes.begin(), srcg_p.nodes.end(), rng);
    srcg_p.row_of.clear();
    for (size_t i = 0; i < srcg_p.nodes.size(); ++i) srcg_p.row_of[srcg_p.nodes[i].block] = i;
    std::shuffle(srcg_p.edges.begin(), srcg_p.edges.end(), rng);

    // TFBG: relabel node indices through a random permutation.
    size_t nv = tfbg.node_count();
    std::vector<int> perm(nv);
    for (size_t i = 0; i < nv; ++i) perm[i] = static_cast<int>(i);
    std::shuffle(perm.begin(), perm.end(), rng);
    TokenFlowBehaviorGraph tfbg_p = tfbg;
    tfbg_p.node_of.clear();
    tfbg_p.collapsed.resize(nv);
    for (size_t i = 0; i < nv; ++i) {
      tfbg_p.addresses[perm[i]] = tfbg.addresses[i];
      tfbg_p.node_features[perm[i]] = tfbg.node_features[i];
      tfbg_p.node_of[tfbg.addresses[i]] = perm[i];
    }
    for (size_t e = 0; e < tfbg.edges.size(); ++e) {
      tfbg_p.edges[e].src = perm[tfbg.edges[e].src];
      tfbg_p.edges[e].dst = perm[tfbg.edges[e].dst];
      tfbg_p.collapsed.add_edge(tfbg_p.edges[e].src, tfbg_p.edges[e].dst);
    }

    ModelConfig cfg;
    cfg.block_dim = 12;
    cfg.attn_heads = 2;
    cfg.encoder_layers = 1;
    cfg.rgcn_layers = 1;
    cfg.tfbg_hidden = 6;
    cfg.uagnn_layers = 2;
    cfg.fusion_dim = 4;
    RugModel model(cfg);
    model.init_params(11 + trial);

    std::mt19937_64 drop(0);
    Tape t1;
    auto r1 = model.forward(t1, compile_sample(srcg, tfbg), Variant::Full, false, drop);
    Tensor base = t1.val(r1.logits);
    Tape t2;
    auto r2 = model.forward(t2, compile_sample(srcg_p, tfbg_p), Variant::Full, false, drop);
    Tensor shuffled = t2.val(r2.logits);

    REQUIRE(base.size() == shuffled.size());
    for (size_t i = 0; i < base.size(); ++i)
      CHECK(std::fabs(base.v[i] - shuffled.v[i]) < 1e-6);
    CHECK(std::fabs(r1.w_code - r2.w_code) < 1e-6);
  }
}
