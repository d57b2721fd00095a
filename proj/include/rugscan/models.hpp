#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rugscan/srcg.hpp"
#include "rugscan/tensor.hpp"
#include "rugscan/tfbg.hpp"

namespace rugscan {

// Pipeline switches mirroring the ablation table: single-branch variants
// bypass fusion; the feature ablations zero one matrix; risk ablation strips
// node/edge types before relation assignment.
enum class Variant : int {
  Full = 0,
  CodeOnly,        // V1: SRCG branch alone
  CodeNoRisk,      // V2: SRCG branch alone, node/edge types forced to normal
  TxOnly,          // V3: TFBG branch alone
  TxNoNodeFeats,   // V4: full model, TFBG node features zeroed
  TxNoEdgeFeats,   // V5: full model, TFBG edge features zeroed
};

const char* variant_name(Variant v);
bool variant_from_name(const std::string& name, Variant& out);

struct ModelConfig {
  size_t block_dim = 36;       // opcode embedding and block encoder width
  size_t attn_heads = 4;
  size_t encoder_layers = 2;
  size_t max_block_len = 128;  // opcode sequence cap fed to the encoder
  size_t rgcn_layers = 2;
  size_t tfbg_hidden = 32;     // UAGNN node/edge width
  size_t uagnn_layers = 2;
  size_t fusion_dim = 8;
  double dropout = 0.3;
};

// Edges whose source or target matches e's and which happened strictly
// earlier. Indices into g.edges, ascending.
std::vector<size_t> temporal_mask(const TokenFlowBehaviorGraph& g, size_t edge_index);

// Everything about a sample that does not depend on parameters: token
// sequences per block, normalized propagation matrices, feature matrices,
// and the temporal-mask averaging operator. Built once, reused every epoch.
struct CompiledSample {
  // Code branch.
  std::vector<std::vector<int32_t>> block_seqs;  // unique opcode-token sequences
  std::vector<int32_t> node_seq;                 // SRCG node -> unique sequence
  std::shared_ptr<SparseMatrix> code_adj[3];     // per relation, normalized, +self-loops
  size_t n_code_nodes = 0;
  // Transaction branch.
  std::shared_ptr<SparseMatrix> tx_adj;          // collapsed digraph, normalized
  std::shared_ptr<SparseMatrix> mask_mean;       // |E| x |E| mean over temporal mask
  Tensor node_feats;                             // |V| x 14
  Tensor edge_feats;                             // |E| x 14
  std::vector<int32_t> edge_src;                 // |E| node indices
  std::vector<int32_t> edge_dst;
};

// strip_risk forces every SRCG node/edge type to normal before relations are
// assigned (the risk-information ablation).
CompiledSample compile_sample(const SemanticRiskCodeGraph& srcg,
                              const TokenFlowBehaviorGraph& tfbg, bool strip_risk = false);

struct ForwardResult {
  TId logits = -1;          // 1 x 2
  TId prob = -1;            // 1 x 2 softmax row
  double w_code = 0.0;      // attention weights; 0/1 for single-branch variants
  double w_tx = 0.0;
};

class RugModel {
 public:
  explicit RugModel(const ModelConfig& cfg);

  // Seeded fan-in uniform init over the fixed registry order.
  void init_params(uint64_t seed);

  ForwardResult forward(Tape& tape, const CompiledSample& s, Variant variant, bool train,
                        std::mt19937_64& dropout_rng);

  std::vector<Param*>& params() { return registry_; }
  const std::vector<Param*>& params() const { return registry_; }
  const ModelConfig& config() const { return cfg_; }
  void zero_grads();

  // Exposed for the oracle tests.
  TId encode_blocks(Tape& tape, const CompiledSample& s);       // |B| x block_dim
  TId rgcn_forward(Tape& tape, const CompiledSample& s, TId block_emb);  // 1 x block_dim
  TId uagnn_forward(Tape& tape, const CompiledSample& s, Variant variant);  // 1 x 2*hidden

 private:
  Param& make_param(const std::string& name, size_t rows, size_t cols);
  TId encoder_layer(Tape& tape, TId x, size_t layer);

  ModelConfig cfg_;
  std::vector<std::unique_ptr<Param>> owned_;
  std::vector<Param*> registry_;

  // Code branch.
  Param* embed_ = nullptr;  // 258 x block_dim: 256 raw bytes, UNK, EMPTY
  struct EncLayer {
    Param *wq, *wk, *wv, *wo, *bo;
  };
  std::vector<EncLayer> enc_;
  struct RgcnLayer {
    Param* w[3];  // per relation: critical, dependent, normal
  };
  std::vector<RgcnLayer> rgcn_;
  Param* omega_[3] = {nullptr, nullptr, nullptr};  // shared relation weights
  // Transaction branch.
  struct UagnnLayer {
    Param *wn, *bn, *we, *be;
  };
  std::vector<UagnnLayer> uagnn_;
  // Fusion + classifier.
  Param *wc_ = nullptr, *bc_ = nullptr;  // code align -> fusion_dim
  Param *wt_ = nullptr, *bt_ = nullptr;  // tx align -> fusion_dim
  Param *wa_ = nullptr, *ba_ = nullptr;  // shared attention transform
  Param* va_ = nullptr;                  // scorer
  Param *wf_ = nullptr, *bf_ = nullptr;  // classifier fusion_dim -> 2
};

// Opcode vocabulary indices.
constexpr int32_t kTokUnk = 256;
constexpr int32_t kTokEmpty = 257;
constexpr size_t kVocabSize = 258;

}  // namespace rugscan
