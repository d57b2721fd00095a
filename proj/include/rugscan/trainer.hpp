#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rugscan/models.hpp"
#include "rugscan/srcg.hpp"
#include "rugscan/tfbg.hpp"

namespace rugscan {

struct LabeledSample {
  std::string id;
  int label = 0;  // 1 = rug pull, 0 = benign
  SemanticRiskCodeGraph srcg;
  TokenFlowBehaviorGraph tfbg;
};

// Confusion counts plus the derived rates. Rates are always recomputed from
// the counts via metrics_from_counts; undefined ratios (empty denominator)
// come out as 0.
struct Metrics {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double fpr = 0.0, fnr = 0.0, accuracy = 0.0;
};
Metrics metrics_from_counts(int64_t tp, int64_t fp, int64_t fn, int64_t tn);

struct FoldSplit {
  std::vector<size_t> train, val, test;  // indices into the dataset, ascending
};

// Five stratified folds, 60/20/20 per class. Fold test sets are pairwise
// disjoint and together cover the dataset. Throws Input when any class has
// fewer than 5 members.
std::vector<FoldSplit> stratified_folds(const std::vector<int>& labels, uint64_t seed);

// Per-class loss weights inversely proportional to frequency, scaled so the
// weighted average over the dataset is 1.
std::array<double, 2> class_weights(const std::vector<int>& labels);

struct TrainOptions {
  ModelConfig model;
  Variant variant = Variant::Full;
  double lr = 1e-3;
  size_t max_epochs = 200;
  size_t patience = 10;     // epochs without a new best validation F1
  double threshold = 0.5;   // rug-probability decision threshold
  uint64_t seed = 0;
  size_t threads = 1;       // fold-level parallelism in cross_validate
};

struct EpochLog {
  size_t epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

struct FoldResult {
  std::string checkpoint;  // serialized best-on-validation parameters
  std::vector<EpochLog> history;
  Metrics val;             // validation metrics at the best epoch
  Metrics test;            // filled by cross_validate; empty from train_fold
  size_t best_epoch = 0;   // 0 = the initialized model was never beaten
  bool diverged = false;   // loss went non-finite; checkpoint is last good
};

// Compiles every sample once for the given variant (the risk-stripped
// ablation recompiles the code graph with all types forced to normal).
std::vector<CompiledSample> compile_dataset(const std::vector<LabeledSample>& data,
                                            Variant variant);

// Adam-style training with per-epoch shuffling, class-weighted cross entropy,
// and early stopping on validation F1. Sees only the train and validation
// index lists; test rows never reach this function.
FoldResult train_fold(const std::vector<CompiledSample>& compiled,
                      const std::vector<int>& labels, const std::vector<size_t>& train_idx,
                      const std::vector<size_t>& val_idx, const TrainOptions& opt);

// Threshold the rug-class probability over `idx` and tally the confusion
// counts. Throws Input on an empty index list.
Metrics evaluate(RugModel& model, const std::vector<CompiledSample>& compiled,
                 const std::vector<int>& labels, const std::vector<size_t>& idx,
                 Variant variant, double threshold);

struct CvResult {
  Variant variant = Variant::Full;
  std::vector<FoldResult> folds;
  Metrics pooled;       // confusion counts summed over fold test sets
  double mean_f1 = 0.0;
  double mean_precision = 0.0, mean_recall = 0.0, mean_fpr = 0.0, mean_fnr = 0.0;
  // Held-out rug probability per sample: every sample sits in exactly one
  // fold's test set, so this covers the dataset. Lets callers score subsets.
  std::vector<double> test_probs;
};

// Rug-class probabilities in `idx` order, eval mode.
std::vector<double> predict_probs(RugModel& model, const std::vector<CompiledSample>& compiled,
                                  const std::vector<size_t>& idx, Variant variant);

// Full five-fold protocol: split, train each fold, evaluate each held-out
// test set with the fold's best checkpoint. Headline numbers are the plain
// mean over folds.
CvResult cross_validate(const std::vector<LabeledSample>& data, const TrainOptions& opt);

// Cross-validates every ablation variant with the same options and data.
std::vector<CvResult> run_ablation(const std::vector<LabeledSample>& data,
                                   const TrainOptions& opt);

// Report renderers shared by the train/eval/ablation commands.
std::string cv_report_json(const std::vector<CvResult>& results);
std::string cv_report_table(const std::vector<CvResult>& results);

// Adaptive-moment optimizer over the model's registered parameters. step()
// consumes the accumulated gradients and leaves them for the caller to zero.
class Adam {
 public:
  Adam(std::vector<Param*> params, double lr);
  void step();

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
};

}  // namespace rugscan
