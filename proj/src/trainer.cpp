#include "rugscan/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <thread>

#include "nlohmann/json.hpp"
#include "rugscan/checkpoint.hpp"
#include "rugscan/common.hpp"

namespace rugscan {

namespace {

// splitmix64; decorrelates the per-fold and per-epoch generators from one
// base seed without any chance of stream overlap in practice.
uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double ratio(int64_t num, int64_t den) {
  return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

}  // namespace

Metrics metrics_from_counts(int64_t tp, int64_t fp, int64_t fn, int64_t tn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.fpr = ratio(fp, fp + tn);
  m.fnr = ratio(fn, fn + tp);
  m.accuracy = ratio(tp + tn, tp + fp + fn + tn);
  return m;
}

std::vector<FoldSplit> stratified_folds(const std::vector<int>& labels, uint64_t seed) {
  if (labels.empty()) throw input_error("cannot split an empty dataset");

  // Bucket indices per class, shuffle each class once, deal round-robin into
  // five piles. Fold i tests on pile i and validates on pile i+1, so the test
  // piles partition the dataset by construction.
  std::vector<std::vector<size_t>> by_class(2);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw input_error("label out of range at sample " + std::to_string(i));
    by_class[static_cast<size_t>(labels[i])].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < 5)
      throw input_error("class " + std::to_string(c) + " has " +
                        std::to_string(by_class[c].size()) +
                        " samples; need at least 5 to stratify 5 folds");
  }

  std::vector<std::vector<size_t>> piles(5);
  for (int c = 0; c < 2; ++c) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(c)));
    auto pool = by_class[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    for (size_t k = 0; k < pool.size(); ++k) piles[k % 5].push_back(pool[k]);
  }

  std::vector<FoldSplit> folds(5);
  for (size_t f = 0; f < 5; ++f) {
    folds[f].test = piles[f];
    folds[f].val = piles[(f + 1) % 5];
    for (size_t k = 2; k < 5; ++k) {
      const auto& pile = piles[(f + k) % 5];
      folds[f].train.insert(folds[f].train.end(), pile.begin(), pile.end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
    std::sort(folds[f].val.begin(), folds[f].val.end());
    std::sort(folds[f].test.begin(), folds[f].test.end());
  }
  return folds;
}

std::array<double, 2> class_weights(const std::vector<int>& labels) {
  int64_t n0 = 0, n1 = 0;
  for (int l : labels) (l == 1 ? n1 : n0)++;
  if (n0 == 0 || n1 == 0) throw input_error("class weights need both classes present");
  double n = static_cast<double>(n0 + n1);
  // n/(2*n_c): inverse frequency, normalized so the dataset-wide weighted
  // average is exactly 1.
  return {n / (2.0 * static_cast<double>(n0)), n / (2.0 * static_cast<double>(n1))};
}

std::vector<CompiledSample> compile_dataset(const std::vector<LabeledSample>& data,
                                            Variant variant) {
  std::vector<CompiledSample> out;
  out.reserve(data.size());
  bool strip = variant == Variant::CodeNoRisk;
  for (const auto& s : data) out.push_back(compile_sample(s.srcg, s.tfbg, strip));
  return out;
}

Adam::Adam(std::vector<Param*> params, double lr) : params_(std::move(params)), lr_(lr) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.emplace_back(p->value.rows, p->value.cols, 0.0);
    v_.emplace_back(p->value.rows, p->value.cols, 0.0);
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    for (size_t k = 0; k < p->value.size(); ++k) {
      double g = p->grad.v[k];
      m_[i].v[k] = beta1_ * m_[i].v[k] + (1.0 - beta1_) * g;
      v_[i].v[k] = beta2_ * v_[i].v[k] + (1.0 - beta2_) * g * g;
      double mhat = m_[i].v[k] / bc1;
      double vhat = v_[i].v[k] / bc2;
      p->value.v[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::vector<double> predict_probs(RugModel& model, const std::vector<CompiledSample>& compiled,
                                  const std::vector<size_t>& idx, Variant variant) {
  std::vector<double> out;
  out.reserve(idx.size());
  std::mt19937_64 unused_rng(0);  // eval mode never draws from it
  for (size_t i : idx) {
    Tape tape;
    auto r = model.forward(tape, compiled[i], variant, false, unused_rng);
    out.push_back(tape.val(r.prob).at(0, 1));
  }
  return out;
}

Metrics evaluate(RugModel& model, const std::vector<CompiledSample>& compiled,
                 const std::vector<int>& labels, const std::vector<size_t>& idx,
                 Variant variant, double threshold) {
  if (idx.empty()) throw input_error("empty evaluation set");
  auto probs = predict_probs(model, compiled, idx, variant);
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (size_t k = 0; k < idx.size(); ++k) {
    bool pred = probs[k] >= threshold;
    bool truth = labels[idx[k]] == 1;
    if (pred && truth) ++tp;
    else if (pred && !truth) ++fp;
    else if (!pred && truth) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

FoldResult train_fold(const std::vector<CompiledSample>& compiled,
                      const std::vector<int>& labels, const std::vector<size_t>& train_idx,
                      const std::vector<size_t>& val_idx, const TrainOptions& opt) {
  if (train_idx.empty() || val_idx.empty())
    throw input_error("train and validation sets must be non-empty");

  RugModel model(opt.model);
  model.init_params(opt.seed);

  // Loss weights come from the training rows only.
  std::vector<int> train_labels;
  train_labels.reserve(train_idx.size());
  for (size_t i : train_idx) train_labels.push_back(labels[i]);
  auto w = class_weights(train_labels);
  std::vector<double> weights = {w[0], w[1]};

  FoldResult result;
  result.checkpoint = checkpoint_text(model);
  result.val = evaluate(model, compiled, labels, val_idx, opt.variant, opt.threshold);
  double best_f1 = -1.0;  // first completed epoch always records a best
  size_t since_best = 0;

  Adam adam(model.params(), opt.lr);
  std::vector<size_t> order(train_idx);

  for (size_t epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    std::mt19937_64 order_rng(mix_seed(opt.seed, 2 * epoch));
    std::mt19937_64 drop_rng(mix_seed(opt.seed, 2 * epoch + 1));
    std::shuffle(order.begin(), order.end(), order_rng);

    double loss_sum = 0.0;
    Metrics val_m;
    try {
      for (size_t i : order) {
        Tape tape;
        auto r = model.forward(tape, compiled[i], opt.variant, true, drop_rng);
        TId loss = tape.cross_entropy(r.logits, labels[i], weights);
        loss_sum += tape.scalar(loss);
        tape.backward(loss);
        adam.step();
        model.zero_grads();
      }
      val_m = evaluate(model, compiled, labels, val_idx, opt.variant, opt.threshold);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Internal) throw;
      // Loss or parameters went non-finite. Keep whatever was best so far.
      result.diverged = true;
      break;
    }

    result.history.push_back({epoch, loss_sum / static_cast<double>(order.size()), val_m.f1});

    if (val_m.f1 > best_f1) {
      best_f1 = val_m.f1;
      result.best_epoch = epoch;
      result.checkpoint = checkpoint_text(model);
      result.val = val_m;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }
  return result;
}

CvResult cross_validate(const std::vector<LabeledSample>& data, const TrainOptions& opt) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& s : data) labels.push_back(s.label);

  auto folds = stratified_folds(labels, opt.seed);
  auto compiled = compile_dataset(data, opt.variant);

  CvResult cv;
  cv.variant = opt.variant;
  cv.folds.resize(folds.size());
  cv.test_probs.assign(data.size(), 0.0);

  auto run_one = [&](size_t f) {
    TrainOptions fold_opt = opt;
    fold_opt.seed = mix_seed(opt.seed, 100 + f);
    FoldResult r = train_fold(compiled, labels, folds[f].train, folds[f].val, fold_opt);
    auto best = load_checkpoint_text(r.checkpoint, "fold checkpoint");
    r.test = evaluate(*best, compiled, labels, folds[f].test, opt.variant, opt.threshold);
    auto probs = predict_probs(*best, compiled, folds[f].test, opt.variant);
    for (size_t k = 0; k < folds[f].test.size(); ++k)
      cv.test_probs[folds[f].test[k]] = probs[k];
    cv.folds[f] = std::move(r);
  };

  size_t threads = std::min<size_t>(std::max<size_t>(opt.threads, 1), folds.size());
  if (threads <= 1) {
    for (size_t f = 0; f < folds.size(); ++f) run_one(f);
  } else {
    // Folds are independent; each worker owns its model, so results do not
    // depend on scheduling.
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        for (size_t f = next.fetch_add(1); f < cv.folds.size(); f = next.fetch_add(1))
          run_one(f);
      });
    }
    for (auto& th : pool) th.join();
  }

  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& r : cv.folds) {
    tp += r.test.tp;
    fp += r.test.fp;
    fn += r.test.fn;
    tn += r.test.tn;
    cv.mean_f1 += r.test.f1;
    cv.mean_precision += r.test.precision;
    cv.mean_recall += r.test.recall;
    cv.mean_fpr += r.test.fpr;
    cv.mean_fnr += r.test.fnr;
  }
  double nf = static_cast<double>(cv.folds.size());
  cv.mean_f1 /= nf;
  cv.mean_precision /= nf;
  cv.mean_recall /= nf;
  cv.mean_fpr /= nf;
  cv.mean_fnr /= nf;
  cv.pooled = metrics_from_counts(tp, fp, fn, tn);
  return cv;
}

std::vector<CvResult> run_ablation(const std::vector<LabeledSample>& data,
                                   const TrainOptions& opt) {
  static const Variant kAll[] = {Variant::Full,   Variant::CodeOnly,      Variant::CodeNoRisk,
                                 Variant::TxOnly, Variant::TxNoNodeFeats, Variant::TxNoEdgeFeats};
  std::vector<CvResult> out;
  for (Variant v : kAll) {
    TrainOptions o = opt;
    o.variant = v;
    out.push_back(cross_validate(data, o));
  }
  return out;
}

namespace {

nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  j["tn"] = m.tn;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["fpr"] = m.fpr;
  j["fnr"] = m.fnr;
  j["accuracy"] = m.accuracy;
  return j;
}

}  // namespace

std::string cv_report_json(const std::vector<CvResult>& results) {
  nlohmann::ordered_json root = nlohmann::ordered_json::array();
  for (const auto& cv : results) {
    nlohmann::ordered_json entry;
    entry["variant"] = variant_name(cv.variant);
    entry["mean"] = {{"precision", cv.mean_precision},
                     {"recall", cv.mean_recall},
                     {"f1", cv.mean_f1},
                     {"fpr", cv.mean_fpr},
                     {"fnr", cv.mean_fnr}};
    entry["pooled"] = metrics_json(cv.pooled);
    entry["folds"] = nlohmann::ordered_json::array();
    for (const auto& fold : cv.folds) {
      nlohmann::ordered_json fj;
      fj["best_epoch"] = fold.best_epoch;
      fj["epochs_run"] = fold.history.size();
      fj["diverged"] = fold.diverged;
      fj["val"] = metrics_json(fold.val);
      fj["test"] = metrics_json(fold.test);
      entry["folds"].push_back(std::move(fj));
    }
    root.push_back(std::move(entry));
  }
  return root.dump(2) + "\n";
}

std::string cv_report_table(const std::vector<CvResult>& results) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %9s %9s %9s %9s %9s\n", "variant", "precision",
                "recall", "f1", "fpr", "fnr");
  out << line;
  for (const auto& cv : results) {
    std::snprintf(line, sizeof line, "%-22s %9.4f %9.4f %9.4f %9.4f %9.4f\n",
                  variant_name(cv.variant), cv.mean_precision, cv.mean_recall, cv.mean_f1,
                  cv.mean_fpr, cv.mean_fnr);
    out << line;
  }
  return out.str();
}

}  // namespace rugscan
