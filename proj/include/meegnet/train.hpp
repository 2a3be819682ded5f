#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "meegnet/common.hpp"
#include "meegnet/data.hpp"
#include "meegnet/losses.hpp"
#include "meegnet/metrics.hpp"
#include "meegnet/model.hpp"
#include "meegnet/rng.hpp"
#include "meegnet/splits.hpp"
#include "meegnet/stats.hpp"

// Adam training over pooled windows addressed by index, the kfold/loco
// validation protocols, the temporal-kernel sweep (Friedman/Nemenyi over
// paired per-session F1), and the loss grid search (3-fold inner F1).

namespace meegnet {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("adam: learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("adam: beta1 and beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  }
};

// Moments are kept in double regardless of the model scalar type.
template <typename S>
class Adam {
 public:
  Adam(Model<S>& model, const AdamConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    model.visit_params([this](const std::string&, std::vector<S>& v, std::vector<S>* g, bool trainable) {
      if (!trainable || g == nullptr) return;
      m_.emplace_back(v.size(), 0.0);
      v_.emplace_back(v.size(), 0.0);
    });
  }

  void step(Model<S>& model) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t slot = 0;
    model.visit_params([this, bc1, bc2, &slot](const std::string&, std::vector<S>& v, std::vector<S>* g, bool trainable) {
      if (!trainable || g == nullptr) return;
      std::vector<double>& m = m_[slot];
      std::vector<double>& vv = v_[slot];
      ++slot;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double grad = static_cast<double>((*g)[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad;
        vv[i] = cfg_.beta2 * vv[i] + (1.0 - cfg_.beta2) * grad * grad;
        const double mhat = m[i] / bc1;
        const double vhat = vv[i] / bc2;
        v[i] = static_cast<S>(static_cast<double>(v[i]) - cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon));
      }
    });
  }

  std::int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t t_ = 0;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  AdamConfig adam{};
  LossConfig loss{};
  double dense_max_norm = 0.0;   // 0 disables the per-unit norm constraint
  int early_stop_patience = 0;   // 0 disables; counts epochs without val-loss improvement
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (dense_max_norm < 0.0) throw ConfigError("train: dense_max_norm must be >= 0");
    if (early_stop_patience < 0) throw ConfigError("train: early_stop_patience must be >= 0");
    adam.validate();
    loss.validate();
  }
};

struct TrainHistory {
  std::vector<double> train_loss;     // cell-weighted mean per epoch run
  std::vector<double> val_loss;       // empty without validation windows
  std::vector<double> val_f1;         // NaN when undefined for that epoch
  std::vector<double> epoch_seconds;
  ClassCounts counts;                 // training cells, feeds class balancing

  int epochs_run() const { return static_cast<int>(train_loss.size()); }
};

namespace detail {

// Scales each output unit's incoming weight row down to `max_norm`.
template <typename S>
void apply_dense_max_norm(Model<S>& model, double max_norm) {
  if (max_norm <= 0.0) return;
  DenseSigmoid<S>& dense = model.dense_sigmoid();
  const int in = dense.in_features();
  for (int o = 0; o < dense.out_features(); ++o) {
    S* row = dense.weights().data() + static_cast<std::size_t>(o) * in;
    double sq = 0.0;
    for (int i = 0; i < in; ++i) sq += static_cast<double>(row[i]) * static_cast<double>(row[i]);
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
      const S scale = static_cast<S>(max_norm / norm);
      for (int i = 0; i < in; ++i) row[i] *= scale;
    }
  }
}

template <typename S>
void fill_batch(const WindowedDataset& ds, const std::vector<int>& order, std::size_t from,
                std::size_t count, Tensor<S>& x, Tensor<S>& y) {
  const int e = ds.electrodes();
  const int w = ds.data.dim(3);
  if (x.rank() != 4 || x.dim(0) != static_cast<int>(count))
    x = Tensor<S>({static_cast<int>(count), 1, e, w});
  if (y.rank() != 2 || y.dim(0) != static_cast<int>(count)) y = Tensor<S>({static_cast<int>(count), e});
  for (std::size_t b = 0; b < count; ++b) {
    const std::size_t t = static_cast<std::size_t>(order[from + b]);
    const float* src = ds.data.data() + t * static_cast<std::size_t>(e) * static_cast<std::size_t>(w);
    S* dst = x.data() + b * static_cast<std::size_t>(e) * static_cast<std::size_t>(w);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(e) * w; ++i) dst[i] = static_cast<S>(src[i]);
    const float* lsrc = ds.labels.data() + t * static_cast<std::size_t>(e);
    S* ldst = y.data() + b * static_cast<std::size_t>(e);
    for (int i = 0; i < e; ++i) ldst[i] = static_cast<S>(lsrc[i]);
  }
}

template <typename S>
double param_norm(Model<S>& model) {
  double sq = 0.0;
  model.visit_params([&sq](const std::string&, std::vector<S>& v, std::vector<S>*, bool trainable) {
    if (!trainable) return;
    for (const S x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  });
  return std::sqrt(sq);
}

inline void check_dataset_fits(const WindowedDataset& ds, const ModelConfig& cfg) {
  if (ds.windows() < 1) throw ConfigError("train: dataset has no windows");
  if (ds.electrodes() != cfg.electrodes || ds.data.dim(3) != cfg.samples_per_window)
    throw ShapeError("train: dataset windows " + shape_str(ds.data.shape()) +
                     " do not fit the model input (1, " + std::to_string(cfg.electrodes) + ", " +
                     std::to_string(cfg.samples_per_window) + ")");
}

}  // namespace detail

// Inference scores for the given pooled windows, cells flattened window-major.
template <typename S>
void score_windows(Model<S>& model, const WindowedDataset& ds, const std::vector<int>& indices,
                   std::vector<double>& scores, std::vector<int>& labels, int batch_size = 256) {
  detail::check_dataset_fits(ds, model.config());
  const int e = ds.electrodes();
  Tensor<S> x, y;
  for (std::size_t from = 0; from < indices.size(); from += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(static_cast<std::size_t>(batch_size), indices.size() - from);
    detail::fill_batch(ds, indices, from, count, x, y);
    const Tensor<S> probs = model.forward(x, Mode::infer);
    for (std::int64_t i = 0; i < probs.numel(); ++i)
      scores.push_back(static_cast<double>(probs[static_cast<std::size_t>(i)]));
  }
  for (const int t : indices)
    for (int i = 0; i < e; ++i) labels.push_back(ds.labels.at(t, i) == 1.0f ? 1 : 0);
}

// Initializes the model from the config seed and runs Adam over shuffled
// training windows. Class counts always come from the training windows. When
// validation indices are given, per-epoch validation loss and F1 (at
// threshold 0.5) are recorded and early stopping applies if configured. A
// non-finite loss aborts with epoch/batch and parameter-norm diagnostics.
template <typename S>
TrainHistory train_model(Model<S>& model, const WindowedDataset& ds, const std::vector<int>& train_indices,
                         const TrainConfig& cfg, const std::vector<int>* val_indices = nullptr) {
  cfg.validate();
  detail::check_dataset_fits(ds, model.config());
  if (train_indices.empty()) throw ConfigError("train: no training windows");
  if (cfg.early_stop_patience > 0 && (val_indices == nullptr || val_indices->empty()))
    throw ConfigError("train: early stopping needs validation windows");

  TrainHistory history;
  history.counts = count_cells(ds, train_indices);
  if (cfg.loss.kind == LossKind::class_balanced_focal && cfg.loss.per_class_counts &&
      (history.counts.positives == 0 || history.counts.negatives == 0))
    throw ConfigError("train: class-balanced loss needs both classes in the training windows");

  model.init_params(Rng::derive(cfg.seed, "init"));
  Adam<S> adam(model, cfg.adam);

  std::vector<int> order = train_indices;
  Tensor<S> x, y, grad;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng(Rng::derive(cfg.seed, "epoch." + std::to_string(epoch)));
    shuffle_in_place(order, shuffle_rng);
    double loss_sum = 0.0;
    std::int64_t cell_sum = 0;
    for (std::size_t from = 0; from < order.size(); from += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - from);
      detail::fill_batch(ds, order, from, count, x, y);
      Tensor<S> probs = model.forward(x, Mode::train);
      const double batch_loss = loss_forward(probs, y, cfg.loss, history.counts, &grad);
      if (!std::isfinite(batch_loss))
        throw NumericError("train: loss became non-finite at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(from / static_cast<std::size_t>(cfg.batch_size)) +
                           " (parameter norm " + std::to_string(detail::param_norm(model)) + ")");
      model.zero_grads();
      model.backward(grad);
      adam.step(model);
      detail::apply_dense_max_norm(model, cfg.dense_max_norm);
      loss_sum += batch_loss * static_cast<double>(probs.numel());
      cell_sum += probs.numel();
    }
    history.train_loss.push_back(loss_sum / static_cast<double>(cell_sum));

    if (val_indices != nullptr && !val_indices->empty()) {
      std::vector<double> scores;
      std::vector<int> labels;
      score_windows(model, ds, *val_indices, scores, labels);
      Tensor<S> vp({static_cast<int>(scores.size())});
      Tensor<S> vy({static_cast<int>(labels.size())});
      for (std::size_t i = 0; i < scores.size(); ++i) {
        vp[i] = static_cast<S>(scores[i]);
        vy[i] = static_cast<S>(labels[i]);
      }
      const double vl = loss_forward(vp, vy, cfg.loss, history.counts, static_cast<Tensor<S>*>(nullptr));
      history.val_loss.push_back(vl);
      const Confusion c = confusion_counts(scores, labels, 0.5);
      history.val_f1.push_back(2 * c.tp + c.fp + c.fn > 0 ? f1_score(c)
                                                          : std::numeric_limits<double>::quiet_NaN());
      if (cfg.early_stop_patience > 0) {
        if (vl < best_val - 1e-12) {
          best_val = vl;
          stale = 0;
        } else if (++stale >= cfg.early_stop_patience) {
          history.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
          break;
        }
      }
    }
    history.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return history;
}

// --------------------------------------------------------------------------
// Sessions: one training run on a fold's train windows, evaluated on its test
// windows (pooled cells for the headline numbers, per-case rows for reports).

struct SessionResult {
  int repeat = 0;
  int fold_index = 0;
  std::string label;  // "r<repeat>.fold<k>" or the held-out case id
  std::uint64_t train_seed = 0;
  CaseEvaluation pooled;
  std::vector<CaseEvaluation> per_case;
  TrainHistory history;
  double train_seconds = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

template <typename S>
SessionResult run_session(const WindowedDataset& ds, const Fold& fold, int repeat, int fold_index,
                          std::uint64_t train_seed, const ModelConfig& model_cfg, TrainConfig train_cfg,
                          double threshold, Model<S>* trained_out = nullptr) {
  train_cfg.seed = train_seed;
  Model<S> model(model_cfg);
  const auto t0 = std::chrono::steady_clock::now();
  SessionResult session;
  session.repeat = repeat;
  session.fold_index = fold_index;
  session.label = "r" + std::to_string(repeat) + "." + fold.label;
  session.train_seed = train_seed;
  session.history = train_model(model, ds, fold.train, train_cfg);
  session.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<double> scores;
  std::vector<int> labels;
  score_windows(model, ds, fold.test, scores, labels);
  session.pooled = evaluate_case(session.label, scores, labels, threshold);

  // Per-case rows: slice the flat cell vectors by each test window's case.
  const int e = ds.electrodes();
  std::vector<std::string> case_order;
  for (const int t : fold.test) {
    const std::string& id = ds.case_ids[static_cast<std::size_t>(t)];
    if (std::find(case_order.begin(), case_order.end(), id) == case_order.end()) case_order.push_back(id);
  }
  for (const auto& id : case_order) {
    std::vector<double> cs;
    std::vector<int> cl;
    for (std::size_t wi = 0; wi < fold.test.size(); ++wi) {
      if (ds.case_ids[static_cast<std::size_t>(fold.test[wi])] != id) continue;
      const std::size_t base = wi * static_cast<std::size_t>(e);
      cs.insert(cs.end(), scores.begin() + static_cast<std::ptrdiff_t>(base),
                scores.begin() + static_cast<std::ptrdiff_t>(base + static_cast<std::size_t>(e)));
      cl.insert(cl.end(), labels.begin() + static_cast<std::ptrdiff_t>(base),
                labels.begin() + static_cast<std::ptrdiff_t>(base + static_cast<std::size_t>(e)));
    }
    session.per_case.push_back(evaluate_case(id, cs, cl, threshold));
  }
  if (trained_out != nullptr) *trained_out = std::move(model);
  return session;
}

// --------------------------------------------------------------------------
// Validation protocols.

struct ValidationConfig {
  SplitKind protocol = SplitKind::kfold;
  int k = 5;        // kfold folds
  int repeats = 1;  // kfold repetitions with independent split seeds
  ModelConfig model{};
  TrainConfig train{};
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (protocol == SplitKind::kfold && k < 2) throw ConfigError("validate: k must be >= 2");
    if (repeats < 1) throw ConfigError("validate: repeats must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0))
      throw ConfigError("validate: threshold must lie in [0, 1]");
    model.validate();
    train.validate();
  }
};

struct ValidationResult {
  std::vector<SessionResult> sessions;   // repeats*k for kfold, one per case for loco
  EvaluationSummary session_summary;     // over per-session pooled metrics
  EvaluationSummary case_summary;        // over every per-case row
  std::vector<SplitPlan> plans;          // one per repeat (single plan for loco)
};

// Runs the chosen protocol end to end: kfold repeats the window-level split
// `repeats` times with independent derived seeds (repeats x k sessions); loco
// trains one session per held-out case.
template <typename S>
ValidationResult run_validation(const WindowedDataset& ds, const ValidationConfig& cfg,
                                const ProgressFn& progress = {}) {
  cfg.validate();
  ValidationResult result;
  if (cfg.protocol == SplitKind::kfold) {
    for (int r = 0; r < cfg.repeats; ++r)
      result.plans.push_back(split_kfold(ds, cfg.k, Rng::derive(cfg.seed, "repeat." + std::to_string(r))));
  } else {
    result.plans.push_back(split_loco(ds));
  }

  std::vector<CaseEvaluation> pooled_rows, case_rows;
  for (std::size_t r = 0; r < result.plans.size(); ++r) {
    const SplitPlan& plan = result.plans[r];
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      const std::uint64_t train_seed =
          Rng::derive(cfg.seed, "train." + std::to_string(r) + "." + std::to_string(f));
      SessionResult session = run_session<S>(ds, plan.folds[f], static_cast<int>(r), static_cast<int>(f),
                                             train_seed, cfg.model, cfg.train, cfg.threshold);
      if (cfg.protocol == SplitKind::loco) session.label = plan.folds[f].label;
      if (progress)
        progress("session " + session.label + " auc " + std::to_string(session.pooled.auc) + " f1 " +
                 std::to_string(session.pooled.f1));
      pooled_rows.push_back(session.pooled);
      case_rows.insert(case_rows.end(), session.per_case.begin(), session.per_case.end());
      result.sessions.push_back(std::move(session));
    }
  }
  result.session_summary = summarize_cases(pooled_rows);
  result.case_summary = summarize_cases(case_rows);
  return result;
}

// --------------------------------------------------------------------------
// Temporal-kernel sweep: identical splits and train seeds across kernel
// lengths, so per-session metrics pair up for the Friedman test.

struct SweepConfig {
  std::vector<int> kernels = {10, 50, 125, 250};
  SplitKind protocol = SplitKind::kfold;
  int k = 5;
  int repeats = 1;
  ModelConfig model{};
  TrainConfig train{};
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (kernels.size() < 2) throw ConfigError("sweep: needs at least 2 kernel lengths");
    for (const int kk : kernels)
      if (kk < 1) throw ConfigError("sweep: kernel lengths must be >= 1");
    if (protocol == SplitKind::kfold && k < 2) throw ConfigError("sweep: k must be >= 2");
    if (repeats < 1) throw ConfigError("sweep: repeats must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("sweep: threshold must lie in [0, 1]");
    train.validate();
  }
};

struct SweepResult {
  std::vector<int> kernels;
  std::vector<std::vector<SessionResult>> sessions;  // [kernel][session]
  std::vector<std::vector<double>> f1_by_session;    // [session][kernel], Friedman blocks
  std::vector<std::vector<double>> auc_by_session;   // [session][kernel]
  std::vector<double> mean_f1, mean_auc;             // per kernel
  FriedmanResult friedman;                           // over per-session F1
  NemenyiResult nemenyi;
  std::uint64_t split_digest = 0;                    // shared across kernels by construction
};

template <typename S>
SweepResult kernel_sweep(const WindowedDataset& ds, const SweepConfig& cfg,
                         const ProgressFn& progress = {}) {
  cfg.validate();
  std::vector<SplitPlan> plans;
  if (cfg.protocol == SplitKind::kfold) {
    for (int r = 0; r < cfg.repeats; ++r)
      plans.push_back(split_kfold(ds, cfg.k, Rng::derive(cfg.seed, "repeat." + std::to_string(r))));
  } else {
    plans.push_back(split_loco(ds));
  }
  std::size_t session_count = 0;
  for (const auto& plan : plans) session_count += plan.folds.size();

  SweepResult result;
  result.kernels = cfg.kernels;
  result.sessions.resize(cfg.kernels.size());
  result.f1_by_session.assign(session_count, std::vector<double>(cfg.kernels.size(), 0.0));
  result.auc_by_session.assign(session_count, std::vector<double>(cfg.kernels.size(), 0.0));
  for (const auto& plan : plans) result.split_digest ^= split_fingerprint(plan);

  for (std::size_t ki = 0; ki < cfg.kernels.size(); ++ki) {
    ModelConfig mc = cfg.model;
    mc.temporal_kernel = cfg.kernels[ki];
    mc.validate();
    std::size_t si = 0;
    for (std::size_t r = 0; r < plans.size(); ++r) {
      for (std::size_t f = 0; f < plans[r].folds.size(); ++f, ++si) {
        const std::uint64_t train_seed =
            Rng::derive(cfg.seed, "train." + std::to_string(r) + "." + std::to_string(f));
        SessionResult session = run_session<S>(ds, plans[r].folds[f], static_cast<int>(r),
                                               static_cast<int>(f), train_seed, mc, cfg.train, cfg.threshold);
        result.f1_by_session[si][ki] = session.pooled.f1;
        result.auc_by_session[si][ki] = session.pooled.auc;
        if (progress)
          progress("kernel " + std::to_string(cfg.kernels[ki]) + " session " + session.label + " f1 " +
                   std::to_string(session.pooled.f1) + " auc " + std::to_string(session.pooled.auc));
        result.sessions[ki].push_back(std::move(session));
      }
    }
  }

  result.friedman = friedman_test(result.f1_by_session);
  result.nemenyi = nemenyi_test(result.friedman);
  result.mean_f1.assign(cfg.kernels.size(), 0.0);
  result.mean_auc.assign(cfg.kernels.size(), 0.0);
  for (std::size_t s = 0; s < session_count; ++s)
    for (std::size_t ki = 0; ki < cfg.kernels.size(); ++ki) {
      result.mean_f1[ki] += result.f1_by_session[s][ki];
      result.mean_auc[ki] += result.auc_by_session[s][ki];
    }
  for (auto& v : result.mean_f1) v /= static_cast<double>(session_count);
  for (auto& v : result.mean_auc) v /= static_cast<double>(session_count);
  return result;
}

// --------------------------------------------------------------------------
// Loss grid search.

inline std::vector<double> focal_alpha_grid() { return {0.25, 0.333, 0.5, 0.666, 0.75}; }
inline std::vector<double> focal_gamma_grid() { return {0.0, 0.1, 0.3, 0.5, 1.0, 1.5, 2.0}; }
inline std::vector<double> cbf_beta_grid() { return {0.9, 0.99, 0.999, 0.9999}; }

// Every (alpha, gamma) focal candidate: 5 x 7 = 35.
inline std::vector<LossConfig> focal_loss_grid() {
  std::vector<LossConfig> grid;
  for (const double a : focal_alpha_grid())
    for (const double g : focal_gamma_grid()) {
      LossConfig c;
      c.kind = LossKind::focal;
      c.alpha = a;
      c.gamma = g;
      grid.push_back(c);
    }
  return grid;
}

// Every (beta, gamma) class-balanced candidate: 4 x 7 = 28.
inline std::vector<LossConfig> cbf_loss_grid() {
  std::vector<LossConfig> grid;
  for (const double b : cbf_beta_grid())
    for (const double g : focal_gamma_grid()) {
      LossConfig c;
      c.kind = LossKind::class_balanced_focal;
      c.beta = b;
      c.gamma = g;
      grid.push_back(c);
    }
  return grid;
}

// Plain BCE plus both family grids: 1 + 35 + 28 = 64 entries.
inline std::vector<LossConfig> full_loss_grid() {
  std::vector<LossConfig> grid;
  LossConfig bce;
  bce.kind = LossKind::bce;
  grid.push_back(bce);
  for (const auto& c : focal_loss_grid()) grid.push_back(c);
  for (const auto& c : cbf_loss_grid()) grid.push_back(c);
  return grid;
}

struct GridResult {
  std::vector<LossConfig> candidates;
  std::vector<double> mean_f1;        // inner-fold mean per candidate
  std::size_t selected = 0;           // highest mean F1, first on ties
  std::vector<std::string> warnings;  // inner folds without positive cells
};

// Grid search over loss candidates by mean F1 (threshold 0.5) through an
// inner window-level k-fold of the given training windows. Models train from
// scratch per candidate and fold; an inner fold without positive cells
// contributes F1 = 0 with a warning.
template <typename S>
GridResult grid_search_loss(const WindowedDataset& ds, const std::vector<int>& train_indices,
                            const std::vector<LossConfig>& grid, const ModelConfig& model_cfg,
                            const TrainConfig& train_cfg, std::uint64_t seed, int inner_folds = 3,
                            const ProgressFn& progress = {}) {
  if (grid.empty()) throw ConfigError("grid search: empty loss grid");
  for (const auto& l : grid) l.validate();
  if (inner_folds < 2) throw ConfigError("grid search: inner_folds must be >= 2");
  detail::check_dataset_fits(ds, model_cfg);

  // Inner split of positions into train_indices, never touching other windows.
  const SplitPlan inner = split_kfold(static_cast<int>(train_indices.size()), inner_folds,
                                      Rng::derive(seed, "inner"));
  auto lift = [&train_indices](const std::vector<int>& positions) {
    std::vector<int> out;
    out.reserve(positions.size());
    for (const int p : positions) out.push_back(train_indices[static_cast<std::size_t>(p)]);
    return out;
  };
  std::vector<std::pair<std::vector<int>, std::vector<int>>> inner_folds_lifted;
  for (const Fold& fold : inner.folds) inner_folds_lifted.emplace_back(lift(fold.train), lift(fold.test));

  GridResult result;
  result.candidates = grid;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    double f1_sum = 0.0;
    for (std::size_t f = 0; f < inner_folds_lifted.size(); ++f) {
      TrainConfig tc = train_cfg;
      tc.loss = grid[gi];
      tc.seed = Rng::derive(seed, "grid." + std::to_string(gi) + ".fold." + std::to_string(f));
      Model<S> model(model_cfg);
      train_model(model, ds, inner_folds_lifted[f].first, tc);
      std::vector<double> scores;
      std::vector<int> labels;
      score_windows(model, ds, inner_folds_lifted[f].second, scores, labels);
      const Confusion c = confusion_counts(scores, labels, 0.5);
      if (c.tp + c.fn == 0) {
        result.warnings.push_back("candidate " + std::to_string(gi) + " inner fold " + std::to_string(f) +
                                  " has no positive cells; scored F1 = 0");
      } else {
        f1_sum += f1_score(c);
      }
    }
    result.mean_f1.push_back(f1_sum / static_cast<double>(inner_folds_lifted.size()));
    if (progress)
      progress("loss " + to_string(grid[gi].kind) + " alpha " + std::to_string(grid[gi].alpha) + " gamma " +
               std::to_string(grid[gi].gamma) + " beta " + std::to_string(grid[gi].beta) + " f1 " +
               std::to_string(result.mean_f1.back()));
  }
  result.selected = 0;
  for (std::size_t i = 1; i < result.mean_f1.size(); ++i)
    if (result.mean_f1[i] > result.mean_f1[result.selected]) result.selected = i;
  return result;
}

}  // namespace meegnet
