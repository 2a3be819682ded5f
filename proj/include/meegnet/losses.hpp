#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "meegnet/common.hpp"
#include "meegnet/tensor.hpp"

// Binary losses over per-electrode probabilities. All three are instances of
//   L = -w * (1 - p_t)^gamma * log(p_t),  p_t = p if label is 1 else 1 - p,
// with p_t clamped away from {0, 1}:
//   bce                  w = 1,                        gamma = 0
//   focal                w = alpha,                    gamma free
//   class_balanced_focal w = (1 - beta)/(1 - beta^n),  gamma free
// where n counts training examples of the cell's class (or of the whole set
// when per-class counting is disabled). The reported value is the mean over
// all (window, electrode) cells. Arithmetic is double regardless of the
// tensor scalar type, so float and double pipelines see the same loss.

namespace meegnet {

enum class LossKind { bce, focal, class_balanced_focal };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::bce: return "bce";
    case LossKind::focal: return "focal";
    case LossKind::class_balanced_focal: return "class_balanced_focal";
  }
  return "?";
}

inline LossKind loss_kind_from_string(std::string_view s) {
  if (s == "bce") return LossKind::bce;
  if (s == "focal" || s == "fl") return LossKind::focal;
  if (s == "class_balanced_focal" || s == "cbf") return LossKind::class_balanced_focal;
  throw ConfigError("unknown loss kind '" + std::string(s) +
                    "' (expected bce, focal or class_balanced_focal)");
}

struct LossConfig {
  LossKind kind = LossKind::bce;
  double alpha = 0.25;           // focal weight
  double gamma = 2.0;            // focusing exponent
  double beta = 0.999;           // class-balance decay
  bool per_class_counts = true;  // false: one effective number from the total count
  double clamp_epsilon = 1e-7;

  void validate() const {
    if (!(clamp_epsilon > 0.0 && clamp_epsilon < 0.5))
      throw ConfigError("loss: clamp_epsilon must lie in (0, 0.5)");
    if (kind == LossKind::focal && !(alpha > 0.0 && alpha <= 1.0))
      throw ConfigError("loss: alpha must lie in (0, 1], got " + std::to_string(alpha));
    if (kind != LossKind::bce && !(gamma >= 0.0))
      throw ConfigError("loss: gamma must be >= 0, got " + std::to_string(gamma));
    if (kind == LossKind::class_balanced_focal && !(beta >= 0.0 && beta < 1.0))
      throw ConfigError("loss: beta must lie in [0, 1), got " + std::to_string(beta));
  }
};

// Class sizes of the training set the loss is balanced against.
struct ClassCounts {
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
  std::int64_t total() const { return positives + negatives; }
};

// (1 - beta) / (1 - beta^n). Exactly 1 when beta == 0; the denominator goes
// through expm1/log1p so beta arbitrarily close to 1 keeps full precision.
inline double effective_number_weight(double beta, std::int64_t n) {
  if (n < 1) throw ConfigError("loss: class count must be >= 1 for class balancing, got " + std::to_string(n));
  if (beta == 0.0) return 1.0;
  const double denom = -std::expm1(static_cast<double>(n) * std::log1p(beta - 1.0));
  return (1.0 - beta) / denom;
}

namespace detail {

struct CellWeight {
  double w;
  double gamma;
};

inline CellWeight cell_weight(const LossConfig& cfg, bool positive, const ClassCounts& counts) {
  switch (cfg.kind) {
    case LossKind::bce: return {1.0, 0.0};
    case LossKind::focal: return {cfg.alpha, cfg.gamma};
    case LossKind::class_balanced_focal: {
      const std::int64_t n = cfg.per_class_counts ? (positive ? counts.positives : counts.negatives)
                                                  : counts.total();
      return {effective_number_weight(cfg.beta, n), cfg.gamma};
    }
  }
  return {1.0, 0.0};
}

}  // namespace detail

// Mean loss over every cell of `probs`; when `grad` is non-null it receives
// dL/dp with the same shape. Labels must be exactly 0 or 1. The clamp is a
// true projection: cells whose raw p_t falls outside (eps, 1-eps) contribute
// the clamped value and a zero gradient.
template <typename S>
double loss_forward(const Tensor<S>& probs, const Tensor<S>& labels, const LossConfig& cfg,
                    const ClassCounts& counts = {}, Tensor<S>* grad = nullptr) {
  cfg.validate();
  if (!probs.same_shape(labels))
    throw ShapeError("loss: probs shape " + shape_str(probs.shape()) + " does not match labels shape " +
                     shape_str(labels.shape()));
  const std::int64_t n = probs.numel();
  if (n == 0) throw ShapeError("loss: empty input");
  if (grad != nullptr && !grad->same_shape(probs)) *grad = Tensor<S>(probs.shape());

  const double eps = cfg.clamp_epsilon;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double label = static_cast<double>(labels[static_cast<std::size_t>(i)]);
    if (label != 0.0 && label != 1.0)
      throw ConfigError("loss: labels must be 0 or 1, found " + std::to_string(label));
    const bool positive = label == 1.0;
    const double p = static_cast<double>(probs[static_cast<std::size_t>(i)]);
    const double pt_raw = positive ? p : 1.0 - p;
    const bool clamped = !(pt_raw > eps && pt_raw < 1.0 - eps);
    const double pt = std::min(std::max(pt_raw, eps), 1.0 - eps);

    const auto [w, gamma] = detail::cell_weight(cfg, positive, counts);
    const double log_pt = std::log(pt);
    const double mod = gamma == 0.0 ? 1.0 : std::pow(1.0 - pt, gamma);
    total += -w * mod * log_pt;

    if (grad != nullptr) {
      double d;
      if (clamped) {
        d = 0.0;
      } else {
        const double term1 = gamma == 0.0 ? 0.0 : w * gamma * std::pow(1.0 - pt, gamma - 1.0) * log_pt;
        const double dpt = term1 - w * mod / pt;
        d = (positive ? dpt : -dpt) * inv_n;
      }
      (*grad)[static_cast<std::size_t>(i)] = static_cast<S>(d);
    }
  }
  return total * inv_n;
}

}  // namespace meegnet
