#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "meegnet/common.hpp"
#include "meegnet/losses.hpp"
#include "meegnet/model.hpp"
#include "meegnet/rng.hpp"

// Full-model gradient verification: every trainable parameter's analytic
// gradient is compared against a central finite difference of the loss,
//   rel_err = |analytic - fd| / max(|analytic|, |fd|, 1e-6).
//
// The 1e-6 denominator floor sits well above the resolution limit of the
// probe itself: a central difference of step h on a loss of size L carries
// rounding noise ~ulp(L)/(2h), about 1e-11 at the defaults. Directions whose
// true derivative is exactly zero exist in this architecture (the first
// batch-norm shift feeds a bias-free linear layer whose output is mean-
// centred again, so a constant offset never reaches the loss); there FD
// yields pure noise, and without the floor noise would be compared against
// noise at full strictness. Any absolute disagreement above 1e-10 still
// fails a 1e-4 tolerance.
//
// Two optimizations keep this fast without changing any compared value:
//  * the forward pass is replayed only from the layer owning the perturbed
//    parameter (earlier layers cannot see the perturbation), and
//  * temporal-convolution kernels exploit linearity: the perturbed layer
//    output is the cached baseline output plus step * (padded input slice).
// Dropout draws from per-layer streams that are restarted before every
// (partial) forward, so each replay sees the baseline masks.

namespace meegnet {

struct GradCheckConfig {
  int batch = 2;
  // Near the optimum of the central-difference error curve: truncation grows
  // as step^2 above it, evaluation rounding as 1/step below it.
  double step = 5e-6;
  LossConfig loss{};
  bool dropout_active = true;
};

struct GradCheckTensorReport {
  std::string name;
  std::int64_t count;
  double max_rel_error;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::int64_t worst_index = -1;
  std::int64_t checked = 0;
  std::vector<GradCheckTensorReport> tensors;
};

namespace detail {

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Replay start per parameter prefix: perturbations cannot influence layers
// upstream of their owner.
inline int replay_layer_for(const std::string& name) {
  if (name.rfind("conv_temporal.", 0) == 0) return 0;
  if (name.rfind("batch_norm_1.", 0) == 0) return 1;
  if (name.rfind("depthwise_conv.", 0) == 0) return 2;
  if (name.rfind("batch_norm_2.", 0) == 0) return 3;
  if (name.rfind("separable_conv.", 0) == 0) return 7;
  if (name.rfind("batch_norm_3.", 0) == 0) return 8;
  if (name.rfind("dense_sigmoid.", 0) == 0) return 13;
  throw ConfigError("grad check: no replay layer for parameter '" + name + "'");
}

}  // namespace detail

// Checks one random model/input/label draw. Double precision throughout; the
// finite-difference step is absolute.
inline GradCheckReport grad_check_model(const ModelConfig& model_cfg, std::uint64_t seed,
                                        const GradCheckConfig& cfg = {}) {
  if (cfg.batch < 1) throw ConfigError("grad check: batch must be >= 1");
  if (!(cfg.step > 0)) throw ConfigError("grad check: step must be positive");

  ModelConfig mc = model_cfg;
  if (!cfg.dropout_active) mc.dropout_rate = 0.0;
  Model<double> model(mc);
  model.init_params(seed);
  model.enable_input_capture(true);

  Rng data_rng(Rng::derive(seed, "gradcheck.data"));
  Tensor<double> x({cfg.batch, 1, mc.electrodes, mc.samples_per_window});
  for (std::int64_t i = 0; i < x.numel(); ++i) x[static_cast<std::size_t>(i)] = data_rng.normal();
  Tensor<double> labels({cfg.batch, mc.electrodes});
  for (std::int64_t i = 0; i < labels.numel(); ++i)
    labels[static_cast<std::size_t>(i)] = data_rng.bernoulli(0.5) ? 1.0 : 0.0;

  ClassCounts counts;
  for (std::int64_t i = 0; i < labels.numel(); ++i)
    (labels[static_cast<std::size_t>(i)] == 1.0 ? counts.positives : counts.negatives) += 1;
  if (cfg.loss.kind == LossKind::class_balanced_focal) {
    if (counts.positives == 0) counts.positives = 1;
    if (counts.negatives == 0) counts.negatives = 1;
  }

  // Baseline forward/backward with the analytic gradients.
  model.reseed_dropout();
  Tensor<double> probs = model.forward(x, Mode::train);
  Tensor<double> grad_probs;
  loss_forward(probs, labels, cfg.loss, counts, &grad_probs);
  model.zero_grads();
  model.backward(grad_probs);

  struct Entry {
    std::string name;
    std::vector<double>* values;
    std::vector<double> analytic;
    int replay_from;
  };
  std::vector<Entry> entries;
  model.visit_params([&](const std::string& name, std::vector<double>& v, std::vector<double>* g, bool trainable) {
    if (!trainable || g == nullptr) return;
    entries.push_back({name, &v, *g, detail::replay_layer_for(name)});
  });

  const Tensor<double>& conv_base_out = model.layer_input(1);
  auto loss_at = [&](const Tensor<double>& p) { return loss_forward(p, labels, cfg.loss, counts); };

  GradCheckReport report;
  Tensor<double> scratch;
  for (auto& entry : entries) {
    double tensor_max = 0.0;
    const bool conv_kernel = entry.name == "conv_temporal.kernels";
    for (std::size_t i = 0; i < entry.values->size(); ++i) {
      double plus, minus;
      if (conv_kernel) {
        model.conv_temporal().perturbed_output(conv_base_out, i, cfg.step, scratch);
        model.reseed_dropout();
        plus = loss_at(model.forward_from(1, scratch));
        model.conv_temporal().perturbed_output(conv_base_out, i, -cfg.step, scratch);
        model.reseed_dropout();
        minus = loss_at(model.forward_from(1, scratch));
      } else {
        const int from = entry.replay_from;
        const Tensor<double>& layer_in = model.layer_input(from);
        double& p = (*entry.values)[i];
        const double saved = p;
        p = saved + cfg.step;
        model.reseed_dropout();
        plus = loss_at(model.forward_from(from, layer_in));
        p = saved - cfg.step;
        model.reseed_dropout();
        minus = loss_at(model.forward_from(from, layer_in));
        p = saved;
      }
      const double fd = (plus - minus) / (2.0 * cfg.step);
      const double err = detail::rel_error(entry.analytic[i], fd);
      tensor_max = std::max(tensor_max, err);
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_tensor = entry.name;
        report.worst_index = static_cast<std::int64_t>(i);
      }
      ++report.checked;
    }
    report.tensors.push_back({entry.name, static_cast<std::int64_t>(entry.values->size()), tensor_max});
  }
  return report;
}

}  // namespace meegnet
