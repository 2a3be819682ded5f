#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "meegnet/common.hpp"
#include "meegnet/layers.hpp"
#include "meegnet/rng.hpp"
#include "meegnet/tensor.hpp"

// The mEEGNet stack: a compact CNN mapping a one-second multi-electrode
// window (B, 1, E, W) to one abnormality probability per electrode (B, E).
//
//   conv_temporal -> bn -> depthwise_conv -> bn -> elu -> pool -> dropout
//   -> separable_conv -> bn -> elu -> pool -> dropout -> flatten
//   -> dense_sigmoid
//
// With the default configuration the stack carries 6,784 parameters:
// 2,000 temporal kernel + 256 depthwise + 512 separable + 3,856 dense
// + 80 trainable batch-norm (gamma/beta) + 80 batch-norm moving statistics.

namespace meegnet {

struct ModelConfig {
  int electrodes = 16;
  int sampling_rate_hz = 500;
  int samples_per_window = 500;  // rate x the fixed 1 s window
  int temporal_filters = 8;
  int depth_multiplier = 2;
  int separable_filters = 16;
  int temporal_kernel = 250;
  int separable_kernel = 16;
  int pool1 = 4;
  int pool2 = 8;
  double dropout_rate = 0.25;
  double bn_epsilon = 1e-3;
  double bn_momentum = 0.99;
  double decision_threshold = 0.5;

  int depth_channels() const { return temporal_filters * depth_multiplier; }
  int pooled1_width() const { return samples_per_window / pool1; }
  int pooled2_width() const { return pooled1_width() / pool2; }
  int dense_in_features() const { return separable_filters * pooled2_width(); }

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1) throw ConfigError(std::string("model: ") + name + " must be >= 1, got " + std::to_string(v));
    };
    positive(electrodes, "electrodes");
    positive(sampling_rate_hz, "sampling_rate_hz");
    positive(samples_per_window, "samples_per_window");
    if (samples_per_window != sampling_rate_hz)
      throw ConfigError("model: samples_per_window " + std::to_string(samples_per_window) +
                        " must equal sampling_rate_hz " + std::to_string(sampling_rate_hz) +
                        " (windows are one second long)");
    positive(temporal_filters, "temporal_filters");
    positive(depth_multiplier, "depth_multiplier");
    positive(separable_filters, "separable_filters");
    positive(temporal_kernel, "temporal_kernel");
    positive(separable_kernel, "separable_kernel");
    positive(pool1, "pool1");
    positive(pool2, "pool2");
    if (temporal_kernel > samples_per_window)
      throw ConfigError("model: temporal_kernel " + std::to_string(temporal_kernel) +
                        " exceeds samples_per_window " + std::to_string(samples_per_window));
    if (pool1 > samples_per_window)
      throw ConfigError("model: pool1 " + std::to_string(pool1) + " exceeds samples_per_window " +
                        std::to_string(samples_per_window));
    if (pool2 > pooled1_width())
      throw ConfigError("model: pool2 " + std::to_string(pool2) + " exceeds pooled width " +
                        std::to_string(pooled1_width()));
    if (separable_kernel > pooled1_width())
      throw ConfigError("model: separable_kernel " + std::to_string(separable_kernel) +
                        " exceeds pooled width " + std::to_string(pooled1_width()));
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw ConfigError("model: dropout_rate must lie in [0, 1), got " + std::to_string(dropout_rate));
    if (bn_epsilon <= 0.0) throw ConfigError("model: bn_epsilon must be positive");
    if (bn_momentum <= 0.0 || bn_momentum >= 1.0) throw ConfigError("model: bn_momentum must lie in (0, 1)");
    if (decision_threshold < 0.0 || decision_threshold > 1.0)
      throw ConfigError("model: decision_threshold must lie in [0, 1], got " + std::to_string(decision_threshold));
  }
};

struct LayerSummary {
  std::string name;
  std::vector<int> output_shape;  // batch dimension reported as 1
  std::int64_t param_count;       // includes batch-norm moving statistics
};

struct DetectedInterval {
  int electrode;
  int onset_sec;   // inclusive, whole seconds
  int offset_sec;  // exclusive
};

template <typename S>
class Model {
 public:
  static constexpr int kLayerCount = 14;

  explicit Model(const ModelConfig& cfg)
      : cfg_((cfg.validate(), cfg)),
        conv_(cfg.temporal_filters, 1, cfg.temporal_kernel),
        bn1_(cfg.temporal_filters, cfg.bn_epsilon, cfg.bn_momentum),
        depthwise_(cfg.temporal_filters, cfg.depth_multiplier, cfg.electrodes),
        bn2_(cfg.depth_channels(), cfg.bn_epsilon, cfg.bn_momentum),
        pool1_(cfg.pool1),
        drop1_(cfg.dropout_rate),
        separable_(cfg.depth_channels(), cfg.separable_filters, cfg.separable_kernel),
        bn3_(cfg.separable_filters, cfg.bn_epsilon, cfg.bn_momentum),
        pool2_(cfg.pool2),
        drop2_(cfg.dropout_rate),
        dense_(cfg.dense_in_features(), cfg.electrodes) {
    conv_.needs_input_grad = false;  // first layer; nothing consumes the input gradient
    bn1_.layer_index = 1;
    bn2_.layer_index = 3;
    bn3_.layer_index = 8;
    set_dropout_seed(0);
  }

  const ModelConfig& config() const { return cfg_; }

  // Fills every weight tensor from one deterministic stream: Glorot-uniform
  // kernels/weights (limit sqrt(6 / (fan_in + fan_out)), drawn in layer
  // order), zero biases, unit gamma / zero beta, and reset moving statistics
  // (mean 0, variance 1). Dropout streams are re-derived from the same seed.
  void init_params(std::uint64_t seed) {
    Rng rng(seed);
    auto glorot = [&rng](std::vector<S>& v, int fan_in, int fan_out) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& x : v) x = static_cast<S>(rng.uniform(-limit, limit));
    };
    glorot(conv_.kernels(), cfg_.temporal_kernel, cfg_.temporal_kernel * cfg_.temporal_filters);
    glorot(depthwise_.kernels(), cfg_.electrodes, cfg_.electrodes * cfg_.depth_multiplier);
    glorot(separable_.depth_kernels(), cfg_.separable_kernel, cfg_.separable_kernel);
    glorot(separable_.point_weights(), cfg_.depth_channels(), cfg_.separable_filters);
    glorot(dense_.weights(), cfg_.dense_in_features(), cfg_.electrodes);
    std::fill(dense_.bias().begin(), dense_.bias().end(), S(0));
    for (BatchNorm<S>* bn : {&bn1_, &bn2_, &bn3_}) {
      std::fill(bn->gamma().begin(), bn->gamma().end(), S(1));
      std::fill(bn->beta().begin(), bn->beta().end(), S(0));
      std::fill(bn->moving_mean().begin(), bn->moving_mean().end(), S(0));
      std::fill(bn->moving_var().begin(), bn->moving_var().end(), S(1));
    }
    set_dropout_seed(Rng::derive(seed, "dropout"));
  }

  void set_dropout_seed(std::uint64_t base) {
    dropout_base_seed_ = base;
    drop1_.set_seed(Rng::derive(base, "dropout.0"));
    drop2_.set_seed(Rng::derive(base, "dropout.1"));
  }

  // Restarts both dropout streams so the next forward passes redraw the same
  // masks. Gradient checking replays partial forwards under this contract.
  void reseed_dropout() {
    drop1_.reseed();
    drop2_.reseed();
  }

  // When enabled, train-mode forwards retain a copy of every layer input so
  // forward_from() can replay the tail of the stack.
  void enable_input_capture(bool on) { capture_inputs_ = on; }

  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.electrodes || x.dim(3) != cfg_.samples_per_window)
      throw ShapeError("model: input shape " + shape_str(x.shape()) + " does not match expected (B, 1, " +
                       std::to_string(cfg_.electrodes) + ", " + std::to_string(cfg_.samples_per_window) + ")");
    if (capture_inputs_ && mode == Mode::train) inputs_.assign(kLayerCount, Tensor<S>());
    Tensor<S> cur = x;
    for (int i = 0; i < kLayerCount; ++i) {
      if (capture_inputs_ && mode == Mode::train) inputs_[static_cast<std::size_t>(i)] = cur;
      cur = apply_layer(i, cur, mode);
      if (mode == Mode::train && !cur.all_finite())
        throw NumericError("model: layer " + std::to_string(i) + " (" + layer_name(i) + ") produced a non-finite output");
    }
    trained_forward_ = mode == Mode::train;
    return cur;
  }

  // Replays layers [from, kLayerCount) on `x`, which must be shaped like the
  // input of layer `from` in the latest captured forward. Train mode.
  Tensor<S> forward_from(int from, const Tensor<S>& x) {
    if (from < 0 || from >= kLayerCount) throw ConfigError("model: layer index out of range");
    Tensor<S> cur = x;
    for (int i = from; i < kLayerCount; ++i) cur = apply_layer(i, cur, Mode::train);
    return cur;
  }

  const Tensor<S>& layer_input(int i) const {
    if (!capture_inputs_ || i < 0 || static_cast<std::size_t>(i) >= inputs_.size())
      throw StateError("model: no captured input for layer " + std::to_string(i));
    return inputs_[static_cast<std::size_t>(i)];
  }

  // grad_probs is dL/dp, shape (B, electrodes). Accumulates into the layer
  // gradient buffers; returns nothing useful upstream of the first layer.
  void backward(const Tensor<S>& grad_probs) {
    if (!trained_forward_) throw StateError("model: backward before train-mode forward");
    Tensor<S> g = grad_probs;
    for (int i = kLayerCount - 1; i >= 0; --i) g = backward_layer(i, g);
  }

  void zero_grads() {
    conv_.zero_grads();
    bn1_.zero_grads();
    depthwise_.zero_grads();
    bn2_.zero_grads();
    separable_.zero_grads();
    bn3_.zero_grads();
    dense_.zero_grads();
  }

  // Visits every parameter tensor in a fixed order with
  // fn(name, values, grad_or_null, trainable). Checkpoints, the optimizer and
  // the gradient checker all walk this inventory.
  template <typename F>
  void visit_params(F&& fn) {
    auto prefixed = [&fn](const std::string& prefix, auto& layer) {
      layer.for_each_param([&](const char* name, std::vector<S>& v, std::vector<S>* g, bool trainable) {
        fn(prefix + name, v, g, trainable);
      });
    };
    prefixed("conv_temporal.", conv_);
    prefixed("batch_norm_1.", bn1_);
    prefixed("depthwise_conv.", depthwise_);
    prefixed("batch_norm_2.", bn2_);
    prefixed("separable_conv.", separable_);
    prefixed("batch_norm_3.", bn3_);
    prefixed("dense_sigmoid.", dense_);
  }

  std::int64_t parameter_count(bool trainable_only = false) {
    std::int64_t total = 0;
    visit_params([&](const std::string&, std::vector<S>& v, std::vector<S>*, bool trainable) {
      if (!trainable_only || trainable) total += static_cast<std::int64_t>(v.size());
    });
    return total;
  }

  struct ParamInfo {
    std::string name;
    std::vector<int> shape;
    std::int64_t offset;  // element offset into the concatenated parameter block
  };

  // Names, logical shapes and running element offsets of every parameter
  // tensor, in visit_params order. Checkpoint manifests carry this inventory.
  std::vector<ParamInfo> param_inventory() const {
    const int e = cfg_.electrodes, f1 = cfg_.temporal_filters, d = cfg_.depth_multiplier;
    const int dc = cfg_.depth_channels(), f2 = cfg_.separable_filters;
    std::vector<ParamInfo> rows;
    std::int64_t off = 0;
    auto add = [&rows, &off](const char* name, std::vector<int> shape) {
      std::int64_t n = 1;
      for (int dim : shape) n *= dim;
      rows.push_back({name, std::move(shape), off});
      off += n;
    };
    auto add_bn = [&add](const char* prefix, int c) {
      const std::string p(prefix);
      for (const char* field : {"gamma", "beta", "moving_mean", "moving_var"})
        add((p + field).c_str(), {c});
    };
    add("conv_temporal.kernels", {f1, cfg_.temporal_kernel});
    add_bn("batch_norm_1.", f1);
    add("depthwise_conv.kernels", {f1, d, e});
    add_bn("batch_norm_2.", dc);
    add("separable_conv.depth_kernels", {dc, cfg_.separable_kernel});
    add("separable_conv.point_weights", {f2, dc});
    add_bn("batch_norm_3.", f2);
    add("dense_sigmoid.weights", {e, cfg_.dense_in_features()});
    add("dense_sigmoid.bias", {e});
    return rows;
  }

  static const char* layer_name(int i) {
    static constexpr const char* names[kLayerCount] = {
        "conv_temporal", "batch_norm", "depthwise_conv", "batch_norm",  "elu",     "average_pool", "dropout",
        "separable_conv", "batch_norm", "elu",            "average_pool", "dropout", "flatten",      "dense_sigmoid"};
    return names[i];
  }

  std::vector<LayerSummary> layer_summary() const {
    const int e = cfg_.electrodes, w = cfg_.samples_per_window;
    const int f1 = cfg_.temporal_filters, dc = cfg_.depth_channels(), f2 = cfg_.separable_filters;
    const int w1 = cfg_.pooled1_width(), w2 = cfg_.pooled2_width();
    const std::int64_t k = cfg_.temporal_kernel, ks = cfg_.separable_kernel;
    std::vector<LayerSummary> rows;
    rows.push_back({"conv_temporal", {1, f1, e, w}, k * f1});
    rows.push_back({"batch_norm", {1, f1, e, w}, 4LL * f1});
    rows.push_back({"depthwise_conv", {1, dc, 1, w}, static_cast<std::int64_t>(f1) * cfg_.depth_multiplier * e});
    rows.push_back({"batch_norm", {1, dc, 1, w}, 4LL * dc});
    rows.push_back({"elu", {1, dc, 1, w}, 0});
    rows.push_back({"average_pool", {1, dc, 1, w1}, 0});
    rows.push_back({"dropout", {1, dc, 1, w1}, 0});
    rows.push_back({"separable_conv", {1, f2, 1, w1}, static_cast<std::int64_t>(dc) * ks + static_cast<std::int64_t>(f2) * dc});
    rows.push_back({"batch_norm", {1, f2, 1, w1}, 4LL * f2});
    rows.push_back({"elu", {1, f2, 1, w1}, 0});
    rows.push_back({"average_pool", {1, f2, 1, w2}, 0});
    rows.push_back({"dropout", {1, f2, 1, w2}, 0});
    rows.push_back({"flatten", {1, cfg_.dense_in_features()}, 0});
    rows.push_back({"dense_sigmoid", {1, e}, static_cast<std::int64_t>(e) * cfg_.dense_in_features() + e});
    return rows;
  }

  ConvTemporal<S>& conv_temporal() { return conv_; }
  DepthwiseConv<S>& depthwise_conv() { return depthwise_; }
  SeparableConv<S>& separable_conv() { return separable_; }
  BatchNorm<S>& batch_norm(int which) {
    switch (which) {
      case 0: return bn1_;
      case 1: return bn2_;
      case 2: return bn3_;
    }
    throw ConfigError("model: batch_norm index out of range");
  }
  DenseSigmoid<S>& dense_sigmoid() { return dense_; }
  Dropout<S>& dropout(int which) { return which == 0 ? drop1_ : drop2_; }

 private:
  Tensor<S> apply_layer(int i, const Tensor<S>& x, Mode mode) {
    switch (i) {
      case 0: return conv_.forward(x, mode);
      case 1: return bn1_.forward(x, mode);
      case 2: return depthwise_.forward(x, mode);
      case 3: return bn2_.forward(x, mode);
      case 4: return elu1_.forward(x, mode);
      case 5: return pool1_.forward(x, mode);
      case 6: return drop1_.forward(x, mode);
      case 7: return separable_.forward(x, mode);
      case 8: return bn3_.forward(x, mode);
      case 9: return elu2_.forward(x, mode);
      case 10: return pool2_.forward(x, mode);
      case 11: return drop2_.forward(x, mode);
      case 12: {  // flatten (B, F2, 1, W2) -> (B, F2 * W2), channel-major
        flat_in_shape_ = x.shape();
        Tensor<S> y({x.dim(0), static_cast<int>(x.numel() / x.dim(0))});
        std::copy(x.data(), x.data() + x.numel(), y.data());
        return y;
      }
      case 13: return dense_.forward(x, mode);
    }
    throw ConfigError("model: layer index out of range");
  }

  Tensor<S> backward_layer(int i, const Tensor<S>& g) {
    switch (i) {
      case 0: return conv_.backward(g);
      case 1: return bn1_.backward(g);
      case 2: return depthwise_.backward(g);
      case 3: return bn2_.backward(g);
      case 4: return elu1_.backward(g);
      case 5: return pool1_.backward(g);
      case 6: return drop1_.backward(g);
      case 7: return separable_.backward(g);
      case 8: return bn3_.backward(g);
      case 9: return elu2_.backward(g);
      case 10: return pool2_.backward(g);
      case 11: return drop2_.backward(g);
      case 12: {
        Tensor<S> y(flat_in_shape_);
        std::copy(g.data(), g.data() + g.numel(), y.data());
        return y;
      }
      case 13: return dense_.backward(g);
    }
    throw ConfigError("model: layer index out of range");
  }

  ModelConfig cfg_;
  ConvTemporal<S> conv_;
  BatchNorm<S> bn1_;
  DepthwiseConv<S> depthwise_;
  BatchNorm<S> bn2_;
  Elu<S> elu1_;
  AvgPool<S> pool1_;
  Dropout<S> drop1_;
  SeparableConv<S> separable_;
  BatchNorm<S> bn3_;
  Elu<S> elu2_;
  AvgPool<S> pool2_;
  Dropout<S> drop2_;
  DenseSigmoid<S> dense_;
  std::vector<int> flat_in_shape_;
  std::vector<Tensor<S>> inputs_;
  std::uint64_t dropout_base_seed_ = 0;
  bool capture_inputs_ = false;
  bool trained_forward_ = false;
};

// Merges consecutive at-or-above-threshold windows into half-open
// [onset, offset) second intervals per electrode. `probs` is (T, E): one row
// per consecutive one-second window. Results are ordered by (electrode, onset).
template <typename S>
std::vector<DetectedInterval> detect_intervals(const Tensor<S>& probs, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ConfigError("detect: threshold must lie in [0, 1], got " + std::to_string(threshold));
  if (probs.rank() != 2) throw ShapeError("detect: probabilities must be rank 2 (windows, electrodes)");
  const int t_count = probs.dim(0), e_count = probs.dim(1);
  for (std::size_t i = 0; i < static_cast<std::size_t>(probs.numel()); ++i) {
    const double p = static_cast<double>(probs[i]);
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError("detect: probabilities must lie in [0, 1], found " + std::to_string(p));
  }
  std::vector<DetectedInterval> out;
  for (int e = 0; e < e_count; ++e) {
    int run_start = -1;
    for (int t = 0; t <= t_count; ++t) {
      const bool hot = t < t_count && static_cast<double>(probs.at(t, e)) >= threshold;
      if (hot && run_start < 0) run_start = t;
      if (!hot && run_start >= 0) {
        out.push_back({e, run_start, t});
        run_start = -1;
      }
    }
  }
  return out;
}

}  // namespace meegnet
