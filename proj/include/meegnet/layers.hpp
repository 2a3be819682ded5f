#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "meegnet/common.hpp"
#include "meegnet/rng.hpp"
#include "meegnet/tensor.hpp"

// The layer primitives of the mEEGNet stack. Every layer owns its parameters,
// shape-matched gradient buffers, and the forward caches its backward needs.
// Convolutions are cross-correlations (no kernel flip); temporal convolutions
// are length-preserving with pad_left = floor((K-1)/2), pad_right = ceil.

namespace meegnet {
namespace detail {

// y[t] += sum_tau k[tau] * xp[t + tau], xp padded to length W + K - 1.
template <typename S>
inline void corr_acc(const S* xp, const S* k, S* y, int kernel, int width) {
  for (int tau = 0; tau < kernel; ++tau) {
    const S kv = k[tau];
    const S* xr = xp + tau;
#pragma omp simd
    for (int t = 0; t < width; ++t) y[t] += kv * xr[t];
  }
}

// dk[tau] += sum_t g[t] * xp[t + tau].
template <typename S>
inline void corr_kernel_grad(const S* xp, const S* g, S* dk, int kernel, int width) {
  for (int tau = 0; tau < kernel; ++tau) {
    const S* xr = xp + tau;
    S acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int t = 0; t < width; ++t) acc += g[t] * xr[t];
    dk[tau] += acc;
  }
}

template <typename S>
inline void axpy(S a, const S* x, S* y, int n) {
#pragma omp simd
  for (int t = 0; t < n; ++t) y[t] += a * x[t];
}

template <typename S>
inline S dot(const S* a, const S* b, int n) {
  S acc = 0;
#pragma omp simd reduction(+ : acc)
  for (int t = 0; t < n; ++t) acc += a[t] * b[t];
  return acc;
}

// Numerically stable logistic with output clamped to the open interval (0, 1)
// so downstream log() calls stay finite even at saturated logits.
template <typename S>
inline S sigmoid(S z) {
  S p;
  if (z >= S(0)) {
    p = S(1) / (S(1) + std::exp(-z));
  } else {
    const S e = std::exp(z);
    p = e / (S(1) + e);
  }
  const S lo = std::numeric_limits<S>::min();
  const S hi = S(1) - std::numeric_limits<S>::epsilon() / S(2);
  return std::min(std::max(p, lo), hi);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Temporal convolution: kernels extend only along the time axis, output time
// extent equals input time extent ("same" zero padding).
template <typename S>
class ConvTemporal {
 public:
  ConvTemporal(int filters, int in_channels, int kernel, bool with_bias = false)
      : filters_(filters),
        in_channels_(in_channels),
        kernel_(kernel),
        pad_left_((kernel - 1) / 2),
        pad_right_(kernel - 1 - (kernel - 1) / 2),
        with_bias_(with_bias),
        kernels_(static_cast<std::size_t>(filters) * in_channels * kernel, S(0)),
        grad_kernels_(kernels_.size(), S(0)) {
    if (filters < 1 || in_channels < 1 || kernel < 1)
      throw ConfigError("conv_temporal: filters, channels and kernel must be >= 1");
    if (with_bias_) {
      bias_.assign(static_cast<std::size_t>(filters), S(0));
      grad_bias_.assign(static_cast<std::size_t>(filters), S(0));
    }
  }

  int filters() const { return filters_; }
  int in_channels() const { return in_channels_; }
  int kernel() const { return kernel_; }
  std::vector<S>& kernels() { return kernels_; }
  const std::vector<S>& kernels() const { return kernels_; }
  std::vector<S>& bias() { return bias_; }

  // First-layer models skip the input gradient; nothing consumes it.
  bool needs_input_grad = true;

  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    if (x.rank() != 4 || x.dim(1) != in_channels_)
      throw ShapeError("conv_temporal: input shape " + shape_str(x.shape()) +
                       " does not match kernels (" + std::to_string(filters_) + ", " +
                       std::to_string(in_channels_) + ", 1, " + std::to_string(kernel_) +
                       "): channel extents differ");
    const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int pw = w + kernel_ - 1;
    padded_.assign(static_cast<std::size_t>(b) * in_channels_ * h * pw, S(0));
    const S* xd = x.data();
    for (int bi = 0; bi < b; ++bi)
      for (int c = 0; c < in_channels_; ++c)
        for (int e = 0; e < h; ++e) {
          const S* row = xd + (((static_cast<std::size_t>(bi) * in_channels_ + c) * h + e) * w);
          S* prow = padded_.data() + (((static_cast<std::size_t>(bi) * in_channels_ + c) * h + e) * pw);
          std::memcpy(prow + pad_left_, row, sizeof(S) * static_cast<std::size_t>(w));
        }

    Tensor<S> y({b, filters_, h, w});
    S* yd = y.data();
    for (int bi = 0; bi < b; ++bi)
      for (int e = 0; e < h; ++e)
        for (int c = 0; c < in_channels_; ++c) {
          const S* prow = padded_.data() + (((static_cast<std::size_t>(bi) * in_channels_ + c) * h + e) * pw);
          for (int f = 0; f < filters_; ++f) {
            const S* kf = kernels_.data() + (static_cast<std::size_t>(f) * in_channels_ + c) * kernel_;
            S* yrow = yd + (((static_cast<std::size_t>(bi) * filters_ + f) * h + e) * w);
            detail::corr_acc(prow, kf, yrow, kernel_, w);
          }
        }
    if (with_bias_)
      for (int bi = 0; bi < b; ++bi)
        for (int f = 0; f < filters_; ++f) {
          S* yrow = yd + ((static_cast<std::size_t>(bi) * filters_ + f) * h) * w;
          const S bv = bias_[static_cast<std::size_t>(f)];
          for (int i = 0; i < h * w; ++i) yrow[i] += bv;
        }
    cached_ = mode == Mode::train;
    in_b_ = b;
    in_h_ = h;
    in_w_ = w;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& grad_out) {
    if (!cached_) throw StateError("conv_temporal: backward before train-mode forward");
    const int b = in_b_, h = in_h_, w = in_w_;
    if (grad_out.rank() != 4 || grad_out.dim(0) != b || grad_out.dim(1) != filters_ ||
        grad_out.dim(2) != h || grad_out.dim(3) != w)
      throw ShapeError("conv_temporal: grad shape " + shape_str(grad_out.shape()) + " does not match forward output");
    const int pw = w + kernel_ - 1;
    const S* gd = grad_out.data();

    for (int bi = 0; bi < b; ++bi)
      for (int e = 0; e < h; ++e)
        for (int c = 0; c < in_channels_; ++c) {
          const S* prow = padded_.data() + (((static_cast<std::size_t>(bi) * in_channels_ + c) * h + e) * pw);
          for (int f = 0; f < filters_; ++f) {
            const S* grow = gd + (((static_cast<std::size_t>(bi) * filters_ + f) * h + e) * w);
            S* dk = grad_kernels_.data() + (static_cast<std::size_t>(f) * in_channels_ + c) * kernel_;
            detail::corr_kernel_grad(prow, grow, dk, kernel_, w);
          }
        }
    if (with_bias_)
      for (int f = 0; f < filters_; ++f) {
        S acc = 0;
        for (int bi = 0; bi < b; ++bi)
          for (int e = 0; e < h; ++e) {
            const S* grow = gd + (((static_cast<std::size_t>(bi) * filters_ + f) * h + e) * w);
            for (int t = 0; t < w; ++t) acc += grow[t];
          }
        grad_bias_[static_cast<std::size_t>(f)] += acc;
      }

    Tensor<S> grad_in({b, in_channels_, h, w});
    if (needs_input_grad) {
      // Input gradient is the correlation of the padded output gradient with
      // the flipped kernel; the padding offset swaps left for right.
      std::vector<S> flipped(kernels_.size());
      for (int f = 0; f < filters_; ++f)
        for (int c = 0; c < in_channels_; ++c)
          for (int t = 0; t < kernel_; ++t)
            flipped[(static_cast<std::size_t>(f) * in_channels_ + c) * kernel_ + t] =
                kernels_[(static_cast<std::size_t>(f) * in_channels_ + c) * kernel_ + (kernel_ - 1 - t)];
      std::vector<S> gpad(static_cast<std::size_t>(pw), S(0));
      S* gid = grad_in.data();
      for (int bi = 0; bi < b; ++bi)
        for (int e = 0; e < h; ++e)
          for (int f = 0; f < filters_; ++f) {
            const S* grow = gd + (((static_cast<std::size_t>(bi) * filters_ + f) * h + e) * w);
            std::fill(gpad.begin(), gpad.end(), S(0));
            std::memcpy(gpad.data() + pad_right_, grow, sizeof(S) * static_cast<std::size_t>(w));
            for (int c = 0; c < in_channels_; ++c) {
              const S* kf = flipped.data() + (static_cast<std::size_t>(f) * in_channels_ + c) * kernel_;
              S* drow = gid + (((static_cast<std::size_t>(bi) * in_channels_ + c) * h + e) * w);
              detail::corr_acc(gpad.data(), kf, drow, kernel_, w);
            }
          }
    }
    return grad_in;
  }

  // Replays a cached forward with exactly one kernel element perturbed by
  // delta, writing into a copy of the cached base output. The convolution is
  // linear in its parameters, so this is exact and avoids the full pass.
  void perturbed_output(const Tensor<S>& base_out, std::size_t param_index, S delta, Tensor<S>& out) const {
    if (!cached_) throw StateError("conv_temporal: no cached forward state");
    out = base_out;
    const int f = static_cast<int>(param_index / (static_cast<std::size_t>(in_channels_) * kernel_));
    const int c = static_cast<int>((param_index / kernel_) % static_cast<std::size_t>(in_channels_));
    const int tau = static_cast<int>(param_index % static_cast<std::size_t>(kernel_));
    const int pw = in_w_ + kernel_ - 1;
    S* od = out.data();
    for (int bi = 0; bi < in_b_; ++bi)
      for (int e = 0; e < in_h_; ++e) {
        const S* prow = padded_.data() + (((static_cast<std::size_t>(bi) * in_channels_ + c) * in_h_ + e) * pw) + tau;
        S* orow = od + (((static_cast<std::size_t>(bi) * filters_ + f) * in_h_ + e) * in_w_);
        detail::axpy(delta, prow, orow, in_w_);
      }
  }

  template <typename F>
  void for_each_param(F&& fn) {
    fn("kernels", kernels_, &grad_kernels_, true);
    if (with_bias_) fn("bias", bias_, &grad_bias_, true);
  }

  void zero_grads() {
    std::fill(grad_kernels_.begin(), grad_kernels_.end(), S(0));
    std::fill(grad_bias_.begin(), grad_bias_.end(), S(0));
  }

 private:
  int filters_, in_channels_, kernel_, pad_left_, pad_right_;
  bool with_bias_;
  std::vector<S> kernels_, bias_, grad_kernels_, grad_bias_;
  std::vector<S> padded_;
  int in_b_ = 0, in_h_ = 0, in_w_ = 0;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// Depthwise convolution along the electrode axis, valid padding. The kernel
// spans the full electrode extent, collapsing it to 1; output channel
// c * M + m depends only on input channel c.
template <typename S>
class DepthwiseConv {
 public:
  DepthwiseConv(int in_channels, int multiplier, int kernel_h)
      : in_channels_(in_channels),
        multiplier_(multiplier),
        kernel_h_(kernel_h),
        kernels_(static_cast<std::size_t>(in_channels) * multiplier * kernel_h, S(0)),
        grad_kernels_(kernels_.size(), S(0)) {
    if (multiplier < 1) throw ConfigError("depthwise_conv: depth multiplier must be >= 1");
  }

  int out_channels() const { return in_channels_ * multiplier_; }
  std::vector<S>& kernels() { return kernels_; }
  const std::vector<S>& kernels() const { return kernels_; }

  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    if (x.rank() != 4 || x.dim(1) != in_channels_)
      throw ShapeError("depthwise_conv: input shape " + shape_str(x.shape()) + " does not match kernels (" +
                       std::to_string(in_channels_) + ", " + std::to_string(multiplier_) + ", " +
                       std::to_string(kernel_h_) + ", 1): channel extents differ");
    if (x.dim(2) != kernel_h_)
      throw ShapeError("depthwise_conv: kernel electrode extent " + std::to_string(kernel_h_) +
                       " does not equal input electrode extent " + std::to_string(x.dim(2)));
    const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
    Tensor<S> y({b, out_channels(), 1, w});
    const S* xd = x.data();
    S* yd = y.data();
    for (int bi = 0; bi < b; ++bi)
      for (int c = 0; c < in_channels_; ++c)
        for (int m = 0; m < multiplier_; ++m) {
          S* yrow = yd + (static_cast<std::size_t>(bi) * out_channels() + c * multiplier_ + m) * w;
          const S* k = kernels_.data() + (static_cast<std::size_t>(c) * multiplier_ + m) * kernel_h_;
          for (int e = 0; e < h; ++e) {
            const S* xrow = xd + ((static_cast<std::size_t>(bi) * in_channels_ + c) * h + e) * w;
            detail::axpy(k[e], xrow, yrow, w);
          }
        }
    if (mode == Mode::train) {
      cache_ = x;
      cached_ = true;
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& grad_out) {
    if (!cached_) throw StateError("depthwise_conv: backward before train-mode forward");
    const int b = cache_.dim(0), h = cache_.dim(2), w = cache_.dim(3);
    const S* xd = cache_.data();
    const S* gd = grad_out.data();
    Tensor<S> grad_in({b, in_channels_, h, w});
    S* gid = grad_in.data();
    for (int bi = 0; bi < b; ++bi)
      for (int c = 0; c < in_channels_; ++c)
        for (int m = 0; m < multiplier_; ++m) {
          const S* grow = gd + (static_cast<std::size_t>(bi) * out_channels() + c * multiplier_ + m) * w;
          const S* k = kernels_.data() + (static_cast<std::size_t>(c) * multiplier_ + m) * kernel_h_;
          S* dk = grad_kernels_.data() + (static_cast<std::size_t>(c) * multiplier_ + m) * kernel_h_;
          for (int e = 0; e < h; ++e) {
            const S* xrow = xd + ((static_cast<std::size_t>(bi) * in_channels_ + c) * h + e) * w;
            S* drow = gid + ((static_cast<std::size_t>(bi) * in_channels_ + c) * h + e) * w;
            dk[e] += detail::dot(grow, xrow, w);
            detail::axpy(k[e], grow, drow, w);
          }
        }
    return grad_in;
  }

  template <typename F>
  void for_each_param(F&& fn) {
    fn("kernels", kernels_, &grad_kernels_, true);
  }

  void zero_grads() { std::fill(grad_kernels_.begin(), grad_kernels_.end(), S(0)); }

 private:
  int in_channels_, multiplier_, kernel_h_;
  std::vector<S> kernels_, grad_kernels_;
  Tensor<S> cache_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// Separable convolution: per-channel temporal convolution (length-preserving)
// followed by a pointwise 1x1 channel mix.
template <typename S>
class SeparableConv {
 public:
  SeparableConv(int in_channels, int filters, int kernel)
      : in_channels_(in_channels),
        filters_(filters),
        kernel_(kernel),
        pad_left_((kernel - 1) / 2),
        pad_right_(kernel - 1 - (kernel - 1) / 2),
        depth_kernels_(static_cast<std::size_t>(in_channels) * kernel, S(0)),
        point_weights_(static_cast<std::size_t>(filters) * in_channels, S(0)),
        grad_depth_(depth_kernels_.size(), S(0)),
        grad_point_(point_weights_.size(), S(0)) {}

  std::vector<S>& depth_kernels() { return depth_kernels_; }
  std::vector<S>& point_weights() { return point_weights_; }

  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    if (x.rank() != 4 || x.dim(1) != in_channels_)
      throw ShapeError("separable_conv: input shape " + shape_str(x.shape()) +
                       " does not match point_weights (" + std::to_string(filters_) + ", " +
                       std::to_string(in_channels_) + "): channel extents differ");
    if (x.dim(2) != 1)
      throw ShapeError("separable_conv: electrode axis must be collapsed to 1, got " + shape_str(x.shape()));
    const int b = x.dim(0), w = x.dim(3);
    const int pw = w + kernel_ - 1;
    padded_.assign(static_cast<std::size_t>(b) * in_channels_ * pw, S(0));
    mid_.assign(static_cast<std::size_t>(b) * in_channels_ * w, S(0));
    const S* xd = x.data();
    for (int bi = 0; bi < b; ++bi)
      for (int c = 0; c < in_channels_; ++c) {
        const S* xrow = xd + (static_cast<std::size_t>(bi) * in_channels_ + c) * w;
        S* prow = padded_.data() + (static_cast<std::size_t>(bi) * in_channels_ + c) * pw;
        std::memcpy(prow + pad_left_, xrow, sizeof(S) * static_cast<std::size_t>(w));
        S* mrow = mid_.data() + (static_cast<std::size_t>(bi) * in_channels_ + c) * w;
        detail::corr_acc(prow, depth_kernels_.data() + static_cast<std::size_t>(c) * kernel_, mrow, kernel_, w);
      }
    Tensor<S> y({b, filters_, 1, w});
    S* yd = y.data();
    for (int bi = 0; bi < b; ++bi)
      for (int f = 0; f < filters_; ++f) {
        S* yrow = yd + (static_cast<std::size_t>(bi) * filters_ + f) * w;
        for (int c = 0; c < in_channels_; ++c) {
          const S* mrow = mid_.data() + (static_cast<std::size_t>(bi) * in_channels_ + c) * w;
          detail::axpy(point_weights_[static_cast<std::size_t>(f) * in_channels_ + c], mrow, yrow, w);
        }
      }
    cached_ = mode == Mode::train;
    in_b_ = b;
    in_w_ = w;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& grad_out) {
    if (!cached_) throw StateError("separable_conv: backward before train-mode forward");
    const int b = in_b_, w = in_w_;
    const int pw = w + kernel_ - 1;
    const S* gd = grad_out.data();

    // Pointwise stage.
    std::vector<S> dmid(static_cast<std::size_t>(b) * in_channels_ * w, S(0));
    for (int bi = 0; bi < b; ++bi)
      for (int f = 0; f < filters_; ++f) {
        const S* grow = gd + (static_cast<std::size_t>(bi) * filters_ + f) * w;
        for (int c = 0; c < in_channels_; ++c) {
          const S* mrow = mid_.data() + (static_cast<std::size_t>(bi) * in_channels_ + c) * w;
          grad_point_[static_cast<std::size_t>(f) * in_channels_ + c] += detail::dot(grow, mrow, w);
          detail::axpy(point_weights_[static_cast<std::size_t>(f) * in_channels_ + c], grow,
                       dmid.data() + (static_cast<std::size_t>(bi) * in_channels_ + c) * w, w);
        }
      }

    // Depthwise stage.
    Tensor<S> grad_in({b, in_channels_, 1, w});
    S* gid = grad_in.data();
    std::vector<S> gpad(static_cast<std::size_t>(pw), S(0));
    std::vector<S> flip(static_cast<std::size_t>(kernel_));
    for (int bi = 0; bi < b; ++bi)
      for (int c = 0; c < in_channels_; ++c) {
        const S* prow = padded_.data() + (static_cast<std::size_t>(bi) * in_channels_ + c) * pw;
        const S* dm = dmid.data() + (static_cast<std::size_t>(bi) * in_channels_ + c) * w;
        S* dk = grad_depth_.data() + static_cast<std::size_t>(c) * kernel_;
        detail::corr_kernel_grad(prow, dm, dk, kernel_, w);

        const S* k = depth_kernels_.data() + static_cast<std::size_t>(c) * kernel_;
        for (int t = 0; t < kernel_; ++t) flip[static_cast<std::size_t>(t)] = k[kernel_ - 1 - t];
        std::fill(gpad.begin(), gpad.end(), S(0));
        std::memcpy(gpad.data() + pad_right_, dm, sizeof(S) * static_cast<std::size_t>(w));
        detail::corr_acc(gpad.data(), flip.data(), gid + (static_cast<std::size_t>(bi) * in_channels_ + c) * w,
                         kernel_, w);
      }
    return grad_in;
  }

  template <typename F>
  void for_each_param(F&& fn) {
    fn("depth_kernels", depth_kernels_, &grad_depth_, true);
    fn("point_weights", point_weights_, &grad_point_, true);
  }

  void zero_grads() {
    std::fill(grad_depth_.begin(), grad_depth_.end(), S(0));
    std::fill(grad_point_.begin(), grad_point_.end(), S(0));
  }

 private:
  int in_channels_, filters_, kernel_, pad_left_, pad_right_;
  std::vector<S> depth_kernels_, point_weights_, grad_depth_, grad_point_;
  std::vector<S> padded_, mid_;
  int in_b_ = 0, in_w_ = 0;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// Batch normalization over all non-channel axes. Train mode normalizes by
// batch statistics (biased variance) and updates the moving statistics as
// moving <- momentum * moving + (1 - momentum) * batch; infer mode is a pure
// affine map built from the moving statistics.
template <typename S>
class BatchNorm {
 public:
  explicit BatchNorm(int channels, double epsilon = 1e-3, double momentum = 0.99)
      : channels_(channels),
        epsilon_(epsilon),
        momentum_(momentum),
        gamma_(static_cast<std::size_t>(channels), S(1)),
        beta_(static_cast<std::size_t>(channels), S(0)),
        moving_mean_(static_cast<std::size_t>(channels), S(0)),
        moving_var_(static_cast<std::size_t>(channels), S(1)),
        grad_gamma_(static_cast<std::size_t>(channels), S(0)),
        grad_beta_(static_cast<std::size_t>(channels), S(0)) {
    if (epsilon <= 0) throw ConfigError("batch_norm: epsilon must be positive");
    if (momentum <= 0 || momentum >= 1) throw ConfigError("batch_norm: momentum must be in (0,1)");
  }

  std::vector<S>& gamma() { return gamma_; }
  std::vector<S>& beta() { return beta_; }
  std::vector<S>& moving_mean() { return moving_mean_; }
  std::vector<S>& moving_var() { return moving_var_; }

  // Index within an owning stack, for error messages.
  int layer_index = -1;

  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    if (x.rank() < 2 || x.dim(1) != channels_)
      throw ShapeError("batch_norm: input shape " + shape_str(x.shape()) + " does not carry " +
                       std::to_string(channels_) + " channels on axis 1");
    const int b = x.dim(0);
    int spat = 1;
    for (int i = 2; i < x.rank(); ++i) spat *= x.dim(i);
    const std::int64_t n = static_cast<std::int64_t>(b) * spat;
    Tensor<S> y(x.shape());
    const S* xd = x.data();
    S* yd = y.data();

    if (mode == Mode::infer) {
      for (int c = 0; c < channels_; ++c) {
        const S scale = gamma_[c] / static_cast<S>(std::sqrt(static_cast<double>(moving_var_[c]) + epsilon_));
        const S shift = beta_[c] - scale * moving_mean_[c];
        for (int bi = 0; bi < b; ++bi) {
          const S* xrow = xd + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
          S* yrow = yd + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
#pragma omp simd
          for (int t = 0; t < spat; ++t) yrow[t] = scale * xrow[t] + shift;
        }
      }
      return y;
    }

    if (!x.all_finite())
      throw NumericError("batch_norm" + (layer_index >= 0 ? " (layer " + std::to_string(layer_index) + ")" : "") +
                         ": non-finite input");
    xhat_.assign(static_cast<std::size_t>(x.numel()), S(0));
    inv_std_.assign(static_cast<std::size_t>(channels_), S(0));
    for (int c = 0; c < channels_; ++c) {
      double sum = 0, sq = 0;
      for (int bi = 0; bi < b; ++bi) {
        const S* xrow = xd + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
#pragma omp simd reduction(+ : sum, sq)
        for (int t = 0; t < spat; ++t) {
          const double v = static_cast<double>(xrow[t]);
          sum += v;
          sq += v * v;
        }
      }
      const double mean = sum / static_cast<double>(n);
      double var = sq / static_cast<double>(n) - mean * mean;
      if (var < 0) var = 0;  // cancellation guard
      const double inv = 1.0 / std::sqrt(var + epsilon_);
      inv_std_[c] = static_cast<S>(inv);
      const S mu = static_cast<S>(mean);
      for (int bi = 0; bi < b; ++bi) {
        const S* xrow = xd + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
        S* hrow = xhat_.data() + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
        S* yrow = yd + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
#pragma omp simd
        for (int t = 0; t < spat; ++t) {
          const S h = (xrow[t] - mu) * inv_std_[c];
          hrow[t] = h;
          yrow[t] = gamma_[c] * h + beta_[c];
        }
      }
      moving_mean_[c] = static_cast<S>(momentum_ * static_cast<double>(moving_mean_[c]) + (1.0 - momentum_) * mean);
      moving_var_[c] = static_cast<S>(momentum_ * static_cast<double>(moving_var_[c]) + (1.0 - momentum_) * var);
    }
    cached_ = true;
    in_b_ = b;
    in_spat_ = spat;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& grad_out) {
    if (!cached_) throw StateError("batch_norm: backward before train-mode forward");
    const int b = in_b_, spat = in_spat_;
    const std::int64_t n = static_cast<std::int64_t>(b) * spat;
    Tensor<S> grad_in(grad_out.shape());
    const S* gd = grad_out.data();
    S* gid = grad_in.data();
    for (int c = 0; c < channels_; ++c) {
      double sum_g = 0, sum_gh = 0;
      for (int bi = 0; bi < b; ++bi) {
        const S* grow = gd + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
        const S* hrow = xhat_.data() + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
#pragma omp simd reduction(+ : sum_g, sum_gh)
        for (int t = 0; t < spat; ++t) {
          sum_g += static_cast<double>(grow[t]);
          sum_gh += static_cast<double>(grow[t]) * static_cast<double>(hrow[t]);
        }
      }
      grad_beta_[c] += static_cast<S>(sum_g);
      grad_gamma_[c] += static_cast<S>(sum_gh);
      const S k1 = static_cast<S>(sum_g / static_cast<double>(n));
      const S k2 = static_cast<S>(sum_gh / static_cast<double>(n));
      const S scale = gamma_[c] * inv_std_[c];
      for (int bi = 0; bi < b; ++bi) {
        const S* grow = gd + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
        const S* hrow = xhat_.data() + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
        S* drow = gid + (static_cast<std::size_t>(bi) * channels_ + c) * spat;
#pragma omp simd
        for (int t = 0; t < spat; ++t) drow[t] = scale * (grow[t] - k1 - hrow[t] * k2);
      }
    }
    return grad_in;
  }

  template <typename F>
  void for_each_param(F&& fn) {
    fn("gamma", gamma_, &grad_gamma_, true);
    fn("beta", beta_, &grad_beta_, true);
    fn("moving_mean", moving_mean_, nullptr, false);
    fn("moving_var", moving_var_, nullptr, false);
  }

  void zero_grads() {
    std::fill(grad_gamma_.begin(), grad_gamma_.end(), S(0));
    std::fill(grad_beta_.begin(), grad_beta_.end(), S(0));
  }

 private:
  int channels_;
  double epsilon_, momentum_;
  std::vector<S> gamma_, beta_, moving_mean_, moving_var_, grad_gamma_, grad_beta_;
  std::vector<S> xhat_, inv_std_;
  int in_b_ = 0, in_spat_ = 0;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// ELU with unit alpha: x for x >= 0, expm1(x) below.
template <typename S>
class Elu {
 public:
  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    Tensor<S> y(x.shape());
    const std::size_t n = static_cast<std::size_t>(x.numel());
    if (mode == Mode::train) deriv_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const S v = x[i];
      if (v >= S(0)) {
        y[i] = v;
        if (mode == Mode::train) deriv_[i] = S(1);
      } else {
        const S e = std::expm1(v);
        y[i] = e;
        if (mode == Mode::train) deriv_[i] = e + S(1);  // exp(v)
      }
    }
    cached_ = mode == Mode::train;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& grad_out) {
    if (!cached_ || deriv_.size() != static_cast<std::size_t>(grad_out.numel()))
      throw StateError("elu: backward before train-mode forward");
    Tensor<S> grad_in(grad_out.shape());
    for (std::size_t i = 0; i < deriv_.size(); ++i) grad_in[i] = grad_out[i] * deriv_[i];
    return grad_in;
  }

 private:
  std::vector<S> deriv_;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// Average pooling along the time axis with stride = pool size; the trailing
// remainder is dropped (floor semantics).
template <typename S>
class AvgPool {
 public:
  explicit AvgPool(int pool) : pool_(pool) {
    if (pool < 1) throw ConfigError("average_pool: pool size must be >= 1");
  }

  int pool() const { return pool_; }

  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    const int w = x.dim(x.rank() - 1);
    if (pool_ > w)
      throw ShapeError("average_pool: pool size " + std::to_string(pool_) + " exceeds time extent " +
                       std::to_string(w) + "; output would be empty");
    const int wp = w / pool_;
    std::vector<int> out_shape = x.shape();
    out_shape.back() = wp;
    Tensor<S> y(out_shape);
    const std::int64_t rows = x.numel() / w;
    const S inv = S(1) / static_cast<S>(pool_);
    for (std::int64_t r = 0; r < rows; ++r) {
      const S* xrow = x.data() + r * w;
      S* yrow = y.data() + r * wp;
      for (int t = 0; t < wp; ++t) {
        S acc = 0;
        for (int j = 0; j < pool_; ++j) acc += xrow[t * pool_ + j];
        yrow[t] = acc * inv;
      }
    }
    if (mode == Mode::train) {
      in_w_ = w;
      cached_ = true;
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& grad_out) {
    if (!cached_) throw StateError("average_pool: backward before train-mode forward");
    const int wp = grad_out.dim(grad_out.rank() - 1);
    std::vector<int> in_shape = grad_out.shape();
    in_shape.back() = in_w_;
    Tensor<S> grad_in(in_shape);
    const std::int64_t rows = grad_out.numel() / wp;
    const S inv = S(1) / static_cast<S>(pool_);
    for (std::int64_t r = 0; r < rows; ++r) {
      const S* grow = grad_out.data() + r * wp;
      S* drow = grad_in.data() + r * in_w_;
      for (int t = 0; t < wp; ++t) {
        const S v = grow[t] * inv;
        for (int j = 0; j < pool_; ++j) drow[t * pool_ + j] = v;
      }
      // remainder samples received no forward contribution
      for (int t = wp * pool_; t < in_w_; ++t) drow[t] = S(0);
    }
    return grad_in;
  }

 private:
  int pool_;
  int in_w_ = 0;
  bool cached_ = false;
};

// ---------------------------------------------------------------------------
// Inverted dropout: train mode zeroes each element with probability rate and
// scales survivors by 1/(1-rate); infer mode is the bitwise identity.
template <typename S>
class Dropout {
 public:
  explicit Dropout(double rate, std::uint64_t seed = 0) : rate_(rate), seed_(seed), rng_(seed) {
    if (rate < 0.0 || rate >= 1.0)
      throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }

  double rate() const { return rate_; }

  void set_seed(std::uint64_t seed) {
    seed_ = seed;
    rng_ = Rng(seed);
  }

  // Restarts the mask stream; identical masks will be drawn on the next
  // forward passes. Gradient checking relies on this.
  void reseed() { rng_ = Rng(seed_); }

  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    if (mode == Mode::infer || rate_ == 0.0) {
      cached_ = mode == Mode::train;
      identity_ = true;
      return x;
    }
    const std::size_t n = static_cast<std::size_t>(x.numel());
    mask_.resize(n);
    const S scale = static_cast<S>(1.0 / (1.0 - rate_));
    Tensor<S> y(x.shape());
    for (std::size_t i = 0; i < n; ++i) {
      mask_[i] = rng_.bernoulli(rate_) ? S(0) : scale;
      y[i] = x[i] * mask_[i];
    }
    cached_ = true;
    identity_ = false;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& grad_out) {
    if (!cached_) throw StateError("dropout: backward before train-mode forward");
    if (identity_) return grad_out;
    Tensor<S> grad_in(grad_out.shape());
    for (std::size_t i = 0; i < mask_.size(); ++i) grad_in[i] = grad_out[i] * mask_[i];
    return grad_in;
  }

 private:
  double rate_;
  std::uint64_t seed_;
  Rng rng_;
  std::vector<S> mask_;
  bool cached_ = false, identity_ = true;
};

// ---------------------------------------------------------------------------
// Fully connected layer with a sigmoid output, one unit per electrode.
template <typename S>
class DenseSigmoid {
 public:
  DenseSigmoid(int in_features, int out_features)
      : in_features_(in_features),
        out_features_(out_features),
        weights_(static_cast<std::size_t>(out_features) * in_features, S(0)),
        bias_(static_cast<std::size_t>(out_features), S(0)),
        grad_weights_(weights_.size(), S(0)),
        grad_bias_(bias_.size(), S(0)) {}

  int in_features() const { return in_features_; }
  int out_features() const { return out_features_; }
  std::vector<S>& weights() { return weights_; }
  std::vector<S>& bias() { return bias_; }

  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    if (x.rank() != 2 || x.dim(1) != in_features_)
      throw ShapeError("dense_sigmoid: input shape " + shape_str(x.shape()) + " does not match weights (" +
                       std::to_string(out_features_) + ", " + std::to_string(in_features_) + ")");
    const int b = x.dim(0);
    Tensor<S> p({b, out_features_});
    for (int bi = 0; bi < b; ++bi) {
      const S* xrow = x.data() + static_cast<std::size_t>(bi) * in_features_;
      S* prow = p.data() + static_cast<std::size_t>(bi) * out_features_;
      for (int o = 0; o < out_features_; ++o) {
        const S z = detail::dot(weights_.data() + static_cast<std::size_t>(o) * in_features_, xrow, in_features_) +
                    bias_[static_cast<std::size_t>(o)];
        prow[o] = detail::sigmoid(z);
      }
    }
    if (mode == Mode::train) {
      in_cache_ = x;
      prob_cache_ = p;
      cached_ = true;
    }
    return p;
  }

  // grad_out is dL/dprob; the sigmoid derivative is applied here.
  Tensor<S> backward(const Tensor<S>& grad_out) {
    if (!cached_) throw StateError("dense_sigmoid: backward before train-mode forward");
    const int b = in_cache_.dim(0);
    Tensor<S> grad_in({b, in_features_});
    grad_in.zero();
    for (int bi = 0; bi < b; ++bi) {
      const S* xrow = in_cache_.data() + static_cast<std::size_t>(bi) * in_features_;
      const S* prow = prob_cache_.data() + static_cast<std::size_t>(bi) * out_features_;
      const S* grow = grad_out.data() + static_cast<std::size_t>(bi) * out_features_;
      S* drow = grad_in.data() + static_cast<std::size_t>(bi) * in_features_;
      for (int o = 0; o < out_features_; ++o) {
        const S dz = grow[o] * prow[o] * (S(1) - prow[o]);
        grad_bias_[static_cast<std::size_t>(o)] += dz;
        detail::axpy(dz, xrow, grad_weights_.data() + static_cast<std::size_t>(o) * in_features_, in_features_);
        detail::axpy(dz, weights_.data() + static_cast<std::size_t>(o) * in_features_, drow, in_features_);
      }
    }
    return grad_in;
  }

  template <typename F>
  void for_each_param(F&& fn) {
    fn("weights", weights_, &grad_weights_, true);
    fn("bias", bias_, &grad_bias_, true);
  }

  void zero_grads() {
    std::fill(grad_weights_.begin(), grad_weights_.end(), S(0));
    std::fill(grad_bias_.begin(), grad_bias_.end(), S(0));
  }

 private:
  int in_features_, out_features_;
  std::vector<S> weights_, bias_, grad_weights_, grad_bias_;
  Tensor<S> in_cache_, prob_cache_;
  bool cached_ = false;
};

}  // namespace meegnet
