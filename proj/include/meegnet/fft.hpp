#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "meegnet/common.hpp"

namespace meegnet {

// Iterative radix-2 FFT, power-of-two lengths. Used by the synthetic-signal
// spectral shaping and by periodogram checks; accuracy and determinism matter
// here, not peak throughput.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ConfigError("fft length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * 3.14159265358979323846 / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// One-sided power spectrum of a real signal, zero-padded to the next power of
// two. Bin k corresponds to frequency k * sample_rate / padded_length.
inline std::vector<double> power_spectrum(const std::vector<double>& x) {
  const std::size_t n2 = next_pow2(x.size());
  std::vector<std::complex<double>> a(n2);
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i];
  fft_inplace(a, false);
  std::vector<double> p(n2 / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(a[k]);
  return p;
}

}  // namespace meegnet
