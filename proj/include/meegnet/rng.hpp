#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace meegnet {

// Deterministic random source. mt19937_64 produces an identical bit stream on
// every platform; the distribution transforms below are hand-rolled because
// the <random> distribution classes are implementation-defined and would break
// the bit-identical reproducibility contract across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n), n >= 1. Rejection-free modulo is fine here: n is tiny
  // relative to 2^64 and reproducibility matters more than the ~2^-50 bias.
  std::uint64_t uniform_index(std::uint64_t n) { return eng_() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller, cached in pairs.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // splitmix64 finalizer; used to derive independent named streams from one
  // base seed so that e.g. dropout draws never alias shuffle draws.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t derive(std::uint64_t base, std::uint64_t stream) {
    return mix(base ^ mix(stream));
  }

  static std::uint64_t derive(std::uint64_t base, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return derive(base, h);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Seeded Fisher-Yates shuffle (std::shuffle's ordering is unspecified).
template <typename Vec>
void shuffle_in_place(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace meegnet
