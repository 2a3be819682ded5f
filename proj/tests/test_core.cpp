#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "meegnet/fft.hpp"
#include "meegnet/rng.hpp"
#include "meegnet/tensor.hpp"

using namespace meegnet;

TEST_CASE("tensor shapes and indexing") {
  Tensor<double> t({2, 3, 4, 5});
  REQUIRE(t.rank() == 4);
  REQUIRE(t.numel() == 120);
  REQUIRE(t.shape() == std::vector<int>{2, 3, 4, 5});

  // freshly constructed tensors are zero-filled
  REQUIRE(std::all_of(t.data(), t.data() + t.numel(), [](double v) { return v == 0.0; }));

  t.at(1, 2, 3, 4) = 7.5;
  REQUIRE(t.at(1, 2, 3, 4) == 7.5);
  REQUIRE(t.data()[t.numel() - 1] == 7.5);

  // row-major layout: last axis is contiguous
  t.at(0, 0, 0, 1) = 2.0;
  REQUIRE(t.data()[1] == 2.0);
}

TEST_CASE("tensor lower ranks default trailing axes") {
  Tensor<float> v({4});
  v.at(2) = 1.0f;
  REQUIRE(v.at(2, 0, 0, 0) == 1.0f);
  REQUIRE(v.numel() == 4);

  Tensor<float> m({2, 3});
  m.at(1, 2) = 5.0f;
  REQUIRE(m.data()[5] == 5.0f);
}

TEST_CASE("tensor rejects invalid shapes") {
  REQUIRE_THROWS_AS(Tensor<double>(std::vector<int>{}), ShapeError);
  REQUIRE_THROWS_AS(Tensor<double>({2, 0}), ShapeError);
  REQUIRE_THROWS_AS(Tensor<double>({1, 2, 3, 4, 5}), ShapeError);
  REQUIRE_THROWS_AS(Tensor<double>({-1, 3}), ShapeError);
}

TEST_CASE("shape_str formats dimensions") {
  REQUIRE(shape_str({2, 3}) == "(2, 3)");
  REQUIRE(shape_str({7}) == "(7)");
}

TEST_CASE("rng streams are deterministic") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
  // different seeds diverge
  Rng a2(42);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) any_diff |= (a2.next_u64() != c.next_u64());
  REQUIRE(any_diff);
}

TEST_CASE("rng derive separates named streams") {
  const std::uint64_t base = 1234;
  REQUIRE(Rng::derive(base, "init") != Rng::derive(base, "epoch.0"));
  REQUIRE(Rng::derive(base, "epoch.0") != Rng::derive(base, "epoch.1"));
  REQUIRE(Rng::derive(base, 0) != Rng::derive(base, 1));
  REQUIRE(Rng::derive(base, "init") == Rng::derive(base, "init"));
  REQUIRE(Rng::derive(base, "init") != Rng::derive(base + 1, "init"));
}

TEST_CASE("rng uniform stays in [0,1) with sane moments") {
  Rng r(7);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  REQUIRE(std::abs(mean - 0.5) < 0.01);
  REQUIRE(std::abs(var - 1.0 / 12.0) < 0.01);
}

TEST_CASE("rng normal has unit variance") {
  Rng r(11);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  REQUIRE(std::abs(mean) < 0.02);
  REQUIRE(std::abs(sq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("rng bernoulli frequency tracks p") {
  Rng r(3);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += r.bernoulli(0.25) ? 1 : 0;
  REQUIRE(std::abs(hits / double(n) - 0.25) < 0.01);
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  Rng r1(99), r2(99), r3(100);
  shuffle_in_place(v, r1);
  shuffle_in_place(w, r2);
  REQUIRE(v == w);  // same seed, same order
  REQUIRE(std::set<int>(v.begin(), v.end()).size() == 50);  // still a permutation

  auto u = w;
  shuffle_in_place(u, r3);
  REQUIRE(u != v);  // different seed reorders
}

TEST_CASE("fft round trips and rejects bad lengths") {
  Rng r(5);
  std::vector<std::complex<double>> a(256);
  for (auto& x : a) x = {r.normal(), r.normal()};
  auto b = a;
  fft_inplace(b, false);
  fft_inplace(b, true);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(std::abs(b[i].real() - a[i].real()) < 1e-10);
    REQUIRE(std::abs(b[i].imag() - a[i].imag()) < 1e-10);
  }

  std::vector<std::complex<double>> bad(3);
  REQUIRE_THROWS_AS(fft_inplace(bad, false), ConfigError);
}

TEST_CASE("power spectrum peaks at the injected tone") {
  const int n = 500, rate = 500;
  const double hz = 40.0;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = std::sin(2.0 * 3.14159265358979323846 * hz * i / rate);
  auto p = power_spectrum(x);
  REQUIRE(p.size() == next_pow2(n) / 2 + 1);
  const std::size_t peak = static_cast<std::size_t>(
      std::max_element(p.begin(), p.end()) - p.begin());
  const double peak_hz = double(peak) * rate / double(next_pow2(n));
  REQUIRE(std::abs(peak_hz - hz) < 1.0);
}

TEST_CASE("next_pow2") {
  REQUIRE(next_pow2(1) == 1);
  REQUIRE(next_pow2(500) == 512);
  REQUIRE(next_pow2(512) == 512);
  REQUIRE(next_pow2(513) == 1024);
}
