#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "meegnet/checkpoint.hpp"
#include "meegnet/model.hpp"
#include "meegnet/rng.hpp"

using namespace meegnet;
namespace fs = std::filesystem;

namespace {

Tensor<double> random_batch(const ModelConfig& cfg, int b, std::uint64_t seed) {
  Tensor<double> x({b, 1, cfg.electrodes, cfg.samples_per_window});
  Rng rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.numel()); ++i) x[i] = rng.normal();
  return x;
}

fs::path temp_file(const char* name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("parameter counts for the default and small-kernel configs") {
  Model<float> model{ModelConfig{}};
  REQUIRE(model.parameter_count() == 6784);
  REQUIRE(model.parameter_count(/*trainable_only=*/true) == 6704);

  ModelConfig small;
  small.temporal_kernel = 10;
  Model<float> small_model{small};
  REQUIRE(small_model.parameter_count() == 4864);
}

TEST_CASE("per-tensor breakdown matches independently computed sizes") {
  Model<double> model{ModelConfig{}};
  // expected sizes derived from the config arithmetic, not from the layers
  const std::vector<std::pair<std::string, std::int64_t>> expected = {
      {"conv_temporal.kernels", 8 * 250},
      {"batch_norm_1.gamma", 8},
      {"batch_norm_1.beta", 8},
      {"batch_norm_1.moving_mean", 8},
      {"batch_norm_1.moving_var", 8},
      {"depthwise_conv.kernels", 8 * 2 * 16},
      {"batch_norm_2.gamma", 16},
      {"batch_norm_2.beta", 16},
      {"batch_norm_2.moving_mean", 16},
      {"batch_norm_2.moving_var", 16},
      {"separable_conv.depth_kernels", 16 * 16},
      {"separable_conv.point_weights", 16 * 16},
      {"batch_norm_3.gamma", 16},
      {"batch_norm_3.beta", 16},
      {"batch_norm_3.moving_mean", 16},
      {"batch_norm_3.moving_var", 16},
      {"dense_sigmoid.weights", 16 * 240},
      {"dense_sigmoid.bias", 16},
  };
  std::size_t i = 0;
  model.visit_params([&](const std::string& name, std::vector<double>& v, std::vector<double>*, bool) {
    REQUIRE(i < expected.size());
    CHECK(name == expected[i].first);
    CHECK(static_cast<std::int64_t>(v.size()) == expected[i].second);
    ++i;
  });
  REQUIRE(i == expected.size());

  // inventory offsets are the running sums of those sizes
  const auto inv = model.param_inventory();
  REQUIRE(inv.size() == expected.size());
  std::int64_t off = 0;
  for (std::size_t r = 0; r < inv.size(); ++r) {
    CHECK(inv[r].name == expected[r].first);
    CHECK(inv[r].offset == off);
    std::int64_t n = 1;
    for (int d : inv[r].shape) n *= d;
    CHECK(n == expected[r].second);
    off += n;
  }
  REQUIRE(off == 6784);
}

TEST_CASE("layer summary lists the full stack with its shapes") {
  Model<float> model{ModelConfig{}};
  const auto rows = model.layer_summary();
  REQUIRE(rows.size() == 14);

  const std::vector<std::pair<std::string, std::vector<int>>> expected = {
      {"conv_temporal", {1, 8, 16, 500}},
      {"batch_norm", {1, 8, 16, 500}},
      {"depthwise_conv", {1, 16, 1, 500}},
      {"batch_norm", {1, 16, 1, 500}},
      {"elu", {1, 16, 1, 500}},
      {"average_pool", {1, 16, 1, 125}},
      {"dropout", {1, 16, 1, 125}},
      {"separable_conv", {1, 16, 1, 125}},
      {"batch_norm", {1, 16, 1, 125}},
      {"elu", {1, 16, 1, 125}},
      {"average_pool", {1, 16, 1, 15}},
      {"dropout", {1, 16, 1, 15}},
      {"flatten", {1, 240}},
      {"dense_sigmoid", {1, 16}},
  };
  std::int64_t total = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].name == expected[i].first);
    CHECK(rows[i].output_shape == expected[i].second);
    total += rows[i].param_count;
  }
  REQUIRE(total == 6784);
}

TEST_CASE("forward maps a window batch to per-electrode probabilities for every kernel size") {
  for (int kernel : {10, 50, 125, 250}) {
    ModelConfig cfg;
    cfg.temporal_kernel = kernel;
    Model<double> model(cfg);
    model.init_params(1);
    model.set_dropout_seed(2);
    auto x = random_batch(cfg, 3, 3);

    for (Mode mode : {Mode::infer, Mode::train}) {
      auto probs = model.forward(x, mode);
      REQUIRE(probs.shape() == std::vector<int>{3, 16});
      for (std::size_t i = 0; i < static_cast<std::size_t>(probs.numel()); ++i) {
        REQUIRE(probs[i] > 0.0);
        REQUIRE(probs[i] < 1.0);
      }
    }
  }
}

TEST_CASE("all-zero parameters yield exactly 0.5 everywhere") {
  ModelConfig cfg;
  Model<double> model(cfg);
  model.visit_params([](const std::string&, std::vector<double>& v, std::vector<double>*, bool) {
    std::fill(v.begin(), v.end(), 0.0);
  });
  auto probs = model.forward(random_batch(cfg, 2, 9), Mode::infer);
  for (std::size_t i = 0; i < static_cast<std::size_t>(probs.numel()); ++i) REQUIRE(probs[i] == 0.5);
}

TEST_CASE("infer-mode rows are independent of their batch") {
  ModelConfig cfg;
  Model<double> model(cfg);
  model.init_params(17);
  auto x = random_batch(cfg, 2, 18);

  auto both = model.forward(x, Mode::infer);
  for (int row = 0; row < 2; ++row) {
    Tensor<double> single({1, 1, cfg.electrodes, cfg.samples_per_window});
    for (int e = 0; e < cfg.electrodes; ++e)
      for (int t = 0; t < cfg.samples_per_window; ++t) single.at(0, 0, e, t) = x.at(row, 0, e, t);
    auto one = model.forward(single, Mode::infer);
    for (int e = 0; e < 16; ++e) REQUIRE(std::abs(one.at(0, e) - both.at(row, e)) < 1e-12);
  }
}

TEST_CASE("parameter init is seed-deterministic") {
  Model<double> a{ModelConfig{}}, b{ModelConfig{}}, c{ModelConfig{}};
  a.init_params(5);
  b.init_params(5);
  c.init_params(6);

  std::vector<double> flat_a, flat_b, flat_c;
  auto collect = [](Model<double>& m, std::vector<double>& out) {
    m.visit_params([&](const std::string&, std::vector<double>& v, std::vector<double>*, bool) {
      out.insert(out.end(), v.begin(), v.end());
    });
  };
  collect(a, flat_a);
  collect(b, flat_b);
  collect(c, flat_c);
  REQUIRE(flat_a == flat_b);
  REQUIRE(flat_a != flat_c);
}

TEST_CASE("train-mode forward replays exactly after a dropout reseed") {
  ModelConfig cfg;
  Model<double> model(cfg);
  model.init_params(4);
  model.set_dropout_seed(44);
  auto x = random_batch(cfg, 2, 5);

  auto y1 = model.forward(x, Mode::train);
  model.reseed_dropout();
  auto y2 = model.forward(x, Mode::train);
  for (std::size_t i = 0; i < static_cast<std::size_t>(y1.numel()); ++i) REQUIRE(y1[i] == y2[i]);
}

TEST_CASE("model rejects ill-shaped input and ill-formed configs") {
  Model<float> model{ModelConfig{}};
  Tensor<float> bad({1, 1, 15, 500});
  REQUIRE_THROWS_AS(model.forward(bad, Mode::infer), ShapeError);
  Tensor<float> bad2({1, 1, 16, 499});
  REQUIRE_THROWS_AS(model.forward(bad2, Mode::infer), ShapeError);

  ModelConfig not_one_second;
  not_one_second.samples_per_window = 250;  // disagrees with sampling_rate_hz
  REQUIRE_THROWS_AS(not_one_second.validate(), ConfigError);

  ModelConfig long_kernel;
  long_kernel.temporal_kernel = 501;
  REQUIRE_THROWS_AS(long_kernel.validate(), ConfigError);

  ModelConfig bad_threshold;
  bad_threshold.decision_threshold = 1.5;
  REQUIRE_THROWS_AS(bad_threshold.validate(), ConfigError);

  ModelConfig bad_pool;
  bad_pool.pool2 = 126;
  REQUIRE_THROWS_AS(bad_pool.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip is bit-exact and repeatable") {
  ModelConfig cfg;
  cfg.temporal_kernel = 50;
  Model<double> model(cfg);
  model.init_params(123);

  const auto p1 = temp_file("meegnet_ckpt_a.bin");
  const auto p2 = temp_file("meegnet_ckpt_b.bin");
  save_checkpoint(model, p1, 777);

  std::uint64_t seed = 0;
  auto loaded = load_checkpoint<double>(p1, &seed);
  REQUIRE(seed == 777);
  REQUIRE(loaded.config().temporal_kernel == 50);
  REQUIRE(loaded.parameter_count() == model.parameter_count());

  // seeds occupy the full unsigned range, beyond what a signed parse accepts
  const std::uint64_t big_seed = 0xd94b4f7e07a7b539ULL;
  save_checkpoint(model, p2, big_seed);
  load_checkpoint<double>(p2, &seed);
  REQUIRE(seed == big_seed);

  // identical parameters, hence identical behavior
  auto x = random_batch(cfg, 2, 55);
  auto ya = model.forward(x, Mode::infer);
  auto yb = loaded.forward(x, Mode::infer);
  for (std::size_t i = 0; i < static_cast<std::size_t>(ya.numel()); ++i) REQUIRE(ya[i] == yb[i]);

  // save(load(save(m))) is byte-identical to save(m)
  save_checkpoint(loaded, p2, 777);
  REQUIRE(slurp(p1) == slurp(p2));

  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("checkpoint loading rejects corrupted files") {
  Model<double> model{ModelConfig{}};
  model.init_params(3);
  const auto good = temp_file("meegnet_ckpt_good.bin");
  save_checkpoint(model, good);
  const std::string bytes = slurp(good);

  const auto bad = temp_file("meegnet_ckpt_bad.bin");
  auto write_bad = [&](const std::string& contents) {
    std::ofstream out(bad, std::ios::binary);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  };

  SECTION("wrong magic") {
    write_bad("meegnet-checkpoint v2\n" + bytes.substr(bytes.find('\n') + 1));
    REQUIRE_THROWS_AS(load_checkpoint<double>(bad), ConfigError);
  }
  SECTION("renamed tensor") {
    std::string mutated = bytes;
    const auto pos = mutated.find("tensor conv_temporal.kernels");
    REQUIRE(pos != std::string::npos);
    mutated.replace(pos, 28, "tensor conv_temporal.filters");
    write_bad(mutated);
    REQUIRE_THROWS_AS(load_checkpoint<double>(bad), ConfigError);
  }
  SECTION("truncated payload reports expected and actual sizes") {
    write_bad(bytes.substr(0, bytes.size() - 100));
    try {
      load_checkpoint<double>(bad);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("expected") != std::string::npos);
    }
  }
  SECTION("non-finite payload") {
    std::string mutated = bytes;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto header_end = mutated.find("end_header\n") + 11;
    mutated.replace(header_end, sizeof(double), reinterpret_cast<const char*>(&nan), sizeof(double));
    write_bad(mutated);
    REQUIRE_THROWS_AS(load_checkpoint<double>(bad), NumericError);
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(load_checkpoint<double>(temp_file("meegnet_ckpt_nope.bin")), IoError);
  }

  fs::remove(good);
  fs::remove(bad);
}

TEST_CASE("interval extraction groups consecutive hot windows per electrode") {
  Tensor<double> probs({4, 1});
  probs.at(0, 0) = 0.9;
  probs.at(1, 0) = 0.9;
  probs.at(2, 0) = 0.1;
  probs.at(3, 0) = 0.9;

  auto iv = detect_intervals(probs, 0.5);
  REQUIRE(iv.size() == 2);
  CHECK(iv[0].electrode == 0);
  CHECK(iv[0].onset_sec == 0);
  CHECK(iv[0].offset_sec == 2);
  CHECK(iv[1].onset_sec == 3);
  CHECK(iv[1].offset_sec == 4);

  // threshold comparison is >=, so threshold 0 marks everything
  auto all = detect_intervals(probs, 0.0);
  REQUIRE(all.size() == 1);
  CHECK(all[0].onset_sec == 0);
  CHECK(all[0].offset_sec == 4);

  // nothing above 0.95
  REQUIRE(detect_intervals(probs, 0.95).empty());
}

TEST_CASE("interval extraction orders by electrode then onset") {
  Tensor<double> probs({3, 2});
  probs.at(0, 1) = 1.0;
  probs.at(2, 0) = 1.0;
  probs.at(2, 1) = 1.0;
  auto iv = detect_intervals(probs, 0.5);
  REQUIRE(iv.size() == 3);
  CHECK(iv[0].electrode == 0);
  CHECK(iv[0].onset_sec == 2);
  CHECK(iv[1].electrode == 1);
  CHECK(iv[1].onset_sec == 0);
  CHECK(iv[2].electrode == 1);
  CHECK(iv[2].onset_sec == 2);
}

TEST_CASE("interval extraction validates inputs") {
  Tensor<double> probs({2, 2});
  REQUIRE_THROWS_AS(detect_intervals(probs, -0.1), ConfigError);
  REQUIRE_THROWS_AS(detect_intervals(probs, 1.1), ConfigError);
  probs.at(0, 0) = 1.5;
  REQUIRE_THROWS_AS(detect_intervals(probs, 0.5), ConfigError);
  Tensor<double> wrong({2, 2, 2});
  REQUIRE_THROWS_AS(detect_intervals(wrong, 0.5), ShapeError);
}
