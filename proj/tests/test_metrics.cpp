#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "meegnet/metrics.hpp"
#include "meegnet/rng.hpp"
#include "meegnet/stats.hpp"

using namespace meegnet;

namespace {

// O(P*N) tie-aware reference: mean over all positive/negative pairs of
// 1, 0.5 or 0 depending on the score comparison.
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("confusion fixture at threshold 0.5") {
  const std::vector<double> scores{0.9, 0.9, 0.9, 0.2, 0.2, 0.6};
  const std::vector<int> labels{1, 1, 1, 0, 0, 1};
  const Confusion c = confusion_counts(scores, labels, 0.5);
  CHECK(c.tp == 4);
  CHECK(c.tn == 2);
  CHECK(c.fp == 0);
  CHECK(c.fn == 0);
  CHECK(sensitivity(c) == 1.0);
  CHECK(specificity(c) == 1.0);
  CHECK(f1_score(c) == 1.0);
}

TEST_CASE("a score equal to the threshold counts as positive") {
  const Confusion c = confusion_counts({0.5, 0.49999}, {1, 0}, 0.5);
  CHECK(c.tp == 1);
  CHECK(c.tn == 1);
}

TEST_CASE("precision, sensitivity and f1 on a mixed confusion") {
  Confusion c;
  c.tp = 3;
  c.fp = 1;
  c.fn = 2;
  CHECK(precision(c) == 0.75);
  CHECK(sensitivity(c) == 0.6);
  CHECK(std::abs(f1_score(c) - 2.0 / 3.0) < 1e-15);
}

TEST_CASE("degenerate confusions raise numeric errors") {
  Confusion c;  // all zero
  REQUIRE_THROWS_AS(f1_score(c), NumericError);
  REQUIRE_THROWS_AS(sensitivity(c), NumericError);
  REQUIRE_THROWS_AS(precision(c), NumericError);
  REQUIRE_THROWS_AS(specificity(c), NumericError);
}

TEST_CASE("auc fixtures") {
  CHECK(auc_score({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.75);
  CHECK(auc_score({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(auc_score({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == 0.0);
  // all scores tied: every pair counts 0.5
  CHECK(auc_score({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
}

TEST_CASE("auc requires both classes and valid inputs") {
  REQUIRE_THROWS_AS(auc_score({0.1, 0.2}, {1, 1}), NumericError);
  REQUIRE_THROWS_AS(auc_score({0.1, 0.2}, {0, 0}), NumericError);
  REQUIRE_THROWS_AS(auc_score({0.1}, {0, 1}), ShapeError);
  REQUIRE_THROWS_AS(auc_score({std::nan(""), 0.2}, {0, 1}), NumericError);
  REQUIRE_THROWS_AS(auc_score({0.1, 0.2}, {0, 2}), ConfigError);
  REQUIRE_THROWS_AS(auc_score({}, {}), ShapeError);
}

TEST_CASE("auc equals the exhaustive pairwise reference on tie-heavy draws") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(200));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<int> labels(static_cast<std::size_t>(n));
    // quantized scores force plenty of exact ties
    const int levels = 1 + static_cast<int>(rng.uniform_index(12));
    for (int i = 0; i < n; ++i) {
      scores[static_cast<std::size_t>(i)] =
          static_cast<double>(rng.uniform_index(static_cast<std::uint64_t>(levels))) / levels;
      labels[static_cast<std::size_t>(i)] = rng.bernoulli(0.4) ? 1 : 0;
    }
    labels[0] = 1;  // guarantee both classes
    labels[static_cast<std::size_t>(n - 1)] = 0;
    REQUIRE(auc_score(scores, labels) == pairwise_auc(scores, labels));
  }
}

TEST_CASE("auc is invariant under strictly monotone score transforms") {
  const std::vector<double> scores{0.05, 0.3, 0.3, 0.61, 0.9, 0.17};
  const std::vector<int> labels{0, 1, 0, 1, 1, 0};
  const double base = auc_score(scores, labels);
  auto mapped = scores;
  for (auto& s : mapped) s = std::exp(7.0 * s) - 3.0;
  REQUIRE(auc_score(mapped, labels) == base);
}

TEST_CASE("case evaluation without positives keeps specificity only") {
  const auto ev = evaluate_case("quiet", {0.1, 0.2, 0.6}, {0, 0, 0}, 0.5);
  REQUIRE_FALSE(ev.scored());
  CHECK(std::isnan(ev.auc));
  CHECK(std::isnan(ev.f1));
  CHECK(std::isnan(ev.sensitivity));
  CHECK(ev.specificity == 2.0 / 3.0);
}

TEST_CASE("summaries exclude unscorable cases from auc/f1/sensitivity means") {
  std::vector<CaseEvaluation> cases;
  cases.push_back(evaluate_case("a", {0.9, 0.1, 0.8, 0.3}, {1, 0, 1, 0}));
  cases.push_back(evaluate_case("b", {0.7, 0.2, 0.15, 0.1}, {1, 0, 1, 0}));
  cases.push_back(evaluate_case("quiet", {0.1, 0.2}, {0, 0}));

  const auto s = summarize_cases(cases);
  REQUIRE(s.excluded_cases == std::vector<std::string>{"quiet"});
  CHECK(s.auc.count == 2);
  CHECK(s.f1.count == 2);
  CHECK(s.sensitivity.count == 2);
  CHECK(s.specificity.count == 3);  // the quiet case still scores specificity

  // case a: perfect; case b: one positive outranked and below threshold
  CHECK(s.auc.mean == (1.0 + 0.75) / 2.0);
  CHECK(s.sensitivity.mean == (1.0 + 0.5) / 2.0);
}

TEST_CASE("summaries refuse empty or fully excluded inputs") {
  REQUIRE_THROWS_AS(summarize_cases({}), ConfigError);
  std::vector<CaseEvaluation> all_quiet;
  all_quiet.push_back(evaluate_case("q1", {0.1}, {0}));
  all_quiet.push_back(evaluate_case("q2", {0.3}, {0}));
  REQUIRE_THROWS_AS(summarize_cases(all_quiet), NumericError);
}

TEST_CASE("aggregate is a population statistic") {
  const auto a = aggregate_values({1.0, 2.0, 3.0});
  CHECK(a.count == 3);
  CHECK(a.mean == 2.0);
  CHECK(std::abs(a.stddev - std::sqrt(2.0 / 3.0)) < 1e-15);

  const auto nan_mixed = aggregate_values({1.0, std::nan(""), 3.0});
  CHECK(nan_mixed.count == 2);
  CHECK(nan_mixed.mean == 2.0);

  CHECK(aggregate_values({}).count == 0);
}

TEST_CASE("friedman consistent-rank fixture gives chi-square 8 with dof 2") {
  // four blocks, identical ordering of the three groups
  const std::vector<std::vector<double>> data{
      {0.1, 0.5, 0.9}, {0.2, 0.6, 0.8}, {0.15, 0.55, 0.95}, {0.05, 0.45, 0.85}};
  const auto res = friedman_test(data);
  REQUIRE(std::abs(res.statistic - 8.0) < 1e-9);
  REQUIRE(res.groups == 3);
  REQUIRE(res.blocks == 4);
  REQUIRE(res.mean_ranks == std::vector<double>{1.0, 2.0, 3.0});
  // dof 2 upper tail at 8.0
  REQUIRE(std::abs(res.p_value - 0.018315638888734180) < 1e-12);
}

TEST_CASE("friedman on identical measurements is chi-square 0, p 1") {
  const std::vector<std::vector<double>> data{{0.5, 0.5, 0.5}, {0.3, 0.3, 0.3}};
  const auto res = friedman_test(data);
  CHECK(res.statistic == 0.0);
  CHECK(res.p_value == 1.0);
}

TEST_CASE("friedman is invariant under per-block monotone transforms") {
  const std::vector<std::vector<double>> data{
      {0.3, 0.1, 0.7}, {0.6, 0.2, 0.4}, {0.8, 0.5, 0.9}, {0.35, 0.15, 0.25}, {0.1, 0.9, 0.5}};
  auto mapped = data;
  for (std::size_t b = 0; b < mapped.size(); ++b)
    for (auto& v : mapped[b]) v = std::tanh(3.0 * v) + static_cast<double>(b);
  const auto r1 = friedman_test(data);
  const auto r2 = friedman_test(mapped);
  REQUIRE(r1.statistic == r2.statistic);
  REQUIRE(r1.mean_ranks == r2.mean_ranks);
}

TEST_CASE("friedman statistic stays within its algebraic bound for k=3") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int blocks = 2 + static_cast<int>(rng.uniform_index(10));
    std::vector<std::vector<double>> data(static_cast<std::size_t>(blocks), std::vector<double>(3));
    for (auto& row : data)
      for (auto& v : row) v = rng.uniform();
    const auto res = friedman_test(data);
    REQUIRE(res.statistic >= 0.0);
    REQUIRE(res.statistic <= 2.0 * blocks + 1e-9);
  }
}

TEST_CASE("friedman validates its input") {
  REQUIRE_THROWS_AS(friedman_test({{1.0, 2.0}}), ConfigError);            // one block
  REQUIRE_THROWS_AS(friedman_test({{1.0}, {2.0}}), ConfigError);          // one group
  REQUIRE_THROWS_AS(friedman_test({{1.0, 2.0}, {1.0}}), ShapeError);      // ragged
  REQUIRE_THROWS_AS(friedman_test({{1.0, 2.0}, {1.0, std::nan("")}}), NumericError);
}

TEST_CASE("midranks average tied positions") {
  REQUIRE(midranks({0.3, 0.1, 0.3}) == std::vector<double>{2.5, 1.0, 2.5});
  REQUIRE(midranks({0.5, 0.5}) == std::vector<double>{1.5, 1.5});
}

TEST_CASE("chi-square upper tail matches a high-precision oracle to 1e-10 relative") {
  struct Row {
    int dof;
    double x;
    double sf;
  };
  // values computed with 40-digit arithmetic
  static const Row oracle[] = {
      {1, 0.5, 0.47950012218695346},
      {1, 3.84, 0.050043521248705099},
      {1, 10.83, 0.00099868637918025878},
      {2, 0.1, 0.95122942450071401},
      {2, 2.0, 0.36787944117144232},
      {2, 4.0, 0.13533528323661269},
      {2, 4.60517018598809137, 0.10000000000000000},
      {2, 5.99, 0.050036627086586288},
      {2, 8.0, 0.018315638888734180},
      {2, 13.8, 0.0010077854290485108},
      {2, 30.0, 3.0590232050182579e-7},
      {3, 0.35, 0.95036611736847600},
      {3, 2.366, 0.49999509036598537},
      {3, 7.81, 0.050106056350005933},
      {3, 11.34, 0.010022517616912462},
      {3, 16.27, 0.00099822323990541828},
      {3, 29.1, 2.1336503925596619e-6},
      {3, 60.2, 5.3274192440653744e-13},
      {4, 1.0, 0.90979598956895014},
      {4, 9.49, 0.049953131223294897},
      {5, 15.09, 0.0099846249580604089},
      {6, 22.46, 0.00099905589666271008},
  };
  for (const auto& row : oracle) {
    const double got = chi2_sf(row.x, row.dof);
    REQUIRE(std::abs(got - row.sf) <= 1e-10 * row.sf);
  }
  CHECK(chi2_sf(0.0, 3) == 1.0);
  REQUIRE_THROWS_AS(chi2_sf(-1.0, 2), ConfigError);
  REQUIRE_THROWS_AS(chi2_sf(1.0, 0), ConfigError);
}

TEST_CASE("nemenyi critical difference and pair flags on the consistent fixture") {
  const std::vector<std::vector<double>> data{
      {0.1, 0.5, 0.9}, {0.2, 0.6, 0.8}, {0.15, 0.55, 0.95}, {0.05, 0.45, 0.85}};
  const auto fr = friedman_test(data);
  const auto nem = nemenyi_test(fr);
  REQUIRE(std::abs(nem.critical_difference - 1.65675118832008085) < 1e-12);
  // rank gap 2 between the extreme pair exceeds the CD; adjacent gaps of 1 do not
  CHECK(nem.significant[0][2]);
  CHECK(nem.significant[2][0]);
  CHECK_FALSE(nem.significant[0][1]);
  CHECK_FALSE(nem.significant[1][2]);
  CHECK_FALSE(nem.significant[0][0]);
}

TEST_CASE("nemenyi table endpoints and validation") {
  CHECK(nemenyi_q05(2) == 1.960);
  CHECK(nemenyi_q05(10) == 3.164);
  REQUIRE_THROWS_AS(nemenyi_q05(11), ConfigError);
  REQUIRE_THROWS_AS(nemenyi_q05(1), ConfigError);
  REQUIRE_THROWS_AS(nemenyi_critical_difference(3, 0), ConfigError);
}
