#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "meegnet/common.hpp"

// Threshold metrics and ranking AUC over flat score/label vectors, plus the
// per-case aggregation rules: a case with no positive cells cannot be scored
// for AUC, F1 or sensitivity and is excluded from those aggregates, but its
// specificity still counts. Aggregates report mean and population standard
// deviation.

namespace meegnet {

struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline void validate_scores_labels(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ShapeError("metrics: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  if (scores.empty()) throw ShapeError("metrics: empty inputs");
  for (const double s : scores)
    if (!std::isfinite(s)) throw NumericError("metrics: non-finite score");
  for (const int l : labels)
    if (l != 0 && l != 1) throw ConfigError("metrics: labels must be 0 or 1, found " + std::to_string(l));
}

inline Confusion confusion_counts(const std::vector<double>& scores, const std::vector<int>& labels,
                                  double threshold) {
  validate_scores_labels(scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++c.tp;
    else if (pred && !pos) ++c.fp;
    else if (!pred && pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline double f1_score(const Confusion& c) {
  const std::int64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) throw NumericError("metrics: f1 undefined, no positives present or predicted");
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double sensitivity(const Confusion& c) {
  if (c.tp + c.fn == 0) throw NumericError("metrics: sensitivity undefined, no positive labels");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline double precision(const Confusion& c) {
  if (c.tp + c.fp == 0) throw NumericError("metrics: precision undefined, nothing predicted positive");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

inline double specificity(const Confusion& c) {
  if (c.tn + c.fp == 0) throw NumericError("metrics: specificity undefined, no negative labels");
  return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

// Mann-Whitney AUC with midranks for ties. Rank bookkeeping is integer
// (doubled ranks), so the result is exact up to the single final division.
inline double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
  validate_scores_labels(scores, labels);
  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  std::int64_t n_pos = 0;
  for (const int l : labels) n_pos += l;
  const std::int64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw NumericError("metrics: auc undefined, only one class present");

  std::vector<std::int32_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&scores](std::int32_t a, std::int32_t b) { return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)]; });

  std::int64_t rank2_pos_sum = 0;  // sum over positives of (2 * midrank)
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() &&
           scores[static_cast<std::size_t>(idx[j])] == scores[static_cast<std::size_t>(idx[i])])
      ++j;
    const std::int64_t rank2 = static_cast<std::int64_t>(i) + 1 + static_cast<std::int64_t>(j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[static_cast<std::size_t>(idx[k])] == 1) rank2_pos_sum += rank2;
    i = j;
  }
  const std::int64_t u2 = rank2_pos_sum - n_pos * (n_pos + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// One evaluated case. Unscorable metrics stay NaN and drop out of aggregates.
struct CaseEvaluation {
  std::string case_id;
  std::int64_t cells = 0;
  std::int64_t positives = 0;
  Confusion confusion{};
  double auc = std::numeric_limits<double>::quiet_NaN();
  double f1 = std::numeric_limits<double>::quiet_NaN();
  double sensitivity = std::numeric_limits<double>::quiet_NaN();
  double specificity = std::numeric_limits<double>::quiet_NaN();
  double precision = std::numeric_limits<double>::quiet_NaN();
  bool scored() const { return positives > 0; }
};

inline CaseEvaluation evaluate_case(const std::string& case_id, const std::vector<double>& scores,
                                    const std::vector<int>& labels, double threshold = 0.5) {
  CaseEvaluation ev;
  ev.case_id = case_id;
  ev.confusion = confusion_counts(scores, labels, threshold);
  ev.cells = static_cast<std::int64_t>(scores.size());
  ev.positives = ev.confusion.tp + ev.confusion.fn;
  if (ev.confusion.tn + ev.confusion.fp > 0) ev.specificity = specificity(ev.confusion);
  if (ev.confusion.tp + ev.confusion.fp > 0) ev.precision = precision(ev.confusion);
  if (ev.positives > 0) {
    ev.auc = auc_score(scores, labels);
    ev.f1 = f1_score(ev.confusion);
    ev.sensitivity = sensitivity(ev.confusion);
  }
  return ev;
}

struct Aggregate {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

// Mean and population standard deviation over the finite entries.
inline Aggregate aggregate_values(const std::vector<double>& values) {
  Aggregate a;
  double sum = 0;
  for (const double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++a.count;
    }
  if (a.count == 0) return a;
  a.mean = sum / a.count;
  double sq = 0;
  for (const double v : values)
    if (std::isfinite(v)) sq += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(sq / a.count);
  return a;
}

struct EvaluationSummary {
  Aggregate auc, f1, sensitivity, specificity;
  std::vector<std::string> excluded_cases;  // no positive cells
};

inline EvaluationSummary summarize_cases(const std::vector<CaseEvaluation>& cases) {
  if (cases.empty()) throw ConfigError("aggregate: no case evaluations to summarize");
  EvaluationSummary s;
  std::vector<double> auc, f1, sens, spec;
  for (const auto& c : cases) {
    auc.push_back(c.auc);
    f1.push_back(c.f1);
    sens.push_back(c.sensitivity);
    spec.push_back(c.specificity);
    if (!c.scored()) s.excluded_cases.push_back(c.case_id);
  }
  if (s.excluded_cases.size() == cases.size())
    throw NumericError("aggregate: every case is excluded (no positive cells anywhere)");
  s.auc = aggregate_values(auc);
  s.f1 = aggregate_values(f1);
  s.sensitivity = aggregate_values(sens);
  s.specificity = aggregate_values(spec);
  return s;
}

}  // namespace meegnet
