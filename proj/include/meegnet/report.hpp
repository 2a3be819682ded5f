#pragma once

#include <cmath>
#include <cstdio>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "meegnet/common.hpp"
#include "meegnet/metrics.hpp"
#include "meegnet/stats.hpp"
#include "meegnet/train.hpp"

// Plain-text and comma-separated report rendering. Reports are pure functions
// of seeds and data — wall-clock timing never appears in them — so repeating a
// run with the same seeds reproduces every report byte for byte. Column
// orders:
//
//   cases     case_id,cells,positives,auc,f1,sensitivity,specificity
//   sessions  session,repeat,fold,train_seed,cells,positives,auc,f1,sensitivity,specificity
//   history   epoch,train_loss,val_loss,val_f1
//   sweep     session,f1_k<K>...,auc_k<K>...
//   grid      kind,alpha,gamma,beta,mean_f1,selected
//
// Metric table cells use 3 significant digits without a leading zero
// (".990 ± .00386"); CSV cells use shortest round-trip formatting with empty
// cells for undefined values.

namespace meegnet {

// 3 significant digits, leading zero stripped: 0.990 -> ".990".
inline std::string format_sig3(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%#.3g", v);
  std::string s(buf);
  if (s.size() > 1 && s[0] == '0' && s[1] == '.') s.erase(0, 1);
  else if (s.size() > 2 && s[0] == '-' && s[1] == '0' && s[2] == '.') s.erase(1, 1);
  return s;
}

inline std::string format_mean_std(const Aggregate& a) {
  if (a.count == 0) return "n/a";
  return format_sig3(a.mean) + " ± " + format_sig3(a.stddev);
}

// Shortest round-trip value; undefined (NaN) renders as an empty cell.
inline std::string csv_value(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string render_cases_csv(const std::vector<CaseEvaluation>& cases) {
  std::string out = "case_id,cells,positives,auc,f1,sensitivity,specificity\n";
  for (const auto& c : cases) {
    out += c.case_id + "," + std::to_string(c.cells) + "," + std::to_string(c.positives) + "," +
           csv_value(c.auc) + "," + csv_value(c.f1) + "," + csv_value(c.sensitivity) + "," +
           csv_value(c.specificity) + "\n";
  }
  return out;
}

inline std::string render_evaluation_report(const EvaluationSummary& s, std::size_t case_count) {
  std::string out = "cases " + std::to_string(case_count);
  if (!s.excluded_cases.empty()) {
    out += " (" + std::to_string(s.excluded_cases.size()) + " excluded:";
    for (const auto& id : s.excluded_cases) out += " " + id;
    out += ")";
  }
  out += "\n";
  auto line = [&out](const char* name, const Aggregate& a) {
    out += std::string(name) + " " + format_mean_std(a) + " (n=" + std::to_string(a.count) + ")\n";
  };
  line("auc", s.auc);
  line("f1", s.f1);
  line("sensitivity", s.sensitivity);
  line("specificity", s.specificity);
  return out;
}

inline std::string render_sessions_csv(const std::vector<SessionResult>& sessions) {
  std::string out = "session,repeat,fold,train_seed,cells,positives,auc,f1,sensitivity,specificity\n";
  for (const auto& s : sessions) {
    out += s.label + "," + std::to_string(s.repeat) + "," + std::to_string(s.fold_index) + "," +
           std::to_string(s.train_seed) + "," + std::to_string(s.pooled.cells) + "," +
           std::to_string(s.pooled.positives) + "," + csv_value(s.pooled.auc) + "," + csv_value(s.pooled.f1) +
           "," + csv_value(s.pooled.sensitivity) + "," + csv_value(s.pooled.specificity) + "\n";
  }
  return out;
}

inline std::string render_history_csv(const TrainHistory& h) {
  std::string out = "epoch,train_loss,val_loss,val_f1\n";
  for (std::size_t i = 0; i < h.train_loss.size(); ++i) {
    out += std::to_string(i) + "," + csv_value(h.train_loss[i]) + ",";
    out += i < h.val_loss.size() ? csv_value(h.val_loss[i]) : "";
    out += ",";
    out += i < h.val_f1.size() ? csv_value(h.val_f1[i]) : "";
    out += "\n";
  }
  return out;
}

inline std::string render_sweep_csv(const SweepResult& r) {
  std::string out = "session";
  for (const int k : r.kernels) out += ",f1_k" + std::to_string(k);
  for (const int k : r.kernels) out += ",auc_k" + std::to_string(k);
  out += "\n";
  for (std::size_t s = 0; s < r.f1_by_session.size(); ++s) {
    out += r.sessions.front()[s].label;
    for (const double v : r.f1_by_session[s]) out += "," + csv_value(v);
    for (const double v : r.auc_by_session[s]) out += "," + csv_value(v);
    out += "\n";
  }
  return out;
}

// Friedman chi-square, per-treatment mean ranks and the Nemenyi pairwise
// matrix. `names` labels the treatments (e.g. "k10"). A single treatment
// renders an explicit no-comparison note instead.
inline std::string render_friedman_report(const std::vector<std::string>& names, const FriedmanResult& f,
                                          const NemenyiResult& n) {
  if (names.size() < 2) return "no comparison (single treatment)\n";
  std::string out;
  out += "friedman_chi2 " + csv_value(f.statistic) + "\n";
  out += "dof " + std::to_string(f.groups - 1) + "\n";
  out += "p_value " + csv_value(f.p_value) + "\n";
  out += "blocks " + std::to_string(f.blocks) + "\n";
  for (std::size_t i = 0; i < names.size(); ++i)
    out += "mean_rank_" + names[i] + " " + csv_value(f.mean_ranks[i]) + "\n";
  out += "nemenyi_cd " + csv_value(n.critical_difference) + "\n";
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      out += names[i] + " vs " + names[j] + " " +
             (n.significant[i][j] ? "significant" : "not_significant") + "\n";
  return out;
}

inline std::string render_grid_csv(const GridResult& g) {
  std::string out = "kind,alpha,gamma,beta,mean_f1,selected\n";
  for (std::size_t i = 0; i < g.candidates.size(); ++i) {
    const LossConfig& c = g.candidates[i];
    out += to_string(c.kind) + ",";
    out += c.kind == LossKind::focal ? csv_value(c.alpha) : "";
    out += ",";
    out += c.kind != LossKind::bce ? csv_value(c.gamma) : "";
    out += ",";
    out += c.kind == LossKind::class_balanced_focal ? csv_value(c.beta) : "";
    out += "," + csv_value(g.mean_f1[i]) + ",";
    out += i == g.selected ? "*" : "";
    out += "\n";
  }
  return out;
}

// Key/value run record; every seed and resolved setting a rerun needs.
inline std::string render_run_record(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " " + v + "\n";
  return out;
}

// Byte-stable text output (binary mode, no newline translation).
inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("report: cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("report: write to '" + path.string() + "' failed");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("report: cannot open '" + path.string() + "' for reading");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

}  // namespace meegnet
