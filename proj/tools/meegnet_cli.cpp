#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "meegnet/checkpoint.hpp"
#include "meegnet/data.hpp"
#include "meegnet/gradcheck.hpp"
#include "meegnet/model.hpp"
#include "meegnet/report.hpp"
#include "meegnet/splits.hpp"
#include "meegnet/synth.hpp"
#include "meegnet/train.hpp"

// Command-line frontend. Every run writes a self-contained run record (all
// resolved settings plus every derived seed), and every report file is a pure
// function of seeds and data, so repeating a run with the same seeds
// reproduces checkpoints and reports byte for byte. Wall-clock timing goes to
// stdout only.
//
// Exit codes: 0 success, 2 configuration/shape errors, 3 I/O errors,
// 4 numeric failures, 1 anything else.

namespace fs = std::filesystem;
using namespace meegnet;

namespace {

using RunRecord = std::vector<std::pair<std::string, std::string>>;

// ----------------------------------------------------------- shared flag sets

struct TrainFlags {
  int epochs = 50;
  int batch = 64;
  double lr = 1e-3;
  std::string loss = "bce";
  double alpha = 0.25;
  double gamma = 2.0;
  double beta = 0.999;
  double max_norm = 0.0;
  int patience = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--epochs", f.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--batch", f.batch, "minibatch size")->capture_default_str();
  cmd->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--loss", f.loss, "loss kind: bce, fl/focal, or cbf")->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "focal class weight")->capture_default_str();
  cmd->add_option("--gamma", f.gamma, "focusing exponent")->capture_default_str();
  cmd->add_option("--beta", f.beta, "effective-number beta")->capture_default_str();
  cmd->add_option("--max-norm", f.max_norm, "dense per-unit weight norm cap (0 disables)")
      ->capture_default_str();
  cmd->add_option("--patience", f.patience, "early-stop patience in epochs (0 disables)")
      ->capture_default_str();
}

TrainConfig to_train_config(const TrainFlags& f) {
  TrainConfig tc;
  tc.epochs = f.epochs;
  tc.batch_size = f.batch;
  tc.adam.learning_rate = f.lr;
  tc.loss.kind = loss_kind_from_string(f.loss);
  tc.loss.alpha = f.alpha;
  tc.loss.gamma = f.gamma;
  tc.loss.beta = f.beta;
  tc.dense_max_norm = f.max_norm;
  tc.early_stop_patience = f.patience;
  tc.validate();
  return tc;
}

struct WindowFlags {
  double window = 1.0;
  double min_overlap = 0.5;
  bool any_overlap = false;
};

void add_window_flags(CLI::App* cmd, WindowFlags& f) {
  cmd->add_option("--window", f.window, "window length in seconds")->capture_default_str();
  cmd->add_option("--min-overlap", f.min_overlap,
                  "seconds of event overlap that label a window abnormal")
      ->capture_default_str();
  cmd->add_flag("--any-overlap", f.any_overlap, "label windows abnormal on any event overlap");
}

WindowingConfig to_windowing(const WindowFlags& f) {
  WindowingConfig wc;
  wc.window_seconds = f.window;
  wc.min_overlap_seconds = f.min_overlap;
  wc.any_overlap = f.any_overlap;
  return wc;
}

WindowedDataset load_dataset(const fs::path& manifest, const WindowingConfig& wc) {
  const auto records = load_manifest(manifest);
  std::vector<WindowSet> sets;
  sets.reserve(records.size());
  for (const auto& record : records) {
    const LoadedCase c = load_case(record, manifest.parent_path());
    sets.push_back(make_windows(c.recording, c.annotation, wc));
  }
  return pool_windows(sets);
}

// Model geometry follows the dataset; the remaining knobs keep flag values.
ModelConfig model_config_for(const WindowedDataset& ds, int kernel, double dropout, double threshold) {
  ModelConfig mc;
  mc.electrodes = ds.electrodes();
  mc.samples_per_window = ds.data.dim(3);
  mc.sampling_rate_hz = static_cast<int>(std::llround(ds.data.dim(3) / ds.window_seconds));
  mc.temporal_kernel = kernel;
  mc.dropout_rate = dropout;
  mc.decision_threshold = threshold;
  mc.validate();
  return mc;
}

std::string bool01(bool v) { return v ? "1" : "0"; }

void append_common_record(RunRecord& rec, const TrainFlags& tf, const WindowFlags& wf,
                          const WindowedDataset& ds) {
  rec.emplace_back("loss", to_string(loss_kind_from_string(tf.loss)));
  rec.emplace_back("alpha", csv_value(tf.alpha));
  rec.emplace_back("gamma", csv_value(tf.gamma));
  rec.emplace_back("beta", csv_value(tf.beta));
  rec.emplace_back("epochs", std::to_string(tf.epochs));
  rec.emplace_back("batch", std::to_string(tf.batch));
  rec.emplace_back("learning_rate", csv_value(tf.lr));
  rec.emplace_back("dense_max_norm", csv_value(tf.max_norm));
  rec.emplace_back("early_stop_patience", std::to_string(tf.patience));
  rec.emplace_back("window_seconds", csv_value(wf.window));
  rec.emplace_back("min_overlap_seconds", csv_value(wf.min_overlap));
  rec.emplace_back("any_overlap", bool01(wf.any_overlap));
  rec.emplace_back("cases", std::to_string(ds.cases().size()));
  rec.emplace_back("windows", std::to_string(ds.windows()));
  rec.emplace_back("electrodes", std::to_string(ds.electrodes()));
  const ClassCounts counts = count_cells(ds, [&ds] {
    std::vector<int> all(static_cast<std::size_t>(ds.windows()));
    for (int i = 0; i < ds.windows(); ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }());
  rec.emplace_back("cells", std::to_string(counts.total()));
  rec.emplace_back("positive_cells", std::to_string(counts.positives));
}

std::vector<LossConfig> family_grid(LossKind kind) {
  switch (kind) {
    case LossKind::focal: return focal_loss_grid();
    case LossKind::class_balanced_focal: return cbf_loss_grid();
    case LossKind::bce: return full_loss_grid();
  }
  throw ConfigError("gridsearch: unknown loss kind");
}

// ------------------------------------------------------------------ commands

struct SynthArgs {
  int cases = 14;
  double duration = 300.0;
  double ratio = 0.027;
  double rate = 500.0;
  double spike_hz = 3.0;
  int electrodes_min = 16;
  int electrodes_max = 16;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& a, const fs::path& output_root) {
  SynthConfig cfg;
  cfg.cases = a.cases;
  cfg.duration_seconds = a.duration;
  cfg.abnormal_ratio = a.ratio;
  cfg.sampling_rate_hz = a.rate;
  cfg.spike_wave_hz = a.spike_hz;
  cfg.electrodes_per_event_min = a.electrodes_min;
  cfg.electrodes_per_event_max = a.electrodes_max;
  cfg.seed = a.seed;

  const fs::path dir = a.out.empty() ? output_root / ("synth-seed" + std::to_string(a.seed)) : fs::path(a.out);
  fs::create_directories(dir);
  const auto records = write_synthetic_dataset(cfg, dir);

  double abnormal = 0.0;
  const double total = cfg.duration_seconds * static_cast<double>(cfg.cases);
  for (const auto& record : records) {
    const Annotation ann = load_annotation(dir / record.annotation);
    abnormal += annotation_abnormal_seconds(ann);
  }
  std::printf("wrote %d cases to %s\n", a.cases, dir.string().c_str());
  std::printf("abnormal %.3f s of %.1f s (realized ratio %.6f, target %.6f)\n", abnormal, total,
              abnormal / total, a.ratio);
  if (abnormal > 0.0)
    std::printf("imbalance factor %.3f\n", imbalance_factor(total, abnormal));
  else
    std::printf("imbalance factor n/a (no abnormal seconds)\n");

  RunRecord rec{{"command", "synth"},
                {"cases", std::to_string(a.cases)},
                {"duration_seconds", csv_value(a.duration)},
                {"abnormal_ratio", csv_value(a.ratio)},
                {"sampling_rate_hz", csv_value(a.rate)},
                {"spike_wave_hz", csv_value(a.spike_hz)},
                {"electrodes_per_event_min", std::to_string(a.electrodes_min)},
                {"electrodes_per_event_max", std::to_string(a.electrodes_max)},
                {"seed", std::to_string(a.seed)}};
  write_text_file(dir / "run_record.txt", render_run_record(rec));
  return 0;
}

struct ValidateArgs {
  std::string manifest;
  std::string protocol = "kfold";
  int k = 5;
  int repeats = 1;
  std::uint64_t seed = 0;
  int kernel = 250;
  double dropout = 0.25;
  double threshold = 0.5;
  bool gridsearch = false;
  int inner_k = 3;
  std::string out;
  TrainFlags train;
  WindowFlags windowing;
};

int cmd_validate(const ValidateArgs& a, const fs::path& output_root) {
  const WindowedDataset ds = load_dataset(a.manifest, to_windowing(a.windowing));
  const ModelConfig mc = model_config_for(ds, a.kernel, a.dropout, a.threshold);
  const TrainConfig tc = to_train_config(a.train);
  const SplitKind kind = split_kind_from_string(a.protocol);

  std::vector<SplitPlan> plans;
  if (kind == SplitKind::kfold) {
    for (int r = 0; r < a.repeats; ++r)
      plans.push_back(split_kfold(ds, a.k, Rng::derive(a.seed, "repeat." + std::to_string(r))));
  } else {
    plans.push_back(split_loco(ds));
  }

  const fs::path dir = a.out.empty()
                           ? output_root / ("validate-" + a.protocol + "-seed" + std::to_string(a.seed) +
                                            "-k" + std::to_string(a.kernel))
                           : fs::path(a.out);
  fs::create_directories(dir);

  RunRecord rec{{"command", "validate"}, {"manifest", a.manifest},     {"protocol", a.protocol},
                {"k", std::to_string(a.k)},  {"repeats", std::to_string(a.repeats)},
                {"seed", std::to_string(a.seed)}, {"kernel", std::to_string(a.kernel)},
                {"dropout", csv_value(a.dropout)}, {"threshold", csv_value(a.threshold)},
                {"gridsearch", bool01(a.gridsearch)}};
  append_common_record(rec, a.train, a.windowing, ds);
  for (std::size_t r = 0; r < plans.size(); ++r)
    rec.emplace_back("split_fingerprint_r" + std::to_string(r), std::to_string(split_fingerprint(plans[r])));

  std::vector<SessionResult> sessions;
  std::vector<CaseEvaluation> pooled_rows, case_rows;
  for (std::size_t r = 0; r < plans.size(); ++r) {
    for (std::size_t f = 0; f < plans[r].folds.size(); ++f) {
      const Fold& fold = plans[r].folds[f];
      const std::uint64_t train_seed =
          Rng::derive(a.seed, "train." + std::to_string(r) + "." + std::to_string(f));
      const std::string label = kind == SplitKind::loco
                                    ? fold.label
                                    : "r" + std::to_string(r) + "." + fold.label;

      TrainConfig session_tc = tc;
      if (a.gridsearch) {
        const auto grid = family_grid(tc.loss.kind);
        const GridResult gr = grid_search_loss<float>(
            ds, fold.train, grid, mc, tc,
            Rng::derive(a.seed, "grid." + std::to_string(r) + "." + std::to_string(f)), a.inner_k);
        session_tc.loss = gr.candidates[gr.selected];
        write_text_file(dir / ("grid_" + label + ".csv"), render_grid_csv(gr));
        std::printf("session %s grid pick: %s alpha %s gamma %s beta %s (inner f1 %.4f)\n", label.c_str(),
                    to_string(session_tc.loss.kind).c_str(), csv_value(session_tc.loss.alpha).c_str(),
                    csv_value(session_tc.loss.gamma).c_str(), csv_value(session_tc.loss.beta).c_str(),
                    gr.mean_f1[gr.selected]);
      }

      Model<float> trained(mc);
      SessionResult session = run_session<float>(ds, fold, static_cast<int>(r), static_cast<int>(f),
                                                 train_seed, mc, session_tc, a.threshold, &trained);
      session.label = label;
      rec.emplace_back("train_seed_" + label, std::to_string(train_seed));
      save_checkpoint(trained, dir / ("checkpoint_" + label + ".ckpt"), train_seed);
      write_text_file(dir / ("history_" + label + ".csv"), render_history_csv(session.history));
      std::printf("session %s auc %.4f f1 %.4f (%d epochs, %.1f s)\n", label.c_str(), session.pooled.auc,
                  session.pooled.f1, session.history.epochs_run(), session.train_seconds);
      std::fflush(stdout);

      pooled_rows.push_back(session.pooled);
      case_rows.insert(case_rows.end(), session.per_case.begin(), session.per_case.end());
      sessions.push_back(std::move(session));
    }
  }

  const EvaluationSummary session_summary = summarize_cases(pooled_rows);
  const EvaluationSummary case_summary = summarize_cases(case_rows);
  const std::string summary = "[sessions]\n" + render_evaluation_report(session_summary, pooled_rows.size()) +
                              "\n[per-case]\n" + render_evaluation_report(case_summary, case_rows.size());
  write_text_file(dir / "run_record.txt", render_run_record(rec));
  write_text_file(dir / "sessions.csv", render_sessions_csv(sessions));
  write_text_file(dir / "cases.csv", render_cases_csv(case_rows));
  write_text_file(dir / "summary.txt", summary);
  std::printf("%d sessions -> %s\n%s", static_cast<int>(sessions.size()), dir.string().c_str(),
              summary.c_str());
  return 0;
}

struct SweepArgs {
  std::string manifest;
  std::vector<int> kernels = {10, 50, 125, 250};
  std::string protocol = "kfold";
  int k = 5;
  int repeats = 1;
  std::uint64_t seed = 0;
  double dropout = 0.25;
  double threshold = 0.5;
  std::string out;
  TrainFlags train;
  WindowFlags windowing;
};

int cmd_sweep(const SweepArgs& a, const fs::path& output_root) {
  const WindowedDataset ds = load_dataset(a.manifest, to_windowing(a.windowing));
  SweepConfig cfg;
  cfg.kernels = a.kernels;
  cfg.protocol = split_kind_from_string(a.protocol);
  cfg.k = a.k;
  cfg.repeats = a.repeats;
  cfg.model = model_config_for(ds, a.kernels.front(), a.dropout, a.threshold);
  cfg.train = to_train_config(a.train);
  cfg.threshold = a.threshold;
  cfg.seed = a.seed;

  const SweepResult result = kernel_sweep<float>(ds, cfg, [](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  });

  const fs::path dir = a.out.empty() ? output_root / ("sweep-seed" + std::to_string(a.seed)) : fs::path(a.out);
  fs::create_directories(dir);

  std::vector<std::string> names;
  for (const int k : result.kernels) names.push_back("k" + std::to_string(k));
  const std::string friedman = render_friedman_report(names, result.friedman, result.nemenyi);

  RunRecord rec{{"command", "sweep-kernel"}, {"manifest", a.manifest}, {"protocol", a.protocol},
                {"k", std::to_string(a.k)},  {"repeats", std::to_string(a.repeats)},
                {"seed", std::to_string(a.seed)}, {"dropout", csv_value(a.dropout)},
                {"threshold", csv_value(a.threshold)}, {"split_digest", std::to_string(result.split_digest)}};
  {
    std::string klist;
    for (const int k : result.kernels) klist += (klist.empty() ? "" : ",") + std::to_string(k);
    rec.emplace_back("kernels", klist);
  }
  append_common_record(rec, a.train, a.windowing, ds);
  write_text_file(dir / "run_record.txt", render_run_record(rec));
  write_text_file(dir / "sweep.csv", render_sweep_csv(result));
  write_text_file(dir / "friedman.txt", friedman);
  for (std::size_t ki = 0; ki < result.kernels.size(); ++ki)
    write_text_file(dir / ("sessions_k" + std::to_string(result.kernels[ki]) + ".csv"),
                    render_sessions_csv(result.sessions[ki]));

  for (std::size_t ki = 0; ki < result.kernels.size(); ++ki)
    std::printf("kernel %d mean f1 %.4f mean auc %.4f\n", result.kernels[ki], result.mean_f1[ki],
                result.mean_auc[ki]);
  std::printf("%s-> %s\n", friedman.c_str(), dir.string().c_str());
  return 0;
}

struct GridArgs {
  std::string manifest;
  std::string family = "full";
  int inner_k = 3;
  std::uint64_t seed = 0;
  int kernel = 250;
  double dropout = 0.25;
  std::string out;
  TrainFlags train;
  WindowFlags windowing;
};

int cmd_gridsearch(const GridArgs& a, const fs::path& output_root) {
  const WindowedDataset ds = load_dataset(a.manifest, to_windowing(a.windowing));
  const ModelConfig mc = model_config_for(ds, a.kernel, a.dropout, 0.5);
  const TrainConfig tc = to_train_config(a.train);
  const std::vector<LossConfig> grid =
      a.family == "full" ? full_loss_grid() : family_grid(loss_kind_from_string(a.family));

  std::vector<int> all(static_cast<std::size_t>(ds.windows()));
  for (int i = 0; i < ds.windows(); ++i) all[static_cast<std::size_t>(i)] = i;
  const GridResult result = grid_search_loss<float>(ds, all, grid, mc, tc, a.seed, a.inner_k,
                                                    [](const std::string& line) {
                                                      std::printf("%s\n", line.c_str());
                                                      std::fflush(stdout);
                                                    });

  const fs::path dir = a.out.empty()
                           ? output_root / ("grid-" + a.family + "-seed" + std::to_string(a.seed))
                           : fs::path(a.out);
  fs::create_directories(dir);
  RunRecord rec{{"command", "gridsearch"}, {"manifest", a.manifest}, {"family", a.family},
                {"candidates", std::to_string(grid.size())}, {"inner_k", std::to_string(a.inner_k)},
                {"seed", std::to_string(a.seed)}, {"kernel", std::to_string(a.kernel)},
                {"dropout", csv_value(a.dropout)}};
  append_common_record(rec, a.train, a.windowing, ds);
  write_text_file(dir / "run_record.txt", render_run_record(rec));
  write_text_file(dir / "grid.csv", render_grid_csv(result));
  for (const auto& warning : result.warnings) std::fprintf(stderr, "warning: %s\n", warning.c_str());

  const LossConfig& best = result.candidates[result.selected];
  std::printf("selected %s alpha %s gamma %s beta %s (mean inner f1 %.4f) -> %s\n",
              to_string(best.kind).c_str(), csv_value(best.alpha).c_str(), csv_value(best.gamma).c_str(),
              csv_value(best.beta).c_str(), result.mean_f1[result.selected], dir.string().c_str());
  return 0;
}

struct DetectArgs {
  std::string checkpoint;
  std::string recording;
  double threshold = -1.0;  // negative: use the checkpoint's decision threshold
  std::string out;
};

int cmd_detect(const DetectArgs& a) {
  std::uint64_t ckpt_seed = 0;
  Model<float> model = load_checkpoint<float>(a.checkpoint, &ckpt_seed);
  const ModelConfig& mc = model.config();
  const Recording rec = load_recording(a.recording);
  if (static_cast<int>(rec.electrode_names.size()) != mc.electrodes)
    throw ConfigError("detect: recording '" + rec.case_id + "' has " +
                      std::to_string(rec.electrode_names.size()) + " electrodes but the checkpoint expects " +
                      std::to_string(mc.electrodes));
  if (std::llround(rec.sampling_rate_hz) != mc.sampling_rate_hz)
    throw ConfigError("detect: recording rate " + std::to_string(rec.sampling_rate_hz) +
                      " Hz but the checkpoint expects " + std::to_string(mc.sampling_rate_hz) + " Hz");

  const WindowSet ws = make_windows(rec, Annotation{});
  const int t_count = ws.windows(), e = ws.electrodes(), spw = ws.data.dim(3);
  Tensor<float> probs({t_count, e});
  const int batch = 256;
  for (int from = 0; from < t_count; from += batch) {
    const int count = std::min(batch, t_count - from);
    Tensor<float> x({count, 1, e, spw});
    std::copy_n(ws.data.data() + static_cast<std::size_t>(from) * e * spw,
                static_cast<std::size_t>(count) * e * spw, x.data());
    const Tensor<float> out = model.forward(x, Mode::infer);
    std::copy_n(out.data(), static_cast<std::size_t>(count) * e,
                probs.data() + static_cast<std::size_t>(from) * e);
  }

  const double threshold = a.threshold >= 0.0 ? a.threshold : mc.decision_threshold;
  const auto intervals = detect_intervals(probs, threshold);
  Annotation detected;
  for (const auto& iv : intervals) {
    const std::string& name = rec.electrode_names[static_cast<std::size_t>(iv.electrode)];
    std::printf("%s %d %d\n", name.c_str(), iv.onset_sec, iv.offset_sec);
    detected.intervals.push_back(
        {static_cast<double>(iv.onset_sec), static_cast<double>(iv.offset_sec), {name}});
  }
  std::fprintf(stderr, "%zu intervals in %d scored seconds at threshold %g\n", intervals.size(), t_count,
               threshold);
  if (!a.out.empty()) save_annotation(detected, a.out);
  return 0;
}

int cmd_param_count(int kernel) {
  ModelConfig mc;
  mc.temporal_kernel = kernel;
  Model<float> model(mc);
  std::printf("%lld\n", static_cast<long long>(model.parameter_count(false)));

  long long conv = 0, depthwise = 0, separable = 0, dense = 0, bn_trainable = 0, bn_moving = 0;
  for (const auto& p : model.param_inventory()) {
    long long n = 1;
    for (const int d : p.shape) n *= d;
    if (p.name.rfind("conv_temporal.", 0) == 0) conv += n;
    else if (p.name.rfind("depthwise_conv.", 0) == 0) depthwise += n;
    else if (p.name.rfind("separable_conv.", 0) == 0) separable += n;
    else if (p.name.rfind("dense_sigmoid.", 0) == 0) dense += n;
    else if (p.name.find(".moving_") != std::string::npos) bn_moving += n;
    else bn_trainable += n;
  }
  std::printf("conv_temporal %lld\n", conv);
  std::printf("depthwise_conv %lld\n", depthwise);
  std::printf("separable_conv %lld\n", separable);
  std::printf("dense_sigmoid %lld\n", dense);
  std::printf("batch_norm trainable %lld\n", bn_trainable);
  std::printf("batch_norm moving %lld\n", bn_moving);
  std::printf("trainable %lld\n", static_cast<long long>(model.parameter_count(true)));
  return 0;
}

struct GradArgs {
  std::uint64_t seed = 0;
  int seeds = 1;
  int batch = 2;
  double step = GradCheckConfig{}.step;
  int kernel = 250;
  bool dropout = false;
};

int cmd_gradcheck(const GradArgs& a) {
  ModelConfig mc;
  mc.temporal_kernel = a.kernel;
  GradCheckConfig gc;
  gc.batch = a.batch;
  gc.step = a.step;
  gc.dropout_active = a.dropout;

  double worst = 0.0;
  std::string worst_tensor;
  for (int i = 0; i < a.seeds; ++i) {
    const GradCheckReport report = grad_check_model(mc, a.seed + static_cast<std::uint64_t>(i), gc);
    std::printf("seed %llu max relative error %.3e (%s, %lld gradients)\n",
                static_cast<unsigned long long>(a.seed + static_cast<std::uint64_t>(i)),
                report.max_rel_error, report.worst_tensor.c_str(), static_cast<long long>(report.checked));
    std::fflush(stdout);
    if (report.max_rel_error > worst) {
      worst = report.max_rel_error;
      worst_tensor = report.worst_tensor;
    }
  }
  const bool pass = worst < 1e-4;
  std::printf("max relative error %.3e (%s)\n", worst, worst_tensor.c_str());
  std::printf("%s (tolerance 1e-4)\n", pass ? "PASS" : "FAIL");
  return pass ? 0 : 4;
}

std::vector<CaseEvaluation> parse_cases_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto strip_cr = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw ConfigError("report: cases csv is empty");
  strip_cr(line);
  if (line != "case_id,cells,positives,auc,f1,sensitivity,specificity")
    throw ConfigError("report: unexpected cases csv header '" + line + "'");

  std::vector<CaseEvaluation> rows;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    strip_cr(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t from = 0;
    while (true) {
      const std::size_t comma = line.find(',', from);
      fields.push_back(line.substr(from, comma == std::string::npos ? std::string::npos : comma - from));
      if (comma == std::string::npos) break;
      from = comma + 1;
    }
    if (fields.size() != 7)
      throw ConfigError("report: row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                        " fields, expected 7");
    CaseEvaluation c;
    c.case_id = fields[0];
    try {
      c.cells = std::stoll(fields[1]);
      c.positives = std::stoll(fields[2]);
      const auto metric = [](const std::string& s) {
        return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
      };
      c.auc = metric(fields[3]);
      c.f1 = metric(fields[4]);
      c.sensitivity = metric(fields[5]);
      c.specificity = metric(fields[6]);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("report: row " + std::to_string(row) + " is not numeric: '" + line + "'");
    }
    rows.push_back(std::move(c));
  }
  return rows;
}

int cmd_report(const std::string& cases_path, const std::string& out) {
  const std::vector<CaseEvaluation> rows = parse_cases_csv(read_text_file(cases_path));
  const EvaluationSummary summary = summarize_cases(rows);
  const std::string text = render_evaluation_report(summary, rows.size());
  std::printf("%s", text.c_str());
  if (!out.empty()) write_text_file(out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"per-electrode detection of abnormal one-second EEG windows"};
  app.set_config("--config", "", "read option defaults from an INI/TOML file (flags win)");
  app.require_subcommand(1);

  std::string output_root = "runs";
  app.add_option("--output-root", output_root, "directory for run outputs")
      ->envname("MEEGNET_OUTPUT_ROOT")
      ->capture_default_str();

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic spike-wave dataset");
  synth_cmd->configurable();
  synth_cmd->add_option("--cases", synth.cases, "number of cases")->capture_default_str();
  synth_cmd->add_option("--duration", synth.duration, "seconds per case")->capture_default_str();
  synth_cmd->add_option("--ratio", synth.ratio, "abnormal time fraction")->capture_default_str();
  synth_cmd->add_option("--rate", synth.rate, "sampling rate in Hz")->capture_default_str();
  synth_cmd->add_option("--spike-hz", synth.spike_hz, "spike-wave fundamental in Hz")->capture_default_str();
  synth_cmd->add_option("--electrodes-min", synth.electrodes_min, "fewest electrodes per event")
      ->capture_default_str();
  synth_cmd->add_option("--electrodes-max", synth.electrodes_max, "most electrodes per event")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "output directory (default <output-root>/synth-seed<seed>)");

  ValidateArgs validate;
  CLI::App* validate_cmd = app.add_subcommand("validate", "train and evaluate under a validation protocol");
  validate_cmd->configurable();
  validate_cmd->add_option("--manifest", validate.manifest, "dataset manifest csv")
      ->required();
  validate_cmd->add_option("--protocol", validate.protocol, "kfold or loco")->capture_default_str();
  validate_cmd->add_option("--k", validate.k, "folds for kfold")->capture_default_str();
  validate_cmd->add_option("--repeats", validate.repeats, "kfold repetitions")->capture_default_str();
  validate_cmd->add_option("--seed", validate.seed, "protocol seed")->capture_default_str();
  validate_cmd->add_option("--kernel", validate.kernel, "temporal kernel length")->capture_default_str();
  validate_cmd->add_option("--dropout", validate.dropout, "dropout rate")->capture_default_str();
  validate_cmd->add_option("--threshold", validate.threshold, "decision threshold")->capture_default_str();
  validate_cmd->add_flag("--gridsearch", validate.gridsearch,
                         "pick the loss by inner grid search before each session");
  validate_cmd->add_option("--inner-k", validate.inner_k, "inner folds for --gridsearch")
      ->capture_default_str();
  validate_cmd->add_option("--out", validate.out, "run directory (default under --output-root)");
  add_train_flags(validate_cmd, validate.train);
  add_window_flags(validate_cmd, validate.windowing);

  SweepArgs sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep-kernel", "compare temporal kernel lengths on paired splits");
  sweep_cmd->configurable();
  sweep_cmd->add_option("--manifest", sweep.manifest, "dataset manifest csv")
      ->required();
  sweep_cmd->add_option("--kernels", sweep.kernels, "kernel lengths to compare")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--protocol", sweep.protocol, "kfold or loco")->capture_default_str();
  sweep_cmd->add_option("--k", sweep.k, "folds for kfold")->capture_default_str();
  sweep_cmd->add_option("--repeats", sweep.repeats, "kfold repetitions")->capture_default_str();
  sweep_cmd->add_option("--seed", sweep.seed, "protocol seed")->capture_default_str();
  sweep_cmd->add_option("--dropout", sweep.dropout, "dropout rate")->capture_default_str();
  sweep_cmd->add_option("--threshold", sweep.threshold, "decision threshold")->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out, "run directory (default under --output-root)");
  add_train_flags(sweep_cmd, sweep.train);
  add_window_flags(sweep_cmd, sweep.windowing);

  GridArgs grid;
  CLI::App* grid_cmd = app.add_subcommand("gridsearch", "search loss hyperparameters by inner-fold F1");
  grid_cmd->configurable();
  grid_cmd->add_option("--manifest", grid.manifest, "dataset manifest csv")
      ->required();
  grid_cmd->add_option("--family", grid.family, "candidate family: fl, cbf, bce or full")
      ->capture_default_str();
  grid_cmd->add_option("--inner-k", grid.inner_k, "inner folds")->capture_default_str();
  grid_cmd->add_option("--seed", grid.seed, "search seed")->capture_default_str();
  grid_cmd->add_option("--kernel", grid.kernel, "temporal kernel length")->capture_default_str();
  grid_cmd->add_option("--dropout", grid.dropout, "dropout rate")->capture_default_str();
  grid_cmd->add_option("--out", grid.out, "run directory (default under --output-root)");
  add_train_flags(grid_cmd, grid.train);
  add_window_flags(grid_cmd, grid.windowing);

  DetectArgs detect;
  CLI::App* detect_cmd = app.add_subcommand("detect", "score a recording with a checkpoint and list intervals");
  detect_cmd->configurable();
  detect_cmd->add_option("--checkpoint", detect.checkpoint, "trained checkpoint")
      ->required();
  detect_cmd->add_option("--recording", detect.recording, "recording file")
      ->required();
  detect_cmd->add_option("--threshold", detect.threshold,
                         "decision threshold (default: the checkpoint's)");
  detect_cmd->add_option("--out", detect.out, "also write detections as annotation rows");

  int param_kernel = 250;
  CLI::App* param_cmd = app.add_subcommand("param-count", "print the parameter count and breakdown");
  param_cmd->configurable();
  param_cmd->add_option("--kernel", param_kernel, "temporal kernel length")->capture_default_str();

  GradArgs grad;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the full backward pass");
  grad_cmd->configurable();
  grad_cmd->add_option("--seed", grad.seed, "first seed")->capture_default_str();
  grad_cmd->add_option("--seeds", grad.seeds, "number of consecutive seeds")->capture_default_str();
  grad_cmd->add_option("--batch", grad.batch, "probe batch size")->capture_default_str();
  grad_cmd->add_option("--step", grad.step, "finite-difference step")->capture_default_str();
  grad_cmd->add_option("--kernel", grad.kernel, "temporal kernel length")->capture_default_str();
  grad_cmd->add_flag("--dropout", grad.dropout, "keep dropout active during the check");

  std::string report_cases, report_out;
  CLI::App* report_cmd = app.add_subcommand("report", "re-render the aggregate summary from a cases csv");
  report_cmd->configurable();
  report_cmd->add_option("--cases", report_cases, "cases.csv from a previous run")
      ->required();
  report_cmd->add_option("--out", report_out, "also write the summary to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const fs::path root(output_root);
    // the command-line subcommand is recorded before any config-file section
    // can mark its subcommand parsed, so the first entry is the one requested
    const std::vector<CLI::App*> chosen = app.get_subcommands();
    CLI::App* cmd = chosen.empty() ? nullptr : chosen.front();
    if (cmd == synth_cmd) return cmd_synth(synth, root);
    if (cmd == validate_cmd) return cmd_validate(validate, root);
    if (cmd == sweep_cmd) return cmd_sweep(sweep, root);
    if (cmd == grid_cmd) return cmd_gridsearch(grid, root);
    if (cmd == detect_cmd) return cmd_detect(detect);
    if (cmd == param_cmd) return cmd_param_count(param_kernel);
    if (cmd == grad_cmd) return cmd_gradcheck(grad);
    if (cmd == report_cmd) return cmd_report(report_cases, report_out);
    throw ConfigError("no command selected");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
