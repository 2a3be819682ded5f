#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "meegnet/common.hpp"
#include "meegnet/losses.hpp"
#include "meegnet/tensor.hpp"

// Recording and annotation file formats, windowing with per-electrode labels,
// and the class-imbalance bookkeeping.
//
// Recording files are a text header followed by raw little-endian float32
// samples, frame-interleaved (one frame = one sample per electrode):
//
//   meegnet-recording v1
//   case_id <token>
//   sex <M|F>
//   age_years <double>
//   syndrome <CAE|JAE>       (childhood / juvenile absence epilepsy)
//   sampling_rate_hz <double>
//   electrode_names <comma-joined tokens>
//   n_samples_per_electrode <int>
//   end_header
//   <n_samples * electrodes float32 values>
//
// Annotation files are CSV with a header row:
//
//   onset,offset,electrodes
//   12.5,19,all
//   30,34.25,F3;C3
//
// Intervals are half-open [onset, offset) in seconds; `all` (or an empty
// electrode list in memory) means every electrode. Lines starting with '#'
// are comments. A dataset manifest is CSV `case_id,recording,annotation`
// with paths resolved against the manifest's directory.

namespace meegnet {

inline const std::vector<std::string>& canonical_electrodes() {
  static const std::vector<std::string> names = {"Fp1", "Fp2", "F3", "F4", "C3", "C4", "P3", "P4",
                                                 "O1",  "O2",  "F7", "F8", "T3", "T4", "T5", "T6"};
  return names;
}

struct Recording {
  std::string case_id;
  char sex = 'M';
  double age_years = 0.0;
  std::string syndrome = "CAE";
  double sampling_rate_hz = 500.0;
  std::vector<std::string> electrode_names;
  Tensor<float> samples;  // (electrodes, n_samples), electrode-major in memory

  int electrodes() const { return samples.rank() >= 1 ? samples.dim(0) : 0; }
  std::int64_t samples_per_electrode() const { return samples.rank() == 2 ? samples.dim(1) : 0; }
  double duration_seconds() const {
    return static_cast<double>(samples_per_electrode()) / sampling_rate_hz;
  }

  void validate() const {
    if (case_id.empty() || case_id.find_first_of(" \t,") != std::string::npos)
      throw ConfigError("recording: case_id must be a non-empty token, got '" + case_id + "'");
    if (sex != 'M' && sex != 'F') throw ConfigError("recording: sex must be M or F");
    if (!(age_years >= 0.0)) throw ConfigError("recording: age_years must be >= 0");
    if (syndrome != "CAE" && syndrome != "JAE")
      throw ConfigError("recording: syndrome must be CAE or JAE, got '" + syndrome + "'");
    if (!(sampling_rate_hz > 0.0)) throw ConfigError("recording: sampling_rate_hz must be positive");
    if (electrode_names.empty()) throw ConfigError("recording: electrode list is empty");
    for (const auto& n : electrode_names) {
      if (n.empty() || n.find_first_of(" \t,;") != std::string::npos)
        throw ConfigError("recording: bad electrode name '" + n + "'");
      if (std::count(electrode_names.begin(), electrode_names.end(), n) != 1)
        throw ConfigError("recording: duplicate electrode name '" + n + "'");
    }
    if (samples.rank() != 2 || samples.dim(0) != static_cast<int>(electrode_names.size()))
      throw ShapeError("recording: samples shape " + shape_str(samples.shape()) + " does not match " +
                       std::to_string(electrode_names.size()) + " electrodes");
    if (!samples.all_finite()) throw NumericError("recording: non-finite sample value");
  }
};

struct AnnotatedInterval {
  double onset_s = 0.0;
  double offset_s = 0.0;
  std::vector<std::string> electrodes;  // empty = all electrodes

  void validate() const {
    if (!(onset_s >= 0.0) || !(offset_s > onset_s))
      throw ConfigError("annotation: interval [" + std::to_string(onset_s) + ", " + std::to_string(offset_s) +
                        ") must satisfy 0 <= onset < offset");
  }
};

struct Annotation {
  std::vector<AnnotatedInterval> intervals;

  void validate() const {
    for (const auto& iv : intervals) iv.validate();
  }
};

namespace detail {

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t from = 0;
  while (true) {
    const std::size_t at = s.find(sep, from);
    if (at == std::string::npos) {
      out.push_back(s.substr(from));
      return out;
    }
    out.push_back(s.substr(from, at - from));
    from = at + 1;
  }
}

inline double parse_double_field(const std::string& s, const std::string& what) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("malformed " + what + " value '" + s + "'");
  return v;
}

inline std::string format_double_field(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// --------------------------------------------------------------------------
// Recording IO.

inline void save_recording(const Recording& rec, const std::filesystem::path& path) {
  rec.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("recording: cannot open '" + path.string() + "' for writing");
  out << "meegnet-recording v1\n";
  out << "case_id " << rec.case_id << "\n";
  out << "sex " << rec.sex << "\n";
  out << "age_years " << detail::format_double_field(rec.age_years) << "\n";
  out << "syndrome " << rec.syndrome << "\n";
  out << "sampling_rate_hz " << detail::format_double_field(rec.sampling_rate_hz) << "\n";
  out << "electrode_names ";
  for (std::size_t i = 0; i < rec.electrode_names.size(); ++i)
    out << (i ? "," : "") << rec.electrode_names[i];
  out << "\n";
  out << "n_samples_per_electrode " << rec.samples_per_electrode() << "\n";
  out << "end_header\n";

  const int e_count = rec.electrodes();
  const std::int64_t n = rec.samples_per_electrode();
  std::vector<float> frame(static_cast<std::size_t>(e_count));
  for (std::int64_t t = 0; t < n; ++t) {
    for (int e = 0; e < e_count; ++e)
      frame[static_cast<std::size_t>(e)] = rec.samples.data()[static_cast<std::size_t>(e) * n + t];
    out.write(reinterpret_cast<const char*>(frame.data()),
              static_cast<std::streamsize>(frame.size() * sizeof(float)));
  }
  if (!out) throw IoError("recording: write to '" + path.string() + "' failed");
}

inline Recording load_recording(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("recording: cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line != "meegnet-recording v1")
    throw ConfigError("recording: '" + path.string() + "' does not start with 'meegnet-recording v1'");

  Recording rec;
  std::int64_t n_samples = -1;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      saw_end = true;
      break;
    }
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos) throw ConfigError("recording: malformed header line '" + line + "'");
    const std::string key = line.substr(0, sp);
    const std::string value = line.substr(sp + 1);
    if (key == "case_id") rec.case_id = value;
    else if (key == "sex") {
      if (value.size() != 1) throw ConfigError("recording: malformed sex value '" + value + "'");
      rec.sex = value[0];
    } else if (key == "age_years") rec.age_years = detail::parse_double_field(value, "age_years");
    else if (key == "syndrome") rec.syndrome = value;
    else if (key == "sampling_rate_hz") rec.sampling_rate_hz = detail::parse_double_field(value, "sampling_rate_hz");
    else if (key == "electrode_names") rec.electrode_names = detail::split_on(value, ',');
    else if (key == "n_samples_per_electrode") n_samples = static_cast<std::int64_t>(detail::parse_double_field(value, key));
    else throw ConfigError("recording: unknown header key '" + key + "'");
  }
  if (!saw_end) throw ConfigError("recording: '" + path.string() + "' is missing the end_header line");
  if (n_samples < 1) throw ConfigError("recording: n_samples_per_electrode must be >= 1");
  if (rec.electrode_names.empty()) throw ConfigError("recording: electrode_names header is missing or empty");

  const int e_count = static_cast<int>(rec.electrode_names.size());
  if (n_samples > (1LL << 31))
    throw ConfigError("recording: n_samples_per_electrode " + std::to_string(n_samples) + " is implausibly large");
  rec.samples = Tensor<float>({e_count, static_cast<int>(n_samples)});
  std::vector<float> frame(static_cast<std::size_t>(e_count));
  for (std::int64_t t = 0; t < n_samples; ++t) {
    in.read(reinterpret_cast<char*>(frame.data()), static_cast<std::streamsize>(frame.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(frame.size() * sizeof(float)))
      throw IoError("recording: payload of '" + path.string() + "' is truncated: expected " +
                    std::to_string(n_samples * e_count) + " float32 values (" + std::to_string(n_samples) +
                    " frames of " + std::to_string(e_count) + "), payload ends inside frame " + std::to_string(t));
    for (int e = 0; e < e_count; ++e)
      rec.samples.data()[static_cast<std::size_t>(e) * n_samples + t] = frame[static_cast<std::size_t>(e)];
  }
  rec.validate();
  return rec;
}

// --------------------------------------------------------------------------
// Annotation IO.

inline void save_annotation(const Annotation& ann, const std::filesystem::path& path) {
  ann.validate();
  std::ofstream out(path);
  if (!out) throw IoError("annotation: cannot open '" + path.string() + "' for writing");
  out << "onset,offset,electrodes\n";
  for (const auto& iv : ann.intervals) {
    out << detail::format_double_field(iv.onset_s) << "," << detail::format_double_field(iv.offset_s) << ",";
    if (iv.electrodes.empty()) {
      out << "all";
    } else {
      for (std::size_t i = 0; i < iv.electrodes.size(); ++i) out << (i ? ";" : "") << iv.electrodes[i];
    }
    out << "\n";
  }
  if (!out) throw IoError("annotation: write to '" + path.string() + "' failed");
}

// Malformed rows are rejected with their 1-based row number.
inline Annotation load_annotation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("annotation: cannot open '" + path.string() + "' for reading");
  Annotation ann;
  std::string line;
  bool first_data = true;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (first_data && line == "onset,offset,electrodes") {
      first_data = false;
      continue;
    }
    first_data = false;
    try {
      const std::vector<std::string> fields = detail::split_on(line, ',');
      if (fields.size() != 3)
        throw ConfigError("'" + line + "' does not have 3 comma-separated fields");
      AnnotatedInterval iv;
      iv.onset_s = detail::parse_double_field(fields[0], "onset");
      iv.offset_s = detail::parse_double_field(fields[1], "offset");
      if (fields[2] != "all") iv.electrodes = detail::split_on(fields[2], ';');
      if (iv.electrodes.size() == 1 && iv.electrodes[0].empty())
        throw ConfigError("electrode list is empty");
      iv.validate();
      ann.intervals.push_back(std::move(iv));
    } catch (const ConfigError& e) {
      throw ConfigError("annotation: '" + path.string() + "' row " + std::to_string(row) + ": " + e.what());
    }
  }
  return ann;
}

// Annotation electrodes must exist in the recording and intervals must end
// within the recorded duration.
inline void validate_annotation_against(const Recording& rec, const Annotation& ann) {
  ann.validate();
  const double duration = rec.duration_seconds();
  for (const auto& iv : ann.intervals) {
    if (iv.offset_s > duration + 1e-9)
      throw ConfigError("annotation: interval ending at " + std::to_string(iv.offset_s) +
                        " s exceeds the recording duration of " + std::to_string(duration) + " s");
    for (const auto& name : iv.electrodes)
      if (std::find(rec.electrode_names.begin(), rec.electrode_names.end(), name) == rec.electrode_names.end())
        throw ConfigError("annotation: unknown electrode '" + name + "' for case " + rec.case_id);
  }
}

// --------------------------------------------------------------------------
// Windowing.

struct WindowingConfig {
  double window_seconds = 1.0;
  double min_overlap_seconds = 0.5;  // label rule: positive when overlap >= this
  bool any_overlap = false;          // alternative rule: positive when overlap > 0

  void validate() const {
    if (!(window_seconds > 0.0)) throw ConfigError("windowing: window_seconds must be positive");
    if (!any_overlap && !(min_overlap_seconds > 0.0 && min_overlap_seconds <= window_seconds))
      throw ConfigError("windowing: min_overlap_seconds must lie in (0, window_seconds]");
  }
};

struct WindowSet {
  std::string case_id;
  double window_seconds = 1.0;
  Tensor<float> data;    // (windows, 1, electrodes, samples_per_window)
  Tensor<float> labels;  // (windows, electrodes), 0/1

  int windows() const { return data.rank() == 4 ? data.dim(0) : 0; }
  int electrodes() const { return data.rank() == 4 ? data.dim(2) : 0; }
};

namespace detail {

// Merged per-electrode interval list: index e holds the union of every
// interval covering electrode e, sorted and non-overlapping.
inline std::vector<std::vector<std::pair<double, double>>> merged_intervals_per_electrode(
    const Recording& rec, const Annotation& ann) {
  const std::size_t e_count = rec.electrode_names.size();
  std::vector<std::vector<std::pair<double, double>>> raw(e_count);
  for (const auto& iv : ann.intervals) {
    if (iv.electrodes.empty()) {
      for (std::size_t e = 0; e < e_count; ++e) raw[e].emplace_back(iv.onset_s, iv.offset_s);
    } else {
      for (const auto& name : iv.electrodes) {
        const auto it = std::find(rec.electrode_names.begin(), rec.electrode_names.end(), name);
        raw[static_cast<std::size_t>(it - rec.electrode_names.begin())].emplace_back(iv.onset_s, iv.offset_s);
      }
    }
  }
  for (auto& list : raw) {
    std::sort(list.begin(), list.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& [on, off] : list) {
      if (!merged.empty() && on <= merged.back().second) {
        merged.back().second = std::max(merged.back().second, off);
      } else {
        merged.emplace_back(on, off);
      }
    }
    list = std::move(merged);
  }
  return raw;
}

inline double overlap_with(const std::vector<std::pair<double, double>>& merged, double t0, double t1) {
  double total = 0.0;
  for (const auto& [on, off] : merged) {
    if (on >= t1) break;
    total += std::max(0.0, std::min(t1, off) - std::max(t0, on));
  }
  return total;
}

}  // namespace detail

// Cuts the recording into consecutive non-overlapping windows and labels each
// (window, electrode) cell from the annotation. A cell is positive when the
// annotated time overlapping the window reaches min_overlap_seconds (or is
// simply non-empty under the any_overlap rule). Trailing samples that do not
// fill a window are dropped.
inline WindowSet make_windows(const Recording& rec, const Annotation& ann, const WindowingConfig& cfg = {}) {
  cfg.validate();
  rec.validate();
  validate_annotation_against(rec, ann);

  const double exact_spw = cfg.window_seconds * rec.sampling_rate_hz;
  const std::int64_t spw = std::llround(exact_spw);
  if (spw < 1 || std::abs(exact_spw - static_cast<double>(spw)) > 1e-9)
    throw ConfigError("windowing: window of " + std::to_string(cfg.window_seconds) + " s is not a whole number of samples at " +
                      std::to_string(rec.sampling_rate_hz) + " Hz");
  const std::int64_t n = rec.samples_per_electrode();
  const int t_count = static_cast<int>(n / spw);
  if (t_count < 1)
    throw ConfigError("windowing: recording of " + std::to_string(n) + " samples is shorter than one window (" +
                      std::to_string(spw) + " samples)");
  const int e_count = rec.electrodes();

  WindowSet ws;
  ws.case_id = rec.case_id;
  ws.window_seconds = cfg.window_seconds;
  ws.data = Tensor<float>({t_count, 1, e_count, static_cast<int>(spw)});
  ws.labels = Tensor<float>({t_count, e_count});

  const float* src = rec.samples.data();
  float* dst = ws.data.data();
  for (int t = 0; t < t_count; ++t)
    for (int e = 0; e < e_count; ++e)
      std::copy(src + static_cast<std::size_t>(e) * n + static_cast<std::int64_t>(t) * spw,
                src + static_cast<std::size_t>(e) * n + static_cast<std::int64_t>(t + 1) * spw,
                dst + (static_cast<std::size_t>(t) * e_count + static_cast<std::size_t>(e)) * spw);

  const auto merged = detail::merged_intervals_per_electrode(rec, ann);
  for (int t = 0; t < t_count; ++t) {
    const double t0 = t * cfg.window_seconds;
    const double t1 = (t + 1) * cfg.window_seconds;
    for (int e = 0; e < e_count; ++e) {
      const double ov = detail::overlap_with(merged[static_cast<std::size_t>(e)], t0, t1);
      const bool positive = cfg.any_overlap ? ov > 0.0 : ov >= cfg.min_overlap_seconds;
      ws.labels.at(t, e) = positive ? 1.0f : 0.0f;
    }
  }
  return ws;
}

// All windows of a dataset pooled into one block, with the owning case and
// onset second kept per window. Splits and training address windows by index
// into this pool.
struct WindowedDataset {
  double window_seconds = 1.0;
  Tensor<float> data;    // (windows, 1, electrodes, samples_per_window)
  Tensor<float> labels;  // (windows, electrodes), 0/1
  std::vector<std::string> case_ids;  // per window
  std::vector<double> onsets;         // per window, seconds from case start

  int windows() const { return data.rank() == 4 ? data.dim(0) : 0; }
  int electrodes() const { return data.rank() == 4 ? data.dim(2) : 0; }

  // Distinct case ids in first-appearance order.
  std::vector<std::string> cases() const {
    std::vector<std::string> out;
    for (const auto& id : case_ids)
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    return out;
  }
};

// Concatenates per-case window sets; the pooled window count is the sum of the
// per-case counts (floor(duration / window) each).
inline WindowedDataset pool_windows(const std::vector<WindowSet>& sets) {
  if (sets.empty()) throw ConfigError("windowing: no window sets to pool");
  const int e_count = sets.front().electrodes();
  const int spw = sets.front().data.dim(3);
  std::int64_t total = 0;
  for (const auto& ws : sets) {
    if (ws.electrodes() != e_count || ws.data.dim(3) != spw ||
        ws.window_seconds != sets.front().window_seconds)
      throw ShapeError("windowing: case '" + ws.case_id + "' does not match the pooled window geometry");
    total += ws.windows();
  }
  WindowedDataset ds;
  ds.window_seconds = sets.front().window_seconds;
  ds.data = Tensor<float>({static_cast<int>(total), 1, e_count, spw});
  ds.labels = Tensor<float>({static_cast<int>(total), e_count});
  ds.case_ids.reserve(static_cast<std::size_t>(total));
  ds.onsets.reserve(static_cast<std::size_t>(total));
  std::int64_t at = 0;
  for (const auto& ws : sets) {
    const std::int64_t n = ws.windows();
    std::copy(ws.data.data(), ws.data.data() + ws.data.numel(),
              ds.data.data() + at * static_cast<std::int64_t>(e_count) * spw);
    std::copy(ws.labels.data(), ws.labels.data() + ws.labels.numel(),
              ds.labels.data() + at * static_cast<std::int64_t>(e_count));
    for (std::int64_t t = 0; t < n; ++t) {
      ds.case_ids.push_back(ws.case_id);
      ds.onsets.push_back(static_cast<double>(t) * ws.window_seconds);
    }
    at += n;
  }
  return ds;
}

// --------------------------------------------------------------------------
// Imbalance bookkeeping.

// (total - abnormal) / abnormal: how many normal seconds exist per abnormal
// second.
inline double imbalance_factor(double total_seconds, double abnormal_seconds) {
  if (!(total_seconds > 0.0)) throw ConfigError("imbalance: total duration must be positive");
  if (!(abnormal_seconds > 0.0))
    throw ConfigError("imbalance: abnormal duration must be positive to form a ratio");
  if (abnormal_seconds > total_seconds)
    throw ConfigError("imbalance: abnormal duration exceeds total duration");
  return (total_seconds - abnormal_seconds) / abnormal_seconds;
}

// Union length in seconds of all annotated intervals, electrode-agnostic.
inline double annotation_abnormal_seconds(const Annotation& ann) {
  std::vector<std::pair<double, double>> iv;
  for (const auto& a : ann.intervals) iv.emplace_back(a.onset_s, a.offset_s);
  std::sort(iv.begin(), iv.end());
  double total = 0.0, cur_on = 0.0, cur_off = -1.0;
  for (const auto& [on, off] : iv) {
    if (cur_off < 0 || on > cur_off) {
      if (cur_off > cur_on) total += cur_off - cur_on;
      cur_on = on;
      cur_off = off;
    } else {
      cur_off = std::max(cur_off, off);
    }
  }
  if (cur_off > cur_on) total += cur_off - cur_on;
  return total;
}

inline ClassCounts count_cells(const std::vector<WindowSet>& sets) {
  ClassCounts counts;
  for (const auto& ws : sets)
    for (std::int64_t i = 0; i < ws.labels.numel(); ++i)
      (ws.labels[static_cast<std::size_t>(i)] == 1.0f ? counts.positives : counts.negatives) += 1;
  return counts;
}

// Cell counts over a subset of pooled windows.
inline ClassCounts count_cells(const WindowedDataset& ds, const std::vector<int>& window_indices) {
  ClassCounts counts;
  const int e_count = ds.electrodes();
  for (const int t : window_indices) {
    if (t < 0 || t >= ds.windows())
      throw ConfigError("windowing: window index " + std::to_string(t) + " out of range");
    for (int e = 0; e < e_count; ++e)
      (ds.labels.at(t, e) == 1.0f ? counts.positives : counts.negatives) += 1;
  }
  return counts;
}

// --------------------------------------------------------------------------
// Dataset manifest.

struct CaseRecord {
  std::string case_id;
  std::filesystem::path recording;
  std::filesystem::path annotation;
};

inline void save_manifest(const std::vector<CaseRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("manifest: cannot open '" + path.string() + "' for writing");
  out << "case_id,recording,annotation\n";
  for (const auto& r : records)
    out << r.case_id << "," << r.recording.generic_string() << "," << r.annotation.generic_string() << "\n";
  if (!out) throw IoError("manifest: write to '" + path.string() + "' failed");
}

inline std::vector<CaseRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open '" + path.string() + "' for reading");
  std::vector<CaseRecord> records;
  std::string line;
  bool first_data = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (first_data && line == "case_id,recording,annotation") {
      first_data = false;
      continue;
    }
    first_data = false;
    const auto fields = detail::split_on(line, ',');
    if (fields.size() != 3)
      throw ConfigError("manifest: line '" + line + "' does not have 3 comma-separated fields");
    for (const auto& r : records)
      if (r.case_id == fields[0]) throw ConfigError("manifest: duplicate case_id '" + fields[0] + "'");
    records.push_back({fields[0], fields[1], fields[2]});
  }
  if (records.empty()) throw ConfigError("manifest: '" + path.string() + "' lists no cases");
  return records;
}

struct LoadedCase {
  Recording recording;
  Annotation annotation;
};

inline LoadedCase load_case(const CaseRecord& record, const std::filesystem::path& base_dir) {
  LoadedCase c;
  c.recording = load_recording(record.recording.is_absolute() ? record.recording : base_dir / record.recording);
  c.annotation = load_annotation(record.annotation.is_absolute() ? record.annotation : base_dir / record.annotation);
  if (c.recording.case_id != record.case_id)
    throw ConfigError("manifest: case '" + record.case_id + "' points at a recording of case '" +
                      c.recording.case_id + "'");
  validate_annotation_against(c.recording, c.annotation);
  return c;
}

// Per-case facts used by validation reports.
struct CaseSummary {
  std::string case_id;
  double duration_seconds = 0.0;
  int electrodes = 0;
  std::size_t intervals = 0;
  double abnormal_seconds = 0.0;
  int windows = 0;
  std::int64_t positive_cells = 0;
  std::int64_t total_cells = 0;
};

inline CaseSummary summarize_case(const Recording& rec, const Annotation& ann,
                                  const WindowingConfig& cfg = {}) {
  const WindowSet ws = make_windows(rec, ann, cfg);
  CaseSummary s;
  s.case_id = rec.case_id;
  s.duration_seconds = rec.duration_seconds();
  s.electrodes = rec.electrodes();
  s.intervals = ann.intervals.size();
  s.abnormal_seconds = annotation_abnormal_seconds(ann);
  s.windows = ws.windows();
  s.total_cells = ws.labels.numel();
  for (std::int64_t i = 0; i < ws.labels.numel(); ++i)
    if (ws.labels[static_cast<std::size_t>(i)] == 1.0f) ++s.positive_cells;
  return s;
}

}  // namespace meegnet
