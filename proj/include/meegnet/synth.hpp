#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "meegnet/common.hpp"
#include "meegnet/data.hpp"
#include "meegnet/fft.hpp"
#include "meegnet/rng.hpp"

// Synthetic absence-epilepsy recordings: spectrally shaped background noise
// with spike-and-wave discharge events superimposed on annotated intervals.
//
// Background: per electrode, Hermitian spectral synthesis with bin amplitude
//   f^(-exponent/2) * (1 + alpha_gain * exp(-(f - alpha_hz)^2 / (2 * 2^2)))
// (a 1/f^a slope with a rhythmic bump near alpha_hz) and an inverse FFT,
// normalized to the configured RMS. The bump keeps the spectral peak of
// event-free seconds above the spike-and-wave band, so only annotated seconds
// peak below 5 Hz.
//
// Events: a slow sine at spike_wave_hz plus one sharp Gaussian spike per
// cycle, RMS-normalized and scaled to event_rms_scale times the background,
// cosine-tapered at both ends, then added on top of the noise at the affected
// electrodes. Event durations are uniform in [min, max] seconds and
// accumulate to abnormal_ratio * duration (the final event is clamped), so
// the annotated abnormal time hits the requested ratio exactly. Events are
// placed in order with a minimum gap and edge margin; leftover slack is
// spread uniformly. A zero ratio produces a clean recording with no
// annotations.
//
// Every random quantity is drawn from named streams derived from (seed, case
// index), so each case is reproducible in isolation.

namespace meegnet {

struct SynthConfig {
  int cases = 14;
  double duration_seconds = 300.0;
  double sampling_rate_hz = 500.0;
  double abnormal_ratio = 0.027;      // fraction of recorded time that is abnormal
  double spike_wave_hz = 3.0;
  double noise_exponent = 1.0;        // background power ~ 1 / f^exponent
  double alpha_hz = 10.0;             // background rhythm bump position
  double alpha_gain = 4.0;            // bump amplitude factor at its peak
  double background_rms = 20.0;       // microvolts
  double event_rms_scale = 3.0;       // event RMS relative to background, before taper
  double min_event_seconds = 2.0;
  double max_event_seconds = 10.0;
  double min_gap_seconds = 1.0;
  double edge_margin_seconds = 1.0;
  double taper_seconds = 0.2;
  int electrodes_per_event_min = 16;  // 16 = every electrode (annotated as "all")
  int electrodes_per_event_max = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (cases < 1) throw ConfigError("synth: cases must be >= 1");
    if (!(duration_seconds > 0.0)) throw ConfigError("synth: duration_seconds must be positive");
    if (!(sampling_rate_hz > 0.0)) throw ConfigError("synth: sampling_rate_hz must be positive");
    if (!(abnormal_ratio >= 0.0 && abnormal_ratio <= 0.5))
      throw ConfigError("synth: abnormal_ratio must lie in [0, 0.5], got " + std::to_string(abnormal_ratio));
    if (!(spike_wave_hz > 0.0 && spike_wave_hz < 0.5 * sampling_rate_hz))
      throw ConfigError("synth: spike_wave_hz must lie in (0, rate/2)");
    if (!(noise_exponent >= 0.0)) throw ConfigError("synth: noise_exponent must be >= 0");
    if (!(alpha_hz > 0.0 && alpha_hz < 0.5 * sampling_rate_hz))
      throw ConfigError("synth: alpha_hz must lie in (0, rate/2)");
    if (!(alpha_gain >= 0.0)) throw ConfigError("synth: alpha_gain must be >= 0");
    if (!(background_rms > 0.0)) throw ConfigError("synth: background_rms must be positive");
    if (!(event_rms_scale > 0.0)) throw ConfigError("synth: event_rms_scale must be positive");
    if (!(min_event_seconds > 0.0) || !(max_event_seconds >= min_event_seconds))
      throw ConfigError("synth: event durations must satisfy 0 < min <= max");
    if (!(min_gap_seconds >= 0.0) || !(edge_margin_seconds >= 0.0) || !(taper_seconds >= 0.0))
      throw ConfigError("synth: gaps, margins and taper must be >= 0");
    const int e_count = static_cast<int>(canonical_electrodes().size());
    if (electrodes_per_event_min < 1 || electrodes_per_event_max < electrodes_per_event_min ||
        electrodes_per_event_max > e_count)
      throw ConfigError("synth: electrodes_per_event range must satisfy 1 <= min <= max <= " +
                        std::to_string(e_count));
  }
};

namespace detail {

// Spectrally shaped noise of length n with unit RMS: 1/f^a slope times a
// Gaussian bump (sigma 2 Hz) at alpha_hz.
inline std::vector<double> spectral_noise(int n, double rate, double exponent, double alpha_hz,
                                          double alpha_gain, Rng& rng) {
  const std::size_t m = next_pow2(static_cast<std::size_t>(n));
  const double df = rate / static_cast<double>(m);
  auto shape = [&](std::size_t k) {
    const double f = static_cast<double>(k) * df;
    const double bump = alpha_gain * std::exp(-0.5 * (f - alpha_hz) * (f - alpha_hz) / 4.0);
    return std::pow(static_cast<double>(k), -0.5 * exponent) * (1.0 + bump);
  };
  std::vector<std::complex<double>> spec(m, {0.0, 0.0});
  for (std::size_t k = 1; k < m / 2; ++k) {
    const double amp = shape(k);
    spec[k] = {amp * rng.normal(), amp * rng.normal()};
    spec[m - k] = std::conj(spec[k]);
  }
  spec[m / 2] = {shape(m / 2) * rng.normal(), 0.0};
  fft_inplace(spec, /*inverse=*/true);
  std::vector<double> out(static_cast<std::size_t>(n));
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = spec[static_cast<std::size_t>(i)].real();
    sq += out[static_cast<std::size_t>(i)] * out[static_cast<std::size_t>(i)];
  }
  const double rms = std::sqrt(sq / n);
  if (rms > 0)
    for (auto& v : out) v /= rms;
  return out;
}

// Unit-RMS spike-and-wave template of n samples.
inline std::vector<double> spike_wave_template(int n, double rate, double hz, double phase) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double sigma = 0.02;  // spike width in seconds
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  const double seconds = n / rate;
  for (int i = 0; i < n; ++i) {
    const double t = i / rate;
    w[static_cast<std::size_t>(i)] = std::sin(two_pi * hz * t + phase);
  }
  const int cycles = static_cast<int>(std::ceil(seconds * hz));
  for (int c = 0; c < cycles; ++c) {
    const double center = (c + 0.25) / hz;  // spike rides the rising wave
    if (center >= seconds) break;
    const int lo = std::max(0, static_cast<int>((center - 4 * sigma) * rate));
    const int hi = std::min(n, static_cast<int>((center + 4 * sigma) * rate) + 1);
    for (int i = lo; i < hi; ++i) {
      const double dt = i / rate - center;
      w[static_cast<std::size_t>(i)] += 2.0 * std::exp(-0.5 * dt * dt / (sigma * sigma));
    }
  }
  double sq = 0.0;
  for (const double v : w) sq += v * v;
  const double rms = std::sqrt(sq / n);
  if (rms > 0)
    for (auto& v : w) v /= rms;
  return w;
}

}  // namespace detail

// One deterministic synthetic case; `index` is 0-based.
inline LoadedCase synthesize_case(const SynthConfig& cfg, int index) {
  cfg.validate();
  if (index < 0 || index >= cfg.cases) throw ConfigError("synth: case index out of range");
  const std::uint64_t base = Rng::derive(cfg.seed, "case." + std::to_string(index));
  const std::vector<std::string>& names = canonical_electrodes();
  const int e_count = static_cast<int>(names.size());
  const std::int64_t n = std::llround(cfg.duration_seconds * cfg.sampling_rate_hz);
  if (n < 1) throw ConfigError("synth: duration shorter than one sample");

  LoadedCase out;
  Recording& rec = out.recording;
  {
    Rng meta(Rng::derive(base, "meta"));
    char id[16];
    std::snprintf(id, sizeof id, "syn%02d", index + 1);
    rec.case_id = id;
    rec.sex = index % 2 == 0 ? 'M' : 'F';
    rec.age_years = std::round(meta.uniform(4.0, 12.0) * 10.0) / 10.0;
    rec.syndrome = rec.age_years < 10.0 ? "CAE" : "JAE";
    rec.sampling_rate_hz = cfg.sampling_rate_hz;
    rec.electrode_names = names;
    rec.samples = Tensor<float>({e_count, static_cast<int>(n)});
  }

  // Background noise.
  std::vector<std::vector<double>> channels(static_cast<std::size_t>(e_count));
  for (int e = 0; e < e_count; ++e) {
    Rng noise_rng(Rng::derive(base, "noise." + std::to_string(e)));
    channels[static_cast<std::size_t>(e)] = detail::spectral_noise(
        static_cast<int>(n), cfg.sampling_rate_hz, cfg.noise_exponent, cfg.alpha_hz, cfg.alpha_gain, noise_rng);
    for (auto& v : channels[static_cast<std::size_t>(e)]) v *= cfg.background_rms;
  }

  // Event schedule: durations accumulate to the exact abnormal target. A zero
  // target schedules nothing.
  Rng ev_rng(Rng::derive(base, "events"));
  const double target = cfg.abnormal_ratio * cfg.duration_seconds;
  std::vector<double> durations;
  double acc = 0.0;
  while (acc < target) {
    double d = ev_rng.uniform(cfg.min_event_seconds, cfg.max_event_seconds);
    if (acc + d > target) d = target - acc;
    if (d <= 0) break;
    durations.push_back(d);
    acc += d;
  }
  auto span_of = [&cfg](const std::vector<double>& ds) {
    double s = 2.0 * cfg.edge_margin_seconds;
    for (const double d : ds) s += d;
    if (!ds.empty()) s += cfg.min_gap_seconds * static_cast<double>(ds.size() - 1);
    return s;
  };
  while (!durations.empty() && span_of(durations) > cfg.duration_seconds) durations.pop_back();
  if (durations.empty() && target > 0.0)
    throw ConfigError("synth: abnormal_ratio " + std::to_string(cfg.abnormal_ratio) +
                      " cannot be scheduled into " + std::to_string(cfg.duration_seconds) + " s");

  Annotation& ann = out.annotation;
  if (!durations.empty()) {
    const double slack = cfg.duration_seconds - span_of(durations);
    std::vector<double> extras(durations.size() + 1);
    double extras_sum = 0.0;
    for (auto& x : extras) {
      x = ev_rng.uniform();
      extras_sum += x;
    }
    for (auto& x : extras) x = slack * x / extras_sum;

    double cursor = cfg.edge_margin_seconds + extras[0];
    for (std::size_t k = 0; k < durations.size(); ++k) {
      if (k > 0) cursor += cfg.min_gap_seconds + extras[k];
      AnnotatedInterval iv;
      iv.onset_s = cursor;
      iv.offset_s = cursor + durations[k];
      cursor = iv.offset_s;

      // Electrode subset for this event; the full set is annotated as "all".
      std::vector<int> affected;
      const int subset =
          cfg.electrodes_per_event_min +
          static_cast<int>(ev_rng.uniform_index(
              static_cast<std::uint64_t>(cfg.electrodes_per_event_max - cfg.electrodes_per_event_min + 1)));
      if (subset >= e_count) {
        for (int e = 0; e < e_count; ++e) affected.push_back(e);
      } else {
        std::vector<int> pool(static_cast<std::size_t>(e_count));
        for (int e = 0; e < e_count; ++e) pool[static_cast<std::size_t>(e)] = e;
        shuffle_in_place(pool, ev_rng);
        affected.assign(pool.begin(), pool.begin() + subset);
        std::sort(affected.begin(), affected.end());
        for (const int e : affected) iv.electrodes.push_back(names[static_cast<std::size_t>(e)]);
      }
      ann.intervals.push_back(iv);

      // Event waveform, shared across affected electrodes with amplitude jitter.
      Rng morph(Rng::derive(base, "morph." + std::to_string(k)));
      const std::int64_t start = std::llround(iv.onset_s * cfg.sampling_rate_hz);
      const std::int64_t len = std::llround(durations[k] * cfg.sampling_rate_hz);
      const double phase = morph.uniform(0.0, 2.0 * std::numbers::pi);
      std::vector<double> w =
          detail::spike_wave_template(static_cast<int>(len), cfg.sampling_rate_hz, cfg.spike_wave_hz, phase);
      const double amp = cfg.event_rms_scale * cfg.background_rms;
      const std::int64_t taper_n = std::llround(cfg.taper_seconds * cfg.sampling_rate_hz);
      for (const int e : affected) {
        const double jitter = morph.uniform(0.85, 1.15);
        auto& ch = channels[static_cast<std::size_t>(e)];
        for (std::int64_t i = 0; i < len && start + i < n; ++i) {
          double taper = 1.0;
          if (taper_n > 0) {
            if (i < taper_n) taper = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(taper_n)));
            const std::int64_t from_end = len - 1 - i;
            if (from_end < taper_n)
              taper = std::min(taper, 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(from_end) / static_cast<double>(taper_n))));
          }
          ch[static_cast<std::size_t>(start + i)] += amp * jitter * taper * w[static_cast<std::size_t>(i)];
        }
      }
    }
  }

  for (int e = 0; e < e_count; ++e) {
    float* dst = rec.samples.data() + static_cast<std::size_t>(e) * n;
    const auto& ch = channels[static_cast<std::size_t>(e)];
    for (std::int64_t i = 0; i < n; ++i) dst[i] = static_cast<float>(ch[static_cast<std::size_t>(i)]);
  }
  rec.validate();
  validate_annotation_against(rec, ann);
  return out;
}

inline std::vector<LoadedCase> synthesize_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<LoadedCase> cases;
  cases.reserve(static_cast<std::size_t>(cfg.cases));
  for (int i = 0; i < cfg.cases; ++i) cases.push_back(synthesize_case(cfg, i));
  return cases;
}

// Windows every synthesized case and pools the result; the workhorse behind
// in-memory experiments.
inline WindowedDataset synthesize_windows(const SynthConfig& cfg, const WindowingConfig& windowing = {}) {
  std::vector<WindowSet> sets;
  for (const LoadedCase& c : synthesize_dataset(cfg))
    sets.push_back(make_windows(c.recording, c.annotation, windowing));
  return pool_windows(sets);
}

// Writes every case and a manifest.csv into `dir`; returns the manifest rows.
inline std::vector<CaseRecord> write_synthetic_dataset(const SynthConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("synth: cannot create directory '" + dir.string() + "': " + ec.message());
  std::vector<CaseRecord> records;
  for (int i = 0; i < cfg.cases; ++i) {
    const LoadedCase c = synthesize_case(cfg, i);
    CaseRecord r;
    r.case_id = c.recording.case_id;
    r.recording = c.recording.case_id + ".rec";
    r.annotation = c.recording.case_id + ".csv";
    save_recording(c.recording, dir / r.recording);
    save_annotation(c.annotation, dir / r.annotation);
    records.push_back(r);
  }
  save_manifest(records, dir / "manifest.csv");
  return records;
}

}  // namespace meegnet
