#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "meegnet/common.hpp"
#include "meegnet/model.hpp"

// Checkpoints are a readable text manifest followed by a raw binary payload:
//
//   meegnet-checkpoint v1
//   precision f64
//   seed <u64>
//   config <key> <value>                (every ModelConfig field, fixed order)
//   tensor <name> <d0xd1...> <offset>   (every parameter tensor, visit order;
//                                        offset counts float64 elements from
//                                        the start of the payload)
//   end_header
//   <little-endian float64 values>
//
// Parameters are always stored as float64, so a float-precision model and a
// double-precision model exchange checkpoints losslessly in the float->double
// direction and with one rounding in the other.

namespace meegnet {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("checkpoint: malformed " + what + " value '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& what) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("checkpoint: malformed " + what + " value '" + s + "'");
  return v;
}

// Seeds use the full unsigned 64-bit range, which overflows parse_int.
inline std::uint64_t parse_uint64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("checkpoint: malformed " + what + " value '" + s + "'");
  return v;
}

inline std::string format_shape_compact(const std::vector<int>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(dims[i]);
  }
  return s;
}

inline std::vector<int> parse_shape_compact(const std::string& s) {
  std::vector<int> dims;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find('x', pos);
    const std::string part = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    dims.push_back(static_cast<int>(parse_int(part, "tensor shape")));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return dims;
}

}  // namespace detail

template <typename S>
void save_checkpoint(Model<S>& model, const std::filesystem::path& path, std::uint64_t seed = 0) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open '" + path.string() + "' for writing");

  const ModelConfig& c = model.config();
  out << "meegnet-checkpoint v1\n";
  out << "precision f64\n";
  out << "seed " << seed << "\n";
  out << "config electrodes " << c.electrodes << "\n";
  out << "config sampling_rate_hz " << c.sampling_rate_hz << "\n";
  out << "config samples_per_window " << c.samples_per_window << "\n";
  out << "config temporal_filters " << c.temporal_filters << "\n";
  out << "config depth_multiplier " << c.depth_multiplier << "\n";
  out << "config separable_filters " << c.separable_filters << "\n";
  out << "config temporal_kernel " << c.temporal_kernel << "\n";
  out << "config separable_kernel " << c.separable_kernel << "\n";
  out << "config pool1 " << c.pool1 << "\n";
  out << "config pool2 " << c.pool2 << "\n";
  out << "config dropout_rate " << detail::format_double(c.dropout_rate) << "\n";
  out << "config bn_epsilon " << detail::format_double(c.bn_epsilon) << "\n";
  out << "config bn_momentum " << detail::format_double(c.bn_momentum) << "\n";
  out << "config decision_threshold " << detail::format_double(c.decision_threshold) << "\n";

  const auto inventory = model.param_inventory();
  std::size_t row = 0;
  std::vector<double> payload;
  model.visit_params([&](const std::string& name, std::vector<S>& v, std::vector<S>*, bool) {
    const auto& info = inventory.at(row++);
    if (info.name != name || info.offset != static_cast<std::int64_t>(payload.size()))
      throw StateError("checkpoint: parameter inventory out of sync at '" + name + "'");
    out << "tensor " << name << " " << detail::format_shape_compact(info.shape) << " " << info.offset << "\n";
    for (const S x : v) payload.push_back(static_cast<double>(x));
  });
  out << "end_header\n";
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) throw IoError("checkpoint: write to '" + path.string() + "' failed");
}

// Rebuilds the model recorded in the manifest and fills its parameters from
// the payload. The manifest inventory (names, shapes, offsets, in order) must
// match the rebuilt model exactly.
template <typename S>
Model<S> load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path.string() + "' for reading");

  std::string line;
  if (!std::getline(in, line) || line != "meegnet-checkpoint v1")
    throw ConfigError("checkpoint: '" + path.string() + "' does not start with 'meegnet-checkpoint v1'");
  if (!std::getline(in, line) || line != "precision f64")
    throw ConfigError("checkpoint: unsupported precision line '" + line + "'");

  struct InventoryRow {
    std::string name;
    std::vector<int> shape;
    std::int64_t offset;
  };
  ModelConfig cfg;
  std::uint64_t seed = 0;
  std::vector<InventoryRow> inventory;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      saw_end = true;
      break;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "seed") {
      std::string v;
      ls >> v;
      seed = detail::parse_uint64(v, "seed");
    } else if (tag == "config") {
      std::string key, value;
      ls >> key >> value;
      if (key == "electrodes") cfg.electrodes = static_cast<int>(detail::parse_int(value, key));
      else if (key == "sampling_rate_hz") cfg.sampling_rate_hz = static_cast<int>(detail::parse_int(value, key));
      else if (key == "samples_per_window") cfg.samples_per_window = static_cast<int>(detail::parse_int(value, key));
      else if (key == "temporal_filters") cfg.temporal_filters = static_cast<int>(detail::parse_int(value, key));
      else if (key == "depth_multiplier") cfg.depth_multiplier = static_cast<int>(detail::parse_int(value, key));
      else if (key == "separable_filters") cfg.separable_filters = static_cast<int>(detail::parse_int(value, key));
      else if (key == "temporal_kernel") cfg.temporal_kernel = static_cast<int>(detail::parse_int(value, key));
      else if (key == "separable_kernel") cfg.separable_kernel = static_cast<int>(detail::parse_int(value, key));
      else if (key == "pool1") cfg.pool1 = static_cast<int>(detail::parse_int(value, key));
      else if (key == "pool2") cfg.pool2 = static_cast<int>(detail::parse_int(value, key));
      else if (key == "dropout_rate") cfg.dropout_rate = detail::parse_double(value, key);
      else if (key == "bn_epsilon") cfg.bn_epsilon = detail::parse_double(value, key);
      else if (key == "bn_momentum") cfg.bn_momentum = detail::parse_double(value, key);
      else if (key == "decision_threshold") cfg.decision_threshold = detail::parse_double(value, key);
      else throw ConfigError("checkpoint: unknown config key '" + key + "'");
    } else if (tag == "tensor") {
      std::string name, shape, offset;
      ls >> name >> shape >> offset;
      if (name.empty() || shape.empty() || offset.empty())
        throw ConfigError("checkpoint: malformed tensor line '" + line + "'");
      inventory.push_back({name, detail::parse_shape_compact(shape), detail::parse_int(offset, "tensor offset")});
    } else {
      throw ConfigError("checkpoint: unexpected manifest line '" + line + "'");
    }
  }
  if (!saw_end) throw ConfigError("checkpoint: manifest is missing the end_header line");

  Model<S> model(cfg);
  const auto expected = model.param_inventory();
  std::size_t cursor = 0;
  std::int64_t total = 0;
  std::vector<std::pair<std::vector<S>*, std::int64_t>> targets;
  model.visit_params([&](const std::string& name, std::vector<S>& v, std::vector<S>*, bool) {
    if (cursor >= inventory.size())
      throw ConfigError("checkpoint: manifest is missing tensor '" + name + "'");
    const InventoryRow& got = inventory[cursor];
    const auto& want = expected[cursor];
    if (got.name != name)
      throw ConfigError("checkpoint: tensor '" + got.name + "' where '" + name + "' was expected");
    if (got.shape != want.shape)
      throw ConfigError("checkpoint: tensor '" + name + "' has shape " + shape_str(got.shape) +
                        ", model expects " + shape_str(want.shape));
    if (got.offset != want.offset)
      throw ConfigError("checkpoint: tensor '" + name + "' at offset " + std::to_string(got.offset) +
                        ", model expects " + std::to_string(want.offset));
    targets.emplace_back(&v, static_cast<std::int64_t>(v.size()));
    total += static_cast<std::int64_t>(v.size());
    ++cursor;
  });
  if (cursor != inventory.size())
    throw ConfigError("checkpoint: manifest lists unknown tensor '" + inventory[cursor].name + "'");

  std::vector<double> payload(static_cast<std::size_t>(total));
  const std::streamsize want_bytes = static_cast<std::streamsize>(payload.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(payload.data()), want_bytes);
  if (in.gcount() != want_bytes)
    throw IoError("checkpoint: payload of '" + path.string() + "' is truncated: expected " +
                  std::to_string(total) + " float64 values (" + std::to_string(want_bytes) + " bytes), read " +
                  std::to_string(in.gcount()) + " bytes");
  for (const double v : payload)
    if (!std::isfinite(v)) throw NumericError("checkpoint: payload of '" + path.string() + "' holds a non-finite value");

  std::size_t offset = 0;
  for (auto& [vec, count] : targets) {
    for (std::int64_t i = 0; i < count; ++i)
      (*vec)[static_cast<std::size_t>(i)] = static_cast<S>(payload[offset + static_cast<std::size_t>(i)]);
    offset += static_cast<std::size_t>(count);
  }
  if (seed_out != nullptr) *seed_out = seed;
  return model;
}

}  // namespace meegnet
