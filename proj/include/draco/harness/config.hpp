#pragma once

// Flat key=value configuration with [sections]:
//
//   [simulation]  N d B gamma T P Psi epsilon seed lambda_compute lambda_transmit
//                 topology sampling_interval record_receptions
//   [objective]   kind noise center_mean center_spread features hidden samples batch
//                 l2 separation heterogeneity x0_value x0_noise
//   [channel]     mode field_radius tx_power_dbm path_loss_exponent bandwidth_hz
//                 noise_density_dbm_hz message_bytes gamma_max interference_fraction
//                 ideal_delay
//   [sweep]       axis values repetitions
//   [output]      dir
//
// '#' starts a comment. Unknown sections or keys are errors.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "draco/core/error.hpp"
#include "draco/metrics.hpp"
#include "draco/protocol.hpp"

namespace draco::harness {

enum class SweepAxis { Psi, GammaMax, Topology, Seed };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Psi: return "psi";
    case SweepAxis::GammaMax: return "gamma_max";
    case SweepAxis::Topology: return "topology";
    case SweepAxis::Seed: return "seed";
  }
  return "unknown";
}

struct ExperimentSpec {
  SimulationConfig base;
  SweepAxis axis = SweepAxis::Seed;
  std::vector<std::string> values;
  std::size_t repetitions = 1;
  std::string output_dir = "draco-out";

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Ctx {
  const std::string& source;
  std::size_t line;
  const std::string& key;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source, line, key + ": " + what);
  }
};

inline double parse_double(const Ctx& c, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) c.fail("trailing characters in '" + v + "'");
    return d;
  } catch (const std::logic_error&) {
    c.fail("expected a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const Ctx& c, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) c.fail("expected a nonnegative integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const Ctx& c, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  c.fail("expected true/false, got '" + v + "'");
}

inline TopologyKind parse_topology(const Ctx& c, const std::string& v) {
  if (v == "cycle") return TopologyKind::Cycle;
  if (v == "complete") return TopologyKind::Complete;
  if (v == "geometric") return TopologyKind::Geometric;
  c.fail("unknown topology '" + v + "' (cycle|complete|geometric)");
}

inline ObjectiveKind parse_objective(const Ctx& c, const std::string& v) {
  if (v == "quadratic") return ObjectiveKind::SyntheticQuadratic;
  if (v == "logistic") return ObjectiveKind::LogisticRegression;
  if (v == "mlp") return ObjectiveKind::TinyMLP;
  c.fail("unknown objective '" + v + "' (quadratic|logistic|mlp)");
}

inline ChannelMode parse_mode(const Ctx& c, const std::string& v) {
  if (v == "sinr") return ChannelMode::Sinr;
  if (v == "ideal") return ChannelMode::Ideal;
  c.fail("unknown channel mode '" + v + "' (sinr|ideal)");
}

inline SweepAxis parse_axis(const Ctx& c, const std::string& v) {
  if (v == "psi") return SweepAxis::Psi;
  if (v == "gamma_max") return SweepAxis::GammaMax;
  if (v == "topology") return SweepAxis::Topology;
  if (v == "seed") return SweepAxis::Seed;
  c.fail("unknown sweep axis '" + v + "' (psi|gamma_max|topology|seed)");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

using Setter = std::function<void(ExperimentSpec&, const Ctx&, const std::string&)>;

inline const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = [] {
    std::map<std::string, std::map<std::string, Setter>> t;
    auto& s = t["simulation"];
    s["N"] = [](auto& e, auto& c, auto& v) { e.base.N = parse_uint(c, v); };
    s["d"] = [](auto& e, auto& c, auto& v) { e.base.d = parse_uint(c, v); };
    s["B"] = [](auto& e, auto& c, auto& v) { e.base.B = parse_uint(c, v); };
    s["gamma"] = [](auto& e, auto& c, auto& v) { e.base.gamma = parse_double(c, v); };
    s["T"] = [](auto& e, auto& c, auto& v) { e.base.T = parse_double(c, v); };
    s["P"] = [](auto& e, auto& c, auto& v) { e.base.P = parse_double(c, v); };
    s["Psi"] = [](auto& e, auto& c, auto& v) { e.base.Psi = parse_uint(c, v); };
    s["epsilon"] = [](auto& e, auto& c, auto& v) { e.base.epsilon = parse_double(c, v); };
    s["seed"] = [](auto& e, auto& c, auto& v) { e.base.seed = parse_uint(c, v); };
    s["lambda_compute"] = [](auto& e, auto& c, auto& v) { e.base.lambda_compute = parse_double(c, v); };
    s["lambda_transmit"] = [](auto& e, auto& c, auto& v) { e.base.lambda_transmit = parse_double(c, v); };
    s["topology"] = [](auto& e, auto& c, auto& v) { e.base.topology = parse_topology(c, v); };
    s["sampling_interval"] = [](auto& e, auto& c, auto& v) { e.base.sampling_interval = parse_uint(c, v); };
    s["record_receptions"] = [](auto& e, auto& c, auto& v) { e.base.record_receptions = parse_bool(c, v); };

    auto& o = t["objective"];
    o["kind"] = [](auto& e, auto& c, auto& v) { e.base.objective.kind = parse_objective(c, v); };
    o["noise"] = [](auto& e, auto& c, auto& v) { e.base.objective.noise = parse_double(c, v); };
    o["center_mean"] = [](auto& e, auto& c, auto& v) { e.base.objective.center_mean = parse_double(c, v); };
    o["center_spread"] = [](auto& e, auto& c, auto& v) { e.base.objective.center_spread = parse_double(c, v); };
    o["features"] = [](auto& e, auto& c, auto& v) { e.base.objective.features = parse_uint(c, v); };
    o["hidden"] = [](auto& e, auto& c, auto& v) { e.base.objective.hidden = parse_uint(c, v); };
    o["samples"] = [](auto& e, auto& c, auto& v) { e.base.objective.samples = parse_uint(c, v); };
    o["batch"] = [](auto& e, auto& c, auto& v) { e.base.objective.batch = parse_uint(c, v); };
    o["l2"] = [](auto& e, auto& c, auto& v) { e.base.objective.l2 = parse_double(c, v); };
    o["separation"] = [](auto& e, auto& c, auto& v) { e.base.objective.separation = parse_double(c, v); };
    o["heterogeneity"] = [](auto& e, auto& c, auto& v) { e.base.objective.heterogeneity = parse_double(c, v); };
    o["x0_value"] = [](auto& e, auto& c, auto& v) { e.base.objective.x0_value = parse_double(c, v); };
    o["x0_noise"] = [](auto& e, auto& c, auto& v) { e.base.objective.x0_noise = parse_double(c, v); };

    auto& ch = t["channel"];
    ch["mode"] = [](auto& e, auto& c, auto& v) { e.base.channel.mode = parse_mode(c, v); };
    ch["field_radius"] = [](auto& e, auto& c, auto& v) { e.base.channel.field_radius = parse_double(c, v); };
    ch["tx_power_dbm"] = [](auto& e, auto& c, auto& v) { e.base.channel.tx_power_dbm = parse_double(c, v); };
    ch["path_loss_exponent"] = [](auto& e, auto& c, auto& v) { e.base.channel.path_loss_exponent = parse_double(c, v); };
    ch["bandwidth_hz"] = [](auto& e, auto& c, auto& v) { e.base.channel.bandwidth_hz = parse_double(c, v); };
    ch["noise_density_dbm_hz"] = [](auto& e, auto& c, auto& v) { e.base.channel.noise_density_dbm_hz = parse_double(c, v); };
    ch["message_bytes"] = [](auto& e, auto& c, auto& v) { e.base.channel.message_bytes = parse_double(c, v); };
    ch["gamma_max"] = [](auto& e, auto& c, auto& v) { e.base.channel.gamma_max = parse_double(c, v); };
    ch["interference_fraction"] = [](auto& e, auto& c, auto& v) { e.base.channel.interference_fraction = parse_double(c, v); };
    ch["ideal_delay"] = [](auto& e, auto& c, auto& v) { e.base.channel.ideal_delay = parse_double(c, v); };

    auto& sw = t["sweep"];
    sw["axis"] = [](auto& e, auto& c, auto& v) { e.axis = parse_axis(c, v); };
    sw["values"] = [](auto& e, auto& c, auto& v) {
      e.values = split_list(v);
      if (e.values.empty()) c.fail("value list must be nonempty");
    };
    sw["repetitions"] = [](auto& e, auto& c, auto& v) { e.repetitions = parse_uint(c, v); };

    t["output"]["dir"] = [](auto& e, auto&, auto& v) { e.output_dir = v; };
    return t;
  }();
  return table;
}

}  // namespace detail

// Applies one sweep value to a copy of the base config.
inline SimulationConfig apply_sweep(const SimulationConfig& base, SweepAxis axis,
                                    const std::string& value) {
  SimulationConfig c = base;
  const std::string key = to_string(axis);
  const detail::Ctx ctx{"sweep", 0, key};
  switch (axis) {
    case SweepAxis::Psi: c.Psi = detail::parse_uint(ctx, value); break;
    case SweepAxis::GammaMax: c.channel.gamma_max = detail::parse_double(ctx, value); break;
    case SweepAxis::Topology: c.topology = detail::parse_topology(ctx, value); break;
    case SweepAxis::Seed: c.seed = detail::parse_uint(ctx, value); break;
  }
  return c;
}

inline void validate_spec(ExperimentSpec& e, const std::string& source) {
  if (e.values.empty()) e.values.push_back(std::to_string(e.base.seed));
  if (e.repetitions < 1) throw ConfigError(source, 0, "sweep.repetitions must be >= 1");
  try {
    validate(e.base);
    for (const auto& v : e.values) validate(apply_sweep(e.base, e.axis, v));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(source, 0, err.what());
  }
}

inline ExperimentSpec parse_config_text(const std::string& text, const std::string& source = "<config>") {
  ExperimentSpec spec;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  std::set<std::pair<std::string, std::string>> seen;
  const auto& table = detail::setters();
  while (std::getline(is, raw)) {
    ++lineno;
    auto line = raw.substr(0, raw.find('#'));
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, lineno, "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!table.count(section)) throw ConfigError(source, lineno, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, lineno, "expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(source, lineno, "key '" + key + "' outside any section");
    const auto& keys = table.at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) {
      throw ConfigError(source, lineno, "unknown key '" + key + "' in [" + section + "]");
    }
    if (!seen.insert({section, key}).second) {
      throw ConfigError(source, lineno, "duplicate key '" + key + "' in [" + section + "]");
    }
    if (value.empty()) throw ConfigError(source, lineno, key + ": empty value");
    it->second(spec, detail::Ctx{source, lineno, key}, value);
  }
  validate_spec(spec, source);
  return spec;
}

inline ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

inline std::string serialize_config(const ExperimentSpec& e) {
  const auto& c = e.base;
  const auto& o = c.objective;
  const auto& ch = c.channel;
  auto f = format_double;
  std::ostringstream os;
  os << "[simulation]\n"
     << "N = " << c.N << "\n"
     << "d = " << c.d << "\n"
     << "B = " << c.B << "\n"
     << "gamma = " << f(c.gamma) << "\n"
     << "T = " << f(c.T) << "\n"
     << "P = " << f(c.P) << "\n"
     << "Psi = " << c.Psi << "\n"
     << "epsilon = " << f(c.epsilon) << "\n"
     << "seed = " << c.seed << "\n"
     << "lambda_compute = " << f(c.lambda_compute) << "\n"
     << "lambda_transmit = " << f(c.lambda_transmit) << "\n"
     << "topology = " << to_string(c.topology) << "\n"
     << "sampling_interval = " << c.sampling_interval << "\n"
     << "record_receptions = " << (c.record_receptions ? "true" : "false") << "\n"
     << "\n[objective]\n"
     << "kind = " << to_string(o.kind) << "\n"
     << "noise = " << f(o.noise) << "\n"
     << "center_mean = " << f(o.center_mean) << "\n"
     << "center_spread = " << f(o.center_spread) << "\n"
     << "features = " << o.features << "\n"
     << "hidden = " << o.hidden << "\n"
     << "samples = " << o.samples << "\n"
     << "batch = " << o.batch << "\n"
     << "l2 = " << f(o.l2) << "\n"
     << "separation = " << f(o.separation) << "\n"
     << "heterogeneity = " << f(o.heterogeneity) << "\n"
     << "x0_value = " << f(o.x0_value) << "\n"
     << "x0_noise = " << f(o.x0_noise) << "\n"
     << "\n[channel]\n"
     << "mode = " << to_string(ch.mode) << "\n"
     << "field_radius = " << f(ch.field_radius) << "\n"
     << "tx_power_dbm = " << f(ch.tx_power_dbm) << "\n"
     << "path_loss_exponent = " << f(ch.path_loss_exponent) << "\n"
     << "bandwidth_hz = " << f(ch.bandwidth_hz) << "\n"
     << "noise_density_dbm_hz = " << f(ch.noise_density_dbm_hz) << "\n"
     << "message_bytes = " << f(ch.message_bytes) << "\n"
     << "gamma_max = " << f(ch.gamma_max) << "\n"
     << "interference_fraction = " << f(ch.interference_fraction) << "\n"
     << "ideal_delay = " << f(ch.ideal_delay) << "\n"
     << "\n[sweep]\n"
     << "axis = " << to_string(e.axis) << "\n"
     << "values = ";
  for (std::size_t k = 0; k < e.values.size(); ++k) os << (k ? "," : "") << e.values[k];
  os << "\nrepetitions = " << e.repetitions << "\n"
     << "\n[output]\n"
     << "dir = " << e.output_dir << "\n";
  return os.str();
}

// FNV-1a over the canonical serialization.
inline std::string config_hash(const ExperimentSpec& e) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(e)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace draco::harness
