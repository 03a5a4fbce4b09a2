#pragma once
// Run configuration: a fixed schema of section.key entries read from INI
// text, validated, and written back in a canonical form that is hashed for
// provenance.

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace metaqubit {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& msg)
      : std::runtime_error("config key '" + key + "': " + msg), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class KeyType { real, count, text, flag };

struct KeySpec {
  std::string key;  // section.name
  KeyType type = KeyType::real;
  std::string default_value;
  std::string help;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
  bool min_exclusive = false;
  std::vector<std::string> choices;  // text keys only; empty means free text
  bool echoed = true;                // part of the canonical form and hash

  std::string section() const { return key.substr(0, key.find('.')); }
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"detmatrix_s", "detmatrix_d", "darkstates", "tomo",     "rabi",
                                              "synthprep",   "stirap",      "ramsey",     "benchmark"};
  return names;
}

inline const std::vector<KeySpec>& config_schema() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  static const std::vector<KeySpec> schema{
      {"run.seed", KeyType::count, "1", "master seed"},
      {"run.workers", KeyType::count, "1", "worker threads (0 = hardware); never changes results", 0, inf, false,
       {}, false},

      {"scatter.b_gauss", KeyType::real, "2.2", "magnetic field in G", 0},
      {"scatter.saturation_493", KeyType::real, "0.1", "493 nm saturation per polarization", 0, inf, true},
      {"scatter.saturation_650", KeyType::real, "0.1", "650 nm saturation per polarization", 0, inf, true},
      {"scatter.detuning_493_hz", KeyType::real, "0", "493 nm offset from line centre"},
      {"scatter.sigma_detuning_650_hz", KeyType::real, "0", "650 nm sigma offset from line centre"},
      {"scatter.pi_detuning_650_hz", KeyType::real, "0", "650 nm pi offset from line centre"},
      {"scatter.mode", KeyType::text, "coherent", "pumping model", -inf, inf, false, {"coherent", "classical"}},
      {"scatter.trials", KeyType::count, "100000", "trajectories per matrix entry", 1},
      {"scatter.dark_epsilon", KeyType::real, "1e-6", "relative rate below which a state is dark", 0, 1, true},
      {"scatter.step_cap", KeyType::count, "1000000", "jump events per trajectory", 1},

      {"darkstates.polarizations", KeyType::text, "all", "'all' or a list such as sigma+,pi"},

      {"tomo.matrix", KeyType::text, "reference", "'reference', 'simulate' or a detection-matrix JSON path"},
      {"tomo.counts", KeyType::text, "", "counts JSON path; empty synthesizes counts"},
      {"tomo.d", KeyType::text, "0.25,0.25,0.25,0.25", "populations used to synthesize counts"},
      {"tomo.efficiency", KeyType::real, "0.8", "detection efficiency E_d", 0, 1, true},
      {"tomo.background", KeyType::real, "0.1", "background counts per trial C_b", 0},
      {"tomo.trials", KeyType::count, "10000", "trials per detection setting", 1},
      {"tomo.background_model", KeyType::text, "efficiency_scaled", "how C_b enters the counts", -inf, inf, false,
       {"efficiency_scaled", "additive"}},
      {"tomo.weighting", KeyType::text, "poisson", "constrained-fit residual weights", -inf, inf, false,
       {"poisson", "uniform"}},

      {"rabi.kind", KeyType::text, "dm1", "effective drive", -inf, inf, false, {"dm1", "dm2"}},
      {"rabi.flip_time", KeyType::real, "12e-6", "time of the full population transfer in s", 0, inf, true},
      {"rabi.tau", KeyType::real, "200e-6", "depolarization time in s (inf = none)", 0, inf, true},
      {"rabi.phase", KeyType::real, "0", "drive phase in rad"},
      {"rabi.initial", KeyType::text, "d+3/2", "initial basis state", -inf, inf, false,
       {"d-3/2", "d-1/2", "d+1/2", "d+3/2"}},
      {"rabi.t_max", KeyType::real, "48e-6", "last sample time in s", 0, inf, true},
      {"rabi.points", KeyType::count, "49", "number of sample times", 8},
      {"rabi.noise", KeyType::real, "0.01", "Gaussian noise added to each population", 0},

      {"synthprep.transfer_time", KeyType::real, "30e-6", "dm2 time for the full d+3/2 -> d-1/2 transfer in s", 0,
       inf, true},
      {"synthprep.phi", KeyType::real, "3.1415926535897931", "synthetic-state phase in rad"},
      {"synthprep.points", KeyType::count, "61", "samples per trajectory", 2},

      {"stirap.pump_rabi", KeyType::real, "125663706.14359172", "peak pump Rabi frequency in rad/s", 0},
      {"stirap.stokes_rabi", KeyType::real, "125663706.14359172", "peak Stokes Rabi frequency in rad/s", 0},
      {"stirap.width", KeyType::real, "1.5e-6", "Gaussian width in s", 0, inf, true},
      {"stirap.delay", KeyType::real, "1.5e-6", "pump centre minus Stokes centre in s"},
      {"stirap.total", KeyType::real, "10e-6", "sequence duration in s", 0, inf, true},
      {"stirap.detuning", KeyType::real, "0", "one-photon detuning in rad/s"},
      {"stirap.steps", KeyType::count, "20000", "propagation steps", 1},

      {"noise.calibrate", KeyType::flag, "true", "derive sigma_b and the residual rate from the targets"},
      {"noise.s_target_t2", KeyType::real, "96e-6", "S doublet T2* target in s", 0, inf, true},
      {"noise.synth_target_t2", KeyType::real, "350e-6", "D1/D2 T2* target in s (inf = no residual)", 0, inf,
       true},
      {"noise.harmonics", KeyType::text, "60:0.3,120:0.15,180:0.1", "line harmonics as Hz:mG pairs"},
      {"noise.sigma_b_mg", KeyType::real, "0", "static field RMS in mG when not calibrating", 0},
      {"noise.residual_rate", KeyType::real, "0", "residual dephasing rate in 1/s when not calibrating", 0},

      {"ramsey.qubit", KeyType::text, "s", "qubit for a single scan", -inf, inf, false,
       {"s", "dpair", "synth", "custom"}},
      {"ramsey.sensitivity", KeyType::real, "1", "kHz/mG, used when qubit = custom", 0},
      {"ramsey.shots", KeyType::count, "10000", "shots per delay", 1},
      {"ramsey.delay_max", KeyType::real, "300e-6", "longest delay in s", 0, inf, true},
      {"ramsey.points", KeyType::count, "31", "number of delays", 6},
      {"ramsey.readout", KeyType::text, "fringe", "readout convention", -inf, inf, false, {"fringe", "quadrature"}},
  };
  return schema;
}

inline std::vector<std::string> experiment_sections(const std::string& experiment) {
  static const std::map<std::string, std::vector<std::string>> table{
      {"detmatrix_s", {"run", "scatter"}},
      {"detmatrix_d", {"run", "scatter"}},
      {"darkstates", {"run", "scatter", "darkstates"}},
      {"tomo", {"run", "tomo", "scatter"}},
      {"rabi", {"run", "rabi"}},
      {"synthprep", {"run", "synthprep"}},
      {"stirap", {"run", "stirap"}},
      {"ramsey", {"run", "noise", "ramsey"}},
      {"benchmark", {"run", "noise", "ramsey"}},
  };
  const auto it = table.find(experiment);
  if (it == table.end()) throw ConfigError("experiment", "unknown experiment '" + experiment + "'");
  return it->second;
}

/// Trials key overridden by --trials, empty if the experiment has none.
inline std::string trials_key(const std::string& experiment) {
  if (experiment == "detmatrix_s" || experiment == "detmatrix_d") return "scatter.trials";
  if (experiment == "tomo") return "tomo.trials";
  if (experiment == "ramsey" || experiment == "benchmark") return "ramsey.shots";
  return {};
}

namespace detail {

inline const KeySpec* find_key(const std::string& key) {
  for (const auto& k : config_schema())
    if (k.key == key) return &k;
  return nullptr;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string format_real(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Parses and range-checks a raw value; returns its canonical text.
inline std::string canonicalize(const KeySpec& spec, const std::string& raw_in) {
  const std::string raw = trim(raw_in);
  switch (spec.type) {
    case KeyType::real: {
      if (raw.empty()) throw ConfigError(spec.key, "expected a number, got an empty value");
      char* end = nullptr;
      const double x = std::strtod(raw.c_str(), &end);
      if (end != raw.c_str() + raw.size() || std::isnan(x))
        throw ConfigError(spec.key, "expected a number, got '" + raw + "'");
      if (x < spec.min || (spec.min_exclusive && x == spec.min) || x > spec.max)
        throw ConfigError(spec.key, "value " + raw + " is outside the allowed range " +
                                        (spec.min_exclusive ? "(" : "[") + format_real(spec.min) + ", " +
                                        format_real(spec.max) + "]");
      return format_real(x);
    }
    case KeyType::count: {
      if (raw.empty() || raw.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError(spec.key, "expected a nonnegative integer, got '" + raw + "'");
      errno = 0;
      const unsigned long long v = std::strtoull(raw.c_str(), nullptr, 10);
      if (errno == ERANGE) throw ConfigError(spec.key, "integer '" + raw + "' is out of range");
      if (static_cast<double>(v) < spec.min)
        throw ConfigError(spec.key, "must be at least " + format_real(spec.min) + ", got " + raw);
      return std::to_string(v);
    }
    case KeyType::flag: {
      std::string v = raw;
      std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
      if (v == "true" || v == "1" || v == "yes" || v == "on") return "true";
      if (v == "false" || v == "0" || v == "no" || v == "off") return "false";
      throw ConfigError(spec.key, "expected true or false, got '" + raw + "'");
    }
    case KeyType::text:
      if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), raw) == spec.choices.end()) {
        std::string list;
        for (const auto& c : spec.choices) list += (list.empty() ? "" : ", ") + c;
        throw ConfigError(spec.key, "'" + raw + "' is not one of {" + list + "}");
      }
      return raw;
  }
  return raw;
}

}  // namespace detail

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RunConfig {
 public:
  /// Defaults for every key the experiment uses.
  explicit RunConfig(std::string experiment) : experiment_(std::move(experiment)) {
    sections_ = experiment_sections(experiment_);
    for (const auto& k : config_schema())
      if (uses(k.section())) values_[k.key] = detail::canonicalize(k, k.default_value);
  }

  /// Defaults overlaid with INI text. Unknown keys are errors; keys from
  /// sections the experiment does not use are accepted and ignored.
  static RunConfig from_ini(const std::string& experiment, const std::string& text) {
    RunConfig cfg(experiment);
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError("<file>", std::string("malformed INI: ") + e.message() + " at line " +
                                      std::to_string(e.line()));
    }
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty())
        throw ConfigError(section, "keys must live inside a [section]");
      for (const auto& [name, value] : body) {
        const std::string key = section + "." + name;
        if (key == "run.experiment") {
          if (detail::trim(value.data()) != experiment)
            throw ConfigError(key, "file is for '" + detail::trim(value.data()) + "', not '" + experiment + "'");
          continue;
        }
        cfg.set(key, value.data());
      }
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& raw) {
    const KeySpec* spec = detail::find_key(key);
    if (!spec) throw ConfigError(key, "unknown key");
    const std::string canon = detail::canonicalize(*spec, raw);
    if (uses(spec->section())) values_[key] = canon;
  }

  const std::string& experiment() const { return experiment_; }
  bool uses(const std::string& section) const {
    return std::find(sections_.begin(), sections_.end(), section) != sections_.end();
  }

  const std::string& text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "not available for experiment " + experiment_);
    return it->second;
  }
  double real(const std::string& key) const { return std::strtod(text(key).c_str(), nullptr); }
  std::uint64_t count(const std::string& key) const { return std::strtoull(text(key).c_str(), nullptr, 10); }
  bool flag(const std::string& key) const { return text(key) == "true"; }

  /// Echoed keys in schema order, grouped by section.
  std::vector<std::pair<std::string, std::string>> echoed() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& section : sections_)
      for (const auto& k : config_schema())
        if (k.echoed && k.section() == section) out.emplace_back(k.key, values_.at(k.key));
    return out;
  }

  /// Canonical INI; parsing it back yields the same configuration.
  std::string canonical() const {
    std::string s = "[run]\nexperiment = " + experiment_ + "\n";
    std::string current = "run";
    for (const auto& [key, value] : echoed()) {
      const auto dot = key.find('.');
      const std::string section = key.substr(0, dot);
      if (section != current) {
        s += "\n[" + section + "]\n";
        current = section;
      }
      s += key.substr(dot + 1) + " = " + value + "\n";
    }
    return s;
  }

  std::string hash() const {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
    return buf;
  }

 private:
  std::string experiment_;
  std::vector<std::string> sections_;
  std::map<std::string, std::string> values_;
};

/// Splits "a,b,c" into trimmed items, dropping empty ones.
inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace metaqubit
