#pragma once

// Run configuration: flat `key = value` lines with dotted keys, `#` comments.
// Every key has a documented default and a provenance tag; keys set by the
// file are tagged "user".

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lacsim/format.hpp"
#include "lacsim/params.hpp"
#include "lacsim/spectra.hpp"

namespace lacsim {

enum class Task { anticross, sweep, spectrum, odnmr, fit, oracle };

inline const char* to_string(Task t) {
  switch (t) {
    case Task::anticross: return "anticross";
    case Task::sweep: return "sweep";
    case Task::spectrum: return "spectrum";
    case Task::odnmr: return "odnmr";
    case Task::fit: return "fit";
    case Task::oracle: return "oracle";
  }
  return "?";
}

inline Task parse_task(const std::string& s) {
  for (Task t : {Task::anticross, Task::sweep, Task::spectrum, Task::odnmr, Task::fit, Task::oracle})
    if (s == to_string(t)) return t;
  throw Error("unknown task: " + s);
}

struct FieldGrid {
  double b_lo = 28.0;
  double b_hi = 200.0;
  double step = 2.0;
};

struct RunConfig {
  SystemParams params{};
  Task task = Task::sweep;
  FieldGrid grid{};
  /// Empty: secular for sweeps, integrate for single-field solves.
  std::string backend;
  std::string output_dir = "out";
  long seed = 0;

  std::string anticross_manifold = "both";  // ground | excited | both

  double spectrum_b = 124.0;
  double spectrum_f0 = 0.0;  // 0: d_gs + gamma_e * b
  double spectrum_spacing = 47.0;
  double spectrum_fwhm = 10.0;
  double spectrum_scale = -1.0;
  double spectrum_noise = 0.0;  // Gaussian sigma, fraction of max |contrast|
  int spectrum_points = 2001;

  std::string fit_input;  // spectrum CSV; empty: synthesize as in the spectrum task
  std::string fit_order = "minus_first";
  bool fit_shared_width = false;

  double odnmr_b = 80.0;
  std::string odnmr_branch = "both";
  double odnmr_f_min = 0.01;
  double odnmr_f_max = 200.0;

  /// key -> provenance ("table_s1", "assumption" or "user").
  std::map<std::string, std::string> provenance;

  SteadyStateMethod backend_for(Task t) const {
    if (!backend.empty()) return parse_steady_state_method(backend);
    return t == Task::sweep ? SteadyStateMethod::secular : SteadyStateMethod::integrate;
  }
};

namespace detail {

struct ConfigKey {
  std::string name;
  const char* origin;  // provenance of the default
  bool numeric;
  std::function<void(RunConfig&, double, const std::string&)> set;
  std::function<std::string(const RunConfig&)> echo;
};

inline ConfigKey number_key(std::string name, const char* origin, double RunConfig::*member) {
  return {std::move(name), origin, true,
          [member](RunConfig& c, double v, const std::string&) { c.*member = v; },
          [member](const RunConfig& c) { return format_number(c.*member); }};
}

inline ConfigKey param_key(std::string name, const char* origin, double SystemParams::*member) {
  return {std::move(name), origin, true,
          [member](RunConfig& c, double v, const std::string&) { c.params.*member = v; },
          [member](const RunConfig& c) { return format_number(c.params.*member); }};
}

inline ConfigKey rate_key(std::string name, double RateSet::*member) {
  return {std::move(name), "table_s1", true,
          [member](RunConfig& c, double v, const std::string&) { c.params.rates.*member = v; },
          [member](const RunConfig& c) { return format_number(c.params.rates.*member); }};
}

inline ConfigKey hyperfine_key(std::string name, Hyperfine SystemParams::*member, int axis) {
  return {std::move(name), "table_s1", true,
          [member, axis](RunConfig& c, double v, const std::string&) { (c.params.*member)[axis] = v; },
          [member, axis](const RunConfig& c) { return format_number((c.params.*member)[axis]); }};
}

inline ConfigKey string_key(std::string name, std::string RunConfig::*member,
                            std::function<void(const std::string&)> check = {}) {
  return {std::move(name), "assumption", false,
          [member, check](RunConfig& c, double, const std::string& v) {
            if (check) check(v);
            c.*member = v;
          },
          [member](const RunConfig& c) { return c.*member; }};
}

inline ConfigKey integer_key(std::string name, std::function<void(RunConfig&, long)> set,
                             std::function<long(const RunConfig&)> get) {
  return {std::move(name), "assumption", true,
          [set, name](RunConfig& c, double v, const std::string&) {
            if (v != std::floor(v)) throw Error("value of " + name + " must be an integer");
            set(c, static_cast<long>(v));
          },
          [get](const RunConfig& c) { return std::to_string(get(c)); }};
}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(param_key("params.d_gs", "assumption", &SystemParams::d_gs));
    k.push_back(param_key("params.d_es", "assumption", &SystemParams::d_es));
    k.push_back(param_key("params.gamma_e", "assumption", &SystemParams::gamma_e));
    k.push_back(param_key("params.gamma_n", "assumption", &SystemParams::gamma_n));
    k.push_back(param_key("params.q", "assumption", &SystemParams::q));
    k.push_back(param_key("params.pump_rate", "assumption", &SystemParams::pump_rate));
    const char* axes[] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) k.push_back(hyperfine_key(std::string("params.a_gs.") + axes[a], &SystemParams::a_gs, a));
    for (int a = 0; a < 3; ++a) k.push_back(hyperfine_key(std::string("params.a_es.") + axes[a], &SystemParams::a_es, a));
    k.push_back(rate_key("params.rates.gamma_r", &RateSet::gamma_r));
    k.push_back(rate_key("params.rates.gamma_0", &RateSet::gamma_0));
    k.push_back(rate_key("params.rates.gamma_1", &RateSet::gamma_1));
    k.push_back(rate_key("params.rates.kappa_0", &RateSet::kappa_0));
    k.push_back(rate_key("params.rates.kappa_1", &RateSet::kappa_1));
    k.push_back(rate_key("params.rates.gamma_mix", &RateSet::gamma_mix));

    k.push_back({"task", "assumption", false,
                 [](RunConfig& c, double, const std::string& v) { c.task = parse_task(v); },
                 [](const RunConfig& c) { return std::string(to_string(c.task)); }});
    k.push_back({"grid.b_lo", "assumption", true,
                 [](RunConfig& c, double v, const std::string&) { c.grid.b_lo = v; },
                 [](const RunConfig& c) { return format_number(c.grid.b_lo); }});
    k.push_back({"grid.b_hi", "assumption", true,
                 [](RunConfig& c, double v, const std::string&) { c.grid.b_hi = v; },
                 [](const RunConfig& c) { return format_number(c.grid.b_hi); }});
    k.push_back({"grid.step", "assumption", true,
                 [](RunConfig& c, double v, const std::string&) { c.grid.step = v; },
                 [](const RunConfig& c) { return format_number(c.grid.step); }});
    k.push_back(string_key("backend", &RunConfig::backend,
                           [](const std::string& v) { parse_steady_state_method(v); }));
    k.push_back(string_key("output_dir", &RunConfig::output_dir));
    k.push_back(integer_key("seed", [](RunConfig& c, long v) { c.seed = v; },
                            [](const RunConfig& c) { return c.seed; }));

    k.push_back(string_key("anticross.manifold", &RunConfig::anticross_manifold, [](const std::string& v) {
      if (v != "ground" && v != "excited" && v != "both") throw Error("anticross.manifold must be ground, excited or both");
    }));
    k.push_back(number_key("spectrum.b", "assumption", &RunConfig::spectrum_b));
    k.push_back(number_key("spectrum.f0", "assumption", &RunConfig::spectrum_f0));
    k.push_back(number_key("spectrum.spacing", "assumption", &RunConfig::spectrum_spacing));
    k.push_back(number_key("spectrum.fwhm", "assumption", &RunConfig::spectrum_fwhm));
    k.push_back(number_key("spectrum.scale", "assumption", &RunConfig::spectrum_scale));
    k.push_back(number_key("spectrum.noise", "assumption", &RunConfig::spectrum_noise));
    k.push_back(integer_key("spectrum.points", [](RunConfig& c, long v) { c.spectrum_points = static_cast<int>(v); },
                            [](const RunConfig& c) { return static_cast<long>(c.spectrum_points); }));
    k.push_back(string_key("fit.input", &RunConfig::fit_input));
    k.push_back(string_key("fit.order", &RunConfig::fit_order, [](const std::string& v) {
      if (v != "minus_first" && v != "plus_first") throw Error("fit.order must be minus_first or plus_first");
    }));
    k.push_back(integer_key("fit.shared_width", [](RunConfig& c, long v) { c.fit_shared_width = v != 0; },
                            [](const RunConfig& c) { return static_cast<long>(c.fit_shared_width); }));
    k.push_back(number_key("odnmr.b", "assumption", &RunConfig::odnmr_b));
    k.push_back(string_key("odnmr.branch", &RunConfig::odnmr_branch, [](const std::string& v) {
      if (v != "both") parse_branch(v);
    }));
    k.push_back(number_key("odnmr.f_min", "assumption", &RunConfig::odnmr_f_min));
    k.push_back(number_key("odnmr.f_max", "assumption", &RunConfig::odnmr_f_max));
    return k;
  }();
  return keys;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses configuration text; `source` names it in error messages.
inline RunConfig parse_config(const std::string& text, const std::string& source = "config") {
  RunConfig cfg;
  const auto& keys = detail::config_keys();
  for (const auto& k : keys) cfg.provenance[k.name] = k.origin;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(where + "expected key=value: " + detail::trim(raw));
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return k.name == key; });
    if (it == keys.end()) throw Error("unknown key: " + key);
    if (seen.count(key)) throw Error(where + "duplicate key: " + key);
    seen[key] = lineno;
    double number = 0.0;
    if (it->numeric) {
      const char* first = value.data();
      const char* last = value.data() + value.size();
      const auto [ptr, ec] = std::from_chars(first, last, number);
      if (value.empty() || ec != std::errc() || ptr != last || !std::isfinite(number))
        throw Error(where + "non-numeric value for " + key + ": '" + value + "' in line: " + detail::trim(raw));
    }
    try {
      it->set(cfg, number, value);
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
    cfg.provenance[key] = "user";
  }
  validate(cfg.params);
  if (!(cfg.grid.step > 0.0)) throw Error("grid.step must be positive");
  if (!(cfg.grid.b_lo < cfg.grid.b_hi)) throw Error("grid.b_lo must be below grid.b_hi");
  if (cfg.grid.b_lo < 0.0) throw Error("grid.b_lo must be non-negative");
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), path.string());
  if (!cfg.fit_input.empty() && std::filesystem::path(cfg.fit_input).is_relative())
    cfg.fit_input = (path.parent_path() / cfg.fit_input).string();
  return cfg;
}

/// Key, echoed value and provenance for every configuration key, in schema order.
struct ConfigEcho {
  std::string key, value, provenance;
};

inline std::vector<ConfigEcho> echo_config(const RunConfig& cfg) {
  std::vector<ConfigEcho> out;
  for (const auto& k : detail::config_keys()) {
    const auto p = cfg.provenance.find(k.name);
    out.push_back({k.name, k.echo(cfg), p == cfg.provenance.end() ? k.origin : p->second});
  }
  return out;
}

}  // namespace lacsim
