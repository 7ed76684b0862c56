#pragma once

// Task drivers behind the command-line tool. Every file goes through
// OutputDir (temp file + rename) and is checksummed into manifest.json.
// Needs OpenSSL (libcrypto) and nlohmann/json.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "lacsim/config.hpp"
#include "lacsim/polarization.hpp"
#include "lacsim/spectra.hpp"

namespace lacsim {

inline constexpr const char* kVersion = "0.1.0";

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

/// JSON number carrying 12 significant digits; NaN/inf become null.
inline nlohmann::ordered_json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::stod(format_number(v));
}

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& path() const { return dir_; }

  /// Writes atomically: readers see either the old file or the complete new one.
  void write(const std::string& name, const std::string& content, bool checksum = true) {
    const auto target = dir_ / name;
    const auto tmp = dir_ / ("." + name + ".tmp");
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) throw Error("cannot write " + tmp.string());
      os << content;
      os.flush();
      if (!os) throw Error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
    if (checksum) files_.push_back({name, sha256_hex(content)});
  }

  struct Written {
    std::string name, sha256;
  };
  const std::vector<Written>& written() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<Written> files_;
};

struct RunOptions {
  int threads = 1;
  std::string backend;  // overrides the config when non-empty
  std::string output_dir;  // overrides the config when non-empty
};

struct RunResult {
  bool fatal = false;
  std::string message;
  std::vector<std::string> files;
  int exit_code() const { return fatal ? 1 : 0; }
};

namespace detail {

using ordered_json = nlohmann::ordered_json;

struct TaskContext {
  const RunConfig& cfg;
  SteadyStateMethod backend;
  int threads;
  OutputDir& out;
  ordered_json& convergence;
  bool fatal = false;
  std::string message;
};

inline DensityMatrix steady_at(const RunConfig& cfg, double b, SteadyStateMethod method) {
  return steady_state(build_block_hamiltonian(cfg.params, b), build_jump_operators(cfg.params), method);
}

inline void run_anticross(TaskContext& ctx) {
  const auto& p = ctx.cfg.params;
  ordered_json report;
  std::vector<std::pair<std::string, Manifold>> which;
  if (ctx.cfg.anticross_manifold != "excited") which.emplace_back("ground", Manifold::ground);
  if (ctx.cfg.anticross_manifold != "ground") which.emplace_back("excited", Manifold::excited);
  for (const auto& [name, m] : which) {
    ordered_json entry;
    const double d = m == Manifold::ground ? p.d_gs : p.d_es;
    entry["expected_b_mT"] = json_number(d / p.gamma_e);
    try {
      const auto r = find_anticrossing(p, m, ctx.cfg.grid.b_lo, ctx.cfg.grid.b_hi);
      entry["b_star_mT"] = json_number(r.b_star);
      entry["gap_MHz"] = json_number(r.gap);
      entry["branch"] = r.branch;
      ctx.convergence[name] = true;
    } catch (const Error& e) {
      entry["error"] = e.what();
      ctx.convergence[name] = false;
      ctx.fatal = true;
      ctx.message = name + ": " + e.what();
    }
    report[name] = entry;
  }
  ctx.out.write("anticross.json", report.dump(2) + "\n");
}

inline void run_sweep(TaskContext& ctx) {
  const auto grid = field_grid(ctx.cfg.grid.b_lo, ctx.cfg.grid.b_hi, ctx.cfg.grid.step);
  SweepOptions opt;
  opt.threads = ctx.threads;
  const auto curve = sweep_polarization(ctx.cfg.params, grid, ctx.backend, opt);
  std::ostringstream csv;
  write_polarization_csv(csv, curve);
  ctx.out.write("polarization.csv", csv.str());
  int failed = 0;
  ordered_json failures = ordered_json::array();
  for (const auto& s : curve.samples) {
    if (s.converged) continue;
    ++failed;
    failures.push_back({{"b_mT", json_number(s.b)}, {"error", s.error}});
  }
  ctx.convergence["samples"] = curve.samples.size();
  ctx.convergence["converged"] = curve.samples.size() - failed;
  ctx.convergence["failures"] = failures;
}

struct SyntheticSpectrum {
  OdmrSpectrum spectrum;
  double polarization;
};

inline SyntheticSpectrum synthesize(TaskContext& ctx) {
  const auto& c = ctx.cfg;
  const DickePopulations d = nuclear_populations(steady_at(c, c.spectrum_b, ctx.backend));
  const double f0 = c.spectrum_f0 > 0.0 ? c.spectrum_f0 : c.params.d_gs + c.params.gamma_e * c.spectrum_b;
  OdmrSpectrum s = synth_odmr(d, f0, c.spectrum_spacing, c.spectrum_fwhm, c.spectrum_scale, c.spectrum_points);
  if (c.spectrum_noise > 0.0) {
    double amp = 0.0;
    for (double v : s.contrast) amp = std::max(amp, std::abs(v));
    std::mt19937_64 rng(static_cast<std::uint64_t>(c.seed));
    std::normal_distribution<double> noise(0.0, c.spectrum_noise * amp);
    for (double& v : s.contrast) v += noise(rng);
  }
  ctx.convergence["steady_state"] = true;
  return {std::move(s), polarization(d)};
}

inline void run_spectrum(TaskContext& ctx) {
  const auto syn = synthesize(ctx);
  std::ostringstream csv;
  write_spectrum_csv(csv, syn.spectrum);
  ctx.out.write("odmr_spectrum.csv", csv.str());
  ctx.convergence["polarization"] = json_number(syn.polarization);
}

inline ordered_json fit_json(const SpectrumFit& f) {
  ordered_json peaks = ordered_json::array();
  for (const auto& pk : f.peaks)
    peaks.push_back({{"center", json_number(pk.center)}, {"fwhm", json_number(pk.fwhm)}, {"area", json_number(pk.area)}});
  return {{"peaks", peaks}, {"baseline", json_number(f.baseline)}, {"residual_rms", json_number(f.residual_rms)}};
}

inline void run_fit(TaskContext& ctx) {
  const auto& c = ctx.cfg;
  OdmrSpectrum s;
  std::optional<double> reference;
  if (!c.fit_input.empty()) {
    std::ifstream in(c.fit_input);
    if (!in) throw Error("cannot read spectrum: " + c.fit_input);
    s = read_spectrum_csv(in);
  } else {
    auto syn = synthesize(ctx);
    s = std::move(syn.spectrum);
    reference = syn.polarization;
  }
  FitOptions opt;
  opt.shared_width = c.fit_shared_width;
  const PeakOrder order = c.fit_order == "plus_first" ? PeakOrder::plus_first : PeakOrder::minus_first;
  ordered_json report;
  try {
    const SpectrumFit fit = fit_lorentzians(s, {}, opt);
    report = fit_json(fit);
    report["polarization"] = json_number(polarization_from_fit(fit, order));
    report["converged"] = true;
    report["iterations"] = fit.iterations;
    ctx.convergence["fit"] = true;
  } catch (const FitError& e) {
    report = fit_json(e.best());
    report["polarization"] = nullptr;
    report["converged"] = false;
    report["error"] = e.what();
    ctx.convergence["fit"] = false;
    ctx.fatal = true;
    ctx.message = e.what();
  } catch (const Error& e) {
    report = {{"peaks", ordered_json::array()}, {"baseline", nullptr}, {"residual_rms", nullptr},
              {"polarization", nullptr}, {"converged", false}, {"error", e.what()}};
    ctx.convergence["fit"] = false;
    ctx.fatal = true;
    ctx.message = e.what();
  }
  if (reference) report["reference_polarization"] = json_number(*reference);
  ctx.out.write("fit_report.json", report.dump(2) + "\n");
}

inline void run_odnmr(TaskContext& ctx) {
  const auto& c = ctx.cfg;
  const DensityMatrix rho = steady_at(c, c.odnmr_b, ctx.backend);
  ctx.convergence["steady_state"] = true;
  OdnmrOptions opt{c.odnmr_f_min, c.odnmr_f_max};
  std::vector<OdnmrLine> lines;
  for (Branch br : {Branch::ms0, Branch::msMinus1}) {
    if (c.odnmr_branch != "both" && parse_branch(c.odnmr_branch) != br) continue;
    const auto part = odnmr_lines(c.params, c.odnmr_b, br, rho, opt);
    lines.insert(lines.end(), part.begin(), part.end());
  }
  std::ostringstream csv;
  write_odnmr_csv(csv, lines);
  ctx.out.write("odnmr_lines.csv", csv.str());
}

/// Single-nucleus (21-state) check of the integrating steady-state solver
/// against the dense null space.
inline void run_oracle(TaskContext& ctx) {
  constexpr double kTolerance = 1e-6;
  const int n = 1;
  const auto jumps = build_jump_operators(ctx.cfg.params, n);
  ordered_json fields = ordered_json::array();
  double worst = 0.0;
  for (double b : {50.0, 124.0, 160.0}) {
    const ComplexMatrix h = build_block_hamiltonian(ctx.cfg.params, b, n);
    const DensityMatrix a = steady_state(h, jumps, SteadyStateMethod::integrate);
    const DensityMatrix ref = steady_state(h, jumps, SteadyStateMethod::nullspace);
    const double dev = (a.matrix() - ref.matrix()).cwiseAbs().maxCoeff();
    worst = std::max(worst, dev);
    fields.push_back({{"b_mT", json_number(b)}, {"max_deviation", json_number(dev)}});
  }
  const bool pass = worst < kTolerance;
  ordered_json report{{"states", 7 * nuclear_dim(n)},
                      {"fields", fields},
                      {"max_deviation", json_number(worst)},
                      {"tolerance", json_number(kTolerance)},
                      {"pass", pass}};
  ctx.out.write("oracle.json", report.dump(2) + "\n");
  ctx.convergence["oracle_pass"] = pass;
  if (!pass) {
    ctx.fatal = true;
    ctx.message = "oracle deviation " + format_number(worst) + " exceeds " + format_number(kTolerance);
  }
}

}  // namespace detail

/// Runs cfg.task and writes its outputs plus manifest.json. Errors inside a
/// task are reported through RunResult (the manifest is still written).
inline RunResult run_task(const RunConfig& cfg, const RunOptions& ro = {}) {
  using detail::ordered_json;
  const auto start = std::chrono::steady_clock::now();
  OutputDir out(ro.output_dir.empty() ? cfg.output_dir : ro.output_dir);
  const std::string backend_name = ro.backend.empty() ? cfg.backend : ro.backend;
  RunConfig effective = cfg;
  effective.backend = backend_name;
  if (!ro.backend.empty()) effective.provenance["backend"] = "user";
  const SteadyStateMethod backend = effective.backend_for(cfg.task);

  ordered_json convergence = ordered_json::object();
  detail::TaskContext ctx{effective, backend, std::max(1, ro.threads), out, convergence, false, {}};
  try {
    switch (cfg.task) {
      case Task::anticross: detail::run_anticross(ctx); break;
      case Task::sweep: detail::run_sweep(ctx); break;
      case Task::spectrum: detail::run_spectrum(ctx); break;
      case Task::odnmr: detail::run_odnmr(ctx); break;
      case Task::fit: detail::run_fit(ctx); break;
      case Task::oracle: detail::run_oracle(ctx); break;
    }
  } catch (const std::exception& e) {
    ctx.fatal = true;
    ctx.message = e.what();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ordered_json config = ordered_json::object();
  for (const auto& e : echo_config(effective)) config[e.key] = {{"value", e.value}, {"provenance", e.provenance}};
  ordered_json files = ordered_json::object();
  for (const auto& f : out.written()) files[f.name] = f.sha256;
  ordered_json manifest{{"version", kVersion},
                        {"task", to_string(cfg.task)},
                        {"backend", to_string(backend)},
                        {"threads", ctx.threads},
                        {"config", config},
                        {"wall_time_s", json_number(wall)},
                        {"convergence", convergence},
                        {"status", ctx.fatal ? "error" : "ok"},
                        {"files", files}};
  if (ctx.fatal) manifest["error"] = ctx.message;
  out.write("manifest.json", manifest.dump(2) + "\n", false);

  RunResult r;
  r.fatal = ctx.fatal;
  r.message = ctx.message;
  for (const auto& f : out.written()) r.files.push_back(f.name);
  r.files.push_back("manifest.json");
  return r;
}

}  // namespace lacsim
