#pragma once
// Experiment dispatch: each run turns a RunConfig into a set of named output
// files. Every file carries the config hash and seed.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "metaqubit/config.hpp"
#include "metaqubit/dynamics.hpp"
#include "metaqubit/fitting.hpp"
#include "metaqubit/io.hpp"
#include "metaqubit/ramsey.hpp"
#include "metaqubit/scatter.hpp"
#include "metaqubit/stirap.hpp"
#include "metaqubit/tomography.hpp"

namespace metaqubit {

struct Artifact {
  std::string name;
  std::string content;
};

struct RunOutput {
  std::vector<Artifact> files;
  std::vector<std::string> warnings;
};

namespace harness {

inline json provenance(const RunConfig& cfg) {
  json c = json::object();
  for (const auto& [k, v] : cfg.echoed()) c[k] = v;
  return json{{"experiment", cfg.experiment()},
              {"config_hash", cfg.hash()},
              {"seed", cfg.count("run.seed")},
              {"config", c}};
}

inline std::string csv_comment(const RunConfig& cfg) {
  return "experiment=" + cfg.experiment() + ", config_hash=" + cfg.hash() +
         ", seed=" + std::to_string(cfg.count("run.seed"));
}

inline Artifact document(const RunConfig& cfg, const std::string& name, json body) {
  json doc = provenance(cfg);
  doc["result"] = std::move(body);
  return {name, doc.dump(2) + "\n"};
}

inline unsigned workers(const RunConfig& cfg) { return static_cast<unsigned>(cfg.count("run.workers")); }

inline ScatterParams scatter_params(const RunConfig& cfg) {
  ScatterParams p;
  p.b_gauss = cfg.real("scatter.b_gauss");
  p.saturation_493 = cfg.real("scatter.saturation_493");
  p.saturation_650 = cfg.real("scatter.saturation_650");
  p.detuning_493_hz = cfg.real("scatter.detuning_493_hz");
  p.sigma_detuning_650_hz = cfg.real("scatter.sigma_detuning_650_hz");
  p.pi_detuning_650_hz = cfg.real("scatter.pi_detuning_650_hz");
  p.options.mode = cfg.text("scatter.mode") == "classical" ? PumpingMode::classical : PumpingMode::coherent;
  p.options.dark_epsilon = cfg.real("scatter.dark_epsilon");
  p.options.step_cap = cfg.count("scatter.step_cap");
  p.options.workers = workers(cfg);
  return p;
}

inline Polarization parse_polarization(const std::string& s, const std::string& key) {
  for (Polarization p : kAllPolarizations)
    if (to_string(p) == s) return p;
  throw ConfigError(key, "unknown polarization '" + s + "' (use sigma+, sigma- or pi)");
}

inline json quartet_json(const Quartet& v) {
  json a = json::array();
  for (int i = 0; i < 4; ++i) a.push_back(json::array({number(v(i).real()), number(v(i).imag())}));
  return a;
}

inline RunOutput detmatrix(const RunConfig& cfg, bool d_manifold) {
  const ScatterParams p = scatter_params(cfg);
  const auto trials = cfg.count("scatter.trials");
  const auto seed = cfg.count("run.seed");
  const DetectionMatrix m = d_manifold ? detection_matrix_D(p, trials, seed) : detection_matrix_S(p, trials, seed);
  RunOutput out;
  out.warnings = m.warnings;
  out.files.push_back(document(cfg, cfg.experiment() + ".json", to_json(m)));
  return out;
}

inline RunOutput darkstates(const RunConfig& cfg) {
  const std::string spec = cfg.text("darkstates.polarizations");
  std::vector<std::vector<Polarization>> sets;
  if (spec == "all") {
    sets = d_detection_settings();
  } else {
    std::vector<Polarization> pols;
    for (const auto& item : split_list(spec)) pols.push_back(parse_polarization(item, "darkstates.polarizations"));
    if (pols.empty()) throw ConfigError("darkstates.polarizations", "no polarization given");
    sets.push_back(pols);
  }
  const std::array<double, 3> det{cfg.real("scatter.sigma_detuning_650_hz"),
                                  cfg.real("scatter.sigma_detuning_650_hz"), cfg.real("scatter.pi_detuning_650_hz")};
  json result = json::array();
  for (const auto& pols : sets) {
    json states = json::array();
    for (const auto& ds : find_dark_states(pols, cfg.real("scatter.b_gauss"), det))
      states.push_back(json{{"amplitudes", quartet_json(ds.amplitudes)}, {"stationary", ds.stationary}});
    result.push_back(json{{"polarizations", setting_label(pols)}, {"dark_states", states}});
  }
  RunOutput out;
  out.files.push_back(document(cfg, "darkstates.json", json{{"basis", {"d-3/2", "d-1/2", "d+1/2", "d+3/2"}},
                                                             {"settings", result}}));
  return out;
}

inline RunOutput tomo(const RunConfig& cfg) {
  RunOutput out;
  const std::string src = cfg.text("tomo.matrix");
  DetectionMatrix m;
  if (src == "reference") {
    m.mean = reference_detection_matrix();
    m.std_error = Eigen::MatrixXd::Zero(5, 4);
    for (const auto& s : d_detection_settings()) m.rows.push_back(setting_label(s));
    m.cols = {"d-3/2", "d-1/2", "d+1/2", "d+3/2"};
  } else if (src == "simulate") {
    m = detection_matrix_D(scatter_params(cfg), cfg.count("scatter.trials"), cfg.count("run.seed"));
    out.warnings = m.warnings;
  } else {
    json j;
    try {
      j = json::parse(read_text(src));
    } catch (const json::exception& e) {
      throw ConfigError("tomo.matrix", std::string("cannot parse detection matrix: ") + e.what());
    }
    m = detection_matrix_from_json(j.contains("result") ? j.at("result") : j);
  }
  if (m.mean.rows() != 5 || m.mean.cols() != 4)
    throw ConfigError("tomo.matrix", "detection matrix must be 5x4");

  const auto bg = cfg.text("tomo.background_model") == "additive" ? BackgroundModel::additive
                                                                   : BackgroundModel::efficiency_scaled;
  const double eff = cfg.real("tomo.efficiency");
  CountsVector counts;
  json truth = nullptr;
  if (!cfg.text("tomo.counts").empty()) {
    json j = json::parse(read_text(cfg.text("tomo.counts")));
    counts = counts_from_json(j.contains("result") && j.at("result").contains("counts") ? j.at("result").at("counts")
                                                                                          : j);
  } else {
    const auto items = split_list(cfg.text("tomo.d"));
    if (items.size() != 4) throw ConfigError("tomo.d", "expected four comma-separated populations");
    Eigen::Vector4d d;
    for (int i = 0; i < 4; ++i) {
      char* end = nullptr;
      d(i) = std::strtod(items[static_cast<std::size_t>(i)].c_str(), &end);
      if (*end != '\0') throw ConfigError("tomo.d", "'" + items[static_cast<std::size_t>(i)] + "' is not a number");
    }
    if ((d.array() < 0).any() || std::abs(d.sum() - 1.0) > 1e-9)
      throw ConfigError("tomo.d", "populations must be nonnegative and sum to 1");
    counts = synth_counts(d, eff, cfg.real("tomo.background"), m.mean, cfg.count("tomo.trials"),
                          cfg.count("run.seed"), bg, false, m.rows);
    truth = json{{"d", vector_json(d)}, {"C_b", cfg.real("tomo.background")}, {"E_d", eff}};
  }

  const auto weighting =
      cfg.text("tomo.weighting") == "uniform" ? ResidualWeighting::uniform : ResidualWeighting::poisson;
  const PopulationEstimate direct = solve_direct(counts, m.mean, bg, m.rows);
  const PopulationEstimate constrained = solve_constrained(counts, m.mean, eff, bg, weighting);
  if (direct.out_of_bounds) out.warnings.push_back("direct solution has populations outside [0, 1]");
  out.files.push_back(document(cfg, "tomo.json",
                               json{{"matrix", to_json(m)},
                                    {"counts", to_json(counts)},
                                    {"truth", truth},
                                    {"direct", to_json(direct)},
                                    {"constrained", to_json(constrained)}}));
  return out;
}

inline int initial_index(const std::string& label) {
  for (int i = 0; i < 4; ++i)
    if (d_state(2 * i - 3).label() == label) return i;
  throw ConfigError("rabi.initial", "unknown state '" + label + "'");
}

inline std::vector<double> linspace(double lo, double hi, std::uint64_t n) {
  std::vector<double> v(n);
  for (std::uint64_t i = 0; i < n; ++i) v[i] = n > 1 ? lo + (hi - lo) * static_cast<double>(i) / (n - 1.0) : lo;
  return v;
}

inline Eigen::MatrixXd with_time(const std::vector<double>& t, const Eigen::MatrixXd& cols) {
  Eigen::MatrixXd m(cols.rows(), cols.cols() + 1);
  for (Eigen::Index i = 0; i < cols.rows(); ++i) m(i, 0) = t[static_cast<std::size_t>(i)];
  m.rightCols(cols.cols()) = cols;
  return m;
}

inline RunOutput rabi(const RunConfig& cfg) {
  RabiData data;
  data.kind = cfg.text("rabi.kind") == "dm2" ? DriveKind::dm2 : DriveKind::dm1;
  data.phase = cfg.real("rabi.phase");
  data.initial = basis_quartet(2 * initial_index(cfg.text("rabi.initial")) - 3);
  const double flip = cfg.real("rabi.flip_time");
  const double omega = data.kind == DriveKind::dm1 ? std::numbers::pi * std::sqrt(18.0) / flip
                                                   : std::numbers::pi / flip;
  const double tau = cfg.real("rabi.tau");
  data.times = linspace(0.0, cfg.real("rabi.t_max"), cfg.count("rabi.points"));
  const Eigen::MatrixXd clean = rabi_model(data, omega, std::isinf(tau) ? 0.0 : 1.0 / tau);
  data.populations = clean;
  const double noise = cfg.real("rabi.noise");
  if (noise > 0)
    for (Eigen::Index r = 0; r < clean.rows(); ++r)
      for (Eigen::Index c = 0; c < 4; ++c) {
        StreamRng rng(cfg.count("run.seed"), 0x5ab1, static_cast<std::uint64_t>(4 * r + c));
        std::normal_distribution<double> g(0.0, noise);
        data.populations(r, c) += g(rng);
      }
  const RabiFit fit = fit_rabi(data);
  const std::vector<std::string> header{"time_s", "p_d-3/2", "p_d-1/2", "p_d+1/2", "p_d+3/2"};
  RunOutput out;
  out.files.push_back({"rabi_data.csv", csv_table(csv_comment(cfg), header, with_time(data.times, data.populations))});
  out.files.push_back(
      {"rabi_fit_curve.csv",
       csv_table(csv_comment(cfg), header,
                 with_time(data.times, rabi_model(data, fit.rabi, fit.tau_at_bound ? 0.0 : fit.decay_rate)))});
  if (fit.tau_at_bound) out.warnings.push_back("fitted decay rate is pinned at zero (tau unbounded)");
  out.files.push_back(document(cfg, "rabi_fit.json",
                               json{{"kind", to_string(data.kind)},
                                    {"true_rabi", number(omega)},
                                    {"true_tau", number(tau)},
                                    {"rabi", number(fit.rabi)},
                                    {"rabi_sigma", number(fit.rabi_sigma)},
                                    {"tau", number(fit.tau)},
                                    {"tau_sigma", number(fit.tau_sigma)},
                                    {"decay_rate", number(fit.decay_rate)},
                                    {"covariance_rabi_rate", matrix_json(fit.covariance)},
                                    {"residual", number(fit.residual)},
                                    {"tau_at_bound", fit.tau_at_bound},
                                    {"rabi_at_bound", fit.rabi_at_bound}}));
  return out;
}

inline json schedule_json(const PulseSchedule& s, const Quartet& target, double phi) {
  const SynthProjection pr = project_synth(s.result, phi);
  return json{{"drive", to_string(s.drive.kind)},
              {"rabi", number(s.drive.rabi)},
              {"drive_phase", number(s.drive.phase)},
              {"duration", number(s.duration)},
              {"state", quartet_json(s.result)},
              {"fidelity", number(fidelity(s.result, target))},
              {"p_D1", number(pr.p_d1)},
              {"p_D2", number(pr.p_d2)},
              {"leakage", number(pr.leakage)}};
}

inline RunOutput synthprep(const RunConfig& cfg) {
  const double omega = std::numbers::pi / cfg.real("synthprep.transfer_time");
  const double phi = cfg.real("synthprep.phi");
  const auto points = cfg.count("synthprep.points");
  const SynthStates s = make_synth_states(phi);
  const PulseSchedule p1 = prepare_D1(omega, phi);
  const PulseSchedule p2 = prepare_D2(omega, phi);

  // dm2 trajectory from d+3/2 over the full transfer time.
  const auto t_dm2 = linspace(0.0, cfg.real("synthprep.transfer_time"), points);
  const Trajectory tr2 = evolve(basis_quartet(3), p1.drive, DecayModel{}, t_dm2);

  // dm1 drive from D1: rotation by pi maps D1 onto D2.
  const EffectiveDrive dm1{DriveKind::dm1, omega, 0.0, 0.0};
  const auto t_dm1 = linspace(0.0, std::numbers::pi * std::sqrt(18.0) / omega, points);
  const Trajectory tr1 = evolve(s.d1, dm1, DecayModel{}, t_dm1);
  Eigen::MatrixXd proj(static_cast<Eigen::Index>(points), 3);
  double max_d2 = 0.0, max_leak = 0.0;
  for (std::size_t i = 0; i < tr1.states.size(); ++i) {
    const SynthProjection pr = project_synth(tr1.states[i], phi);
    proj.row(static_cast<Eigen::Index>(i)) << pr.p_d1, pr.p_d2, pr.leakage;
    max_d2 = std::max(max_d2, pr.p_d2);
    max_leak = std::max(max_leak, pr.leakage);
  }

  RunOutput out;
  out.files.push_back({"synthprep_dm2.csv", csv_table(csv_comment(cfg),
                                                       {"time_s", "p_d-3/2", "p_d-1/2", "p_d+1/2", "p_d+3/2"},
                                                       with_time(t_dm2, tr2.populations))});
  out.files.push_back({"synthprep_dm1.csv", csv_table(csv_comment(cfg), {"time_s", "p_D1", "p_D2", "leakage"},
                                                       with_time(t_dm1, proj))});
  json jz = json::array();
  const Quartet all[4] = {s.d1, s.d2, s.b1, s.b2};
  for (const auto& a : all) {
    json row = json::array();
    for (const auto& b : all) {
      const cplx v = a.dot(jz_quartet().cast<cplx>() * b);
      row.push_back(json::array({number(v.real()), number(v.imag())}));
    }
    jz.push_back(row);
  }
  out.files.push_back(document(cfg, "synthprep.json",
                               json{{"phi", number(phi)},
                                    {"rabi", number(omega)},
                                    {"states", {{"D1", quartet_json(s.d1)},
                                                {"D2", quartet_json(s.d2)},
                                                {"B1", quartet_json(s.b1)},
                                                {"B2", quartet_json(s.b2)}}},
                                    {"jz_matrix_D1_D2_B1_B2", jz},
                                    {"prepare_D1", schedule_json(p1, s.d1, phi)},
                                    {"prepare_D2", schedule_json(p2, s.d2, phi)},
                                    {"dm1_transfer", {{"max_p_D2", number(max_d2)}, {"max_leakage", number(max_leak)}}}}));
  return out;
}

inline json stirap_json(const StirapResult& r) {
  return json{{"fidelity", number(r.fidelity)},
              {"initial_left", number(r.initial_left)},
              {"peak_p", number(r.peak_p)},
              {"lost", number(r.lost)},
              {"warnings", r.warnings}};
}

inline RunOutput stirap(const RunConfig& cfg) {
  StirapParams p;
  p.pump_rabi = cfg.real("stirap.pump_rabi");
  p.stokes_rabi = cfg.real("stirap.stokes_rabi");
  p.width = cfg.real("stirap.width");
  p.delay = cfg.real("stirap.delay");
  p.total = cfg.real("stirap.total");
  p.detuning = cfg.real("stirap.detuning");
  p.steps = cfg.count("stirap.steps");
  const StirapResult main = stirap_prepare(p);
  StirapParams swapped = p;
  swapped.delay = -p.delay;
  const StirapResult other = stirap_prepare(swapped);
  RunOutput out;
  out.warnings = main.warnings;
  out.files.push_back(document(cfg, "stirap.json", json{{"configured", stirap_json(main)},
                                                        {"reversed_order", stirap_json(other)}}));
  return out;
}

inline std::vector<Harmonic> parse_harmonics(const std::string& s) {
  std::vector<Harmonic> out;
  for (const auto& item : split_list(s)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("noise.harmonics", "entry '" + item + "' is not Hz:mG");
    char* e1 = nullptr;
    char* e2 = nullptr;
    const std::string f = item.substr(0, colon), a = item.substr(colon + 1);
    Harmonic h{std::strtod(f.c_str(), &e1), std::strtod(a.c_str(), &e2)};
    if (*e1 != '\0' || *e2 != '\0' || !(h.frequency_hz > 0) || !(h.amplitude_mg >= 0))
      throw ConfigError("noise.harmonics", "entry '" + item + "' needs frequency > 0 and amplitude >= 0");
    out.push_back(h);
  }
  return out;
}

inline NoiseModel noise_model(const RunConfig& cfg) {
  const auto harmonics = parse_harmonics(cfg.text("noise.harmonics"));
  if (cfg.flag("noise.calibrate")) {
    try {
      return calibrated_noise(cfg.real("noise.s_target_t2"), cfg.real("noise.synth_target_t2"), harmonics);
    } catch (const std::domain_error& e) {
      throw ConfigError("noise.s_target_t2", e.what());
    }
  }
  NoiseModel m;
  m.harmonics = harmonics;
  m.sigma_b_mg = cfg.real("noise.sigma_b_mg");
  m.residual_rate = cfg.real("noise.residual_rate");
  return m;
}

inline json noise_json(const NoiseModel& m) {
  json h = json::array();
  for (const auto& x : m.harmonics) h.push_back(json{{"frequency_hz", x.frequency_hz}, {"amplitude_mg", x.amplitude_mg}});
  return json{{"sigma_b_mg", number(m.sigma_b_mg)}, {"harmonics", h}, {"residual_rate", number(m.residual_rate)}};
}

inline json t2_json(const T2Fit& f) {
  return json{{"t2", number(f.t2)},
              {"t2_sigma", number(f.t2_sigma)},
              {"floor", number(f.floor)},
              {"floor_sigma", number(f.floor_sigma)},
              {"chi2", number(f.chi2)},
              {"at_lower_bound", f.at_lower_bound},
              {"at_upper_bound", f.at_upper_bound}};
}

inline RamseyReadout readout(const RunConfig& cfg) {
  return cfg.text("ramsey.readout") == "quadrature" ? RamseyReadout::quadrature : RamseyReadout::fringe;
}

inline RunOutput ramsey(const RunConfig& cfg) {
  const NoiseModel noise = noise_model(cfg);
  const auto qubits = benchmark_qubits();
  const std::string q = cfg.text("ramsey.qubit");
  const double sens = q == "s" ? qubits[0].sensitivity
                    : q == "dpair" ? qubits[1].sensitivity
                    : q == "synth" ? qubits[2].sensitivity
                                   : cfg.real("ramsey.sensitivity");
  const auto delays = linspace(0.0, cfg.real("ramsey.delay_max"), cfg.count("ramsey.points"));
  const RamseyScan scan =
      ramsey_scan(sens, noise, delays, cfg.count("ramsey.shots"), cfg.count("run.seed"), readout(cfg), workers(cfg));
  const T2Fit fit = fit_t2star(scan);
  Eigen::MatrixXd table(scan.probability.size(), 4);
  table << scan.probability, scan.probability_err, scan.contrast, scan.contrast_err;
  RunOutput out;
  if (fit.at_upper_bound) out.warnings.push_back("T2* exceeds the scan range; fit pinned at its upper bound");
  if (fit.at_lower_bound) out.warnings.push_back("T2* below the shortest delay; only an upper limit is known");
  out.files.push_back({"ramsey.csv", csv_table(csv_comment(cfg),
                                                {"delay_s", "probability", "probability_err", "contrast", "contrast_err"},
                                                with_time(delays, table))});
  out.files.push_back(document(cfg, "ramsey_fit.json",
                               json{{"qubit", q}, {"sensitivity_khz_per_mg", number(sens)}, {"noise", noise_json(noise)},
                                    {"fit", t2_json(fit)}}));
  return out;
}

inline RunOutput benchmark(const RunConfig& cfg) {
  const NoiseModel noise = noise_model(cfg);
  const auto rows = benchmark_suite(noise, cfg.count("ramsey.shots"), cfg.count("run.seed"), benchmark_qubits(),
                                    readout(cfg), workers(cfg));
  RunOutput out;
  json table = json::array();
  for (const auto& r : rows) {
    table.push_back(json{{"qubit", r.qubit}, {"sensitivity_khz_per_mg", number(r.sensitivity)}, {"fit", t2_json(r.fit)}});
    if (r.fit.at_upper_bound) out.warnings.push_back(r.qubit + ": T2* exceeds the scan range (unbounded)");
  }
  out.files.push_back(document(cfg, "benchmark.json",
                               json{{"noise", noise_json(noise)},
                                    {"qubits", table},
                                    {"ratio_synth_over_s", number(rows[2].fit.t2 / rows[0].fit.t2)},
                                    {"ratio_dpair_over_s", number(rows[1].fit.t2 / rows[0].fit.t2)}}));
  return out;
}

}  // namespace harness

/// Runs an experiment and returns its files without touching the disk.
inline RunOutput run_experiment(const RunConfig& cfg) {
  const std::string& e = cfg.experiment();
  if (e == "detmatrix_s") return harness::detmatrix(cfg, false);
  if (e == "detmatrix_d") return harness::detmatrix(cfg, true);
  if (e == "darkstates") return harness::darkstates(cfg);
  if (e == "tomo") return harness::tomo(cfg);
  if (e == "rabi") return harness::rabi(cfg);
  if (e == "synthprep") return harness::synthprep(cfg);
  if (e == "stirap") return harness::stirap(cfg);
  if (e == "ramsey") return harness::ramsey(cfg);
  if (e == "benchmark") return harness::benchmark(cfg);
  throw ConfigError("experiment", "unknown experiment '" + e + "'");
}

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2 };

/// Runs and writes into out_dir. Exit status: 0 ok, 1 config validation,
/// 2 runtime or fit failure.
inline int run(const RunConfig& cfg, const std::string& out_dir, bool quiet, std::ostream& log = std::cerr) {
  try {
    const RunOutput res = run_experiment(cfg);
    std::filesystem::create_directories(out_dir);
    for (const auto& f : res.files) {
      const auto path = (std::filesystem::path(out_dir) / f.name).string();
      write_text(path, f.content);
      if (!quiet) log << "wrote " << path << "\n";
    }
    for (const auto& w : res.warnings) log << "warning: " << w << "\n";
    return exit_ok;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const std::exception& e) {
    log << "error: " << cfg.experiment() << " failed: " << e.what() << "\n";
    return exit_runtime;
  }
}

}  // namespace metaqubit
