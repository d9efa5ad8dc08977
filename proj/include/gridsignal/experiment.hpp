#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gridsignal/control.hpp"
#include "gridsignal/metrics.hpp"

namespace gridsignal {

inline constexpr const char* kVersion = "0.1.0";

// Configuration problems (bad file, bad flag, bad combination) exit with
// code 1; anything that fails during a run exits with code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MethodSpec {
  std::string label;   // column value in tables; defaults to the kind name
  SolverConfig solver;
  bool calibrate = false;  // local only: pick theta per (alpha, eta) cell
};

struct ExperimentConfig {
  int roads = 8;
  int steps = 200;
  std::vector<double> alphas{0.8};
  std::vector<double> etas{1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<MethodSpec> methods;
  int burn_in = -1;  // -1 resolves to steps / 4
  std::string out_dir = "out";
  int workers = 1;
  int snapshot_time = 100;
  bool snapshots = true;
  int max_lag = 30;
  double bin_width = 1.0;
  std::vector<int> spatial_snapshots;  // defaults to {snapshot_time}
  std::vector<double> theta_candidates;
  int partition_max_size = 64;
  double q_av = 1.0;
  double dt = 1.0;

  int resolved_burn_in() const { return burn_in >= 0 ? burn_in : steps / 4; }
  std::vector<int> resolved_spatial_snapshots() const {
    if (!spatial_snapshots.empty()) return spatial_snapshots;
    return {std::min(snapshot_time, steps)};
  }
};

inline std::vector<MethodSpec> default_methods() {
  MethodSpec local;
  local.label = "local";
  local.solver.kind = SolverKind::local;
  MethodSpec sa;
  sa.label = "sa";
  sa.solver.kind = SolverKind::simulated_annealing;
  return {local, sa};
}

inline std::vector<double> default_theta_candidates() {
  std::vector<double> t;
  for (int k = 0; k <= 12; ++k) t.push_back(0.25 * k);
  return t;
}

namespace detail {

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError("unknown key \"" + key + "\" in " + where);
    }
  }
}

inline std::vector<double> number_or_list(const json& v, const std::string& where) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array() && !v.empty()) {
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(where + " must hold numbers");
      out.push_back(e.get<double>());
    }
  } else {
    throw ConfigError(where + " must be a number or a non-empty list");
  }
  return out;
}

inline MethodSpec parse_method(const json& m, const ExperimentConfig& cfg) {
  if (!m.is_object() || !m.contains("name")) {
    throw ConfigError("each methods entry needs a \"name\"");
  }
  require_keys(m, {"name", "label", "theta", "calibrate", "num_reads", "sweeps", "beta_min",
                   "beta_max", "max_size", "passes", "random_restarts"},
               "methods entry");
  MethodSpec spec;
  try {
    spec.solver.kind = solver_kind_from_string(m.at("name").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  spec.label = m.value("label", std::string(to_string(spec.solver.kind)));
  spec.solver.theta = m.value("theta", 1.0);
  spec.calibrate = m.value("calibrate", false);
  spec.solver.num_reads = m.value("num_reads", 100);
  spec.solver.sweeps = m.value("sweeps", 1000);
  spec.solver.beta_min = m.value("beta_min", 0.1);
  spec.solver.beta_max = m.value("beta_max", 10.0);
  spec.solver.partition_max_size = m.value("max_size", cfg.partition_max_size);
  spec.solver.partition_passes = m.value("passes", 1);
  spec.solver.random_restarts = m.value("random_restarts", false);
  if (spec.solver.theta < 0.0) throw ConfigError("theta must be nonnegative");
  if (spec.solver.num_reads < 1) throw ConfigError("num_reads must be positive");
  if (spec.solver.sweeps < 1) throw ConfigError("sweeps must be positive");
  if (spec.solver.partition_max_size < 1) throw ConfigError("max_size must be positive");
  if (spec.calibrate && spec.solver.kind != SolverKind::local) {
    throw ConfigError("calibrate applies to the local method only");
  }
  return spec;
}

}  // namespace detail

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.roads < 3) throw ConfigError("L must be at least 3");
  if (cfg.steps < 1) throw ConfigError("T must be at least 1");
  if (cfg.alphas.empty() || cfg.etas.empty()) throw ConfigError("empty parameter sweep");
  if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (cfg.methods.empty()) throw ConfigError("methods must be non-empty");
  if (cfg.workers < 1) throw ConfigError("workers must be positive");
  if (cfg.resolved_burn_in() > cfg.steps) throw ConfigError("burn_in exceeds T");
  if (cfg.max_lag < 4 || cfg.max_lag > cfg.steps) {
    throw ConfigError("max_lag must lie in [4, T]");
  }
  if (cfg.bin_width <= 0.0) throw ConfigError("bin_width must be positive");
  {
    // The damped-cosine fit needs at least 5 occupied distance bins.
    std::set<int> bins;
    int half = cfg.roads / 2;
    for (int dr = 0; dr <= half; ++dr) {
      for (int dc = 0; dc <= half; ++dc) {
        double d = std::sqrt(static_cast<double>(dr) * dr + static_cast<double>(dc) * dc);
        bins.insert(static_cast<int>(std::floor(d / cfg.bin_width + 0.5)));
      }
    }
    if (bins.size() < 5) {
      throw ConfigError("bin_width " + format_double(cfg.bin_width) +
                        " yields fewer than 5 spatial bins at L=" +
                        std::to_string(cfg.roads) + "; use a smaller bin_width");
    }
  }
  for (double a : cfg.alphas) {
    if (a < -1.0 || a > 1.0) throw ConfigError("alpha must lie in [-1, 1]");
  }
  for (double e : cfg.etas) {
    if (e < 0.0) throw ConfigError("eta must be nonnegative");
  }
  for (int t : cfg.resolved_spatial_snapshots()) {
    if (t < 0 || t > cfg.steps) throw ConfigError("spatial snapshot time outside [0, T]");
  }
  std::set<std::string> labels;
  for (const auto& m : cfg.methods) {
    if (!labels.insert(m.label).second) {
      throw ConfigError("duplicate method label \"" + m.label + "\"");
    }
    if (m.solver.kind == SolverKind::exact && cfg.roads * cfg.roads > 25) {
      throw ConfigError("exact method needs L*L <= 25");
    }
  }
}

inline ExperimentConfig parse_config_json(const nlohmann::json& j,
                                          const ExperimentConfig& base = {}) {
  ExperimentConfig cfg = base;
  detail::require_keys(j, {"L", "T", "alpha", "eta", "seeds", "methods", "burn_in", "out",
                           "workers", "snapshot_time", "snapshots", "max_lag", "bin_width",
                           "spatial_snapshots", "theta_candidates", "partition_max_size",
                           "q_av", "dt"},
                       "config");
  cfg.roads = j.value("L", cfg.roads);
  cfg.steps = j.value("T", cfg.steps);
  if (j.contains("alpha")) cfg.alphas = detail::number_or_list(j.at("alpha"), "alpha");
  if (j.contains("eta")) cfg.etas = detail::number_or_list(j.at("eta"), "eta");
  if (j.contains("seeds")) {
    cfg.seeds.clear();
    if (!j.at("seeds").is_array() || j.at("seeds").empty()) {
      throw ConfigError("seeds must be a non-empty list");
    }
    for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
  }
  cfg.burn_in = j.value("burn_in", cfg.burn_in);
  cfg.out_dir = j.value("out", cfg.out_dir);
  cfg.workers = j.value("workers", cfg.workers);
  cfg.snapshot_time = j.value("snapshot_time", cfg.snapshot_time);
  cfg.snapshots = j.value("snapshots", cfg.snapshots);
  cfg.max_lag = j.value("max_lag", cfg.max_lag);
  cfg.bin_width = j.value("bin_width", cfg.bin_width);
  if (j.contains("spatial_snapshots")) {
    cfg.spatial_snapshots.clear();
    for (const auto& t : j.at("spatial_snapshots")) cfg.spatial_snapshots.push_back(t.get<int>());
  }
  if (j.contains("theta_candidates")) {
    cfg.theta_candidates = detail::number_or_list(j.at("theta_candidates"), "theta_candidates");
  }
  cfg.partition_max_size = j.value("partition_max_size", cfg.partition_max_size);
  cfg.q_av = j.value("q_av", cfg.q_av);
  cfg.dt = j.value("dt", cfg.dt);
  if (j.contains("methods")) {
    if (!j.at("methods").is_array() || j.at("methods").empty()) {
      throw ConfigError("methods must be a non-empty list");
    }
    cfg.methods.clear();
    for (const auto& m : j.at("methods")) cfg.methods.push_back(detail::parse_method(m, cfg));
  }
  if (cfg.methods.empty()) cfg.methods = default_methods();
  if (cfg.theta_candidates.empty()) cfg.theta_candidates = default_theta_candidates();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path,
                                    const ExperimentConfig& base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config_json(j, base);
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["L"] = cfg.roads;
  j["T"] = cfg.steps;
  j["alpha"] = cfg.alphas;
  j["eta"] = cfg.etas;
  j["seeds"] = cfg.seeds;
  j["burn_in"] = cfg.resolved_burn_in();
  j["out"] = cfg.out_dir;
  j["workers"] = cfg.workers;
  j["snapshot_time"] = cfg.snapshot_time;
  j["snapshots"] = cfg.snapshots;
  j["max_lag"] = cfg.max_lag;
  j["bin_width"] = cfg.bin_width;
  j["spatial_snapshots"] = cfg.resolved_spatial_snapshots();
  j["theta_candidates"] = cfg.theta_candidates;
  j["partition_max_size"] = cfg.partition_max_size;
  j["q_av"] = cfg.q_av;
  j["dt"] = cfg.dt;
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : cfg.methods) {
    nlohmann::json e;
    e["name"] = to_string(m.solver.kind);
    e["label"] = m.label;
    e["theta"] = m.solver.theta;
    e["calibrate"] = m.calibrate;
    e["num_reads"] = m.solver.num_reads;
    e["sweeps"] = m.solver.sweeps;
    e["beta_min"] = m.solver.beta_min;
    e["beta_max"] = m.solver.beta_max;
    e["max_size"] = m.solver.partition_max_size;
    e["passes"] = m.solver.partition_passes;
    e["random_restarts"] = m.solver.random_restarts;
    methods.push_back(e);
  }
  j["methods"] = methods;
  return j;
}

// Runs one controlled trajectory: the state is initialized from the seed,
// and at every step the problem is built from (x(t), sigma(t-1)), solved by
// the method, and the bias advanced with the chosen signal.
inline TrajectoryLog run_trajectory(const ExperimentConfig& cfg, const MethodSpec& method,
                                    double alpha, double eta, std::uint64_t seed) {
  Lattice city(cfg.roads);
  ModelParams p;
  p.alpha = alpha;
  p.eta = eta;
  p.q_av = cfg.q_av;
  p.dt = cfg.dt;
  SolverConfig scfg = method.solver;
  scfg.seed = seed;
  Controller ctl(city, p, scfg);

  TrajectoryLog log;
  log.roads = cfg.roads;
  log.alpha = alpha;
  log.eta = eta;
  log.method = method.label;
  log.seed = seed;
  log.x.reserve(cfg.steps + 1);
  log.sigma.reserve(cfg.steps + 1);
  log.energy.reserve(cfg.steps + 1);

  auto [x, sigma] = init_state(cfg.roads, seed);
  log.x.push_back(x);
  log.sigma.push_back(sigma);
  log.energy.push_back(
      evaluate(build_problem_with(ctl.coupling(), x, sigma, p, city), sigma));

  for (int t = 1; t <= cfg.steps; ++t) {
    x = step_bias(x, sigma, p, ctl.adjacency_matrix());
    auto [next_sigma, res] = ctl.step(TrafficState{x, sigma}, mix_seed(seed, t));
    sigma = std::move(next_sigma);
    log.x.push_back(x);
    log.sigma.push_back(sigma);
    log.energy.push_back(res.energy);
  }
  return log;
}

inline std::vector<double> magnetization_series(const TrajectoryLog& log) {
  std::vector<double> m;
  m.reserve(log.sigma.size());
  for (const auto& s : log.sigma) m.push_back(magnetization(s));
  return m;
}

struct CalibrationResult {
  double theta_hat = 0.0;
  std::vector<std::pair<double, double>> table;  // (theta, H_bar)
};

// Protocol for matching the local rule to a given objective weight: run the
// local controller for every candidate theta, time-average the objective
// with the given eta, and keep the minimizer. Ties go to the smaller theta.
inline CalibrationResult calibrate_theta(double eta, double alpha,
                                         const std::vector<double>& candidates,
                                         const ExperimentConfig& cfg) {
  if (candidates.empty()) throw ConfigError("calibrate_theta: empty candidate set");
  MethodSpec local;
  local.label = "local";
  local.solver.kind = SolverKind::local;
  CalibrationResult out;
  bool first = true;
  double best = 0.0;
  for (double theta : candidates) {
    local.solver.theta = theta;
    TrajectoryLog log = run_trajectory(cfg, local, alpha, eta, cfg.seeds.front());
    double h_bar = time_average(log.energy, cfg.resolved_burn_in());
    out.table.emplace_back(theta, h_bar);
    if (first || h_bar < best || (h_bar == best && theta < out.theta_hat)) {
      first = false;
      best = h_bar;
      out.theta_hat = theta;
    }
  }
  return out;
}

// L x L dot grid; red = north-south (+1), blue = east-west (-1).
inline void render_snapshot(const SignalVector& sigma, const Lattice& city, std::ostream& os) {
  if (static_cast<int>(sigma.size()) != city.size()) {
    throw std::invalid_argument("render_snapshot: dimension mismatch");
  }
  int cell = 10;
  int extent = cell * (city.roads() - 1) + 20;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << extent << "\" height=\""
     << extent << "\" viewBox=\"0 0 " << extent << ' ' << extent << "\">\n";
  os << "<rect width=\"" << extent << "\" height=\"" << extent << "\" fill=\"white\"/>\n";
  for (int i = 0; i < city.size(); ++i) {
    int cx = cell * city.col(i) + 10;
    int cy = cell * city.row(i) + 10;
    os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"4\" fill=\""
       << (sigma[i] == +1 ? "#d62728" : "#1f77b4") << "\"/>\n";
  }
  os << "</svg>\n";
}

inline void render_snapshot_file(const SignalVector& sigma, const Lattice& city,
                                 const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  render_snapshot(sigma, city, os);
}

struct SummaryRow {
  std::string label;
  double alpha = 0.0;
  double eta = 0.0;
  double h_mean = 0.0, h_std = 0.0;
  double m_mean = 0.0, m_std = 0.0;
  double lambda_t = 0.0, omega_t = 0.0;
  double lambda_s = 0.0, omega_s = 0.0;
};

struct SweepResult {
  std::vector<SummaryRow> summary;
  std::vector<std::string> files;
  std::string out_dir;
};

namespace detail {

struct CellStats {
  std::vector<double> energy;  // per step, t = 0..T
  std::vector<double> m;
  CorrelationCurve temporal;
  CorrelationCurve spatial;
  SignalVector snapshot;
  double h_bar = 0.0;
  double m_bar = 0.0;
};

inline double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline double std_of(const std::vector<double>& v) {
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

inline std::string cell_tag(double alpha, double eta) {
  return "a" + format_double(alpha) + "_e" + format_double(eta);
}

inline CellStats run_cell(const ExperimentConfig& cfg, const MethodSpec& method, double alpha,
                          double eta, std::uint64_t seed, bool keep_snapshot) {
  TrajectoryLog log = run_trajectory(cfg, method, alpha, eta, seed);
  CellStats stats;
  stats.energy = log.energy;
  stats.m = magnetization_series(log);
  stats.h_bar = time_average(log.energy, cfg.resolved_burn_in());
  stats.m_bar = time_average(stats.m, cfg.resolved_burn_in());
  // Fully synchronized signals have no correlation signal to measure; such
  // cells simply contribute no curve instead of failing the sweep.
  try {
    stats.temporal = temporal_autocorrelation(log, cfg.max_lag);
  } catch (const std::domain_error&) {
  }
  Lattice city(cfg.roads);
  std::vector<CorrelationCurve> spatials;
  for (int t : cfg.resolved_spatial_snapshots()) {
    try {
      spatials.push_back(spatial_autocorrelation(log.sigma[t], city, cfg.bin_width));
    } catch (const std::domain_error&) {
    }
  }
  if (!spatials.empty()) stats.spatial = average_curves(spatials);
  if (keep_snapshot) {
    stats.snapshot = log.sigma[std::min(cfg.snapshot_time, cfg.steps)];
  }
  return stats;
}

inline void write_file(const std::string& path, const std::string& content,
                       std::vector<std::string>& files) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << content;
  files.push_back(path);
}

inline std::string curve_csv(const CorrelationCurve& curve) {
  std::string out = "z,R\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    out += format_double(curve.z[k]) + "," + format_double(curve.r[k]) + "\n";
  }
  return out;
}

}  // namespace detail

// Cartesian product over methods x alpha x eta x seeds. Cells run on a
// worker pool; artifacts are merged in deterministic cell order, so output
// bytes do not depend on scheduling or worker count.
inline SweepResult sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  auto t_start = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out_dir);

  struct Cell {
    std::size_t method_idx;
    std::size_t alpha_idx;
    std::size_t eta_idx;
    std::size_t seed_idx;
    double theta = 0.0;  // resolved theta for calibrated local methods
  };

  // Theta calibration happens up front (sequential, cheap: local control
  // only) so cells stay independent.
  std::map<std::pair<std::size_t, std::size_t>, CalibrationResult> calibrations;
  bool any_calibrated = false;
  for (const auto& m : cfg.methods) any_calibrated |= m.calibrate;
  if (any_calibrated) {
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
      for (std::size_t e = 0; e < cfg.etas.size(); ++e) {
        calibrations[{a, e}] =
            calibrate_theta(cfg.etas[e], cfg.alphas[a], cfg.theta_candidates, cfg);
      }
    }
  }

  std::vector<Cell> cells;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
      for (std::size_t e = 0; e < cfg.etas.size(); ++e) {
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
          Cell c{mi, a, e, s, cfg.methods[mi].solver.theta};
          if (cfg.methods[mi].calibrate) c.theta = calibrations[{a, e}].theta_hat;
          cells.push_back(c);
        }
      }
    }
  }

  std::vector<detail::CellStats> results(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= cells.size()) return;
      const Cell& c = cells[k];
      MethodSpec method = cfg.methods[c.method_idx];
      method.solver.theta = c.theta;
      try {
        results[k] = detail::run_cell(cfg, method, cfg.alphas[c.alpha_idx],
                                      cfg.etas[c.eta_idx], cfg.seeds[c.seed_idx],
                                      cfg.snapshots && c.seed_idx == 0);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  int workers = std::min<int>(cfg.workers, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!errors[k].empty()) {
      const Cell& c = cells[k];
      throw std::runtime_error(
          "sweep cell failed (method=" + cfg.methods[c.method_idx].label +
          " alpha=" + format_double(cfg.alphas[c.alpha_idx]) +
          " eta=" + format_double(cfg.etas[c.eta_idx]) +
          " seed=" + std::to_string(cfg.seeds[c.seed_idx]) + "): " + errors[k]);
    }
  }

  SweepResult result;
  result.out_dir = cfg.out_dir;

  // trace.csv: every logged step of every cell.
  std::string trace = "t,method,alpha,eta,seed,H,m\n";
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const Cell& c = cells[k];
    const auto& st = results[k];
    for (std::size_t t = 0; t < st.energy.size(); ++t) {
      trace += std::to_string(t) + "," + cfg.methods[c.method_idx].label + "," +
               format_double(cfg.alphas[c.alpha_idx]) + "," +
               format_double(cfg.etas[c.eta_idx]) + "," +
               std::to_string(cfg.seeds[c.seed_idx]) + "," + format_double(st.energy[t]) +
               "," + format_double(st.m[t]) + "\n";
    }
  }
  detail::write_file((fs::path(cfg.out_dir) / "trace.csv").string(), trace, result.files);

  // summary.csv: per (method, alpha, eta) aggregation across seeds; the
  // correlation fits run on the across-seed mean curves.
  std::string summary =
      "method,alpha,eta,H_mean,H_std,m_mean,m_std,lambda_t,omega_t,lambda_s,omega_s\n";
  Lattice city(cfg.roads);
  std::size_t ns = cfg.seeds.size();
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
      for (std::size_t e = 0; e < cfg.etas.size(); ++e) {
        std::size_t base = ((mi * cfg.alphas.size() + a) * cfg.etas.size() + e) * ns;
        std::vector<double> h_bars, m_bars;
        std::vector<CorrelationCurve> tcurves, scurves;
        for (std::size_t s = 0; s < ns; ++s) {
          h_bars.push_back(results[base + s].h_bar);
          m_bars.push_back(results[base + s].m_bar);
          if (results[base + s].temporal.size() > 0) {
            tcurves.push_back(results[base + s].temporal);
          }
          if (results[base + s].spatial.size() > 0) {
            scurves.push_back(results[base + s].spatial);
          }
        }
        // Seeds whose signals fully synchronized contribute no curve; with
        // no curves at all the fit columns hold nan.
        double qnan = std::numeric_limits<double>::quiet_NaN();
        CorrelationCurve tmean, smean;
        DampedCosineFit tfit{qnan, qnan, qnan};
        DampedCosineFit sfit{qnan, qnan, qnan};
        if (!tcurves.empty()) {
          tmean = average_curves(tcurves);
          tfit = fit_damped_cosine(tmean);
        }
        if (!scurves.empty()) {
          smean = average_curves(scurves);
          sfit = fit_damped_cosine(smean);
        }

        SummaryRow row;
        row.label = cfg.methods[mi].label;
        row.alpha = cfg.alphas[a];
        row.eta = cfg.etas[e];
        row.h_mean = detail::mean_of(h_bars);
        row.h_std = detail::std_of(h_bars);
        row.m_mean = detail::mean_of(m_bars);
        row.m_std = detail::std_of(m_bars);
        row.lambda_t = tfit.lambda;
        row.omega_t = tfit.omega;
        row.lambda_s = sfit.lambda;
        row.omega_s = sfit.omega;
        result.summary.push_back(row);

        summary += row.label + "," + format_double(row.alpha) + "," + format_double(row.eta) +
                   "," + format_double(row.h_mean) + "," + format_double(row.h_std) + "," +
                   format_double(row.m_mean) + "," + format_double(row.m_std) + "," +
                   format_double(row.lambda_t) + "," + format_double(row.omega_t) + "," +
                   format_double(row.lambda_s) + "," + format_double(row.omega_s) + "\n";

        std::string tag = row.label + "_" + detail::cell_tag(row.alpha, row.eta);
        detail::write_file((fs::path(cfg.out_dir) / ("acf_time_" + tag + ".csv")).string(),
                           detail::curve_csv(tmean), result.files);
        detail::write_file((fs::path(cfg.out_dir) / ("acf_space_" + tag + ".csv")).string(),
                           detail::curve_csv(smean), result.files);
        if (cfg.snapshots) {
          std::ostringstream svg;
          render_snapshot(results[base].snapshot, city, svg);
          detail::write_file(
              (fs::path(cfg.out_dir) / ("snapshot_" + tag + "_s" +
                                        std::to_string(cfg.seeds[0]) + ".svg")).string(),
              svg.str(), result.files);
        }
      }
    }
  }
  detail::write_file((fs::path(cfg.out_dir) / "summary.csv").string(), summary, result.files);

  // Calibration tables.
  for (const auto& [key, cal] : calibrations) {
    std::string csv = "theta,H_bar\n";
    for (const auto& [theta, h] : cal.table) {
      csv += format_double(theta) + "," + format_double(h) + "\n";
    }
    detail::write_file(
        (fs::path(cfg.out_dir) /
         ("calibration_" + detail::cell_tag(cfg.alphas[key.first], cfg.etas[key.second]) +
          ".csv")).string(),
        csv, result.files);
  }

  // Partitioned-vs-plain annealing ratio per (alpha, eta), the stand-in for
  // hardware-vs-software comparisons.
  std::optional<std::size_t> part_idx, sa_idx;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    if (!part_idx && cfg.methods[mi].solver.kind == SolverKind::partitioned) part_idx = mi;
    if (!sa_idx && cfg.methods[mi].solver.kind == SolverKind::simulated_annealing) sa_idx = mi;
  }
  if (part_idx && sa_idx) {
    auto find_row = [&](std::size_t mi, double alpha, double eta) -> const SummaryRow* {
      for (const auto& r : result.summary) {
        if (r.label == cfg.methods[mi].label && r.alpha == alpha && r.eta == eta) return &r;
      }
      return nullptr;
    };
    std::string csv = "alpha,eta,H_partitioned,H_unpartitioned,ratio\n";
    for (double alpha : cfg.alphas) {
      for (double eta : cfg.etas) {
        const SummaryRow* rp = find_row(*part_idx, alpha, eta);
        const SummaryRow* rs = find_row(*sa_idx, alpha, eta);
        csv += format_double(alpha) + "," + format_double(eta) + "," +
               format_double(rp->h_mean) + "," + format_double(rs->h_mean) + "," +
               format_double(rp->h_mean / rs->h_mean) + "\n";
      }
    }
    detail::write_file((fs::path(cfg.out_dir) / "partition_ratio.csv").string(), csv,
                       result.files);
  }

  // Run metadata: resolved config, versions, timing.
  auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - t_start)
                     .count();
  nlohmann::json meta;
  meta["config"] = config_to_json(cfg);
  meta["version"] = kVersion;
  meta["wall_ms"] = wall_ms;
  if (any_calibrated) {
    nlohmann::json cal = nlohmann::json::object();
    for (const auto& [key, c] : calibrations) {
      cal[detail::cell_tag(cfg.alphas[key.first], cfg.etas[key.second])] = c.theta_hat;
    }
    meta["theta_hat"] = cal;
  }
  detail::write_file((fs::path(cfg.out_dir) / "metadata.json").string(), meta.dump(2) + "\n",
                     result.files);

  return result;
}

}  // namespace gridsignal
