// Command-line front end: trajectory runs, parameter sweeps, theta
// calibration, partition inspection, correlation fitting, and Ising problem
// export. Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "gridsignal/experiment.hpp"

namespace fs = std::filesystem;
using namespace gridsignal;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<double> alpha;
  std::optional<double> eta;
  std::optional<int> steps;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<double> theta;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON experiment config");
  cmd->add_option("--preset", opts.preset, "base preset: desk (L=8) or paper (L=50)")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", opts.seed, "replace the seed list with one seed");
  cmd->add_option("--method", opts.method, "replace the method list")
      ->check(CLI::IsMember({"local", "sa", "exact", "partitioned"}));
  cmd->add_option("--alpha", opts.alpha, "straight-drive parameter override");
  cmd->add_option("--eta", opts.eta, "switching-penalty weight override");
  cmd->add_option("--steps", opts.steps, "trajectory length override");
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--workers", opts.workers, "parallel sweep workers");
  cmd->add_option("--theta", opts.theta, "local-rule threshold override");
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.methods = default_methods();
  cfg.theta_candidates = default_theta_candidates();
  if (name == "paper") {
    cfg.roads = 50;
    cfg.seeds = {1};
    MethodSpec part;
    part.label = "partitioned";
    part.solver.kind = SolverKind::partitioned;
    cfg.methods.push_back(part);
  }
  return cfg;
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig cfg = preset_config(opts.preset);
  if (!opts.config_path.empty()) cfg = load_config(opts.config_path, cfg);
  if (opts.seed) cfg.seeds = {*opts.seed};
  if (opts.alpha) cfg.alphas = {*opts.alpha};
  if (opts.eta) cfg.etas = {*opts.eta};
  if (opts.steps) cfg.steps = *opts.steps;
  if (opts.out) cfg.out_dir = *opts.out;
  if (opts.workers) cfg.workers = *opts.workers;
  if (opts.method) {
    MethodSpec m;
    m.solver.kind = solver_kind_from_string(*opts.method);
    m.label = to_string(m.solver.kind);
    m.solver.partition_max_size = cfg.partition_max_size;
    cfg.methods = {m};
  }
  if (opts.theta) {
    for (auto& m : cfg.methods) m.solver.theta = *opts.theta;
  }
  return cfg;
}

int cmd_run(const CommonOpts& opts) {
  ExperimentConfig cfg = resolve_config(opts);
  // A run is a one-cell sweep: first method, alpha, eta, seed.
  cfg.methods.resize(1);
  cfg.alphas.resize(1);
  cfg.etas.resize(1);
  cfg.seeds.resize(1);
  SweepResult res = sweep(cfg);
  const SummaryRow& row = res.summary.front();
  std::cout << "method=" << row.label << " alpha=" << format_double(row.alpha)
            << " eta=" << format_double(row.eta) << " H_bar=" << format_double(row.h_mean)
            << " m_bar=" << format_double(row.m_mean) << "\n";
  std::cout << "wrote " << res.files.size() << " files to " << res.out_dir << "\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  ExperimentConfig cfg = resolve_config(opts);
  SweepResult res = sweep(cfg);
  std::cout << "sweep finished: " << res.summary.size() << " cells, " << res.files.size()
            << " files in " << res.out_dir << "\n";
  return 0;
}

int cmd_calibrate(const CommonOpts& opts) {
  ExperimentConfig cfg = resolve_config(opts);
  validate_config(cfg);
  double alpha = cfg.alphas.front();
  double eta = cfg.etas.front();
  CalibrationResult cal = calibrate_theta(eta, alpha, cfg.theta_candidates, cfg);
  fs::create_directories(cfg.out_dir);
  std::string path =
      (fs::path(cfg.out_dir) / ("calibration_a" + format_double(alpha) + "_e" +
                                format_double(eta) + ".csv")).string();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "theta,H_bar\n";
  for (const auto& [theta, h] : cal.table) {
    os << format_double(theta) << "," << format_double(h) << "\n";
  }
  std::cout << "theta_hat=" << format_double(cal.theta_hat) << " (table: " << path << ")\n";
  return 0;
}

int cmd_partition(const CommonOpts& opts, int max_size, const std::string& out_file,
                  const std::string& import_file) {
  ExperimentConfig cfg = resolve_config(opts);
  Lattice city(cfg.roads);
  double alpha = cfg.alphas.front();
  double eta = cfg.etas.front();
  SparseMatrix coupling = build_coupling(city, alpha, eta);
  Partition part;
  if (!import_file.empty()) {
    std::ifstream is(import_file);
    if (!is) throw std::runtime_error("cannot read " + import_file);
    part = read_partition_text(is, coupling, max_size);
  } else {
    part = partition_lattice(city, coupling, max_size,
                             cfg.seeds.empty() ? 0 : cfg.seeds.front());
  }
  std::size_t smallest = part.groups.front().size(), largest = 0;
  for (const auto& g : part.groups) {
    smallest = std::min(smallest, g.size());
    largest = std::max(largest, g.size());
  }
  std::cout << "L=" << cfg.roads << " max_size=" << max_size << " groups="
            << part.group_count() << " sizes=[" << smallest << "," << largest
            << "] cut_edges=" << part.cut_edges << " cut_weight="
            << format_double(part.cut_weight) << "\n";
  if (!out_file.empty()) {
    std::ofstream os(out_file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + out_file);
    write_partition_text(part, os);
    std::cout << "wrote " << out_file << "\n";
  }
  return 0;
}

int cmd_fit(const std::string& input, const std::string& out_file) {
  std::ifstream is(input);
  if (!is) throw ConfigError("cannot read " + input);
  std::string line;
  if (!std::getline(is, line) || line != "z,R") {
    throw ConfigError("expected a curve CSV with header \"z,R\": " + input);
  }
  CorrelationCurve curve;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string ztok, rtok;
    if (!std::getline(ls, ztok, ',') || !std::getline(ls, rtok)) {
      throw ConfigError("bad curve row at line " + std::to_string(lineno));
    }
    curve.z.push_back(std::stod(ztok));
    curve.r.push_back(std::stod(rtok));
  }
  DampedCosineFit fit = fit_damped_cosine(curve);
  std::cout << "lambda=" << format_double(fit.lambda) << " omega=" << format_double(fit.omega)
            << " residual=" << format_double(fit.residual) << "\n";
  if (!out_file.empty()) {
    std::ofstream os(out_file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + out_file);
    os << "lambda,omega,residual\n"
       << format_double(fit.lambda) << "," << format_double(fit.omega) << ","
       << format_double(fit.residual) << "\n";
    std::cout << "wrote " << out_file << "\n";
  }
  return 0;
}

int cmd_export_ising(const CommonOpts& opts, const std::string& out_file) {
  ExperimentConfig cfg = resolve_config(opts);
  if (cfg.steps < 0) throw ConfigError("steps must be nonnegative");
  double alpha = cfg.alphas.front();
  double eta = cfg.etas.front();
  std::uint64_t seed = cfg.seeds.front();
  Lattice city(cfg.roads);
  ModelParams p;
  p.alpha = alpha;
  p.eta = eta;

  int t_export = opts.steps ? *opts.steps : 0;
  IsingProblem prob;
  if (t_export == 0) {
    auto [x, sigma] = init_state(cfg.roads, seed);
    prob = build_problem(x, sigma, p, city);
  } else {
    ExperimentConfig run_cfg = cfg;
    run_cfg.steps = t_export;
    TrajectoryLog log = run_trajectory(run_cfg, cfg.methods.front(), alpha, eta, seed);
    prob = build_problem(log.x[t_export], log.sigma[t_export - 1], p, city);
  }

  if (out_file.empty()) {
    write_ising_text(prob, std::cout);
  } else {
    std::ofstream os(out_file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + out_file);
    write_ising_text(prob, os);
    std::cout << "wrote " << out_file << " (n=" << prob.n << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic signal control on a periodic lattice via Ising minimization"};
  app.require_subcommand(1);

  CommonOpts run_opts, sweep_opts, cal_opts, part_opts, export_opts;

  CLI::App* run = app.add_subcommand("run", "run a single trajectory and write its artifacts");
  add_common(run, run_opts);

  CLI::App* sw = app.add_subcommand("sweep", "run the full methods x alpha x eta x seeds grid");
  add_common(sw, sweep_opts);

  CLI::App* cal = app.add_subcommand("calibrate", "pick theta minimizing the time-averaged objective");
  add_common(cal, cal_opts);

  CLI::App* part = app.add_subcommand("partition", "emit or inspect a variable partition");
  add_common(part, part_opts);
  int part_max_size = 64;
  std::string part_out, part_import;
  part->add_option("--max-size", part_max_size, "group size cap");
  part->add_option("--out-file", part_out, "write the partition as node_id group_id lines");
  part->add_option("--import", part_import, "validate and describe an existing partition file");

  std::string fit_input, fit_out;
  CLI::App* fit = app.add_subcommand("fit", "fit a damped cosine to a z,R correlation CSV");
  fit->add_option("--input", fit_input, "curve CSV with header z,R")->required();
  fit->add_option("--out-file", fit_out, "write lambda,omega,residual CSV");

  CLI::App* exp = app.add_subcommand("export-ising", "dump one step's Ising problem as text");
  add_common(exp, export_opts);
  std::string export_out;
  exp->add_option("--out-file", export_out, "output path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (sw->parsed()) return cmd_sweep(sweep_opts);
    if (cal->parsed()) return cmd_calibrate(cal_opts);
    if (part->parsed()) return cmd_partition(part_opts, part_max_size, part_out, part_import);
    if (fit->parsed()) return cmd_fit(fit_input, fit_out);
    if (exp->parsed()) return cmd_export_ising(export_opts, export_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
