#pragma once

#include <memory>
#include <optional>
#include <utility>

#include "gridsignal/partition.hpp"
#include "gridsignal/solvers.hpp"

namespace gridsignal {

// Per-step controller: builds the Ising problem for the current state and
// dispatches to the configured backend. The coupling matrix and (for the
// partitioned backend) the partition are computed once and reused, since
// they depend only on (lattice, alpha, eta, cap).
class Controller {
 public:
  Controller(const Lattice& city, const ModelParams& params, const SolverConfig& cfg)
      : city_(city), params_(params), cfg_(cfg), adj_(adjacency(city)) {
    coupling_ = std::make_shared<SparseMatrix>(build_coupling(city, params.alpha, params.eta));
    if (cfg_.kind == SolverKind::partitioned) {
      partition_ = partition_lattice(city_, *coupling_, cfg_.partition_max_size, cfg_.seed);
    }
    if (cfg_.kind == SolverKind::exact && city_.size() > 25) {
      throw std::invalid_argument("exact solver limited to L*L <= 25 variables");
    }
  }

  const Lattice& city() const { return city_; }
  const ModelParams& params() const { return params_; }
  const SparseMatrix& adjacency_matrix() const { return adj_; }
  const std::shared_ptr<const SparseMatrix>& coupling() const { return coupling_; }
  const std::optional<Partition>& partition() const { return partition_; }

  // Chooses sigma(t) from x(t) and the previous display. step_seed feeds
  // the stochastic backends; deterministic backends ignore it.
  std::pair<SignalVector, SolveResult> step(const TrafficState& state,
                                            std::uint64_t step_seed) const {
    IsingProblem prob = build_problem_with(coupling_, state.x, state.sigma, params_, city_);
    SolverConfig cfg = cfg_;
    cfg.seed = step_seed;
    switch (cfg_.kind) {
      case SolverKind::local: {
        SolveResult res;
        res.sigma = local_control(state.x, state.sigma, cfg_.theta);
        res.energy = evaluate(prob, res.sigma);
        res.reads_used = 1;
        res.best_read_index = 0;
        res.read_energies = {res.energy};
        return {res.sigma, std::move(res)};
      }
      case SolverKind::exact: {
        SolveResult res = solve_exact(prob);
        return {res.sigma, std::move(res)};
      }
      case SolverKind::simulated_annealing: {
        SolveResult res = solve_sa(prob, cfg, state.sigma);
        return {res.sigma, std::move(res)};
      }
      case SolverKind::partitioned: {
        SolveResult res = solve_partitioned(prob, *partition_, cfg, state.sigma);
        return {res.sigma, std::move(res)};
      }
    }
    throw std::logic_error("unreachable solver kind");
  }

 private:
  Lattice city_;
  ModelParams params_;
  SolverConfig cfg_;
  SparseMatrix adj_;
  std::shared_ptr<const SparseMatrix> coupling_;
  std::optional<Partition> partition_;
};

// One-off form of Controller::step for a single decision.
inline std::pair<SignalVector, SolveResult> control_step(const TrafficState& state,
                                                         const ModelParams& params,
                                                         const SolverConfig& cfg,
                                                         const Lattice& city) {
  Controller ctl(city, params, cfg);
  return ctl.step(state, cfg.seed);
}

}  // namespace gridsignal
