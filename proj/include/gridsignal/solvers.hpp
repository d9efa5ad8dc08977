#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridsignal/ising.hpp"

namespace gridsignal {

enum class SolverKind { local, simulated_annealing, exact, partitioned };

inline const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::local: return "local";
    case SolverKind::simulated_annealing: return "sa";
    case SolverKind::exact: return "exact";
    case SolverKind::partitioned: return "partitioned";
  }
  return "?";
}

inline SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "local") return SolverKind::local;
  if (s == "sa" || s == "simulated-annealing") return SolverKind::simulated_annealing;
  if (s == "exact") return SolverKind::exact;
  if (s == "partitioned") return SolverKind::partitioned;
  throw std::invalid_argument("unknown solver kind: " + s);
}

struct SolverConfig {
  SolverKind kind = SolverKind::simulated_annealing;
  double theta = 1.0;        // local-rule switching threshold
  int num_reads = 100;       // independent anneal restarts per solve
  int sweeps = 1000;         // full sweeps per read
  double beta_min = 0.1;     // geometric inverse-temperature ladder
  double beta_max = 10.0;
  std::uint64_t seed = 0;
  bool random_restarts = false;  // anneal reads start from random states
  int partition_max_size = 64;   // group size cap for kind=partitioned
  int partition_passes = 1;      // >1 re-freezes boundaries and repeats
};

struct SolveResult {
  SignalVector sigma;
  double energy = 0.0;
  int reads_used = 0;
  int best_read_index = 0;
  std::vector<double> read_energies;
};

// Threshold rule with hysteresis: switch to +1 when x_i >= theta, to -1
// when x_i <= -theta, otherwise hold the previous display. The +1 branch
// is checked first so x_i = theta = 0 resolves to +1.
inline SignalVector local_control(const FlowBias& x, const SignalVector& sigma_prev,
                                  double theta) {
  SignalVector sigma(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= theta) {
      sigma[i] = +1;
    } else if (x[i] <= -theta) {
      sigma[i] = -1;
    } else {
      sigma[i] = sigma_prev[i];
    }
  }
  return sigma;
}

namespace detail {

// Local couplings m_i = sum_{j != i} J_ij sigma_j, kept incrementally so a
// flip costs O(row) and a rejected proposal O(1).
inline std::vector<double> local_fields(const IsingProblem& prob, const SignalVector& sigma) {
  const SparseMatrix& j = *prob.coupling;
  std::vector<double> m(prob.n, 0.0);
  for (int i = 0; i < prob.n; ++i) {
    double acc = 0.0;
    for (int k = j.row_ptr[i]; k < j.row_ptr[i + 1]; ++k) {
      if (j.col[k] != i) acc += j.val[k] * sigma[j.col[k]];
    }
    m[i] = acc;
  }
  return m;
}

inline void apply_flip(const IsingProblem& prob, SignalVector& sigma,
                       std::vector<double>& m, int i) {
  const SparseMatrix& j = *prob.coupling;
  sigma[i] = -sigma[i];
  double delta = 2.0 * sigma[i];
  for (int k = j.row_ptr[i]; k < j.row_ptr[i + 1]; ++k) {
    if (j.col[k] != i) m[j.col[k]] += delta * j.val[k];
  }
}

// -1 sorts before +1, matching the documented tie rule.
inline bool lex_less(const SignalVector& a, const SignalVector& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

// Exhaustive minimization over all 2^n configurations via Gray-code
// enumeration. Deterministic; exact ties resolve to the lexicographically
// smallest configuration (-1 < +1). Bounded at n <= 25.
inline SolveResult solve_exact(const IsingProblem& prob) {
  if (prob.n > 25) {
    throw std::invalid_argument("solve_exact: n = " + std::to_string(prob.n) +
                                " exceeds the enumeration bound of 25");
  }
  if (prob.n <= 0) {
    throw std::invalid_argument("solve_exact: empty problem");
  }
  SignalVector sigma(prob.n, -1);
  std::vector<double> m = detail::local_fields(prob, sigma);
  double running = evaluate(prob, sigma);
  SignalVector best_sigma = sigma;
  double best = running;

  auto consider = [&](double run_energy) {
    // The running energy accumulates rounding drift, so candidates near the
    // incumbent are re-evaluated exactly before comparing.
    double margin = 1e-8 * (1.0 + std::max(std::abs(run_energy), std::abs(best)));
    if (run_energy >= best + margin) return;
    double exact = evaluate(prob, sigma);
    if (exact < best) {
      best = exact;
      best_sigma = sigma;
    } else if (exact == best && detail::lex_less(sigma, best_sigma)) {
      best_sigma = sigma;
    }
  };

  std::uint64_t total = std::uint64_t{1} << prob.n;
  for (std::uint64_t g = 1; g < total; ++g) {
    int i = std::countr_zero(g);
    running += -2.0 * sigma[i] * (2.0 * m[i] + prob.field[i]);
    detail::apply_flip(prob, sigma, m, i);
    consider(running);
  }

  SolveResult res;
  res.sigma = std::move(best_sigma);
  res.energy = best;
  res.reads_used = 1;
  res.best_read_index = 0;
  res.read_energies = {best};
  return res;
}

// Simulated annealing: num_reads independent Metropolis single-flip anneals
// over a geometric beta ladder, each read warm-started from sigma_init (or a
// random state when cfg.random_restarts). The best sample over all reads is
// returned, re-evaluated exactly; ties go to the earliest read.
//
// sweep_best_trace, when given, receives the best-so-far energy after each
// sweep of read 0.
inline SolveResult solve_sa(const IsingProblem& prob, const SolverConfig& cfg,
                            const SignalVector& sigma_init,
                            std::vector<double>* sweep_best_trace = nullptr) {
  if (static_cast<int>(sigma_init.size()) != prob.n) {
    throw std::invalid_argument("solve_sa: dimension mismatch");
  }
  if (cfg.num_reads < 1 || cfg.sweeps < 1) {
    throw std::invalid_argument("solve_sa: num_reads and sweeps must be positive");
  }
  std::vector<double> betas(cfg.sweeps);
  if (cfg.sweeps == 1) {
    betas[0] = cfg.beta_max;
  } else {
    double ratio = std::pow(cfg.beta_max / cfg.beta_min, 1.0 / (cfg.sweeps - 1));
    double b = cfg.beta_min;
    for (int s = 0; s < cfg.sweeps; ++s) {
      betas[s] = b;
      b *= ratio;
    }
  }

  SolveResult res;
  res.reads_used = cfg.num_reads;
  res.read_energies.resize(cfg.num_reads);
  double best_energy = 0.0;

  SignalVector sigma;
  SignalVector read_best;
  for (int r = 0; r < cfg.num_reads; ++r) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    if (cfg.random_restarts) {
      sigma.resize(prob.n);
      for (auto& s : sigma) s = rng.sign();
    } else {
      sigma = sigma_init;
    }
    std::vector<double> m = detail::local_fields(prob, sigma);
    double current = evaluate(prob, sigma);
    double read_best_energy = current;
    read_best = sigma;

    for (int s = 0; s < cfg.sweeps; ++s) {
      double beta = betas[s];
      for (int a = 0; a < prob.n; ++a) {
        int i = rng.uniform_int(prob.n);
        double d = -2.0 * sigma[i] * (2.0 * m[i] + prob.field[i]);
        if (d <= 0.0 || rng.uniform() < std::exp(-beta * d)) {
          detail::apply_flip(prob, sigma, m, i);
          current += d;
          if (current < read_best_energy) {
            read_best_energy = current;
            read_best = sigma;
          }
        }
      }
      if (sweep_best_trace && r == 0) sweep_best_trace->push_back(read_best_energy);
    }

    double exact = evaluate(prob, read_best);
    res.read_energies[r] = exact;
    if (r == 0 || exact < best_energy) {
      best_energy = exact;
      res.sigma = read_best;
      res.best_read_index = r;
    }
  }
  res.energy = best_energy;
  return res;
}

}  // namespace gridsignal
