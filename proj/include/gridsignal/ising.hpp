#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridsignal/dynamics.hpp"
#include "gridsignal/lattice.hpp"

namespace gridsignal {

// One time step's control decision as an Ising minimization target:
// H(sigma) = sigma^T J sigma + h . sigma + c over sigma in {+/-1}^n.
// J is shared because it depends only on (alpha, eta, lattice) and is
// reused across every step of a trajectory.
struct IsingProblem {
  int n = 0;
  std::shared_ptr<const SparseMatrix> coupling;  // J, both triangles stored
  std::vector<double> field;                     // h
  double constant = 0.0;                         // c
};

// Shortest round-trippable decimal encoding of a double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

// Neumaier compensated accumulator.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace detail

// J = (-I + (alpha/4) A)^2 + eta I = (1 + eta) I - (alpha/2) A + (alpha^2/16) A^2,
// assembled by explicit sparse accumulation so wraparound-merged entries at
// small L come out right.
inline SparseMatrix build_coupling(const Lattice& city, double alpha, double eta) {
  int n = city.size();
  SparseMatrix j;
  j.n = n;
  j.row_ptr.resize(n + 1, 0);
  std::vector<std::map<int, double>> rows(n);
  double quarter = 0.25 * alpha;
  for (int i = 0; i < n; ++i) {
    auto& row = rows[i];
    row[i] += 1.0 + eta;
    for (int a : city.neighbors(i)) {
      row[a] += -0.5 * alpha;
      for (int b : city.neighbors(a)) {
        row[b] += quarter * quarter;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    j.row_ptr[i] = static_cast<int>(j.col.size());
    for (const auto& [c, v] : rows[i]) {
      j.col.push_back(c);
      j.val.push_back(v);
    }
  }
  j.row_ptr[n] = static_cast<int>(j.col.size());
  return j;
}

// h_i = 2 (-x_i + (alpha/4) sum_{j in N(i)} x_j) - 2 eta sigma_prev_i,
// c   = x . x + eta n.
inline IsingProblem build_problem_with(std::shared_ptr<const SparseMatrix> coupling,
                                       const FlowBias& x, const SignalVector& sigma_prev,
                                       const ModelParams& p, const Lattice& city) {
  int n = city.size();
  if (static_cast<int>(x.size()) != n || static_cast<int>(sigma_prev.size()) != n ||
      coupling->n != n) {
    throw std::invalid_argument("build_problem: dimension mismatch");
  }
  if (p.eta < 0.0) {
    throw std::invalid_argument("build_problem: eta must be nonnegative");
  }
  IsingProblem prob;
  prob.n = n;
  prob.coupling = std::move(coupling);
  prob.field.resize(n);
  double quarter_alpha = 0.25 * p.alpha;
  detail::CompensatedSum xsq;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j : city.neighbors(i)) acc += x[j];
    prob.field[i] = 2.0 * (-x[i] + quarter_alpha * acc) - 2.0 * p.eta * sigma_prev[i];
    xsq.add(x[i] * x[i]);
  }
  prob.constant = xsq.value() + p.eta * n;
  return prob;
}

inline IsingProblem build_problem(const FlowBias& x, const SignalVector& sigma_prev,
                                  const ModelParams& p, const Lattice& city) {
  auto coupling = std::make_shared<SparseMatrix>(build_coupling(city, p.alpha, p.eta));
  return build_problem_with(std::move(coupling), x, sigma_prev, p, city);
}

// H(sigma) = sigma^T J sigma + h . sigma + c, compensated summation over rows.
inline double evaluate(const IsingProblem& prob, const SignalVector& sigma) {
  if (static_cast<int>(sigma.size()) != prob.n) {
    throw std::invalid_argument("evaluate: dimension mismatch");
  }
  const SparseMatrix& j = *prob.coupling;
  detail::CompensatedSum h;
  for (int i = 0; i < prob.n; ++i) {
    double row = 0.0;
    for (int k = j.row_ptr[i]; k < j.row_ptr[i + 1]; ++k) {
      row += j.val[k] * sigma[j.col[k]];
    }
    h.add(sigma[i] * (row + prob.field[i]));
  }
  h.add(prob.constant);
  return h.value();
}

// Energy change of flipping spin i, from row i only. The diagonal term
// cancels because sigma_i^2 = 1:
//   dH = -2 sigma_i (2 sum_{j != i} J_ij sigma_j + h_i).
inline double delta_energy(const IsingProblem& prob, const SignalVector& sigma, int i) {
  if (i < 0 || i >= prob.n) {
    throw std::out_of_range("delta_energy: spin index out of range");
  }
  const SparseMatrix& j = *prob.coupling;
  double off = 0.0;
  for (int k = j.row_ptr[i]; k < j.row_ptr[i + 1]; ++k) {
    if (j.col[k] != i) off += j.val[k] * sigma[j.col[k]];
  }
  return -2.0 * sigma[i] * (2.0 * off + prob.field[i]);
}

// Zero fraction of J on the L x L torus: (L^4 - 13 L^2) / L^4. The 13
// nonzeros per row (self + 4 nearest + 4 diagonal + 4 two-step straight)
// only stay distinct for L >= 5.
inline double sparseness(int roads) {
  if (roads < 5) {
    throw std::invalid_argument("sparseness: pattern requires L >= 5");
  }
  double l2 = static_cast<double>(roads) * roads;
  return (l2 * l2 - 13.0 * l2) / (l2 * l2);
}

// Plain-text export: one "i j value" line per stored J nonzero (row-major),
// an "h i value" line per component, and a final "c value" line.
inline void write_ising_text(const IsingProblem& prob, std::ostream& os) {
  const SparseMatrix& j = *prob.coupling;
  for (int i = 0; i < prob.n; ++i) {
    for (int k = j.row_ptr[i]; k < j.row_ptr[i + 1]; ++k) {
      os << i << ' ' << j.col[k] << ' ' << format_double(j.val[k]) << '\n';
    }
  }
  for (int i = 0; i < prob.n; ++i) {
    os << "h " << i << ' ' << format_double(prob.field[i]) << '\n';
  }
  os << "c " << format_double(prob.constant) << '\n';
}

inline IsingProblem read_ising_text(std::istream& is) {
  std::vector<std::map<int, double>> rows;
  std::vector<std::pair<int, double>> fields;
  double constant = 0.0;
  bool saw_constant = false;
  int n = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "c") {
      if (!(ls >> constant)) {
        throw std::runtime_error("ising text: bad c line " + std::to_string(lineno));
      }
      saw_constant = true;
    } else if (tok == "h") {
      int i;
      double v;
      if (!(ls >> i >> v) || i < 0) {
        throw std::runtime_error("ising text: bad h line " + std::to_string(lineno));
      }
      fields.emplace_back(i, v);
      n = std::max(n, i + 1);
    } else {
      int i = 0, j = 0;
      double v = 0.0;
      try {
        i = std::stoi(tok);
      } catch (const std::exception&) {
        throw std::runtime_error("ising text: bad line " + std::to_string(lineno));
      }
      if (!(ls >> j >> v) || i < 0 || j < 0) {
        throw std::runtime_error("ising text: bad line " + std::to_string(lineno));
      }
      if (static_cast<int>(rows.size()) <= std::max(i, j)) rows.resize(std::max(i, j) + 1);
      rows[i][j] = v;
      n = std::max(n, std::max(i, j) + 1);
    }
  }
  if (!saw_constant) {
    throw std::runtime_error("ising text: missing c line");
  }
  rows.resize(n);
  IsingProblem prob;
  prob.n = n;
  prob.constant = constant;
  prob.field.assign(n, 0.0);
  for (const auto& [i, v] : fields) prob.field[i] = v;
  auto j = std::make_shared<SparseMatrix>();
  j->n = n;
  j->row_ptr.resize(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    j->row_ptr[i] = static_cast<int>(j->col.size());
    for (const auto& [c, v] : rows[i]) {
      j->col.push_back(c);
      j->val.push_back(v);
    }
  }
  j->row_ptr[n] = static_cast<int>(j->col.size());
  prob.coupling = std::move(j);
  return prob;
}

}  // namespace gridsignal
