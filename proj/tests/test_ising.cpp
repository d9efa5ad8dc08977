#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "gridsignal/ising.hpp"
#include "gridsignal/rng.hpp"

using namespace gridsignal;

namespace {

// Dense reference for J = (-I + (alpha/4) A)^T (-I + (alpha/4) A) + eta I,
// built by explicit matrix multiplication.
std::vector<std::vector<double>> dense_coupling(const Lattice& city, double alpha, double eta) {
  int n = city.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    m[i][i] = -1.0;
    for (int j : city.neighbors(i)) m[i][j] += 0.25 * alpha;
  }
  std::vector<std::vector<double>> j(n, std::vector<double>(n, 0.0));
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += m[k][a] * m[k][b];
      j[a][b] = acc + (a == b ? eta : 0.0);
    }
  }
  return j;
}

// Objective evaluated the way it is defined: ||x + M sigma||^2 + eta
// ||sigma - sigma_prev||^2.
double direct_objective(const Lattice& city, const FlowBias& x, const SignalVector& sigma,
                        const SignalVector& sigma_prev, double alpha, double eta) {
  int n = city.size();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j : city.neighbors(i)) acc += sigma[j];
    double r = x[i] - sigma[i] + 0.25 * alpha * acc;
    total += r * r;
    double d = sigma[i] - sigma_prev[i];
    total += eta * d * d;
  }
  return total;
}

FlowBias random_bias(int n, Rng& rng) {
  FlowBias x(n);
  for (auto& v : x) v = rng.uniform(-5.0, 5.0);
  return x;
}

SignalVector random_signal(int n, Rng& rng) {
  SignalVector s(n);
  for (auto& v : s) v = rng.sign();
  return s;
}

}  // namespace

TEST_CASE("coupling matrix matches the dense oracle", "[ising]") {
  Lattice city(6);
  double alpha = 0.8, eta = 1.0;
  auto dense = dense_coupling(city, alpha, eta);
  SparseMatrix j = build_coupling(city, alpha, eta);
  for (int a = 0; a < city.size(); ++a) {
    for (int b = 0; b < city.size(); ++b) {
      REQUIRE(j.at(a, b) == Catch::Approx(dense[a][b]).margin(1e-12));
    }
  }
  // Headline entries at alpha=0.8, eta=1.
  REQUIRE(j.at(0, 0) == Catch::Approx(2.16).margin(1e-12));
  int nn = city.neighbors(0)[0];
  REQUIRE(j.at(0, nn) == Catch::Approx(-0.40).margin(1e-12));
  int diag = city.node(1, 1);
  REQUIRE(j.at(0, diag) == Catch::Approx(alpha * alpha / 8.0).margin(1e-12));
  int two_step = city.node(2, 0);
  REQUIRE(j.at(0, two_step) == Catch::Approx(alpha * alpha / 16.0).margin(1e-12));
}

TEST_CASE("alpha=0 produces a diagonal problem", "[ising]") {
  Lattice city(4);
  ModelParams p;
  p.alpha = 0.0;
  p.eta = 1.0;
  Rng rng(3);
  FlowBias x = random_bias(city.size(), rng);
  SignalVector prev = random_signal(city.size(), rng);
  IsingProblem prob = build_problem(x, prev, p, city);
  for (int i = 0; i < prob.n; ++i) {
    for (int k = prob.coupling->row_ptr[i]; k < prob.coupling->row_ptr[i + 1]; ++k) {
      if (prob.coupling->col[k] == i) {
        REQUIRE(prob.coupling->val[k] == Catch::Approx(2.0).margin(1e-15));
      } else {
        REQUIRE(prob.coupling->val[k] == Catch::Approx(0.0).margin(1e-15));
      }
    }
    REQUIRE(prob.field[i] == Catch::Approx(-2.0 * x[i] - 2.0 * prev[i]).margin(1e-12));
  }
}

TEST_CASE("problem coefficients reproduce the objective", "[ising]") {
  Rng rng(17);
  for (int L : {3, 5, 8}) {
    Lattice city(L);
    for (double alpha : {0.0, 0.5, 0.995}) {
      for (double eta : {0.125, 1.0, 8.0}) {
        ModelParams p;
        p.alpha = alpha;
        p.eta = eta;
        auto coupling = std::make_shared<SparseMatrix>(build_coupling(city, alpha, eta));
        for (int trial = 0; trial < 4; ++trial) {
          FlowBias x = random_bias(city.size(), rng);
          SignalVector prev = random_signal(city.size(), rng);
          SignalVector sigma = random_signal(city.size(), rng);
          IsingProblem prob = build_problem_with(coupling, x, prev, p, city);
          double via_ising = evaluate(prob, sigma);
          double direct = direct_objective(city, x, sigma, prev, alpha, eta);
          REQUIRE(std::abs(via_ising - direct) <= 1e-9 * std::abs(direct));
        }
      }
    }
  }
}

TEST_CASE("constant landscape at alpha=0, eta=0, x=0", "[ising]") {
  Lattice city(3);
  ModelParams p;
  p.alpha = 0.0;
  p.eta = 0.0;
  FlowBias x(city.size(), 0.0);
  SignalVector prev(city.size(), +1);
  IsingProblem prob = build_problem(x, prev, p, city);
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    SignalVector sigma = random_signal(city.size(), rng);
    REQUIRE(evaluate(prob, sigma) == Catch::Approx(9.0).margin(1e-12));
  }
}

TEST_CASE("spin flip energy deltas", "[ising]") {
  Lattice city(4);
  Rng rng(23);

  SECTION("delta matches full re-evaluation") {
    ModelParams p;
    p.alpha = 0.7;
    p.eta = 0.5;
    FlowBias x = random_bias(city.size(), rng);
    SignalVector prev = random_signal(city.size(), rng);
    IsingProblem prob = build_problem(x, prev, p, city);
    SignalVector sigma = random_signal(city.size(), rng);
    for (int i = 0; i < prob.n; ++i) {
      double before = evaluate(prob, sigma);
      SignalVector flipped = sigma;
      flipped[i] = -flipped[i];
      double after = evaluate(prob, flipped);
      double d = delta_energy(prob, sigma, i);
      REQUIRE(std::abs(d - (after - before)) <= 1e-9 * (1.0 + std::abs(after - before)));
    }
  }

  SECTION("closed form at alpha=0, eta=1, prev=sigma: dH = 4 sigma_i x_i + 4") {
    ModelParams p;
    p.alpha = 0.0;
    p.eta = 1.0;
    FlowBias x = random_bias(city.size(), rng);
    SignalVector sigma = random_signal(city.size(), rng);
    IsingProblem prob = build_problem(x, sigma, p, city);
    for (int i = 0; i < prob.n; ++i) {
      REQUIRE(delta_energy(prob, sigma, i) ==
              Catch::Approx(4.0 * sigma[i] * x[i] + 4.0).margin(1e-12));
    }
  }

  SECTION("zero row gives zero delta") {
    IsingProblem prob;
    prob.n = 2;
    auto j = std::make_shared<SparseMatrix>();
    j->n = 2;
    j->row_ptr = {0, 0, 0};
    prob.coupling = j;
    prob.field = {0.0, 5.0};
    SignalVector sigma{+1, -1};
    REQUIRE(delta_energy(prob, sigma, 0) == 0.0);
  }

  SECTION("double flip is a no-op") {
    ModelParams p;
    p.alpha = 0.9;
    p.eta = 2.0;
    FlowBias x = random_bias(city.size(), rng);
    SignalVector prev = random_signal(city.size(), rng);
    IsingProblem prob = build_problem(x, prev, p, city);
    SignalVector sigma = random_signal(city.size(), rng);
    double d1 = delta_energy(prob, sigma, 7);
    sigma[7] = -sigma[7];
    double d2 = delta_energy(prob, sigma, 7);
    REQUIRE(d1 + d2 == 0.0);
  }

  SECTION("out-of-range index throws") {
    ModelParams p;
    FlowBias x(city.size(), 0.0);
    SignalVector prev(city.size(), 1);
    IsingProblem prob = build_problem(x, prev, p, city);
    REQUIRE_THROWS_AS(delta_energy(prob, prev, -1), std::out_of_range);
    REQUIRE_THROWS_AS(delta_energy(prob, prev, prob.n), std::out_of_range);
  }
}

TEST_CASE("single-flip deltas telescope along a flip path", "[ising]") {
  Lattice city(8);
  ModelParams p;
  p.alpha = 0.8;
  p.eta = 1.0;
  Rng rng(31);
  FlowBias x = random_bias(city.size(), rng);
  SignalVector prev = random_signal(city.size(), rng);
  IsingProblem prob = build_problem(x, prev, p, city);
  SignalVector sigma = random_signal(city.size(), rng);
  double start = evaluate(prob, sigma);
  double acc = 0.0;
  for (int step = 0; step < 10000; ++step) {
    int i = rng.uniform_int(prob.n);
    acc += delta_energy(prob, sigma, i);
    sigma[i] = -sigma[i];
  }
  double end = evaluate(prob, sigma);
  REQUIRE(std::abs((start + acc) - end) <= 1e-7);
}

TEST_CASE("coupling inherits the lattice translation symmetry", "[ising]") {
  int L = 6;
  Lattice city(L);
  SparseMatrix j = build_coupling(city, 0.65, 0.8);
  // J_{i,k} must depend only on the toroidal displacement between i and k.
  auto value_at = [&](int ri, int ci, int dr, int dc) {
    int i = city.node(ri, ci);
    int k = city.node(((ri + dr) % L + L) % L, ((ci + dc) % L + L) % L);
    return j.at(i, k);
  };
  for (int dr = 0; dr < L; ++dr) {
    for (int dc = 0; dc < L; ++dc) {
      double ref = value_at(0, 0, dr, dc);
      for (int r = 0; r < L; ++r) {
        for (int c = 0; c < L; ++c) {
          REQUIRE(value_at(r, c, dr, dc) == Catch::Approx(ref).margin(1e-14));
        }
      }
    }
  }
}

TEST_CASE("sparseness formula and measured fill agree", "[ising]") {
  REQUIRE(sparseness(50) == 0.9948);
  REQUIRE_THROWS_AS(sparseness(4), std::invalid_argument);
  for (int L = 5; L < 60; ++L) {
    REQUIRE(sparseness(L + 1) > sparseness(L));
  }

  Lattice city(5);
  SparseMatrix j = build_coupling(city, 0.8, 1.0);
  double n2 = static_cast<double>(city.size()) * city.size();
  double measured = (n2 - j.nnz()) / n2;
  REQUIRE(measured == sparseness(5));
  REQUIRE(sparseness(5) == Catch::Approx(0.48).margin(1e-15));
}

TEST_CASE("text export round-trips", "[ising]") {
  Lattice city(4);
  ModelParams p;
  p.alpha = 0.37;
  p.eta = 1.25;
  Rng rng(77);
  FlowBias x(city.size());
  for (auto& v : x) v = rng.uniform(-5.0, 5.0);
  SignalVector prev(city.size());
  for (auto& s : prev) s = rng.sign();
  IsingProblem prob = build_problem(x, prev, p, city);

  std::stringstream ss;
  write_ising_text(prob, ss);
  IsingProblem back = read_ising_text(ss);

  REQUIRE(back.n == prob.n);
  REQUIRE(back.constant == prob.constant);
  REQUIRE(back.field == prob.field);
  REQUIRE(back.coupling->row_ptr == prob.coupling->row_ptr);
  REQUIRE(back.coupling->col == prob.coupling->col);
  REQUIRE(back.coupling->val == prob.coupling->val);

  std::stringstream bad("h 0 1.0\n0 0 2.0\n");
  REQUIRE_THROWS(read_ising_text(bad));
}
