#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "gridsignal/partition.hpp"

using namespace gridsignal;

namespace {

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

void check_cover(const Partition& part) {
  std::set<int> seen;
  for (int g = 0; g < part.group_count(); ++g) {
    REQUIRE(static_cast<int>(part.groups[g].size()) <= part.max_size);
    REQUIRE(!part.groups[g].empty());
    for (int v : part.groups[g]) {
      REQUIRE(seen.insert(v).second);
      REQUIRE(part.group_of[v] == g);
    }
  }
  REQUIRE(static_cast<int>(seen.size()) == part.n);
}

}  // namespace

TEST_CASE("partition sizes and coverage", "[partition]") {
  SECTION("L=8 fits one group under the hardware cap") {
    Lattice city(8);
    SparseMatrix j = build_coupling(city, 0.8, 1.0);
    Partition part = partition_lattice(city, j, 64, 0);
    REQUIRE(part.group_count() == 1);
    check_cover(part);
    REQUIRE(part.cut_edges == 0);
  }

  SECTION("L=50 under cap 64 lands in the expected group-count band") {
    Lattice city(50);
    SparseMatrix j = build_coupling(city, 0.8, 1.0);
    Partition part = partition_lattice(city, j, 64, 0);
    REQUIRE(part.group_count() >= 40);
    REQUIRE(part.group_count() <= 50);
    check_cover(part);
  }

  SECTION("L=8 with cap 16 keeps neighbors predominantly co-grouped") {
    Lattice city(8);
    SparseMatrix j = build_coupling(city, 0.8, 1.0);
    Partition part = partition_lattice(city, j, 16, 0);
    REQUIRE(part.group_count() == 4);
    check_cover(part);
    int intra = 0, total = 0;
    for (int i = 0; i < city.size(); ++i) {
      for (int nb : city.neighbors(i)) {
        if (nb > i) {
          ++total;
          if (part.group_of[nb] == part.group_of[i]) ++intra;
        }
      }
    }
    REQUIRE(intra >= static_cast<int>(0.7 * total));
  }

  SECTION("coverage holds across sizes, caps, and seeds") {
    for (int L : {3, 5, 7}) {
      Lattice city(L);
      SparseMatrix j = build_coupling(city, 0.6, 0.5);
      for (int cap : {1, 4, 9, 30}) {
        for (std::uint64_t seed : {0ULL, 7ULL}) {
          check_cover(partition_lattice(city, j, cap, seed));
        }
      }
    }
  }

  SECTION("deterministic under seed") {
    Lattice city(10);
    SparseMatrix j = build_coupling(city, 0.9, 1.0);
    Partition a = partition_lattice(city, j, 12, 42);
    Partition b = partition_lattice(city, j, 12, 42);
    REQUIRE(a.group_of == b.group_of);
    REQUIRE(a.cut_weight == b.cut_weight);
  }

  SECTION("invalid cap rejected") {
    Lattice city(3);
    SparseMatrix j = build_coupling(city, 0.5, 1.0);
    REQUIRE_THROWS_AS(partition_lattice(city, j, 0, 0), std::invalid_argument);
  }
}

TEST_CASE("refinement never increases the cut weight", "[partition]") {
  Lattice city(9);
  SparseMatrix j = build_coupling(city, 0.85, 1.0);

  // Deliberately poor starting point: nodes scattered at random.
  Partition part;
  part.n = city.size();
  part.max_size = 40;
  part.group_of.resize(part.n);
  part.groups.assign(3, {});
  Rng scatter(123);
  for (int v = 0; v < part.n; ++v) {
    int g = scatter.uniform_int(3);
    part.group_of[v] = g;
    part.groups[g].push_back(v);
  }
  detail::recompute_cut(j, part);
  double before = part.cut_weight;

  Rng rng(5);
  detail::refine_partition(j, part, rng);
  detail::renumber_groups(part);
  detail::recompute_cut(j, part);
  REQUIRE(part.cut_weight <= before);
  REQUIRE(part.cut_weight < before);  // a random scatter is far from optimal
  check_cover(part);
}

TEST_CASE("group problems are boundary-frozen restrictions", "[partition]") {
  SECTION("single group differs from the full problem by the constant") {
    Lattice city(3);
    ModelParams p;
    p.alpha = 0.75;
    p.eta = 1.0;
    Rng rng(3);
    IsingProblem prob = build_problem(random_bias(9, rng), random_signal(9, rng), p, city);
    Partition part = partition_lattice(city, prob, 64, 0);
    REQUIRE(part.group_count() == 1);
    GroupProblem gp = build_group_problem(prob, part, 0, SignalVector(9, +1));
    for (int trial = 0; trial < 10; ++trial) {
      SignalVector sigma = random_signal(9, rng);
      REQUIRE(evaluate(gp.problem, sigma) ==
              Catch::Approx(evaluate(prob, sigma) - prob.constant).margin(1e-9));
    }
  }

  SECTION("offset lemma and frozen argmin at L=4") {
    Lattice city(4);
    ModelParams p;
    p.alpha = 0.8;
    p.eta = 0.5;
    Rng rng(11);
    IsingProblem prob = build_problem(random_bias(16, rng), random_signal(16, rng), p, city);
    Partition part = partition_lattice(city, prob, 8, 0);
    REQUIRE(part.group_count() == 2);
    SignalVector frozen = random_signal(16, rng);

    for (int g = 0; g < 2; ++g) {
      GroupProblem gp = build_group_problem(prob, part, g, frozen);
      int m = static_cast<int>(gp.nodes.size());
      REQUIRE(m == 8);

      double offset = 0.0;
      bool first = true;
      double best_group = 0.0, best_full = 0.0;
      SignalVector argmin_group, argmin_full;
      for (int code = 0; code < (1 << m); ++code) {
        SignalVector local(m);
        SignalVector assembled = frozen;
        for (int b = 0; b < m; ++b) {
          local[b] = (code >> b) & 1 ? +1 : -1;
          assembled[gp.nodes[b]] = local[b];
        }
        double hg = evaluate(gp.problem, local);
        double hf = evaluate(prob, assembled);
        if (first) {
          offset = hf - hg;
          best_group = hg;
          best_full = hf;
          argmin_group = local;
          argmin_full = local;
          first = false;
        } else {
          REQUIRE(hf - hg == Catch::Approx(offset).margin(1e-8));
          if (hg < best_group) {
            best_group = hg;
            argmin_group = local;
          }
          if (hf < best_full) {
            best_full = hf;
            argmin_full = local;
          }
        }
      }
      REQUIRE(argmin_group == argmin_full);
    }
  }

  SECTION("invalid group index throws") {
    Lattice city(3);
    ModelParams p;
    IsingProblem prob = build_problem(FlowBias(9, 0.0), SignalVector(9, 1), p, city);
    Partition part = partition_lattice(city, prob, 4, 0);
    REQUIRE_THROWS_AS(build_group_problem(prob, part, -1, SignalVector(9, 1)),
                      std::out_of_range);
    REQUIRE_THROWS_AS(build_group_problem(prob, part, part.group_count(), SignalVector(9, 1)),
                      std::out_of_range);
  }
}

TEST_CASE("partitioned solving", "[partition]") {
  SECTION("single group reproduces plain annealing bit for bit") {
    Lattice city(3);
    ModelParams p;
    p.alpha = 0.8;
    p.eta = 1.0;
    Rng rng(17);
    IsingProblem prob = build_problem(random_bias(9, rng), random_signal(9, rng), p, city);
    Partition part = partition_lattice(city, prob, 64, 0);
    SolverConfig cfg;
    cfg.seed = 31;
    cfg.num_reads = 10;
    cfg.sweeps = 60;
    SignalVector prev = random_signal(9, rng);
    SolveResult via_part = solve_partitioned(prob, part, cfg, prev);
    SolveResult via_sa = solve_sa(prob, cfg, prev);
    REQUIRE(via_part.sigma == via_sa.sigma);
    REQUIRE(via_part.energy == via_sa.energy);
  }

  SECTION("alpha=0 decouples: any partition reaches the exact optimum") {
    Lattice city(3);
    ModelParams p;
    p.alpha = 0.0;
    p.eta = 1.0;
    Rng rng(19);
    IsingProblem prob = build_problem(random_bias(9, rng), random_signal(9, rng), p, city);
    Partition part = partition_lattice(city, prob, 3, 5);
    REQUIRE(part.group_count() >= 3);
    SignalVector prev = random_signal(9, rng);
    SolverConfig cfg;
    cfg.seed = 7;
    cfg.num_reads = 10;
    cfg.sweeps = 100;
    SolveResult via_part = solve_partitioned(prob, part, cfg, prev);
    SolveResult exact = solve_exact(prob);
    REQUIRE(via_part.energy == Catch::Approx(exact.energy).margin(1e-9));
  }

  SECTION("partitioned energy never beats the exact optimum") {
    Lattice city(4);
    ModelParams p;
    p.alpha = 0.9;
    p.eta = 1.0;
    Rng rng(23);
    IsingProblem prob = build_problem(random_bias(16, rng), random_signal(16, rng), p, city);
    Partition part = partition_lattice(city, prob, 4, 1);
    SolverConfig cfg;
    cfg.seed = 2;
    SignalVector prev = random_signal(16, rng);
    SolveResult via_part = solve_partitioned(prob, part, cfg, prev);
    REQUIRE(via_part.energy >= solve_exact(prob).energy - 1e-9);
  }

  SECTION("multi-pass re-freezing can only be run, stays deterministic") {
    Lattice city(4);
    ModelParams p;
    p.alpha = 0.8;
    p.eta = 1.0;
    Rng rng(29);
    IsingProblem prob = build_problem(random_bias(16, rng), random_signal(16, rng), p, city);
    Partition part = partition_lattice(city, prob, 4, 1);
    SolverConfig cfg;
    cfg.seed = 3;
    cfg.partition_passes = 4;
    SignalVector prev = random_signal(16, rng);
    SolveResult a = solve_partitioned(prob, part, cfg, prev);
    SolveResult b = solve_partitioned(prob, part, cfg, prev);
    REQUIRE(a.sigma == b.sigma);
    REQUIRE(a.energy == b.energy);
  }
}

TEST_CASE("partition text round trip and validation", "[partition]") {
  Lattice city(5);
  SparseMatrix j = build_coupling(city, 0.7, 1.0);
  Partition part = partition_lattice(city, j, 7, 9);

  std::stringstream ss;
  write_partition_text(part, ss);
  Partition back = read_partition_text(ss, j, 7);
  REQUIRE(back.group_of == part.group_of);
  REQUIRE(back.cut_edges == part.cut_edges);
  check_cover(back);

  std::stringstream dup("0 0\n0 1\n");
  REQUIRE_THROWS(read_partition_text(dup, j, 7));
  std::stringstream missing("0 0\n24 1\n");
  REQUIRE_THROWS(read_partition_text(missing, j, 7));
}
