#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "gridsignal/lattice.hpp"
#include "gridsignal/rng.hpp"

using namespace gridsignal;

TEST_CASE("lattice sizes and neighbor structure", "[lattice]") {
  Lattice city(3);
  REQUIRE(city.size() == 9);
  for (int i = 0; i < 9; ++i) {
    std::set<int> nb(city.neighbors(i).begin(), city.neighbors(i).end());
    REQUIRE(nb.size() == 4);
    REQUIRE(nb.count(i) == 0);
  }
  REQUIRE(Lattice(50).size() == 2500);
  REQUIRE_THROWS_AS(Lattice(2), std::invalid_argument);
  REQUIRE_THROWS_AS(Lattice(0), std::invalid_argument);
}

TEST_CASE("adjacency is symmetric and 4-regular", "[lattice]") {
  for (int L : {3, 4, 5, 8}) {
    Lattice city(L);
    SparseMatrix a = adjacency(city);
    REQUIRE(a.nnz() == 4 * L * L);
    for (int i = 0; i < a.n; ++i) {
      REQUIRE(a.row_ptr[i + 1] - a.row_ptr[i] == 4);
      double row_sum = 0.0;
      for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        REQUIRE(a.col[k] != i);
        REQUIRE(a.val[k] == 1.0);
        row_sum += a.val[k];
        REQUIRE(a.at(a.col[k], i) == 1.0);  // symmetry
      }
      REQUIRE(row_sum == 4.0);
    }
  }
}

TEST_CASE("A^T A has nine nonzeros per column at L=5", "[lattice]") {
  Lattice city(5);
  SparseMatrix a = adjacency(city);
  // Structural product computed independently of the library's builder.
  std::map<std::pair<int, int>, int> ata;
  for (int i = 0; i < a.n; ++i) {
    for (int k1 = a.row_ptr[i]; k1 < a.row_ptr[i + 1]; ++k1) {
      for (int k2 = a.row_ptr[i]; k2 < a.row_ptr[i + 1]; ++k2) {
        ata[{a.col[k1], a.col[k2]}] += 1;
      }
    }
  }
  std::vector<int> per_col(a.n, 0);
  for (const auto& [key, cnt] : ata) {
    (void)cnt;
    per_col[key.second] += 1;
  }
  for (int c = 0; c < a.n; ++c) REQUIRE(per_col[c] == 9);
}

TEST_CASE("lane signs follow the axis of the road", "[lattice]") {
  Lattice city(4);
  int origin = city.node(0, 0);
  REQUIRE(city.lane_sign(origin, city.node(1, 0)) == +1);
  REQUIRE(city.lane_sign(origin, city.node(0, 1)) == -1);
  REQUIRE_THROWS_AS(city.lane_sign(origin, city.node(1, 1)), std::invalid_argument);
  for (int i = 0; i < city.size(); ++i) {
    for (int j : city.neighbors(i)) {
      REQUIRE(city.lane_sign(i, j) == city.lane_sign(j, i));
    }
  }
}

TEST_CASE("toroidal distance is a symmetric metric with lattice symmetry", "[lattice]") {
  int L = 7;
  Lattice city(L);
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    int i = rng.uniform_int(city.size());
    int j = rng.uniform_int(city.size());
    int k = rng.uniform_int(city.size());
    double dij = city.toroidal_distance(i, j);
    REQUIRE(dij == city.toroidal_distance(j, i));
    REQUIRE(dij >= 0.0);
    REQUIRE((dij == 0.0) == (i == j));
    REQUIRE(dij <= city.toroidal_distance(i, k) + city.toroidal_distance(k, j) + 1e-12);

    // 90 degree rotation (r, c) -> (c, L-1-r) preserves distances.
    auto rot = [&](int id) { return city.node(city.col(id), L - 1 - city.row(id)); };
    REQUIRE(dij == Catch::Approx(city.toroidal_distance(rot(i), rot(j))).margin(1e-12));
  }
}

TEST_CASE("node indexing round-trips", "[lattice]") {
  Lattice city(6);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) {
      int id = city.node(r, c);
      REQUIRE(city.row(id) == r);
      REQUIRE(city.col(id) == c);
    }
  }
}
