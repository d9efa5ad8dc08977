#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsignal {

// Compressed sparse row matrix with symmetric content. Both triangles are
// materialized so any row gives the full set of couplings of that variable.
struct SparseMatrix {
  int n = 0;
  std::vector<int> row_ptr;  // size n+1
  std::vector<int> col;      // size nnz
  std::vector<double> val;   // size nnz

  int nnz() const { return static_cast<int>(col.size()); }

  double at(int i, int j) const {
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      if (col[k] == j) return val[k];
    }
    return 0.0;
  }
};

// L x L grid of intersections on a torus. Node ids are row-major:
// id = row * L + col. Row 0 is the northern edge; rows grow southward.
// Neighbor lists are kept in the fixed order north, south, east, west so
// every iteration over the lattice is deterministic.
class Lattice {
 public:
  explicit Lattice(int roads) : L_(roads), n_(roads * roads) {
    if (roads < 3) {
      throw std::invalid_argument("Lattice: need at least 3 roads per direction, got " +
                                  std::to_string(roads));
    }
    nbr_.resize(n_);
    for (int r = 0; r < L_; ++r) {
      for (int c = 0; c < L_; ++c) {
        int i = node(r, c);
        nbr_[i] = {node(mod(r - 1), c),   // north
                   node(mod(r + 1), c),   // south
                   node(r, mod(c + 1)),   // east
                   node(r, mod(c - 1))};  // west
      }
    }
  }

  int roads() const { return L_; }
  int size() const { return n_; }

  int node(int row, int col) const { return row * L_ + col; }
  int row(int id) const { return id / L_; }
  int col(int id) const { return id % L_; }

  const std::array<int, 4>& neighbors(int i) const { return nbr_[i]; }

  bool adjacent(int i, int j) const {
    const auto& nb = nbr_[i];
    return j == nb[0] || j == nb[1] || j == nb[2] || j == nb[3];
  }

  // Lane orientation: +1 for north-south lanes (endpoints differ in row),
  // -1 for east-west (differ in column). Symmetric in (i, j).
  int lane_sign(int i, int j) const {
    if (!adjacent(i, j)) {
      throw std::invalid_argument("lane_sign: nodes " + std::to_string(i) + " and " +
                                  std::to_string(j) + " are not adjacent");
    }
    return row(i) != row(j) ? +1 : -1;
  }

  // Sign of the lane to node i from its k-th canonical neighbor.
  static int lane_sign_by_dir(int k) { return k < 2 ? +1 : -1; }

  // Euclidean distance on the torus with unit lattice spacing.
  double toroidal_distance(int i, int j) const {
    int dr = std::abs(row(i) - row(j));
    int dc = std::abs(col(i) - col(j));
    dr = std::min(dr, L_ - dr);
    dc = std::min(dc, L_ - dc);
    return std::sqrt(static_cast<double>(dr) * dr + static_cast<double>(dc) * dc);
  }

 private:
  int mod(int v) const { return (v % L_ + L_) % L_; }

  int L_;
  int n_;
  std::vector<std::array<int, 4>> nbr_;
};

inline Lattice build_lattice(int roads) { return Lattice(roads); }

// 0/1 adjacency matrix of the periodic lattice graph; every row has
// exactly four nonzeros in canonical neighbor order.
inline SparseMatrix adjacency(const Lattice& city) {
  SparseMatrix a;
  a.n = city.size();
  a.row_ptr.resize(a.n + 1);
  a.col.reserve(4 * a.n);
  a.val.assign(4 * static_cast<std::size_t>(a.n), 1.0);
  for (int i = 0; i < a.n; ++i) {
    a.row_ptr[i] = 4 * i;
    for (int k = 0; k < 4; ++k) a.col.push_back(city.neighbors(i)[k]);
  }
  a.row_ptr[a.n] = 4 * a.n;
  return a;
}

}  // namespace gridsignal
