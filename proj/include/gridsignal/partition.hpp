#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridsignal/lattice.hpp"
#include "gridsignal/solvers.hpp"

namespace gridsignal {

// Disjoint cover of the variables by groups no larger than max_size, used to
// solve the per-step problem as independent boundary-frozen subproblems.
struct Partition {
  int n = 0;
  int max_size = 64;
  std::vector<int> group_of;             // node -> group index
  std::vector<std::vector<int>> groups;  // sorted node lists
  long long cut_edges = 0;               // unordered J nonzeros crossing groups
  double cut_weight = 0.0;               // sum of |J_ij| over crossing pairs

  int group_count() const { return static_cast<int>(groups.size()); }
};

namespace detail {

struct Tile {
  int row0, rows, col0, cols;
  int size() const { return rows * cols; }
};

// Splits each tile into parts proportional to how many cap-sized groups it
// needs, along its longer side. Tiles stay contiguous rectangles, so groups
// start out as compact patches of the torus.
inline void bisect_tile(const Tile& t, int max_size, std::vector<Tile>& out) {
  int parts = (t.size() + max_size - 1) / max_size;
  if (parts <= 1) {
    out.push_back(t);
    return;
  }
  int left_parts = (parts + 1) / 2;
  bool split_rows = t.rows >= t.cols;
  int extent = split_rows ? t.rows : t.cols;
  int left = static_cast<int>((static_cast<long long>(extent) * left_parts + parts / 2) / parts);
  left = std::max(1, std::min(extent - 1, left));
  Tile a = t, b = t;
  if (split_rows) {
    a.rows = left;
    b.row0 = t.row0 + left;
    b.rows = t.rows - left;
  } else {
    a.cols = left;
    b.col0 = t.col0 + left;
    b.cols = t.cols - left;
  }
  bisect_tile(a, max_size, out);
  bisect_tile(b, max_size, out);
}

inline void recompute_cut(const SparseMatrix& j, Partition& part) {
  long long edges = 0;
  double weight = 0.0;
  for (int i = 0; i < j.n; ++i) {
    for (int k = j.row_ptr[i]; k < j.row_ptr[i + 1]; ++k) {
      int c = j.col[k];
      if (c > i && part.group_of[c] != part.group_of[i]) {
        ++edges;
        weight += std::abs(j.val[k]);
      }
    }
  }
  part.cut_edges = edges;
  part.cut_weight = weight;
}

// Greedy boundary refinement: move a node to an adjacent group when that
// strictly lowers the |J| cut weight and the size cap allows it. Strictly
// positive gains guarantee the cut never increases and the loop terminates.
inline void refine_partition(const SparseMatrix& j, Partition& part, Rng& rng,
                             int max_passes = 8) {
  std::vector<int> group_size(part.groups.size());
  for (std::size_t g = 0; g < part.groups.size(); ++g) {
    group_size[g] = static_cast<int>(part.groups[g].size());
  }
  std::vector<int> order(j.n);
  std::iota(order.begin(), order.end(), 0);

  for (int pass = 0; pass < max_passes; ++pass) {
    for (int i = j.n - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    }
    bool moved = false;
    for (int v : order) {
      int gv = part.group_of[v];
      if (group_size[gv] <= 1) continue;
      std::unordered_map<int, double> link;  // group -> total |J| weight to v
      for (int k = j.row_ptr[v]; k < j.row_ptr[v + 1]; ++k) {
        int u = j.col[k];
        if (u == v) continue;
        link[part.group_of[u]] += std::abs(j.val[k]);
      }
      double internal = link.count(gv) ? link[gv] : 0.0;
      int best_g = -1;
      double best_gain = 1e-12;
      for (const auto& [g, w] : link) {
        if (g == gv || group_size[g] >= part.max_size) continue;
        double gain = w - internal;
        if (gain > best_gain || (gain == best_gain && best_g != -1 && g < best_g)) {
          best_gain = gain;
          best_g = g;
        }
      }
      if (best_g >= 0) {
        part.group_of[v] = best_g;
        --group_size[gv];
        ++group_size[best_g];
        moved = true;
      }
    }
    if (!moved) break;
  }

  for (auto& g : part.groups) g.clear();
  for (int v = 0; v < j.n; ++v) part.groups[part.group_of[v]].push_back(v);
}

// Canonical group numbering: ascending by smallest node id.
inline void renumber_groups(Partition& part) {
  std::vector<std::vector<int>> groups;
  for (auto& g : part.groups) {
    if (!g.empty()) {
      std::sort(g.begin(), g.end());
      groups.push_back(std::move(g));
    }
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  part.groups = std::move(groups);
  for (std::size_t g = 0; g < part.groups.size(); ++g) {
    for (int v : part.groups[g]) part.group_of[v] = static_cast<int>(g);
  }
}

}  // namespace detail

// Recursive geometric bisection of the torus into contiguous tiles followed
// by boundary refinement that minimizes the |J| cut weight. Deterministic
// for a fixed seed.
inline Partition partition_lattice(const Lattice& city, const SparseMatrix& coupling,
                                   int max_size, std::uint64_t seed) {
  if (max_size < 1) {
    throw std::invalid_argument("partition_lattice: max_size must be positive");
  }
  if (coupling.n != city.size()) {
    throw std::invalid_argument("partition_lattice: coupling size mismatch");
  }
  Partition part;
  part.n = city.size();
  part.max_size = max_size;
  part.group_of.assign(part.n, 0);

  std::vector<detail::Tile> tiles;
  detail::bisect_tile({0, city.roads(), 0, city.roads()}, max_size, tiles);
  part.groups.resize(tiles.size());
  for (std::size_t g = 0; g < tiles.size(); ++g) {
    const auto& t = tiles[g];
    for (int r = t.row0; r < t.row0 + t.rows; ++r) {
      for (int c = t.col0; c < t.col0 + t.cols; ++c) {
        int v = city.node(r, c);
        part.group_of[v] = static_cast<int>(g);
        part.groups[g].push_back(v);
      }
    }
  }

  if (tiles.size() > 1) {
    Rng rng(mix_seed(seed, 0x9a7));
    detail::refine_partition(coupling, part, rng);
  }
  detail::renumber_groups(part);
  detail::recompute_cut(coupling, part);
  return part;
}

inline Partition partition_lattice(const Lattice& city, const IsingProblem& prob,
                                   int max_size, std::uint64_t seed) {
  return partition_lattice(city, *prob.coupling, max_size, seed);
}

// Subproblem over one group with every outside spin frozen:
//   H^g(s) = s^T J_gg s + (h_g + 2 sigma_out^T J_out,g) . s.
// The cross coupling enters twice because both triangles of J carry it, so
// H^g differs from the full H (outside spins fixed) only by a constant.
struct GroupProblem {
  IsingProblem problem;
  std::vector<int> nodes;  // local index -> global node id
};

inline GroupProblem build_group_problem(const IsingProblem& prob, const Partition& part,
                                        int group, const SignalVector& sigma_frozen) {
  if (group < 0 || group >= part.group_count()) {
    throw std::out_of_range("build_group_problem: invalid group index");
  }
  if (static_cast<int>(sigma_frozen.size()) != prob.n) {
    throw std::invalid_argument("build_group_problem: frozen state dimension mismatch");
  }
  const auto& nodes = part.groups[group];
  std::vector<int> local_of(prob.n, -1);
  for (std::size_t l = 0; l < nodes.size(); ++l) local_of[nodes[l]] = static_cast<int>(l);

  const SparseMatrix& j = *prob.coupling;
  auto sub = std::make_shared<SparseMatrix>();
  sub->n = static_cast<int>(nodes.size());
  sub->row_ptr.resize(sub->n + 1, 0);

  GroupProblem gp;
  gp.nodes = nodes;
  gp.problem.n = sub->n;
  gp.problem.field.resize(sub->n);
  gp.problem.constant = 0.0;

  for (std::size_t l = 0; l < nodes.size(); ++l) {
    int v = nodes[l];
    sub->row_ptr[l] = static_cast<int>(sub->col.size());
    double frozen_field = 0.0;
    for (int k = j.row_ptr[v]; k < j.row_ptr[v + 1]; ++k) {
      int u = j.col[k];
      if (local_of[u] >= 0) {
        sub->col.push_back(local_of[u]);
        sub->val.push_back(j.val[k]);
      } else {
        frozen_field += j.val[k] * sigma_frozen[u];
      }
    }
    gp.problem.field[l] = prob.field[v] + 2.0 * frozen_field;
  }
  sub->row_ptr[sub->n] = static_cast<int>(sub->col.size());
  gp.problem.coupling = std::move(sub);
  return gp;
}

// Solves every group independently with outside spins frozen at sigma_prev
// (the one-shot parallel scheme), then evaluates the assembled signal
// against the full Hamiltonian. partition_passes > 1 re-freezes at the
// newest assembly and repeats until no group changes or the limit is hit.
inline SolveResult solve_partitioned(const IsingProblem& prob, const Partition& part,
                                     const SolverConfig& cfg, const SignalVector& sigma_prev) {
  if (static_cast<int>(sigma_prev.size()) != prob.n) {
    throw std::invalid_argument("solve_partitioned: dimension mismatch");
  }
  SignalVector assembled = sigma_prev;
  int passes = std::max(1, cfg.partition_passes);
  for (int pass = 0; pass < passes; ++pass) {
    SignalVector frozen = assembled;
    bool changed = false;
    for (int g = 0; g < part.group_count(); ++g) {
      GroupProblem gp = build_group_problem(prob, part, g, frozen);
      SignalVector init(gp.nodes.size());
      for (std::size_t l = 0; l < gp.nodes.size(); ++l) init[l] = frozen[gp.nodes[l]];
      SolverConfig inner = cfg;
      inner.seed = cfg.seed + static_cast<std::uint64_t>(g) +
                   static_cast<std::uint64_t>(pass) * part.group_count();
      SolveResult r = solve_sa(gp.problem, inner, init);
      for (std::size_t l = 0; l < gp.nodes.size(); ++l) {
        if (assembled[gp.nodes[l]] != r.sigma[l]) changed = true;
        assembled[gp.nodes[l]] = r.sigma[l];
      }
    }
    if (!changed) break;
  }
  SolveResult res;
  res.sigma = std::move(assembled);
  res.energy = evaluate(prob, res.sigma);
  res.reads_used = cfg.num_reads * part.group_count();
  res.best_read_index = 0;
  res.read_energies = {res.energy};
  return res;
}

// Text form: one "node_id group_id" line per node, ascending by node.
inline void write_partition_text(const Partition& part, std::ostream& os) {
  for (int v = 0; v < part.n; ++v) {
    os << v << ' ' << part.group_of[v] << '\n';
  }
}

inline Partition read_partition_text(std::istream& is, const SparseMatrix& coupling,
                                     int max_size) {
  Partition part;
  part.max_size = max_size;
  std::string line;
  std::vector<std::pair<int, int>> entries;
  int max_node = -1, max_group = -1;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int v, g;
    if (!(ls >> v >> g) || v < 0 || g < 0) {
      throw std::runtime_error("partition text: bad line " + std::to_string(lineno));
    }
    entries.emplace_back(v, g);
    max_node = std::max(max_node, v);
    max_group = std::max(max_group, g);
  }
  part.n = max_node + 1;
  if (part.n != coupling.n) {
    throw std::runtime_error("partition text: node count does not match problem size");
  }
  part.group_of.assign(part.n, -1);
  part.groups.resize(max_group + 1);
  for (const auto& [v, g] : entries) {
    if (part.group_of[v] != -1) {
      throw std::runtime_error("partition text: duplicate node " + std::to_string(v));
    }
    part.group_of[v] = g;
    part.groups[g].push_back(v);
  }
  for (int v = 0; v < part.n; ++v) {
    if (part.group_of[v] == -1) {
      throw std::runtime_error("partition text: node " + std::to_string(v) + " missing");
    }
  }
  for (const auto& g : part.groups) {
    if (static_cast<int>(g.size()) > max_size) {
      throw std::runtime_error("partition text: group exceeds max_size");
    }
  }
  detail::renumber_groups(part);
  detail::recompute_cut(coupling, part);
  return part;
}

}  // namespace gridsignal
