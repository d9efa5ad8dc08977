#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gridsignal/lattice.hpp"
#include "gridsignal/rng.hpp"

namespace gridsignal {

// Signal display per intersection: +1 lets traffic flow north-south,
// -1 east-west.
using SignalVector = std::vector<int>;

// Signed imbalance between north-south and east-west inflow per
// intersection, in normalized car counts.
using FlowBias = std::vector<double>;

// Normalized car counts on directed lanes. q[4*i + k] holds the lane
// into intersection i from its k-th canonical neighbor (4 L^2 lanes).
struct LaneOccupancy {
  std::vector<double> q;

  static LaneOccupancy zeros(const Lattice& city) {
    return LaneOccupancy{std::vector<double>(4 * static_cast<std::size_t>(city.size()), 0.0)};
  }
};

// Model constants. alpha = 2a - 1 where a is the probability of driving
// straight through an intersection; eta weights the switching penalty.
// q_av and dt only enter when converting back to dimensional units.
struct ModelParams {
  double alpha = 0.0;
  double eta = 1.0;
  double q_av = 1.0;
  double dt = 1.0;

  static ModelParams from_straight_probability(double a, double eta) {
    ModelParams p;
    p.alpha = 2.0 * a - 1.0;
    p.eta = eta;
    return p;
  }

  double straight_probability() const { return 0.5 * (alpha + 1.0); }
};

// Lane dynamics: q_ij += (s_ij / 2)(-sigma_i + alpha * sigma_j) per
// directed lane j -> i. The model is linear, so negative occupancies are
// possible and deliberately not clipped.
inline LaneOccupancy step_lanes(const LaneOccupancy& q, const SignalVector& sigma,
                                const ModelParams& p, const Lattice& city) {
  LaneOccupancy out = q;
  for (int i = 0; i < city.size(); ++i) {
    for (int k = 0; k < 4; ++k) {
      int j = city.neighbors(i)[k];
      double s = Lattice::lane_sign_by_dir(k);
      out.q[4 * static_cast<std::size_t>(i) + k] +=
          0.5 * s * (-sigma[i] + p.alpha * sigma[j]);
    }
  }
  return out;
}

// x_i = sum over incoming lanes of s_ij q_ij / 2.
inline FlowBias flow_bias_from_lanes(const LaneOccupancy& q, const Lattice& city) {
  FlowBias x(city.size(), 0.0);
  for (int i = 0; i < city.size(); ++i) {
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
      acc += Lattice::lane_sign_by_dir(k) * q.q[4 * static_cast<std::size_t>(i) + k];
    }
    x[i] = 0.5 * acc;
  }
  return x;
}

// Aggregated flow dynamics: x(t+1) = x(t) + (-I + (alpha/4) A) sigma(t).
inline FlowBias step_bias(const FlowBias& x, const SignalVector& sigma,
                          const ModelParams& p, const SparseMatrix& adj) {
  if (static_cast<int>(x.size()) != adj.n || static_cast<int>(sigma.size()) != adj.n) {
    throw std::invalid_argument("step_bias: dimension mismatch");
  }
  FlowBias out = x;
  double quarter_alpha = 0.25 * p.alpha;
  for (int i = 0; i < adj.n; ++i) {
    double acc = 0.0;
    for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k) {
      acc += adj.val[k] * sigma[adj.col[k]];
    }
    out[i] += -sigma[i] + quarter_alpha * acc;
  }
  return out;
}

// Random initial condition: x(0) i.i.d. uniform on [-5, 5], sigma(0)
// i.i.d. fair +/-1. Deterministic for a fixed seed.
inline std::pair<FlowBias, SignalVector> init_state(int roads, std::uint64_t seed) {
  Lattice city(roads);
  Rng rng(seed);
  FlowBias x(city.size());
  SignalVector sigma(city.size());
  for (auto& v : x) v = rng.uniform(-5.0, 5.0);
  for (auto& s : sigma) s = rng.sign();
  return {std::move(x), std::move(sigma)};
}

// Back to dimensional car counts: q* = q Q_av dt.
inline double denormalize_count(double q, const ModelParams& p) {
  if (p.q_av <= 0.0 || p.dt <= 0.0) {
    throw std::invalid_argument("denormalize_count: Q_av and dt must be positive");
  }
  return q * p.q_av * p.dt;
}

// Back to dimensional time: t* = t dt.
inline double denormalize_time(double t, const ModelParams& p) {
  if (p.dt <= 0.0) {
    throw std::invalid_argument("denormalize_time: dt must be positive");
  }
  return t * p.dt;
}

// Simulation state as seen by the controller: the current flow bias and
// the signal display chosen at the previous step.
struct TrafficState {
  FlowBias x;
  SignalVector sigma;
};

}  // namespace gridsignal
