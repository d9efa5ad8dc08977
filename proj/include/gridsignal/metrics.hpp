#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridsignal/dynamics.hpp"
#include "gridsignal/lattice.hpp"

namespace gridsignal {

// Full record of one controlled trajectory: states, chosen signals, and the
// per-step Hamiltonian, for t = 0..T. Row 0 holds the random initial state;
// its energy is the objective of keeping sigma(0), i.e. eta contributes 0.
struct TrajectoryLog {
  int roads = 0;
  double alpha = 0.0;
  double eta = 1.0;
  std::string method;
  std::uint64_t seed = 0;

  std::vector<FlowBias> x;
  std::vector<SignalVector> sigma;
  std::vector<double> energy;

  int steps() const { return static_cast<int>(energy.size()) - 1; }
};

// Correlation values on a lag or distance grid, normalized so R(0) = 1.
struct CorrelationCurve {
  std::vector<double> z;
  std::vector<double> r;

  std::size_t size() const { return z.size(); }
};

struct DampedCosineFit {
  double lambda = 0.0;
  double omega = 0.0;
  double residual = 0.0;  // RMS of R(z) - exp(-lambda z) cos(omega z)
};

// m = (1/L^2) sum sigma_i.
inline double magnetization(const SignalVector& sigma) {
  long long total = std::accumulate(sigma.begin(), sigma.end(), 0LL);
  return static_cast<double>(total) / static_cast<double>(sigma.size());
}

inline double time_average(const std::vector<double>& series, int burn_in) {
  if (burn_in < 0 || burn_in >= static_cast<int>(series.size())) {
    throw std::invalid_argument("time_average: empty averaging window");
  }
  double acc = 0.0;
  for (std::size_t t = burn_in; t < series.size(); ++t) acc += series[t];
  return acc / static_cast<double>(series.size() - burn_in);
}

// Normalized sample autocorrelation of each intersection's signal series,
// averaged over intersections; each lag sum is divided by its own sample
// count. Constant series carry no information and are skipped (the count is
// reported via skipped_out).
inline CorrelationCurve temporal_autocorrelation(const TrajectoryLog& log, int max_lag,
                                                 int* skipped_out = nullptr) {
  int samples = static_cast<int>(log.sigma.size());
  if (samples < 2 || max_lag < 0 || max_lag >= samples) {
    throw std::invalid_argument("temporal_autocorrelation: bad lag window");
  }
  int n = static_cast<int>(log.sigma.front().size());
  std::vector<double> acc(max_lag + 1, 0.0);
  int used = 0, skipped = 0;
  std::vector<double> centered(samples);
  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int t = 0; t < samples; ++t) mean += log.sigma[t][i];
    mean /= samples;
    double var = 0.0;
    for (int t = 0; t < samples; ++t) {
      centered[t] = log.sigma[t][i] - mean;
      var += centered[t] * centered[t];
    }
    var /= samples;
    if (var == 0.0) {
      ++skipped;
      continue;
    }
    ++used;
    for (int lag = 0; lag <= max_lag; ++lag) {
      double c = 0.0;
      for (int t = 0; t + lag < samples; ++t) c += centered[t] * centered[t + lag];
      c /= static_cast<double>(samples - lag);
      acc[lag] += c / var;
    }
  }
  if (skipped_out) *skipped_out = skipped;
  if (used == 0) {
    throw std::domain_error("temporal_autocorrelation: every intersection is constant");
  }
  CorrelationCurve curve;
  curve.z.resize(max_lag + 1);
  curve.r.resize(max_lag + 1);
  for (int lag = 0; lag <= max_lag; ++lag) {
    curve.z[lag] = lag;
    curve.r[lag] = acc[lag] / used;
  }
  return curve;
}

// Mean-removed pair correlation of a snapshot, radially averaged over
// toroidal Euclidean distance. Bin k is centered at k * bin_width with
// edges at half-widths, so nearest neighbors land in one bin.
inline CorrelationCurve spatial_autocorrelation(const SignalVector& sigma, const Lattice& city,
                                                double bin_width = 1.0) {
  if (bin_width <= 0.0) {
    throw std::invalid_argument("spatial_autocorrelation: bin_width must be positive");
  }
  int n = city.size();
  double mean = magnetization(sigma);
  double var = 0.0;
  std::vector<double> dev(n);
  for (int i = 0; i < n; ++i) {
    dev[i] = sigma[i] - mean;
    var += dev[i] * dev[i];
  }
  var /= n;
  if (var == 0.0) {
    throw std::domain_error("spatial_autocorrelation: snapshot has zero variance");
  }

  // Correlations depend only on the displacement, so accumulate per
  // (dr, dc) class instead of per node pair.
  int roads = city.roads();
  std::vector<double> bin_sum;
  std::vector<long long> bin_count;
  auto deposit = [&](double dist, double value, long long count) {
    int k = static_cast<int>(std::floor(dist / bin_width + 0.5));
    if (k >= static_cast<int>(bin_sum.size())) {
      bin_sum.resize(k + 1, 0.0);
      bin_count.resize(k + 1, 0);
    }
    bin_sum[k] += value;
    bin_count[k] += count;
  };

  for (int dr = 0; dr < roads; ++dr) {
    for (int dc = 0; dc < roads; ++dc) {
      double acc = 0.0;
      for (int r = 0; r < roads; ++r) {
        int r2 = r + dr < roads ? r + dr : r + dr - roads;
        for (int c = 0; c < roads; ++c) {
          int c2 = c + dc < roads ? c + dc : c + dc - roads;
          acc += dev[city.node(r, c)] * dev[city.node(r2, c2)];
        }
      }
      int mr = std::min(dr, roads - dr);
      int mc = std::min(dc, roads - dc);
      double dist = std::sqrt(static_cast<double>(mr) * mr + static_cast<double>(mc) * mc);
      deposit(dist, acc / var, n);
    }
  }

  CorrelationCurve curve;
  for (std::size_t k = 0; k < bin_sum.size(); ++k) {
    if (bin_count[k] == 0) continue;
    curve.z.push_back(k * bin_width);
    curve.r.push_back(bin_sum[k] / static_cast<double>(bin_count[k]));
  }
  return curve;
}

namespace detail {

inline double damped_cosine_rms(const CorrelationCurve& curve, double lambda, double omega) {
  double acc = 0.0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    double model = std::exp(-lambda * curve.z[k]) * std::cos(omega * curve.z[k]);
    double d = curve.r[k] - model;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(curve.size()));
}

}  // namespace detail

// Least-squares fit of R(z) = exp(-lambda z) cos(omega z): 101 x 101 coarse
// grid over [0,5] x [0,pi], then compass-search refinement of the grid
// minimum down to 1e-6 steps. Fully deterministic.
inline DampedCosineFit fit_damped_cosine(const CorrelationCurve& curve) {
  if (curve.size() < 5) {
    throw std::invalid_argument("fit_damped_cosine: need at least 5 points");
  }
  constexpr double lambda_max = 5.0;
  const double omega_max = M_PI;
  constexpr int grid = 101;

  double best_l = 0.0, best_w = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < grid; ++a) {
    double lambda = lambda_max * a / (grid - 1);
    for (int b = 0; b < grid; ++b) {
      double omega = omega_max * b / (grid - 1);
      double r = detail::damped_cosine_rms(curve, lambda, omega);
      if (r < best) {
        best = r;
        best_l = lambda;
        best_w = omega;
      }
    }
  }

  double step_l = lambda_max / (grid - 1);
  double step_w = omega_max / (grid - 1);
  while (step_l > 1e-6 || step_w > 1e-6) {
    bool improved = false;
    const double cand_l[2] = {best_l - step_l, best_l + step_l};
    for (double l : cand_l) {
      if (l < 0.0 || l > lambda_max) continue;
      double r = detail::damped_cosine_rms(curve, l, best_w);
      if (r < best) {
        best = r;
        best_l = l;
        improved = true;
      }
    }
    const double cand_w[2] = {best_w - step_w, best_w + step_w};
    for (double w : cand_w) {
      if (w < 0.0 || w > omega_max) continue;
      double r = detail::damped_cosine_rms(curve, best_l, w);
      if (r < best) {
        best = r;
        best_w = w;
        improved = true;
      }
    }
    if (!improved) {
      step_l *= 0.5;
      step_w *= 0.5;
    }
  }

  DampedCosineFit fit;
  fit.lambda = best_l;
  fit.omega = best_w;
  fit.residual = best;
  return fit;
}

// Pointwise mean of curves sharing one grid (e.g. across seeds).
inline CorrelationCurve average_curves(const std::vector<CorrelationCurve>& curves) {
  if (curves.empty()) {
    throw std::invalid_argument("average_curves: no curves");
  }
  CorrelationCurve out = curves.front();
  for (std::size_t c = 1; c < curves.size(); ++c) {
    if (curves[c].size() != out.size()) {
      throw std::invalid_argument("average_curves: grid mismatch");
    }
    for (std::size_t k = 0; k < out.size(); ++k) out.r[k] += curves[c].r[k];
  }
  for (auto& v : out.r) v /= static_cast<double>(curves.size());
  return out;
}

}  // namespace gridsignal
