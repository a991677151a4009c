#pragma once

#include <cstdint>
#include <vector>

#include "calib96/linalg.hpp"

namespace calib96 {

inline constexpr int kNumObservables = 5;

struct L96Config {
  int K = 36;             // large-scale variables
  int J = 10;             // small-scale variables per large-scale variable
  double dt = 0.005;      // integration step, model time units
  double T = 100.0;       // averaging window length
  double spinup = 20.0;   // discarded transient before each window
  double total_time = 40000.0;  // post-spinup length for covariance estimation

  void validate() const;
};

// Calibration parameters theta = (h, F, log c, b). c is carried in log space;
// exp(log_c) keeps the time-scale ratio positive by construction.
struct ParameterVector {
  double h = 1.0;
  double F = 10.0;
  double log_c = 2.302585092994046;  // log 10
  double b = 10.0;

  double c() const;
  Vec to_vec() const;
  static ParameterVector from_vec(const Vec& v);
  void validate() const;
};

struct L96State {
  Vec X;  // size K
  Mat Y;  // J x K

  static L96State zero(const L96Config& cfg);
  bool finite() const;
};

// dX/dt and dY/dt of the two-scale system. Both index directions are cyclic;
// the small-scale chain wraps into the neighboring large-scale column.
L96State rhs(const L96State& state, const ParameterVector& theta, const L96Config& cfg);

// Fixed-step RK4 trajectory including both endpoints: duration/dt + 1 states.
// Throws BlowupError (with the model time) when the state leaves the finite range.
std::vector<L96State> integrate(const L96State& state0, const ParameterVector& theta,
                                const L96Config& cfg, double duration);

// Time-and-k average of (X_k, Ybar_k, X_k^2, X_k*Ybar_k, Ybar_k^2) over a
// stored window spanning at least T.
Vec observe_window(const std::vector<L96State>& trajectory, const L96Config& cfg);

// Seeded random initial condition -> spinup -> one window of length T ->
// window average. Pure function of (theta, cfg, seed).
Vec forward(const ParameterVector& theta, const L96Config& cfg, std::uint64_t seed);

// Sample covariance of window averages over floor(total_time/T) disjoint
// windows of one long post-spinup trajectory, symmetrized.
Mat estimate_obs_covariance(const ParameterVector& theta, const L96Config& cfg,
                            double total_time, std::uint64_t seed);

}  // namespace calib96
