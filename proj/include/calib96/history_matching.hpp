#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calib96/eks.hpp"
#include "calib96/gp.hpp"
#include "calib96/mcmc.hpp"

namespace calib96 {

// Candidate pool plus the per-wave retention mask. Masks are nested by
// construction: a candidate ruled out in wave w stays ruled out.
struct NROYSpace {
  Mat pool;                 // n_cand x d
  std::vector<char> mask;   // 1 = not ruled out yet
  int wave = 0;

  static NROYSpace uniform(Eigen::Index n_cand, const PriorSpec& prior,
                           std::uint64_t seed);
  Eigen::Index retained_count() const;
  double retained_fraction() const;
};

struct ImplausibilityOptions {
  // Componentwise reading of the metric with max aggregation across outputs;
  // the vector-norm form divides ||mu - y|| by the root of the summed
  // variances instead.
  bool vector_norm = false;
};

// Per-output |mu_i(theta) - y_i| / sqrt(Gamma_obs[i,i] + var_i(theta)).
Vec implausibility(const Vec& theta, const MultiGP& emulator, const Vec& y_obs,
                   const Mat& gamma_obs);

// Aggregated implausibility for every pool row (max over outputs, or the
// vector-norm form), batched through the emulator.
Vec pool_implausibility(const Mat& pool, const MultiGP& emulator, const Vec& y_obs,
                        const Mat& gamma_obs, const ImplausibilityOptions& opts = {});

// Mask update from precomputed aggregated values; intersects with the
// existing mask. Throws EmptyNroyError when nothing survives.
NROYSpace apply_threshold(const NROYSpace& space, const Vec& aggregated, double threshold);

// Retains pool candidates whose aggregated implausibility is <= threshold,
// intersected with the existing mask. Throws EmptyNroyError when nothing
// survives.
NROYSpace nroy_filter(const NROYSpace& space, const MultiGP& emulator, const Vec& y_obs,
                      const Mat& gamma_obs, double threshold,
                      const ImplausibilityOptions& opts = {});

// k retained candidates drawn uniformly without replacement.
Mat sample_nroy(const NROYSpace& space, Eigen::Index k, std::uint64_t seed);

struct HMOptions {
  int waves = 5;
  Eigen::Index pool_size = 1000000;
  double threshold = 3.0;
  int lhs_restarts = 100;
  bool cumulative_training = false;  // default: each wave refits on its own points
  ImplausibilityOptions implausibility;
  FitOptions fit;
  HyperPrior hyperprior;
  STMCMCConfig mcmc;
};

struct HMWaveRecord {
  int wave = 0;
  double retained_fraction = 1.0;
  Eigen::Index training_points = 0;
  // Implausibility quantiles over the pool (0, 25, 50, 75, 100%).
  Vec quantiles;
};

struct HMRunResult {
  PosteriorSamples posterior;
  NROYSpace space;
  MultiGP emulator;
  std::vector<HMWaveRecord> waves;
  long forward_evaluations = 0;
  std::vector<std::string> notes;
};

// Wave 1 trains on a maximin-LHS design over the full box; later waves draw
// their training points from the current NROY space, refit, and filter. An
// empty NROY space stops the waves early; the final posterior comes from
// ST-MCMC against the last successful wave's emulator.
HMRunResult run_hm(long per_wave_budget, const PriorSpec& prior, const ForwardFn& forward_fn,
                   const Vec& y_obs, const Mat& gamma_obs, std::uint64_t seed,
                   const HMOptions& opts = {});

}  // namespace calib96
