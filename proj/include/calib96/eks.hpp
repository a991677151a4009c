#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "calib96/gp.hpp"
#include "calib96/mcmc.hpp"

namespace calib96 {

struct Ensemble {
  Mat particles;     // n_ens x d
  Mat outputs;       // n_ens x p; empty until evaluated
  int iteration = 0;

  bool has_outputs() const { return outputs.size() > 0; }
};

struct EKSOptions {
  double dt0 = 1.0;
  double eps = 1e-8;
  // Box for reflecting particles back into the prior support; disabled when
  // absent (e.g. Gaussian-prior test problems).
  std::optional<PriorSpec> bounds;
};

// One interacting-particle update of the ensemble Kalman sampler: data-misfit
// drift preconditioned by the ensemble covariance, Gaussian prior drift, and
// sqrt(2 dt) C^{1/2} noise, with dt = dt0 / (||drift||_F + eps). The noise
// matrix has one standard-normal row per particle identity. Returned ensemble
// is not yet evaluated.
Ensemble eks_step(const Ensemble& ens, const Vec& y_obs, const Mat& gamma_obs,
                  const Vec& prior_mean, const Mat& prior_cov, const Mat& noise,
                  const EKSOptions& opts);

// Batched forward map: rows of theta -> rows of outputs. Throws BlowupError
// per-point via the scalar form used internally.
using ForwardFn = std::function<Vec(const Vec& theta)>;

struct EKSRun {
  std::vector<Ensemble> history;  // n_iter evaluated ensembles + final unevaluated
  long forward_evaluations = 0;
  int blowup_resamples = 0;
};

// Draws the initial ensemble from the prior box, runs n_iter
// evaluate-then-update iterations. history[0..n_iter-1] carry outputs;
// history[n_iter] is the final updated (unevaluated) ensemble. A particle
// whose forward evaluation blows up is resampled near the ensemble mean; the
// replacement evaluation is counted like any other. The uniform prior enters
// the drift as its moment-matched Gaussian, with reflection at the bounds.
EKSRun run_eks(const PriorSpec& prior, Eigen::Index n_ens, int n_iter,
               const ForwardFn& forward_fn, const Vec& y_obs, const Mat& gamma_obs,
               std::uint64_t seed, const EKSOptions& opts = {});

// Concatenates (theta, G(theta)) from the scheduled iterations (1-based, must
// be evaluated) into one Dataset, merging duplicate inputs.
Dataset thin_for_emulation(const std::vector<Ensemble>& history,
                           const std::vector<int>& schedule);

}  // namespace calib96
