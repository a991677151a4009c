#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "calib96/eks.hpp"
#include "calib96/gp.hpp"
#include "calib96/mcmc.hpp"
#include "calib96/rng.hpp"

namespace calib96 {

struct EigOptions {
  // K_{X'X'} carries no nugget off the diagonal; a small jitter keeps it
  // factorable when X' overlaps itself or X. Setting nugget_on_xprime treats
  // the test predictions as noisy simulator outputs instead.
  bool nugget_on_xprime = false;
  double xprime_jitter = 1e-10;
};

// Closed-form expected information gain of the design X about the GP values
// at X': 0.5 * log(det K_{X'X'} / det Sigma') with
// Sigma' = K_{X'X'} - K_{X'X} K_{XX}^{-1} K_{XX'}, evaluated through Cholesky
// factors. K_{XX} includes the nugget. Coordinates and gamma must agree.
double eig_closed(const Mat& X, const Mat& xprime, const GPHyperparams& hp,
                  const EigOptions& opts = {});

// Incremental-EIG engine for one fixed design round: precomputes the factors
// for the current design so that EIG(X + candidate) costs O(n'^2 + n' m) per
// candidate via the rank-one determinant update.
class EigEngine {
 public:
  EigEngine(const MultiGP& gp, const Mat& xprime_raw, const EigOptions& opts = {});

  // Sum over outputs of EIG(X) for the current design.
  double base_eig() const { return base_; }

  // Sum over outputs of EIG(X u {x}); false when the candidate is numerically
  // inadmissible (coincides with the design or saturates the information).
  bool candidate_eig(const Vec& x_raw, double& eig_out) const;

  // Smallest standardized distance from x to the current design points.
  double design_distance(const Vec& x_raw) const;

 private:
  struct PerOutput {
    GPHyperparams hp;
    Mat x_std;
    Mat l_train;    // chol of K_XX (+ jitter)
    Mat xp_std;
    Mat v;          // L^{-1} K_{X,X'}
    Mat l_sigma;    // chol of Sigma'(X)
    double eig0;
  };
  std::vector<PerOutput> outputs_;
  InputDomain domain_;
  double base_ = 0.0;
};

struct SelectOptions {
  int sweep = 512;          // quasi-random candidate sweep size
  int polish_top = 4;       // candidates refined by coordinate search
  int polish_rounds = 3;
  double min_scaled_dist = 1e-9;
  std::uint64_t seed = 0;
};

struct Selection {
  Vec x;
  double eig;
};

struct DesignState {
  Dataset data;
  MultiGP gp;
  Mat xprime;                      // raw coordinates
  std::string xprime_provenance;   // "space-filling" or "posterior-drawn"
  long evaluations = 0;
};

// Greedy EIG maximization over the box: scrambled-Sobol sweep, top candidates
// polished by coordinate search, deterministic tie-breaking by sweep order.
Selection select_next(const DesignState& state, const PriorSpec& bounds,
                      const SelectOptions& opts, const EigOptions& eig_opts = {});

struct DesignLoopOptions {
  Eigen::Index n0 = 64;          // Sobol initialization size
  Eigen::Index n_prime = 128;    // test-point count
  int refit_every = 10;          // full MAP refit cadence (1 = literal algorithm)
  SelectOptions select;
  EigOptions eig;
  FitOptions fit;
  HyperPrior hyperprior;
  STMCMCConfig mcmc;             // final posterior sampling
  // GBOED only:
  int refresh_every = 10;        // X' refresh cadence (1 = literal algorithm)
  Eigen::Index inner_mcmc_n = 2048;
  // X' construction for the non-posterior case: "sobol" or "grid" (1-d tests).
  std::string xprime_mode = "sobol";
};

struct DesignRunResult {
  PosteriorSamples posterior;
  DesignState state;
  // One row per adaptive round: round, theta (d cols), eig, cumulative
  // evaluations, wall-time seconds.
  Mat design_log;
  long forward_evaluations = 0;
  int blowups = 0;
  std::vector<std::string> notes;
};

DesignRunResult run_boed(long budget, const PriorSpec& prior, const ForwardFn& forward_fn,
                         const Vec& y_obs, const Mat& gamma_obs, std::uint64_t seed,
                         const DesignLoopOptions& opts);

// As run_boed, but X' is refreshed from the intermediate posterior
// p(theta | y_obs, GP(D)) every refresh_every selections.
DesignRunResult run_gboed(long budget, const PriorSpec& prior, const ForwardFn& forward_fn,
                          const Vec& y_obs, const Mat& gamma_obs, std::uint64_t seed,
                          const DesignLoopOptions& opts);

// --- Idealized (nested Monte Carlo) EIG, toy scale ---

struct IdealizedChannel {
  std::function<double(const Vec& theta, const Vec& y_obs)> loglik;
  std::function<Vec(const Vec& theta, Rng&)> sample_obs;
};

struct IdealizedModel {
  std::function<Vec(Rng&)> sample_train;  // emulator-prior outcome Y | X
  std::function<IdealizedChannel(const Vec& y_train)> channel;
};

struct IdealizedEigResult {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Nested Monte Carlo for the idealized design criterion: the outer loop draws
// a training outcome and a prior-predictive observation, the inner loop
// estimates the posterior-vs-prior KL by self-normalized importance sampling
// from the prior. Inner ESS below 10 raises UnreliableEstimateError.
IdealizedEigResult estimate_idealized_eig(const IdealizedModel& model,
                                          const std::function<Vec(Rng&)>& prior_sample,
                                          int n_outer, int n_inner, std::uint64_t seed);

// GP-backed idealized model with a scalar output channel (d <= 2, m <= 5).
IdealizedModel make_gp_idealized(const Mat& X, const GPHyperparams& hp, double obs_var);

}  // namespace calib96
