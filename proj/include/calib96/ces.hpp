#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calib96/eks.hpp"
#include "calib96/gp.hpp"
#include "calib96/mcmc.hpp"

namespace calib96 {

struct CESConfig {
  Eigen::Index n_ens = 100;
  int n_iter = 54;
  std::vector<int> schedule;  // 1-based EKS iterations kept for GP fitting
  double bbox_inflate = 0.10; // GP input domain: thinned-sample bbox inflation
  FitOptions fit;
  HyperPrior hyperprior;
  STMCMCConfig mcmc;
  EKSOptions eks;
  Eigen::Index max_gp_rows = 0;  // 0 = no cap; otherwise deterministic subsample

  // The paper's thinning for long runs: {1, 6, 12, 18, ..., n_iter}.
  static std::vector<int> sparse_schedule(int n_iter);
  static std::vector<int> full_schedule(int n_iter);
  void validate() const;
};

struct CESRunResult {
  PosteriorSamples posterior;
  EKSRun calibrate;
  Dataset emulation_data;
  MultiGP emulator;
  long forward_evaluations = 0;
  std::uint64_t eks_seed = 0, fit_seed = 0, mcmc_seed = 0;
  std::vector<std::string> notes;
};

// Calibrate (EKS) -> Emulate (thin + fit) -> Sample (ST-MCMC on the
// emulator-based likelihood).
CESRunResult run_ces(const CESConfig& cfg, const PriorSpec& prior, const ForwardFn& forward_fn,
                     const Vec& y_obs, const Mat& gamma_obs, std::uint64_t seed);

}  // namespace calib96
