#include "calib96/ces.hpp"

#include <algorithm>

#include "calib96/errors.hpp"

namespace calib96 {

std::vector<int> CESConfig::sparse_schedule(int n_iter) {
  std::vector<int> s{1};
  for (int i = 6; i <= n_iter; i += 6) s.push_back(i);
  return s;
}

std::vector<int> CESConfig::full_schedule(int n_iter) {
  std::vector<int> s(static_cast<std::size_t>(n_iter));
  for (int i = 0; i < n_iter; ++i) s[static_cast<std::size_t>(i)] = i + 1;
  return s;
}

void CESConfig::validate() const {
  if (n_ens < 2) throw ConfigError("CESConfig: n_ens must be >= 2");
  if (n_iter < 1) throw ConfigError("CESConfig: n_iter must be >= 1");
  if (schedule.empty()) throw ConfigError("CESConfig: empty thinning schedule");
  for (int s : schedule)
    if (s < 1 || s > n_iter)
      throw ConfigError("CESConfig: schedule index outside [1, n_iter]");
  if (bbox_inflate < 0.0) throw ConfigError("CESConfig: bbox_inflate must be >= 0");
}

CESRunResult run_ces(const CESConfig& cfg, const PriorSpec& prior, const ForwardFn& forward_fn,
                     const Vec& y_obs, const Mat& gamma_obs, std::uint64_t seed) {
  cfg.validate();
  prior.validate();
  SeedStream seeds(seed);

  CESRunResult result;
  result.eks_seed = seeds.derive("ces-eks");
  result.fit_seed = seeds.derive("ces-fit");
  result.mcmc_seed = seeds.derive("ces-mcmc");

  result.calibrate = run_eks(prior, cfg.n_ens, cfg.n_iter, forward_fn, y_obs, gamma_obs,
                             result.eks_seed, cfg.eks);
  result.forward_evaluations = result.calibrate.forward_evaluations;

  Dataset data = thin_for_emulation(result.calibrate.history, cfg.schedule);
  if (cfg.max_gp_rows > 0 && data.size() > cfg.max_gp_rows) {
    // Deterministic stride subsample to keep the fit tractable at desk scale.
    const Eigen::Index stride = (data.size() + cfg.max_gp_rows - 1) / cfg.max_gp_rows;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < data.size(); i += stride) keep.push_back(i);
    Mat X(static_cast<Eigen::Index>(keep.size()), data.X.cols());
    Mat Y(static_cast<Eigen::Index>(keep.size()), data.Y.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = data.X.row(keep[i]);
      Y.row(static_cast<Eigen::Index>(i)) = data.Y.row(keep[i]);
    }
    data = Dataset::merged(X, Y);
    result.notes.push_back("gp training rows capped at " + std::to_string(data.size()));
  }
  result.emulation_data = data;

  // EKS concentrates its samples; standardizing by the prior box would waste
  // kernel resolution, so the GP domain is the inflated sample bounding box.
  InputDomain domain;
  domain.lo = data.X.colwise().minCoeff();
  domain.hi = data.X.colwise().maxCoeff();
  Vec span = domain.hi - domain.lo;
  for (Eigen::Index j = 0; j < span.size(); ++j) {
    double pad = 0.5 * cfg.bbox_inflate * span[j];
    if (span[j] <= 0.0) pad = std::max(1e-8, 1e-3 * std::abs(domain.lo[j]));
    domain.lo[j] -= pad;
    domain.hi[j] += pad;
  }

  FitOptions fit = cfg.fit;
  fit.seed = result.fit_seed;
  result.emulator = fit_multi(data, domain, cfg.hyperprior, fit);

  LogDensityFn loglik = [&](const Mat& t) {
    return calib_log_likelihood_batch(t, y_obs, result.emulator, gamma_obs);
  };
  result.posterior = stmcmc_sample(loglik, prior, result.mcmc_seed, cfg.mcmc);
  result.posterior.method = "ces";
  result.posterior.total_evaluations = result.forward_evaluations;
  result.posterior.seed = seed;
  return result;
}

}  // namespace calib96
