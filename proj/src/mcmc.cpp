#include "calib96/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "calib96/errors.hpp"
#include "calib96/rng.hpp"

namespace calib96 {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void PriorSpec::validate() const {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw ConfigError("PriorSpec: bad bound sizes");
  if (((hi - lo).array() <= 0.0).any())
    throw ConfigError("PriorSpec: lower bound must be below upper bound");
}

bool PriorSpec::contains(const Vec& x) const {
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

Mat PriorSpec::moment_cov() const {
  Vec w = width();
  return (w.array().square() / 12.0).matrix().asDiagonal();
}

PriorSpec PriorSpec::lorenz_default() {
  PriorSpec p;
  p.lo.resize(4);
  p.hi.resize(4);
  p.lo << 0.3, 3.0, 0.6908, 3.0;
  p.hi << 7.0, 17.0, 3.9144, 17.0;
  return p;
}

double calib_log_likelihood(const Vec& theta, const Vec& y_obs, const MultiGP& emulator,
                            const Mat& gamma_obs) {
  Mat thetas = theta.transpose();
  return calib_log_likelihood_batch(thetas, y_obs, emulator, gamma_obs)[0];
}

Vec calib_log_likelihood_batch(const Mat& thetas, const Vec& y_obs,
                               const MultiGP& emulator, const Mat& gamma_obs) {
  const Eigen::Index p = emulator.output_dim();
  if (y_obs.size() != p) throw ConfigError("calib_log_likelihood: y_obs dim mismatch");
  if (gamma_obs.rows() != p || gamma_obs.cols() != p)
    throw ConfigError("calib_log_likelihood: gamma_obs dim mismatch");
  Mat mean, var;
  emulator.predict_mean_var(thetas, mean, var);
  const double log2pi = std::log(2.0 * M_PI);
  Vec out(thetas.rows());
  Eigen::LLT<Mat> llt(p);
  Mat cov(p, p);
  Vec r(p);
  for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
    cov = gamma_obs;
    cov.diagonal() += var.row(i).transpose();
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw IllConditionedError("calib_log_likelihood: combined covariance not PD");
    r = y_obs - mean.row(i).transpose();
    llt.matrixL().solveInPlace(r);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    out[i] = -0.5 * (r.squaredNorm() + logdet + p * log2pi);
  }
  return out;
}

namespace {

double ess_of_increment(const Vec& loglik, double dbeta) {
  const double mx = loglik.maxCoeff();
  double sw = 0.0, sw2 = 0.0;
  for (Eigen::Index i = 0; i < loglik.size(); ++i) {
    const double w = std::isfinite(loglik[i]) ? std::exp(dbeta * (loglik[i] - mx)) : 0.0;
    sw += w;
    sw2 += w * w;
  }
  if (sw2 <= 0.0) return 0.0;
  return sw * sw / sw2;
}

// log( (1/n) sum exp(dbeta * l_i) ), the per-stage evidence increment.
double log_mean_weight(const Vec& loglik, double dbeta) {
  const double mx = loglik.maxCoeff();
  double sw = 0.0;
  for (Eigen::Index i = 0; i < loglik.size(); ++i)
    if (std::isfinite(loglik[i])) sw += std::exp(dbeta * (loglik[i] - mx));
  return dbeta * mx + std::log(sw / static_cast<double>(loglik.size()));
}

std::vector<Eigen::Index> systematic_resample(const Vec& loglik, double dbeta, Rng& rng) {
  const Eigen::Index n = loglik.size();
  const double mx = loglik.maxCoeff();
  Vec w(n);
  for (Eigen::Index i = 0; i < n; ++i)
    w[i] = std::isfinite(loglik[i]) ? std::exp(dbeta * (loglik[i] - mx)) : 0.0;
  const double total = w.sum();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  const double u0 = rng.u01();
  double cum = 0.0;
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double target = (static_cast<double>(i) + u0) / static_cast<double>(n) * total;
    while (cum + w[j] < target && j < n - 1) {
      cum += w[j];
      ++j;
    }
    idx[static_cast<std::size_t>(i)] = j;
  }
  return idx;
}

}  // namespace

PosteriorSamples stmcmc_sample(const LogDensityFn& log_likelihood, const PriorSpec& prior,
                               std::uint64_t seed, const STMCMCConfig& cfg) {
  prior.validate();
  const Eigen::Index d = prior.dim();
  const Eigen::Index n = cfg.n;
  Rng rng(seed);

  Mat particles = rng.uniform_box(n, prior.lo, prior.hi);
  Vec loglik = log_likelihood(particles);
  if (!(loglik.array() > kNegInf).any())
    throw DegenerateTargetError("stmcmc: log-likelihood is -inf for every initial draw");

  double beta = 0.0;
  double log_evidence = 0.0;
  int stage = 0;
  double scale = cfg.initial_scale_mult * 2.38 * 2.38 / static_cast<double>(d);
  const double target_ess = cfg.ess_fraction * static_cast<double>(n);

  while (beta < 1.0) {
    ++stage;
    double dbeta = 1.0 - beta;
    if (stage < cfg.max_stages && ess_of_increment(loglik, dbeta) < target_ess) {
      double lo = 0.0, hi = dbeta;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ess_of_increment(loglik, mid) >= target_ess)
          lo = mid;
        else
          hi = mid;
      }
      dbeta = std::max(lo, 1e-8 * (1.0 - beta));
    }
    log_evidence += log_mean_weight(loglik, dbeta);
    const double beta_new = std::min(1.0, beta + dbeta);

    std::vector<Eigen::Index> idx = systematic_resample(loglik, dbeta, rng);
    Mat resampled(n, d);
    Vec ll_new(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      resampled.row(i) = particles.row(idx[static_cast<std::size_t>(i)]);
      ll_new[i] = loglik[idx[static_cast<std::size_t>(i)]];
    }
    particles = std::move(resampled);
    loglik = std::move(ll_new);

    // Proposal covariance from the current population, ridge-stabilized.
    Vec mean = particles.colwise().mean();
    Mat centered = particles.rowwise() - mean.transpose();
    Mat pop_cov = centered.transpose() * centered / static_cast<double>(n - 1);
    pop_cov.diagonal().array() += 1e-12 + 1e-10 * pop_cov.trace() / static_cast<double>(d);
    Mat prop_L = cholesky_with_jitter(pop_cov, std::max(pop_cov.trace(), 1e-300)).L;

    for (int sweep = 0; sweep < cfg.mh_steps; ++sweep) {
      Mat noise = rng.normal_matrix(n, d);
      Mat proposals = particles + std::sqrt(scale) * (noise * prop_L.transpose());
      // Hard prior support: out-of-box proposals are rejected outright.
      std::vector<Eigen::Index> inbox;
      inbox.reserve(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i)
        if (prior.contains(proposals.row(i).transpose())) inbox.push_back(i);
      Vec ll_prop = Vec::Constant(n, kNegInf);
      if (!inbox.empty()) {
        Mat sub(static_cast<Eigen::Index>(inbox.size()), d);
        for (std::size_t k = 0; k < inbox.size(); ++k)
          sub.row(static_cast<Eigen::Index>(k)) = proposals.row(inbox[k]);
        Vec ll_sub = log_likelihood(sub);
        for (std::size_t k = 0; k < inbox.size(); ++k)
          ll_prop[inbox[k]] = ll_sub[static_cast<Eigen::Index>(k)];
      }
      Eigen::Index accepted = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double log_ratio = beta_new * (ll_prop[i] - loglik[i]);
        if (std::log(rng.u01() + 1e-300) < log_ratio) {
          particles.row(i) = proposals.row(i);
          loglik[i] = ll_prop[i];
          ++accepted;
        }
      }
      const double rate = static_cast<double>(accepted) / static_cast<double>(n);
      if (rate < cfg.accept_lo)
        scale *= 0.67;
      else if (rate > cfg.accept_hi)
        scale *= 1.5;
      scale = std::clamp(scale, 1e-6, 1e3);
    }

    beta = beta_new;
    if (stage >= cfg.max_stages) break;
  }

  PosteriorSamples out;
  out.draws = std::move(particles);
  out.seed = seed;
  out.log_evidence = log_evidence;
  out.stages = stage;
  return out;
}

}  // namespace calib96
