#include "calib96/eks.hpp"

#include <cmath>

#include "calib96/errors.hpp"
#include "calib96/rng.hpp"

namespace calib96 {

Ensemble eks_step(const Ensemble& ens, const Vec& y_obs, const Mat& gamma_obs,
                  const Vec& prior_mean, const Mat& prior_cov, const Mat& noise,
                  const EKSOptions& opts) {
  if (!ens.has_outputs())
    throw ConfigError("eks_step: ensemble has no forward outputs");
  const Eigen::Index n = ens.particles.rows();
  const Eigen::Index d = ens.particles.cols();
  if (n < 2) throw ConfigError("eks_step: need at least two particles");
  if (noise.rows() != n || noise.cols() != d)
    throw ConfigError("eks_step: noise shape mismatch");

  Vec g_mean = ens.outputs.colwise().mean();
  Vec t_mean = ens.particles.colwise().mean();
  Mat e = ens.outputs.rowwise() - g_mean.transpose();       // n x p
  Mat r = ens.outputs.rowwise() - y_obs.transpose();        // n x p
  Mat a = ens.particles.rowwise() - t_mean.transpose();     // n x d

  Eigen::LLT<Mat> obs_llt(gamma_obs);
  Mat gi_e;
  if (obs_llt.info() == Eigen::Success) {
    gi_e = obs_llt.solve(e.transpose());  // p x n
  } else {
    Mat reg = gamma_obs;
    reg.diagonal().array() += 1e-12 * std::max(1.0, gamma_obs.trace());
    gi_e = Eigen::LLT<Mat>(reg).solve(e.transpose());
  }
  // misfit(j,k) = (1/n) <G(theta_k) - Gbar, Gamma^{-1} (G(theta_j) - y)>
  Mat misfit = (r * gi_e) / static_cast<double>(n);  // n x n
  const double dt = opts.dt0 / (misfit.norm() + opts.eps);

  Mat c_ens = a.transpose() * a / static_cast<double>(n);  // d x d

  Mat drift_data = misfit * a;  // n x d
  Mat prior_dev = ens.particles.rowwise() - prior_mean.transpose();
  Mat drift_prior = prior_dev * Eigen::LLT<Mat>(prior_cov).solve(c_ens);

  Mat c_sqrt = symmetric_sqrt(c_ens);
  Ensemble out;
  out.iteration = ens.iteration + 1;
  out.particles = ens.particles - dt * (drift_data + drift_prior) +
                  std::sqrt(2.0 * dt) * (noise * c_sqrt);

  if (opts.bounds) {
    const PriorSpec& b = *opts.bounds;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        double x = out.particles(i, j);
        const double lo = b.lo[j], hi = b.hi[j], w = hi - lo;
        // Fold reflections until inside; clamp against pathological excursions.
        for (int it = 0; it < 64 && (x < lo || x > hi); ++it) {
          if (x < lo) x = lo + (lo - x);
          if (x > hi) x = hi - (x - hi);
        }
        out.particles(i, j) = std::clamp(x, lo + 1e-12 * w, hi - 1e-12 * w);
      }
    }
  }
  return out;
}

namespace {

Vec evaluate_with_resample(const ForwardFn& forward_fn, Vec theta, const Mat& particles,
                           Rng& rng, const PriorSpec& prior, long& eval_counter,
                           int& blowups) {
  for (int attempt = 0; attempt < 6; ++attempt) {
    try {
      ++eval_counter;
      return forward_fn(theta);
    } catch (const BlowupError&) {
      ++blowups;
      Vec mean = particles.colwise().mean();
      Vec w = prior.width();
      for (Eigen::Index j = 0; j < theta.size(); ++j)
        theta[j] = std::clamp(mean[j] + 0.01 * w[j] * rng.normal(), prior.lo[j], prior.hi[j]);
    }
  }
  throw NumericalError("run_eks: persistent forward blowups near ensemble mean");
}

}  // namespace

EKSRun run_eks(const PriorSpec& prior, Eigen::Index n_ens, int n_iter,
               const ForwardFn& forward_fn, const Vec& y_obs, const Mat& gamma_obs,
               std::uint64_t seed, const EKSOptions& opts) {
  prior.validate();
  if (n_ens < 2) throw ConfigError("run_eks: n_ens must be >= 2");
  if (n_iter < 1) throw ConfigError("run_eks: n_iter must be >= 1");
  Rng rng(seed);
  const Eigen::Index d = prior.dim();

  EKSOptions step_opts = opts;
  if (!step_opts.bounds) step_opts.bounds = prior;
  Vec prior_mean = prior.moment_mean();
  Mat prior_cov = prior.moment_cov();

  EKSRun run;
  Ensemble ens;
  ens.iteration = 0;
  ens.particles = rng.uniform_box(n_ens, prior.lo, prior.hi);

  for (int it = 0; it < n_iter; ++it) {
    ens.outputs.resize(0, 0);
    for (Eigen::Index i = 0; i < n_ens; ++i) {
      Vec out = evaluate_with_resample(forward_fn, ens.particles.row(i).transpose(),
                                       ens.particles, rng, prior,
                                       run.forward_evaluations, run.blowup_resamples);
      if (ens.outputs.size() == 0) ens.outputs.resize(n_ens, out.size());
      ens.outputs.row(i) = out.transpose();
    }
    run.history.push_back(ens);
    Mat noise = rng.normal_matrix(n_ens, d);
    ens = eks_step(run.history.back(), y_obs, gamma_obs, prior_mean, prior_cov,
                   noise, step_opts);
  }
  run.history.push_back(ens);
  return run;
}

Dataset thin_for_emulation(const std::vector<Ensemble>& history,
                           const std::vector<int>& schedule) {
  if (schedule.empty()) throw ConfigError("thin_for_emulation: empty schedule");
  std::vector<const Ensemble*> picked;
  for (int s : schedule) {
    if (s < 1 || static_cast<std::size_t>(s) > history.size())
      throw ConfigError("thin_for_emulation: schedule index out of range");
    const Ensemble& e = history[static_cast<std::size_t>(s - 1)];
    if (!e.has_outputs())
      throw ConfigError("thin_for_emulation: scheduled iteration has no outputs");
    picked.push_back(&e);
  }
  Eigen::Index rows = 0;
  for (const Ensemble* e : picked) rows += e->particles.rows();
  Mat X(rows, picked.front()->particles.cols());
  Mat Y(rows, picked.front()->outputs.cols());
  Eigen::Index at = 0;
  for (const Ensemble* e : picked) {
    X.middleRows(at, e->particles.rows()) = e->particles;
    Y.middleRows(at, e->particles.rows()) = e->outputs;
    at += e->particles.rows();
  }
  return Dataset::merged(X, Y);
}

}  // namespace calib96
