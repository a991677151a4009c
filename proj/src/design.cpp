#include "calib96/design.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "calib96/errors.hpp"
#include "calib96/qmc.hpp"

namespace calib96 {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double eig_closed(const Mat& X, const Mat& xprime, const GPHyperparams& hp,
                  const EigOptions& opts) {
  if (X.cols() != xprime.cols()) throw ConfigError("eig_closed: dimension mismatch");
  Mat k_train = build_covariance(X, hp);
  CholResult l_train = cholesky_with_jitter(k_train, hp.tau2);

  Mat k_prime = kernel_cross(xprime, xprime, hp);
  if (opts.nugget_on_xprime)
    k_prime.diagonal().array() += hp.tau2 * hp.g;
  k_prime.diagonal().array() += opts.xprime_jitter * hp.tau2;
  CholResult l_prime = cholesky_with_jitter(k_prime, hp.tau2);

  Mat cross = kernel_cross(X, xprime, hp);  // m x n'
  Mat v = l_train.L.triangularView<Eigen::Lower>().solve(cross);
  Mat sigma = k_prime - v.transpose() * v;
  sigma = 0.5 * (sigma + sigma.transpose());
  CholResult l_sigma = cholesky_with_jitter(sigma, hp.tau2);

  double eig = 0.5 * (logdet_from_factor(l_prime.L) - logdet_from_factor(l_sigma.L));
  if (eig < 0.0 && eig > -1e-6) eig = 0.0;
  return eig;
}

EigEngine::EigEngine(const MultiGP& gp, const Mat& xprime_raw, const EigOptions& opts) {
  if (gp.models.empty()) throw ConfigError("EigEngine: empty emulator");
  domain_ = gp.models.front().domain();
  Mat xp_std = domain_.standardize(xprime_raw);
  for (const GPModel& m : gp.models) {
    PerOutput po;
    po.hp = m.hyperparams();
    po.x_std = m.x_std();
    po.l_train = m.factor();
    po.xp_std = xp_std;
    Mat k_prime = kernel_cross(xp_std, xp_std, po.hp);
    if (opts.nugget_on_xprime) k_prime.diagonal().array() += po.hp.tau2 * po.hp.g;
    k_prime.diagonal().array() += opts.xprime_jitter * po.hp.tau2;
    CholResult l_prime = cholesky_with_jitter(k_prime, po.hp.tau2);
    Mat cross = kernel_cross(po.x_std, xp_std, po.hp);  // m x n'
    po.v = po.l_train.triangularView<Eigen::Lower>().solve(cross);
    Mat sigma = k_prime - po.v.transpose() * po.v;
    sigma = 0.5 * (sigma + sigma.transpose());
    po.l_sigma = cholesky_with_jitter(sigma, po.hp.tau2).L;
    po.eig0 = 0.5 * (logdet_from_factor(l_prime.L) - logdet_from_factor(po.l_sigma));
    base_ += po.eig0;
    outputs_.push_back(std::move(po));
  }
}

bool EigEngine::candidate_eig(const Vec& x_raw, double& eig_out) const {
  Mat x_std = domain_.standardize(x_raw.transpose());
  double total = 0.0;
  for (const PerOutput& po : outputs_) {
    Vec k_x = kernel_cross(po.x_std, x_std, po.hp).col(0);     // m
    Vec k_xp = kernel_cross(po.xp_std, x_std, po.hp).col(0);   // n'
    Vec w = po.l_train.triangularView<Eigen::Lower>().solve(k_x);
    const double v_x = po.hp.tau2 * (1.0 + po.hp.g) - w.squaredNorm();
    if (!(v_x > 1e-12 * po.hp.tau2)) return false;
    Vec c_x = k_xp - po.v.transpose() * w;
    Vec s = po.l_sigma.triangularView<Eigen::Lower>().solve(c_x);
    const double u = s.squaredNorm() / v_x;
    if (!(u < 1.0 - 1e-12)) return false;
    total += po.eig0 - 0.5 * std::log1p(-u);
  }
  eig_out = total;
  return true;
}

double EigEngine::design_distance(const Vec& x_raw) const {
  Mat x_std = domain_.standardize(x_raw.transpose());
  const Mat& xs = outputs_.front().x_std;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    best = std::min(best, (xs.row(i) - x_std.row(0)).norm());
  return best;
}

Selection select_next(const DesignState& state, const PriorSpec& bounds,
                      const SelectOptions& opts, const EigOptions& eig_opts) {
  bounds.validate();
  if (state.xprime.rows() == 0) throw ConfigError("select_next: empty test-point set");
  EigEngine engine(state.gp, state.xprime, eig_opts);
  const Eigen::Index d = bounds.dim();

  Mat sweep = sobol_box(opts.sweep, bounds.lo, bounds.hi, opts.seed);
  struct Scored {
    Vec x;
    double eig;
    int order;
  };
  std::vector<Scored> valid;
  for (int i = 0; i < opts.sweep; ++i) {
    Vec x = sweep.row(i).transpose();
    if (engine.design_distance(x) < opts.min_scaled_dist) continue;
    double e;
    if (engine.candidate_eig(x, e)) valid.push_back({x, e, i});
  }
  if (valid.empty())
    throw DesignSaturationError("select_next: every sweep candidate is inadmissible");

  std::stable_sort(valid.begin(), valid.end(), [](const Scored& a, const Scored& b) {
    if (a.eig != b.eig) return a.eig > b.eig;
    return a.order < b.order;
  });
  const int n_polish = std::min<int>(opts.polish_top, static_cast<int>(valid.size()));

  Scored best = valid.front();
  for (int t = 0; t < n_polish; ++t) {
    Scored cur = valid[static_cast<std::size_t>(t)];
    Vec step = bounds.width() / 16.0;
    for (int round = 0; round < opts.polish_rounds; ++round) {
      for (Eigen::Index j = 0; j < d; ++j) {
        for (double sgn : {+1.0, -1.0}) {
          Vec cand = cur.x;
          cand[j] = std::clamp(cand[j] + sgn * step[j], bounds.lo[j], bounds.hi[j]);
          if (engine.design_distance(cand) < opts.min_scaled_dist) continue;
          double e;
          if (engine.candidate_eig(cand, e) && e > cur.eig) {
            cur.x = cand;
            cur.eig = e;
          }
        }
      }
      step *= 0.5;
    }
    if (cur.eig > best.eig || (cur.eig == best.eig && cur.order < best.order)) best = cur;
  }
  return {best.x, best.eig};
}

namespace {

Mat make_xprime(const std::string& mode, Eigen::Index n_prime, const PriorSpec& prior,
                std::uint64_t seed) {
  if (mode == "grid") {
    if (prior.dim() != 1)
      throw ConfigError("xprime grid mode is one-dimensional only");
    Mat g(n_prime, 1);
    for (Eigen::Index i = 0; i < n_prime; ++i)
      g(i, 0) = prior.lo[0] + (prior.hi[0] - prior.lo[0]) *
                                  (static_cast<double>(i) + 0.5) / static_cast<double>(n_prime);
    return g;
  }
  if (mode != "sobol") throw ConfigError("unknown xprime mode: " + mode);
  return sobol_box(n_prime, prior.lo, prior.hi, seed);
}

struct EvalOutcome {
  Vec y;
  bool blew_up = false;
};

EvalOutcome evaluate_point(const ForwardFn& forward_fn, const Vec& x, long& counter) {
  ++counter;
  try {
    return {forward_fn(x), false};
  } catch (const BlowupError&) {
    return {Vec(), true};
  }
}

DesignRunResult run_design_loop(bool goal_oriented, long budget, const PriorSpec& prior,
                                const ForwardFn& forward_fn, const Vec& y_obs,
                                const Mat& gamma_obs, std::uint64_t seed,
                                const DesignLoopOptions& opts) {
  prior.validate();
  if (budget <= static_cast<long>(opts.n0))
    throw ConfigError("design loop: budget must exceed the initialization size");
  SeedStream seeds(seed);
  const Eigen::Index d = prior.dim();
  const auto t_start = std::chrono::steady_clock::now();

  DesignRunResult result;
  InputDomain domain{prior.lo, prior.hi};

  // Space-filling initialization.
  Mat x_init = sobol_box(opts.n0, prior.lo, prior.hi, seeds.derive("design-init"));
  std::vector<Vec> xs, ys;
  for (Eigen::Index i = 0; i < opts.n0; ++i) {
    EvalOutcome out =
        evaluate_point(forward_fn, x_init.row(i).transpose(), result.forward_evaluations);
    if (out.blew_up) {
      ++result.blowups;
      result.notes.push_back("blowup at initialization point " + std::to_string(i));
      continue;
    }
    xs.push_back(x_init.row(i).transpose());
    ys.push_back(out.y);
  }
  if (xs.size() < 2)
    throw NumericalError("design loop: initialization produced fewer than two usable points");

  auto assemble = [&]() {
    Mat X(static_cast<Eigen::Index>(xs.size()), d);
    Mat Y(static_cast<Eigen::Index>(ys.size()), ys.front().size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
      Y.row(static_cast<Eigen::Index>(i)) = ys[i].transpose();
    }
    return Dataset::merged(X, Y);
  };

  DesignState state;
  state.data = assemble();
  FitOptions fit = opts.fit;
  fit.seed = seeds.derive("design-fit", 0);
  state.gp = fit_multi(state.data, domain, opts.hyperprior, fit);
  state.evaluations = result.forward_evaluations;

  state.xprime = make_xprime(opts.xprime_mode, opts.n_prime, prior, seeds.derive("xprime"));
  state.xprime_provenance = "space-filling";

  const long n_rounds = budget - static_cast<long>(opts.n0);
  result.design_log.resize(n_rounds, d + 4);
  int since_refit = 0;
  long fit_epoch = 1;

  for (long round = 1; round <= n_rounds; ++round) {
    if (goal_oriented && (round - 1) % std::max(1, opts.refresh_every) == 0) {
      try {
        STMCMCConfig inner = opts.mcmc;
        inner.n = opts.inner_mcmc_n;
        LogDensityFn loglik = [&](const Mat& t) {
          return calib_log_likelihood_batch(t, y_obs, state.gp, gamma_obs);
        };
        PosteriorSamples inter =
            stmcmc_sample(loglik, prior, seeds.derive("gboed-inner", static_cast<std::uint64_t>(round)));
        // Evenly strided subsample of the population.
        Mat xp(opts.n_prime, d);
        const Eigen::Index stride = std::max<Eigen::Index>(1, inter.draws.rows() / opts.n_prime);
        for (Eigen::Index i = 0; i < opts.n_prime; ++i)
          xp.row(i) = inter.draws.row(std::min(inter.draws.rows() - 1, i * stride));
        state.xprime = xp;
        state.xprime_provenance = "posterior-drawn";
      } catch (const DegenerateTargetError&) {
        state.xprime = make_xprime("sobol", opts.n_prime, prior,
                                   seeds.derive("gboed-fallback", static_cast<std::uint64_t>(round)));
        state.xprime_provenance = "space-filling";
        result.notes.push_back("gboed: degenerate intermediate posterior at round " +
                               std::to_string(round) + "; prior-drawn test points used");
      }
    }

    SelectOptions sel = opts.select;
    sel.seed = seeds.derive("design-sweep", static_cast<std::uint64_t>(round));
    Selection pick = select_next(state, prior, sel, opts.eig);

    EvalOutcome out = evaluate_point(forward_fn, pick.x, result.forward_evaluations);
    state.evaluations = result.forward_evaluations;
    if (out.blew_up) {
      ++result.blowups;
      result.notes.push_back("blowup at selected point, round " + std::to_string(round) +
                             " (excluded from training)");
    } else {
      xs.push_back(pick.x);
      ys.push_back(out.y);
      state.gp.append_point(pick.x, out.y);
      ++since_refit;
    }

    if (since_refit >= opts.refit_every && round < n_rounds) {
      state.data = assemble();
      fit.seed = seeds.derive("design-fit", static_cast<std::uint64_t>(fit_epoch++));
      state.gp = fit_multi(state.data, domain, opts.hyperprior, fit);
      since_refit = 0;
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.design_log(round - 1, 0) = static_cast<double>(round);
    result.design_log.row(round - 1).segment(1, d) = pick.x.transpose();
    result.design_log(round - 1, d + 1) = pick.eig;
    result.design_log(round - 1, d + 2) = static_cast<double>(result.forward_evaluations);
    result.design_log(round - 1, d + 3) = elapsed;
  }

  // Bring hyperparameters current before the final calibration.
  state.data = assemble();
  if (since_refit > 0) {
    fit.seed = seeds.derive("design-fit", static_cast<std::uint64_t>(fit_epoch++));
    state.gp = fit_multi(state.data, domain, opts.hyperprior, fit);
  }

  LogDensityFn loglik = [&](const Mat& t) {
    return calib_log_likelihood_batch(t, y_obs, state.gp, gamma_obs);
  };
  result.posterior = stmcmc_sample(loglik, prior, seeds.derive("design-mcmc"), opts.mcmc);
  result.posterior.method = goal_oriented ? "gboed" : "boed";
  result.posterior.total_evaluations = result.forward_evaluations;
  result.posterior.seed = seed;
  result.state = std::move(state);
  return result;
}

}  // namespace

DesignRunResult run_boed(long budget, const PriorSpec& prior, const ForwardFn& forward_fn,
                         const Vec& y_obs, const Mat& gamma_obs, std::uint64_t seed,
                         const DesignLoopOptions& opts) {
  return run_design_loop(false, budget, prior, forward_fn, y_obs, gamma_obs, seed, opts);
}

DesignRunResult run_gboed(long budget, const PriorSpec& prior, const ForwardFn& forward_fn,
                          const Vec& y_obs, const Mat& gamma_obs, std::uint64_t seed,
                          const DesignLoopOptions& opts) {
  return run_design_loop(true, budget, prior, forward_fn, y_obs, gamma_obs, seed, opts);
}

IdealizedEigResult estimate_idealized_eig(const IdealizedModel& model,
                                          const std::function<Vec(Rng&)>& prior_sample,
                                          int n_outer, int n_inner, std::uint64_t seed) {
  if (n_outer < 2 || n_inner < 2)
    throw ConfigError("estimate_idealized_eig: need n_outer, n_inner >= 2");
  Rng rng(seed);
  Vec kl(n_outer);
  Vec ll(n_inner);
  for (int t = 0; t < n_outer; ++t) {
    Vec y_train = model.sample_train(rng);
    IdealizedChannel ch = model.channel(y_train);
    Vec theta_star = prior_sample(rng);
    Vec y_obs = ch.sample_obs(theta_star, rng);

    double mx = kNegInf;
    std::vector<Vec> thetas(static_cast<std::size_t>(n_inner));
    for (int i = 0; i < n_inner; ++i) {
      thetas[static_cast<std::size_t>(i)] = prior_sample(rng);
      ll[i] = ch.loglik(thetas[static_cast<std::size_t>(i)], y_obs);
      mx = std::max(mx, ll[i]);
    }
    if (!std::isfinite(mx))
      throw UnreliableEstimateError("idealized EIG: all inner likelihoods vanished");
    double sw = 0.0, sw2 = 0.0, swl = 0.0;
    for (int i = 0; i < n_inner; ++i) {
      const double w = std::exp(ll[i] - mx);
      sw += w;
      sw2 += w * w;
      swl += w * ll[i];
    }
    const double ess = sw * sw / sw2;
    if (ess < 10.0)
      throw UnreliableEstimateError("idealized EIG: inner importance ESS below 10");
    const double log_evidence = mx + std::log(sw / static_cast<double>(n_inner));
    kl[t] = swl / sw - log_evidence;
  }
  IdealizedEigResult out;
  out.estimate = kl.mean();
  const double var = (kl.array() - out.estimate).square().sum() /
                     static_cast<double>((n_outer - 1)) / static_cast<double>(n_outer);
  out.std_error = std::sqrt(var);
  return out;
}

IdealizedModel make_gp_idealized(const Mat& X, const GPHyperparams& hp, double obs_var) {
  if (X.cols() > 2 || X.rows() > 5)
    throw ConfigError("make_gp_idealized: toy scale only (d <= 2, m <= 5)");
  if (!(obs_var > 0.0)) throw ConfigError("make_gp_idealized: obs_var must be positive");
  Mat k_train = build_covariance(X, hp);
  Mat l_train = cholesky_with_jitter(k_train, hp.tau2).L;

  IdealizedModel model;
  model.sample_train = [X, l_train](Rng& rng) -> Vec {
    return l_train * rng.normal_vector(l_train.rows());
  };
  model.channel = [X, hp, l_train, obs_var](const Vec& y_train) -> IdealizedChannel {
    // alpha_full = K^{-1} y_train via two triangular solves.
    Vec alpha_full = l_train.triangularView<Eigen::Lower>().solve(y_train);
    l_train.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_full);
    IdealizedChannel ch;
    auto moments = [X, hp, l_train, alpha_full](const Vec& theta) {
      Mat k_x = kernel_cross(X, theta.transpose(), hp);  // m x 1
      const double mean = (k_x.transpose() * alpha_full)(0, 0);
      Vec w = l_train.triangularView<Eigen::Lower>().solve(k_x.col(0));
      const double var =
          std::max(1e-12 * hp.tau2, hp.tau2 * (1.0 + hp.g) - w.squaredNorm());
      return std::pair<double, double>(mean, var);
    };
    ch.loglik = [moments, obs_var](const Vec& theta, const Vec& y_obs) -> double {
      auto [mean, var] = moments(theta);
      const double s2 = var + obs_var;
      const double r = y_obs[0] - mean;
      return -0.5 * (std::log(2.0 * M_PI * s2) + r * r / s2);
    };
    ch.sample_obs = [moments, obs_var](const Vec& theta, Rng& rng) -> Vec {
      auto [mean, var] = moments(theta);
      Vec y(1);
      y[0] = mean + std::sqrt(var + obs_var) * rng.normal();
      return y;
    };
    return ch;
  };
  return model;
}

}  // namespace calib96
