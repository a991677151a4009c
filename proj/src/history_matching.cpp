#include "calib96/history_matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "calib96/errors.hpp"
#include "calib96/qmc.hpp"
#include "calib96/rng.hpp"

namespace calib96 {

NROYSpace NROYSpace::uniform(Eigen::Index n_cand, const PriorSpec& prior,
                             std::uint64_t seed) {
  prior.validate();
  if (n_cand < 1) throw ConfigError("NROYSpace: empty pool");
  Rng rng(seed);
  NROYSpace s;
  s.pool = rng.uniform_box(n_cand, prior.lo, prior.hi);
  s.mask.assign(static_cast<std::size_t>(n_cand), 1);
  return s;
}

Eigen::Index NROYSpace::retained_count() const {
  return static_cast<Eigen::Index>(std::count(mask.begin(), mask.end(), char{1}));
}

double NROYSpace::retained_fraction() const {
  if (mask.empty()) return 0.0;
  return static_cast<double>(retained_count()) / static_cast<double>(mask.size());
}

Vec implausibility(const Vec& theta, const MultiGP& emulator, const Vec& y_obs,
                   const Mat& gamma_obs) {
  Mat mean, var;
  emulator.predict_mean_var(theta.transpose(), mean, var);
  Vec out(emulator.output_dim());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = std::abs(mean(0, i) - y_obs[i]) / std::sqrt(gamma_obs(i, i) + var(0, i));
  return out;
}

Vec pool_implausibility(const Mat& pool, const MultiGP& emulator, const Vec& y_obs,
                        const Mat& gamma_obs, const ImplausibilityOptions& opts) {
  const Eigen::Index n = pool.rows();
  const Eigen::Index p = emulator.output_dim();
  Vec agg(n);
  const Eigen::Index chunk = 65536;
  Mat mean, var;
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min(chunk, n - start);
    emulator.predict_mean_var(pool.middleRows(start, len), mean, var);
    for (Eigen::Index i = 0; i < len; ++i) {
      if (opts.vector_norm) {
        double num = 0.0, den = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
          const double r = mean(i, j) - y_obs[j];
          num += r * r;
          den += gamma_obs(j, j) + var(i, j);
        }
        agg[start + i] = std::sqrt(num) / std::sqrt(den);
      } else {
        double worst = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
          const double im = std::abs(mean(i, j) - y_obs[j]) /
                            std::sqrt(gamma_obs(j, j) + var(i, j));
          worst = std::max(worst, im);
        }
        agg[start + i] = worst;
      }
    }
  }
  return agg;
}

NROYSpace apply_threshold(const NROYSpace& space, const Vec& aggregated, double threshold) {
  if (aggregated.size() != space.pool.rows())
    throw ConfigError("apply_threshold: size mismatch");
  NROYSpace out = space;
  out.wave = space.wave + 1;
  for (Eigen::Index i = 0; i < space.pool.rows(); ++i)
    out.mask[static_cast<std::size_t>(i)] =
        (space.mask[static_cast<std::size_t>(i)] && aggregated[i] <= threshold) ? 1 : 0;
  if (out.retained_count() == 0)
    throw EmptyNroyError("nroy_filter: no candidates retained at threshold " +
                         std::to_string(threshold));
  return out;
}

NROYSpace nroy_filter(const NROYSpace& space, const MultiGP& emulator, const Vec& y_obs,
                      const Mat& gamma_obs, double threshold,
                      const ImplausibilityOptions& opts) {
  if (space.pool.rows() == 0) throw ConfigError("nroy_filter: empty pool");
  Vec agg = pool_implausibility(space.pool, emulator, y_obs, gamma_obs, opts);
  return apply_threshold(space, agg, threshold);
}

Mat sample_nroy(const NROYSpace& space, Eigen::Index k, std::uint64_t seed) {
  std::vector<Eigen::Index> retained;
  for (Eigen::Index i = 0; i < space.pool.rows(); ++i)
    if (space.mask[static_cast<std::size_t>(i)]) retained.push_back(i);
  if (static_cast<Eigen::Index>(retained.size()) < k)
    throw InsufficientNroyError("sample_nroy: retained count below request");
  Rng rng(seed);
  // Partial Fisher-Yates for the first k slots.
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Eigen::Index>(
                           rng.below(static_cast<std::uint64_t>(retained.size() - i)));
    std::swap(retained[static_cast<std::size_t>(i)], retained[static_cast<std::size_t>(j)]);
  }
  Mat out(k, space.pool.cols());
  for (Eigen::Index i = 0; i < k; ++i) out.row(i) = space.pool.row(retained[static_cast<std::size_t>(i)]);
  return out;
}

HMRunResult run_hm(long per_wave_budget, const PriorSpec& prior, const ForwardFn& forward_fn,
                   const Vec& y_obs, const Mat& gamma_obs, std::uint64_t seed,
                   const HMOptions& opts) {
  prior.validate();
  if (opts.waves < 1) throw ConfigError("run_hm: waves must be >= 1");
  if (per_wave_budget < 2) throw ConfigError("run_hm: per-wave budget too small");
  SeedStream seeds(seed);
  InputDomain domain{prior.lo, prior.hi};

  HMRunResult result;
  result.space = NROYSpace::uniform(opts.pool_size, prior, seeds.derive("hm-pool"));

  Mat x_all(0, prior.dim());
  Mat y_all(0, y_obs.size());
  bool stopped_early = false;

  for (int wave = 1; wave <= opts.waves; ++wave) {
    Mat x_wave;
    if (wave == 1) {
      x_wave = maximin_lhs_box(per_wave_budget, prior.lo, prior.hi,
                               seeds.derive("hm-lhs"), opts.lhs_restarts);
    } else {
      const Eigen::Index retained = result.space.retained_count();
      if (retained < per_wave_budget) {
        result.notes.push_back("wave " + std::to_string(wave) +
                               ": NROY too small to draw training points; stopping early");
        stopped_early = true;
        break;
      }
      x_wave = sample_nroy(result.space, per_wave_budget,
                           seeds.derive("hm-draw", static_cast<std::uint64_t>(wave)));
    }

    Mat y_wave(x_wave.rows(), y_obs.size());
    std::vector<Eigen::Index> ok;
    for (Eigen::Index i = 0; i < x_wave.rows(); ++i) {
      ++result.forward_evaluations;
      try {
        y_wave.row(i) = forward_fn(x_wave.row(i).transpose()).transpose();
        ok.push_back(i);
      } catch (const BlowupError&) {
        result.notes.push_back("wave " + std::to_string(wave) + ": blowup at point " +
                               std::to_string(i) + " (excluded from training)");
      }
    }
    Mat x_used(static_cast<Eigen::Index>(ok.size()), x_wave.cols());
    Mat y_used(static_cast<Eigen::Index>(ok.size()), y_wave.cols());
    for (std::size_t i = 0; i < ok.size(); ++i) {
      x_used.row(static_cast<Eigen::Index>(i)) = x_wave.row(ok[i]);
      y_used.row(static_cast<Eigen::Index>(i)) = y_wave.row(ok[i]);
    }
    if (x_used.rows() < 2) {
      result.notes.push_back("wave " + std::to_string(wave) +
                             ": not enough usable points; stopping early");
      stopped_early = true;
      break;
    }

    Dataset train;
    if (opts.cumulative_training) {
      const Eigen::Index r0 = x_all.rows();
      x_all.conservativeResize(r0 + x_used.rows(), Eigen::NoChange);
      y_all.conservativeResize(r0 + y_used.rows(), Eigen::NoChange);
      x_all.bottomRows(x_used.rows()) = x_used;
      y_all.bottomRows(y_used.rows()) = y_used;
      train = Dataset::merged(x_all, y_all);
    } else {
      train = Dataset::merged(x_used, y_used);
      x_all = x_used;
      y_all = y_used;
    }

    FitOptions fit = opts.fit;
    fit.seed = seeds.derive("hm-fit", static_cast<std::uint64_t>(wave));
    MultiGP gp = fit_multi(train, domain, opts.hyperprior, fit);
    result.emulator = gp;

    HMWaveRecord rec;
    rec.wave = wave;
    rec.training_points = train.size();
    Vec agg = pool_implausibility(result.space.pool, gp, y_obs, gamma_obs,
                                  opts.implausibility);
    {
      // Quantiles over the candidates that were still alive entering the wave.
      std::vector<double> alive;
      alive.reserve(static_cast<std::size_t>(result.space.retained_count()));
      for (Eigen::Index i = 0; i < agg.size(); ++i)
        if (result.space.mask[static_cast<std::size_t>(i)]) alive.push_back(agg[i]);
      std::sort(alive.begin(), alive.end());
      rec.quantiles.resize(5);
      for (int q = 0; q < 5; ++q) {
        const double pos = 0.25 * q * static_cast<double>(alive.size() - 1);
        rec.quantiles[q] = alive[static_cast<std::size_t>(std::lround(pos))];
      }
    }
    try {
      result.space = apply_threshold(result.space, agg, opts.threshold);
      rec.retained_fraction = result.space.retained_fraction();
      result.waves.push_back(rec);
    } catch (const EmptyNroyError&) {
      rec.retained_fraction = 0.0;
      result.waves.push_back(rec);
      result.notes.push_back("wave " + std::to_string(wave) +
                             ": NROY emptied; stopping early with this wave's emulator");
      stopped_early = true;
      break;
    }
  }

  if (result.emulator.models.empty())
    throw NumericalError("run_hm: no emulator was fitted");

  LogDensityFn loglik = [&](const Mat& t) {
    return calib_log_likelihood_batch(t, y_obs, result.emulator, gamma_obs);
  };
  result.posterior = stmcmc_sample(loglik, prior, seeds.derive("hm-mcmc"), opts.mcmc);
  result.posterior.method = "hm";
  result.posterior.total_evaluations = result.forward_evaluations;
  result.posterior.seed = seed;
  if (stopped_early) result.posterior.notes.push_back("hm stopped before the configured waves");
  return result;
}

}  // namespace calib96
