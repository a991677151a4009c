#include "calib96/config.hpp"

#include <set>

#include "calib96/errors.hpp"
#include "calib96/rng.hpp"
#include "calib96/toml_lite.hpp"

namespace calib96 {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

Vec get_vec(const json& j, const std::string& key) {
  auto v = j.at(key).get<std::vector<double>>();
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void fill_fit(FitOptions& f, const json& j) {
  f.restarts = get_or(j, "restarts", f.restarts);
  f.max_evals = get_or(j, "max_evals", f.max_evals);
  f.simplex_tol = get_or(j, "simplex_tol", f.simplex_tol);
}

void fill_hyperprior(HyperPrior& h, const json& j) {
  h.log_gamma_mean = get_or(j, "log_gamma_mean", h.log_gamma_mean);
  h.log_gamma_sd = get_or(j, "log_gamma_sd", h.log_gamma_sd);
  h.log_tau2_mean = get_or(j, "log_tau2_mean", h.log_tau2_mean);
  h.log_tau2_sd = get_or(j, "log_tau2_sd", h.log_tau2_sd);
  h.log_g_mean = get_or(j, "log_g_mean", h.log_g_mean);
  h.log_g_sd = get_or(j, "log_g_sd", h.log_g_sd);
}

void fill_mcmc(STMCMCConfig& m, const json& j) {
  m.n = get_or<long>(j, "n", m.n);
  m.ess_fraction = get_or(j, "ess_fraction", m.ess_fraction);
  m.mh_steps = get_or(j, "mh_steps", m.mh_steps);
  m.max_stages = get_or(j, "max_stages", m.max_stages);
}

void fill_eks_opts(EKSOptions& e, const json& j) {
  e.dt0 = get_or(j, "dt0", e.dt0);
  e.eps = get_or(j, "eps", e.eps);
}

}  // namespace

void ExperimentConfig::validate() const {
  static const std::set<std::string> methods{"boed", "gboed", "hm", "ces", "eks", "lhs"};
  if (!methods.count(method))
    throw ConfigError("unknown method '" + method + "' (expected boed, gboed, hm, ces, eks, lhs)");
  l96.validate();
  prior.validate();
  if (budget < 1) throw ConfigError("budget must be positive");
  if (!data_mode && !truth)
    throw ConfigError("benchmark mode requires 'truth' (or set data_mode with observation files)");
  if (data_mode && (y_obs_file.empty() || gamma_obs_file.empty()))
    throw ConfigError("data_mode requires y_obs_file and gamma_obs_file");
  if (truth && truth->size() != 4)
    throw ConfigError("truth must have 4 components (h, F, log_c, b)");

  if (method == "ces") {
    if (static_cast<long>(ces.n_ens) * ces.n_iter != budget)
      throw ConfigError("ces: n_ens * n_iter must equal budget");
    ces.validate();
  } else if (method == "eks") {
    if (static_cast<long>(eks.n_ens) * eks.n_iter != budget)
      throw ConfigError("eks: n_ens * n_iter must equal budget");
  } else if (method == "hm") {
    if (budget % opts_waves() != 0)
      throw ConfigError("hm: budget must be divisible by the wave count");
  } else if (method == "boed" || method == "gboed") {
    if (budget <= static_cast<long>(design.n0))
      throw ConfigError(method + ": budget must exceed the initial design size n0");
  } else if (method == "lhs") {
    if (budget < 2) throw ConfigError("lhs: budget must be at least 2");
  }
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
  ExperimentConfig cfg;
  cfg.raw = doc;
  cfg.method = get_or<std::string>(doc, "method", "");
  cfg.budget = get_or<long>(doc, "budget", cfg.budget);
  cfg.seed = get_or<std::uint64_t>(doc, "seed", cfg.seed);
  cfg.out_dir = get_or<std::string>(doc, "out", cfg.out_dir);
  if (doc.contains("truth")) cfg.truth = get_vec(doc, "truth");

  if (doc.contains("l96")) {
    const json& l = doc.at("l96");
    cfg.l96.K = get_or(l, "K", cfg.l96.K);
    cfg.l96.J = get_or(l, "J", cfg.l96.J);
    cfg.l96.dt = get_or(l, "dt", cfg.l96.dt);
    cfg.l96.T = get_or(l, "T", cfg.l96.T);
    cfg.l96.spinup = get_or(l, "spinup", cfg.l96.spinup);
    cfg.l96.total_time = get_or(l, "total_time", cfg.l96.total_time);
  }
  if (doc.contains("prior")) {
    const json& p = doc.at("prior");
    auto bound = [&](const std::string& name, Eigen::Index idx) {
      if (!p.contains(name)) return;
      Vec b = get_vec(p, name);
      if (b.size() != 2) throw ConfigError("prior." + name + " must be [lo, hi]");
      cfg.prior.lo[idx] = b[0];
      cfg.prior.hi[idx] = b[1];
    };
    bound("h", 0);
    bound("F", 1);
    bound("log_c", 2);
    bound("b", 3);
  }
  if (doc.contains("obs")) {
    const json& o = doc.at("obs");
    cfg.data_mode = get_or(o, "data_mode", cfg.data_mode);
    cfg.y_obs_file = get_or<std::string>(o, "y_obs_file", cfg.y_obs_file);
    cfg.gamma_obs_file = get_or<std::string>(o, "gamma_obs_file", cfg.gamma_obs_file);
  }

  if (doc.contains("gp")) fill_fit(cfg.gp_fit, doc.at("gp"));
  if (doc.contains("hyperprior")) fill_hyperprior(cfg.hyperprior, doc.at("hyperprior"));
  if (doc.contains("mcmc")) fill_mcmc(cfg.mcmc, doc.at("mcmc"));

  // Shared knobs propagate into the method blocks, then the blocks override.
  cfg.design.fit = cfg.gp_fit;
  cfg.design.hyperprior = cfg.hyperprior;
  cfg.design.mcmc = cfg.mcmc;
  cfg.hm.fit = cfg.gp_fit;
  cfg.hm.hyperprior = cfg.hyperprior;
  cfg.hm.mcmc = cfg.mcmc;
  cfg.ces.fit = cfg.gp_fit;
  cfg.ces.hyperprior = cfg.hyperprior;
  cfg.ces.mcmc = cfg.mcmc;

  if (doc.contains("design")) {
    const json& d = doc.at("design");
    cfg.design.n0 = get_or<long>(d, "n0", cfg.design.n0);
    cfg.design.n_prime = get_or<long>(d, "n_prime", cfg.design.n_prime);
    cfg.design.refit_every = get_or(d, "refit_every", cfg.design.refit_every);
    cfg.design.refresh_every = get_or(d, "refresh_every", cfg.design.refresh_every);
    cfg.design.inner_mcmc_n = get_or<long>(d, "inner_mcmc_n", cfg.design.inner_mcmc_n);
    cfg.design.xprime_mode = get_or<std::string>(d, "xprime_mode", cfg.design.xprime_mode);
    cfg.design.select.sweep = get_or(d, "sweep", cfg.design.select.sweep);
    cfg.design.select.polish_top = get_or(d, "polish_top", cfg.design.select.polish_top);
    cfg.design.select.polish_rounds = get_or(d, "polish_rounds", cfg.design.select.polish_rounds);
    cfg.design.eig.nugget_on_xprime =
        get_or(d, "nugget_on_xprime", cfg.design.eig.nugget_on_xprime);
  }
  if (doc.contains("hm")) {
    const json& h = doc.at("hm");
    cfg.hm.waves = get_or(h, "waves", cfg.hm.waves);
    cfg.hm.pool_size = get_or<long>(h, "pool", cfg.hm.pool_size);
    cfg.hm.threshold = get_or(h, "threshold", cfg.hm.threshold);
    cfg.hm.lhs_restarts = get_or(h, "lhs_restarts", cfg.hm.lhs_restarts);
    cfg.hm.cumulative_training = get_or(h, "cumulative", cfg.hm.cumulative_training);
    cfg.hm.implausibility.vector_norm =
        get_or(h, "vector_norm", cfg.hm.implausibility.vector_norm);
  }
  if (doc.contains("ces")) {
    const json& c = doc.at("ces");
    cfg.ces.n_ens = get_or<long>(c, "n_ens", cfg.ces.n_ens);
    cfg.ces.n_iter = get_or(c, "n_iter", cfg.ces.n_iter);
    cfg.ces.bbox_inflate = get_or(c, "bbox_inflate", cfg.ces.bbox_inflate);
    cfg.ces.max_gp_rows = get_or<long>(c, "max_gp_rows", cfg.ces.max_gp_rows);
    if (c.contains("schedule")) {
      const auto& s = c.at("schedule");
      if (s.is_string() && s.get<std::string>() == "sparse")
        cfg.ces.schedule = CESConfig::sparse_schedule(cfg.ces.n_iter);
      else if (s.is_string() && s.get<std::string>() == "all")
        cfg.ces.schedule = CESConfig::full_schedule(cfg.ces.n_iter);
      else
        cfg.ces.schedule = s.get<std::vector<int>>();
    }
    fill_eks_opts(cfg.ces.eks, c);
  }
  if (cfg.ces.schedule.empty()) cfg.ces.schedule = CESConfig::full_schedule(cfg.ces.n_iter);
  if (doc.contains("eks")) {
    const json& e = doc.at("eks");
    cfg.eks.n_ens = get_or<long>(e, "n_ens", cfg.eks.n_ens);
    cfg.eks.n_iter = get_or(e, "n_iter", cfg.eks.n_iter);
    fill_eks_opts(cfg.eks.opts, e);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(load_config_file(path));
}

std::string config_hash(const nlohmann::json& doc) {
  const std::uint64_t h = fnv1a64(doc.dump());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace calib96
