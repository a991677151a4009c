#include "calib96/gp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "calib96/errors.hpp"
#include "calib96/rng.hpp"

namespace calib96 {

namespace {

// Optimizer box in log space. The lower tau^2 edge doubles as the "no signal"
// resting point for constant outputs.
constexpr double kLogGammaLo = -13.815510557964274;  // log 1e-6
constexpr double kLogGammaHi = 13.815510557964274;   // log 1e6
constexpr double kLogTau2Lo = -18.420680743952367;   // log 1e-8
constexpr double kLogTau2Hi = 18.420680743952367;    // log 1e8
constexpr double kLogGLo = -18.420680743952367;      // log 1e-8
constexpr double kLogGHi = 2.302585092994046;        // log 10

constexpr double kPenalty = 1e100;

Vec clamp_params(Vec t, Eigen::Index d) {
  for (Eigen::Index i = 0; i < d; ++i)
    t[i] = std::clamp(t[i], kLogGammaLo, kLogGammaHi);
  t[d] = std::clamp(t[d], kLogTau2Lo, kLogTau2Hi);
  t[d + 1] = std::clamp(t[d + 1], kLogGLo, kLogGHi);
  return t;
}

GPHyperparams unpack(const Vec& t, Eigen::Index d) {
  GPHyperparams hp;
  hp.gamma = t.head(d).array().exp();
  hp.tau2 = std::exp(t[d]);
  hp.g = std::exp(t[d + 1]);
  return hp;
}

struct NelderMeadResult {
  Vec x;
  double f = std::numeric_limits<double>::infinity();
};

NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                             double step, int max_evals, double tol) {
  const Eigen::Index n = x0.size();
  std::vector<Vec> xs(static_cast<std::size_t>(n + 1));
  std::vector<double> fs(static_cast<std::size_t>(n + 1));
  xs[0] = x0;
  fs[0] = f(x0);
  int evals = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec xi = x0;
    xi[i] += step;
    xs[static_cast<std::size_t>(i + 1)] = xi;
    fs[static_cast<std::size_t>(i + 1)] = f(xi);
    ++evals;
  }
  auto order = [&] {
    std::vector<std::size_t> idx(xs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    std::vector<Vec> xs2;
    std::vector<double> fs2;
    for (std::size_t i : idx) {
      xs2.push_back(xs[i]);
      fs2.push_back(fs[i]);
    }
    xs = std::move(xs2);
    fs = std::move(fs2);
  };
  order();
  while (evals < max_evals) {
    if (std::abs(fs.back() - fs.front()) <
        tol * (1.0 + std::abs(fs.front())))
      break;
    Vec centroid = Vec::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) centroid += xs[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(n);
    const Vec& worst = xs.back();
    Vec xr = centroid + (centroid - worst);
    double fr = f(xr);
    ++evals;
    if (fr < fs.front()) {
      Vec xe = centroid + 2.0 * (centroid - worst);
      double fe = f(xe);
      ++evals;
      if (fe < fr) {
        xs.back() = xe;
        fs.back() = fe;
      } else {
        xs.back() = xr;
        fs.back() = fr;
      }
    } else if (fr < fs[fs.size() - 2]) {
      xs.back() = xr;
      fs.back() = fr;
    } else {
      Vec xc = centroid + 0.5 * (worst - centroid);
      double fc = f(xc);
      ++evals;
      if (fc < fs.back()) {
        xs.back() = xc;
        fs.back() = fc;
      } else {
        for (std::size_t i = 1; i < xs.size(); ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = f(xs[i]);
          ++evals;
          if (evals >= max_evals) break;
        }
      }
    }
    order();
  }
  return {xs.front(), fs.front()};
}

}  // namespace

void GPHyperparams::validate() const {
  if ((gamma.array() <= 0.0).any())
    throw ConfigError("GPHyperparams: lengthscales must be positive");
  if (!(tau2 > 0.0)) throw ConfigError("GPHyperparams: tau2 must be positive");
  if (g < 0.0) throw ConfigError("GPHyperparams: nugget must be nonnegative");
}

Dataset Dataset::merged(const Mat& X, const Mat& Y, double tol) {
  if (X.rows() != Y.rows()) throw ConfigError("Dataset: X/Y row mismatch");
  if (X.rows() < 1) throw ConfigError("Dataset: need at least one row");
  if (!X.allFinite() || !Y.allFinite()) throw ConfigError("Dataset: non-finite entries");
  std::vector<Eigen::Index> keep;
  std::vector<std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    bool found = false;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if ((X.row(i) - X.row(keep[k])).cwiseAbs().maxCoeff() <= tol) {
        groups[k].push_back(i);
        found = true;
        break;
      }
    }
    if (!found) {
      keep.push_back(i);
      groups.push_back({i});
    }
  }
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(keep.size()), X.cols());
  out.Y.resize(static_cast<Eigen::Index>(keep.size()), Y.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.X.row(static_cast<Eigen::Index>(k)) = X.row(keep[k]);
    Vec acc = Vec::Zero(Y.cols());
    for (Eigen::Index i : groups[k]) acc += Y.row(i).transpose();
    out.Y.row(static_cast<Eigen::Index>(k)) =
        acc.transpose() / static_cast<double>(groups[k].size());
  }
  return out;
}

void InputDomain::validate() const {
  if (lo.size() != hi.size()) throw ConfigError("InputDomain: bound size mismatch");
  if (((hi - lo).array() <= 0.0).any())
    throw ConfigError("InputDomain: hi must exceed lo componentwise");
}

Mat InputDomain::standardize(const Mat& X) const {
  if (X.cols() != lo.size()) throw ConfigError("InputDomain: dimension mismatch");
  Mat out = X;
  for (Eigen::Index j = 0; j < lo.size(); ++j)
    out.col(j) = (X.col(j).array() - lo[j]) / (hi[j] - lo[j]);
  return out;
}

double HyperPrior::log_density(const Vec& log_gamma, double log_tau2, double log_g) const {
  double v = 0.0;
  for (Eigen::Index i = 0; i < log_gamma.size(); ++i) {
    const double z = (log_gamma[i] - log_gamma_mean) / log_gamma_sd;
    v -= 0.5 * z * z;
  }
  const double zt = (log_tau2 - log_tau2_mean) / log_tau2_sd;
  const double zg = (log_g - log_g_mean) / log_g_sd;
  return v - 0.5 * zt * zt - 0.5 * zg * zg;
}

double scaled_distance(const Vec& xi, const Vec& xj, const Vec& gamma) {
  if (xi.size() != xj.size() || xi.size() != gamma.size())
    throw ConfigError("scaled_distance: dimension mismatch");
  if ((gamma.array() <= 0.0).any())
    throw ConfigError("scaled_distance: lengthscales must be positive");
  double q2 = 0.0;
  for (Eigen::Index l = 0; l < xi.size(); ++l) {
    const double d = xi[l] - xj[l];
    q2 += d * d / gamma[l];
  }
  return std::sqrt(q2);
}

Mat kernel_cross(const Mat& A, const Mat& B, const GPHyperparams& hp) {
  hp.validate();
  if (A.cols() != B.cols() || A.cols() != hp.gamma.size())
    throw ConfigError("kernel_cross: dimension mismatch");
  Vec inv_sqrt = hp.gamma.cwiseSqrt().cwiseInverse();
  Mat As = A * inv_sqrt.asDiagonal();
  Mat Bs = B * inv_sqrt.asDiagonal();
  Vec a2 = As.rowwise().squaredNorm();
  Vec b2 = Bs.rowwise().squaredNorm();
  Mat q2 = (-2.0 * As * Bs.transpose()).rowwise() + b2.transpose();
  q2.colwise() += a2;
  return hp.tau2 * (-0.5 * q2.cwiseMax(0.0).array()).exp();
}

Mat build_covariance(const Mat& X, const GPHyperparams& hp) {
  Mat C = kernel_cross(X, X, hp);
  C.diagonal().array() = hp.tau2 * (1.0 + hp.g);
  return 0.5 * (C + C.transpose());
}

double log_marginal_likelihood(const GPHyperparams& hp, const Mat& X, const Vec& y) {
  if (X.rows() != y.size()) throw ConfigError("log_marginal_likelihood: X/y mismatch");
  Mat C = build_covariance(X, hp);
  CholResult chol = cholesky_with_jitter(C, hp.tau2);
  Vec w = chol.L.triangularView<Eigen::Lower>().solve(y);
  const double m = static_cast<double>(X.rows());
  return -0.5 * logdet_from_factor(chol.L) - 0.5 * w.squaredNorm() -
         0.5 * m * std::log(2.0 * M_PI);
}

GPModel::GPModel(GPHyperparams hp, Mat x_std, Vec y_std, InputDomain domain,
                 double y_mean, double y_sd)
    : hp_(std::move(hp)),
      x_std_(std::move(x_std)),
      y_std_(std::move(y_std)),
      domain_(std::move(domain)),
      y_mean_(y_mean),
      y_sd_(y_sd) {
  hp_.validate();
  refactor();
}

void GPModel::refactor() {
  Mat C = build_covariance(x_std_, hp_);
  chol_ = cholesky_with_jitter(C, hp_.tau2);
  alpha_ = chol_.L.triangularView<Eigen::Lower>().solve(y_std_);
  chol_.L.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_);
}

GPPrediction GPModel::predict(const Mat& x_star) const {
  Mat xs = domain_.standardize(x_star);
  Mat k_star = kernel_cross(x_std_, xs, hp_);  // m x n
  Vec mean_std = k_star.transpose() * alpha_;
  Mat v = chol_.L.triangularView<Eigen::Lower>().solve(k_star);
  Mat cov_std = kernel_cross(xs, xs, hp_) - v.transpose() * v;
  cov_std.diagonal().array() += hp_.tau2 * hp_.g;
  cov_std = 0.5 * (cov_std + cov_std.transpose());
  GPPrediction out;
  out.mean = (y_mean_ + y_sd_ * mean_std.array()).matrix();
  out.cov = (y_sd_ * y_sd_) * cov_std;
  return out;
}

void GPModel::predict_mean_var(const Mat& x_star, Vec& mean, Vec& var) const {
  const Eigen::Index n = x_star.rows();
  mean.resize(n);
  var.resize(n);
  const Eigen::Index chunk = 4096;
  const double prior_var = hp_.tau2 * (1.0 + hp_.g);
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min(chunk, n - start);
    Mat xs = domain_.standardize(x_star.middleRows(start, len));
    Mat k_star = kernel_cross(x_std_, xs, hp_);  // m x len
    mean.segment(start, len) =
        (y_mean_ + y_sd_ * (k_star.transpose() * alpha_).array()).matrix();
    Mat v = chol_.L.triangularView<Eigen::Lower>().solve(k_star);
    var.segment(start, len) =
        (y_sd_ * y_sd_) *
        (prior_var - v.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
  }
}

void GPModel::append_point(const Vec& x_raw, double y_raw) {
  Mat xs = domain_.standardize(x_raw.transpose());
  Vec b = kernel_cross(x_std_, xs, hp_).col(0);
  const double c = hp_.tau2 * (1.0 + hp_.g) + chol_.applied_jitter;
  const Eigen::Index m = x_std_.rows();
  x_std_.conservativeResize(m + 1, Eigen::NoChange);
  x_std_.row(m) = xs.row(0);
  y_std_.conservativeResize(m + 1);
  y_std_[m] = (y_raw - y_mean_) / y_sd_;
  if (cholesky_append(chol_.L, b, c)) {
    alpha_ = chol_.L.triangularView<Eigen::Lower>().solve(y_std_);
    chol_.L.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_);
  } else {
    refactor();
  }
}

void MultiGP::predict_mean_var(const Mat& x_star, Mat& mean, Mat& var) const {
  const Eigen::Index p = output_dim();
  mean.resize(x_star.rows(), p);
  var.resize(x_star.rows(), p);
  Vec m, v;
  for (Eigen::Index i = 0; i < p; ++i) {
    models[static_cast<std::size_t>(i)].predict_mean_var(x_star, m, v);
    mean.col(i) = m;
    var.col(i) = v;
  }
}

void MultiGP::append_point(const Vec& x_raw, const Vec& y_raw) {
  if (y_raw.size() != output_dim()) throw ConfigError("append_point: output dim mismatch");
  for (Eigen::Index i = 0; i < output_dim(); ++i)
    models[static_cast<std::size_t>(i)].append_point(x_raw, y_raw[i]);
}

GPModel fit_map(const Mat& X, const Vec& y, const InputDomain& domain,
                const HyperPrior& prior, const FitOptions& opts) {
  if (X.rows() < 2) throw InsufficientDataError("fit_map: need at least two points");
  domain.validate();
  const Eigen::Index d = X.cols();
  Mat x_std = domain.standardize(X);
  const double y_mean = y.mean();
  double y_sd = std::sqrt((y.array() - y_mean).square().sum() /
                          std::max<Eigen::Index>(1, y.size() - 1));
  if (!(y_sd > 1e-12)) y_sd = 1.0;
  Vec y_std = (y.array() - y_mean) / y_sd;

  auto objective = [&](const Vec& t_raw) -> double {
    Vec t = clamp_params(t_raw, d);
    GPHyperparams hp = unpack(t, d);
    try {
      const double lml = log_marginal_likelihood(hp, x_std, y_std);
      const double lp = prior.log_density(t.head(d), t[d], t[d + 1]);
      const double v = -(lml + lp);
      return std::isfinite(v) ? v : kPenalty;
    } catch (const NumericalError&) {
      return kPenalty;
    }
  };

  Rng rng(opts.seed);
  Vec t0 = Vec::Zero(d + 2);
  t0[d + 1] = prior.log_g_mean;
  Vec best;
  double best_f = std::numeric_limits<double>::infinity();
  for (int s = 0; s < std::max(1, opts.restarts); ++s) {
    Vec start = t0;
    if (s > 0) {
      for (Eigen::Index i = 0; i < d; ++i) start[i] += rng.normal();
      start[d] += rng.normal();
      start[d + 1] += 1.5 * rng.normal();
    }
    NelderMeadResult res =
        nelder_mead(objective, start, 0.5, opts.max_evals, opts.simplex_tol);
    if (res.f < best_f) {
      best_f = res.f;
      best = res.x;
    }
  }
  if (!(best_f < kPenalty))
    throw IllConditionedError("fit_map: every start failed to factor");
  Vec t = clamp_params(best, d);
  return GPModel(unpack(t, d), std::move(x_std), std::move(y_std), domain, y_mean, y_sd);
}

MultiGP fit_multi(const Dataset& data, const InputDomain& domain,
                  const HyperPrior& prior, const FitOptions& opts) {
  if (data.output_dim() < 1) throw ConfigError("fit_multi: need at least one output");
  MultiGP out;
  std::vector<Eigen::Index> failed;
  std::string first_error;
  SeedStream seeds(opts.seed);
  for (Eigen::Index i = 0; i < data.output_dim(); ++i) {
    FitOptions col_opts = opts;
    col_opts.seed = seeds.derive("gp-column", static_cast<std::uint64_t>(i));
    try {
      out.models.push_back(fit_map(data.X, data.Y.col(i), domain, prior, col_opts));
    } catch (const std::exception& e) {
      failed.push_back(i);
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!failed.empty()) {
    std::ostringstream msg;
    msg << "fit_multi: columns failed:";
    for (Eigen::Index i : failed) msg << ' ' << i;
    msg << " (" << first_error << ")";
    throw IllConditionedError(msg.str());
  }
  return out;
}

namespace {

nlohmann::json model_to_json(const GPModel& m) {
  nlohmann::json j;
  j["gamma"] = std::vector<double>(m.hyperparams().gamma.data(),
                                   m.hyperparams().gamma.data() + m.hyperparams().gamma.size());
  j["tau2"] = m.hyperparams().tau2;
  j["g"] = m.hyperparams().g;
  j["lo"] = std::vector<double>(m.domain().lo.data(), m.domain().lo.data() + m.domain().lo.size());
  j["hi"] = std::vector<double>(m.domain().hi.data(), m.domain().hi.data() + m.domain().hi.size());
  j["y_mean"] = m.y_mean();
  j["y_sd"] = m.y_sd();
  std::vector<std::vector<double>> xs(static_cast<std::size_t>(m.x_std().rows()));
  for (Eigen::Index i = 0; i < m.x_std().rows(); ++i) {
    auto& row = xs[static_cast<std::size_t>(i)];
    row.resize(static_cast<std::size_t>(m.x_std().cols()));
    for (Eigen::Index c = 0; c < m.x_std().cols(); ++c)
      row[static_cast<std::size_t>(c)] = m.x_std()(i, c);
  }
  j["x_std"] = xs;
  j["y_std"] = std::vector<double>(m.y_std().data(), m.y_std().data() + m.y_std().size());
  return j;
}

GPModel model_from_json(const nlohmann::json& j) {
  GPHyperparams hp;
  std::vector<double> gamma = j.at("gamma").get<std::vector<double>>();
  hp.gamma = Eigen::Map<Vec>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
  hp.tau2 = j.at("tau2").get<double>();
  hp.g = j.at("g").get<double>();
  std::vector<double> lo = j.at("lo").get<std::vector<double>>();
  std::vector<double> hi = j.at("hi").get<std::vector<double>>();
  InputDomain domain{Eigen::Map<Vec>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                     Eigen::Map<Vec>(hi.data(), static_cast<Eigen::Index>(hi.size()))};
  auto xs = j.at("x_std").get<std::vector<std::vector<double>>>();
  Mat x_std(static_cast<Eigen::Index>(xs.size()), domain.lo.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (Eigen::Index c = 0; c < x_std.cols(); ++c)
      x_std(static_cast<Eigen::Index>(i), c) = xs[i][static_cast<std::size_t>(c)];
  auto ys = j.at("y_std").get<std::vector<double>>();
  Vec y_std = Eigen::Map<Vec>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return GPModel(hp, std::move(x_std), std::move(y_std), domain,
                 j.at("y_mean").get<double>(), j.at("y_sd").get<double>());
}

}  // namespace

std::string GPModel::to_json() const { return model_to_json(*this).dump(); }

GPModel GPModel::from_json(const std::string& doc) {
  return model_from_json(nlohmann::json::parse(doc));
}

std::string MultiGP::to_json() const {
  nlohmann::json j;
  j["outputs"] = nlohmann::json::array();
  for (const auto& m : models) j["outputs"].push_back(model_to_json(m));
  return j.dump();
}

MultiGP MultiGP::from_json(const std::string& doc) {
  nlohmann::json j = nlohmann::json::parse(doc);
  MultiGP out;
  for (const auto& item : j.at("outputs")) out.models.push_back(model_from_json(item));
  return out;
}

}  // namespace calib96
