#include "calib96/lorenz96.hpp"

#include <cmath>

#include "calib96/errors.hpp"
#include "calib96/rng.hpp"

namespace calib96 {

void L96Config::validate() const {
  if (K < 4) throw ConfigError("L96Config: K must be >= 4 (cyclic stencil)");
  if (J < 1) throw ConfigError("L96Config: J must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("L96Config: dt must be > 0");
  if (!(T > 0.0)) throw ConfigError("L96Config: T must be > 0");
  if (spinup < 0.0) throw ConfigError("L96Config: spinup must be >= 0");
}

double ParameterVector::c() const { return std::exp(log_c); }

Vec ParameterVector::to_vec() const {
  Vec v(4);
  v << h, F, log_c, b;
  return v;
}

ParameterVector ParameterVector::from_vec(const Vec& v) {
  if (v.size() != 4) throw ConfigError("ParameterVector: expected 4 components");
  return {v[0], v[1], v[2], v[3]};
}

void ParameterVector::validate() const {
  if (!std::isfinite(h) || !std::isfinite(F) || !std::isfinite(log_c) || !std::isfinite(b))
    throw ConfigError("ParameterVector: non-finite component");
  if (b == 0.0) throw ConfigError("ParameterVector: b must be nonzero (appears as divisor)");
}

L96State L96State::zero(const L96Config& cfg) {
  return {Vec::Zero(cfg.K), Mat::Zero(cfg.J, cfg.K)};
}

bool L96State::finite() const { return X.allFinite() && Y.allFinite(); }

namespace {

// The small-scale variables form one cyclic chain of length J*K: advancing
// past j = J at column k continues at j = 1 of column k+1. Flat index
// l = k*J + j (0-based) makes both wrap rules a single mod.
void rhs_flat(const double* z, double* dz, int K, int J, double h, double F,
              double c, double b) {
  const double hc_b = h * c / b;
  const int n_small = J * K;
  const double* Y = z + K;
  double* dY = dz + K;
  for (int k = 0; k < K; ++k) {
    const int km1 = (k - 1 + K) % K;
    const int km2 = (k - 2 + K) % K;
    const int kp1 = (k + 1) % K;
    double ysum = 0.0;
    const double* yk = Y + k * J;
    for (int j = 0; j < J; ++j) ysum += yk[j];
    dz[k] = -z[km1] * (z[km2] - z[kp1]) - z[k] - hc_b * ysum + F;
  }
  for (int l = 0; l < n_small; ++l) {
    const int lp1 = (l + 1) % n_small;
    const int lm1 = (l - 1 + n_small) % n_small;
    const int k = l / J;
    dY[l] = -c * b * Y[lp1] * (Y[lp1] - Y[lm1]) - c * Y[l] + hc_b * z[k];
  }
}

Vec flatten(const L96State& s) {
  const int K = static_cast<int>(s.X.size());
  const int J = static_cast<int>(s.Y.rows());
  Vec z(K + J * K);
  z.head(K) = s.X;
  for (int k = 0; k < K; ++k) z.segment(K + k * J, J) = s.Y.col(k);
  return z;
}

L96State unflatten(const Vec& z, const L96Config& cfg) {
  L96State s;
  s.X = z.head(cfg.K);
  s.Y.resize(cfg.J, cfg.K);
  for (int k = 0; k < cfg.K; ++k) s.Y.col(k) = z.segment(cfg.K + k * cfg.J, cfg.J);
  return s;
}

void rk4_step(Vec& z, Vec& k1, Vec& k2, Vec& k3, Vec& k4, Vec& tmp,
              const L96Config& cfg, const ParameterVector& theta) {
  const double c = theta.c();
  const double dt = cfg.dt;
  rhs_flat(z.data(), k1.data(), cfg.K, cfg.J, theta.h, theta.F, c, theta.b);
  tmp = z + 0.5 * dt * k1;
  rhs_flat(tmp.data(), k2.data(), cfg.K, cfg.J, theta.h, theta.F, c, theta.b);
  tmp = z + 0.5 * dt * k2;
  rhs_flat(tmp.data(), k3.data(), cfg.K, cfg.J, theta.h, theta.F, c, theta.b);
  tmp = z + dt * k3;
  rhs_flat(tmp.data(), k4.data(), cfg.K, cfg.J, theta.h, theta.F, c, theta.b);
  z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

long steps_for(double duration, double dt) {
  const double raw = duration / dt;
  const long n = std::lround(raw);
  if (std::abs(raw - static_cast<double>(n)) > 1e-6 * std::max(1.0, raw))
    throw ConfigError("integrate: dt does not divide duration");
  return n;
}

void accumulate_phi(const double* z, int K, int J, double* acc) {
  // acc += (1/K) sum_k (X_k, Ybar_k, X_k^2, X_k Ybar_k, Ybar_k^2)
  const double* Y = z + K;
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int k = 0; k < K; ++k) {
    const double x = z[k];
    double ybar = 0.0;
    const double* yk = Y + k * J;
    for (int j = 0; j < J; ++j) ybar += yk[j];
    ybar /= J;
    s0 += x;
    s1 += ybar;
    s2 += x * x;
    s3 += x * ybar;
    s4 += ybar * ybar;
  }
  acc[0] += s0 / K;
  acc[1] += s1 / K;
  acc[2] += s2 / K;
  acc[3] += s3 / K;
  acc[4] += s4 / K;
}

class StreamingIntegrator {
 public:
  StreamingIntegrator(const L96State& state0, const ParameterVector& theta,
                      const L96Config& cfg)
      : cfg_(cfg), theta_(theta), z_(flatten(state0)) {
    const Eigen::Index n = z_.size();
    k1_.resize(n);
    k2_.resize(n);
    k3_.resize(n);
    k4_.resize(n);
    tmp_.resize(n);
    theta_.validate();
    cfg_.validate();
    if (state0.X.size() != cfg.K || state0.Y.rows() != cfg.J || state0.Y.cols() != cfg.K)
      throw ConfigError("integrate: state dimensions do not match config");
  }

  void advance(long n_steps) {
    for (long i = 0; i < n_steps; ++i) {
      rk4_step(z_, k1_, k2_, k3_, k4_, tmp_, cfg_, theta_);
      time_ += cfg_.dt;
      if (!z_.allFinite())
        throw BlowupError("Lorenz96 state became non-finite", time_);
    }
  }

  // Averages phi over n_steps+1 states (both window endpoints included).
  Vec average_window(long n_steps) {
    Vec acc = Vec::Zero(kNumObservables);
    accumulate_phi(z_.data(), cfg_.K, cfg_.J, acc.data());
    for (long i = 0; i < n_steps; ++i) {
      rk4_step(z_, k1_, k2_, k3_, k4_, tmp_, cfg_, theta_);
      time_ += cfg_.dt;
      if (!z_.allFinite())
        throw BlowupError("Lorenz96 state became non-finite", time_);
      accumulate_phi(z_.data(), cfg_.K, cfg_.J, acc.data());
    }
    return acc / static_cast<double>(n_steps + 1);
  }

  const Vec& state() const { return z_; }

 private:
  L96Config cfg_;
  ParameterVector theta_;
  Vec z_, k1_, k2_, k3_, k4_, tmp_;
  double time_ = 0.0;
};

L96State random_initial_state(const L96Config& cfg, Rng& rng) {
  // X ~ iid N(0,1), Y ~ iid N(0, 0.1^2)
  L96State s;
  s.X = rng.normal_vector(cfg.K);
  s.Y = 0.1 * rng.normal_matrix(cfg.J, cfg.K);
  return s;
}

}  // namespace

L96State rhs(const L96State& state, const ParameterVector& theta, const L96Config& cfg) {
  cfg.validate();
  theta.validate();
  if (state.X.size() != cfg.K || state.Y.rows() != cfg.J || state.Y.cols() != cfg.K)
    throw ConfigError("rhs: state dimensions do not match config");
  Vec z = flatten(state);
  Vec dz(z.size());
  rhs_flat(z.data(), dz.data(), cfg.K, cfg.J, theta.h, theta.F, theta.c(), theta.b);
  return unflatten(dz, cfg);
}

std::vector<L96State> integrate(const L96State& state0, const ParameterVector& theta,
                                const L96Config& cfg, double duration) {
  if (duration < 0.0) throw ConfigError("integrate: duration must be >= 0");
  const long n = steps_for(duration, cfg.dt);
  StreamingIntegrator integ(state0, theta, cfg);
  std::vector<L96State> traj;
  traj.reserve(static_cast<std::size_t>(n + 1));
  traj.push_back(unflatten(integ.state(), cfg));
  for (long i = 0; i < n; ++i) {
    integ.advance(1);
    traj.push_back(unflatten(integ.state(), cfg));
  }
  return traj;
}

Vec observe_window(const std::vector<L96State>& trajectory, const L96Config& cfg) {
  cfg.validate();
  const long need = steps_for(cfg.T, cfg.dt);
  if (static_cast<long>(trajectory.size()) < need + 1)
    throw InsufficientDataError("observe_window: trajectory shorter than window T");
  Vec acc = Vec::Zero(kNumObservables);
  const long n = static_cast<long>(trajectory.size());
  for (long i = 0; i < n; ++i) {
    Vec z = flatten(trajectory[static_cast<std::size_t>(i)]);
    accumulate_phi(z.data(), cfg.K, cfg.J, acc.data());
  }
  return acc / static_cast<double>(n);
}

Vec forward(const ParameterVector& theta, const L96Config& cfg, std::uint64_t seed) {
  cfg.validate();
  theta.validate();
  Rng rng(seed);
  L96State s0 = random_initial_state(cfg, rng);
  StreamingIntegrator integ(s0, theta, cfg);
  integ.advance(steps_for(cfg.spinup, cfg.dt));
  return integ.average_window(steps_for(cfg.T, cfg.dt));
}

Mat estimate_obs_covariance(const ParameterVector& theta, const L96Config& cfg,
                            double total_time, std::uint64_t seed) {
  cfg.validate();
  theta.validate();
  if (total_time < 2.0 * cfg.T)
    throw InsufficientDataError("estimate_obs_covariance: need at least two windows");
  const long n_windows = static_cast<long>(std::floor(total_time / cfg.T));
  Rng rng(seed);
  L96State s0 = random_initial_state(cfg, rng);
  StreamingIntegrator integ(s0, theta, cfg);
  integ.advance(steps_for(cfg.spinup, cfg.dt));
  const long window_steps = steps_for(cfg.T, cfg.dt);
  Mat obs(n_windows, kNumObservables);
  for (long w = 0; w < n_windows; ++w)
    obs.row(w) = integ.average_window(window_steps).transpose();
  Vec mean = obs.colwise().mean();
  Mat centered = obs.rowwise() - mean.transpose();
  Mat cov = centered.transpose() * centered / static_cast<double>(n_windows - 1);
  return 0.5 * (cov + cov.transpose());
}

}  // namespace calib96
