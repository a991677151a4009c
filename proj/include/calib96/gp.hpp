#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calib96/linalg.hpp"

namespace calib96 {

// Kernel hyperparameters phi = (gamma, tau^2, g). gamma holds one squared
// lengthscale per input dimension; g splits the magnitude between signal
// (tau^2) and noise (tau^2 g).
struct GPHyperparams {
  Vec gamma;
  double tau2 = 1.0;
  double g = 1e-4;

  void validate() const;
};

// Design matrix paired with simulator outputs. Construction merges duplicate
// inputs (max-abs distance <= tol) by averaging their outputs, which would
// otherwise make the covariance exactly singular at g = 0.
struct Dataset {
  Mat X;  // m x d
  Mat Y;  // m x p

  static Dataset merged(const Mat& X, const Mat& Y, double tol = 1e-12);
  Eigen::Index size() const { return X.rows(); }
  Eigen::Index input_dim() const { return X.cols(); }
  Eigen::Index output_dim() const { return Y.cols(); }
};

// Box used to map emulator inputs onto [0,1]^d before any kernel evaluation.
struct InputDomain {
  Vec lo;
  Vec hi;

  Mat standardize(const Mat& X) const;
  void validate() const;
};

// Independent normal priors on the log hyperparameters. Lengthscale centers
// default to log(1) = 0, i.e. the standardized input range.
struct HyperPrior {
  double log_gamma_mean = 0.0;
  double log_gamma_sd = 1.0;
  double log_tau2_mean = 0.0;
  double log_tau2_sd = 2.0;
  double log_g_mean = -9.210340371976182;  // log 1e-4
  double log_g_sd = 2.0;

  double log_density(const Vec& log_gamma, double log_tau2, double log_g) const;
};

struct FitOptions {
  int restarts = 8;
  int max_evals = 400;
  double simplex_tol = 1e-7;
  std::uint64_t seed = 0;
};

double scaled_distance(const Vec& xi, const Vec& xj, const Vec& gamma);

// tau^2 * exp(-q^2/2) between the rows of A and B; no nugget anywhere.
Mat kernel_cross(const Mat& A, const Mat& B, const GPHyperparams& hp);

// Full training covariance: kernel_cross(X, X) plus tau^2 g on the diagonal.
Mat build_covariance(const Mat& X, const GPHyperparams& hp);

// Gaussian log marginal likelihood of a single standardized output column,
// computed through the Cholesky factor of build_covariance(X, hp).
double log_marginal_likelihood(const GPHyperparams& hp, const Mat& X, const Vec& y);

struct GPPrediction {
  Vec mean;
  Mat cov;
};

// One fitted zero-mean GP for a single output column. Immutable after
// fitting apart from append_point, which extends the cached factor in O(m^2)
// with hyperparameters and standardization constants frozen.
class GPModel {
 public:
  GPModel() = default;
  GPModel(GPHyperparams hp, Mat x_std, Vec y_std, InputDomain domain,
          double y_mean, double y_sd);

  // Exact MVN conditioning on the training data, de-standardized. The nugget
  // is excluded from cross-covariances and included on the predictive
  // diagonal (the prediction targets a new simulator evaluation).
  GPPrediction predict(const Mat& x_star) const;

  // Batched mean and predictive variance only; the workhorse for MCMC and
  // pool screening.
  void predict_mean_var(const Mat& x_star, Vec& mean, Vec& var) const;

  void append_point(const Vec& x_raw, double y_raw);

  const GPHyperparams& hyperparams() const { return hp_; }
  const InputDomain& domain() const { return domain_; }
  const Mat& x_std() const { return x_std_; }
  const Vec& y_std() const { return y_std_; }
  const Mat& factor() const { return chol_.L; }
  double applied_jitter() const { return chol_.applied_jitter; }
  double y_mean() const { return y_mean_; }
  double y_sd() const { return y_sd_; }
  Eigen::Index size() const { return x_std_.rows(); }

  std::string to_json() const;
  static GPModel from_json(const std::string& doc);

 private:
  void refactor();

  GPHyperparams hp_;
  Mat x_std_;
  Vec y_std_;
  InputDomain domain_;
  double y_mean_ = 0.0;
  double y_sd_ = 1.0;
  CholResult chol_;
  Vec alpha_;  // Gamma^{-1} y_std
};

// p independent GPs sharing one input design.
struct MultiGP {
  std::vector<GPModel> models;

  Eigen::Index output_dim() const { return static_cast<Eigen::Index>(models.size()); }
  // n x p means and predictive variances.
  void predict_mean_var(const Mat& x_star, Mat& mean, Mat& var) const;
  void append_point(const Vec& x_raw, const Vec& y_raw);

  std::string to_json() const;
  static MultiGP from_json(const std::string& doc);
};

// MAP fit of one output column: multi-start Nelder-Mead over the log
// hyperparameters of log_marginal_likelihood + hyperprior.
GPModel fit_map(const Mat& X, const Vec& y, const InputDomain& domain,
                const HyperPrior& prior, const FitOptions& opts);

// Column-wise independent fits; any column failure aggregates into one error
// naming the failing columns.
MultiGP fit_multi(const Dataset& data, const InputDomain& domain,
                  const HyperPrior& prior, const FitOptions& opts);

}  // namespace calib96
