#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "calib96/mcmc.hpp"

namespace calib96 {

struct ParamSummary {
  std::string name;  // h, F, c, b
  double mean = 0.0;
  double sd = 0.0;
};

// Empirical mean and standard deviation per parameter in (h, F, c, b) order.
// The log_c column is exponentiated BEFORE summarizing, matching how the
// validation metrics are reported.
std::vector<ParamSummary> summarize(const PosteriorSamples& samples);

double absolute_error(double y_true, double mu_hat);

// -log(sigma^2) - (y - mu)^2 / sigma^2; larger is better. sigma = 0 is an
// undefined score and throws; callers record the exclusion instead.
double log_score(double y_true, double mu_hat, double sigma_hat);

// Score values below this are flagged rather than dropped; filtering happens
// at reporting time.
inline constexpr double kScoreExclusionThreshold = -50.0;

struct MetricRow {
  std::string method;
  long budget = 0;
  std::string param;
  double ae = 0.0;
  double score = 0.0;
  std::uint64_t seed = 0;
  bool excluded = false;
  double wall_time_s = 0.0;
};

void write_metric_rows(const std::string& path, const std::vector<MetricRow>& rows,
                       bool append = false);
std::vector<MetricRow> read_metric_rows(const std::string& path);

// Rows for one posterior given the truth, in (h, F, c, b) order. The truth is
// given as (h, F, log_c, b) and its c component is exponentiated to match the
// summary convention.
std::vector<MetricRow> metric_rows_for(const PosteriorSamples& samples, const Vec& truth,
                                       long budget, double wall_time_s);

// A method runner for the convergence harness: posterior at a given forward
// evaluation budget under a shared root seed.
using BudgetRunner = std::function<PosteriorSamples(long budget, std::uint64_t seed)>;

// Runs the method afresh at every checkpoint budget (shared seed), emitting
// 4 parameter rows per checkpoint.
std::vector<MetricRow> convergence_track(const BudgetRunner& runner,
                                         const std::vector<long>& checkpoints,
                                         const Vec& truth, std::uint64_t seed);

}  // namespace calib96
