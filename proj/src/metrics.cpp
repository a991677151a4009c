#include "calib96/metrics.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "calib96/csvio.hpp"
#include "calib96/errors.hpp"

namespace calib96 {

std::vector<ParamSummary> summarize(const PosteriorSamples& samples) {
  const Mat& draws = samples.draws;
  if (draws.rows() < 2) throw InsufficientDataError("summarize: need at least two draws");
  if (draws.cols() != 4) throw ConfigError("summarize: expected 4 parameter columns");
  const char* names[] = {"h", "F", "c", "b"};
  std::vector<ParamSummary> out;
  for (Eigen::Index j = 0; j < 4; ++j) {
    Vec col = draws.col(j);
    if (j == 2) col = col.array().exp();  // log c -> c before any moments
    ParamSummary s;
    s.name = names[j];
    s.mean = col.mean();
    s.sd = std::sqrt((col.array() - s.mean).square().sum() /
                     static_cast<double>(col.size() - 1));
    out.push_back(s);
  }
  return out;
}

double absolute_error(double y_true, double mu_hat) { return std::abs(y_true - mu_hat); }

double log_score(double y_true, double mu_hat, double sigma_hat) {
  if (!(sigma_hat > 0.0))
    throw NumericalError("log_score: undefined for sigma = 0");
  const double r = y_true - mu_hat;
  const double s2 = sigma_hat * sigma_hat;
  return -std::log(s2) - r * r / s2;
}

void write_metric_rows(const std::string& path, const std::vector<MetricRow>& rows,
                       bool append) {
  const bool write_header = [&] {
    if (!append) return true;
    std::ifstream probe(path);
    return !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
  }();
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  if (write_header) out << "method,budget,param,ae,score,seed,excluded,wall_time_s\n";
  for (const MetricRow& r : rows) {
    out << r.method << ',' << r.budget << ',' << r.param << ',' << format_g15(r.ae) << ','
        << format_g15(r.score) << ',' << r.seed << ',' << (r.excluded ? 1 : 0) << ','
        << format_g15(r.wall_time_s) << '\n';
  }
}

std::vector<MetricRow> read_metric_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  std::vector<MetricRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    MetricRow r;
    std::getline(ss, r.method, ',');
    std::getline(ss, cell, ',');
    r.budget = std::stol(cell);
    std::getline(ss, r.param, ',');
    std::getline(ss, cell, ',');
    r.ae = std::stod(cell);
    std::getline(ss, cell, ',');
    r.score = std::stod(cell);
    std::getline(ss, cell, ',');
    r.seed = std::stoull(cell);
    std::getline(ss, cell, ',');
    r.excluded = cell == "1";
    std::getline(ss, cell, ',');
    r.wall_time_s = std::stod(cell);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricRow> metric_rows_for(const PosteriorSamples& samples, const Vec& truth,
                                       long budget, double wall_time_s) {
  if (truth.size() != 4) throw ConfigError("metric_rows_for: expected 4 truth components");
  std::vector<ParamSummary> summary = summarize(samples);
  Vec truth_t = truth;
  truth_t[2] = std::exp(truth[2]);  // compare c, not log c
  std::vector<MetricRow> rows;
  for (std::size_t j = 0; j < summary.size(); ++j) {
    MetricRow r;
    r.method = samples.method;
    r.budget = budget;
    r.param = summary[j].name;
    r.seed = samples.seed;
    r.wall_time_s = wall_time_s;
    r.ae = absolute_error(truth_t[static_cast<Eigen::Index>(j)], summary[j].mean);
    try {
      r.score = log_score(truth_t[static_cast<Eigen::Index>(j)], summary[j].mean,
                          summary[j].sd);
      r.excluded = r.score < kScoreExclusionThreshold;
    } catch (const NumericalError&) {
      r.score = -std::numeric_limits<double>::infinity();
      r.excluded = true;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricRow> convergence_track(const BudgetRunner& runner,
                                         const std::vector<long>& checkpoints,
                                         const Vec& truth, std::uint64_t seed) {
  std::vector<MetricRow> rows;
  for (long budget : checkpoints) {
    const auto t0 = std::chrono::steady_clock::now();
    PosteriorSamples samples = runner(budget, seed);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<MetricRow> batch = metric_rows_for(samples, truth, budget, wall);
    rows.insert(rows.end(), batch.begin(), batch.end());
  }
  return rows;
}

}  // namespace calib96
