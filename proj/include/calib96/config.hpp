#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "calib96/ces.hpp"
#include "calib96/design.hpp"
#include "calib96/history_matching.hpp"
#include "calib96/lorenz96.hpp"
#include "calib96/mcmc.hpp"

namespace calib96 {

struct EKSMethodConfig {
  Eigen::Index n_ens = 20;
  int n_iter = 10;
  EKSOptions opts;
};

struct ExperimentConfig {
  std::string method;  // boed | gboed | hm | ces | eks | lhs
  long budget = 200;
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  std::optional<Vec> truth;  // (h, F, log_c, b); required in benchmark mode

  L96Config l96;
  PriorSpec prior = PriorSpec::lorenz_default();

  // Observation inputs: generated from the truth unless data_mode points at
  // files produced by an earlier run (or the obs-cov subcommand).
  bool data_mode = false;
  std::string y_obs_file;
  std::string gamma_obs_file;

  DesignLoopOptions design;
  HMOptions hm;
  CESConfig ces;
  EKSMethodConfig eks;
  FitOptions gp_fit;       // used by the lhs baseline
  HyperPrior hyperprior;
  STMCMCConfig mcmc;

  nlohmann::json raw;  // fully resolved document, stored in the manifest

  void validate() const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);

// FNV-1a over the canonical dump of the resolved document.
std::string config_hash(const nlohmann::json& doc);

}  // namespace calib96
