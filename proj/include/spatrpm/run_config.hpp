#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/experiment.hpp"
#include "spatrpm/marginal_likelihood.hpp"
#include "spatrpm/mcmc_sampler.hpp"

namespace spatrpm {

// Hyperparameters are given either explicitly (K and/or log_lambda) or
// through the rate constants. The two styles cannot be mixed; an explicit
// spec that omits one value takes it from the default rate constants.
struct HyperSpec {
  std::optional<int> K;
  std::optional<double> log_lambda;
  RateConstants rates;
  bool explicit_values = false;

  HyperParams resolve(int n) const;
};

struct RunConfig {
  ModelConfig model;
  SamplerConfig sampler;
  HyperSpec hyper;
  GridOptions grid;
  std::string data_path;
  std::string output_dir;
  int threads = 1;
};

// Defaults: sigma2 = 1, gamma = 1, k_max = 5, 20000 iterations, burn-in
// 5000, thinning 5, rate constants (5, 1, 0.1, 0.5). Unknown keys throw.
//
//   {
//     "model":   {"sigma2": 1, "gamma": 1},
//     "sampler": {"iterations": 20000, "burn_in": 5000, "thinning": 5, "seed": 1,
//                 "k_max": 5, "chains": 1, "change_mode": "joint",
//                 "move_probs": {"birth": .25, "death": .25, "change": .25, "hyper": .25}},
//     "hyper":   {"K": 38, "log_lambda": -138.9}  or  {"c_b": 5, "alpha_b": 1, "c_p": 0.1, "alpha_p": 0.5},
//     "grid":    {"restrict_to_largest_component": false},
//     "io":      {"data": "train.csv", "output_dir": "fit"},
//     "threads": 1
//   }
RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_file(const std::string& path);

nlohmann::json config_to_json(const RunConfig& config);

// Thread count from SPATRPM_THREADS, or 1.
int default_thread_count();

}  // namespace spatrpm
