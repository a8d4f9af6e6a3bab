#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/mcmc_sampler.hpp"

namespace spatrpm {

struct PredictionRequest {
  Location location;
  Eigen::VectorXd covariate;
};

struct PredictiveDistribution {
  std::vector<double> sample_means;  // x' theta(s) per posterior sample
  double mean = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  int modal_label = 0;  // most frequent 0-based cluster label of s
};

// Cluster label of s under a sample; inactive cells use the nearest active
// block.
int label_at(const PosteriorSample& sample, const BlockGrid& grid, const Location& s);

// Piecewise-constant coefficient surface theta(s) of one sample.
const Eigen::VectorXd& theta_at(const PosteriorSample& sample, const BlockGrid& grid,
                                const Location& s);

PredictiveDistribution predict_mean(std::span<const PosteriorSample> samples,
                                    const BlockGrid& grid, const PredictionRequest& request);

// Linear-interpolated empirical quantile, p in [0,1].
double empirical_quantile(std::vector<double> values, double p);

}  // namespace spatrpm
