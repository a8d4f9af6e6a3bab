#include "spatrpm/predictor.hpp"

#include <algorithm>
#include <cmath>

namespace spatrpm {

int label_at(const PosteriorSample& sample, const BlockGrid& grid, const Location& s) {
  if (!in_unit_square(s)) throw InputError("prediction location outside [0,1]^2");
  if (static_cast<int>(sample.block_labels.size()) != grid.block_count()) {
    throw InputError("posterior sample does not match the block grid");
  }
  return sample.block_labels[grid.resolve_block(s)];
}

const Eigen::VectorXd& theta_at(const PosteriorSample& sample, const BlockGrid& grid,
                                const Location& s) {
  return sample.thetas.at(label_at(sample, grid, s));
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InputError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 1.0) * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

PredictiveDistribution predict_mean(std::span<const PosteriorSample> samples,
                                    const BlockGrid& grid, const PredictionRequest& request) {
  if (samples.empty()) throw InputError("prediction needs at least one posterior sample");
  PredictiveDistribution out;
  out.sample_means.reserve(samples.size());
  std::vector<int> label_counts;
  for (const auto& sample : samples) {
    const int label = label_at(sample, grid, request.location);
    const Eigen::VectorXd& theta = sample.thetas.at(label);
    if (theta.size() != request.covariate.size()) {
      throw InputError("covariate dimension " + std::to_string(request.covariate.size()) +
                       " does not match model dimension " + std::to_string(theta.size()));
    }
    out.sample_means.push_back(request.covariate.dot(theta));
    if (label >= static_cast<int>(label_counts.size())) label_counts.resize(label + 1, 0);
    ++label_counts[label];
  }
  double sum = 0.0;
  for (double m : out.sample_means) sum += m;
  out.mean = sum / static_cast<double>(samples.size());
  out.q05 = empirical_quantile(out.sample_means, 0.05);
  out.q95 = empirical_quantile(out.sample_means, 0.95);
  out.modal_label = static_cast<int>(
      std::max_element(label_counts.begin(), label_counts.end()) - label_counts.begin());
  return out;
}

}  // namespace spatrpm
