#include "spatrpm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace spatrpm {
namespace {

// Dense relabelling 0..k-1 in order of first appearance.
std::vector<int> compact(std::span<const int> labels, int& k) {
  std::map<int, int> ids;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = ids.try_emplace(labels[i], static_cast<int>(ids.size())).first->second;
  }
  k = static_cast<int>(ids.size());
  return out;
}

Eigen::MatrixXd contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw InputError("partitions have different point counts (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  }
  int ka = 0;
  int kb = 0;
  const auto ca = compact(a, ka);
  const auto cb = compact(b, kb);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ka, kb);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    table(ca[i], cb[i]) += 1.0;
  }
  return table;
}

double log_sum_exp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

PartitionDistance distance_from_overlaps(const Eigen::MatrixXd& overlaps) {
  const double total = overlaps.sum();
  if (!(total > 0.0)) throw InputError("partitions cover no common mass");
  double rows = 0.0;
  for (Eigen::Index j = 0; j < overlaps.rows(); ++j) rows += overlaps.row(j).maxCoeff();
  double cols = 0.0;
  for (Eigen::Index l = 0; l < overlaps.cols(); ++l) cols += overlaps.col(l).maxCoeff();
  PartitionDistance d;
  d.eps1 = 1.0 - rows / total;
  d.eps2 = 1.0 - cols / total;
  d.epsilon = 2.0 - (rows + cols) / total;
  return d;
}

PartitionDistance epsilon_n_parts(std::span<const int> a, std::span<const int> b) {
  return distance_from_overlaps(contingency(a, b));
}

double epsilon_n(std::span<const int> a, std::span<const int> b) {
  return epsilon_n_parts(a, b).epsilon;
}

PartitionDistance epsilon_blocks(std::span<const int> a, std::span<const int> b) {
  // Every block has area K^-2, which cancels against |D| = (#blocks) K^-2.
  return epsilon_n_parts(a, b);
}

DomainLattice::DomainLattice(const BlockGrid& grid, const ReferencePartition& ref,
                             int resolution)
    : k0_(ref.k0()) {
  if (resolution < 1) throw InputError("lattice resolution must be positive");
  block_region_ = Eigen::MatrixXd::Zero(grid.block_count(), k0_);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const Location s{(i + 0.5) / resolution, (j + 0.5) / resolution};
      const auto region = ref.membership(s);
      if (!region) continue;
      block_region_(grid.resolve_block(s), *region) += 1.0;
      ++inside_;
    }
  }
}

Eigen::MatrixXd DomainLattice::overlaps(const PosteriorSample& sample) const {
  if (static_cast<Eigen::Index>(sample.block_labels.size()) != block_region_.rows()) {
    throw InputError("posterior sample does not match the block grid");
  }
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(sample.k, k0_);
  for (Eigen::Index b = 0; b < block_region_.rows(); ++b) {
    table.row(sample.block_labels[b]) += block_region_.row(b);
  }
  return table;
}

PartitionDistance DomainLattice::epsilon(const PosteriorSample& sample) const {
  return distance_from_overlaps(overlaps(sample));
}

std::vector<int> DomainLattice::matched_index(const PosteriorSample& sample) const {
  const Eigen::MatrixXd table = overlaps(sample);
  std::vector<int> out(sample.k, 0);
  for (int j = 0; j < sample.k; ++j) {
    for (int l = 1; l < k0_; ++l) {
      if (table(j, l) > table(j, out[j])) out[j] = l;
    }
  }
  return out;
}

PartitionDistance epsilon_domain(const PosteriorSample& sample, const BlockGrid& grid,
                                 const ReferencePartition& ref, int resolution) {
  return DomainLattice(grid, ref, resolution).epsilon(sample);
}

std::vector<int> matched_index(const PosteriorSample& sample, const BlockGrid& grid,
                               const ReferencePartition& ref, int resolution) {
  return DomainLattice(grid, ref, resolution).matched_index(sample);
}

double rate_denominator(int n, double alpha0, double alpha_b) {
  if (n < 3) throw InputError("rate denominator needs n >= 3 so that log log n is defined");
  return std::exp((alpha0 + 0.5 * (1.0 + alpha_b)) * std::log(std::log(static_cast<double>(n))));
}

NormalizedErrors normalized_errors(const PosteriorSample& sample, const DomainLattice& lattice,
                                   std::span<const Eigen::VectorXd> true_thetas, double alpha0,
                                   double alpha_b, int n) {
  if (static_cast<int>(true_thetas.size()) != lattice.k0()) {
    throw InputError("need one true coefficient vector per reference region");
  }
  const double scale = std::sqrt(static_cast<double>(n)) / rate_denominator(n, alpha0, alpha_b);
  const auto match = lattice.matched_index(sample);
  double worst = 0.0;
  for (int j = 0; j < sample.k; ++j) {
    worst = std::max(worst, (sample.thetas.at(j) - true_thetas[match[j]]).norm());
  }
  return {scale * lattice.epsilon(sample).epsilon, scale * worst};
}

NormalizedErrors normalized_errors(const PosteriorSample& sample, const BlockGrid& grid,
                                   const ReferencePartition& ref,
                                   std::span<const Eigen::VectorXd> true_thetas, double alpha0,
                                   double alpha_b, int n, int resolution) {
  return normalized_errors(sample, DomainLattice(grid, ref, resolution), true_thetas, alpha0,
                           alpha_b, n);
}

Eigen::MatrixXd predict_means(std::span<const PosteriorSample> samples, const BlockGrid& grid,
                              std::span<const Location> locations,
                              const Eigen::MatrixXd& covariates) {
  if (static_cast<Eigen::Index>(locations.size()) != covariates.rows()) {
    throw InputError("location and covariate counts differ");
  }
  std::vector<int> blocks(locations.size());
  for (std::size_t i = 0; i < locations.size(); ++i) blocks[i] = grid.resolve_block(locations[i]);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()),
                      static_cast<Eigen::Index>(locations.size()));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& sample = samples[s];
    if (static_cast<int>(sample.block_labels.size()) != grid.block_count()) {
      throw InputError("posterior sample does not match the block grid");
    }
    for (std::size_t i = 0; i < locations.size(); ++i) {
      const auto& theta = sample.thetas.at(sample.block_labels[blocks[i]]);
      if (theta.size() != covariates.cols()) {
        throw InputError("covariate dimension does not match the posterior samples");
      }
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) =
          covariates.row(static_cast<Eigen::Index>(i)).dot(theta);
    }
  }
  return out;
}

std::vector<double> prediction_error_e3(const Eigen::MatrixXd& predicted,
                                        const Eigen::VectorXd& true_means, double alpha0,
                                        double alpha_b, int n) {
  if (predicted.cols() != true_means.size() || true_means.size() == 0) {
    throw InputError("prediction matrix does not match the true means");
  }
  const double scale = std::sqrt(static_cast<double>(n)) / rate_denominator(n, alpha0, alpha_b) /
                       static_cast<double>(true_means.size());
  std::vector<double> out(static_cast<std::size_t>(predicted.rows()));
  for (Eigen::Index s = 0; s < predicted.rows(); ++s) {
    out[s] = scale * (predicted.row(s).transpose() - true_means).squaredNorm();
  }
  return out;
}

double mae(const Eigen::MatrixXd& predicted, const Eigen::VectorXd& true_means) {
  if (predicted.rows() < 1) throw InputError("MAE needs at least one sample");
  if (predicted.cols() != true_means.size()) {
    throw InputError("prediction matrix does not match the true means");
  }
  const Eigen::VectorXd posterior_mean = predicted.colwise().mean().transpose();
  return (posterior_mean - true_means).cwiseAbs().sum() / static_cast<double>(true_means.size());
}

double crps(std::span<const double> ensemble, double y) {
  if (ensemble.empty()) throw InputError("CRPS needs at least one ensemble member");
  const double m = static_cast<double>(ensemble.size());
  double spread_to_obs = 0.0;
  for (double x : ensemble) spread_to_obs += std::abs(x - y);
  // sum_{s,s'} |x_s - x_s'| = 2 sum_i (2i - m + 1) x_(i) over the sorted
  // sample, i 0-based.
  std::vector<double> sorted(ensemble.begin(), ensemble.end());
  std::sort(sorted.begin(), sorted.end());
  double pair_sum = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    pair_sum += (2.0 * static_cast<double>(i) - m + 1.0) * sorted[i];
  }
  pair_sum *= 2.0;
  return spread_to_obs / m - 0.5 * pair_sum / (m * m);
}

double mean_crps(const Eigen::MatrixXd& predicted, const Eigen::VectorXd& truth) {
  if (predicted.cols() != truth.size() || truth.size() == 0) {
    throw InputError("prediction matrix does not match the truth vector");
  }
  double total = 0.0;
  std::vector<double> column(static_cast<std::size_t>(predicted.rows()));
  for (Eigen::Index i = 0; i < predicted.cols(); ++i) {
    for (Eigen::Index s = 0; s < predicted.rows(); ++s) column[s] = predicted(s, i);
    total += crps(column, truth[i]);
  }
  return total / static_cast<double>(truth.size());
}

double waic(std::span<const PosteriorSample> samples, const Dataset& data, const BlockGrid& grid,
            const ModelConfig& config) {
  config.validate();
  if (samples.size() < 2) throw InputError("WAIC needs at least two posterior samples");
  const auto M = samples.size();
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * config.sigma2);
  const auto& block_of = grid.block_of_observation();
  std::vector<double> logp(M);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int b = block_of[i];
    if (b < 0) continue;
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t s = 0; s < M; ++s) {
      const auto& theta = samples[s].thetas.at(samples[s].block_labels.at(b));
      const double r = data.responses[row] - data.covariates.row(row).dot(theta);
      logp[s] = log_norm - r * r / (2.0 * config.sigma2);
    }
    const double lppd = log_sum_exp(logp) - std::log(static_cast<double>(M));
    double mean = 0.0;
    for (double v : logp) mean += v;
    mean /= static_cast<double>(M);
    double var = 0.0;
    for (double v : logp) var += (v - mean) * (v - mean);
    var /= static_cast<double>(M - 1);
    total += lppd - var;
  }
  const double value = -2.0 * total;
  if (!std::isfinite(value)) throw NumericError("WAIC is not finite");
  return value;
}

std::size_t consensus_partition(std::span<const PosteriorSample> samples, const BlockGrid& grid) {
  if (samples.empty()) throw InputError("consensus needs at least one sample");
  // Identical partitions share one row of the distance computation.
  std::map<std::vector<int>, std::size_t> unique_index;
  std::vector<std::size_t> first_sample;
  std::vector<double> weight;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (static_cast<int>(samples[s].block_labels.size()) != grid.block_count()) {
      throw InputError("posterior sample does not match the block grid");
    }
    auto [it, inserted] = unique_index.try_emplace(samples[s].block_labels, first_sample.size());
    if (inserted) {
      first_sample.push_back(s);
      weight.push_back(0.0);
    }
    weight[it->second] += 1.0;
  }
  // A grid rebuilt without its data has no counts; weight blocks equally.
  std::vector<int> counts = grid.block_counts();
  if (std::all_of(counts.begin(), counts.end(), [](int c) { return c == 0; })) {
    counts.assign(counts.size(), 1);
  }
  const std::size_t U = first_sample.size();
  std::vector<double> score(U, 0.0);
  Eigen::MatrixXd table;
  for (std::size_t u = 0; u < U; ++u) {
    const auto& su = samples[first_sample[u]];
    for (std::size_t v = u + 1; v < U; ++v) {
      const auto& sv = samples[first_sample[v]];
      // Sample labels are already dense 0..k-1.
      table.setZero(su.k, sv.k);
      for (std::size_t b = 0; b < counts.size(); ++b) {
        table(su.block_labels[b], sv.block_labels[b]) += counts[b];
      }
      const double d = distance_from_overlaps(table).epsilon;
      score[u] += weight[v] * d;
      score[v] += weight[u] * d;
    }
  }
  std::size_t best = 0;
  for (std::size_t u = 1; u < U; ++u) {
    if (score[u] < score[best]) best = u;
  }
  return first_sample[best];
}

}  // namespace spatrpm
