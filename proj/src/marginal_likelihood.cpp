#include "spatrpm/marginal_likelihood.hpp"

#include <cmath>
#include <numbers>

namespace spatrpm {
namespace {

constexpr double kRankTolerance = 1e-10;

struct Spectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  double cutoff = 0.0;
  int rank = 0;
};

Spectrum spectrum_of(const Eigen::MatrixXd& gram) {
  Spectrum s;
  const int d = static_cast<int>(gram.rows());
  const double trace = gram.trace();
  if (d == 0 || !(trace > 0.0)) return s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of gram matrix failed");
  s.values = eig.eigenvalues();
  s.vectors = eig.eigenvectors();
  s.cutoff = kRankTolerance * trace / d;
  for (int i = 0; i < d; ++i) {
    if (s.values[i] > s.cutoff) ++s.rank;
  }
  return s;
}

}  // namespace

void ModelConfig::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InputError("sigma2 must be positive");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be positive");
}

ClusterStats ClusterStats::zero(int d) {
  ClusterStats s;
  s.gram = Eigen::MatrixXd::Zero(d, d);
  s.xty = Eigen::VectorXd::Zero(d);
  return s;
}

ClusterStats& ClusterStats::operator+=(const ClusterStats& other) {
  gram += other.gram;
  xty += other.xty;
  yty += other.yty;
  count += other.count;
  return *this;
}

ClusterStats& ClusterStats::operator-=(const ClusterStats& other) {
  gram -= other.gram;
  xty -= other.xty;
  yty -= other.yty;
  count -= other.count;
  return *this;
}

std::vector<ClusterStats> block_stats(const Dataset& data, const BlockGrid& grid) {
  std::vector<ClusterStats> out(grid.block_count(), ClusterStats::zero(data.dim()));
  const auto& block_of = grid.block_of_observation();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int b = block_of[i];
    if (b < 0) continue;
    const auto row = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd x = data.covariates.row(row).transpose();
    const double y = data.responses[row];
    out[b].gram.noalias() += x * x.transpose();
    out[b].xty.noalias() += x * y;
    out[b].yty += y * y;
    ++out[b].count;
  }
  return out;
}

ClusterStats sum_blocks(std::span<const ClusterStats> blocks, std::span<const int> members) {
  ClusterStats s = ClusterStats::zero(blocks.empty() ? 0 : blocks.front().dim());
  for (int b : members) s += blocks[b];
  return s;
}

ClusterStats cluster_stats(const Dataset& data, const BlockGrid& grid,
                           std::span<const int> block_labels, int j) {
  ClusterStats s = ClusterStats::zero(data.dim());
  const auto& block_of = grid.block_of_observation();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int b = block_of[i];
    if (b < 0 || block_labels[b] != j) continue;
    const auto row = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd x = data.covariates.row(row).transpose();
    const double y = data.responses[row];
    s.gram.noalias() += x * x.transpose();
    s.xty.noalias() += x * y;
    s.yty += y * y;
    ++s.count;
  }
  return s;
}

ProjectionTerm projection_term(const ClusterStats& stats, SolvePath path) {
  const int d = stats.dim();
  if (path == SolvePath::kDirect) {
    Eigen::LLT<Eigen::MatrixXd> llt(stats.gram);
    if (llt.info() != Eigen::Success) throw NumericError("gram matrix is not positive definite");
    return {stats.xty.dot(llt.solve(stats.xty)), d};
  }
  const Spectrum s = spectrum_of(stats.gram);
  if (path == SolvePath::kAuto && s.rank == d) {
    Eigen::LLT<Eigen::MatrixXd> llt(stats.gram);
    if (llt.info() == Eigen::Success) return {stats.xty.dot(llt.solve(stats.xty)), d};
  }
  ProjectionTerm term{0.0, s.rank};
  for (int i = 0; i < static_cast<int>(s.values.size()); ++i) {
    if (s.values[i] <= s.cutoff) continue;
    const double c = s.vectors.col(i).dot(stats.xty);
    term.q += c * c / s.values[i];
  }
  return term;
}

LikelihoodConstants::LikelihoodConstants(const ModelConfig& config, int n, double total_yty) {
  config.validate();
  if (n < 1) throw InputError("likelihood needs at least one observation");
  const double g = config.gamma * n;
  base = -0.5 * n * std::log(2.0 * std::numbers::pi * config.sigma2) -
         total_yty / (2.0 * config.sigma2);
  log_g1 = std::log1p(g);
  q_scale = g / (2.0 * config.sigma2 * (g + 1.0));
}

double integrated_log_likelihood(std::span<const ClusterStats> clusters, const ModelConfig& config,
                                 int n, double total_yty) {
  const LikelihoodConstants c(config, n, total_yty);
  long counted = 0;
  double value = c.base;
  for (std::size_t j = 0; j < clusters.size(); ++j) {
    const double term = c.cluster_term(projection_term(clusters[j]));
    if (!std::isfinite(term)) {
      throw NumericError("non-finite likelihood term in cluster " + std::to_string(j));
    }
    value += term;
    counted += clusters[j].count;
  }
  if (counted != n) {
    throw InputError("cluster counts sum to " + std::to_string(counted) + ", expected " +
                     std::to_string(n));
  }
  if (!std::isfinite(value)) throw NumericError("non-finite integrated log-likelihood");
  return value;
}

double log_likelihood_delta_split(const ClusterStats& parent, const ClusterStats& a,
                                  const ClusterStats& b, const ModelConfig& config, int n) {
  if (a.count + b.count != parent.count) {
    throw InputError("child cluster counts do not add up to the parent count");
  }
  const double scale = std::max(1.0, parent.gram.cwiseAbs().maxCoeff());
  if (((a.gram + b.gram) - parent.gram).cwiseAbs().maxCoeff() > 1e-9 * scale ||
      ((a.xty + b.xty) - parent.xty).cwiseAbs().maxCoeff() >
          1e-9 * std::max(1.0, parent.xty.cwiseAbs().maxCoeff())) {
    throw InputError("child cluster statistics do not add up to the parent");
  }
  const LikelihoodConstants c(config, n, 0.0);
  return c.cluster_term(projection_term(a)) + c.cluster_term(projection_term(b)) -
         c.cluster_term(projection_term(parent));
}

Eigen::VectorXd posterior_mean_theta(const ClusterStats& stats, const ModelConfig& config, int n) {
  config.validate();
  if (stats.count < 1) throw InputError("cannot sample coefficients of an empty cluster");
  const double g = config.gamma * n;
  const double shrink = g / (g + 1.0);
  const Spectrum s = spectrum_of(stats.gram);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(stats.dim());
  for (int i = 0; i < static_cast<int>(s.values.size()); ++i) {
    if (s.values[i] <= s.cutoff) continue;
    mean += s.vectors.col(i) * (s.vectors.col(i).dot(stats.xty) / s.values[i]);
  }
  return shrink * mean;
}

Eigen::VectorXd sample_theta_conditional(const ClusterStats& stats, const ModelConfig& config,
                                         int n, Rng& rng) {
  Eigen::VectorXd theta = posterior_mean_theta(stats, config, n);
  const double g = config.gamma * n;
  const double sd = std::sqrt(g * config.sigma2 / (g + 1.0));
  const Spectrum s = spectrum_of(stats.gram);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Draw along the eigenbasis so a rank-deficient gram gives a draw
  // supported on its range, matching the pseudoinverse covariance.
  for (int i = 0; i < static_cast<int>(s.values.size()); ++i) {
    const double z = normal(rng);
    if (s.values[i] <= s.cutoff) continue;
    theta += s.vectors.col(i) * (sd * z / std::sqrt(s.values[i]));
  }
  return theta;
}

}  // namespace spatrpm
