#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/random.hpp"

namespace spatrpm {

// Fixed noise variance and g-prior scale. The prior on each cluster's
// coefficients is N(0, gamma * n * sigma2 * (X_j' X_j)^+), n the total
// observation count.
struct ModelConfig {
  double sigma2 = 1.0;
  double gamma = 1.0;

  void validate() const;
};

// Sufficient statistics of one cluster. Merging two disjoint clusters adds
// their statistics.
struct ClusterStats {
  Eigen::MatrixXd gram;  // sum x x'
  Eigen::VectorXd xty;   // sum x y
  double yty = 0.0;      // sum y^2
  long count = 0;

  static ClusterStats zero(int d);
  int dim() const { return static_cast<int>(xty.size()); }

  ClusterStats& operator+=(const ClusterStats& other);
  ClusterStats& operator-=(const ClusterStats& other);
  friend ClusterStats operator+(ClusterStats a, const ClusterStats& b) { return a += b; }
  friend ClusterStats operator-(ClusterStats a, const ClusterStats& b) { return a -= b; }
};

// Statistics of every active block. Dropped observations are skipped.
std::vector<ClusterStats> block_stats(const Dataset& data, const BlockGrid& grid);

// Sum of the given blocks' statistics, accumulated in the order given.
ClusterStats sum_blocks(std::span<const ClusterStats> blocks, std::span<const int> members);

// Statistics of cluster j under a block labelling, summed over observations.
ClusterStats cluster_stats(const Dataset& data, const BlockGrid& grid,
                           std::span<const int> block_labels, int j);

enum class SolvePath { kAuto, kDirect, kPseudoInverse };

// q = xty' gram^+ xty together with rank(gram). Eigenvalues below
// 1e-10 * trace/d count as zero. kAuto uses a Cholesky solve when the gram
// matrix has full rank and the eigen pseudoinverse otherwise; kDirect
// requires full rank.
struct ProjectionTerm {
  double q = 0.0;
  int rank = 0;
};
ProjectionTerm projection_term(const ClusterStats& stats, SolvePath path = SolvePath::kAuto);

// Global pieces of the collapsed likelihood for a fixed dataset.
struct LikelihoodConstants {
  double base = 0.0;      // -(n/2) log(2 pi sigma2) - y'y / (2 sigma2)
  double log_g1 = 0.0;    // log(gamma n + 1)
  double q_scale = 0.0;   // gamma n / (2 sigma2 (gamma n + 1))

  LikelihoodConstants(const ModelConfig& config, int n, double total_yty);

  // Contribution of one cluster: -(rank/2) log(gamma n + 1) + q_scale * q.
  double cluster_term(const ProjectionTerm& term) const {
    return -0.5 * term.rank * log_g1 + q_scale * term.q;
  }
};

// log p(y | partition) with the coefficients integrated out. With full-rank
// clusters this is
//   -(n/2) log(2 pi sigma2) - y'y/(2 sigma2) - (k d/2) log(gamma n + 1)
//   + gamma n / (2 sigma2 (gamma n + 1)) * sum_j xty_j' gram_j^+ xty_j.
// A rank-deficient cluster contributes its rank in place of d.
double integrated_log_likelihood(std::span<const ClusterStats> clusters, const ModelConfig& config,
                                 int n, double total_yty);

// log p(split) - log p(unsplit) when `parent` is divided into `a` and `b`.
double log_likelihood_delta_split(const ClusterStats& parent, const ClusterStats& a,
                                  const ClusterStats& b, const ModelConfig& config, int n);

// Conditional posterior of a cluster's coefficients:
//   N(gamma n/(gamma n + 1) gram^+ xty, gamma n sigma2/(gamma n + 1) gram^+).
Eigen::VectorXd posterior_mean_theta(const ClusterStats& stats, const ModelConfig& config, int n);
Eigen::VectorXd sample_theta_conditional(const ClusterStats& stats, const ModelConfig& config,
                                         int n, Rng& rng);

}  // namespace spatrpm
