#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/marginal_likelihood.hpp"
#include "spatrpm/mcmc_sampler.hpp"

namespace spatrpm {

// An analytic partition of a domain inside [0,1]^2. membership() returns a
// 0-based region index, or nothing for points outside the domain.
class ReferencePartition {
 public:
  virtual ~ReferencePartition() = default;
  virtual int k0() const = 0;
  virtual std::optional<int> membership(const Location& s) const = 0;
};

// Set-matching distance and its two halves:
//   eps1 = 1 - sum_j max_l |A_j ∩ B_l| / |D|,  eps2 = 1 - sum_l max_j |A_j ∩ B_l| / |D|.
struct PartitionDistance {
  double epsilon = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
};

// From a k1 x k2 table of intersection sizes (counts or areas).
PartitionDistance distance_from_overlaps(const Eigen::MatrixXd& overlaps);

// Distance between two labellings of the same point set. Labels need not be
// contiguous.
PartitionDistance epsilon_n_parts(std::span<const int> a, std::span<const int> b);
double epsilon_n(std::span<const int> a, std::span<const int> b);

// Two block partitions on one grid: intersection areas are shared block
// counts times K^-2, so no lattice is needed.
PartitionDistance epsilon_blocks(std::span<const int> a, std::span<const int> b);

// Lattice of resolution x resolution cell-centred points, tallied once per
// (grid, reference) so each posterior sample costs O(blocks * k0).
class DomainLattice {
 public:
  DomainLattice(const BlockGrid& grid, const ReferencePartition& ref, int resolution = 500);

  // k x k0 lattice-point overlaps of a sample's clusters with the regions,
  // restricted to points inside the reference domain.
  Eigen::MatrixXd overlaps(const PosteriorSample& sample) const;
  PartitionDistance epsilon(const PosteriorSample& sample) const;
  // Region index (0-based) with the largest overlap per cluster; ties go to
  // the smaller index.
  std::vector<int> matched_index(const PosteriorSample& sample) const;

  long inside_count() const { return inside_; }
  int k0() const { return k0_; }

 private:
  int k0_;
  long inside_ = 0;
  Eigen::MatrixXd block_region_;  // blocks x k0 lattice counts
};

PartitionDistance epsilon_domain(const PosteriorSample& sample, const BlockGrid& grid,
                                 const ReferencePartition& ref, int resolution = 500);
std::vector<int> matched_index(const PosteriorSample& sample, const BlockGrid& grid,
                               const ReferencePartition& ref, int resolution = 500);

// log^(alpha0 + (1 + alpha_b)/2)(n), evaluated as exp(power * log log n).
double rate_denominator(int n, double alpha0, double alpha_b);

struct NormalizedErrors {
  double e1 = 0.0;  // sqrt(n) eps / denominator
  double e2 = 0.0;  // sqrt(n) max_j ||theta_j - theta_{M(j),0}|| / denominator
};

NormalizedErrors normalized_errors(const PosteriorSample& sample, const DomainLattice& lattice,
                                   std::span<const Eigen::VectorXd> true_thetas, double alpha0,
                                   double alpha_b, int n);
NormalizedErrors normalized_errors(const PosteriorSample& sample, const BlockGrid& grid,
                                   const ReferencePartition& ref,
                                   std::span<const Eigen::VectorXd> true_thetas, double alpha0,
                                   double alpha_b, int n, int resolution = 500);

// M x N matrix of predicted regression means, one row per sample.
Eigen::MatrixXd predict_means(std::span<const PosteriorSample> samples, const BlockGrid& grid,
                              std::span<const Location> locations,
                              const Eigen::MatrixXd& covariates);

// sqrt(n) * ||mu_s - mu_0||^2 / N / denominator for each sample s.
std::vector<double> prediction_error_e3(const Eigen::MatrixXd& predicted,
                                        const Eigen::VectorXd& true_means, double alpha0,
                                        double alpha_b, int n);

// N^-1 || M^-1 sum_s (mu_s - mu_0) ||_1.
double mae(const Eigen::MatrixXd& predicted, const Eigen::VectorXd& true_means);

// Ensemble estimator mean|m_s - y| - (1/2) mean_{s,s'} |m_s - m_s'|.
double crps(std::span<const double> ensemble, double y);

// Mean CRPS over columns of `predicted` against `truth`.
double mean_crps(const Eigen::MatrixXd& predicted, const Eigen::VectorXd& truth);

// -2 sum_i [log mean_s p_is - var_s log p_is] with p_is the Gaussian density
// of y_i under sample s and the model's sigma2.
double waic(std::span<const PosteriorSample> samples, const Dataset& data, const BlockGrid& grid,
            const ModelConfig& config);

// Index of the sample whose partition of the observed locations has the
// smallest mean epsilon_n to all samples. Ties go to the earliest sample.
// Blocks are weighted by their observation counts, or equally when the grid
// carries none.
std::size_t consensus_partition(std::span<const PosteriorSample> samples, const BlockGrid& grid);

}  // namespace spatrpm
