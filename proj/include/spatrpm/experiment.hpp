#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/marginal_likelihood.hpp"
#include "spatrpm/mcmc_sampler.hpp"
#include "spatrpm/metrics.hpp"

namespace spatrpm {

// U-shaped domain: the unit square minus the notch (1/3, 1] x (1/3, 2/3).
//   region 0 (upper arm):  s_v >= 2/3
//   region 1 (lower arm):  s_v <= 1/3
//   region 2 (connector):  1/3 < s_v < 2/3, s_h <= 1/3
std::optional<int> ushape_membership(const Location& s);

class UShapeReference final : public ReferencePartition {
 public:
  int k0() const override { return 3; }
  std::optional<int> membership(const Location& s) const override {
    return ushape_membership(s);
  }
};

inline constexpr double kUShapeNoiseVariance = 9.0;

// (0,1), (1,0), (2,-1) for regions 0, 1, 2.
std::vector<Eigen::VectorXd> ushape_true_thetas();

struct SimulatedData {
  Dataset data;
  std::vector<int> regions;  // 0-based region per observation
  Eigen::VectorXd true_means;
};

// Locations uniform on the U-shape (rejection sampling), x = (1, Unif(-1,1)),
// y = x' theta_region + N(0, 9).
SimulatedData generate_ushape_data(int n, Rng& rng);
SimulatedData generate_ushape_data(int n, std::uint64_t seed);

struct RateConstants {
  double c_b = 5.0;
  double alpha_b = 1.0;
  double c_p = 0.1;
  double alpha_p = 0.5;
};

struct HyperParams {
  RateConstants constants;
  int K = 1;
  double log_lambda = 0.0;
  std::vector<std::string> warnings;
};

// K = floor(c_b sqrt(n) log^{-(1+alpha_b)/2} n), at least 1, and
// log lambda = -c_p n log^{-alpha_p} n. lambda itself is never formed.
HyperParams select_hyperparams(int n, const RateConstants& constants);

struct SweepConfig {
  std::vector<int> n_grid{500, 1000, 2000};
  RateConstants constants;
  ModelConfig model;
  SamplerConfig sampler;  // log_lambda is overwritten per n
  std::uint64_t seed = 1;
  double alpha0 = 0.1;
  int test_points = 5000;
  int lattice_resolution = 500;
  GridOptions grid_options{.restrict_to_largest_component = true};
  int threads = 1;
};

struct SweepRow {
  int n = 0;
  int K = 0;
  double log_lambda = 0.0;
  long iteration = 0;
  int k = 0;
  double e1 = 0.0;
  double e2 = 0.0;
  double e3 = 0.0;
};

struct SweepSummary {
  int n = 0;
  int K = 0;
  double log_lambda = 0.0;
  int samples = 0;
  double fraction_k_true = 0.0;  // share of samples with k = 3
  double median_k = 0.0;
  double median_e1 = 0.0;
  double median_e2 = 0.0;
  double median_e3 = 0.0;
  double mae = 0.0;
  double crps = 0.0;
  double seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summaries;
};

// Seeds for one sweep entry: data and test-set streams are derived from
// (seed, n) so entries are reproducible on their own.
std::uint64_t sweep_data_seed(std::uint64_t seed, int n);
std::uint64_t sweep_test_seed(std::uint64_t seed, int n);

// For each n: simulate, pick (K, log lambda) by the rate formulas, fit, and
// score every retained sample.
SweepResult run_asymptotic_sweep(const SweepConfig& config);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_sweep_summary_csv(std::ostream& out, const std::vector<SweepSummary>& summaries);

struct WaicCell {
  double c_b = 0.0;
  double c_p = 0.0;
  int K = 0;
  double log_lambda = 0.0;
  double waic = 0.0;
  double mean_k = 0.0;
};

struct WaicSearchResult {
  std::vector<WaicCell> cells;
  std::size_t best = 0;
};

struct WaicSearchConfig {
  std::vector<double> c_b_grid{1.0, 3.0, 5.0, 7.0};
  std::vector<double> c_p_grid{0.01, 0.1, 0.5};
  double alpha_b = 1.0;
  double alpha_p = 0.5;
  ModelConfig model;
  SamplerConfig sampler;  // log_lambda is overwritten per cell
  GridOptions grid_options{.restrict_to_largest_component = true};
  int threads = 1;
};

// Fits every (c_b, c_p) cell with the same sampler seed and returns the cell
// with the smallest WAIC (ties to the earlier cell).
WaicSearchResult waic_grid_search(const Dataset& data, const WaicSearchConfig& config);

void write_waic_csv(std::ostream& out, const WaicSearchResult& result);

}  // namespace spatrpm
