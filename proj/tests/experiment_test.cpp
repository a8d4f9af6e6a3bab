#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "spatrpm/experiment.hpp"

using namespace spatrpm;

TEST(UShape, MembershipExamples) {
  EXPECT_EQ(ushape_membership({0.5, 0.9}), 0);
  EXPECT_EQ(ushape_membership({0.5, 0.1}), 1);
  EXPECT_EQ(ushape_membership({0.2, 0.5}), 2);
  EXPECT_FALSE(ushape_membership({0.5, 0.5}).has_value());
  EXPECT_FALSE(ushape_membership({1.5, 0.5}).has_value());
  // Boundary lines of the arms belong to the arms.
  EXPECT_EQ(ushape_membership({0.9, 2.0 / 3.0}), 0);
  EXPECT_EQ(ushape_membership({0.9, 1.0 / 3.0}), 1);
}

TEST(UShape, GeneratedRegionsAgreeWithMembership) {
  const SimulatedData sim = generate_ushape_data(2000, 3);
  const auto theta = ushape_true_thetas();
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    ASSERT_EQ(ushape_membership(sim.data.locations[i]), sim.regions[i]);
    const Eigen::VectorXd x = sim.data.covariates.row(static_cast<Eigen::Index>(i)).transpose();
    EXPECT_EQ(x[0], 1.0);
    EXPECT_GE(x[1], -1.0);
    EXPECT_LE(x[1], 1.0);
    EXPECT_DOUBLE_EQ(sim.true_means[i], x.dot(theta[sim.regions[i]]));
  }
}

TEST(UShape, RegionProportionsMatchAreas) {
  const int n = 10000;
  const SimulatedData sim = generate_ushape_data(n, 11);
  // Areas 1/3, 1/3, 1/9 out of a total of 7/9.
  const double expected[] = {3.0 / 7.0, 3.0 / 7.0, 1.0 / 7.0};
  int counts[3] = {0, 0, 0};
  for (int r : sim.regions) ++counts[r];
  for (int r = 0; r < 3; ++r) {
    const double sd = std::sqrt(n * expected[r] * (1 - expected[r]));
    EXPECT_LT(std::abs(counts[r] - n * expected[r]), 3 * sd) << r;
  }
}

TEST(UShape, NoiseVarianceIsNine) {
  const SimulatedData sim = generate_ushape_data(10000, 12);
  const Eigen::VectorXd resid = sim.data.responses - sim.true_means;
  const double mean = resid.mean();
  const double var = (resid.array() - mean).square().sum() / (resid.size() - 1);
  EXPECT_NEAR(var, 9.0, 0.5);
}

TEST(UShape, SeededGenerationRepeats) {
  const SimulatedData a = generate_ushape_data(300, 5), b = generate_ushape_data(300, 5);
  EXPECT_EQ(a.data.covariates, b.data.covariates);
  EXPECT_EQ(a.data.responses, b.data.responses);
  EXPECT_NE(a.data.responses, generate_ushape_data(300, 6).data.responses);
}

TEST(SelectHyperparams, PublishedConstantsAtN4000) {
  const HyperParams hp = select_hyperparams(4000, {5.0, 1.0, 0.1, 0.5});
  EXPECT_EQ(hp.K, 38);
  EXPECT_NEAR(hp.log_lambda, -138.9, 0.1);
  EXPECT_NEAR(hp.log_lambda, -400.0 / std::sqrt(std::log(4000.0)), 1e-9);
  EXPECT_TRUE(hp.warnings.empty());
}

TEST(SelectHyperparams, WarnsWhenKExceedsSqrtN) {
  const HyperParams hp = select_hyperparams(400, {40.0, 1.0, 0.1, 0.5});
  EXPECT_GT(hp.K, 20);
  ASSERT_EQ(hp.warnings.size(), 1u);
}

TEST(SelectHyperparams, KNondecreasingInN) {
  int last = 0;
  for (int n : {100, 500, 1000, 2000, 3000, 4000}) {
    const int K = select_hyperparams(n, {}).K;
    EXPECT_GE(K, last);
    last = K;
  }
  EXPECT_THROW(select_hyperparams(2, {}), InputError);
  EXPECT_GE(select_hyperparams(3, {0.01, 1.0, 0.1, 0.5}).K, 1);
}

namespace {

SamplerConfig quick_sampler() {
  SamplerConfig s;
  s.n_iters = 2000;
  s.burn_in = 1000;
  s.thinning = 10;
  return s;
}

}  // namespace

TEST(Sweep, DeterministicAndTidy) {
  SweepConfig cfg;
  cfg.n_grid = {200, 300};
  cfg.sampler = quick_sampler();
  cfg.test_points = 200;
  cfg.lattice_resolution = 100;
  const SweepResult a = run_asymptotic_sweep(cfg);
  const SweepResult b = run_asymptotic_sweep(cfg);
  ASSERT_EQ(a.summaries.size(), 2u);
  EXPECT_EQ(a.rows.size(), 200u);
  std::ostringstream ca, cb;
  write_sweep_csv(ca, a.rows);
  write_sweep_csv(cb, b.rows);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(ca.str().substr(0, ca.str().find('\n')), "n,K,log_lambda,iter,k,e1,e2,e3");
  for (const auto& r : a.rows) {
    EXPECT_GE(r.e1, 0.0);
    EXPECT_GE(r.e2, 0.0);
    EXPECT_GE(r.e3, 0.0);
  }
  std::ostringstream summary;
  write_sweep_summary_csv(summary, a.summaries);
  EXPECT_NE(summary.str().find("fraction_k_true"), std::string::npos);
}

TEST(WaicSearch, SingleCellAndIdenticalCells) {
  const SimulatedData sim = generate_ushape_data(300, 21);
  WaicSearchConfig cfg;
  cfg.sampler = quick_sampler();
  cfg.c_b_grid = {3.0};
  cfg.c_p_grid = {0.1};
  const auto one = waic_grid_search(sim.data, cfg);
  ASSERT_EQ(one.cells.size(), 1u);
  EXPECT_EQ(one.best, 0u);
  EXPECT_TRUE(std::isfinite(one.cells[0].waic));

  cfg.c_p_grid = {0.1, 0.1};
  const auto twin = waic_grid_search(sim.data, cfg);
  ASSERT_EQ(twin.cells.size(), 2u);
  EXPECT_EQ(twin.cells[0].waic, twin.cells[1].waic);
  EXPECT_EQ(twin.best, 0u);
}

TEST(WaicSearch, PicksTheMinimumOfTheTable) {
  const SimulatedData sim = generate_ushape_data(300, 22);
  WaicSearchConfig cfg;
  cfg.sampler = quick_sampler();
  cfg.c_b_grid = {1.0, 3.0};
  cfg.c_p_grid = {0.01, 0.5};
  const auto r = waic_grid_search(sim.data, cfg);
  ASSERT_EQ(r.cells.size(), 4u);
  for (const auto& c : r.cells) EXPECT_LE(r.cells[r.best].waic, c.waic);
  EXPECT_EQ(r.cells[1].c_b, 1.0);
  EXPECT_EQ(r.cells[1].c_p, 0.5);
  std::ostringstream out;
  write_waic_csv(out, r);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "c_b,c_p,K,log_lambda,waic,mean_k,best");
}
