#include "spatrpm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "spatrpm/predictor.hpp"

namespace spatrpm {
namespace {

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  return empirical_quantile(std::move(values), 0.5);
}

std::vector<PosteriorSample> merge_samples(std::vector<ChainResult>& chains) {
  std::vector<PosteriorSample> out;
  for (auto& c : chains) {
    for (auto& s : c.samples) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::optional<int> ushape_membership(const Location& s) {
  if (!in_unit_square(s)) return std::nullopt;
  constexpr double lo = 1.0 / 3.0;
  constexpr double hi = 2.0 / 3.0;
  if (s.v >= hi) return 0;
  if (s.v <= lo) return 1;
  if (s.h <= lo) return 2;
  return std::nullopt;
}

std::vector<Eigen::VectorXd> ushape_true_thetas() {
  return {Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(2.0, -1.0)};
}

SimulatedData generate_ushape_data(int n, Rng& rng) {
  if (n < 1) throw InputError("sample size must be positive");
  const auto thetas = ushape_true_thetas();
  std::normal_distribution<double> noise(0.0, std::sqrt(kUShapeNoiseVariance));
  SimulatedData sim;
  sim.data.covariates.resize(n, 2);
  sim.data.responses.resize(n);
  sim.data.covariate_names = {"x1", "x2"};
  sim.true_means.resize(n);
  for (int i = 0; i < n; ++i) {
    Location s;
    std::optional<int> region;
    do {
      s = {uniform(rng), uniform(rng)};
      region = ushape_membership(s);
    } while (!region);
    const Eigen::Vector2d x(1.0, uniform(rng, -1.0, 1.0));
    sim.data.locations.push_back(s);
    sim.regions.push_back(*region);
    sim.data.covariates.row(i) = x.transpose();
    sim.true_means[i] = x.dot(thetas[*region]);
    sim.data.responses[i] = sim.true_means[i] + noise(rng);
  }
  return sim;
}

SimulatedData generate_ushape_data(int n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return generate_ushape_data(n, rng);
}

HyperParams select_hyperparams(int n, const RateConstants& constants) {
  if (n < 3) throw InputError("rate-based hyperparameters need n >= 3");
  if (!(constants.c_b > 0.0) || !(constants.c_p > 0.0)) {
    throw InputError("rate constants c_b and c_p must be positive");
  }
  const double log_n = std::log(static_cast<double>(n));
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  HyperParams hp;
  hp.constants = constants;
  const double k_real = constants.c_b * sqrt_n * std::pow(log_n, -0.5 * (1.0 + constants.alpha_b));
  hp.K = std::max(1, static_cast<int>(std::floor(k_real)));
  hp.log_lambda = -constants.c_p * static_cast<double>(n) * std::pow(log_n, -constants.alpha_p);
  if (hp.K > static_cast<int>(std::floor(sqrt_n))) {
    hp.warnings.push_back("K=" + std::to_string(hp.K) + " exceeds sqrt(n)=" +
                          std::to_string(sqrt_n) + "; blocks will hold very few observations");
  }
  return hp;
}

std::uint64_t sweep_data_seed(std::uint64_t seed, int n) {
  return seed * 1000003ULL + static_cast<std::uint64_t>(n) * 2ULL;
}

std::uint64_t sweep_test_seed(std::uint64_t seed, int n) {
  return seed * 1000003ULL + static_cast<std::uint64_t>(n) * 2ULL + 1ULL;
}

SweepResult run_asymptotic_sweep(const SweepConfig& config) {
  SweepResult result;
  const auto truth = ushape_true_thetas();
  const UShapeReference ref;
  for (int n : config.n_grid) {
    const auto start = std::chrono::steady_clock::now();
    const SimulatedData sim = generate_ushape_data(n, sweep_data_seed(config.seed, n));
    const SimulatedData test = generate_ushape_data(config.test_points, sweep_test_seed(config.seed, n));
    const HyperParams hp = select_hyperparams(n, config.constants);
    const BlockGrid grid = build_grid(sim.data, hp.K, config.grid_options);
    const PosteriorModel model(sim.data, grid, config.model);
    SamplerConfig sampler = config.sampler;
    sampler.log_lambda = hp.log_lambda;
    auto chains = run_chains(model, sampler, config.threads);
    const auto samples = merge_samples(chains);

    const DomainLattice lattice(grid, ref, config.lattice_resolution);
    const Eigen::MatrixXd predicted =
        predict_means(samples, grid, test.data.locations, test.data.covariates);
    const auto e3 = prediction_error_e3(predicted, test.true_means, config.alpha0,
                                        config.constants.alpha_b, n);
    SweepSummary summary;
    summary.n = n;
    summary.K = hp.K;
    summary.log_lambda = hp.log_lambda;
    summary.samples = static_cast<int>(samples.size());
    std::vector<double> ks, e1s, e2s;
    int hits = 0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const auto errs = normalized_errors(samples[s], lattice, truth, config.alpha0,
                                          config.constants.alpha_b, n);
      result.rows.push_back({n, hp.K, hp.log_lambda, samples[s].iteration, samples[s].k, errs.e1,
                             errs.e2, e3[s]});
      ks.push_back(samples[s].k);
      e1s.push_back(errs.e1);
      e2s.push_back(errs.e2);
      if (samples[s].k == ref.k0()) ++hits;
    }
    if (!samples.empty()) {
      summary.fraction_k_true = static_cast<double>(hits) / static_cast<double>(samples.size());
      summary.median_k = median(ks);
      summary.median_e1 = median(e1s);
      summary.median_e2 = median(e2s);
      summary.median_e3 = median(e3);
      summary.mae = mae(predicted, test.true_means);
      summary.crps = mean_crps(predicted, test.true_means);
    }
    summary.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.summaries.push_back(summary);
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "n,K,log_lambda,iter,k,e1,e2,e3\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.n << ',' << r.K << ',' << r.log_lambda << ',' << r.iteration << ',' << r.k << ','
        << r.e1 << ',' << r.e2 << ',' << r.e3 << '\n';
  }
}

void write_sweep_summary_csv(std::ostream& out, const std::vector<SweepSummary>& summaries) {
  out << "n,K,log_lambda,samples,fraction_k_true,median_k,median_e1,median_e2,median_e3,mae,"
         "crps,seconds\n"
      << std::setprecision(10);
  for (const auto& s : summaries) {
    out << s.n << ',' << s.K << ',' << s.log_lambda << ',' << s.samples << ','
        << s.fraction_k_true << ',' << s.median_k << ',' << s.median_e1 << ',' << s.median_e2
        << ',' << s.median_e3 << ',' << s.mae << ',' << s.crps << ',' << s.seconds << '\n';
  }
}

WaicSearchResult waic_grid_search(const Dataset& data, const WaicSearchConfig& config) {
  if (config.c_b_grid.empty() || config.c_p_grid.empty()) {
    throw InputError("WAIC grid search needs at least one (c_b, c_p) cell");
  }
  WaicSearchResult result;
  const int n = static_cast<int>(data.size());
  for (double c_b : config.c_b_grid) {
    for (double c_p : config.c_p_grid) {
      const HyperParams hp =
          select_hyperparams(n, {c_b, config.alpha_b, c_p, config.alpha_p});
      const BlockGrid grid = build_grid(data, hp.K, config.grid_options);
      const PosteriorModel model(data, grid, config.model);
      SamplerConfig sampler = config.sampler;
      sampler.log_lambda = hp.log_lambda;
      auto chains = run_chains(model, sampler, config.threads);
      const auto samples = merge_samples(chains);
      WaicCell cell{c_b, c_p, hp.K, hp.log_lambda, 0.0, 0.0};
      cell.waic = waic(samples, data, grid, config.model);
      for (const auto& s : samples) cell.mean_k += s.k;
      cell.mean_k /= static_cast<double>(samples.size());
      result.cells.push_back(cell);
    }
  }
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    if (result.cells[i].waic < result.cells[result.best].waic) result.best = i;
  }
  return result;
}

void write_waic_csv(std::ostream& out, const WaicSearchResult& result) {
  out << "c_b,c_p,K,log_lambda,waic,mean_k,best\n" << std::setprecision(10);
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& c = result.cells[i];
    out << c.c_b << ',' << c.c_p << ',' << c.K << ',' << c.log_lambda << ',' << c.waic << ','
        << c.mean_k << ',' << (i == result.best ? 1 : 0) << '\n';
  }
}

}  // namespace spatrpm
