// spatrpm: fit, predict, evaluate, simulate, sweep and waic-select.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or input error. Errors
// are reported as one JSON line on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/experiment.hpp"
#include "spatrpm/mcmc_sampler.hpp"
#include "spatrpm/metrics.hpp"
#include "spatrpm/posterior_io.hpp"
#include "spatrpm/predictor.hpp"
#include "spatrpm/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spatrpm;

namespace {

constexpr const char* kSamplesFile = "samples.jsonl";
constexpr const char* kDiagnosticsFile = "diagnostics.json";
constexpr const char* kManifestFile = "manifest.json";

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::vector<PosteriorSample> flatten(std::vector<ChainResult>& chains) {
  std::vector<PosteriorSample> out;
  for (auto& c : chains) {
    for (auto& s : c.samples) out.push_back(std::move(s));
  }
  return out;
}

// Sampler flags shared by fit, sweep and waic-select. Unset flags keep the
// value already in the config.
struct SamplerFlags {
  std::optional<long> iterations, burn_in, thinning;
  std::optional<std::uint64_t> seed;
  std::optional<int> k_max, chains;
  std::optional<double> sigma2, gamma;

  void add(CLI::App* app) {
    app->add_option("--iterations", iterations, "MCMC iterations");
    app->add_option("--burn-in", burn_in, "burn-in iterations");
    app->add_option("--thinning", thinning, "keep every n-th post-burn-in state");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--k-max", k_max, "maximum number of clusters");
    app->add_option("--chains", chains, "number of independent chains");
    app->add_option("--sigma2", sigma2, "fixed noise variance");
    app->add_option("--gamma", gamma, "g-prior scale");
  }

  void apply(RunConfig& c) const {
    if (iterations) c.sampler.n_iters = *iterations;
    if (burn_in) c.sampler.burn_in = *burn_in;
    if (thinning) c.sampler.thinning = *thinning;
    if (seed) c.sampler.seed = *seed;
    if (k_max) c.sampler.k_max = *k_max;
    if (chains) c.sampler.n_chains = *chains;
    if (sigma2) c.model.sigma2 = *sigma2;
    if (gamma) c.model.gamma = *gamma;
    c.model.validate();
    c.sampler.validate();
  }
};

RunConfig load_config(const std::string& path) {
  return path.empty() ? parse_config(json()) : parse_config_file(path);
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<int> K;
  std::optional<double> log_lambda;
  std::optional<int> threads;
  SamplerFlags sampler;
};

int run_fit(const FitArgs& args) {
  RunConfig cfg = load_config(args.config);
  args.sampler.apply(cfg);
  if (!args.data.empty()) cfg.data_path = args.data;
  if (!args.out.empty()) cfg.output_dir = args.out;
  if (args.threads) cfg.threads = *args.threads;
  if (args.K || args.log_lambda) {
    if (!cfg.hyper.explicit_values && !args.config.empty() &&
        read_json_file(args.config).contains("hyper")) {
      throw InputError("--K/--log-lambda conflict with rate constants in the config");
    }
    cfg.hyper.explicit_values = true;
    if (args.K) cfg.hyper.K = *args.K;
    if (args.log_lambda) cfg.hyper.log_lambda = *args.log_lambda;
  }
  if (cfg.data_path.empty()) throw InputError("no dataset given (--data or io.data)");
  if (cfg.output_dir.empty()) throw InputError("no output directory given (--out or io.output_dir)");

  const Dataset data = read_dataset_csv(cfg.data_path);
  const HyperParams hp = cfg.hyper.resolve(static_cast<int>(data.size()));
  for (const auto& w : hp.warnings) std::cerr << "warning: " << w << '\n';
  const BlockGrid grid = build_grid(data, hp.K, cfg.grid);
  if (grid.component_count() > 1) {
    std::cerr << "warning: active graph had " << grid.component_count()
              << " components; fitting the largest (" << grid.block_count() << " blocks, "
              << grid.observation_count() << " observations)\n";
  }
  cfg.sampler.log_lambda = hp.log_lambda;
  const PosteriorModel model(data, grid, cfg.model);
  auto chains = run_chains(model, cfg.sampler, cfg.threads);

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  std::vector<ChainDiagnostics> diags;
  for (const auto& c : chains) diags.push_back(c.diagnostics);
  const auto samples = flatten(chains);
  {
    auto out = open_output(dir / kSamplesFile);
    write_samples_jsonl(out, samples);
  }
  {
    auto out = open_output(dir / kDiagnosticsFile);
    out << diagnostics_to_json(diags).dump() << '\n';
  }
  {
    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["resolved"] = {{"K", hp.K},
                            {"log_lambda", hp.log_lambda},
                            {"n", data.size()},
                            {"n_used", grid.observation_count()},
                            {"d", data.dim()},
                            {"covariates", data.covariate_names},
                            {"samples", samples.size()}};
    manifest["grid"] = grid_to_json(grid);
    auto out = open_output(dir / kManifestFile);
    out << manifest.dump(2) << '\n';
  }
  std::cout << "wrote " << samples.size() << " samples to " << (dir / kSamplesFile).string()
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct FittedModel {
  json manifest;
  BlockGrid grid;
  std::vector<PosteriorSample> samples;
};

FittedModel load_fit(const std::string& fit_dir) {
  const fs::path dir(fit_dir);
  json manifest = read_json_file(dir / kManifestFile);
  BlockGrid grid = grid_from_json(manifest.at("grid"));
  auto samples = read_samples_jsonl((dir / kSamplesFile).string());
  if (samples.empty()) throw InputError("fit directory holds no posterior samples");
  return {std::move(manifest), std::move(grid), std::move(samples)};
}

int run_predict(const std::string& fit_dir, const std::string& points_path,
                const std::string& output) {
  const FittedModel fit = load_fit(fit_dir);
  const PointSet points = read_points_csv(points_path);
  auto out = open_output(output);
  out << "s_h,s_v,mean,q05,q95,modal_cluster\n" << std::setprecision(10);
  for (std::size_t i = 0; i < points.locations.size(); ++i) {
    const PredictionRequest req{points.locations[i],
                                points.covariates.row(static_cast<Eigen::Index>(i)).transpose()};
    const auto dist = predict_mean(fit.samples, fit.grid, req);
    out << req.location.h << ',' << req.location.v << ',' << dist.mean << ',' << dist.q05 << ','
        << dist.q95 << ',' << dist.modal_label + 1 << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string fit_dir;
  std::string reference = "ushape";
  std::string data;
  std::string output;
  std::string summary;
  std::uint64_t test_seed = 7;
  int test_points = 5000;
  double alpha0 = 0.1;
  double alpha_b = 1.0;
  int resolution = 500;
};

std::vector<Eigen::VectorXd> reference_thetas(const std::string& reference) {
  if (reference == "ushape") return ushape_true_thetas();
  const json spec = read_json_file(reference);
  if (spec.value("type", "") != "ushape") {
    throw InputError("only the 'ushape' reference partition is supported");
  }
  if (!spec.contains("thetas")) return ushape_true_thetas();
  std::vector<Eigen::VectorXd> out;
  for (const auto& row : spec.at("thetas")) {
    const auto v = row.get<std::vector<double>>();
    out.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (out.size() != 3) throw InputError("ushape reference needs three coefficient vectors");
  return out;
}

int run_evaluate(const EvaluateArgs& args) {
  const FittedModel fit = load_fit(args.fit_dir);
  const auto thetas = reference_thetas(args.reference);
  const UShapeReference ref;
  const int n = fit.manifest.at("resolved").at("n_used").get<int>();
  const DomainLattice lattice(fit.grid, ref, args.resolution);

  const SimulatedData test = generate_ushape_data(args.test_points, args.test_seed);
  const Eigen::MatrixXd predicted =
      predict_means(fit.samples, fit.grid, test.data.locations, test.data.covariates);
  const auto e3 = prediction_error_e3(predicted, test.true_means, args.alpha0, args.alpha_b, n);

  auto out = open_output(args.output);
  out << "iter,k,e1,e2,e3\n" << std::setprecision(10);
  for (std::size_t s = 0; s < fit.samples.size(); ++s) {
    const auto errs =
        normalized_errors(fit.samples[s], lattice, thetas, args.alpha0, args.alpha_b, n);
    out << fit.samples[s].iteration << ',' << fit.samples[s].k << ',' << errs.e1 << ','
        << errs.e2 << ',' << e3[s] << '\n';
  }

  std::string data_path = args.data;
  if (data_path.empty()) data_path = fit.manifest.at("config").at("io").at("data").get<std::string>();
  const Dataset data = read_dataset_csv(data_path);
  RunConfig cfg = parse_config(fit.manifest.at("config"));
  const BlockGrid train_grid = build_grid(data, fit.grid.K(), cfg.grid);
  if (train_grid.active_cells() != fit.grid.active_cells()) {
    throw InputError("dataset does not reproduce the fitted block grid");
  }
  const std::size_t consensus = consensus_partition(fit.samples, train_grid);
  const double w = fit.samples.size() >= 2 ? waic(fit.samples, data, train_grid, cfg.model)
                                            : std::nan("");

  auto sum = open_output(args.summary);
  sum << "metric,value\n" << std::setprecision(10);
  sum << "mae," << mae(predicted, test.true_means) << '\n';
  sum << "crps_mean," << mean_crps(predicted, test.true_means) << '\n';
  sum << "waic," << w << '\n';
  sum << "consensus_iter," << fit.samples[consensus].iteration << '\n';
  sum << "consensus_k," << fit.samples[consensus].k << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int run_simulate(int n, std::uint64_t seed, const std::string& output, const std::string& truth) {
  const SimulatedData sim = generate_ushape_data(n, seed);
  {
    auto out = open_output(output);
    write_dataset_csv(out, sim.data);
  }
  if (!truth.empty()) {
    auto out = open_output(truth);
    out << "region,mu\n" << std::setprecision(17);
    for (int i = 0; i < n; ++i) out << sim.regions[i] + 1 << ',' << sim.true_means[i] << '\n';
  }
  return 0;
}

struct SweepArgs {
  std::vector<int> n_grid{500, 1000, 2000};
  std::uint64_t seed = 1;
  RateConstants rates;
  double alpha0 = 0.1;
  int test_points = 5000;
  int resolution = 500;
  std::string config;
  std::string out_dir;
  std::optional<int> threads;
  SamplerFlags sampler;
};

int run_sweep(const SweepArgs& args) {
  RunConfig cfg = load_config(args.config);
  args.sampler.apply(cfg);
  SweepConfig sweep;
  sweep.n_grid = args.n_grid;
  sweep.constants = args.rates;
  sweep.model = cfg.model;
  sweep.sampler = cfg.sampler;
  sweep.seed = args.seed;
  sweep.alpha0 = args.alpha0;
  sweep.test_points = args.test_points;
  sweep.lattice_resolution = args.resolution;
  sweep.threads = args.threads.value_or(cfg.threads);
  const SweepResult result = run_asymptotic_sweep(sweep);

  const fs::path dir(args.out_dir);
  {
    auto out = open_output(dir / "sweep_samples.csv");
    write_sweep_csv(out, result.rows);
  }
  {
    auto out = open_output(dir / "sweep_summary.csv");
    write_sweep_summary_csv(out, result.summaries);
  }
  {
    json manifest;
    manifest["n_grid"] = args.n_grid;
    manifest["seed"] = args.seed;
    manifest["rates"] = {{"c_b", args.rates.c_b},
                         {"alpha_b", args.rates.alpha_b},
                         {"c_p", args.rates.c_p},
                         {"alpha_p", args.rates.alpha_p}};
    manifest["alpha0"] = args.alpha0;
    manifest["test_points"] = args.test_points;
    manifest["lattice_resolution"] = args.resolution;
    manifest["config"] = config_to_json(cfg);
    auto out = open_output(dir / kManifestFile);
    out << manifest.dump(2) << '\n';
  }
  write_sweep_summary_csv(std::cout, result.summaries);
  return 0;
}

struct WaicArgs {
  std::string data;
  std::string config;
  std::string output;
  std::vector<double> c_b{1, 3, 5, 7};
  std::vector<double> c_p{0.01, 0.1, 0.5};
  double alpha_b = 1.0;
  double alpha_p = 0.5;
  std::optional<int> threads;
  SamplerFlags sampler;
};

int run_waic_select(const WaicArgs& args) {
  RunConfig cfg = load_config(args.config);
  args.sampler.apply(cfg);
  const Dataset data = read_dataset_csv(args.data);
  WaicSearchConfig search;
  search.c_b_grid = args.c_b;
  search.c_p_grid = args.c_p;
  search.alpha_b = args.alpha_b;
  search.alpha_p = args.alpha_p;
  search.model = cfg.model;
  search.sampler = cfg.sampler;
  search.threads = args.threads.value_or(cfg.threads);
  const auto result = waic_grid_search(data, search);
  auto out = open_output(args.output);
  write_waic_csv(out, result);
  const auto& best = result.cells[result.best];
  std::cout << "best c_b=" << best.c_b << " c_p=" << best.c_p << " K=" << best.K
            << " waic=" << best.waic << '\n';
  return 0;
}

void report_error(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}}.dump()
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially clustered regression with spanning-tree partitions"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "run the MCMC sampler on a dataset");
  fit_cmd->add_option("--config", fit.config, "JSON run configuration");
  fit_cmd->add_option("--data", fit.data, "training CSV (s_h,s_v,x1..xd,y)");
  fit_cmd->add_option("--out", fit.out, "output directory");
  fit_cmd->add_option("--K", fit.K, "explicit grid resolution");
  fit_cmd->add_option("--log-lambda", fit.log_lambda, "explicit log of the Poisson rate");
  fit_cmd->add_option("--threads", fit.threads, "worker threads for chains");
  fit.sampler.add(fit_cmd);

  std::string fit_dir, points, pred_out;
  auto* predict_cmd = app.add_subcommand("predict", "predict regression means at new locations");
  predict_cmd->add_option("--fit", fit_dir, "directory written by fit")->required();
  predict_cmd->add_option("--points", points, "CSV of s_h,s_v,x1..xd")->required();
  predict_cmd->add_option("--output", pred_out, "prediction CSV")->required();

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "score posterior samples against a reference");
  eval_cmd->add_option("--fit", eval.fit_dir, "directory written by fit")->required();
  eval_cmd->add_option("--reference", eval.reference, "'ushape' or a reference JSON file");
  eval_cmd->add_option("--data", eval.data, "training CSV (defaults to the fit's dataset)");
  eval_cmd->add_option("--output", eval.output, "per-sample CSV (k,e1,e2,e3)")->required();
  eval_cmd->add_option("--summary", eval.summary, "scalar metrics CSV")->required();
  eval_cmd->add_option("--test-seed", eval.test_seed, "seed of the test locations");
  eval_cmd->add_option("--test-points", eval.test_points, "number of test locations");
  eval_cmd->add_option("--alpha0", eval.alpha0, "normalisation exponent alpha0");
  eval_cmd->add_option("--alpha-b", eval.alpha_b, "normalisation exponent alpha_b");
  eval_cmd->add_option("--resolution", eval.resolution, "area lattice points per side");

  int sim_n = 1000;
  std::uint64_t sim_seed = 1;
  std::string sim_out, sim_truth;
  auto* sim_cmd = app.add_subcommand("simulate", "generate U-shape data");
  sim_cmd->add_option("--n", sim_n, "sample size");
  sim_cmd->add_option("--seed", sim_seed, "random seed");
  sim_cmd->add_option("--output", sim_out, "dataset CSV")->required();
  sim_cmd->add_option("--truth", sim_truth, "optional CSV of true regions and means");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "asymptotic sweep over sample sizes");
  sweep_cmd->add_option("--n-grid", sweep.n_grid, "sample sizes")->delimiter(',');
  sweep_cmd->add_option("--data-seed", sweep.seed, "base seed for data and test sets");
  sweep_cmd->add_option("--c-b", sweep.rates.c_b, "block-count constant");
  sweep_cmd->add_option("--alpha-b", sweep.rates.alpha_b, "block-count exponent");
  sweep_cmd->add_option("--c-p", sweep.rates.c_p, "Poisson-rate constant");
  sweep_cmd->add_option("--alpha-p", sweep.rates.alpha_p, "Poisson-rate exponent");
  sweep_cmd->add_option("--alpha0", sweep.alpha0, "normalisation exponent alpha0");
  sweep_cmd->add_option("--test-points", sweep.test_points, "test locations per n");
  sweep_cmd->add_option("--resolution", sweep.resolution, "area lattice points per side");
  sweep_cmd->add_option("--config", sweep.config, "JSON run configuration");
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "output directory")->required();
  sweep_cmd->add_option("--threads", sweep.threads, "worker threads for chains");
  sweep.sampler.add(sweep_cmd);

  WaicArgs waic_args;
  auto* waic_cmd = app.add_subcommand("waic-select", "pick (c_b, c_p) by WAIC");
  waic_cmd->add_option("--data", waic_args.data, "training CSV")->required();
  waic_cmd->add_option("--config", waic_args.config, "JSON run configuration");
  waic_cmd->add_option("--output", waic_args.output, "WAIC table CSV")->required();
  waic_cmd->add_option("--c-b", waic_args.c_b, "c_b grid")->delimiter(',');
  waic_cmd->add_option("--c-p", waic_args.c_p, "c_p grid")->delimiter(',');
  waic_cmd->add_option("--alpha-b", waic_args.alpha_b, "block-count exponent");
  waic_cmd->add_option("--alpha-p", waic_args.alpha_p, "Poisson-rate exponent");
  waic_cmd->add_option("--threads", waic_args.threads, "worker threads for chains");
  waic_args.sampler.add(waic_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(2, "usage", e.what());
    return 2;
  }

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*predict_cmd) return run_predict(fit_dir, points, pred_out);
    if (*eval_cmd) return run_evaluate(eval);
    if (*sim_cmd) return run_simulate(sim_n, sim_seed, sim_out, sim_truth);
    if (*sweep_cmd) return run_sweep(sweep);
    if (*waic_cmd) return run_waic_select(waic_args);
  } catch (const Error& e) {
    const int code = e.is_usage() ? 2 : 1;
    report_error(code, e.is_usage() ? "input" : "runtime", e.what());
    return code;
  } catch (const std::exception& e) {
    report_error(1, "runtime", e.what());
    return 1;
  }
  return 0;
}
