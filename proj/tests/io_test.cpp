#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spatrpm/posterior_io.hpp"
#include "spatrpm/run_config.hpp"

using namespace spatrpm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("spatrpm_io_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct CliResult {
  int code;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + SPATRPM_CLI + "\" " + args + " >/dev/null 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

// Ten points spread over all four cells of a 2x2 grid.
void write_small_dataset(const fs::path& p) {
  std::ofstream out(p);
  out << "s_h,s_v,x1,x2,y\n";
  const double pts[10][2] = {{0.1, 0.1}, {0.3, 0.2}, {0.7, 0.1}, {0.9, 0.3}, {0.2, 0.7},
                             {0.4, 0.9}, {0.6, 0.6}, {0.8, 0.8}, {0.1, 0.4}, {0.6, 0.2}};
  for (int i = 0; i < 10; ++i) {
    out << pts[i][0] << ',' << pts[i][1] << ",1," << (i % 3) * 0.5 - 0.5 << ',' << i * 0.3 - 1
        << '\n';
  }
}

}  // namespace

TEST(SamplesJsonl, RoundTripIsLossless) {
  std::vector<PosteriorSample> samples(3);
  for (int s = 0; s < 3; ++s) {
    samples[s].iteration = 100 * s + 7;
    samples[s].k = 2;
    samples[s].block_labels = {0, 1, 1, 0};
    samples[s].thetas = {Eigen::Vector2d(0.1 * s, -1.0 / 3.0), Eigen::Vector2d(1e-300, 12345.678)};
    samples[s].log_lik = -123.456789012345 * (s + 1);
  }
  std::stringstream buf;
  write_samples_jsonl(buf, samples);
  const std::string text = buf.str();
  EXPECT_NE(text.find("\"labels\":[1,2,2,1]"), std::string::npos);
  const auto back = read_samples_jsonl(buf);
  ASSERT_EQ(back.size(), 3u);
  for (int s = 0; s < 3; ++s) {
    EXPECT_EQ(back[s].iteration, samples[s].iteration);
    EXPECT_EQ(back[s].k, samples[s].k);
    EXPECT_EQ(back[s].block_labels, samples[s].block_labels);
    EXPECT_EQ(back[s].log_lik, samples[s].log_lik);
    for (int c = 0; c < 2; ++c) EXPECT_EQ(back[s].thetas[c], samples[s].thetas[c]);
  }
  std::stringstream again;
  write_samples_jsonl(again, back);
  EXPECT_EQ(again.str(), text);
}

TEST(SamplesJsonl, RejectsMalformedRecords) {
  std::stringstream bad("{\"iter\":1,\"k\":2,\"labels\":[1,1],\"thetas\":[[0]],\"log_lik\":0}\n");
  EXPECT_THROW(read_samples_jsonl(bad), InputError);
  std::stringstream junk("not json\n");
  EXPECT_THROW(read_samples_jsonl(junk), InputError);
}

TEST(GridJson, RoundTrip) {
  const BlockGrid grid(3, {0, 1, 4, 7, 8});
  const BlockGrid back = grid_from_json(grid_to_json(grid));
  EXPECT_EQ(back.K(), 3);
  EXPECT_EQ(back.active_cells(), grid.active_cells());
  EXPECT_EQ(back.adjacency(), grid.adjacency());
}

TEST(RunConfig, EmptyGivesDefaults) {
  const RunConfig c = parse_config(nlohmann::json::object());
  EXPECT_EQ(c.model.sigma2, 1.0);
  EXPECT_EQ(c.model.gamma, 1.0);
  EXPECT_EQ(c.sampler.k_max, 5);
  EXPECT_EQ(c.sampler.n_iters, 20000);
  EXPECT_EQ(c.sampler.change_mode, ChangeMode::kJoint);
  const HyperParams hp = c.hyper.resolve(4000);
  EXPECT_EQ(hp.K, 38);
  EXPECT_NEAR(hp.log_lambda, -138.9, 0.1);
}

TEST(RunConfig, ExplicitKOverride) {
  const RunConfig c = parse_config(nlohmann::json::parse(R"({"hyper":{"K":12}})"));
  const HyperParams hp = c.hyper.resolve(4000);
  EXPECT_EQ(hp.K, 12);
  // The missing rate falls back to the default constants.
  EXPECT_NEAR(hp.log_lambda, -138.9, 0.1);
}

TEST(RunConfig, RejectsMixedStylesUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"hyper":{"K":12,"c_b":3}})")), InputError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"sampler":{"iters":10}})")), InputError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"extra":1})")), InputError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"model":{"sigma2":-1}})")), InputError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"sampler":{"seed":"x"}})")), InputError);
}

TEST(RunConfig, SerialisedConfigParsesBack) {
  const RunConfig c = parse_config(nlohmann::json::parse(
      R"({"sampler":{"iterations":500,"burn_in":100,"seed":9,"change_mode":"sequential"},"hyper":{"c_b":2}})"));
  const RunConfig d = parse_config(config_to_json(c));
  EXPECT_EQ(d.sampler.n_iters, 500);
  EXPECT_EQ(d.sampler.seed, 9u);
  EXPECT_EQ(d.sampler.change_mode, ChangeMode::kSequential);
  EXPECT_EQ(d.hyper.rates.c_b, 2.0);
}

TEST(Cli, FitWritesOutputsAndRepeatsExactly) {
  TempDir tmp("fit");
  write_small_dataset(tmp.path / "d.csv");
  const std::string common = "fit --data \"" + (tmp.path / "d.csv").string() +
                             "\" --K 2 --log-lambda -1 --iterations 100 --burn-in 20 "
                             "--thinning 2 --seed 3 --out ";
  const auto a = run_cli(common + "\"" + (tmp.path / "a").string() + "\"", tmp.path);
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run_cli(common + "\"" + (tmp.path / "b").string() + "\"", tmp.path);
  ASSERT_EQ(b.code, 0) << b.err;

  const auto samples = read_samples_jsonl((tmp.path / "a" / "samples.jsonl").string());
  EXPECT_EQ(samples.size(), 40u);
  for (const auto& s : samples) {
    EXPECT_EQ(s.block_labels.size(), 4u);
    EXPECT_EQ(static_cast<int>(s.thetas.size()), s.k);
    EXPECT_EQ(s.thetas[0].size(), 2);
  }
  EXPECT_EQ(slurp(tmp.path / "a" / "samples.jsonl"), slurp(tmp.path / "b" / "samples.jsonl"));

  const auto manifest = nlohmann::json::parse(slurp(tmp.path / "a" / "manifest.json"));
  EXPECT_EQ(manifest.at("resolved").at("K"), 2);
  EXPECT_EQ(manifest.at("resolved").at("n"), 10);
  EXPECT_NO_THROW(nlohmann::json::parse(slurp(tmp.path / "a" / "diagnostics.json")));

  // Predict at two of the training locations.
  {
    std::ofstream pts(tmp.path / "p.csv");
    pts << "s_h,s_v,x1,x2\n0.1,0.1,1,0\n0.8,0.8,1,1\n";
  }
  const auto p = run_cli("predict --fit \"" + (tmp.path / "a").string() + "\" --points \"" +
                             (tmp.path / "p.csv").string() + "\" --output \"" +
                             (tmp.path / "pred.csv").string() + "\"",
                         tmp.path);
  ASSERT_EQ(p.code, 0) << p.err;
  const std::string pred = slurp(tmp.path / "pred.csv");
  EXPECT_EQ(pred.substr(0, pred.find('\n')), "s_h,s_v,mean,q05,q95,modal_cluster");
  EXPECT_EQ(std::count(pred.begin(), pred.end(), '\n'), 3);
}

TEST(Cli, MissingColumnIsAnInputErrorNamingTheColumn) {
  TempDir tmp("missing");
  {
    std::ofstream out(tmp.path / "d.csv");
    out << "s_h,x1,y\n0.1,1,2\n";
  }
  const auto r = run_cli("fit --data \"" + (tmp.path / "d.csv").string() + "\" --out \"" +
                             (tmp.path / "o").string() + "\"",
                         tmp.path);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("s_v"), std::string::npos) << r.err;
  const auto err = nlohmann::json::parse(r.err.substr(r.err.rfind("{\"error\"")));
  EXPECT_EQ(err.at("error").at("code"), 2);
}

TEST(Cli, UsageErrorsExitWithTwo) {
  TempDir tmp("usage");
  EXPECT_EQ(run_cli("no-such-command", tmp.path).code, 2);
  EXPECT_EQ(run_cli("predict --fit x", tmp.path).code, 2);
  EXPECT_EQ(run_cli("simulate --n abc --output x.csv", tmp.path).code, 2);
}

TEST(Cli, MissingFitDirectoryIsARuntimeOrInputFailure) {
  TempDir tmp("nofit");
  {
    std::ofstream pts(tmp.path / "p.csv");
    pts << "s_h,s_v,x1\n0.1,0.1,1\n";
  }
  const auto r = run_cli("predict --fit \"" + (tmp.path / "absent").string() + "\" --points \"" +
                             (tmp.path / "p.csv").string() + "\" --output \"" +
                             (tmp.path / "o.csv").string() + "\"",
                         tmp.path);
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("\"error\""), std::string::npos);
}

TEST(Cli, SimulateWritesTheRequestedRows) {
  TempDir tmp("sim");
  const auto r = run_cli("simulate --n 50 --seed 4 --output \"" + (tmp.path / "s.csv").string() +
                             "\"",
                         tmp.path);
  ASSERT_EQ(r.code, 0) << r.err;
  const Dataset d = read_dataset_csv((tmp.path / "s.csv").string());
  EXPECT_EQ(d.size(), 50u);
  EXPECT_EQ(d.covariates.cols(), 2);
}
