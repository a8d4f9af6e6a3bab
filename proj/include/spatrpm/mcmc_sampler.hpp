#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/marginal_likelihood.hpp"
#include "spatrpm/random.hpp"
#include "spatrpm/tree_partition.hpp"

namespace spatrpm {

enum class MoveType { kBirth = 0, kDeath = 1, kChange = 2, kHyper = 3 };
inline constexpr std::array<const char*, 4> kMoveNames{"birth", "death", "change", "hyper"};

struct MoveProbabilities {
  double birth = 0.25;
  double death = 0.25;
  double change = 0.25;
  double hyper = 0.25;

  double operator[](MoveType m) const;
};

// How the change move combines its split and merge.
//   kJoint: split a uniform within-cluster edge, merge a uniform cut edge of
//     the intermediate state, and accept the pair with one Metropolis test.
//     The pair proposal is symmetric, so the ratio is the likelihood ratio.
//   kSequential: a birth sub-move and a death sub-move, each with its own
//     birth/death acceptance test.
enum class ChangeMode { kJoint, kSequential };

struct SamplerConfig {
  double log_lambda = 0.0;  // log of the truncated-Poisson rate
  int k_max = 5;
  MoveProbabilities base_probs;
  long n_iters = 20000;
  long burn_in = 5000;
  long thinning = 5;
  std::uint64_t seed = 1;
  int n_chains = 1;
  ChangeMode change_mode = ChangeMode::kJoint;
  // Recompute the likelihood from scratch after every accepted move and
  // throw if the cached value drifted by more than 1e-6.
  bool check_cache = false;

  void validate() const;

  // Move probabilities at k. At k = 1 the death mass goes to birth, at
  // k = k_max the birth mass goes to death; change and hyper keep theirs.
  MoveProbabilities move_probs(int k) const;
};

// Data side of the posterior: per-block sufficient statistics and the
// likelihood constants. Holds references to the grid; it must outlive the
// model.
class PosteriorModel {
 public:
  PosteriorModel(const Dataset& data, const BlockGrid& grid, ModelConfig config);

  const BlockGrid& grid() const { return *grid_; }
  const Graph& graph() const { return graph_; }
  const ModelConfig& config() const { return config_; }
  const LikelihoodConstants& constants() const { return constants_; }
  const std::vector<ClusterStats>& blocks() const { return blocks_; }
  int n() const { return n_; }
  int dim() const { return dim_; }

  // Statistics of the blocks carrying `label`, summed in block order.
  ClusterStats stats_of_label(std::span<const int> labels, int label) const;

  // From-scratch collapsed log-likelihood of a block labelling.
  double log_likelihood(std::span<const int> labels, int k) const;

 private:
  const BlockGrid* grid_;
  Graph graph_;
  ModelConfig config_;
  std::vector<ClusterStats> blocks_;
  int n_ = 0;
  int dim_ = 0;
  LikelihoodConstants constants_;
};

struct ChainState {
  TreePartition partition;
  std::vector<ClusterStats> stats;  // by cluster label
  std::vector<double> terms;        // per-cluster likelihood contribution
  double log_lik = 0.0;
  long iteration = 0;

  int k() const { return partition.k(); }
};

ChainState make_state(const PosteriorModel& model, TreePartition partition);

// Log prior of (k, partition | tree): truncated Poisson times the uniform
// choice among the C(V-1, k-1) partitions the tree induces. Normalising
// constants shared by all k are dropped.
double log_partition_prior(int k, int vertex_count, double log_lambda, int k_max);

struct Proposal {
  ChainState state;
  double log_accept_ratio = 0.0;
};

// Split along uniformly chosen within-cluster tree edge. Empty if k = k_max
// or every cluster is a single block.
std::optional<Proposal> birth_move(const ChainState& state, const PosteriorModel& model,
                                   const SamplerConfig& config, Rng& rng);
std::optional<Proposal> birth_via(const ChainState& state, const PosteriorModel& model,
                                  const SamplerConfig& config, int tree_edge);

// Merge across a uniformly chosen cut edge. Empty if k = 1.
std::optional<Proposal> death_move(const ChainState& state, const PosteriorModel& model,
                                   const SamplerConfig& config, Rng& rng);
std::optional<Proposal> death_via(const ChainState& state, const PosteriorModel& model,
                                  const SamplerConfig& config, int tree_edge);

// kJoint pair proposal for a given (split edge, merge edge). `merge_edge`
// indexes the cut edges of the intermediate state.
std::optional<Proposal> change_via(const ChainState& state, const PosteriorModel& model,
                                   int split_edge, int merge_edge);

struct MoveOutcome {
  bool proposed = false;
  bool accepted = false;
};

MoveOutcome change_move(ChainState& state, const PosteriorModel& model,
                        const SamplerConfig& config, Rng& rng);

// Replaces the tree by one that induces the same partition. Always accepted.
ChainState hyper_move(const ChainState& state, const PosteriorModel& model, Rng& rng);

bool metropolis_accept(double log_ratio, Rng& rng);

struct MoveCounts {
  std::array<long, 4> proposed{};
  std::array<long, 4> accepted{};
};

// One iteration: pick a move from move_probs(k), apply it with its
// acceptance test, update counts.
MoveType step(ChainState& state, const PosteriorModel& model, const SamplerConfig& config,
              Rng& rng, MoveCounts& counts);

struct PosteriorSample {
  long iteration = 0;
  int k = 1;
  std::vector<int> block_labels;  // 0-based cluster label per active block
  std::vector<Eigen::VectorXd> thetas;
  double log_lik = 0.0;
};

struct ChainDiagnostics {
  int chain = 0;
  MoveCounts counts;
  std::vector<int> k_trace;
  std::vector<double> log_lik_trace;
  double seconds = 0.0;
};

struct ChainResult {
  std::vector<PosteriorSample> samples;
  ChainDiagnostics diagnostics;
};

// Starts from k = 1 on an RST tree and records every thinning-th state
// after burn-in, with coefficients drawn from their conditional posterior.
ChainResult run_chain(const PosteriorModel& model, const SamplerConfig& config, int chain = 0);

// config.n_chains independent chains, run on up to `threads` threads.
// Results are ordered by chain index regardless of scheduling.
std::vector<ChainResult> run_chains(const PosteriorModel& model, const SamplerConfig& config,
                                   int threads = 1);

}  // namespace spatrpm
