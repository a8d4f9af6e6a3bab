#include "spatrpm/mcmc_sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace spatrpm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_binomial(int n, int r) {
  return std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0);
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// New state for `next`, reusing statistics of clusters whose label in
// `prev` is not listed in `changed`. Clusters are matched through their
// smallest block, which keeps its cluster under a split or a merge.
ChainState rebuild(const ChainState& prev, TreePartition next, const PosteriorModel& model,
                   std::span<const int> changed) {
  const int k = next.k();
  const auto& labels = next.labels();
  std::vector<int> rep(k, -1);
  for (int v = 0; v < next.vertex_count(); ++v) {
    if (rep[labels[v]] < 0) rep[labels[v]] = v;
  }
  ChainState out{std::move(next), {}, {}, 0.0, prev.iteration};
  out.stats.reserve(k);
  out.terms.reserve(k);
  const auto& prev_labels = prev.partition.labels();
  for (int j = 0; j < k; ++j) {
    const int old = prev_labels[rep[j]];
    if (std::find(changed.begin(), changed.end(), old) == changed.end()) {
      out.stats.push_back(prev.stats[old]);
      out.terms.push_back(prev.terms[old]);
    } else {
      out.stats.push_back(model.stats_of_label(out.partition.labels(), j));
      out.terms.push_back(model.constants().cluster_term(projection_term(out.stats.back())));
    }
  }
  out.log_lik = model.constants().base;
  for (double t : out.terms) out.log_lik += t;
  return out;
}

void check_state_cache(const ChainState& state, const PosteriorModel& model) {
  const double fresh = model.log_likelihood(state.partition.labels(), state.k());
  if (std::abs(fresh - state.log_lik) > 1e-6 * std::max(1.0, std::abs(fresh))) {
    throw NumericError("cached log-likelihood drifted from recomputation");
  }
}

}  // namespace

double MoveProbabilities::operator[](MoveType m) const {
  switch (m) {
    case MoveType::kBirth: return birth;
    case MoveType::kDeath: return death;
    case MoveType::kChange: return change;
    case MoveType::kHyper: return hyper;
  }
  return 0.0;
}

void SamplerConfig::validate() const {
  if (k_max < 1) throw InputError("k_max must be at least 1");
  if (!std::isfinite(log_lambda)) throw InputError("log_lambda must be finite");
  if (n_iters < 0 || burn_in < 0) throw InputError("iteration counts must be nonnegative");
  if (burn_in > n_iters) throw InputError("burn_in exceeds n_iters");
  if (thinning < 1) throw InputError("thinning must be positive");
  if (n_chains < 1) throw InputError("n_chains must be positive");
  const auto& p = base_probs;
  for (double x : {p.birth, p.death, p.change, p.hyper}) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InputError("move probabilities must be >= 0");
  }
  if (std::abs(p.birth + p.death + p.change + p.hyper - 1.0) > 1e-9) {
    throw InputError("move probabilities must sum to 1");
  }
}

MoveProbabilities SamplerConfig::move_probs(int k) const {
  MoveProbabilities p = base_probs;
  if (k_max == 1) {
    p.birth = p.death = 0.0;
    const double rest = p.change + p.hyper;
    if (rest > 0.0) {
      p.change /= rest;
      p.hyper /= rest;
    } else {
      p.hyper = 1.0;
    }
    return p;
  }
  if (k <= 1) {
    p.birth += p.death;
    p.death = 0.0;
  } else if (k >= k_max) {
    p.death += p.birth;
    p.birth = 0.0;
  }
  return p;
}

PosteriorModel::PosteriorModel(const Dataset& data, const BlockGrid& grid, ModelConfig config)
    : grid_(&grid),
      graph_(graph_of(grid)),
      config_(config),
      blocks_(block_stats(data, grid)),
      n_(grid.observation_count()),
      dim_(data.dim()),
      constants_(config, std::max(1, grid.observation_count()), [&] {
        double yty = 0.0;
        for (const auto& b : blocks_) yty += b.yty;
        return yty;
      }()) {
  if (n_ < 1) throw InputError("no observations fall in the grid");
}

ClusterStats PosteriorModel::stats_of_label(std::span<const int> labels, int label) const {
  ClusterStats s = ClusterStats::zero(dim_);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] == label) s += blocks_[b];
  }
  return s;
}

double PosteriorModel::log_likelihood(std::span<const int> labels, int k) const {
  std::vector<ClusterStats> clusters(k, ClusterStats::zero(dim_));
  for (std::size_t b = 0; b < labels.size(); ++b) clusters[labels[b]] += blocks_[b];
  double total_yty = 0.0;
  for (const auto& b : blocks_) total_yty += b.yty;
  return integrated_log_likelihood(clusters, config_, n_, total_yty);
}

ChainState make_state(const PosteriorModel& model, TreePartition partition) {
  if (partition.vertex_count() != model.grid().block_count()) {
    throw InputError("partition does not cover the grid's active blocks");
  }
  ChainState state{std::move(partition), {}, {}, model.constants().base, 0};
  for (int j = 0; j < state.k(); ++j) {
    state.stats.push_back(model.stats_of_label(state.partition.labels(), j));
    state.terms.push_back(model.constants().cluster_term(projection_term(state.stats.back())));
    state.log_lik += state.terms.back();
  }
  return state;
}

double log_partition_prior(int k, int vertex_count, double log_lambda, int k_max) {
  if (k < 1 || k > k_max || k > vertex_count) return kNegInf;
  return k * log_lambda - std::lgamma(k + 1.0) - log_binomial(vertex_count - 1, k - 1);
}

std::optional<Proposal> birth_via(const ChainState& state, const PosteriorModel& model,
                                  const SamplerConfig& config, int tree_edge) {
  const int k = state.k();
  if (k >= config.k_max || state.partition.is_cut(tree_edge)) return std::nullopt;
  const int parent = state.partition.label(state.partition.tree_edge(tree_edge).a);
  const int changed[] = {parent};
  Proposal p{rebuild(state, state.partition.with_cut(tree_edge), model, changed), 0.0};
  p.log_accept_ratio = config.log_lambda - std::log(k + 1.0) +
                       safe_log(config.move_probs(k + 1).death) -
                       safe_log(config.move_probs(k).birth) + (p.state.log_lik - state.log_lik);
  return p;
}

std::optional<Proposal> birth_move(const ChainState& state, const PosteriorModel& model,
                                   const SamplerConfig& config, Rng& rng) {
  if (state.k() >= config.k_max) return std::nullopt;
  const auto within = classify_tree_edges(state.partition).within;
  if (within.empty()) return std::nullopt;
  return birth_via(state, model, config, within[uniform_index(rng, static_cast<int>(within.size()))]);
}

std::optional<Proposal> death_via(const ChainState& state, const PosteriorModel& model,
                                  const SamplerConfig& config, int tree_edge) {
  const int k = state.k();
  if (k <= 1 || !state.partition.is_cut(tree_edge)) return std::nullopt;
  const Edge& e = state.partition.tree_edge(tree_edge);
  const int changed[] = {state.partition.label(e.a), state.partition.label(e.b)};
  Proposal p{rebuild(state, state.partition.without_cut(tree_edge), model, changed), 0.0};
  p.log_accept_ratio = std::log(static_cast<double>(k)) - config.log_lambda +
                       safe_log(config.move_probs(k - 1).birth) -
                       safe_log(config.move_probs(k).death) + (p.state.log_lik - state.log_lik);
  return p;
}

std::optional<Proposal> death_move(const ChainState& state, const PosteriorModel& model,
                                   const SamplerConfig& config, Rng& rng) {
  if (state.k() <= 1) return std::nullopt;
  const auto between = classify_tree_edges(state.partition).between;
  return death_via(state, model, config,
                   between[uniform_index(rng, static_cast<int>(between.size()))]);
}

std::optional<Proposal> change_via(const ChainState& state, const PosteriorModel& model,
                                   int split_edge, int merge_edge) {
  const TreePartition& tp = state.partition;
  if (tp.is_cut(split_edge)) return std::nullopt;
  TreePartition middle = tp.with_cut(split_edge);
  const auto cuts = middle.cut_edges();
  if (merge_edge < 0 || merge_edge >= static_cast<int>(cuts.size())) return std::nullopt;
  const int merged = cuts[merge_edge];
  if (merged == split_edge) return Proposal{state, 0.0};
  const Edge& m = tp.tree_edge(merged);
  const int changed[] = {tp.label(tp.tree_edge(split_edge).a), tp.label(m.a), tp.label(m.b)};
  Proposal p{rebuild(state, middle.without_cut(merged), model, changed), 0.0};
  p.log_accept_ratio = p.state.log_lik - state.log_lik;
  return p;
}

bool metropolis_accept(double log_ratio, Rng& rng) {
  if (log_ratio >= 0.0) return true;
  return std::log(uniform(rng)) < log_ratio;
}

MoveOutcome change_move(ChainState& state, const PosteriorModel& model,
                        const SamplerConfig& config, Rng& rng) {
  if (config.change_mode == ChangeMode::kJoint) {
    const auto within = classify_tree_edges(state.partition).within;
    if (within.empty()) return {};
    const int split = within[uniform_index(rng, static_cast<int>(within.size()))];
    // The intermediate state has k cut edges.
    const int merge = uniform_index(rng, state.k());
    auto proposal = change_via(state, model, split, merge);
    if (!proposal) return {};
    if (metropolis_accept(proposal->log_accept_ratio, rng)) {
      const long it = state.iteration;
      state = std::move(proposal->state);
      state.iteration = it;
      return {true, true};
    }
    return {true, false};
  }

  bool any = false;
  bool moved = false;
  if (auto birth = birth_move(state, model, config, rng)) {
    any = true;
    if (metropolis_accept(birth->log_accept_ratio, rng)) {
      state = std::move(birth->state);
      moved = true;
    }
  }
  if (auto death = death_move(state, model, config, rng)) {
    any = true;
    if (metropolis_accept(death->log_accept_ratio, rng)) {
      state = std::move(death->state);
      moved = true;
    }
  }
  return {any, moved};
}

ChainState hyper_move(const ChainState& state, const PosteriorModel& model, Rng& rng) {
  ChainState next = state;
  next.partition = resample_tree_given_partition(model.graph(), state.partition, rng);
  return next;
}

MoveType step(ChainState& state, const PosteriorModel& model, const SamplerConfig& config,
              Rng& rng, MoveCounts& counts) {
  const MoveProbabilities probs = config.move_probs(state.k());
  const double u = uniform(rng);
  MoveType move = MoveType::kHyper;
  double acc = 0.0;
  for (MoveType m : {MoveType::kBirth, MoveType::kDeath, MoveType::kChange, MoveType::kHyper}) {
    acc += probs[m];
    if (probs[m] > 0.0 && u < acc) {
      move = m;
      break;
    }
  }
  const auto idx = static_cast<std::size_t>(move);
  ++counts.proposed[idx];
  bool accepted = false;
  switch (move) {
    case MoveType::kBirth:
    case MoveType::kDeath: {
      auto proposal = move == MoveType::kBirth ? birth_move(state, model, config, rng)
                                               : death_move(state, model, config, rng);
      if (proposal && metropolis_accept(proposal->log_accept_ratio, rng)) {
        const long it = state.iteration;
        state = std::move(proposal->state);
        state.iteration = it;
        accepted = true;
      }
      break;
    }
    case MoveType::kChange:
      accepted = change_move(state, model, config, rng).accepted;
      break;
    case MoveType::kHyper:
      state = hyper_move(state, model, rng);
      accepted = true;
      break;
  }
  if (accepted) ++counts.accepted[idx];
  ++state.iteration;
  if (accepted && config.check_cache) check_state_cache(state, model);
  return move;
}

ChainResult run_chain(const PosteriorModel& model, const SamplerConfig& config, int chain) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  Rng rng = make_rng(config.seed, 2 * static_cast<std::uint64_t>(chain));
  Rng theta_rng = make_rng(config.seed, 2 * static_cast<std::uint64_t>(chain) + 1);

  const SpanningTree tree = sample_rst(model.graph(), rng);
  ChainState state = make_state(
      model, TreePartition(tree, std::vector<char>(tree.edges.size(), 0)));

  ChainResult result;
  result.diagnostics.chain = chain;
  result.diagnostics.k_trace.reserve(config.n_iters);
  result.diagnostics.log_lik_trace.reserve(config.n_iters);
  result.samples.reserve((config.n_iters - config.burn_in) / config.thinning + 1);
  for (long it = 1; it <= config.n_iters; ++it) {
    step(state, model, config, rng, result.diagnostics.counts);
    result.diagnostics.k_trace.push_back(state.k());
    result.diagnostics.log_lik_trace.push_back(state.log_lik);
    if (it > config.burn_in && (it - config.burn_in) % config.thinning == 0) {
      PosteriorSample sample;
      sample.iteration = it;
      sample.k = state.k();
      sample.block_labels = state.partition.labels();
      sample.log_lik = state.log_lik;
      for (const auto& s : state.stats) {
        sample.thetas.push_back(sample_theta_conditional(s, model.config(), model.n(), theta_rng));
      }
      result.samples.push_back(std::move(sample));
    }
  }
  result.diagnostics.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<ChainResult> run_chains(const PosteriorModel& model, const SamplerConfig& config,
                                   int threads) {
  config.validate();
  std::vector<ChainResult> results(config.n_chains);
  threads = std::clamp(threads, 1, config.n_chains);
  if (threads == 1) {
    for (int c = 0; c < config.n_chains; ++c) results[c] = run_chain(model, config, c);
    return results;
  }
  std::mutex mu;
  int next = 0;
  std::exception_ptr failure;
  std::vector<std::jthread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        int c;
        {
          std::lock_guard lock(mu);
          if (next >= config.n_chains || failure) return;
          c = next++;
        }
        try {
          results[c] = run_chain(model, config, c);
        } catch (...) {
          std::lock_guard lock(mu);
          failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace spatrpm
