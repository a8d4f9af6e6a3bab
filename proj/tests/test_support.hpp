#pragma once

// Independent reference implementations used as test oracles. None of
// these call into the library's likelihood, MST or partition code.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/mcmc_sampler.hpp"
#include "spatrpm/random.hpp"
#include "spatrpm/tree_partition.hpp"

namespace spatrpm::oracle {

// Plain disjoint-set forest, kept separate from the library's union-find.
struct Dsu {
  std::vector<int> parent;
  explicit Dsu(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool join(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// Kruskal under the order (weight, edge index). Returns sorted edges.
inline std::vector<Edge> kruskal(const Graph& g, const std::vector<double>& w) {
  std::vector<int> order(g.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return w[x] != w[y] ? w[x] < w[y] : x < y;
  });
  Dsu dsu(g.vertex_count);
  std::vector<Edge> out;
  for (int i : order) {
    if (dsu.join(g.edges[i].a, g.edges[i].b)) out.push_back(g.edges[i]);
  }
  std::sort(out.begin(), out.end(), [](const Edge& x, const Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  return out;
}

// Random connected simple graph: a random spanning path plus extra edges.
inline Graph random_connected_graph(int v, double extra_prob, Rng& rng) {
  Graph g;
  g.vertex_count = v;
  std::vector<int> perm(v);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<char>> has(v, std::vector<char>(v, 0));
  auto add = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    if (a == b || has[a][b]) return;
    has[a][b] = 1;
    g.edges.push_back({a, b});
  };
  for (int i = 1; i < v; ++i) add(perm[uniform_index(rng, i)], perm[i]);
  for (int a = 0; a < v; ++a) {
    for (int b = a + 1; b < v; ++b) {
      if (uniform(rng) < extra_prob) add(a, b);
    }
  }
  return g;
}

// Connected set of active cells on a K x K grid grown from a random seed
// cell, as a dataset with one or more points per active cell.
inline Dataset random_grid_dataset(int K, int target_cells, int d, Rng& rng) {
  std::vector<char> active(K * K, 0);
  std::vector<int> frontier;
  const int start = uniform_index(rng, K * K);
  active[start] = 1;
  int count = 1;
  auto push_neighbours = [&](int c) {
    const int r = c / K, col = c % K;
    if (r > 0) frontier.push_back(c - K);
    if (r + 1 < K) frontier.push_back(c + K);
    if (col > 0) frontier.push_back(c - 1);
    if (col + 1 < K) frontier.push_back(c + 1);
  };
  push_neighbours(start);
  while (count < target_cells && !frontier.empty()) {
    const int i = uniform_index(rng, static_cast<int>(frontier.size()));
    const int c = frontier[i];
    frontier.erase(frontier.begin() + i);
    if (active[c]) continue;
    active[c] = 1;
    ++count;
    push_neighbours(c);
  }
  Dataset data;
  std::vector<Location> locs;
  for (int c = 0; c < K * K; ++c) {
    if (!active[c]) continue;
    const int reps = 1 + uniform_index(rng, 3);
    for (int r = 0; r < reps; ++r) {
      locs.push_back({((c % K) + uniform(rng, 0.05, 0.95)) / K,
                      ((c / K) + uniform(rng, 0.05, 0.95)) / K});
    }
  }
  const int n = static_cast<int>(locs.size());
  data.locations = locs;
  data.covariates.resize(n, d);
  data.responses.resize(n);
  for (int i = 0; i < n; ++i) {
    data.covariates(i, 0) = 1.0;
    for (int j = 1; j < d; ++j) data.covariates(i, j) = uniform(rng, -1.0, 1.0);
    data.responses[i] = uniform(rng, -2.0, 2.0) + data.covariates(i, d - 1);
  }
  for (int j = 0; j < d; ++j) data.covariate_names.push_back("x" + std::to_string(j + 1));
  return data;
}

// log N(y; 0, sigma2 (gamma n sum_j P_j + I)) with P_j the projection onto
// the column space of cluster j's design rows, built as a dense n x n matrix.
inline double dense_log_density(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const std::vector<int>& obs_label, int k, double sigma2,
                                double gamma) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n);
  for (int j = 0; j < k; ++j) {
    std::vector<int> rows;
    for (int i = 0; i < n; ++i) {
      if (obs_label[i] == j) rows.push_back(i);
    }
    if (rows.empty()) continue;
    Eigen::MatrixXd Xj(rows.size(), X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) Xj.row(r) = X.row(rows[r]);
    // Projection via complete orthogonal decomposition, not the gram matrix.
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Xj);
    const Eigen::MatrixXd P = Xj * cod.pseudoInverse();
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = 0; b < rows.size(); ++b) {
        cov(rows[a], rows[b]) += gamma * n * P(a, b);
      }
    }
  }
  cov *= sigma2;
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd z = llt.matrixL().solve(y);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * n * std::log(2.0 * M_PI) - 0.5 * logdet - 0.5 * z.squaredNorm();
}

// Labels of the components left after removing `cut` from a tree, numbered
// by smallest vertex. Computed by flood fill over an adjacency list.
inline std::vector<int> components_after_cut(int v, const std::vector<Edge>& tree_edges,
                                             const std::vector<char>& cut) {
  std::vector<std::vector<int>> adj(v);
  for (std::size_t e = 0; e < tree_edges.size(); ++e) {
    if (cut[e]) continue;
    adj[tree_edges[e].a].push_back(tree_edges[e].b);
    adj[tree_edges[e].b].push_back(tree_edges[e].a);
  }
  std::vector<int> label(v, -1);
  int next = 0;
  for (int s = 0; s < v; ++s) {
    if (label[s] >= 0) continue;
    std::vector<int> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      for (int y : adj[x]) {
        if (label[y] < 0) {
          label[y] = next;
          stack.push_back(y);
        }
      }
    }
    ++next;
  }
  return label;
}

// RST tree with each edge cut independently at a random rate.
inline TreePartition random_state(const Graph& g, Rng& rng) {
  const SpanningTree tree = sample_rst(g, rng);
  std::vector<char> mask(tree.edges.size(), 0);
  const double p = uniform(rng);
  for (auto& m : mask) m = uniform(rng) < p;
  return TreePartition(tree, mask);
}

// M blocks in a single row of an M x M grid, `per_block` observations in
// each, x = (1, Unif(-1,1), ...) and a response with a level shift halfway
// along the row. The active graph is the path 0-1-...-(M-1).
inline Dataset path_dataset(int M, int per_block, int d, Rng& rng) {
  Dataset data;
  const int n = M * per_block;
  data.covariates.resize(n, d);
  data.responses.resize(n);
  for (int b = 0, i = 0; b < M; ++b) {
    for (int r = 0; r < per_block; ++r, ++i) {
      data.locations.push_back({(b + uniform(rng, 0.1, 0.9)) / M, uniform(rng, 0.01, 0.9) / M});
      data.covariates(i, 0) = 1.0;
      for (int j = 1; j < d; ++j) data.covariates(i, j) = uniform(rng, -1.0, 1.0);
      data.responses[i] = (2 * b < M ? 0.0 : 1.5) + 0.5 * data.covariates(i, d - 1) +
                          std::normal_distribution<double>(0.0, 1.0)(rng);
    }
  }
  for (int j = 0; j < d; ++j) data.covariate_names.push_back("x" + std::to_string(j + 1));
  return data;
}

// Observations of a grid-backed dataset mapped to cluster labels.
inline std::vector<int> observation_labels(const BlockGrid& grid,
                                           const std::vector<int>& block_labels) {
  std::vector<int> out;
  for (int b : grid.block_of_observation()) out.push_back(b < 0 ? -1 : block_labels[b]);
  return out;
}

// Exact posterior over the cut sets of the path tree 0-1-...-(M-1) with at
// most k_max - 1 cuts: lambda^k / k! / C(M-1, k-1) times the dense Gaussian
// marginal. Indexed by the bitmask of cut edges (bit e = edge (e, e+1)).
inline std::vector<double> exact_path_posterior(const Dataset& data, const BlockGrid& grid,
                                                double sigma2, double gamma, double log_lambda,
                                                int k_max) {
  const int M = grid.block_count();
  std::vector<double> logp(1u << (M - 1), -INFINITY);
  std::vector<Edge> path_edges;
  for (int e = 0; e + 1 < M; ++e) path_edges.push_back({e, e + 1});
  double top = -INFINITY;
  for (unsigned mask = 0; mask < logp.size(); ++mask) {
    const int k = 1 + __builtin_popcount(mask);
    if (k > k_max) continue;
    std::vector<char> cut(M - 1);
    for (int e = 0; e + 1 < M; ++e) cut[e] = (mask >> e) & 1u;
    const auto block_label = components_after_cut(M, path_edges, cut);
    const auto obs = observation_labels(grid, block_label);
    const double log_choose =
        std::lgamma(M) - std::lgamma(k) - std::lgamma(M - k + 1.0);
    logp[mask] = k * log_lambda - std::lgamma(k + 1.0) - log_choose +
                 dense_log_density(data.covariates, data.responses, obs, k, sigma2, gamma);
    top = std::max(top, logp[mask]);
  }
  std::vector<double> p(logp.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += p[i] = std::exp(logp[i] - top);
  for (double& x : p) x /= total;
  return p;
}

inline unsigned path_cut_mask(const TreePartition& state) {
  unsigned mask = 0;
  for (int e = 0; e < state.tree_edge_count(); ++e) {
    if (state.is_cut(e)) mask |= 1u << state.tree_edge(e).a;
  }
  return mask;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

// Path testbed with the posterior known by enumeration: six blocks, five
// observations each, d = 2, k_max = 3, lambda = 0.3.
struct PathTestbed {
  Dataset data;
  BlockGrid grid;
  ModelConfig model;
  SamplerConfig sampler;
  std::vector<double> exact;

  explicit PathTestbed(std::uint64_t seed, ChangeMode mode = ChangeMode::kJoint)
      : data([&] {
          Rng rng = make_rng(seed);
          return path_dataset(6, 5, 2, rng);
        }()),
        grid(build_grid(data, 6)) {
    sampler.log_lambda = std::log(0.3);
    sampler.k_max = 3;
    sampler.base_probs = {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0};
    sampler.change_mode = mode;
    exact = exact_path_posterior(data, grid, model.sigma2, model.gamma, sampler.log_lambda,
                                 sampler.k_max);
  }

  // Visit frequencies of each cut set over `steps` steps after `burn_in`.
  std::vector<double> empirical(long steps, long burn_in, std::uint64_t seed) const {
    const PosteriorModel posterior(data, grid, model);
    Rng rng = make_rng(seed);
    const SpanningTree tree = sample_rst(posterior.graph(), rng);
    ChainState state = make_state(posterior, TreePartition(tree, std::vector<char>(5, 0)));
    MoveCounts counts;
    std::vector<double> freq(exact.size(), 0.0);
    for (long it = 0; it < burn_in + steps; ++it) {
      step(state, posterior, sampler, rng, counts);
      if (it >= burn_in) freq[path_cut_mask(state.partition)] += 1.0;
    }
    for (double& f : freq) f /= static_cast<double>(steps);
    return freq;
  }
};

}  // namespace spatrpm::oracle
