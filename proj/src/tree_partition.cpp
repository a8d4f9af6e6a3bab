#include "spatrpm/tree_partition.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <tuple>

#include "spatrpm/union_find.hpp"

namespace spatrpm {
namespace {

bool edge_less(const Edge& x, const Edge& y) {
  return std::tie(x.a, x.b) < std::tie(y.a, y.b);
}

Edge normalized(Edge e) {
  if (e.a > e.b) std::swap(e.a, e.b);
  return e;
}

}  // namespace

Graph graph_of(const BlockGrid& grid) {
  return Graph{grid.block_count(), grid.adjacency()};
}

void check_spanning_tree(const SpanningTree& tree, const Graph* graph) {
  const int V = tree.vertex_count;
  if (V < 1) throw InputError("spanning tree needs at least one vertex");
  if (static_cast<int>(tree.edges.size()) != V - 1) {
    throw InputError("spanning tree over " + std::to_string(V) + " vertices has " +
                     std::to_string(tree.edges.size()) + " edges");
  }
  UnionFind uf(V);
  for (const auto& e : tree.edges) {
    if (e.a < 0 || e.b < 0 || e.a >= V || e.b >= V || e.a == e.b) {
      throw InputError("spanning tree edge out of range");
    }
    if (!uf.unite(e.a, e.b)) throw InputError("spanning tree contains a cycle");
  }
  if (graph != nullptr) {
    std::vector<Edge> sorted = graph->edges;
    for (auto& e : sorted) e = normalized(e);
    std::sort(sorted.begin(), sorted.end(), edge_less);
    for (const auto& e : tree.edges) {
      if (!std::binary_search(sorted.begin(), sorted.end(), normalized(e), edge_less)) {
        throw InputError("spanning tree edge is not a graph edge");
      }
    }
  }
}

SpanningTree prim_mst(const Graph& graph, std::span<const double> weights) {
  const int V = graph.vertex_count;
  if (V < 1) throw InputError("cannot build a spanning tree of an empty graph");
  if (weights.size() != graph.edges.size()) {
    throw InputError("edge weight count does not match edge count");
  }
  std::vector<int> offset(V + 1, 0);
  for (const auto& e : graph.edges) {
    ++offset[e.a + 1];
    ++offset[e.b + 1];
  }
  std::partial_sum(offset.begin(), offset.end(), offset.begin());
  std::vector<int> incident(offset.back());
  {
    std::vector<int> fill(offset.begin(), offset.end() - 1);
    for (int i = 0; i < static_cast<int>(graph.edges.size()); ++i) {
      incident[fill[graph.edges[i].a]++] = i;
      incident[fill[graph.edges[i].b]++] = i;
    }
  }

  using Key = std::pair<double, int>;  // (weight, edge index)
  std::priority_queue<Key, std::vector<Key>, std::greater<>> heap;
  std::vector<char> in_tree(V, 0);
  SpanningTree tree{V, {}};
  tree.edges.reserve(V - 1);
  auto visit = [&](int v) {
    in_tree[v] = 1;
    for (int p = offset[v]; p < offset[v + 1]; ++p) {
      const int i = incident[p];
      const int other = graph.edges[i].a == v ? graph.edges[i].b : graph.edges[i].a;
      if (!in_tree[other]) heap.emplace(weights[i], i);
    }
  };
  visit(0);
  while (!heap.empty() && static_cast<int>(tree.edges.size()) < V - 1) {
    const auto [w, i] = heap.top();
    heap.pop();
    const Edge& e = graph.edges[i];
    const int next = in_tree[e.a] ? (in_tree[e.b] ? -1 : e.b) : e.a;
    if (next < 0) continue;
    tree.edges.push_back(normalized(e));
    visit(next);
  }
  if (static_cast<int>(tree.edges.size()) != V - 1) {
    throw InputError("graph is disconnected; no spanning tree exists");
  }
  std::sort(tree.edges.begin(), tree.edges.end(), edge_less);
  return tree;
}

SpanningTree sample_rst(const Graph& graph, Rng& rng) {
  std::vector<double> weights(graph.edges.size());
  for (auto& w : weights) w = uniform(rng);
  return prim_mst(graph, weights);
}

std::shared_ptr<const TreePartition::Index> TreePartition::make_index(SpanningTree tree) {
  auto index = std::make_shared<Index>();
  const int V = tree.vertex_count;
  index->offset.assign(V + 1, 0);
  for (const auto& e : tree.edges) {
    ++index->offset[e.a + 1];
    ++index->offset[e.b + 1];
  }
  std::partial_sum(index->offset.begin(), index->offset.end(), index->offset.begin());
  index->neighbour.resize(index->offset.back());
  index->via_edge.resize(index->offset.back());
  std::vector<int> fill(index->offset.begin(), index->offset.end() - 1);
  for (int i = 0; i < static_cast<int>(tree.edges.size()); ++i) {
    const Edge& e = tree.edges[i];
    index->neighbour[fill[e.a]] = e.b;
    index->via_edge[fill[e.a]++] = i;
    index->neighbour[fill[e.b]] = e.a;
    index->via_edge[fill[e.b]++] = i;
  }
  index->tree = std::move(tree);
  return index;
}

TreePartition::TreePartition(SpanningTree tree, std::vector<char> cut_mask) {
  for (auto& e : tree.edges) e = normalized(e);
  check_spanning_tree(tree);
  if (cut_mask.size() != tree.edges.size()) {
    throw InputError("cut mask length does not match tree edge count");
  }
  if (!std::is_sorted(tree.edges.begin(), tree.edges.end(), edge_less)) {
    std::vector<int> order(tree.edges.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return edge_less(tree.edges[x], tree.edges[y]); });
    SpanningTree sorted{tree.vertex_count, {}};
    std::vector<char> mask;
    for (int i : order) {
      sorted.edges.push_back(tree.edges[i]);
      mask.push_back(cut_mask[i]);
    }
    tree = std::move(sorted);
    cut_mask = std::move(mask);
  }
  index_ = make_index(std::move(tree));
  cut_mask_ = std::move(cut_mask);
  relabel();
}

TreePartition::TreePartition(std::shared_ptr<const Index> index, std::vector<char> cut_mask)
    : index_(std::move(index)), cut_mask_(std::move(cut_mask)) {
  relabel();
}

void TreePartition::relabel() {
  const int V = vertex_count();
  labels_.assign(V, -1);
  std::vector<int> stack;
  int next = 0;
  for (int start = 0; start < V; ++start) {
    if (labels_[start] >= 0) continue;
    labels_[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int p = index_->offset[v]; p < index_->offset[v + 1]; ++p) {
        const int w = index_->neighbour[p];
        if (labels_[w] < 0 && !cut_mask_[index_->via_edge[p]]) {
          labels_[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  k_ = next;
}

std::vector<int> TreePartition::cut_edges() const {
  std::vector<int> out;
  for (int e = 0; e < tree_edge_count(); ++e) {
    if (cut_mask_[e]) out.push_back(e);
  }
  return out;
}

TreePartition TreePartition::with_cut(int e) const {
  auto mask = cut_mask_;
  mask.at(e) = 1;
  return TreePartition(index_, std::move(mask));
}

TreePartition TreePartition::without_cut(int e) const {
  auto mask = cut_mask_;
  mask.at(e) = 0;
  return TreePartition(index_, std::move(mask));
}

std::vector<int> TreePartition::side_of(int e) const {
  const Edge& edge = tree_edge(e);
  std::vector<int> side{edge.b};
  std::vector<char> seen(vertex_count(), 0);
  seen[edge.a] = 1;
  seen[edge.b] = 1;
  for (std::size_t head = 0; head < side.size(); ++head) {
    const int v = side[head];
    for (int p = index_->offset[v]; p < index_->offset[v + 1]; ++p) {
      const int w = index_->neighbour[p];
      const int via = index_->via_edge[p];
      if (!seen[w] && via != e && !cut_mask_[via]) {
        seen[w] = 1;
        side.push_back(w);
      }
    }
  }
  return side;
}

TreePartition induce_partition(const SpanningTree& tree, std::span<const Edge> cut_set) {
  std::vector<Edge> edges = tree.edges;
  for (auto& e : edges) e = normalized(e);
  std::vector<char> mask(edges.size(), 0);
  for (const auto& raw : cut_set) {
    const Edge c = normalized(raw);
    const auto it = std::find(edges.begin(), edges.end(), c);
    if (it == edges.end()) {
      throw InputError("cut edge (" + std::to_string(c.a) + "," + std::to_string(c.b) +
                       ") is not a tree edge");
    }
    mask[it - edges.begin()] = 1;
  }
  return TreePartition(SpanningTree{tree.vertex_count, std::move(edges)}, std::move(mask));
}

TreePartition resample_tree_given_partition(const Graph& graph, const TreePartition& state,
                                            Rng& rng) {
  const auto& labels = state.labels();
  std::vector<double> weights(graph.edges.size());
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const Edge& e = graph.edges[i];
    weights[i] = labels[e.a] == labels[e.b] ? uniform(rng, 0.0, 0.5) : uniform(rng, 0.5, 1.0);
  }
  SpanningTree tree = prim_mst(graph, weights);
  std::vector<char> mask(tree.edges.size());
  for (std::size_t i = 0; i < tree.edges.size(); ++i) {
    mask[i] = labels[tree.edges[i].a] != labels[tree.edges[i].b];
  }
  return TreePartition(std::move(tree), std::move(mask));
}

EdgeClasses classify_tree_edges(const TreePartition& state) {
  EdgeClasses classes;
  for (int e = 0; e < state.tree_edge_count(); ++e) {
    (state.is_cut(e) ? classes.between : classes.within).push_back(e);
  }
  return classes;
}

}  // namespace spatrpm
