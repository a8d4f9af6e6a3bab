#pragma once

#include <memory>
#include <span>
#include <vector>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/random.hpp"

namespace spatrpm {

// Undirected simple graph on vertices 0..vertex_count-1.
struct Graph {
  int vertex_count = 0;
  std::vector<Edge> edges;
};

Graph graph_of(const BlockGrid& grid);

// Spanning tree with edges sorted lexicographically, so two trees over the
// same vertex set compare equal iff they have the same edge set.
struct SpanningTree {
  int vertex_count = 0;
  std::vector<Edge> edges;

  friend bool operator==(const SpanningTree&, const SpanningTree&) = default;
};

// Throws InputError unless `tree` has V-1 distinct in-range edges and no
// cycle. Optionally checks that every edge belongs to `graph`.
void check_spanning_tree(const SpanningTree& tree, const Graph* graph = nullptr);

// Minimum spanning tree under the total order (weight, edge index), which
// makes the result unique even if two weights collide. O(E log V).
SpanningTree prim_mst(const Graph& graph, std::span<const double> weights);

// Random minimum spanning tree: i.i.d. Unif(0,1) weights, then Prim.
SpanningTree sample_rst(const Graph& graph, Rng& rng);

// A spanning tree plus a set of cut tree edges. Removing the cut edges
// leaves k = |cut| + 1 components; labels number them 0..k-1 in order of
// their smallest vertex, so two states describing the same partition carry
// identical label vectors.
class TreePartition {
 public:
  // `cut_mask` has one entry per tree edge.
  TreePartition(SpanningTree tree, std::vector<char> cut_mask);

  const SpanningTree& tree() const { return index_->tree; }
  int vertex_count() const { return index_->tree.vertex_count; }
  int tree_edge_count() const { return static_cast<int>(cut_mask_.size()); }
  const Edge& tree_edge(int e) const { return index_->tree.edges[e]; }

  const std::vector<char>& cut_mask() const { return cut_mask_; }
  bool is_cut(int e) const { return cut_mask_[e] != 0; }
  std::vector<int> cut_edges() const;

  const std::vector<int>& labels() const { return labels_; }
  int label(int v) const { return labels_[v]; }
  int k() const { return k_; }

  // Same tree with tree edge e added to / removed from the cut set.
  TreePartition with_cut(int e) const;
  TreePartition without_cut(int e) const;

  // Vertices reachable from tree_edge(e).b without crossing e or a cut edge.
  std::vector<int> side_of(int e) const;

 private:
  struct Index {
    SpanningTree tree;
    // CSR adjacency over the tree: neighbours of v are [offset[v], offset[v+1]).
    std::vector<int> offset;
    std::vector<int> neighbour;
    std::vector<int> via_edge;
  };

  TreePartition(std::shared_ptr<const Index> index, std::vector<char> cut_mask);
  static std::shared_ptr<const Index> make_index(SpanningTree tree);
  void relabel();

  std::shared_ptr<const Index> index_;
  std::vector<char> cut_mask_;
  std::vector<int> labels_;
  int k_ = 1;
};

// Cut set given as vertex pairs; each must be a tree edge.
TreePartition induce_partition(const SpanningTree& tree, std::span<const Edge> cut_set);

// Redraws weights on every graph edge, Unif(0,1/2) inside a cluster and
// Unif(1/2,1) across clusters, and takes the MST. The new tree induces the
// same partition; its cut set is the tree edges that cross clusters.
TreePartition resample_tree_given_partition(const Graph& graph, const TreePartition& state,
                                            Rng& rng);

struct EdgeClasses {
  std::vector<int> within;   // uncut tree edges, candidates for a split
  std::vector<int> between;  // cut tree edges, candidates for a merge
};

EdgeClasses classify_tree_edges(const TreePartition& state);

}  // namespace spatrpm
