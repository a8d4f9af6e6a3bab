#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatrpm/error.hpp"

namespace spatrpm {

// A point of the unit square. `h` is the horizontal coordinate, `v` the
// vertical one.
struct Location {
  double h = 0.0;
  double v = 0.0;
};

bool in_unit_square(const Location& s);

// Observations {s_i, x(s_i), y(s_i)}. Row i of `covariates` belongs to
// locations[i] and responses[i].
struct Dataset {
  std::vector<Location> locations;
  Eigen::MatrixXd covariates;
  Eigen::VectorXd responses;
  std::vector<std::string> covariate_names;

  std::size_t size() const { return locations.size(); }
  int dim() const { return static_cast<int>(covariates.cols()); }
};

// Throws InputError on shape mismatch, d < 1, non-finite values or
// locations outside [0,1]^2.
void validate(const Dataset& data);

// CSV with header `s_h,s_v,x1,...,xd,y`. Covariate column names are free,
// but the first two columns must be s_h and s_v and the last must be y.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);

// Location-only CSV (`s_h,s_v,x1,...,xd`) used for prediction requests.
struct PointSet {
  std::vector<Location> locations;
  Eigen::MatrixXd covariates;
};
PointSet read_points_csv(std::istream& in);
PointSet read_points_csv(const std::string& path);

struct Cell {
  int col = 0;
  int row = 0;
};

// Floor rule, clamped so that a coordinate of exactly 1 lands in the last
// cell.
Cell cell_of(const Location& s, int K);

// Undirected edge between two active blocks, stored with a < b.
struct Edge {
  int a = 0;
  int b = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct GridOptions {
  // When the active-block graph is disconnected, keep only its largest
  // component instead of failing. Observations in dropped blocks are
  // excluded from the fit.
  bool restrict_to_largest_component = false;
};

class DisconnectedGridError : public Error {
 public:
  DisconnectedGridError(const std::string& what, std::vector<int> sizes)
      : Error(what, true), component_sizes_(std::move(sizes)) {}

  const std::vector<int>& component_sizes() const { return component_sizes_; }

 private:
  std::vector<int> component_sizes_;
};

// K x K discretization of the unit square restricted to cells that contain
// at least one observation. Blocks are numbered 0..V-1 in increasing
// row-major cell id (cell id = row * K + col). Immutable once built.
class BlockGrid {
 public:
  BlockGrid(int K, std::vector<int> active_cells);

  int K() const { return K_; }
  int block_count() const { return static_cast<int>(active_cells_.size()); }
  const std::vector<int>& active_cells() const { return active_cells_; }
  const std::vector<Edge>& adjacency() const { return adjacency_; }

  // Block of observation i, or -1 if the observation was dropped together
  // with a minor component.
  const std::vector<int>& block_of_observation() const { return block_of_obs_; }
  const std::vector<int>& block_counts() const { return block_counts_; }
  int observation_count() const { return used_observations_; }

  // Connected components of the active graph at build time (before any
  // restriction). A grid accepted for fitting always reports one component
  // among its own blocks.
  int component_count() const { return static_cast<int>(component_sizes_.size()); }
  const std::vector<int>& component_sizes() const { return component_sizes_; }

  // Active block whose cell contains s, if any.
  std::optional<int> block_of_point(const Location& s) const;

  // Like block_of_point, but inactive cells resolve to the nearest active
  // block by centroid distance (ties to the smaller block id).
  int resolve_block(const Location& s) const;

  Location block_centroid(int block) const;
  Cell block_cell(int block) const;

 private:
  friend BlockGrid build_grid(const Dataset&, int, const GridOptions&);

  void build_adjacency();
  void build_nearest_table();

  int K_;
  std::vector<int> active_cells_;
  std::vector<int> cell_to_block_;
  std::vector<int> nearest_block_;
  std::vector<Edge> adjacency_;
  std::vector<int> block_of_obs_;
  std::vector<int> block_counts_;
  std::vector<int> component_sizes_;
  int used_observations_ = 0;
};

BlockGrid build_grid(const Dataset& data, int K, const GridOptions& options = {});

}  // namespace spatrpm
