#include "spatrpm/block_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "spatrpm/union_find.hpp"

namespace spatrpm {

bool in_unit_square(const Location& s) {
  return std::isfinite(s.h) && std::isfinite(s.v) && s.h >= 0.0 && s.h <= 1.0 &&
         s.v >= 0.0 && s.v <= 1.0;
}

void validate(const Dataset& data) {
  const auto n = data.locations.size();
  if (n == 0) throw InputError("dataset is empty");
  if (static_cast<std::size_t>(data.covariates.rows()) != n ||
      static_cast<std::size_t>(data.responses.size()) != n) {
    std::ostringstream msg;
    msg << "dataset row counts differ: " << n << " locations, " << data.covariates.rows()
        << " covariate rows, " << data.responses.size() << " responses";
    throw InputError(msg.str());
  }
  if (data.covariates.cols() < 1) throw InputError("dataset needs at least one covariate");
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (!in_unit_square(data.locations[i])) {
      throw InputError("observation " + std::to_string(i) + " lies outside [0,1]^2");
    }
    if (!data.covariates.row(row).allFinite() || !std::isfinite(data.responses[row])) {
      throw InputError("observation " + std::to_string(i) + " has a non-finite value");
    }
  }
}

Cell cell_of(const Location& s, int K) {
  if (K < 1) throw InputError("grid resolution K must be positive");
  if (!in_unit_square(s)) throw InputError("location outside [0,1]^2");
  auto clamp = [K](double u) {
    return std::min(static_cast<int>(std::floor(u * K)), K - 1);
  };
  return {clamp(s.h), clamp(s.v)};
}

BlockGrid::BlockGrid(int K, std::vector<int> active_cells)
    : K_(K), active_cells_(std::move(active_cells)) {
  if (K_ < 1) throw InputError("grid resolution K must be positive");
  std::sort(active_cells_.begin(), active_cells_.end());
  active_cells_.erase(std::unique(active_cells_.begin(), active_cells_.end()),
                      active_cells_.end());
  const long long cells = static_cast<long long>(K_) * K_;
  cell_to_block_.assign(static_cast<std::size_t>(cells), -1);
  for (int b = 0; b < block_count(); ++b) {
    const int c = active_cells_[b];
    if (c < 0 || c >= cells) throw InputError("active cell id out of range");
    cell_to_block_[c] = b;
  }
  block_counts_.assign(active_cells_.size(), 0);
  build_adjacency();
  build_nearest_table();

  UnionFind uf(block_count());
  for (const auto& e : adjacency_) uf.unite(e.a, e.b);
  std::map<int, int> sizes;
  for (int b = 0; b < block_count(); ++b) ++sizes[uf.find(b)];
  for (const auto& [root, size] : sizes) component_sizes_.push_back(size);
  std::sort(component_sizes_.rbegin(), component_sizes_.rend());
}

void BlockGrid::build_adjacency() {
  adjacency_.clear();
  for (int b = 0; b < block_count(); ++b) {
    const int c = active_cells_[b];
    const int col = c % K_;
    const int row = c / K_;
    // Right and upper neighbours only, so each side is listed once.
    if (col + 1 < K_) {
      const int nb = cell_to_block_[c + 1];
      if (nb >= 0) adjacency_.push_back({b, nb});
    }
    if (row + 1 < K_) {
      const int nb = cell_to_block_[c + K_];
      if (nb >= 0) adjacency_.push_back({b, nb});
    }
  }
}

void BlockGrid::build_nearest_table() {
  nearest_block_ = cell_to_block_;
  if (active_cells_.empty()) return;
  for (int c = 0; c < K_ * K_; ++c) {
    if (nearest_block_[c] >= 0) continue;
    const int col = c % K_;
    const int row = c / K_;
    long long best = std::numeric_limits<long long>::max();
    int best_block = -1;
    // Centroid distances compare exactly as integer cell offsets.
    for (int b = 0; b < block_count(); ++b) {
      const long long dc = active_cells_[b] % K_ - col;
      const long long dr = active_cells_[b] / K_ - row;
      const long long d2 = dc * dc + dr * dr;
      if (d2 < best) {
        best = d2;
        best_block = b;
      }
    }
    nearest_block_[c] = best_block;
  }
}

std::optional<int> BlockGrid::block_of_point(const Location& s) const {
  const Cell cell = cell_of(s, K_);
  const int b = cell_to_block_[cell.row * K_ + cell.col];
  if (b < 0) return std::nullopt;
  return b;
}

int BlockGrid::resolve_block(const Location& s) const {
  const Cell cell = cell_of(s, K_);
  return nearest_block_[cell.row * K_ + cell.col];
}

Cell BlockGrid::block_cell(int block) const {
  const int c = active_cells_.at(block);
  return {c % K_, c / K_};
}

Location BlockGrid::block_centroid(int block) const {
  const Cell cell = block_cell(block);
  return {(cell.col + 0.5) / K_, (cell.row + 0.5) / K_};
}

BlockGrid build_grid(const Dataset& data, int K, const GridOptions& options) {
  validate(data);
  if (K < 1) throw InputError("grid resolution K must be positive");
  std::vector<int> obs_cell(data.size());
  std::vector<int> cells;
  cells.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Cell cell = cell_of(data.locations[i], K);
    obs_cell[i] = cell.row * K + cell.col;
    cells.push_back(obs_cell[i]);
  }

  BlockGrid grid(K, cells);
  const std::vector<int> all_sizes = grid.component_sizes_;
  if (grid.component_count() > 1) {
    if (!options.restrict_to_largest_component) {
      std::ostringstream msg;
      msg << "active block graph at K=" << K << " has " << all_sizes.size()
          << " connected components (sizes:";
      for (int s : all_sizes) msg << ' ' << s;
      msg << "); lower K or enable restrict_to_largest_component";
      throw DisconnectedGridError(msg.str(), all_sizes);
    }
    UnionFind uf(grid.block_count());
    for (const auto& e : grid.adjacency_) uf.unite(e.a, e.b);
    int best_root = -1;
    int best_size = -1;
    for (int b = 0; b < grid.block_count(); ++b) {
      const int size = uf.set_size(b);
      // Ties resolve to the component holding the smallest block id.
      if (size > best_size) {
        best_size = size;
        best_root = uf.find(b);
      }
    }
    std::vector<int> kept;
    for (int b = 0; b < grid.block_count(); ++b) {
      if (uf.find(b) == best_root) kept.push_back(grid.active_cells_[b]);
    }
    grid = BlockGrid(K, kept);
    grid.component_sizes_ = all_sizes;
  }

  grid.block_of_obs_.assign(data.size(), -1);
  grid.used_observations_ = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int b = grid.cell_to_block_[obs_cell[i]];
    grid.block_of_obs_[i] = b;
    if (b >= 0) {
      ++grid.block_counts_[b];
      ++grid.used_observations_;
    }
  }
  return grid;
}

}  // namespace spatrpm
