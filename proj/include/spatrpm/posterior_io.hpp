#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "spatrpm/block_grid.hpp"
#include "spatrpm/mcmc_sampler.hpp"

namespace spatrpm {

// One JSON object per line:
//   {"iter":..., "k":..., "labels":[...], "thetas":[[...],...], "log_lik":...}
// Labels are written 1-based; PosteriorSample keeps them 0-based.
nlohmann::json sample_to_json(const PosteriorSample& sample);
PosteriorSample sample_from_json(const nlohmann::json& record);

void write_samples_jsonl(std::ostream& out, const std::vector<PosteriorSample>& samples);
std::vector<PosteriorSample> read_samples_jsonl(std::istream& in);
std::vector<PosteriorSample> read_samples_jsonl(const std::string& path);

nlohmann::json diagnostics_to_json(const std::vector<ChainDiagnostics>& chains);

// K and the active cell list, which is enough to rebuild the block grid
// (adjacency and block numbering are derived from them).
nlohmann::json grid_to_json(const BlockGrid& grid);
BlockGrid grid_from_json(const nlohmann::json& j);

}  // namespace spatrpm
