#include "spatrpm/posterior_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace spatrpm {

using nlohmann::json;

json sample_to_json(const PosteriorSample& sample) {
  json labels = json::array();
  for (int l : sample.block_labels) labels.push_back(l + 1);
  json thetas = json::array();
  for (const auto& t : sample.thetas) {
    json row = json::array();
    for (Eigen::Index i = 0; i < t.size(); ++i) row.push_back(t[i]);
    thetas.push_back(std::move(row));
  }
  json record;
  record["iter"] = sample.iteration;
  record["k"] = sample.k;
  record["labels"] = std::move(labels);
  record["thetas"] = std::move(thetas);
  record["log_lik"] = sample.log_lik;
  return record;
}

PosteriorSample sample_from_json(const json& record) {
  PosteriorSample s;
  try {
    s.iteration = record.at("iter").get<long>();
    s.k = record.at("k").get<int>();
    for (int l : record.at("labels")) {
      if (l < 1 || l > s.k) throw InputError("sample label out of range 1..k");
      s.block_labels.push_back(l - 1);
    }
    for (const auto& row : record.at("thetas")) {
      const auto values = row.get<std::vector<double>>();
      s.thetas.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                           static_cast<Eigen::Index>(values.size())));
    }
    s.log_lik = record.at("log_lik").get<double>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed posterior sample: ") + e.what());
  }
  if (static_cast<int>(s.thetas.size()) != s.k) {
    throw InputError("posterior sample has " + std::to_string(s.thetas.size()) +
                     " coefficient vectors for k=" + std::to_string(s.k));
  }
  return s;
}

void write_samples_jsonl(std::ostream& out, const std::vector<PosteriorSample>& samples) {
  for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
}

std::vector<PosteriorSample> read_samples_jsonl(std::istream& in) {
  std::vector<PosteriorSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError("samples line " + std::to_string(line_no) + ": " + e.what());
    }
    samples.push_back(sample_from_json(record));
  }
  return samples;
}

std::vector<PosteriorSample> read_samples_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_samples_jsonl(in);
}

json diagnostics_to_json(const std::vector<ChainDiagnostics>& chains) {
  json out = json::array();
  for (const auto& d : chains) {
    json moves;
    for (std::size_t m = 0; m < kMoveNames.size(); ++m) {
      const long proposed = d.counts.proposed[m];
      const long accepted = d.counts.accepted[m];
      moves[kMoveNames[m]] = {
          {"proposed", proposed},
          {"accepted", accepted},
          {"rejected", proposed - accepted},
          {"acceptance_rate", proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0}};
    }
    out.push_back({{"chain", d.chain},
                   {"seconds", d.seconds},
                   {"moves", moves},
                   {"k_trace", d.k_trace}});
  }
  return json{{"chains", out}};
}

json grid_to_json(const BlockGrid& grid) {
  return {{"K", grid.K()}, {"active_cells", grid.active_cells()}};
}

BlockGrid grid_from_json(const json& j) {
  try {
    return BlockGrid(j.at("K").get<int>(), j.at("active_cells").get<std::vector<int>>());
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed grid description: ") + e.what());
  }
}

}  // namespace spatrpm
