#include "spatrpm/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace spatrpm {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw InputError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw InputError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("config key '" + where + "." + key + "' has the wrong type");
  }
}

const char* change_mode_name(ChangeMode m) {
  return m == ChangeMode::kJoint ? "joint" : "sequential";
}

}  // namespace

HyperParams HyperSpec::resolve(int n) const {
  if (!explicit_values) return select_hyperparams(n, rates);
  HyperParams hp;
  if (!K || !log_lambda) hp = select_hyperparams(n, rates);
  hp.constants = rates;
  if (K) hp.K = *K;
  if (log_lambda) hp.log_lambda = *log_lambda;
  if (hp.K < 1) throw InputError("hyper.K must be positive");
  return hp;
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  c.threads = default_thread_count();
  if (j.is_null()) return c;
  reject_unknown(j, "", {"model", "sampler", "hyper", "grid", "io", "threads"});

  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, "model", {"sigma2", "gamma"});
    read_if(m, "sigma2", c.model.sigma2, "model");
    read_if(m, "gamma", c.model.gamma, "model");
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    reject_unknown(s, "sampler", {"iterations", "burn_in", "thinning", "seed", "k_max", "chains",
                                  "move_probs", "change_mode", "check_cache"});
    read_if(s, "iterations", c.sampler.n_iters, "sampler");
    read_if(s, "burn_in", c.sampler.burn_in, "sampler");
    read_if(s, "thinning", c.sampler.thinning, "sampler");
    read_if(s, "seed", c.sampler.seed, "sampler");
    read_if(s, "k_max", c.sampler.k_max, "sampler");
    read_if(s, "chains", c.sampler.n_chains, "sampler");
    read_if(s, "check_cache", c.sampler.check_cache, "sampler");
    if (s.contains("change_mode")) {
      std::string mode;
      read_if(s, "change_mode", mode, "sampler");
      if (mode == "joint") {
        c.sampler.change_mode = ChangeMode::kJoint;
      } else if (mode == "sequential") {
        c.sampler.change_mode = ChangeMode::kSequential;
      } else {
        throw InputError("sampler.change_mode must be 'joint' or 'sequential'");
      }
    }
    if (s.contains("move_probs")) {
      const auto& p = s.at("move_probs");
      reject_unknown(p, "sampler.move_probs", {"birth", "death", "change", "hyper"});
      read_if(p, "birth", c.sampler.base_probs.birth, "sampler.move_probs");
      read_if(p, "death", c.sampler.base_probs.death, "sampler.move_probs");
      read_if(p, "change", c.sampler.base_probs.change, "sampler.move_probs");
      read_if(p, "hyper", c.sampler.base_probs.hyper, "sampler.move_probs");
    }
  }
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    reject_unknown(h, "hyper", {"K", "log_lambda", "c_b", "alpha_b", "c_p", "alpha_p"});
    const bool has_explicit = h.contains("K") || h.contains("log_lambda");
    const bool has_rate = h.contains("c_b") || h.contains("alpha_b") || h.contains("c_p") ||
                          h.contains("alpha_p");
    if (has_explicit && has_rate) {
      throw InputError("hyper: give either explicit K/log_lambda or rate constants, not both");
    }
    c.hyper.explicit_values = has_explicit;
    if (h.contains("K")) {
      int K = 0;
      read_if(h, "K", K, "hyper");
      c.hyper.K = K;
    }
    if (h.contains("log_lambda")) {
      double ll = 0.0;
      read_if(h, "log_lambda", ll, "hyper");
      c.hyper.log_lambda = ll;
    }
    read_if(h, "c_b", c.hyper.rates.c_b, "hyper");
    read_if(h, "alpha_b", c.hyper.rates.alpha_b, "hyper");
    read_if(h, "c_p", c.hyper.rates.c_p, "hyper");
    read_if(h, "alpha_p", c.hyper.rates.alpha_p, "hyper");
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    reject_unknown(g, "grid", {"restrict_to_largest_component"});
    read_if(g, "restrict_to_largest_component", c.grid.restrict_to_largest_component, "grid");
  }
  if (j.contains("io")) {
    const auto& io = j.at("io");
    reject_unknown(io, "io", {"data", "output_dir"});
    read_if(io, "data", c.data_path, "io");
    read_if(io, "output_dir", c.output_dir, "io");
  }
  read_if(j, "threads", c.threads, "");
  if (c.threads < 1) throw InputError("threads must be positive");

  c.model.validate();
  c.sampler.validate();
  if (c.hyper.K && *c.hyper.K < 1) throw InputError("hyper.K must be positive");
  return c;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const RunConfig& c) {
  json hyper;
  if (c.hyper.explicit_values) {
    if (c.hyper.K) hyper["K"] = *c.hyper.K;
    if (c.hyper.log_lambda) hyper["log_lambda"] = *c.hyper.log_lambda;
  } else {
    hyper = {{"c_b", c.hyper.rates.c_b},
             {"alpha_b", c.hyper.rates.alpha_b},
             {"c_p", c.hyper.rates.c_p},
             {"alpha_p", c.hyper.rates.alpha_p}};
  }
  const auto& p = c.sampler.base_probs;
  return {{"model", {{"sigma2", c.model.sigma2}, {"gamma", c.model.gamma}}},
          {"sampler",
           {{"iterations", c.sampler.n_iters},
            {"burn_in", c.sampler.burn_in},
            {"thinning", c.sampler.thinning},
            {"seed", c.sampler.seed},
            {"k_max", c.sampler.k_max},
            {"chains", c.sampler.n_chains},
            {"change_mode", change_mode_name(c.sampler.change_mode)},
            {"check_cache", c.sampler.check_cache},
            {"move_probs",
             {{"birth", p.birth}, {"death", p.death}, {"change", p.change}, {"hyper", p.hyper}}}}},
          {"hyper", hyper},
          {"grid", {{"restrict_to_largest_component", c.grid.restrict_to_largest_component}}},
          {"io", {{"data", c.data_path}, {"output_dir", c.output_dir}}},
          {"threads", c.threads}};
}

int default_thread_count() {
  if (const char* env = std::getenv("SPATRPM_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

}  // namespace spatrpm
