#pragma once

// Experiment configuration: JSON schema, defaults, validation.
//
// {
//   "dataset": "data.tsv",              // relative paths resolve against the config file
//   "sample_sizes": [1000, 2000, 5000, 10000],
//   "latent_dims": [8, 16, 32, 64],
//   "projection": "pca" | "random",
//   "train_fraction": 0.8,
//   "lambda": 1.0,
//   "methods": ["sa", "ga", "greedy", "random", "bo"],
//   "master_seed": 0,
//   "seeds": 5,
//   "threads": 1,
//   "output_dir": "results",
//   "optimizer": { "annealing": {...}, "genetic": {...}, "random_search": {...}, "latent_bo": {...} }
// }
//
// Unknown keys are rejected at every level.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "latentqubo/common.hpp"
#include "latentqubo/optimizers.hpp"
#include "latentqubo/projection.hpp"

namespace latentqubo {

inline constexpr const char* kVersion = "0.3.0";

struct ExperimentConfig {
  std::filesystem::path dataset;
  std::vector<std::size_t> sample_sizes{1000, 2000, 5000, 10000};
  std::vector<std::size_t> latent_dims{8, 16, 32, 64};
  ProjectionKind projection = ProjectionKind::pca;
  double train_fraction = 0.8;
  double lambda = 1.0;
  OptimizerParams optimizer;
  std::vector<Method> methods{Method::annealing, Method::genetic, Method::greedy, Method::random_search,
                              Method::latent_bo};
  std::uint64_t master_seed = 0;
  std::size_t seeds = 5;
  std::size_t threads = 1;
  std::filesystem::path output_dir = "results";

  void validate() const {
    auto require = [](bool ok, const std::string& msg) {
      if (!ok) throw InvalidArgument("config: " + msg);
    };
    require(!dataset.empty(), "'dataset' is required");
    require(!sample_sizes.empty(), "'sample_sizes' must be nonempty");
    for (auto s : sample_sizes) require(s >= 2, "sample sizes must be >= 2");
    require(!latent_dims.empty(), "'latent_dims' must be nonempty");
    for (auto m : latent_dims) require(m >= 1, "latent dims must be >= 1");
    require(train_fraction > 0 && train_fraction < 1, "'train_fraction' must lie in (0, 1)");
    require(lambda > 0, "'lambda' must be > 0");
    require(!methods.empty(), "'methods' must be nonempty");
    require(std::set<Method>(methods.begin(), methods.end()).size() == methods.size(), "'methods' has duplicates");
    require(seeds >= 1, "'seeds' must be >= 1");
    require(threads >= 1, "'threads' must be >= 1");
    optimizer.validate();
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!j.is_object()) throw InvalidArgument("config: " + where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidArgument("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config: bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read_if(j, key, v, where);
  out = v;
}

}  // namespace detail

inline OptimizerParams optimizer_params_from_json(const nlohmann::json& j) {
  using detail::read_if;
  using detail::read_optional;
  OptimizerParams p;
  detail::reject_unknown_keys(j, {"annealing", "genetic", "random_search", "latent_bo", "trace"}, "optimizer");
  read_if(j, "trace", p.trace, "optimizer");
  if (j.contains("annealing")) {
    const auto& a = j.at("annealing");
    const std::string w = "optimizer.annealing";
    detail::reject_unknown_keys(
        a, {"iterations", "initial_temperature", "scale_samples", "cooling_ratio", "final_temperature_ratio"}, w);
    read_if(a, "iterations", p.annealing.iterations, w);
    read_if(a, "initial_temperature", p.annealing.initial_temperature, w);
    read_if(a, "scale_samples", p.annealing.scale_samples, w);
    read_optional(a, "cooling_ratio", p.annealing.cooling_ratio, w);
    read_if(a, "final_temperature_ratio", p.annealing.final_temperature_ratio, w);
  }
  if (j.contains("genetic")) {
    const auto& g = j.at("genetic");
    const std::string w = "optimizer.genetic";
    detail::reject_unknown_keys(g,
                                {"population", "generations", "tournament_size", "mixing_probability",
                                 "mutation_rate", "elite_count"},
                                w);
    read_if(g, "population", p.genetic.population, w);
    read_if(g, "generations", p.genetic.generations, w);
    read_if(g, "tournament_size", p.genetic.tournament_size, w);
    read_if(g, "mixing_probability", p.genetic.mixing_probability, w);
    read_optional(g, "mutation_rate", p.genetic.mutation_rate, w);
    read_if(g, "elite_count", p.genetic.elite_count, w);
  }
  if (j.contains("random_search")) {
    const auto& r = j.at("random_search");
    detail::reject_unknown_keys(r, {"samples"}, "optimizer.random_search");
    read_if(r, "samples", p.random_search.samples, "optimizer.random_search");
  }
  if (j.contains("latent_bo")) {
    const auto& b = j.at("latent_bo");
    const std::string w = "optimizer.latent_bo";
    detail::reject_unknown_keys(b, {"iterations", "candidate_pool", "exploration", "length_scale"}, w);
    read_if(b, "iterations", p.latent_bo.iterations, w);
    read_if(b, "candidate_pool", p.latent_bo.candidate_pool, w);
    read_if(b, "exploration", p.latent_bo.exploration, w);
    read_optional(b, "length_scale", p.latent_bo.length_scale, w);
  }
  return p;
}

inline nlohmann::json to_json(const OptimizerParams& p) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {
      {"trace", p.trace},
      {"annealing",
       {{"iterations", p.annealing.iterations},
        {"initial_temperature", p.annealing.initial_temperature},
        {"scale_samples", p.annealing.scale_samples},
        {"cooling_ratio", opt(p.annealing.cooling_ratio)},
        {"final_temperature_ratio", p.annealing.final_temperature_ratio}}},
      {"genetic",
       {{"population", p.genetic.population},
        {"generations", p.genetic.generations},
        {"tournament_size", p.genetic.tournament_size},
        {"mixing_probability", p.genetic.mixing_probability},
        {"mutation_rate", opt(p.genetic.mutation_rate)},
        {"elite_count", p.genetic.elite_count}}},
      {"random_search", {{"samples", p.random_search.samples}}},
      {"latent_bo",
       {{"iterations", p.latent_bo.iterations},
        {"candidate_pool", p.latent_bo.candidate_pool},
        {"exploration", p.latent_bo.exploration},
        {"length_scale", opt(p.latent_bo.length_scale)}}},
  };
}

/// Parses a config document. Relative dataset/output paths are resolved
/// against `base_dir` when it is nonempty.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::read_if;
  detail::reject_unknown_keys(j,
                              {"dataset", "sample_sizes", "latent_dims", "projection", "train_fraction", "lambda",
                               "methods", "master_seed", "seeds", "threads", "output_dir", "optimizer"},
                              "config");
  ExperimentConfig c;
  std::string dataset;
  read_if(j, "dataset", dataset, "config");
  c.dataset = dataset;
  if (!c.dataset.empty() && c.dataset.is_relative() && !base_dir.empty()) c.dataset = base_dir / c.dataset;
  read_if(j, "sample_sizes", c.sample_sizes, "config");
  read_if(j, "latent_dims", c.latent_dims, "config");
  if (j.contains("projection")) {
    std::string kind;
    read_if(j, "projection", kind, "config");
    c.projection = parse_projection_kind(kind);
  }
  read_if(j, "train_fraction", c.train_fraction, "config");
  read_if(j, "lambda", c.lambda, "config");
  if (j.contains("methods")) {
    std::vector<std::string> names;
    read_if(j, "methods", names, "config");
    c.methods.clear();
    for (const auto& n : names) c.methods.push_back(parse_method(n));
  }
  read_if(j, "master_seed", c.master_seed, "config");
  read_if(j, "seeds", c.seeds, "config");
  read_if(j, "threads", c.threads, "config");
  if (j.contains("output_dir")) {
    std::string out;
    read_if(j, "output_dir", out, "config");
    c.output_dir = out;
    if (c.output_dir.is_relative() && !base_dir.empty()) c.output_dir = base_dir / c.output_dir;
  }
  if (j.contains("optimizer")) c.optimizer = optimizer_params_from_json(j.at("optimizer"));
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

/// Config echo for provenance. Paths are written as given.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  std::vector<std::string> methods;
  for (auto m : c.methods) methods.push_back(to_string(m));
  return {
      {"dataset", c.dataset.generic_string()},
      {"sample_sizes", c.sample_sizes},
      {"latent_dims", c.latent_dims},
      {"projection", to_string(c.projection)},
      {"train_fraction", c.train_fraction},
      {"lambda", c.lambda},
      {"methods", methods},
      {"master_seed", c.master_seed},
      {"seeds", c.seeds},
      {"threads", c.threads},
      {"optimizer", to_json(c.optimizer)},
  };
}

}  // namespace latentqubo
