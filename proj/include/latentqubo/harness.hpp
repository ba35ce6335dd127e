#pragma once

// Experiment driver: subsample -> split -> project -> binarize -> fit ->
// optimize -> evaluate over a (size, dim, seed) grid, plus aggregation and
// report files.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "latentqubo/binarization.hpp"
#include "latentqubo/config.hpp"
#include "latentqubo/dataset.hpp"
#include "latentqubo/evaluation.hpp"
#include "latentqubo/optimizers.hpp"
#include "latentqubo/projection.hpp"
#include "latentqubo/surrogate.hpp"

namespace latentqubo {

// ---------------------------------------------------------------------------
// Seeds

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of one subsystem in one grid cell:
///   mix64(fnv1a("<master>/<size>/<dim>/<seed index>/<label>")).
/// Cells and subsystems never share state, so adding a method or a dimension
/// leaves every existing seed unchanged.
inline std::uint64_t derive_seed(std::uint64_t master, std::size_t size, std::size_t dim, std::size_t seed_index,
                                 std::string_view label) {
  std::string key = std::to_string(master) + "/" + std::to_string(size) + "/" + std::to_string(dim) + "/" +
                    std::to_string(seed_index) + "/" + std::string(label);
  return mix64(fnv1a(key));
}

// ---------------------------------------------------------------------------
// Pipeline pieces shared with the CLI

/// Everything fitted on the training part of one cell.
struct FittedModel {
  Projector projector;
  Binarizer binarizer;
  QuboSurrogate surrogate;
  CodeBook train;
};

inline FittedModel fit_model(const FitnessDataset& train, std::size_t m, ProjectionKind kind, double lambda,
                             std::uint64_t projection_seed) {
  FittedModel model;
  model.projector = kind == ProjectionKind::pca ? fit_pca_projection(train.embeddings, m)
                                                : fit_random_projection(train.dim(), m, projection_seed);
  const Eigen::MatrixXd latents = project_rows(model.projector, train.embeddings);
  model.binarizer = fit_thresholds(latents);
  model.train = CodeBook::from_dataset(train, binarize_rows(model.binarizer, latents));
  model.surrogate = fit_qubo(model.train.codes, model.train.fitness, lambda);
  return model;
}

inline std::vector<BinaryCode> encode(const FittedModel& model, const FitnessDataset& ds) {
  return binarize_rows(model.binarizer, project_rows(model.projector, ds.embeddings));
}

// ---------------------------------------------------------------------------
// Report rows

struct RunRow {
  std::size_t size = 0;
  std::size_t dim = 0;
  std::string method;
  std::size_t seed = 0;
  bool ok = false;
  std::string error;
  RunMetrics metrics;
  double start_score = 0.0;
  double best_score = 0.0;
  std::size_t evaluations = 0;
  std::string start_code;
  std::string best_code;
};

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and sample standard deviation (n - 1 denominator; 0 for n = 1).
inline Stat mean_std(std::span<const double> v) {
  Stat s;
  if (v.empty()) return {std::nan(""), std::nan("")};
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct SummaryRow {
  std::size_t size = 0;
  std::size_t dim = 0;
  std::string method;
  std::size_t runs = 0;
  std::size_t failed = 0;
  Stat test_spearman;
  Stat improvement;
  Stat nn_true_fitness;
  Stat nn_percentile;
  Stat nn_hamming;
};

/// Groups rows by (size, dim, method) in first-appearance order and reports
/// mean +/- sample std over the successful rows of each group.
inline std::vector<SummaryRow> aggregate(std::span<const RunRow> rows) {
  std::vector<SummaryRow> out;
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> index;
  std::vector<std::array<std::vector<double>, 5>> values;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.size, r.dim, r.method);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      SummaryRow fresh;
      fresh.size = r.size;
      fresh.dim = r.dim;
      fresh.method = r.method;
      out.push_back(std::move(fresh));
      values.emplace_back();
    }
    auto& s = out[it->second];
    if (!r.ok) {
      ++s.failed;
      continue;
    }
    ++s.runs;
    auto& v = values[it->second];
    v[0].push_back(r.metrics.test_spearman);
    v[1].push_back(r.metrics.improvement);
    v[2].push_back(r.metrics.nn_true_fitness);
    v[3].push_back(r.metrics.nn_percentile);
    v[4].push_back(static_cast<double>(r.metrics.nn_hamming));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].test_spearman = mean_std(values[i][0]);
    out[i].improvement = mean_std(values[i][1]);
    out[i].nn_true_fitness = mean_std(values[i][2]);
    out[i].nn_percentile = mean_std(values[i][3]);
    out[i].nn_hamming = mean_std(values[i][4]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running

struct CellSeeds {
  std::uint64_t subsample = 0;
  std::uint64_t split = 0;
  std::uint64_t projection = 0;
  std::uint64_t start = 0;
  std::vector<std::uint64_t> methods;
};

inline CellSeeds cell_seeds(const ExperimentConfig& cfg, std::size_t size, std::size_t dim, std::size_t seed_index) {
  CellSeeds s;
  // Data draws ignore the latent dimension so every m sees the same records.
  s.subsample = derive_seed(cfg.master_seed, size, 0, seed_index, "subsample");
  s.split = derive_seed(cfg.master_seed, size, 0, seed_index, "split");
  s.projection = derive_seed(cfg.master_seed, size, dim, seed_index, "projection");
  s.start = derive_seed(cfg.master_seed, size, dim, seed_index, "start");
  for (auto m : cfg.methods) s.methods.push_back(derive_seed(cfg.master_seed, size, dim, seed_index, to_string(m)));
  return s;
}

/// One grid cell: returns one row per configured method. A stage failure
/// before optimization marks every method row of the cell as failed; a
/// failure inside one optimizer marks only that row.
inline std::vector<RunRow> run_cell(const ExperimentConfig& cfg, const FitnessDataset& data, std::size_t size,
                                    std::size_t dim, std::size_t seed_index) {
  std::vector<RunRow> rows;
  for (auto m : cfg.methods) {
    RunRow r;
    r.size = size;
    r.dim = dim;
    r.method = to_string(m);
    r.seed = seed_index;
    rows.push_back(std::move(r));
  }
  const CellSeeds seeds = cell_seeds(cfg, size, dim, seed_index);
  try {
    const FitnessDataset sample = subsample(data, size, seeds.subsample);
    const auto parts = split(sample, cfg.train_fraction, seeds.split);
    const FittedModel model = fit_model(parts.train, dim, cfg.projection, cfg.lambda, seeds.projection);
    const auto test_codes = encode(model, parts.test);
    const std::vector<double> test_fitness(parts.test.fitness.data(),
                                           parts.test.fitness.data() + parts.test.fitness.size());
    const double rho = test_spearman(model.surrogate, test_codes, test_fitness);
    Rng start_rng(seeds.start);
    const BinaryCode start = model.train.codes[detail::uniform_index(start_rng, model.train.size())];

    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
      auto& row = rows[i];
      try {
        OptimizerParams params = cfg.optimizer;
        params.trace = false;
        const auto opt = run_method(cfg.methods[i], model.surrogate, start, params, seeds.methods[i]);
        const auto nn = hamming_nn(opt.best_code, model.train, 1).front();
        row.metrics.test_spearman = rho;
        row.metrics.improvement = opt.improvement;
        row.metrics.nn_id = nn.id;
        row.metrics.nn_hamming = nn.distance;
        row.metrics.nn_true_fitness = nn.fitness;
        row.metrics.nn_percentile = percentile(nn.fitness, model.train.fitness);
        row.start_score = opt.start_score;
        row.best_score = opt.best_score;
        row.evaluations = opt.evaluations;
        row.start_code = opt.start_code.to_string();
        row.best_code = opt.best_code.to_string();
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  } catch (const std::exception& e) {
    for (auto& row : rows) {
      row.ok = false;
      row.error = e.what();
    }
  }
  return rows;
}

struct ExperimentReport {
  std::vector<RunRow> runs;
  std::vector<SummaryRow> summary;
  nlohmann::json provenance;
};

/// Runs the full grid. Cells may execute on `cfg.threads` workers; rows are
/// assembled in (size, dim, seed, method) order so output does not depend on
/// scheduling.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const FitnessDataset& data,
                                       std::string_view dataset_digest = {}) {
  cfg.validate();
  struct Cell {
    std::size_t size, dim, seed;
  };
  std::vector<Cell> cells;
  for (auto size : cfg.sample_sizes)
    for (auto dim : cfg.latent_dims)
      for (std::size_t s = 0; s < cfg.seeds; ++s) cells.push_back({size, dim, s});

  std::vector<std::vector<RunRow>> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++)
      results[i] = run_cell(cfg, data, cells[i].size, cells[i].dim, cells[i].seed);
  };
  const std::size_t workers = std::min(cfg.threads, cells.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  ExperimentReport report;
  for (auto& r : results)
    for (auto& row : r) report.runs.push_back(std::move(row));
  report.summary = aggregate(report.runs);

  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& c : cells) {
    const auto s = cell_seeds(cfg, c.size, c.dim, c.seed);
    nlohmann::json methods = nlohmann::json::object();
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) methods[to_string(cfg.methods[i])] = s.methods[i];
    seeds.push_back({{"size", c.size},
                     {"dim", c.dim},
                     {"seed", c.seed},
                     {"subsample", s.subsample},
                     {"split", s.split},
                     {"projection", s.projection},
                     {"start", s.start},
                     {"methods", methods}});
  }
  report.provenance = {
      {"version", kVersion},
      {"config", to_json(cfg)},
      {"dataset_records", data.size()},
      {"dataset_dim", data.dim()},
      {"dataset_fnv1a", std::string(dataset_digest)},
      {"seed_derivation", "mix64(fnv1a(\"<master>/<size>/<dim>/<seed>/<label>\")), splitmix64 finalizer"},
      {"cell_seeds", seeds},
  };
  return report;
}

// ---------------------------------------------------------------------------
// Report files

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

inline std::vector<std::string> csv_fields(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string pm(const Stat& s, int digits) {
  if (std::isnan(s.mean)) return "n/a";
  return format_fixed(s.mean, digits) + " +/- " + format_fixed(s.std, digits);
}

}  // namespace detail

inline constexpr const char* kRunsHeader =
    "size,dim,method,seed,status,test_spearman,improvement,start_score,best_score,nn_id,nn_hamming,"
    "nn_true_fitness,nn_percentile,evaluations,start_code,best_code,error";

inline void write_runs_csv(std::ostream& out, std::span<const RunRow> rows) {
  using detail::format_double;
  out << kRunsHeader << '\n';
  for (const auto& r : rows) {
    out << r.size << ',' << r.dim << ',' << r.method << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) {
      out << format_double(r.metrics.test_spearman) << ',' << format_double(r.metrics.improvement) << ','
          << format_double(r.start_score) << ',' << format_double(r.best_score) << ','
          << detail::csv_quote(r.metrics.nn_id) << ',' << r.metrics.nn_hamming << ','
          << format_double(r.metrics.nn_true_fitness) << ',' << format_double(r.metrics.nn_percentile) << ','
          << r.evaluations << ',' << r.start_code << ',' << r.best_code << ',';
    } else {
      out << ",,,,,,,,,,,";
    }
    out << detail::csv_quote(r.error) << '\n';
  }
}

inline std::vector<RunRow> read_runs_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kRunsHeader) throw ParseError("runs.csv: unexpected header");
  std::vector<RunRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::csv_fields(line);
    const auto where = "runs.csv line " + std::to_string(line_no) + ": ";
    if (f.size() != 17) throw ParseError(where + "expected 17 fields, found " + std::to_string(f.size()));
    RunRow r;
    auto as_size = [&](const std::string& s) {
      std::size_t v = 0;
      if (!detail::parse_int(s, v)) throw ParseError(where + "invalid integer '" + s + "'");
      return v;
    };
    auto as_double = [&](const std::string& s) {
      double v = 0;
      if (!detail::parse_double(s, v)) throw ParseError(where + "invalid number '" + s + "'");
      return v;
    };
    r.size = as_size(f[0]);
    r.dim = as_size(f[1]);
    r.method = f[2];
    r.seed = as_size(f[3]);
    if (f[4] != "ok" && f[4] != "failed") throw ParseError(where + "invalid status '" + f[4] + "'");
    r.ok = f[4] == "ok";
    if (r.ok) {
      r.metrics.test_spearman = as_double(f[5]);
      r.metrics.improvement = as_double(f[6]);
      r.start_score = as_double(f[7]);
      r.best_score = as_double(f[8]);
      r.metrics.nn_id = f[9];
      r.metrics.nn_hamming = as_size(f[10]);
      r.metrics.nn_true_fitness = as_double(f[11]);
      r.metrics.nn_percentile = as_double(f[12]);
      r.evaluations = as_size(f[13]);
      r.start_code = f[14];
      r.best_code = f[15];
    }
    r.error = f[16];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  using detail::format_double;
  out << "size,dim,method,runs,failed,spearman_mean,spearman_std,improvement_mean,improvement_std,"
         "nn_fitness_mean,nn_fitness_std,nn_percentile_mean,nn_percentile_std,nn_hamming_mean,nn_hamming_std\n";
  for (const auto& s : rows) {
    out << s.size << ',' << s.dim << ',' << s.method << ',' << s.runs << ',' << s.failed;
    for (const Stat* st : {&s.test_spearman, &s.improvement, &s.nn_true_fitness, &s.nn_percentile, &s.nn_hamming})
      out << ',' << (std::isnan(st->mean) ? "" : format_double(st->mean)) << ','
          << (std::isnan(st->std) ? "" : format_double(st->std));
    out << '\n';
  }
}

/// Human-readable tables: surrogate Spearman by size x dim, then per-cell
/// optimization results by method.
inline void write_summary_table(std::ostream& out, std::span<const SummaryRow> rows) {
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> dims;
  for (const auto& r : rows) {
    if (std::find(sizes.begin(), sizes.end(), r.size) == sizes.end()) sizes.push_back(r.size);
    if (std::find(dims.begin(), dims.end(), r.dim) == dims.end()) dims.push_back(r.dim);
  }
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };

  out << "Test Spearman of the surrogate (mean +/- std over seeds)\n\n";
  out << pad("size", 8);
  for (auto d : dims) out << pad("m=" + std::to_string(d), 20);
  out << '\n';
  for (auto s : sizes) {
    out << pad(std::to_string(s), 8);
    for (auto d : dims) {
      std::string cell = "n/a";
      for (const auto& r : rows)
        if (r.size == s && r.dim == d && r.runs > 0) {
          cell = detail::pm(r.test_spearman, 3);
          break;
        }
      out << pad(cell, 20);
    }
    out << '\n';
  }

  for (auto s : sizes)
    for (auto d : dims) {
      out << "\nOptimization results, size " << s << ", m=" << d << " (mean +/- std over seeds)\n\n";
      out << pad("method", 8) << pad("improvement", 22) << pad("NN true fitness", 22) << pad("NN percentile", 22)
          << pad("runs", 6) << pad("failed", 8) << '\n';
      for (const auto& r : rows) {
        if (r.size != s || r.dim != d) continue;
        out << pad(r.method, 8) << pad(detail::pm(r.improvement, 3), 22) << pad(detail::pm(r.nn_true_fitness, 3), 22)
            << pad(detail::pm(r.nn_percentile, 2), 22) << pad(std::to_string(r.runs), 6)
            << pad(std::to_string(r.failed), 8) << '\n';
      }
    }
}

/// Per-dimension sweep for external plotting: surrogate quality and each
/// method's outcome as a function of m, per sample size.
inline void write_sweep_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  using detail::format_double;
  out << "size,dim,features,method,spearman_mean,spearman_std,improvement_mean,nn_percentile_mean\n";
  for (const auto& r : rows) {
    if (r.runs == 0) continue;
    out << r.size << ',' << r.dim << ',' << feature_count(r.dim) << ',' << r.method << ','
        << format_double(r.test_spearman.mean) << ',' << format_double(r.test_spearman.std) << ','
        << format_double(r.improvement.mean) << ',' << format_double(r.nn_percentile.mean) << '\n';
  }
}

inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(ss.str())));
  return buf;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes runs.csv, summary.csv, summary.txt, sweep.csv and provenance.json.
/// Only provenance.json carries a timestamp ("generated_at").
inline void write_report(const std::filesystem::path& dir, const ExperimentReport& report) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    auto out = open("runs.csv");
    write_runs_csv(out, report.runs);
  }
  {
    auto out = open("summary.csv");
    write_summary_csv(out, report.summary);
  }
  {
    auto out = open("summary.txt");
    write_summary_table(out, report.summary);
  }
  {
    auto out = open("sweep.csv");
    write_sweep_csv(out, report.summary);
  }
  {
    auto prov = report.provenance;
    prov["generated_at"] = utc_timestamp();
    auto out = open("provenance.json");
    out << prov.dump(2) << '\n';
  }
}

/// Loads the dataset named by the config, runs the grid and writes the report.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const FitnessDataset data = load_dataset(cfg.dataset);
  auto report = run_experiment(cfg, data, file_digest(cfg.dataset));
  write_report(cfg.output_dir, report);
  return report;
}

}  // namespace latentqubo
