#pragma once

// Embedding + fitness datasets: loading from the canonical TSV format,
// seeded subsampling, and train/test splitting.

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "latentqubo/common.hpp"

namespace latentqubo {

/// Aligned records of (id, optional sequence, embedding row, fitness).
/// Immutable by convention once constructed through load_dataset or make().
struct FitnessDataset {
  std::vector<std::string> ids;
  std::optional<std::vector<std::string>> sequences;
  Eigen::MatrixXd embeddings;  // N x d
  Eigen::VectorXd fitness;     // N

  [[nodiscard]] std::size_t size() const { return ids.size(); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(embeddings.cols()); }
  [[nodiscard]] bool has_sequences() const { return sequences.has_value(); }

  /// Copies the records at `rows`, in that order.
  [[nodiscard]] FitnessDataset select(const std::vector<std::size_t>& rows) const {
    FitnessDataset out;
    out.ids.reserve(rows.size());
    out.embeddings.resize(static_cast<Eigen::Index>(rows.size()), embeddings.cols());
    out.fitness.resize(static_cast<Eigen::Index>(rows.size()));
    if (sequences) out.sequences.emplace().reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = rows[i];
      const auto ri = static_cast<Eigen::Index>(r);
      const auto ii = static_cast<Eigen::Index>(i);
      out.ids.push_back(ids.at(r));
      if (sequences) out.sequences->push_back((*sequences)[r]);
      out.embeddings.row(ii) = embeddings.row(ri);
      out.fitness(ii) = fitness(ri);
    }
    return out;
  }
};

/// Checks the dataset invariants and throws InvalidArgument on violation.
inline void validate(const FitnessDataset& ds) {
  const auto n = ds.ids.size();
  if (n == 0) throw InvalidArgument("dataset is empty");
  if (static_cast<std::size_t>(ds.embeddings.rows()) != n || static_cast<std::size_t>(ds.fitness.size()) != n)
    throw InvalidArgument("dataset columns are not aligned: ids=" + std::to_string(n) +
                          " embeddings=" + std::to_string(ds.embeddings.rows()) +
                          " fitness=" + std::to_string(ds.fitness.size()));
  if (ds.sequences && ds.sequences->size() != n) throw InvalidArgument("sequence column is not aligned with ids");
  if (ds.embeddings.cols() < 1) throw InvalidArgument("embedding dimension must be at least 1");
  if (!ds.embeddings.allFinite()) throw InvalidArgument("embeddings contain non-finite values");
  if (!ds.fitness.allFinite()) throw InvalidArgument("fitness contains non-finite values");
}

/// Parses the embeddings TSV:
///   id<TAB>[sequence<TAB>]fitness<TAB>e0<TAB>...<TAB>e{d-1}
/// LF or CRLF line endings; blank trailing lines are ignored. Errors name
/// the 1-based data row (and physical line) and the offending column.
inline FitnessDataset load_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  for (auto h : detail::split(line, '\t')) header.emplace_back(h);
  if (header.empty() || header[0] != "id") throw ParseError("header: first column must be 'id'");
  std::size_t col = 1;
  bool with_sequence = false;
  if (header.size() > col && header[col] == "sequence") {
    with_sequence = true;
    ++col;
  }
  if (header.size() <= col || header[col] != "fitness") throw ParseError("header: missing 'fitness' column");
  const std::size_t fitness_col = col++;
  const std::size_t first_embedding = col;
  const std::size_t d = header.size() - first_embedding;
  if (d == 0) throw ParseError("header: no embedding columns (expected e0..e{d-1})");
  for (std::size_t k = 0; k < d; ++k) {
    const std::string expected = "e" + std::to_string(k);
    if (header[first_embedding + k] != expected)
      throw ParseError("header: column " + std::to_string(first_embedding + k + 1) + " is '" +
                       header[first_embedding + k] + "', expected '" + expected + "'");
  }

  FitnessDataset ds;
  if (with_sequence) ds.sequences.emplace();
  std::vector<double> values;
  std::vector<double> fitness;
  std::size_t line_no = 1;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto where = "row " + std::to_string(row) + " (line " + std::to_string(line_no) + ")";
    const auto cells = detail::split(line, '\t');
    if (cells.size() != header.size()) {
      const long got = static_cast<long>(cells.size()) - static_cast<long>(first_embedding);
      throw ParseError(where + ": expected " + std::to_string(d) + " embedding values, found " +
                       std::to_string(got < 0 ? 0 : got));
    }
    ds.ids.emplace_back(cells[0]);
    if (with_sequence) ds.sequences->emplace_back(cells[1]);
    auto parse_cell = [&](std::size_t c) {
      double v = 0.0;
      if (!detail::parse_double(cells[c], v))
        throw ParseError(where + ", column '" + header[c] + "': cannot parse '" +
                         std::string(cells[c]) + "' as a number");
      if (!std::isfinite(v))
        throw ParseError(where + ", column '" + header[c] + "': non-finite value '" +
                         std::string(cells[c]) + "'");
      return v;
    };
    fitness.push_back(parse_cell(fitness_col));
    for (std::size_t k = 0; k < d; ++k) values.push_back(parse_cell(first_embedding + k));
  }
  if (row == 0) throw ParseError("empty file: header present but no records");

  ds.fitness = Eigen::Map<const Eigen::VectorXd>(fitness.data(), static_cast<Eigen::Index>(fitness.size()));
  ds.embeddings = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d));
  return ds;
}

inline FitnessDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset file '" + path.string() + "'");
  try {
    return load_dataset(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Writes the canonical TSV (inverse of load_dataset).
inline void write_dataset(std::ostream& out, const FitnessDataset& ds) {
  out << "id";
  if (ds.sequences) out << "\tsequence";
  out << "\tfitness";
  for (std::size_t k = 0; k < ds.dim(); ++k) out << "\te" << k;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out << ds.ids[i];
    if (ds.sequences) out << '\t' << (*ds.sequences)[i];
    out << '\t' << detail::format_double(ds.fitness(ii));
    for (Eigen::Index k = 0; k < ds.embeddings.cols(); ++k) out << '\t' << detail::format_double(ds.embeddings(ii, k));
    out << '\n';
  }
}

inline void write_dataset(const std::filesystem::path& path, const FitnessDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file '" + path.string() + "'");
  write_dataset(out, ds);
}

namespace detail {

/// First `n` entries of a seeded partial Fisher-Yates shuffle of 0..N-1.
inline std::vector<std::size_t> draw_without_replacement(std::size_t total, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

}  // namespace detail

/// n distinct records drawn uniformly without replacement, in drawn order.
inline FitnessDataset subsample(const FitnessDataset& ds, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("subsample: n must be at least 1");
  if (n > ds.size())
    throw InvalidArgument("subsample: requested " + std::to_string(n) + " records but dataset has " +
                          std::to_string(ds.size()));
  return ds.select(detail::draw_without_replacement(ds.size(), n, seed));
}

struct TrainTestSplit {
  FitnessDataset train;
  FitnessDataset test;
};

/// Number of training records for a split: round-half-up of fraction * N.
inline std::size_t train_count(std::size_t n, double train_fraction) {
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
}

/// Seeded random split; the training part holds round(train_fraction * N) records.
inline TrainTestSplit split(const FitnessDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvalidArgument("split: train fraction must lie in (0, 1), got " + detail::format_double(train_fraction));
  const std::size_t n = ds.size();
  const std::size_t n_train = train_count(n, train_fraction);
  if (n_train == 0 || n_train >= n)
    throw InvalidArgument("split: fraction " + detail::format_double(train_fraction) + " of " + std::to_string(n) +
                          " records leaves an empty part");
  auto order = detail::draw_without_replacement(n, n, seed);
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_rows(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {ds.select(train_rows), ds.select(test_rows)};
}

}  // namespace latentqubo
