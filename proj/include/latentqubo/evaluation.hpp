#pragma once

// Run metrics: rank correlation of the surrogate on held-out data and
// retrieval-based decoding of optimized codes to observed training records.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "latentqubo/binarization.hpp"
#include "latentqubo/common.hpp"
#include "latentqubo/optimizers.hpp"
#include "latentqubo/surrogate.hpp"

namespace latentqubo {

/// 1-based ranks with ties given the mean of the ranks they span.
inline std::vector<double> midranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
    i = j;
  }
  return ranks;
}

/// Spearman rank correlation: Pearson correlation of the midrank transforms.
/// Throws when either input is constant, where the correlation is undefined.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InvalidArgument("spearman: length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  if (a.size() < 2) throw InvalidArgument("spearman: need at least 2 observations");
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  double sab = 0;
  double saa = 0;
  double sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw InvalidArgument("spearman: constant input, rank correlation is undefined");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

struct Neighbor {
  std::size_t index = 0;
  std::string id;
  std::size_t distance = 0;
  double fitness = 0.0;
};

/// The k code-book entries closest to x in Hamming distance, ordered by
/// (distance, record index). Exact linear scan.
inline std::vector<Neighbor> hamming_nn(const BinaryCode& x, const CodeBook& book, std::size_t k = 1) {
  if (book.size() == 0) throw InvalidArgument("hamming_nn: code book is empty");
  if (k < 1) throw InvalidArgument("hamming_nn: k must be at least 1");
  if (x.size() != book.dim())
    throw InvalidArgument("hamming_nn: query has " + std::to_string(x.size()) + " bits, code book has " +
                          std::to_string(book.dim()));
  std::vector<std::pair<std::size_t, std::size_t>> dist(book.size());
  for (std::size_t i = 0; i < book.size(); ++i) dist[i] = {hamming_distance(x, book.codes[i]), i};
  const std::size_t take = std::min(k, book.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const auto [d, idx] = dist[i];
    out.push_back({idx, book.ids[idx], d, book.fitness[idx]});
  }
  return out;
}

/// Midrank percentile of v within `reference`:
/// 100 * (#{y < v} + 0.5 #{y == v}) / N.
inline double percentile(double v, std::span<const double> reference) {
  if (reference.empty()) throw InvalidArgument("percentile: reference set is empty");
  double below = 0;
  double equal = 0;
  for (double y : reference) {
    if (y < v)
      below += 1;
    else if (y == v)
      equal += 1;
  }
  return 100.0 * (below + 0.5 * equal) / static_cast<double>(reference.size());
}

struct RunMetrics {
  double test_spearman = 0.0;
  double improvement = 0.0;
  double nn_true_fitness = 0.0;
  double nn_percentile = 0.0;
  std::string nn_id;
  std::size_t nn_hamming = 0;
};

/// Surrogate Spearman on the test codes; NN metrics from the training code
/// book nearest to the optimizer's best code.
inline double test_spearman(const QuboSurrogate& q, std::span<const BinaryCode> test_codes,
                            std::span<const double> test_fitness) {
  std::vector<double> pred;
  pred.reserve(test_codes.size());
  for (const auto& c : test_codes) pred.push_back(predict(q, c));
  return spearman(pred, test_fitness);
}

inline RunMetrics evaluate_run(const QuboSurrogate& q, const CodeBook& train, std::span<const BinaryCode> test_codes,
                               std::span<const double> test_fitness, const OptimizationResult& opt) {
  RunMetrics r;
  r.test_spearman = test_spearman(q, test_codes, test_fitness);
  r.improvement = opt.improvement;
  const auto nn = hamming_nn(opt.best_code, train, 1).front();
  r.nn_id = nn.id;
  r.nn_hamming = nn.distance;
  r.nn_true_fitness = nn.fitness;
  r.nn_percentile = percentile(nn.fitness, train.fitness);
  return r;
}

}  // namespace latentqubo
