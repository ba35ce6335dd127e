#pragma once

// Maximizers of a QuboSurrogate over {0,1}^m: simulated annealing, a genetic
// algorithm, greedy hill climbing, random search, a kernel-uncertainty latent
// search, and exhaustive enumeration for small m.
//
// Every run is a pure function of (surrogate, inputs, params, seed). Ties are
// broken toward the lowest index / lexicographically smallest code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "latentqubo/binarization.hpp"
#include "latentqubo/common.hpp"
#include "latentqubo/surrogate.hpp"

namespace latentqubo {

struct TracePoint {
  std::size_t step = 0;
  double best_score = 0.0;
};

struct OptimizationResult {
  BinaryCode best_code;
  double best_score = 0.0;
  BinaryCode start_code;
  double start_score = 0.0;
  double improvement = 0.0;
  std::size_t evaluations = 0;
  std::vector<TracePoint> trace;
};

struct AnnealingParams {
  std::size_t iterations = 2000;
  /// T0 = initial_temperature * (std. dev. of predict over scale_samples random codes).
  double initial_temperature = 1.0;
  std::size_t scale_samples = 64;
  /// Geometric cooling factor; when unset it is chosen so the last step runs
  /// at final_temperature_ratio * T0.
  std::optional<double> cooling_ratio;
  double final_temperature_ratio = 1e-3;
};

struct GeneticParams {
  std::size_t population = 64;
  std::size_t generations = 100;
  std::size_t tournament_size = 2;
  double mixing_probability = 0.5;
  /// Per-bit mutation probability; 1/m when unset.
  std::optional<double> mutation_rate;
  std::size_t elite_count = 1;
};

struct RandomSearchParams {
  std::size_t samples = 2000;
};

struct LatentBoParams {
  std::size_t iterations = 200;
  /// Uniform random candidates drawn per iteration, on top of the m one-flip
  /// neighbours of the incumbent. Zero restricts the pool to the neighbourhood.
  std::size_t candidate_pool = 256;
  double exploration = 1.0;
  /// Kernel length scale; m/4 when unset.
  std::optional<double> length_scale;
};

struct OptimizerParams {
  AnnealingParams annealing;
  GeneticParams genetic;
  RandomSearchParams random_search;
  LatentBoParams latent_bo;
  bool trace = false;

  void validate() const {
    auto require = [](bool ok, const char* msg) {
      if (!ok) throw InvalidArgument(std::string("optimizer params: ") + msg);
    };
    require(annealing.iterations >= 1, "annealing iterations must be >= 1");
    require(annealing.scale_samples >= 1, "annealing scale_samples must be >= 1");
    require(annealing.initial_temperature > 0 && std::isfinite(annealing.initial_temperature),
            "annealing initial temperature must be > 0");
    require(!annealing.cooling_ratio || (*annealing.cooling_ratio > 0 && *annealing.cooling_ratio < 1),
            "annealing cooling ratio must lie in (0, 1)");
    require(annealing.final_temperature_ratio > 0 && annealing.final_temperature_ratio < 1,
            "annealing final temperature ratio must lie in (0, 1)");
    require(genetic.population >= 1, "genetic population must be >= 1");
    require(genetic.tournament_size >= 1, "genetic tournament size must be >= 1");
    require(genetic.mixing_probability >= 0 && genetic.mixing_probability <= 1,
            "genetic mixing probability must lie in [0, 1]");
    require(!genetic.mutation_rate || (*genetic.mutation_rate >= 0 && *genetic.mutation_rate <= 1),
            "genetic mutation rate must lie in [0, 1]");
    require(genetic.elite_count <= genetic.population, "genetic elite count exceeds population");
    require(random_search.samples >= 1, "random search samples must be >= 1");
    require(latent_bo.iterations >= 1, "latent_bo iterations must be >= 1");
    require(latent_bo.exploration >= 0 && std::isfinite(latent_bo.exploration),
            "latent_bo exploration weight must be >= 0");
    require(!latent_bo.length_scale || *latent_bo.length_scale > 0, "latent_bo length scale must be > 0");
  }
};

namespace detail {

class BestTracker {
 public:
  BestTracker(const QuboSurrogate& q, bool trace) : q_(q), trace_(trace) {}

  void start(const BinaryCode& code, double score) {
    result_.start_code = code;
    result_.start_score = score;
    result_.best_code = code;
    result_.best_score = score;
  }

  /// Records a candidate; returns true when it becomes the new best.
  bool offer(const BinaryCode& code, double score) {
    if (score > result_.best_score) {
      result_.best_code = code;
      result_.best_score = score;
      return true;
    }
    return false;
  }

  void step(std::size_t s) {
    if (trace_) result_.trace.push_back({s, result_.best_score});
  }

  void count(std::size_t n = 1) { result_.evaluations += n; }

  OptimizationResult finish() {
    // Incrementally tracked scores drift by rounding; report the exact value.
    if (result_.best_code != result_.start_code) {
      result_.best_score = predict(q_, result_.best_code);
      if (result_.best_score < result_.start_score) {
        result_.best_code = result_.start_code;
        result_.best_score = result_.start_score;
      }
    }
    result_.improvement = result_.best_score - result_.start_score;
    return std::move(result_);
  }

 private:
  const QuboSurrogate& q_;
  bool trace_;
  OptimizationResult result_;
};

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace detail

/// Metropolis rule for a maximization move with score change delta.
inline double metropolis_acceptance(double delta, double temperature) {
  if (delta > 0) return 1.0;
  return std::exp(delta / temperature);
}

/// Sample standard deviation of predict over `samples` uniform random codes.
inline double estimate_score_scale(const QuboSurrogate& q, std::size_t samples, Rng& rng) {
  if (samples < 2) return 0.0;
  std::vector<double> s(samples);
  for (auto& v : s) v = predict(q, BinaryCode::random(q.dim(), rng));
  double mean = 0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(samples);
  double ss = 0;
  for (double v : s) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(samples - 1));
}

/// Single-bit-flip simulated annealing with a geometric temperature schedule.
inline OptimizationResult simulated_annealing(const QuboSurrogate& q, const BinaryCode& start,
                                              const OptimizerParams& params, std::uint64_t seed) {
  check_dim(q, start, "simulated_annealing");
  params.validate();
  const auto& p = params.annealing;
  const std::size_t m = q.dim();
  Rng rng(seed);
  detail::BestTracker tracker(q, params.trace);

  const double spread = estimate_score_scale(q, p.scale_samples, rng);
  tracker.count(p.scale_samples);
  double temperature = p.initial_temperature * (spread > 0 ? spread : 1.0);
  const double alpha =
      p.cooling_ratio ? *p.cooling_ratio
                      : (p.iterations > 1
                             ? std::pow(p.final_temperature_ratio, 1.0 / static_cast<double>(p.iterations - 1))
                             : p.final_temperature_ratio);

  BinaryCode current = start;
  double score = predict(q, current);
  tracker.count();
  tracker.start(current, score);
  tracker.step(0);
  for (std::size_t t = 1; t <= p.iterations; ++t) {
    const std::size_t k = detail::uniform_index(rng, m);
    const double delta = flip_delta(q, current, k);
    tracker.count();
    const bool accept = delta > 0 || detail::uniform01(rng) < metropolis_acceptance(delta, temperature);
    if (accept) {
      current.flip(k);
      score += delta;
      tracker.offer(current, score);
    }
    tracker.step(t);
    temperature *= alpha;
  }
  return tracker.finish();
}

/// Generational GA with elitism, tournament selection, uniform crossover and
/// independent per-bit mutation. The initial population is `seed_population`
/// (truncated to the population size) padded with uniform random codes.
inline OptimizationResult genetic_algorithm(const QuboSurrogate& q, std::span<const BinaryCode> seed_population,
                                            const OptimizerParams& params, std::uint64_t seed) {
  params.validate();
  const auto& p = params.genetic;
  const std::size_t m = q.dim();
  for (const auto& c : seed_population) check_dim(q, c, "genetic_algorithm");
  const double mutation = p.mutation_rate.value_or(1.0 / static_cast<double>(m));
  Rng rng(seed);
  detail::BestTracker tracker(q, params.trace);

  std::vector<BinaryCode> pop;
  pop.reserve(p.population);
  for (std::size_t i = 0; i < seed_population.size() && pop.size() < p.population; ++i) pop.push_back(seed_population[i]);
  while (pop.size() < p.population) pop.push_back(BinaryCode::random(m, rng));
  std::vector<double> scores(pop.size());
  std::size_t first_best = 0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    scores[i] = predict(q, pop[i]);
    if (scores[i] > scores[first_best]) first_best = i;
  }
  tracker.count(pop.size());
  tracker.start(pop[first_best], scores[first_best]);
  tracker.step(0);

  auto tournament = [&]() {
    std::size_t winner = detail::uniform_index(rng, pop.size());
    for (std::size_t t = 1; t < p.tournament_size; ++t) {
      const std::size_t c = detail::uniform_index(rng, pop.size());
      if (scores[c] > scores[winner] || (scores[c] == scores[winner] && c < winner)) winner = c;
    }
    return winner;
  };

  std::vector<std::size_t> order(pop.size());
  for (std::size_t gen = 1; gen <= p.generations; ++gen) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<BinaryCode> next;
    std::vector<double> next_scores;
    next.reserve(pop.size());
    next_scores.reserve(pop.size());
    for (std::size_t e = 0; e < p.elite_count; ++e) {
      next.push_back(pop[order[e]]);
      next_scores.push_back(scores[order[e]]);
    }
    while (next.size() < pop.size()) {
      const BinaryCode& a = pop[tournament()];
      const BinaryCode& b = pop[tournament()];
      BinaryCode child(m);
      for (std::size_t k = 0; k < m; ++k) {
        bool bit = detail::uniform01(rng) < p.mixing_probability ? a.test(k) : b.test(k);
        if (detail::uniform01(rng) < mutation) bit = !bit;
        child.set(k, bit);
      }
      const double s = predict(q, child);
      tracker.count();
      tracker.offer(child, s);
      next.push_back(std::move(child));
      next_scores.push_back(s);
    }
    pop = std::move(next);
    scores = std::move(next_scores);
    tracker.step(gen);
  }
  return tracker.finish();
}

/// Steepest-ascent single-bit hill climbing. Deterministic.
inline OptimizationResult greedy_hill_climb(const QuboSurrogate& q, const BinaryCode& start, bool trace = false) {
  check_dim(q, start, "greedy_hill_climb");
  const std::size_t m = q.dim();
  detail::BestTracker tracker(q, trace);
  BinaryCode current = start;
  double score = predict(q, current);
  tracker.count();
  tracker.start(current, score);
  tracker.step(0);
  for (std::size_t step = 1;; ++step) {
    std::optional<std::size_t> best_bit;
    double best_delta = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double d = flip_delta(q, current, k);
      if (d > best_delta) {
        best_delta = d;
        best_bit = k;
      }
    }
    tracker.count(m);
    if (!best_bit) break;
    current.flip(*best_bit);
    score += best_delta;
    tracker.offer(current, score);
    tracker.step(step);
  }
  return tracker.finish();
}

/// Best of n uniform random codes; the first sample is the start point.
inline OptimizationResult random_search(const QuboSurrogate& q, const OptimizerParams& params, std::uint64_t seed) {
  params.validate();
  const std::size_t m = q.dim();
  Rng rng(seed);
  detail::BestTracker tracker(q, params.trace);
  for (std::size_t i = 0; i < params.random_search.samples; ++i) {
    BinaryCode c = BinaryCode::random(m, rng);
    const double s = predict(q, c);
    tracker.count();
    if (i == 0)
      tracker.start(c, s);
    else
      tracker.offer(c, s);
    tracker.step(i);
  }
  return tracker.finish();
}

/// Kernel uncertainty of `x` against an evaluated set:
/// 1 - max_e exp(-d_H(x, e) / length_scale). Returns 1 for an empty set.
inline double kernel_uncertainty(const BinaryCode& x, std::span<const BinaryCode> evaluated, double length_scale) {
  if (evaluated.empty()) return 1.0;
  std::size_t nearest = x.size();
  for (const auto& e : evaluated) nearest = std::min(nearest, hamming_distance(x, e));
  return 1.0 - std::exp(-static_cast<double>(nearest) / length_scale);
}

/// Lightweight Bayesian-style latent search. Each iteration scores a pool
/// (one-flip neighbours of the incumbent first, then uniform random codes) by
/// predict(x) + exploration * kernel_uncertainty(x), and evaluates the
/// acquisition maximizer. The start point is the best code of the initial
/// evaluated set (observed codes plus one random code).
inline OptimizationResult latent_bo(const QuboSurrogate& q, std::span<const BinaryCode> observed,
                                    const OptimizerParams& params, std::uint64_t seed) {
  params.validate();
  const auto& p = params.latent_bo;
  const std::size_t m = q.dim();
  for (const auto& c : observed) check_dim(q, c, "latent_bo");
  const double length_scale = p.length_scale.value_or(static_cast<double>(m) / 4.0);
  Rng rng(seed);
  detail::BestTracker tracker(q, params.trace);

  std::vector<BinaryCode> evaluated(observed.begin(), observed.end());
  evaluated.push_back(BinaryCode::random(m, rng));
  std::size_t incumbent = 0;
  std::vector<double> evaluated_scores;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    evaluated_scores.push_back(predict(q, evaluated[i]));
    if (evaluated_scores[i] > evaluated_scores[incumbent]) incumbent = i;
  }
  tracker.count(evaluated.size());
  tracker.start(evaluated[incumbent], evaluated_scores[incumbent]);
  tracker.step(0);

  std::vector<BinaryCode> pool;
  for (std::size_t it = 1; it <= p.iterations; ++it) {
    pool.clear();
    for (std::size_t k = 0; k < m; ++k) {
      pool.push_back(evaluated[incumbent]);
      pool.back().flip(k);
    }
    for (std::size_t r = 0; r < p.candidate_pool; ++r) pool.push_back(BinaryCode::random(m, rng));

    std::size_t choice = 0;
    double best_acq = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < pool.size(); ++c) {
      double a = predict(q, pool[c]);
      if (p.exploration > 0) a += p.exploration * kernel_uncertainty(pool[c], evaluated, length_scale);
      if (a > best_acq) {
        best_acq = a;
        choice = c;
      }
    }
    tracker.count(pool.size());

    const BinaryCode& x = pool[choice];
    if (std::find(evaluated.begin(), evaluated.end(), x) == evaluated.end()) {
      const double s = predict(q, x);
      tracker.count();
      evaluated.push_back(x);
      evaluated_scores.push_back(s);
      if (s > evaluated_scores[incumbent]) incumbent = evaluated.size() - 1;
      tracker.offer(x, s);
    }
    tracker.step(it);
  }
  return tracker.finish();
}

inline constexpr std::size_t kBruteForceMaxBits = 24;

/// Exact argmax by enumerating all 2^m codes in lexicographic order.
/// Ties resolve to the lexicographically smallest code.
inline OptimizationResult brute_force(const QuboSurrogate& q) {
  const std::size_t m = q.dim();
  if (m < 1 || m > kBruteForceMaxBits)
    throw InvalidArgument("brute_force: m = " + std::to_string(m) + " outside supported range 1.." +
                          std::to_string(kBruteForceMaxBits));
  const std::uint64_t total = std::uint64_t{1} << m;
  // Scores are tracked with flip deltas along the enumeration and resynced
  // exactly every 4096 codes to bound rounding drift.
  constexpr std::uint64_t kResync = 4096;
  BinaryCode x(m);
  double score = predict(q, x);
  BinaryCode best = x;
  double best_score = score;
  for (std::uint64_t i = 1; i < total; ++i) {
    // i-1 -> i flips the trailing ones of i-1 (high bit positions) and one zero.
    for (std::size_t k = m; k-- > 0;) {
      score += flip_delta(q, x, k);
      x.flip(k);
      if (x[k]) break;
    }
    if (i % kResync == 0) score = predict(q, x);
    if (score > best_score) {
      best_score = score;
      best = x;
    }
  }
  OptimizationResult r;
  r.start_code = BinaryCode(m);
  r.start_score = predict(q, r.start_code);
  r.best_code = best;
  r.best_score = predict(q, best);
  r.improvement = r.best_score - r.start_score;
  r.evaluations = total;
  return r;
}

enum class Method { annealing, genetic, greedy, random_search, latent_bo, brute_force };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::annealing: return "sa";
    case Method::genetic: return "ga";
    case Method::greedy: return "greedy";
    case Method::random_search: return "random";
    case Method::latent_bo: return "bo";
    case Method::brute_force: return "brute";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (auto m : {Method::annealing, Method::genetic, Method::greedy, Method::random_search, Method::latent_bo,
                 Method::brute_force})
    if (s == to_string(m)) return m;
  throw InvalidArgument("unknown method '" + std::string(s) + "' (expected sa, ga, greedy, random, bo or brute)");
}

/// Runs one method from a common start code. GA uses {start} as its seed
/// population and latent search uses it as the observed set; random search
/// and brute force ignore it.
inline OptimizationResult run_method(Method method, const QuboSurrogate& q, const BinaryCode& start,
                                     const OptimizerParams& params, std::uint64_t seed) {
  const std::span<const BinaryCode> seeds(&start, 1);
  switch (method) {
    case Method::annealing: return simulated_annealing(q, start, params, seed);
    case Method::genetic: return genetic_algorithm(q, seeds, params, seed);
    case Method::greedy: return greedy_hill_climb(q, start, params.trace);
    case Method::random_search: return random_search(q, params, seed);
    case Method::latent_bo: return latent_bo(q, seeds, params, seed);
    case Method::brute_force: return brute_force(q);
  }
  throw InvalidArgument("unknown method");
}

/// CSV `step,best_score`.
inline void write_trace(std::ostream& out, const OptimizationResult& r) {
  out << "step,best_score\n";
  for (const auto& t : r.trace) out << t.step << ',' << detail::format_double(t.best_score) << '\n';
}

}  // namespace latentqubo
