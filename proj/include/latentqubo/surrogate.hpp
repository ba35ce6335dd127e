#pragma once

// Quadratic surrogate over binary codes:
//
//   f(x) = c + sum_k h_k x_k + sum_{k<l} J_kl x_k x_l
//
// fitted by ridge regression on linear + pairwise features, with an
// unpenalized intercept. J is kept as a dense symmetric matrix with zero
// diagonal whose off-diagonal entry J(k,l) = J(l,k) is the coefficient of the
// pair (k,l), so that h'x + x'Jx/2 equals the pair-sum form exactly.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "latentqubo/binarization.hpp"
#include "latentqubo/common.hpp"

namespace latentqubo {

struct QuboSurrogate {
  double intercept = 0.0;
  Eigen::VectorXd bias;      // h, length m
  Eigen::MatrixXd coupling;  // J, m x m symmetric, zero diagonal
  std::optional<double> lambda;  // absent for models authored outside fit_qubo

  QuboSurrogate() = default;
  explicit QuboSurrogate(std::size_t m)
      : bias(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m))),
        coupling(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m))) {}

  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(bias.size()); }

  /// Sets the pair coefficient for k != l in both triangles.
  void set_coupling(std::size_t k, std::size_t l, double value) {
    if (k == l) throw InvalidArgument("coupling: diagonal entries must stay zero");
    coupling(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = value;
    coupling(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = value;
  }
};

/// Number of linear + pairwise features for m bits.
constexpr std::size_t feature_count(std::size_t m) { return m + m * (m - 1) / 2; }

/// Position of the pair (k, l), k < l, inside the feature vector.
constexpr std::size_t pair_feature_index(std::size_t k, std::size_t l, std::size_t m) {
  return m + k * m - k * (k + 1) / 2 + (l - k - 1);
}

/// x_k for every k, then x_k x_l for k < l in lexicographic pair order.
inline Eigen::VectorXd build_features(const BinaryCode& x) {
  const std::size_t m = x.size();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(feature_count(m)));
  std::size_t pos = m;
  for (std::size_t k = 0; k < m; ++k) {
    f(static_cast<Eigen::Index>(k)) = x[k];
    for (std::size_t l = k + 1; l < m; ++l, ++pos) f(static_cast<Eigen::Index>(pos)) = x[k] * x[l];
  }
  return f;
}

/// Packs (h, J) into the feature-ordered coefficient vector w.
inline Eigen::VectorXd coefficients(const QuboSurrogate& q) {
  const std::size_t m = q.dim();
  Eigen::VectorXd w(static_cast<Eigen::Index>(feature_count(m)));
  w.head(static_cast<Eigen::Index>(m)) = q.bias;
  std::size_t pos = m;
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t l = k + 1; l < m; ++l, ++pos)
      w(static_cast<Eigen::Index>(pos)) = q.coupling(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
  return w;
}

/// Inverse of coefficients().
inline QuboSurrogate unpack_coefficients(const Eigen::VectorXd& w, std::size_t m, double intercept) {
  if (static_cast<std::size_t>(w.size()) != feature_count(m))
    throw InvalidArgument("coefficient vector has wrong length for m = " + std::to_string(m));
  QuboSurrogate q(m);
  q.intercept = intercept;
  q.bias = w.head(static_cast<Eigen::Index>(m));
  std::size_t pos = m;
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t l = k + 1; l < m; ++l, ++pos) q.set_coupling(k, l, w(static_cast<Eigen::Index>(pos)));
  return q;
}

inline void check_dim(const QuboSurrogate& q, const BinaryCode& x, const char* what) {
  if (x.size() != q.dim())
    throw InvalidArgument(std::string(what) + ": code has " + std::to_string(x.size()) + " bits, surrogate expects " +
                          std::to_string(q.dim()));
}

inline double predict(const QuboSurrogate& q, const BinaryCode& x) {
  check_dim(q, x, "predict");
  const std::size_t m = x.size();
  double score = q.intercept;
  for (std::size_t k = 0; k < m; ++k) {
    if (!x[k]) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    score += q.bias(kk);
    for (std::size_t l = k + 1; l < m; ++l)
      if (x[l]) score += q.coupling(kk, static_cast<Eigen::Index>(l));
  }
  return score;
}

/// h_k + sum_{l != k} J_kl x_l: the score gained by setting bit k.
inline double marginal_effect(const QuboSurrogate& q, const BinaryCode& x, std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  double g = q.bias(kk);
  for (std::size_t l = 0; l < x.size(); ++l)
    if (x[l] && l != k) g += q.coupling(kk, static_cast<Eigen::Index>(l));
  return g;
}

/// predict(x with bit k flipped) - predict(x).
inline double flip_delta(const QuboSurrogate& q, const BinaryCode& x, std::size_t k) {
  const double g = marginal_effect(q, x, k);
  return x[k] ? -g : g;
}

struct RidgeOptions {
  double lambda = 1.0;
  /// Rows of the design matrix accumulated per Gram update.
  std::size_t block_rows = 256;
};

/// Ridge fit of the quadratic surrogate with unpenalized intercept:
/// solves (Phi_c' Phi_c + lambda I) w = Phi_c' (y - mean(y)) where Phi_c is the
/// column-centered design matrix, then c = mean(y) - mean(Phi) . w.
/// The Gram matrix is reduced in a fixed row order, so the result is a pure
/// function of the inputs.
inline QuboSurrogate fit_qubo(std::span<const BinaryCode> codes, std::span<const double> fitness,
                              const RidgeOptions& options = {}) {
  if (!(options.lambda > 0.0) || !std::isfinite(options.lambda))
    throw InvalidArgument("fit_qubo: lambda must be positive and finite, got " + detail::format_double(options.lambda));
  if (codes.empty()) throw InvalidArgument("fit_qubo: need at least one sample");
  if (codes.size() != fitness.size())
    throw InvalidArgument("fit_qubo: " + std::to_string(codes.size()) + " codes but " +
                          std::to_string(fitness.size()) + " fitness values");
  const std::size_t m = codes.front().size();
  if (m == 0) throw InvalidArgument("fit_qubo: codes must have at least one bit");
  for (const auto& c : codes)
    if (c.size() != m) throw InvalidArgument("fit_qubo: codes have differing dimensions");
  for (double y : fitness)
    if (!std::isfinite(y)) throw InvalidArgument("fit_qubo: fitness contains non-finite values");

  const auto n = static_cast<Eigen::Index>(codes.size());
  const auto p = static_cast<Eigen::Index>(feature_count(m));

  Eigen::VectorXd feature_mean = Eigen::VectorXd::Zero(p);
  double y_mean = 0.0;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    feature_mean += build_features(codes[i]);
    y_mean += fitness[i];
  }
  feature_mean /= static_cast<double>(n);
  y_mean /= static_cast<double>(n);

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  const auto block = static_cast<Eigen::Index>(std::max<std::size_t>(options.block_rows, 1));
  Eigen::MatrixXd rows(std::min(block, n), p);
  Eigen::VectorXd targets(std::min(block, n));
  for (Eigen::Index start = 0; start < n; start += block) {
    const Eigen::Index len = std::min(block, n - start);
    for (Eigen::Index r = 0; r < len; ++r) {
      const auto i = static_cast<std::size_t>(start + r);
      rows.row(r) = (build_features(codes[i]) - feature_mean).transpose();
      targets(r) = fitness[i] - y_mean;
    }
    gram.selfadjointView<Eigen::Lower>().rankUpdate(rows.topRows(len).transpose());
    rhs.noalias() += rows.topRows(len).transpose() * targets.head(len);
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += options.lambda;

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw Error("fit_qubo: ridge system is not positive definite");
  const Eigen::VectorXd w = llt.solve(rhs);
  const double residual = (gram * w - rhs).norm();
  if (!w.allFinite() || residual > 1e-6 * rhs.norm())
    throw Error("fit_qubo: linear solve residual " + detail::format_double(residual) + " exceeds tolerance");

  QuboSurrogate q = unpack_coefficients(w, m, y_mean - feature_mean.dot(w));
  q.lambda = options.lambda;
  return q;
}

inline QuboSurrogate fit_qubo(std::span<const BinaryCode> codes, std::span<const double> fitness, double lambda) {
  RidgeOptions options;
  options.lambda = lambda;
  return fit_qubo(codes, fitness, options);
}

// QUBO text format (line oriented, '#' starts a comment):
//   m <dim>
//   lambda <value>          optional
//   c <value>               optional, default 0
//   b <k> <value>           one per nonzero bias
//   q <k> <l> <value>       one per nonzero coupling, k < l
// Indices are zero based. Scores are maximized.

inline void export_qubo(std::ostream& out, const QuboSurrogate& q) {
  const std::size_t m = q.dim();
  out << "# quadratic binary surrogate: f(x) = c + sum_k b_k x_k + sum_{k<l} q_kl x_k x_l, x in {0,1}^m\n";
  out << "# convention: MAXIMIZE f. For minimizing QUBO/Ising solvers negate every c, b and q value.\n";
  out << "m " << m << '\n';
  if (q.lambda) out << "lambda " << detail::format_double(*q.lambda) << '\n';
  out << "c " << detail::format_double(q.intercept) << '\n';
  for (std::size_t k = 0; k < m; ++k) {
    const double v = q.bias(static_cast<Eigen::Index>(k));
    if (v != 0.0) out << "b " << k << ' ' << detail::format_double(v) << '\n';
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t l = k + 1; l < m; ++l) {
      const double v = q.coupling(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      if (v != 0.0) out << "q " << k << ' ' << l << ' ' << detail::format_double(v) << '\n';
    }
}

inline QuboSurrogate import_qubo(std::istream& in) {
  std::optional<QuboSurrogate> q;
  std::optional<double> lambda;
  double intercept = 0.0;
  bool seen_c = false;
  std::vector<std::uint8_t> seen_bias;
  std::vector<std::uint8_t> seen_pair;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    std::string_view body(line.data(), hash == std::string::npos ? line.size() : hash);
    const auto tok = detail::tokenize(detail::trim(body));
    if (tok.empty()) continue;
    const auto where = "qubo line " + std::to_string(line_no) + ": ";
    auto number = [&](std::string_view t) {
      double v = 0;
      if (!detail::parse_double(t, v) || !std::isfinite(v))
        throw ParseError(where + "invalid number '" + std::string(t) + "'");
      return v;
    };
    auto index = [&](std::string_view t) {
      std::size_t k = 0;
      if (!detail::parse_int(t, k)) throw ParseError(where + "invalid index '" + std::string(t) + "'");
      if (k >= q->dim())
        throw ParseError(where + "index " + std::to_string(k) + " out of range for m = " + std::to_string(q->dim()));
      return k;
    };
    const auto key = tok[0];
    if (key == "m") {
      if (q) throw ParseError(where + "duplicate 'm' header");
      std::size_t m = 0;
      if (tok.size() != 2 || !detail::parse_int(tok[1], m) || m < 1) throw ParseError(where + "malformed 'm' header");
      q.emplace(m);
      seen_bias.assign(m, 0);
      seen_pair.assign(m * m, 0);
      continue;
    }
    if (!q) throw ParseError(where + "'" + std::string(key) + "' before the 'm' header");
    if (key == "lambda") {
      if (tok.size() != 2 || lambda) throw ParseError(where + "malformed or duplicate 'lambda'");
      lambda = number(tok[1]);
      if (*lambda <= 0) throw ParseError(where + "lambda must be positive");
    } else if (key == "c") {
      if (tok.size() != 2 || seen_c) throw ParseError(where + "malformed or duplicate 'c'");
      intercept = number(tok[1]);
      seen_c = true;
    } else if (key == "b") {
      if (tok.size() != 3) throw ParseError(where + "expected 'b <k> <value>'");
      const auto k = index(tok[1]);
      if (seen_bias[k]) throw ParseError(where + "duplicate bias for bit " + std::to_string(k));
      seen_bias[k] = 1;
      q->bias(static_cast<Eigen::Index>(k)) = number(tok[2]);
    } else if (key == "q") {
      if (tok.size() != 4) throw ParseError(where + "expected 'q <k> <l> <value>'");
      const auto k = index(tok[1]);
      const auto l = index(tok[2]);
      if (k == l) throw ParseError(where + "diagonal coupling (" + std::to_string(k) + ", " + std::to_string(l) +
                                   ") is not allowed; put linear terms on 'b' lines");
      if (k > l) throw ParseError(where + "coupling indices must satisfy k < l");
      if (seen_pair[k * q->dim() + l]) throw ParseError(where + "duplicate coupling");
      seen_pair[k * q->dim() + l] = 1;
      q->set_coupling(k, l, number(tok[3]));
    } else {
      throw ParseError(where + "unknown record '" + std::string(key) + "'");
    }
  }
  if (!q) throw ParseError("qubo: missing 'm' header");
  q->intercept = intercept;
  q->lambda = lambda;
  return std::move(*q);
}

inline void export_qubo(const std::filesystem::path& path, const QuboSurrogate& q) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  export_qubo(out, q);
}

inline QuboSurrogate import_qubo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  try {
    return import_qubo(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace latentqubo
