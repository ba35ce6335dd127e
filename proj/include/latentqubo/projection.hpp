#pragma once

// Linear maps from embedding space R^d to latent space R^m.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>

#include "latentqubo/common.hpp"

namespace latentqubo {

enum class ProjectionKind { random, pca };

inline std::string to_string(ProjectionKind k) { return k == ProjectionKind::random ? "random" : "pca"; }

inline ProjectionKind parse_projection_kind(std::string_view s) {
  if (s == "random") return ProjectionKind::random;
  if (s == "pca") return ProjectionKind::pca;
  throw InvalidArgument("unknown projection kind '" + std::string(s) + "' (expected random or pca)");
}

/// Fitted map z = W (e - mean). `mean` is zero for random projections.
struct Projector {
  ProjectionKind kind = ProjectionKind::random;
  Eigen::MatrixXd weights;  // m x d
  Eigen::VectorXd mean;     // d

  [[nodiscard]] std::size_t input_dim() const { return static_cast<std::size_t>(weights.cols()); }
  [[nodiscard]] std::size_t output_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

/// W with i.i.d. Normal(0, 1/d) entries, drawn row-major from a seeded engine.
inline Projector fit_random_projection(std::size_t d, std::size_t m, std::uint64_t seed) {
  if (d < 1 || m < 1) throw InvalidArgument("random projection: dimensions must be at least 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  Projector p;
  p.kind = ProjectionKind::random;
  p.weights.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < p.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < p.weights.cols(); ++c) p.weights(r, c) = normal(rng);
  p.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  return p;
}

/// Top-m principal directions of the centered rows of `embeddings`, in
/// descending eigenvalue order. Each direction is sign-normalized so that its
/// largest-magnitude entry (first one on ties) is positive.
inline Projector fit_pca_projection(const Eigen::MatrixXd& embeddings, std::size_t m) {
  const auto n = embeddings.rows();
  const auto d = embeddings.cols();
  if (n < 2) throw InvalidArgument("pca: need at least 2 rows, got " + std::to_string(n));
  if (m < 1) throw InvalidArgument("pca: m must be at least 1");

  Projector p;
  p.kind = ProjectionKind::pca;
  p.mean = embeddings.colwise().mean().transpose();
  const Eigen::MatrixXd centered = embeddings.rowwise() - p.mean.transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(n - 1));
  cov = cov.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double top = std::max(values(d - 1), 0.0);
  const double tol = top * static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon();
  std::size_t effective_rank = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    if (values(i) > tol) ++effective_rank;
  const auto structural = static_cast<std::size_t>(std::min<Eigen::Index>(n - 1, d));
  if (m > structural || m > effective_rank)
    throw InvalidArgument("pca: m = " + std::to_string(m) + " exceeds available rank (effective rank " +
                          std::to_string(effective_rank) + ", bound min(N-1, d) = " + std::to_string(structural) +
                          ")");

  p.weights.resize(static_cast<Eigen::Index>(m), d);
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(m); ++r) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - r);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < d; ++i)
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    if (v(arg) < 0) v = -v;
    p.weights.row(r) = v.transpose();
  }
  return p;
}

inline Eigen::VectorXd project(const Projector& p, const Eigen::Ref<const Eigen::VectorXd>& e) {
  if (static_cast<std::size_t>(e.size()) != p.input_dim())
    throw InvalidArgument("project: input has length " + std::to_string(e.size()) + ", projector expects " +
                          std::to_string(p.input_dim()));
  return p.weights * (e - p.mean);
}

/// Projects every row of an N x d matrix; returns N x m.
inline Eigen::MatrixXd project_rows(const Projector& p, const Eigen::MatrixXd& rows) {
  if (static_cast<std::size_t>(rows.cols()) != p.input_dim())
    throw InvalidArgument("project: input has " + std::to_string(rows.cols()) + " columns, projector expects " +
                          std::to_string(p.input_dim()));
  return (rows.rowwise() - p.mean.transpose()) * p.weights.transpose();
}

// Serialization: "kind", "d", "m" lines, a "mean" row, then m rows of W.

inline void save_projector(std::ostream& out, const Projector& p) {
  out << "kind\t" << to_string(p.kind) << '\n';
  out << "d\t" << p.input_dim() << '\n';
  out << "m\t" << p.output_dim() << '\n';
  out << "mean";
  for (Eigen::Index i = 0; i < p.mean.size(); ++i) out << '\t' << detail::format_double(p.mean(i));
  out << '\n';
  for (Eigen::Index r = 0; r < p.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.weights.cols(); ++c) {
      if (c) out << '\t';
      out << detail::format_double(p.weights(r, c));
    }
    out << '\n';
  }
}

inline Projector load_projector(std::istream& in) {
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(std::string("projector: missing ") + what + " line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return detail::split(line, '\t');
  };
  auto keyed = [&](const char* key) {
    auto cells = next(key);
    if (cells.size() != 2 || cells[0] != key) throw ParseError(std::string("projector: expected '") + key + "' line");
    return std::string(cells[1]);
  };
  Projector p;
  p.kind = parse_projection_kind(keyed("kind"));
  std::size_t d = 0;
  std::size_t m = 0;
  if (!detail::parse_int(keyed("d"), d) || d < 1) throw ParseError("projector: bad 'd'");
  if (!detail::parse_int(keyed("m"), m) || m < 1) throw ParseError("projector: bad 'm'");
  auto read_row = [&](std::span<const std::string_view> cells, auto&& sink, const std::string& what) {
    if (cells.size() != d) throw ParseError("projector: " + what + " has " + std::to_string(cells.size()) +
                                            " values, expected " + std::to_string(d));
    for (std::size_t i = 0; i < d; ++i) {
      double v = 0;
      if (!detail::parse_double(cells[i], v) || !std::isfinite(v))
        throw ParseError("projector: " + what + " has invalid value '" + std::string(cells[i]) + "'");
      sink(static_cast<Eigen::Index>(i), v);
    }
  };
  auto mean_cells = next("mean");
  if (mean_cells.empty() || mean_cells[0] != "mean") throw ParseError("projector: expected 'mean' row");
  p.mean.resize(static_cast<Eigen::Index>(d));
  read_row(std::span(mean_cells).subspan(1), [&](Eigen::Index i, double v) { p.mean(i) = v; }, "mean row");
  p.weights.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < m; ++r) {
    auto cells = next("weight");
    const auto ri = static_cast<Eigen::Index>(r);
    read_row(cells, [&](Eigen::Index i, double v) { p.weights(ri, i) = v; }, "weight row " + std::to_string(r));
  }
  return p;
}

inline void save_projector(const std::filesystem::path& path, const Projector& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  save_projector(out, p);
}

inline Projector load_projector(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return load_projector(in);
}

}  // namespace latentqubo
