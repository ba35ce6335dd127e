#pragma once

// Planted-signal datasets: embeddings with a known low-dimensional factor
// structure whose sign pattern drives fitness through a quadratic
// pseudo-Boolean function.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <string>

#include "latentqubo/binarization.hpp"
#include "latentqubo/dataset.hpp"
#include "latentqubo/surrogate.hpp"

namespace latentqubo {

struct PlantedSpec {
  std::size_t records = 1000;
  std::size_t embedding_dim = 32;
  std::size_t latent_bits = 16;
  /// Noise standard deviation as a fraction of the std. dev. of the clean signal.
  double noise_ratio = 0.3;
  /// Standard deviation of the planted pair coefficients (biases are unit normal).
  double coupling_scale = 0.5;
  bool with_sequences = false;
  std::uint64_t seed = 1;
};

struct PlantedDataset {
  FitnessDataset data;
  /// Ground truth over the planted bits (bit k = factor k > 0).
  QuboSurrogate truth;
  std::vector<BinaryCode> planted_codes;
};

/// Factor k (k < latent_bits) has standard deviation decreasing linearly from
/// 3 to 1.5; the remaining directions carry 0.3. Factors are rotated into the
/// embedding space by a random orthogonal matrix and shifted by a random
/// offset, so PCA has to center and un-rotate to recover them.
inline PlantedDataset make_planted_dataset(const PlantedSpec& spec) {
  const std::size_t d = spec.embedding_dim;
  const std::size_t m = spec.latent_bits;
  if (m < 1 || d < m || spec.records < 1) throw InvalidArgument("planted dataset: need 1 <= latent_bits <= embedding_dim");
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd gauss(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < gauss.size(); ++i) gauss.data()[i] = normal(rng);
  const Eigen::MatrixXd rotation = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  Eigen::VectorXd offset(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < offset.size(); ++i) offset(i) = 0.5 * normal(rng);

  Eigen::VectorXd scale(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    scale(static_cast<Eigen::Index>(k)) =
        k < m ? 3.0 - 1.5 * static_cast<double>(k) / static_cast<double>(std::max<std::size_t>(m - 1, 1)) : 0.3;
  }

  PlantedDataset out;
  out.truth = QuboSurrogate(m);
  for (std::size_t k = 0; k < m; ++k) {
    out.truth.bias(static_cast<Eigen::Index>(k)) = normal(rng);
    for (std::size_t l = k + 1; l < m; ++l) out.truth.set_coupling(k, l, spec.coupling_scale * normal(rng));
  }

  const auto n = static_cast<Eigen::Index>(spec.records);
  auto& ds = out.data;
  ds.embeddings.resize(n, static_cast<Eigen::Index>(d));
  ds.fitness.resize(n);
  Eigen::VectorXd clean(n);
  Eigen::VectorXd z(static_cast<Eigen::Index>(d));
  static constexpr char kAlphabet[] = "ACDEFGHIKLMNPQRSTVWY";
  std::uniform_int_distribution<int> residue(0, 19);
  if (spec.with_sequences) ds.sequences.emplace();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = scale(k) * normal(rng);
    ds.embeddings.row(i) = (rotation * z + offset).transpose();
    BinaryCode code(m);
    for (std::size_t k = 0; k < m; ++k) code.set(k, z(static_cast<Eigen::Index>(k)) > 0);
    clean(i) = predict(out.truth, code);
    out.planted_codes.push_back(std::move(code));
    char id[32];
    std::snprintf(id, sizeof id, "v%06ld", static_cast<long>(i + 1));
    ds.ids.emplace_back(id);
    if (spec.with_sequences) {
      std::string s(12, 'A');
      for (auto& c : s) c = kAlphabet[residue(rng)];
      ds.sequences->push_back(std::move(s));
    }
  }
  const double sd = std::sqrt((clean.array() - clean.mean()).square().sum() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1)));
  for (Eigen::Index i = 0; i < n; ++i) ds.fitness(i) = clean(i) + spec.noise_ratio * sd * normal(rng);
  return out;
}

}  // namespace latentqubo
