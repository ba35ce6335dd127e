#pragma once

// Median-threshold binarization of continuous latents, binary codes, and the
// code book of training records used for retrieval.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "latentqubo/common.hpp"
#include "latentqubo/dataset.hpp"

namespace latentqubo {

/// A point of {0,1}^m. Entries are stored as bytes holding 0 or 1.
class BinaryCode {
 public:
  BinaryCode() = default;
  explicit BinaryCode(std::size_t m) : bits_(m, 0) {}
  BinaryCode(std::initializer_list<int> bits) {
    bits_.reserve(bits.size());
    for (int b : bits) bits_.push_back(check_bit(b));
  }
  explicit BinaryCode(const std::vector<std::uint8_t>& bits) : bits_(bits) {
    for (auto b : bits_) check_bit(b);
  }

  /// Parses a string of '0'/'1' characters.
  static BinaryCode from_string(std::string_view s) {
    BinaryCode c(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '0' && s[i] != '1') throw ParseError("binary code: invalid character '" + std::string(1, s[i]) + "'");
      c.bits_[i] = static_cast<std::uint8_t>(s[i] - '0');
    }
    return c;
  }

  /// Code whose bit k is bit (m-1-k) of `index`, so indices 0..2^m-1 walk the
  /// codes in lexicographic order.
  static BinaryCode from_index(std::uint64_t index, std::size_t m) {
    BinaryCode c(m);
    for (std::size_t k = 0; k < m; ++k) c.bits_[k] = static_cast<std::uint8_t>((index >> (m - 1 - k)) & 1U);
    return c;
  }

  static BinaryCode random(std::size_t m, Rng& rng) {
    BinaryCode c(m);
    std::bernoulli_distribution coin(0.5);
    for (auto& b : c.bits_) b = coin(rng) ? 1 : 0;
    return c;
  }

  [[nodiscard]] std::size_t size() const { return bits_.size(); }
  [[nodiscard]] std::uint8_t operator[](std::size_t k) const { return bits_[k]; }
  [[nodiscard]] bool test(std::size_t k) const { return bits_.at(k) != 0; }
  void set(std::size_t k, bool value) { bits_.at(k) = value ? 1 : 0; }
  void flip(std::size_t k) { bits_[k] ^= 1U; }
  [[nodiscard]] std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  [[nodiscard]] const std::vector<std::uint8_t>& bits() const { return bits_; }

  [[nodiscard]] std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = static_cast<char>('0' + bits_[i]);
    return s;
  }

  friend bool operator==(const BinaryCode&, const BinaryCode&) = default;
  friend auto operator<=>(const BinaryCode&, const BinaryCode&) = default;

 private:
  static std::uint8_t check_bit(int b) {
    if (b != 0 && b != 1) throw InvalidArgument("binary code entries must be 0 or 1");
    return static_cast<std::uint8_t>(b);
  }

  std::vector<std::uint8_t> bits_;
};

inline std::size_t hamming_distance(const BinaryCode& a, const BinaryCode& b) {
  if (a.size() != b.size())
    throw InvalidArgument("hamming distance: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  std::size_t d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] != b[k]) ? 1 : 0;
  return d;
}

/// Per-dimension thresholds; bit k is set iff z_k > tau_k.
struct Binarizer {
  Eigen::VectorXd thresholds;

  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(thresholds.size()); }
};

/// Median of each column; even-length columns use the midpoint of the two
/// middle order statistics.
inline Binarizer fit_thresholds(const Eigen::MatrixXd& latents) {
  if (latents.rows() < 1) throw InvalidArgument("fit_thresholds: need at least one row");
  if (latents.cols() < 1) throw InvalidArgument("fit_thresholds: need at least one column");
  if (!latents.allFinite()) throw InvalidArgument("fit_thresholds: latents contain non-finite values");
  Binarizer b;
  b.thresholds.resize(latents.cols());
  std::vector<double> col(static_cast<std::size_t>(latents.rows()));
  const std::size_t n = col.size();
  for (Eigen::Index k = 0; k < latents.cols(); ++k) {
    for (std::size_t i = 0; i < n; ++i) col[i] = latents(static_cast<Eigen::Index>(i), k);
    std::sort(col.begin(), col.end());
    b.thresholds(k) = (n % 2 == 1) ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return b;
}

inline BinaryCode binarize(const Binarizer& b, const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (static_cast<std::size_t>(z.size()) != b.dim())
    throw InvalidArgument("binarize: latent has length " + std::to_string(z.size()) + ", binarizer expects " +
                          std::to_string(b.dim()));
  BinaryCode code(b.dim());
  for (Eigen::Index k = 0; k < z.size(); ++k) code.set(static_cast<std::size_t>(k), z(k) > b.thresholds(k));
  return code;
}

inline std::vector<BinaryCode> binarize_rows(const Binarizer& b, const Eigen::MatrixXd& latents) {
  std::vector<BinaryCode> out;
  out.reserve(static_cast<std::size_t>(latents.rows()));
  for (Eigen::Index i = 0; i < latents.rows(); ++i) out.push_back(binarize(b, latents.row(i).transpose()));
  return out;
}

inline void save_binarizer(std::ostream& out, const Binarizer& b) {
  for (Eigen::Index k = 0; k < b.thresholds.size(); ++k) {
    if (k) out << '\t';
    out << detail::format_double(b.thresholds(k));
  }
  out << '\n';
}

inline Binarizer load_binarizer(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("binarizer: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto cells = detail::split(line, '\t');
  Binarizer b;
  b.thresholds.resize(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t k = 0; k < cells.size(); ++k) {
    double v = 0;
    if (!detail::parse_double(cells[k], v) || !std::isfinite(v))
      throw ParseError("binarizer: invalid threshold '" + std::string(cells[k]) + "' at position " + std::to_string(k));
    b.thresholds(static_cast<Eigen::Index>(k)) = v;
  }
  return b;
}

inline void save_binarizer(const std::filesystem::path& path, const Binarizer& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  save_binarizer(out, b);
}

inline Binarizer load_binarizer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return load_binarizer(in);
}

/// Binary codes of observed records, aligned with their ids and fitness.
struct CodeBook {
  std::vector<BinaryCode> codes;
  std::vector<double> fitness;
  std::vector<std::string> ids;
  std::optional<std::vector<std::string>> sequences;

  [[nodiscard]] std::size_t size() const { return codes.size(); }
  [[nodiscard]] std::size_t dim() const { return codes.empty() ? 0 : codes.front().size(); }

  static CodeBook from_dataset(const FitnessDataset& ds, std::vector<BinaryCode> codes) {
    if (codes.size() != ds.size()) throw InvalidArgument("code book: codes and dataset are not aligned");
    CodeBook book;
    book.codes = std::move(codes);
    book.fitness.assign(ds.fitness.data(), ds.fitness.data() + ds.fitness.size());
    book.ids = ds.ids;
    book.sequences = ds.sequences;
    book.check();
    return book;
  }

  void check() const {
    if (fitness.size() != codes.size() || ids.size() != codes.size() ||
        (sequences && sequences->size() != codes.size()))
      throw InvalidArgument("code book: columns are not aligned");
    for (const auto& c : codes)
      if (c.size() != dim()) throw InvalidArgument("code book: codes have differing dimensions");
  }
};

// Code book TSV: header `id<TAB>[sequence<TAB>]fitness<TAB>code`.

inline void save_codebook(std::ostream& out, const CodeBook& book) {
  out << "id" << (book.sequences ? "\tsequence" : "") << "\tfitness\tcode\n";
  for (std::size_t i = 0; i < book.size(); ++i) {
    out << book.ids[i];
    if (book.sequences) out << '\t' << (*book.sequences)[i];
    out << '\t' << detail::format_double(book.fitness[i]) << '\t' << book.codes[i].to_string() << '\n';
  }
}

inline CodeBook load_codebook(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("code book: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split(line, '\t');
  const bool with_sequence = header.size() == 4 && header[1] == "sequence";
  if (!(with_sequence || (header.size() == 3 && header[0] == "id" && header[1] == "fitness" && header[2] == "code")))
    throw ParseError("code book: unexpected header");
  CodeBook book;
  if (with_sequence) book.sequences.emplace();
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto cells = detail::split(line, '\t');
    if (cells.size() != header.size()) throw ParseError("code book: row " + std::to_string(row) + " has wrong width");
    std::size_t c = 0;
    book.ids.emplace_back(cells[c++]);
    if (with_sequence) book.sequences->emplace_back(cells[c++]);
    double f = 0;
    if (!detail::parse_double(cells[c], f) || !std::isfinite(f))
      throw ParseError("code book: row " + std::to_string(row) + " has invalid fitness");
    book.fitness.push_back(f);
    book.codes.push_back(BinaryCode::from_string(cells[c + 1]));
  }
  book.check();
  return book;
}

}  // namespace latentqubo
