#include <gtest/gtest.h>

#include <Eigen/QR>

#include <sstream>

#include "latentqubo/surrogate.hpp"
#include "surrogate_oracle.hpp"

using namespace latentqubo;
using namespace latentqubo::testing;

namespace {

QuboSurrogate two_bit() {
  QuboSurrogate q(2);
  q.bias << 1, -1;
  q.set_coupling(0, 1, 2);
  return q;
}

}  // namespace

TEST(Features, HandEnumeratedPairs) {
  const auto f = build_features(BinaryCode{1, 0, 1});
  ASSERT_EQ(f.size(), 6);
  EXPECT_EQ(f, (Eigen::VectorXd(6) << 1, 0, 1, 0, 1, 0).finished());
}

TEST(Features, CountFormula) {
  EXPECT_EQ(build_features(BinaryCode(16)).size(), 136);
  EXPECT_TRUE(build_features(BinaryCode(9)).isZero(0.0));
  for (std::size_t m = 2; m < 20; ++m) {
    EXPECT_EQ(pair_feature_index(0, 1, m), m);
    EXPECT_EQ(pair_feature_index(m - 2, m - 1, m), feature_count(m) - 1);
  }
}

TEST(Features, MatchIndependentBuilder) {
  Rng rng(1);
  for (std::size_t m : {1u, 2u, 5u, 13u}) {
    for (int t = 0; t < 20; ++t) {
      const auto x = BinaryCode::random(m, rng);
      EXPECT_EQ(build_features(x), oracle_features(x));
    }
  }
}

TEST(Predict, HandCases) {
  auto q = two_bit();
  EXPECT_DOUBLE_EQ(predict(q, BinaryCode{1, 1}), 2.0);
  EXPECT_DOUBLE_EQ(predict(q, BinaryCode{0, 0}), 0.0);
  q.intercept = 0.75;
  EXPECT_DOUBLE_EQ(predict(q, BinaryCode{0, 0}), 0.75);
  EXPECT_THROW(predict(q, BinaryCode{1}), InvalidArgument);
}

TEST(Predict, AllOnesSumsEverything) {
  Rng rng(2);
  const auto q = random_surrogate(7, rng);
  double expected = q.intercept + q.bias.sum();
  for (int k = 0; k < 7; ++k)
    for (int l = k + 1; l < 7; ++l) expected += q.coupling(k, l);
  EXPECT_NEAR(predict(q, BinaryCode(std::vector<std::uint8_t>(7, 1))), expected, 1e-12);
}

TEST(Predict, MatrixFormIdentity) {
  // h'x + x'Jx/2 equals the pair-sum form exactly.
  Rng rng(3);
  const auto q = random_surrogate(9, rng);
  for (int t = 0; t < 50; ++t) {
    const auto x = BinaryCode::random(9, rng);
    Eigen::VectorXd xv(9);
    for (int k = 0; k < 9; ++k) xv(k) = x[static_cast<std::size_t>(k)];
    const double matrix_form = q.intercept + q.bias.dot(xv) + 0.5 * xv.dot(q.coupling * xv);
    EXPECT_NEAR(predict(q, x), matrix_form, 1e-12);
  }
}

TEST(Predict, TwoEvaluationPathsAgree) {
  Rng rng(4);
  for (std::size_t m : {3u, 8u, 16u}) {
    const auto q = random_surrogate(m, rng);
    const auto w = coefficients(q);
    for (int t = 0; t < 100; ++t) {
      const auto x = BinaryCode::random(m, rng);
      EXPECT_NEAR(predict(q, x), build_features(x).dot(w) + q.intercept, 1e-10);
    }
  }
}

TEST(Predict, MarginalEffectIdentity) {
  Rng rng(5);
  const auto q = random_surrogate(11, rng);
  for (int t = 0; t < 300; ++t) {
    auto x = BinaryCode::random(11, rng);
    const std::size_t k = static_cast<std::size_t>(t % 11);
    auto on = x, off = x;
    on.set(k, true);
    off.set(k, false);
    EXPECT_NEAR(predict(q, on) - predict(q, off), marginal_effect(q, x, k), 1e-10);
    auto flipped = x;
    flipped.flip(k);
    EXPECT_NEAR(predict(q, flipped) - predict(q, x), flip_delta(q, x, k), 1e-10);
  }
}

TEST(FitQubo, RecoversPlantedCoefficientsOnHypercube) {
  Rng rng(6);
  auto truth = random_surrogate(8, rng);
  truth.intercept = 0.0;
  const auto data = hypercube(truth);
  const auto fit = fit_qubo(data.codes, data.fitness, 1e-8);
  EXPECT_LT((fit.bias - truth.bias).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((fit.coupling - truth.coupling).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-6);
  EXPECT_EQ(fit.coupling, fit.coupling.transpose());
  EXPECT_TRUE(fit.coupling.diagonal().isZero(0.0));
  ASSERT_TRUE(fit.lambda.has_value());
  EXPECT_EQ(*fit.lambda, 1e-8);
}

TEST(FitQubo, RecoversAnyQuadraticFunctionWithIntercept) {
  Rng rng(7);
  for (int rep = 0; rep < 3; ++rep) {
    auto truth = random_surrogate(6, rng);
    truth.intercept = 3.5 * (rep - 1);
    const auto data = hypercube(truth);
    const auto fit = fit_qubo(data.codes, data.fitness, 1e-8);
    for (std::size_t i = 0; i < data.codes.size(); ++i)
      EXPECT_NEAR(predict(fit, data.codes[i]), data.fitness[i], 1e-6);
  }
}

TEST(FitQubo, InfiniteShrinkageLimit) {
  Rng rng(8);
  const auto data = random_samples(6, 200, rng);
  const auto fit = fit_qubo(data.codes, data.fitness, 1e12);
  EXPECT_LT(fit.bias.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(fit.coupling.cwiseAbs().maxCoeff(), 1e-6);
  double mean = 0;
  for (double y : data.fitness) mean += y;
  mean /= static_cast<double>(data.fitness.size());
  for (const auto& c : data.codes) EXPECT_NEAR(predict(fit, c), mean, 1e-6);
}

TEST(FitQubo, MatchesIndependentAugmentedLeastSquares) {
  Rng rng(9);
  for (double lambda : {0.1, 1.0, 25.0}) {
    const auto data = random_samples(7, 90, rng);
    const auto fit = fit_qubo(data.codes, data.fitness, lambda);
    const auto ref = oracle_ridge(data.codes, data.fitness, lambda);
    EXPECT_NEAR(fit.intercept, ref.intercept, 1e-9);
    EXPECT_LT((coefficients(fit) - ref.weights).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(FitQubo, DuplicatedSamples) {
  Rng rng(10);
  const auto data = random_samples(6, 70, rng);
  auto doubled = data;
  doubled.codes.insert(doubled.codes.end(), data.codes.begin(), data.codes.end());
  doubled.fitness.insert(doubled.fitness.end(), data.fitness.begin(), data.fitness.end());
  const double lambda = 0.7;

  // Doubling the data and lambda together leaves the fit unchanged.
  const auto base = fit_qubo(data.codes, data.fitness, lambda);
  const auto both = fit_qubo(doubled.codes, doubled.fitness, 2 * lambda);
  EXPECT_LT((coefficients(base) - coefficients(both)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(base.intercept, both.intercept, 1e-10);

  // At fixed lambda the duplicated fit is the original fit at lambda / 2.
  const auto dup = fit_qubo(doubled.codes, doubled.fitness, lambda);
  const auto ref = oracle_ridge(data.codes, data.fitness, lambda / 2);
  EXPECT_LT((coefficients(dup) - ref.weights).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(dup.intercept, ref.intercept, 1e-9);
}

TEST(FitQubo, ResidualNonincreasingAsLambdaShrinks) {
  Rng rng(11);
  const auto data = random_samples(6, 120, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {1e4, 1e3, 1e2, 10.0, 1.0, 0.1, 1e-2, 1e-3}) {
    const auto fit = fit_qubo(data.codes, data.fitness, lambda);
    double rss = 0;
    for (std::size_t i = 0; i < data.codes.size(); ++i) {
      const double r = predict(fit, data.codes[i]) - data.fitness[i];
      rss += r * r;
    }
    EXPECT_LE(rss, prev * (1 + 1e-12));
    prev = rss;
  }
}

TEST(FitQubo, Errors) {
  Rng rng(12);
  const auto data = random_samples(4, 10, rng);
  EXPECT_THROW(fit_qubo(data.codes, data.fitness, 0.0), InvalidArgument);
  EXPECT_THROW(fit_qubo(data.codes, data.fitness, -1.0), InvalidArgument);
  std::vector<double> short_y(data.fitness.begin(), data.fitness.end() - 1);
  EXPECT_THROW(fit_qubo(data.codes, short_y, 1.0), InvalidArgument);
  EXPECT_THROW(fit_qubo(std::span<const BinaryCode>{}, std::span<const double>{}, 1.0), InvalidArgument);
  auto mixed = data.codes;
  mixed[3] = BinaryCode(5);
  EXPECT_THROW(fit_qubo(mixed, data.fitness, 1.0), InvalidArgument);
}

TEST(FitQubo, BlockSizeDoesNotChangeResultMaterially) {
  Rng rng(13);
  const auto data = random_samples(8, 300, rng);
  RidgeOptions a, b;
  a.block_rows = 1;
  b.block_rows = 1000;
  const auto fa = fit_qubo(data.codes, data.fitness, a);
  const auto fb = fit_qubo(data.codes, data.fitness, b);
  EXPECT_LT((coefficients(fa) - coefficients(fb)).cwiseAbs().maxCoeff(), 1e-10);
  // Same options twice: bit-identical.
  EXPECT_EQ(coefficients(fit_qubo(data.codes, data.fitness, a)), coefficients(fa));
}

TEST(QuboFile, HandWrittenFile) {
  const auto q = import_qubo(std::filesystem::path(LATENTQUBO_TEST_DATA) / "hand.qubo");
  EXPECT_EQ(q.dim(), 2u);
  EXPECT_DOUBLE_EQ(predict(q, BinaryCode{1, 1}), 2.0);
  EXPECT_FALSE(q.lambda.has_value());
}

TEST(QuboFile, DiagonalCouplingRejected) {
  try {
    import_qubo(std::filesystem::path(LATENTQUBO_TEST_DATA) / "diagonal.qubo");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("diagonal"), std::string::npos);
  }
}

TEST(QuboFile, MalformedInputs) {
  for (const char* text : {"c 0\n", "m 2\nb 2 1\n", "m 2\nq 1 0 1\n", "m 2\nb 0 1\nb 0 2\n", "m 2\nm 2\n",
                           "m 2\nz 1\n", "m x\n", "m 2\nq 0 1\n", "m 2\nc nan\n", "", "m 2\nlambda -1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(import_qubo(in), ParseError) << text;
  }
}

TEST(QuboFile, CommentsAndBlankLines) {
  std::istringstream in("# header\n\nm 3   # dim\nc 1.5\nq 0 2 -2\n");
  const auto q = import_qubo(in);
  EXPECT_DOUBLE_EQ(predict(q, BinaryCode{1, 1, 1}), -0.5);
}

TEST(QuboFile, ExportIsLossless) {
  Rng rng(14);
  auto q = random_surrogate(10, rng);
  q.lambda = 0.3;
  q.bias(4) = 0.0;  // omitted from the file, restored as zero
  std::stringstream buf;
  export_qubo(buf, q);
  const auto text = buf.str();
  EXPECT_NE(text.find("MAXIMIZE"), std::string::npos);
  EXPECT_EQ(text.find("b 4 "), std::string::npos);
  const auto back = import_qubo(buf);
  EXPECT_EQ(back.bias, q.bias);
  EXPECT_EQ(back.coupling, q.coupling);
  EXPECT_EQ(back.intercept, q.intercept);
  EXPECT_EQ(back.lambda, q.lambda);
}
