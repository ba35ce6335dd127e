#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "latentqubo/latentqubo.hpp"

using namespace latentqubo;

namespace {

RunRow row(std::size_t size, std::size_t dim, const std::string& method, double rho, double pct) {
  RunRow r;
  r.size = size;
  r.dim = dim;
  r.method = method;
  r.ok = true;
  r.metrics.test_spearman = rho;
  r.metrics.nn_percentile = pct;
  return r;
}

const FitnessDataset& small_data() {
  static const FitnessDataset data = [] {
    PlantedSpec spec;
    spec.records = 400;
    spec.embedding_dim = 12;
    spec.latent_bits = 6;
    spec.seed = 21;
    return make_planted_dataset(spec).data;
  }();
  return data;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.dataset = "unused.tsv";
  cfg.sample_sizes = {100, 200};
  cfg.latent_dims = {4, 6};
  cfg.seeds = 2;
  cfg.optimizer.annealing.iterations = 200;
  cfg.optimizer.genetic.generations = 10;
  cfg.optimizer.random_search.samples = 100;
  cfg.optimizer.latent_bo.iterations = 20;
  return cfg;
}

std::string runs_text(const ExperimentReport& r) {
  std::ostringstream out;
  write_runs_csv(out, r.runs);
  return out.str();
}

}  // namespace

TEST(Aggregate, MeanAndSampleStd) {
  const std::vector<RunRow> rows{row(100, 8, "sa", 1.2, 70), row(100, 8, "sa", 1.8, 90), row(100, 8, "sa", 1.5, 95)};
  const auto two = aggregate(std::span(rows).first(2));
  ASSERT_EQ(two.size(), 1u);
  EXPECT_DOUBLE_EQ(two[0].test_spearman.mean, 1.5);
  EXPECT_NEAR(two[0].test_spearman.std, 0.4242640687119285, 1e-12);
  const auto three = aggregate(rows);
  EXPECT_NEAR(three[0].nn_percentile.mean, 85.0, 1e-12);
  EXPECT_NEAR(three[0].nn_percentile.std, 13.228756555322953, 1e-12);
  EXPECT_EQ(three[0].runs, 3u);
}

TEST(Aggregate, SingleAndIdenticalRows) {
  const std::vector<RunRow> one{row(1, 1, "ga", 0.3, 50)};
  EXPECT_EQ(aggregate(one)[0].test_spearman.std, 0.0);
  const std::vector<RunRow> same{row(1, 1, "ga", 0.3, 50), row(1, 1, "ga", 0.3, 50)};
  EXPECT_EQ(aggregate(same)[0].test_spearman.std, 0.0);
  EXPECT_EQ(aggregate(same)[0].test_spearman.mean, 0.3);
}

TEST(Aggregate, GroupsAndSkipsFailures) {
  std::vector<RunRow> rows{row(1, 2, "sa", 0.1, 1), row(1, 2, "ga", 0.2, 2), row(1, 2, "sa", 0.3, 3)};
  RunRow failed = row(1, 2, "ga", 0, 0);
  failed.ok = false;
  rows.push_back(failed);
  const auto s = aggregate(rows);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].method, "sa");
  EXPECT_EQ(s[0].runs, 2u);
  EXPECT_EQ(s[1].runs, 1u);
  EXPECT_EQ(s[1].failed, 1u);
}

TEST(Seeds, DerivationIsStableAndDistinct) {
  EXPECT_EQ(derive_seed(0, 1000, 8, 0, "sa"), derive_seed(0, 1000, 8, 0, "sa"));
  std::set<std::uint64_t> seen;
  for (std::size_t s = 0; s < 5; ++s)
    for (auto label : {"sa", "ga", "split", "projection"}) seen.insert(derive_seed(0, 1000, 8, s, label));
  EXPECT_EQ(seen.size(), 20u);
  EXPECT_NE(derive_seed(0, 1000, 8, 0, "sa"), derive_seed(1, 1000, 8, 0, "sa"));
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Experiment, GridIsComplete) {
  const auto cfg = small_config();
  const auto report = run_experiment(cfg, small_data());
  EXPECT_EQ(report.runs.size(), 2u * 2u * 2u * 5u);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::string>> keys;
  for (const auto& r : report.runs) {
    EXPECT_TRUE(r.ok) << r.error;
    keys.emplace(r.size, r.dim, r.seed, r.method);
  }
  EXPECT_EQ(keys.size(), report.runs.size());
  EXPECT_EQ(report.summary.size(), 2u * 2u * 5u);
}

TEST(Experiment, DeterministicAcrossRunsAndThreads) {
  auto cfg = small_config();
  const auto a = run_experiment(cfg, small_data());
  const auto b = run_experiment(cfg, small_data());
  EXPECT_EQ(runs_text(a), runs_text(b));
  EXPECT_EQ(a.provenance, b.provenance);
  cfg.threads = 3;
  const auto c = run_experiment(cfg, small_data());
  EXPECT_EQ(runs_text(a), runs_text(c));
}

TEST(Experiment, ExistingSeedsUnaffectedByGrowingGrid) {
  auto cfg = small_config();
  const auto base = run_experiment(cfg, small_data());
  cfg.seeds = 3;
  cfg.latent_dims.push_back(5);
  const auto grown = run_experiment(cfg, small_data());
  for (const auto& r : base.runs) {
    const auto it = std::find_if(grown.runs.begin(), grown.runs.end(), [&](const RunRow& g) {
      return g.size == r.size && g.dim == r.dim && g.seed == r.seed && g.method == r.method;
    });
    ASSERT_NE(it, grown.runs.end());
    EXPECT_EQ(it->best_code, r.best_code);
    EXPECT_EQ(it->metrics.test_spearman, r.metrics.test_spearman);
  }
}

TEST(Experiment, FailedCellIsIsolated) {
  auto cfg = small_config();
  cfg.latent_dims = {4, 40};  // 40 exceeds the embedding rank
  const auto report = run_experiment(cfg, small_data());
  EXPECT_EQ(report.runs.size(), 2u * 2u * 2u * 5u);
  for (const auto& r : report.runs) {
    if (r.dim == 4) {
      EXPECT_TRUE(r.ok) << r.error;
    } else {
      EXPECT_FALSE(r.ok);
      EXPECT_NE(r.error.find("rank"), std::string::npos) << r.error;
    }
  }
  std::ostringstream table;
  write_summary_table(table, report.summary);
  EXPECT_FALSE(table.str().empty());
}

TEST(Experiment, CellUsesOnlyTrainingData) {
  // Fitting twice on the same train part, with differently ordered test parts,
  // must yield the same model.
  const auto& data = small_data();
  const auto parts = split(data, 0.8, 3);
  const auto a = fit_model(parts.train, 6, ProjectionKind::pca, 1.0, 5);
  std::vector<std::size_t> rev(parts.test.size());
  for (std::size_t i = 0; i < rev.size(); ++i) rev[i] = rev.size() - 1 - i;
  const auto test_rev = parts.test.select(rev);
  const auto b = fit_model(parts.train, 6, ProjectionKind::pca, 1.0, 5);
  EXPECT_EQ(a.binarizer.thresholds, b.binarizer.thresholds);
  EXPECT_EQ(a.surrogate.coupling, b.surrogate.coupling);
  const auto codes = encode(a, parts.test);
  const auto codes_rev = encode(a, test_rev);
  for (std::size_t i = 0; i < rev.size(); ++i) EXPECT_EQ(codes[rev[i]], codes_rev[i]);
}

TEST(RunsCsv, RoundTrip) {
  const auto report = run_experiment(small_config(), small_data());
  std::stringstream buf;
  write_runs_csv(buf, report.runs);
  const auto back = read_runs_csv(buf);
  ASSERT_EQ(back.size(), report.runs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].metrics.test_spearman, report.runs[i].metrics.test_spearman);
    EXPECT_EQ(back[i].best_code, report.runs[i].best_code);
    EXPECT_EQ(back[i].metrics.nn_id, report.runs[i].metrics.nn_id);
  }
  std::ostringstream again;
  write_runs_csv(again, back);
  EXPECT_EQ(again.str(), buf.str());
}

TEST(RunsCsv, QuotesErrorsWithCommas) {
  RunRow r;
  r.method = "sa";
  r.error = "bad, \"quoted\" thing";
  std::stringstream buf;
  write_runs_csv(buf, std::vector<RunRow>{r});
  EXPECT_EQ(read_runs_csv(buf)[0].error, r.error);
}

TEST(Config, ParsesAndRejectsUnknownKeys) {
  const auto j = nlohmann::json::parse(R"({"dataset": "d.tsv", "sample_sizes": [100], "latent_dims": [4],
      "methods": ["sa", "brute"], "optimizer": {"annealing": {"iterations": 50}}})");
  const auto cfg = config_from_json(j, "/base");
  EXPECT_EQ(cfg.dataset, std::filesystem::path("/base/d.tsv"));
  EXPECT_EQ(cfg.methods.size(), 2u);
  EXPECT_EQ(cfg.optimizer.annealing.iterations, 50u);
  EXPECT_EQ(cfg.seeds, 5u);

  auto bad = j;
  bad["lamda"] = 2.0;
  EXPECT_THROW(config_from_json(bad), Error);
  bad = j;
  bad["optimizer"]["annealing"]["iters"] = 5;
  EXPECT_THROW(config_from_json(bad), Error);
  bad = j;
  bad["train_fraction"] = 1.5;
  EXPECT_THROW(config_from_json(bad), Error);
  bad = j;
  bad["methods"] = {"sa", "tabu"};
  EXPECT_THROW(config_from_json(bad), Error);
}

TEST(Config, DefaultsMatchDocumentedGrid) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.sample_sizes, (std::vector<std::size_t>{1000, 2000, 5000, 10000}));
  EXPECT_EQ(cfg.latent_dims, (std::vector<std::size_t>{8, 16, 32, 64}));
  EXPECT_EQ(cfg.methods.size(), 5u);
  EXPECT_DOUBLE_EQ(cfg.train_fraction, 0.8);
}
