// latentqubo: command-line front end.
//
//   latentqubo validate <data.tsv>
//   latentqubo fit --data data.tsv --dim 16 --projection pca --lambda 1 --seed 0 --out model/
//   latentqubo optimize --model model/ --method sa --seed 0 [--trace] [--trace-out f.csv]
//   latentqubo export-qubo --model model/ --out f.qubo
//   latentqubo run --config exp.json --out results/
//   latentqubo report --in results/ --format table
//   latentqubo synth --out data.tsv --records 1000 --dim 32 --bits 16 --seed 1

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "latentqubo/latentqubo.hpp"

namespace fs = std::filesystem;
using namespace latentqubo;

namespace {

int cmd_validate(const fs::path& path) {
  const auto ds = load_dataset(path);
  validate(ds);
  std::cout << "records\t" << ds.size() << "\n"
            << "embedding_dim\t" << ds.dim() << "\n"
            << "sequences\t" << (ds.has_sequences() ? "yes" : "no") << "\n"
            << "fitness_min\t" << detail::format_double(ds.fitness.minCoeff()) << "\n"
            << "fitness_max\t" << detail::format_double(ds.fitness.maxCoeff()) << "\n"
            << "fitness_mean\t" << detail::format_double(ds.fitness.mean()) << "\n";
  return 0;
}

struct FitArgs {
  fs::path data;
  std::size_t dim = 16;
  std::string projection = "pca";
  double lambda = 1.0;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  fs::path out;
};

int cmd_fit(const FitArgs& a) {
  const auto ds = load_dataset(a.data);
  const auto kind = parse_projection_kind(a.projection);
  FitnessDataset train = ds;
  std::optional<FitnessDataset> test;
  if (a.train_fraction < 1.0) {
    auto parts = split(ds, a.train_fraction, derive_seed(a.seed, 0, 0, 0, "split"));
    train = std::move(parts.train);
    test = std::move(parts.test);
  }
  const auto model = fit_model(train, a.dim, kind, a.lambda, derive_seed(a.seed, 0, 0, 0, "projection"));
  fs::create_directories(a.out);
  save_projector(a.out / "projector.tsv", model.projector);
  save_binarizer(a.out / "binarizer.tsv", model.binarizer);
  export_qubo(a.out / "surrogate.qubo", model.surrogate);
  {
    std::ofstream out(a.out / "codebook.tsv", std::ios::binary);
    save_codebook(out, model.train);
  }
  nlohmann::json meta = {{"version", kVersion},
                         {"dim", a.dim},
                         {"projection", a.projection},
                         {"lambda", a.lambda},
                         {"seed", a.seed},
                         {"train_fraction", a.train_fraction},
                         {"train_records", train.size()},
                         {"test_records", test ? test->size() : 0}};
  std::cout << "train_records\t" << train.size() << "\n";
  if (test) {
    const auto codes = encode(model, *test);
    const std::vector<double> y(test->fitness.data(), test->fitness.data() + test->fitness.size());
    const double rho = test_spearman(model.surrogate, codes, y);
    meta["test_spearman"] = rho;
    std::cout << "test_records\t" << test->size() << "\n"
              << "test_spearman\t" << detail::format_fixed(rho, 6) << "\n";
  }
  std::ofstream(a.out / "model.json") << meta.dump(2) << '\n';
  std::cout << "model\t" << a.out.string() << "\n";
  return 0;
}

struct OptimizeArgs {
  fs::path model;
  std::string method = "sa";
  std::uint64_t seed = 0;
  bool trace = false;
  fs::path trace_out;
  std::size_t neighbors = 1;
};

int cmd_optimize(const OptimizeArgs& a) {
  const auto q = import_qubo(a.model / "surrogate.qubo");
  std::ifstream book_in(a.model / "codebook.tsv", std::ios::binary);
  if (!book_in) throw Error("cannot open '" + (a.model / "codebook.tsv").string() + "'");
  const auto book = load_codebook(book_in);
  if (book.size() == 0) throw Error("code book is empty");
  if (book.dim() != q.dim()) throw Error("code book and surrogate dimensions differ");

  const Method method = parse_method(a.method);
  Rng start_rng(derive_seed(a.seed, 0, 0, 0, "start"));
  const BinaryCode start = book.codes[detail::uniform_index(start_rng, book.size())];
  OptimizerParams params;
  params.trace = a.trace;
  const auto r = run_method(method, q, start, params, derive_seed(a.seed, 0, 0, 0, a.method));

  std::cout << "method\t" << a.method << "\n"
            << "start_code\t" << r.start_code.to_string() << "\n"
            << "start_score\t" << detail::format_double(r.start_score) << "\n"
            << "best_code\t" << r.best_code.to_string() << "\n"
            << "best_score\t" << detail::format_double(r.best_score) << "\n"
            << "improvement\t" << detail::format_double(r.improvement) << "\n"
            << "evaluations\t" << r.evaluations << "\n";
  std::size_t rank = 0;
  for (const auto& nn : hamming_nn(r.best_code, book, a.neighbors)) {
    std::cout << "neighbor\t" << ++rank << '\t' << nn.id << '\t' << nn.distance << '\t'
              << detail::format_double(nn.fitness) << '\t' << detail::format_fixed(percentile(nn.fitness, book.fitness), 2);
    if (book.sequences) std::cout << '\t' << (*book.sequences)[nn.index];
    std::cout << "\n";
  }
  if (a.trace) {
    const fs::path path = a.trace_out.empty() ? a.model / ("trace_" + a.method + ".csv") : a.trace_out;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    write_trace(out, r);
    std::cout << "trace\t" << path.string() << "\n";
  }
  return 0;
}

int cmd_export(const fs::path& model, const fs::path& out) {
  export_qubo(out, import_qubo(model / "surrogate.qubo"));
  std::cout << "wrote\t" << out.string() << "\n";
  return 0;
}

int cmd_run(const fs::path& config, const fs::path& out) {
  auto cfg = load_config(config);
  if (!out.empty()) cfg.output_dir = out;
  const auto report = run_experiment(cfg);
  std::size_t failed = 0;
  for (const auto& r : report.runs) failed += r.ok ? 0 : 1;
  std::cout << "runs\t" << report.runs.size() << "\n"
            << "failed\t" << failed << "\n"
            << "output\t" << cfg.output_dir.string() << "\n";
  return 0;
}

int cmd_report(const fs::path& in_dir, const std::string& format) {
  std::ifstream in(in_dir / "runs.csv", std::ios::binary);
  if (!in) throw Error("cannot open '" + (in_dir / "runs.csv").string() + "'");
  const auto summary = aggregate(read_runs_csv(in));
  if (format == "csv")
    write_summary_csv(std::cout, summary);
  else
    write_summary_table(std::cout, summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary latent QUBO surrogates for embedding-based fitness landscapes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  fs::path validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check an embeddings TSV file");
  validate_cmd->add_option("data", validate_path, "Embeddings TSV")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit projection, thresholds and surrogate; write a model directory");
  fit_cmd->add_option("--data", fit.data, "Embeddings TSV")->required();
  fit_cmd->add_option("--dim", fit.dim, "Latent bits m")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--projection", fit.projection, "random or pca")->check(CLI::IsMember({"random", "pca"}));
  fit_cmd->add_option("--lambda", fit.lambda, "Ridge coefficient")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--seed", fit.seed, "Seed for split and random projection");
  fit_cmd->add_option("--train-fraction", fit.train_fraction, "Training share; 1 fits on every record")
      ->check(CLI::Range(0.0, 1.0));
  fit_cmd->add_option("--out", fit.out, "Model directory")->required();

  OptimizeArgs opt;
  auto* opt_cmd = app.add_subcommand("optimize", "Maximize a fitted surrogate and decode by retrieval");
  opt_cmd->add_option("--model", opt.model, "Model directory")->required();
  opt_cmd->add_option("--method", opt.method, "sa, ga, greedy, random, bo or brute")
      ->check(CLI::IsMember({"sa", "ga", "greedy", "random", "bo", "brute"}));
  opt_cmd->add_option("--seed", opt.seed, "Seed for start code and optimizer");
  opt_cmd->add_flag("--trace", opt.trace, "Write a step,best_score CSV trace");
  opt_cmd->add_option("--trace-out", opt.trace_out, "Trace path (default <model>/trace_<method>.csv)");
  opt_cmd->add_option("--neighbors", opt.neighbors, "Nearest training records to list")->check(CLI::PositiveNumber);

  fs::path export_model;
  fs::path export_out;
  auto* export_cmd = app.add_subcommand("export-qubo", "Write the surrogate in QUBO text form");
  export_cmd->add_option("--model", export_model, "Model directory")->required();
  export_cmd->add_option("--out", export_out, "Output .qubo file")->required();

  fs::path run_config;
  fs::path run_out;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment grid from a JSON config");
  run_cmd->add_option("--config", run_config, "Experiment config JSON")->required();
  run_cmd->add_option("--out", run_out, "Output directory (overrides output_dir)");

  fs::path report_in;
  std::string report_format = "table";
  auto* report_cmd = app.add_subcommand("report", "Summarize runs.csv of a results directory");
  report_cmd->add_option("--in", report_in, "Results directory")->required();
  report_cmd->add_option("--format", report_format, "csv or table")->check(CLI::IsMember({"csv", "table"}));

  PlantedSpec synth;
  fs::path synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted-signal synthetic embeddings TSV");
  synth_cmd->add_option("--out", synth_out, "Output TSV")->required();
  synth_cmd->add_option("--records", synth.records, "Record count")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dim", synth.embedding_dim, "Embedding dimension")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--bits", synth.latent_bits, "Planted latent bits")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", synth.noise_ratio, "Noise std as a fraction of signal std");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_flag("--sequences", synth.with_sequences, "Include a placeholder sequence column");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate_cmd) return cmd_validate(validate_path);
    if (*fit_cmd) return cmd_fit(fit);
    if (*opt_cmd) return cmd_optimize(opt);
    if (*export_cmd) return cmd_export(export_model, export_out);
    if (*run_cmd) return cmd_run(run_config, run_out);
    if (*report_cmd) return cmd_report(report_in, report_format);
    if (*synth_cmd) {
      write_dataset(synth_out, make_planted_dataset(synth).data);
      std::cout << "wrote\t" << synth_out.string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
