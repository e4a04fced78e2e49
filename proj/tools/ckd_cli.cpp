// Batch CLI for the CKD detection pipeline.
//
// Subcommands mirror the pipeline stages and are resumable from the artifacts
// a previous stage left in the output directory:
//   prep      parse + preprocess, write prepared matrices and stage tables
//   train     grid search + CV + final fits, write model_<name>.bin
//   evaluate  held-out metrics, ROC tables
//   explain   TreeSHAP values and feature ranking for the boosted model
//   report    assemble report.json from stage artifacts
//   run-all   everything above; --seeds N sweeps master_seed..master_seed+N-1
//   gen-data  write the synthetic schema-compatible dataset

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "ckd/pipeline.hpp"
#include "ckd/synth.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool out_set = false;
};

ckd::PipelineConfig load_config(const CliOptions& opts) {
  ckd::require(!opts.config_path.empty(), "cli", "--config <path> is required");
  ckd::PipelineConfig config = ckd::config_from_toml_file(opts.config_path);
  if (opts.seed_set) config.master_seed = opts.seed;
  if (opts.out_set) config.out_dir = opts.out_dir;
  config.validate();
  return config;
}

int run_stage(const std::string& stage, const CliOptions& opts, std::size_t n_seeds) {
  const ckd::PipelineConfig config = load_config(opts);
  ckd::StageTimings timings;
  if (stage == "prep") {
    ckd::run_prep(config, &timings);
    ckd::write_timings(config, timings);
  } else if (stage == "train") {
    const ckd::PrepState prep = ckd::load_prep(config);
    ckd::run_train(config, prep, &timings);
    ckd::write_timings(config, timings);
  } else if (stage == "evaluate") {
    const ckd::PrepState prep = ckd::load_prep(config);
    const ckd::TrainState train = ckd::load_train(config);
    ckd::run_evaluate(config, prep, train, &timings);
    ckd::write_timings(config, timings);
  } else if (stage == "explain") {
    const ckd::PrepState prep = ckd::load_prep(config);
    const ckd::TrainState train = ckd::load_train(config);
    ckd::run_explain(config, prep, train, &timings);
    ckd::write_timings(config, timings);
  } else if (stage == "report") {
    const ckd::json report = ckd::assemble_report(config);
    ckd::write_text_file(std::filesystem::path(config.out_dir) / "report.json",
                         report.dump(2) + "\n");
  } else if (stage == "run-all") {
    if (n_seeds > 1) {
      const ckd::json report = ckd::run_sweep(config, n_seeds);
      std::printf("sweep of %zu seeds written to %s/report.json\n", n_seeds,
                  config.out_dir.c_str());
      for (const auto& [model, stats] : report.at("aggregate").items())
        std::printf("  %-7s mean accuracy %.4f  mean auc %.4f  mean kappa %.4f\n",
                    model.c_str(), stats.at("accuracy").at("mean").get<double>(),
                    stats.at("auc").at("mean").get<double>(),
                    stats.at("kappa").at("mean").get<double>());
    } else {
      const ckd::json report = ckd::run_pipeline(config);
      std::printf("report written to %s/report.json\n", config.out_dir.c_str());
      for (const auto& [model, metrics] :
           report.at("evaluate").at("models").items())
        std::printf("  %-7s accuracy %.4f  auc %.4f  kappa %.4f\n", model.c_str(),
                    metrics.at("accuracy").get<double>(),
                    metrics.at("auc").get<double>(),
                    metrics.at("kappa").get<double>());
    }
  } else {
    ckd::fail("cli", "unknown stage '" + stage + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chronic kidney disease detection pipeline"};
  app.require_subcommand(0, 1);
  app.fallthrough();  // global flags may follow the subcommand

  CliOptions opts;
  app.add_option("--config", opts.config_path, "Pipeline config (TOML)");
  auto* seed_opt = app.add_option("--seed", opts.seed, "Override run.master_seed");
  auto* out_opt = app.add_option("--out", opts.out_dir, "Override run.out_dir");
  std::string stage_flag;
  app.add_option("--stage", stage_flag,
                 "Run a single stage (prep|train|evaluate|explain|report|run-all)");
  std::size_t n_seeds = 1;
  app.add_option("--seeds", n_seeds, "Seed-sweep count for run-all");

  std::string gen_path = "data/ckd_synthetic.arff";
  std::uint64_t gen_seed = ckd::kSynthDefaultSeed;

  auto* prep = app.add_subcommand("prep", "Parse and preprocess the dataset");
  auto* train = app.add_subcommand("train", "Grid search, CV and final model fits");
  auto* evaluate = app.add_subcommand("evaluate", "Held-out metrics for every model");
  auto* explain = app.add_subcommand("explain", "TreeSHAP for the boosted model");
  auto* report = app.add_subcommand("report", "Assemble report.json");
  auto* run_all = app.add_subcommand("run-all", "Full pipeline (optionally --seeds N)");
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset");
  gen->add_option("--path", gen_path, "Output file");
  gen->add_option("--gen-seed", gen_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);
  opts.seed_set = seed_opt->count() > 0;
  opts.out_set = out_opt->count() > 0;

  std::string stage;
  if (prep->parsed()) stage = "prep";
  if (train->parsed()) stage = "train";
  if (evaluate->parsed()) stage = "evaluate";
  if (explain->parsed()) stage = "explain";
  if (report->parsed()) stage = "report";
  if (run_all->parsed()) stage = "run-all";
  if (gen->parsed()) {
    try {
      ckd::write_text_file(gen_path, ckd::generate_ckd_arff(gen_seed));
      std::printf("wrote %s\n", gen_path.c_str());
      return 0;
    } catch (const ckd::Error& e) {
      std::fprintf(stderr, "error %s\n", e.what());
      return 1;
    }
  }
  if (stage.empty()) stage = stage_flag;
  if (stage.empty()) {
    std::fprintf(stderr, "%s\n", app.help().c_str());
    return 2;
  }

  try {
    return run_stage(stage, opts, n_seeds);
  } catch (const ckd::Error& e) {
    std::fprintf(stderr, "error [stage:%s] %s\n", e.stage().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error %s\n", e.what());
    return 1;
  }
}
