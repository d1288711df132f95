#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hgan_tsa/cli/commands.hpp"

namespace {

using namespace hgan_tsa;

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t jobs = 1;
  std::string format;
  std::string case_file, dataset, model, sample;
  std::size_t levels = 0, episodes = 0;
  std::vector<double> snr;
  std::vector<std::uint64_t> noise_seeds;
  std::vector<std::size_t> pmu_counts;
  bool no_tree = false;
  cli::TrainFlags train;
};

bool given(const CLI::App& app, const std::string& name) {
  const auto* opt = app.get_option_no_throw(name);
  return opt && opt->count() > 0;
}

cli::RunConfig resolve(const CLI::App& app, const CLI::App& sub, const Flags& f) {
  cli::RunConfig rc;
  if (!f.config.empty()) rc = cli::load_run_config(f.config);
  if (given(app, "--seed")) rc.seed = f.seed;
  if (given(app, "--out")) rc.out = f.out;
  if (given(app, "--jobs")) {
    if (f.jobs == 0) throw ConfigError("--jobs must be >= 1");
    rc.jobs = f.jobs;
  }
  if (given(app, "--format")) rc.format = f.format == "records" ? cli::OutputFormat::kRecords : cli::OutputFormat::kText;
  if (given(sub, "--case")) rc.case_file = f.case_file;
  if (given(sub, "--dataset")) rc.dataset_dir = f.dataset;
  if (given(sub, "--model")) rc.model_dir = f.model;
  if (given(sub, "--sample")) rc.sample_file = f.sample;
  if (given(sub, "--levels")) rc.model.levels = f.levels;
  if (given(sub, "--episodes")) rc.model.episodes = f.episodes;
  if (given(sub, "--snr")) rc.sweep.snr_db = f.snr;
  if (given(sub, "--noise-seeds")) rc.sweep.noise_seeds = f.noise_seeds;
  if (given(sub, "--pmu-counts")) rc.sweep.pmu_counts = f.pmu_counts;
  if (f.no_tree) rc.sweep.tree = false;
  rc.model.validate();
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transient stability assessment with a hierarchy of conditional GANs"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration");
  app.add_option("--seed", f.seed, "Root random seed");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--jobs", f.jobs, "Worker threads for simulation and sweeps");
  app.add_option("--format", f.format, "Output format")->check(CLI::IsMember({"text", "records"}));

  auto* gen = app.add_subcommand("generate", "Simulate a labelled dataset from a case file");
  gen->add_option("--case", f.case_file, "Case description (JSON)");

  auto* train = app.add_subcommand("train", "Train the level hierarchy and write a model bundle");
  train->add_option("--dataset", f.dataset, "Dataset directory");
  train->add_option("--levels", f.levels, "Number of levels");
  train->add_option("--episodes", f.episodes, "Maximum episodes per level");
  train->add_flag("--resume", f.train.resume, "Continue a partially trained bundle in --out");
  train->add_flag("--quiet", f.train.quiet, "Suppress progress messages");

  auto* assess = app.add_subcommand("assess", "Assess measured samples with a trained model");
  assess->add_option("--model", f.model, "Model bundle directory");
  assess->add_option("--sample", f.sample, "CSV file, one sample of raw PMU voltages per line");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a model on the test split and run sweeps");
  evaluate->add_option("--model", f.model, "Model bundle directory");
  evaluate->add_option("--dataset", f.dataset, "Dataset directory");
  evaluate->add_option("--snr", f.snr, "Noise sweep SNR values in dB (inf for clean)")->delimiter(',');
  evaluate->add_option("--noise-seeds", f.noise_seeds, "Seeds averaged at every noise point")->delimiter(',');
  evaluate->add_option("--pmu-counts", f.pmu_counts, "PMU-count sweep (first n channels, retrains per point)")->delimiter(',');
  evaluate->add_flag("--no-tree", f.no_tree, "Skip the decision tree baseline");

  auto* report = app.add_subcommand("report", "Write loss curves and a training summary for a model bundle");
  report->add_option("--model", f.model, "Model bundle directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitConfig;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const auto rc = resolve(app, *sub, f);
    if (sub == gen) cli::cmd_generate(rc, std::cout);
    if (sub == train) cli::cmd_train(rc, f.train, std::cout, std::cerr);
    if (sub == assess) cli::cmd_assess(rc, std::cout);
    if (sub == evaluate) cli::cmd_evaluate(rc, std::cout);
    if (sub == report) cli::cmd_report(rc, std::cout);
  } catch (const gan::DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << " (last finite episode " << e.last_good().episode
              << "; completed levels were kept)\n";
    return cli::kExitDivergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitOther;
  }
  return cli::kExitOk;
}
