#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hgan_tsa/cli/run_config.hpp"
#include "hgan_tsa/eval/baseline.hpp"
#include "hgan_tsa/eval/metrics.hpp"
#include "hgan_tsa/eval/report.hpp"
#include "hgan_tsa/eval/sweep.hpp"
#include "hgan_tsa/grid/case.hpp"
#include "hgan_tsa/grid/dataset.hpp"
#include "hgan_tsa/hgan/bundle.hpp"
#include "hgan_tsa/hgan/model.hpp"

namespace hgan_tsa::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDivergence = 4;
inline constexpr int kExitData = 5;

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kNumeric: return kExitDivergence;
    case ErrorKind::kShape:
    case ErrorKind::kData:
    case ErrorKind::kRange:
    case ErrorKind::kState: return kExitData;
    default: return kExitOther;
  }
}

inline const std::filesystem::path& require_path(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("missing ") + what);
  return p;
}

inline const char* label_name(int label) { return label == 1 ? "stable" : "unstable"; }

// ---- generate -------------------------------------------------------------

/// Counts of eta values in ten equal bins over [-1, 1].
inline std::array<std::size_t, 10> eta_histogram(const grid::Dataset& ds) {
  std::array<std::size_t, 10> bins{};
  for (const auto& r : ds.records) {
    auto b = static_cast<long>(std::floor((r.eta + 1.0) / 0.2));
    bins[static_cast<std::size_t>(std::clamp(b, 0L, 9L))]++;
  }
  return bins;
}

inline void cmd_generate(const RunConfig& rc, std::ostream& out) {
  const auto c = grid::load_case(require_path(rc.case_file, "case file (--case)"));
  auto request = c.dataset;
  if (rc.seed) request.seed = *rc.seed;
  grid::GenerationReport gen;
  const auto ds = grid::generate_dataset(c, request, rc.jobs, &gen);
  const auto& dir = require_path(rc.out, "output directory (--out)");
  grid::save_dataset(ds, dir);

  const auto train = ds.label_counts(grid::Split::kTrain);
  const auto test = ds.label_counts(grid::Split::kTest);
  const auto hist = eta_histogram(ds);
  if (rc.format == OutputFormat::kRecords) {
    out << Json{{"dataset", dir.string()},
                {"case", ds.case_name},
                {"records", ds.records.size()},
                {"channels", ds.channels()},
                {"train", {{"stable", train[1]}, {"unstable", train[0]}}},
                {"test", {{"stable", test[1]}, {"unstable", test[0]}}},
                {"eta_histogram", hist},
                {"scenarios", gen.scenarios}}
               .dump()
        << "\n";
    return;
  }
  out << "dataset " << dir.string() << ": " << ds.records.size() << " records, " << ds.channels() << " channels\n"
      << "  train: " << train[1] << " stable, " << train[0] << " unstable\n"
      << "  test:  " << test[1] << " stable, " << test[0] << " unstable\n"
      << "  scenarios: " << gen.scenarios << " (" << gen.crossing << " with a critical clearing time, "
      << gen.always_stable << " always stable, " << gen.always_unstable << " always unstable)\n"
      << "  eta histogram:\n";
  for (std::size_t b = 0; b < hist.size(); ++b) {
    char line[64];
    std::snprintf(line, sizeof line, "    [%+.1f, %+.1f%c %zu\n", -1.0 + 0.2 * static_cast<double>(b),
                  -0.8 + 0.2 * static_cast<double>(b), b + 1 == hist.size() ? ']' : ')', hist[b]);
    out << line;
  }
}

// ---- train ----------------------------------------------------------------

struct TrainFlags {
  bool resume = false;
  bool quiet = false;
};

inline void print_level_summary(const hgan::HganModel& model, std::size_t k, OutputFormat fmt, std::ostream& out) {
  const auto& h = model.metrics.at(k - 1);
  const auto& s = model.summaries.at(k - 1);
  const gan::StepMetrics last = h.empty() ? gan::StepMetrics{} : h.back();
  if (fmt == OutputFormat::kRecords) {
    out << Json{{"level", k},
                {"episodes", s.episodes},
                {"converged", s.converged},
                {"cross_entropy", last.cross_entropy},
                {"squared_error", last.squared_error},
                {"generator_loss", last.generator_loss},
                {"discriminator_loss", last.discriminator_loss}}
               .dump()
        << "\n";
  } else {
    char line[160];
    std::snprintf(line, sizeof line,
                  "level %zu: %zu episodes%s, cross-entropy %.6g, squared error %.6g, G loss %.6g, D loss %.6g\n", k,
                  s.episodes, s.converged ? " (converged)" : "", last.cross_entropy, last.squared_error,
                  last.generator_loss, last.discriminator_loss);
    out << line;
  }
}

inline void cmd_train(const RunConfig& rc, const TrainFlags& flags, std::ostream& out, std::ostream& log) {
  const auto ds = grid::load_dataset(require_path(rc.dataset_dir, "dataset directory (--dataset)"));
  const auto& dir = require_path(rc.out, "output directory (--out)");

  hgan::HganModel model;
  if (flags.resume && std::filesystem::exists(dir / "manifest.json")) {
    model = hgan::load_bundle(dir);
    if (rc.seed && *rc.seed != model.seed)
      throw ConfigError("--seed " + std::to_string(*rc.seed) + " differs from the bundle seed " +
                        std::to_string(model.seed));
    if (model.pmu_bus_ids != ds.pmu_bus_ids) throw DataError("dataset PMU buses differ from the bundle's");
    if (!flags.quiet)
      log << "resuming: " << model.trained_levels() << " of " << model.config.levels << " levels already trained\n";
  } else {
    model = hgan::init_model(ds, rc.model, rc.seed.value_or(1));
    for (auto c : model.normalization.constant_channels())
      log << "warning: channel " << c << " (bus " << ds.pmu_bus_ids[c]
          << ") is constant on the training split and maps to 0.5\n";
  }

  hgan::TrainHooks hooks;
  hooks.on_level_complete = [&](const hgan::HganModel& m, std::size_t k) {
    hgan::save_bundle(m, dir);
    if (!flags.quiet) log << "level " << k << " checkpointed to " << dir.string() << "\n";
  };
  const auto already = model.trained_levels();
  if (already == 0) hgan::save_bundle(model, dir);
  hgan::train_remaining_levels(model, hgan::training_sequences(ds, model), hooks);
  for (std::size_t k = 1; k <= model.trained_levels(); ++k) {
    if (k <= already && rc.format == OutputFormat::kText) out << "(resumed) ";
    print_level_summary(model, k, rc.format, out);
  }
}

// ---- assess ---------------------------------------------------------------

struct SampleLine {
  std::size_t line = 0;
  Eigen::VectorXd values;
};

/// Comma-separated raw voltages, one sample per line. Blank lines and lines
/// starting with '#' are skipped.
inline std::vector<SampleLine> parse_samples(const std::string& text, const std::string& source) {
  std::vector<SampleLine> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<double> vals;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ParseError(source, n, "not a number: '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos)
        throw ParseError(source, n, "not a number: '" + cell + "'");
      if (!std::isfinite(v)) throw ParseError(source, n, "non-finite value");
      vals.push_back(v);
    }
    if (!line.empty() && line.back() == ',') throw ParseError(source, n, "empty trailing field");
    out.push_back({n, Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()))});
  }
  if (out.empty()) throw ParseError(source, n, "no samples found");
  return out;
}

inline Eigen::VectorXd normalize_sample(const hgan::HganModel& model, const Eigen::VectorXd& raw) {
  Eigen::VectorXd x(raw.size());
  for (Eigen::Index c = 0; c < raw.size(); ++c) x(c) = model.normalization.normalize(raw(c), static_cast<std::size_t>(c));
  return x;
}

inline std::string bus_list(const std::vector<int>& ids) {
  std::string s;
  for (auto id : ids) s += (s.empty() ? "" : ", ") + std::to_string(id);
  return s;
}

inline void cmd_assess(const RunConfig& rc, std::ostream& out) {
  const auto model = hgan::load_bundle(require_path(rc.model_dir, "model directory (--model)"), false);
  hgan::require_ready(model);
  const auto& file = require_path(rc.sample_file, "sample file (--sample)");
  if (!std::filesystem::exists(file)) throw IoError("sample file not found: " + file.string());
  const auto samples = parse_samples(read_file_text(file), file.string());
  for (const auto& s : samples)
    if (static_cast<std::size_t>(s.values.size()) != model.channels())
      throw ShapeError(file.string() + ":" + std::to_string(s.line) + ": sample has " +
                       std::to_string(s.values.size()) + " channels, model expects " +
                       std::to_string(model.channels()) + " (PMU buses " + bus_list(model.pmu_bus_ids) + ")");

  for (const auto& s : samples) {
    const auto v = hgan::assess(model, normalize_sample(model, s.values));
    const nn::Matrix seq = model.normalization.denormalize(nn::Matrix(v.predicted_sequence.transpose())).transpose();
    if (rc.format == OutputFormat::kRecords) {
      Json rows = Json::array();
      for (Eigen::Index r = 0; r < seq.rows(); ++r) {
        std::vector<double> row(seq.cols());
        for (Eigen::Index c = 0; c < seq.cols(); ++c) row[static_cast<std::size_t>(c)] = seq(r, c);
        rows.push_back(row);
      }
      out << Json{{"line", s.line},
                  {"per_level_probabilities", v.per_level_probabilities},
                  {"per_level_votes", v.per_level_votes},
                  {"mean_probability", v.mean_probability},
                  {"final_label", v.final_label},
                  {"verdict", label_name(v.final_label)},
                  {"predicted_sequence", rows},
                  {"elapsed_seconds", v.elapsed_seconds}}
                 .dump()
          << "\n";
      continue;
    }
    out << "sample (line " << s.line << "): " << label_name(v.final_label) << "\n";
    for (std::size_t k = 0; k < v.per_level_probabilities.size(); ++k) {
      char line[96];
      std::snprintf(line, sizeof line, "  level %zu: p_stable %.6f, vote %s\n", k + 1, v.per_level_probabilities[k],
                    label_name(v.per_level_votes[k]));
      out << line;
    }
    char tail[128];
    std::snprintf(tail, sizeof tail, "  mean p_stable %.6f, elapsed %.3g s\n", v.mean_probability, v.elapsed_seconds);
    out << tail << "  predicted voltages (pu), one row per step:\n";
    for (Eigen::Index r = 0; r < seq.rows(); ++r) {
      out << "   ";
      for (Eigen::Index c = 0; c < seq.cols(); ++c) {
        char cell[24];
        std::snprintf(cell, sizeof cell, " %.5f", seq(r, c));
        out << cell;
      }
      out << "\n";
    }
  }
}

// ---- evaluate -------------------------------------------------------------

inline std::vector<std::vector<std::size_t>> subsets_from_bus_ids(const grid::Dataset& ds,
                                                                  const std::vector<std::vector<int>>& buses) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& subset : buses) {
    std::vector<std::size_t> idx;
    for (int id : subset) {
      const auto it = std::find(ds.pmu_bus_ids.begin(), ds.pmu_bus_ids.end(), id);
      if (it == ds.pmu_bus_ids.end())
        throw ConfigError("PMU subset names bus " + std::to_string(id) + ", which is not measured in the dataset (" +
                          bus_list(ds.pmu_bus_ids) + ")");
      idx.push_back(static_cast<std::size_t>(it - ds.pmu_bus_ids.begin()));
    }
    out.push_back(std::move(idx));
  }
  return out;
}

inline void print_confusion(const std::string& scope, const eval::ConfusionMatrix& c, OutputFormat fmt,
                            std::ostream& out) {
  if (fmt == OutputFormat::kRecords) {
    out << Json{{"scope", scope},
                {"true_positive", c.true_positive},
                {"true_negative", c.true_negative},
                {"false_positive", c.false_positive},
                {"false_negative", c.false_negative},
                {"accuracy", c.accuracy()}}
               .dump()
        << "\n";
    return;
  }
  char line[128];
  std::snprintf(line, sizeof line, "  %-14s acc %.4f  TP %zu  TN %zu  FP %zu  FN %zu\n", scope.c_str(), c.accuracy(),
                c.true_positive, c.true_negative, c.false_positive, c.false_negative);
  out << line;
}

inline void print_sweep(const eval::SweepReport& rep, OutputFormat fmt, std::ostream& out) {
  for (const auto& p : rep.points) {
    if (fmt == OutputFormat::kRecords) {
      Json j{{"sweep", eval::to_string(rep.axis)}, {"setting", p.setting}};
      if (p.error.empty()) {
        j["ensemble_mean"] = p.ensemble.mean;
        j["ensemble_min"] = p.ensemble.min;
        j["ensemble_max"] = p.ensemble.max;
        std::vector<double> levels;
        for (const auto& b : p.per_level) levels.push_back(b.mean);
        j["level_means"] = levels;
      } else {
        j["error"] = p.error;
      }
      out << j.dump() << "\n";
      continue;
    }
    char line[160];
    if (p.error.empty())
      std::snprintf(line, sizeof line, "  %s %-10s ensemble %.4f [%.4f, %.4f]\n", eval::to_string(rep.axis),
                    p.setting.c_str(), p.ensemble.mean, p.ensemble.min, p.ensemble.max);
    else
      std::snprintf(line, sizeof line, "  %s %-10s failed: %s\n", eval::to_string(rep.axis), p.setting.c_str(),
                    p.error.c_str());
    out << line;
  }
}

inline void cmd_evaluate(const RunConfig& rc, std::ostream& out) {
  const auto model = hgan::load_bundle(require_path(rc.model_dir, "model directory (--model)"), false);
  const auto ds = grid::load_dataset(require_path(rc.dataset_dir, "dataset directory (--dataset)"));
  const auto& dir = require_path(rc.out, "output directory (--out)");
  if (model.pmu_bus_ids != ds.pmu_bus_ids)
    throw ShapeError("model PMU buses (" + bus_list(model.pmu_bus_ids) + ") differ from the dataset's (" +
                     bus_list(ds.pmu_bus_ids) + ")");

  eval::ReportInputs in;
  in.evaluation = eval::evaluate(model, ds, grid::Split::kTest);
  if (rc.sweep.tree) in.decision_tree = eval::tree_baseline(ds, rc.sweep.tree_options);
  if (!rc.sweep.snr_db.empty())
    in.sweeps.push_back(eval::noise_sweep(model, ds, grid::Split::kTest, rc.sweep.snr_db, rc.sweep.noise_seeds, rc.jobs));

  const auto train_seeds = rc.sweep.train_seeds.empty() ? std::vector<std::uint64_t>{model.seed} : rc.sweep.train_seeds;
  const eval::ModelFactory factory = [&](const grid::Dataset& subset, std::uint64_t seed) {
    return hgan::train_hgan(subset, model.config, seed);
  };
  if (!rc.sweep.pmu_subsets.empty())
    in.sweeps.push_back(eval::placement_sweep(factory, ds, subsets_from_bus_ids(ds, rc.sweep.pmu_subsets), train_seeds,
                                              model.config.levels, eval::SweepAxis::kPmuSubset, rc.jobs));
  if (!rc.sweep.pmu_counts.empty()) {
    std::vector<std::size_t> order(ds.channels());
    std::iota(order.begin(), order.end(), std::size_t{0});
    in.sweeps.push_back(eval::placement_sweep(factory, ds, eval::prefix_subsets(order, rc.sweep.pmu_counts), train_seeds,
                                              model.config.levels, eval::SweepAxis::kPmuCount, rc.jobs));
  }
  eval::emit_report(in, dir);

  const auto& ev = *in.evaluation;
  if (rc.format == OutputFormat::kText) out << "test split: " << ev.samples << " samples\n";
  for (std::size_t k = 0; k < ev.per_level.size(); ++k)
    print_confusion("level_" + std::to_string(k + 1), ev.per_level[k], rc.format, out);
  print_confusion("ensemble", ev.ensemble, rc.format, out);
  if (in.decision_tree) print_confusion("decision_tree", *in.decision_tree, rc.format, out);
  if (rc.format == OutputFormat::kRecords) {
    out << Json{{"mean_response_seconds", ev.mean_response_seconds}, {"response_cycles", ev.response_cycles}}.dump()
        << "\n";
  } else {
    char line[128];
    std::snprintf(line, sizeof line, "  response time %.3g s per sample, %.4f cycles including one PMU frame\n",
                  ev.mean_response_seconds, ev.response_cycles);
    out << line;
  }
  for (const auto& s : in.sweeps) print_sweep(s, rc.format, out);
  if (rc.format == OutputFormat::kText) out << "report written to " << dir.string() << "\n";
}

// ---- report ---------------------------------------------------------------

inline void cmd_report(const RunConfig& rc, std::ostream& out) {
  const auto model = hgan::load_bundle(require_path(rc.model_dir, "model directory (--model)"));
  const auto& dir = require_path(rc.out, "output directory (--out)");
  eval::ReportInputs in;
  in.loss_curves = model.metrics;
  in.summaries = model.summaries;
  const auto files = eval::emit_report(in, dir);
  for (std::size_t k = 1; k <= model.trained_levels(); ++k) print_level_summary(model, k, rc.format, out);
  if (rc.format == OutputFormat::kText)
    for (const auto& f : files) out << "wrote " << f.string() << "\n";
}

}  // namespace hgan_tsa::cli
