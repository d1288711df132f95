#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/io.hpp"
#include "hgan_tsa/eval/tree.hpp"
#include "hgan_tsa/hgan/config.hpp"

namespace hgan_tsa::cli {

enum class OutputFormat { kText, kRecords };

struct SweepSpec {
  std::vector<double> snr_db;                 // empty: no noise sweep
  std::vector<std::uint64_t> noise_seeds{1, 2, 3};
  std::vector<std::vector<int>> pmu_subsets;  // bus ids; empty: no placement sweep
  std::vector<std::size_t> pmu_counts;        // empty: no count sweep
  std::vector<std::uint64_t> train_seeds;     // placement retraining seeds; empty: the model's seed
  bool tree = true;
  eval::TreeOptions tree_options;
};

/// Everything a subcommand needs. Values come from defaults, then the
/// config file, then command-line flags.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  OutputFormat format = OutputFormat::kText;
  std::filesystem::path out;
  std::filesystem::path case_file;
  std::filesystem::path dataset_dir;
  std::filesystem::path model_dir;
  std::filesystem::path sample_file;
  hgan::HganConfig model;
  SweepSpec sweep;
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

inline SweepSpec sweep_from_json(const Json& j, SweepSpec s = {}) {
  const std::string where = "evaluate";
  if (!j.is_object()) throw ConfigError("evaluate section must be an object");
  require_known_keys(j, {"snr_db", "noise_seeds", "pmu_subsets", "pmu_counts", "train_seeds", "tree", "tree_max_depth",
                         "tree_min_leaf"},
                     where);
  s.snr_db = json_get_or(j, "snr_db", s.snr_db, where);
  s.noise_seeds = json_get_or(j, "noise_seeds", s.noise_seeds, where);
  s.pmu_subsets = json_get_or(j, "pmu_subsets", s.pmu_subsets, where);
  s.pmu_counts = json_get_or(j, "pmu_counts", s.pmu_counts, where);
  s.train_seeds = json_get_or(j, "train_seeds", s.train_seeds, where);
  s.tree = json_get_or(j, "tree", s.tree, where);
  s.tree_options.max_depth = json_get_or(j, "tree_max_depth", s.tree_options.max_depth, where);
  s.tree_options.min_leaf = json_get_or(j, "tree_min_leaf", s.tree_options.min_leaf, where);
  if (s.noise_seeds.empty()) throw ConfigError("evaluate.noise_seeds must not be empty");
  if (s.tree_options.min_leaf == 0) throw ConfigError("evaluate.tree_min_leaf must be >= 1");
  return s;
}

/// Reads a run config file. Relative paths inside it resolve against the
/// file's directory; unknown keys are rejected.
inline RunConfig load_run_config(const std::filesystem::path& file, RunConfig rc = {}) {
  if (!std::filesystem::exists(file)) throw IoError("config file not found: " + file.string());
  const Json j = parse_json_file(file);
  const std::string where = file.string();
  if (!j.is_object()) throw ConfigError(where + ": top level must be an object");
  require_known_keys(j, {"seed", "jobs", "format", "out", "case", "dataset", "model_dir", "sample", "model", "evaluate"},
                     where);
  const auto base = file.parent_path();
  if (j.contains("seed")) rc.seed = json_get<std::uint64_t>(j, "seed", where);
  rc.jobs = json_get_or(j, "jobs", rc.jobs, where);
  if (j.contains("format")) {
    const auto f = json_get<std::string>(j, "format", where);
    if (f != "text" && f != "records") throw ConfigError(where + ": format must be text or records");
    rc.format = f == "text" ? OutputFormat::kText : OutputFormat::kRecords;
  }
  if (j.contains("out")) rc.out = detail::resolve(base, json_get<std::string>(j, "out", where));
  if (j.contains("case")) rc.case_file = detail::resolve(base, json_get<std::string>(j, "case", where));
  if (j.contains("dataset")) rc.dataset_dir = detail::resolve(base, json_get<std::string>(j, "dataset", where));
  if (j.contains("model_dir")) rc.model_dir = detail::resolve(base, json_get<std::string>(j, "model_dir", where));
  if (j.contains("sample")) rc.sample_file = detail::resolve(base, json_get<std::string>(j, "sample", where));
  if (j.contains("model")) rc.model = hgan::config_from_json(j.at("model"), rc.model);
  if (j.contains("evaluate")) rc.sweep = sweep_from_json(j.at("evaluate"), rc.sweep);
  return rc;
}

}  // namespace hgan_tsa::cli
