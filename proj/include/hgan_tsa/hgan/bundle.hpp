#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/io.hpp"
#include "hgan_tsa/hgan/model.hpp"
#include "hgan_tsa/nn/serialize.hpp"

namespace hgan_tsa::hgan {

// Model bundle directory:
//   manifest.json            format, version, config, normalization, seed, level list
//   level_<k>.bin            generator + discriminator parameters of level k (parameter file format)
//   metrics_level_<k>.jsonl  one JSON object per training episode
inline constexpr int kBundleVersion = 1;
inline constexpr const char* kBundleFormat = "hgan-tsa-model";

inline std::string level_file(std::size_t k) { return "level_" + std::to_string(k) + ".bin"; }
inline std::string metrics_file(std::size_t k) { return "metrics_level_" + std::to_string(k) + ".jsonl"; }

inline Json to_json(const gan::StepMetrics& m) {
  return Json{{"episode", m.episode},
              {"cross_entropy", m.cross_entropy},
              {"squared_error", m.squared_error},
              {"adversarial", m.adversarial},
              {"generator_loss", m.generator_loss},
              {"discriminator_loss", m.discriminator_loss},
              {"d_real", m.d_real},
              {"d_fake", m.d_fake},
              {"accuracy", m.accuracy},
              {"discriminator_skipped", m.discriminator_skipped},
              {"generator_skipped", m.generator_skipped}};
}

inline gan::StepMetrics metrics_from_json(const Json& j, const std::string& where) {
  gan::StepMetrics m;
  m.episode = json_get<std::size_t>(j, "episode", where);
  m.cross_entropy = json_get<double>(j, "cross_entropy", where);
  m.squared_error = json_get<double>(j, "squared_error", where);
  m.adversarial = json_get<double>(j, "adversarial", where);
  m.generator_loss = json_get<double>(j, "generator_loss", where);
  m.discriminator_loss = json_get<double>(j, "discriminator_loss", where);
  m.d_real = json_get<double>(j, "d_real", where);
  m.d_fake = json_get<double>(j, "d_fake", where);
  m.accuracy = json_get_or<double>(j, "accuracy", 0.0, where);
  m.discriminator_skipped = json_get_or<bool>(j, "discriminator_skipped", false, where);
  m.generator_skipped = json_get_or<bool>(j, "generator_skipped", false, where);
  return m;
}

inline std::string metrics_log(const std::vector<gan::StepMetrics>& history) {
  std::string out;
  for (const auto& m : history) out += to_json(m).dump() + "\n";
  return out;
}

inline std::vector<gan::StepMetrics> parse_metrics_log(const std::string& text, const std::string& source) {
  std::vector<gan::StepMetrics> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError(source, n, e.what());
    }
    out.push_back(metrics_from_json(j, source + ":" + std::to_string(n)));
  }
  return out;
}

inline Json bundle_manifest(const HganModel& model) {
  Json levels = Json::array();
  for (std::size_t k = 1; k <= model.trained_levels(); ++k) {
    const auto& s = model.summaries.at(k - 1);
    levels.push_back({{"index", k},
                      {"parameters", level_file(k)},
                      {"metrics", metrics_file(k)},
                      {"episodes", s.episodes},
                      {"converged", s.converged}});
  }
  return Json{{"format", kBundleFormat},
              {"version", kBundleVersion},
              {"seed", model.seed},
              {"channels", model.channels()},
              {"pmu_buses", model.pmu_bus_ids},
              {"config", to_json(model.config)},
              {"normalization", to_json(model.normalization)},
              {"trained_levels", model.trained_levels()},
              {"levels", levels}};
}

/// Writes every trained level and the manifest. Safe to call after each
/// level: files of earlier levels are rewritten with identical bytes.
inline void save_bundle(const HganModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 1; k <= model.trained_levels(); ++k) {
    write_file_bytes(dir / level_file(k), nn::serialize_parameters(model.levels[k - 1]));
    write_file_text(dir / metrics_file(k), metrics_log(model.metrics.at(k - 1)));
  }
  write_file_text(dir / "manifest.json", bundle_manifest(model).dump(2) + "\n");
}

/// Loads a bundle. A partially trained bundle loads with fewer levels and
/// `ready()` false.
inline HganModel load_bundle(const std::filesystem::path& dir, bool with_metrics = true) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError(manifest_path.string() + ": model manifest not found");
  const Json j = parse_json_file(manifest_path);
  const std::string where = manifest_path.string();
  if (json_get<std::string>(j, "format", where) != kBundleFormat)
    throw IoError(where + ": not a model bundle manifest");
  if (const auto v = json_get<int>(j, "version", where); v != kBundleVersion)
    throw IoError(where + ": unsupported bundle version " + std::to_string(v));

  HganModel m;
  m.seed = json_get<std::uint64_t>(j, "seed", where);
  m.pmu_bus_ids = json_get<std::vector<int>>(j, "pmu_buses", where);
  m.config = config_from_json(j.at("config"));
  m.normalization = normalization_from_json(j.at("normalization"));
  const auto channels = json_get<std::size_t>(j, "channels", where);
  if (channels != m.normalization.channels()) throw IoError(where + ": channel count disagrees with normalization");
  const auto trained = json_get<std::size_t>(j, "trained_levels", where);
  if (trained > m.config.levels) throw IoError(where + ": more trained levels than configured");
  const auto& entries = j.at("levels");
  if (!entries.is_array() || entries.size() != trained) throw IoError(where + ": level list length mismatch");

  for (std::size_t k = 1; k <= trained; ++k) {
    const auto& e = entries[k - 1];
    auto level = gan::GanLevel::zeros(k, static_cast<Eigen::Index>(channels),
                                      static_cast<Eigen::Index>(m.config.hidden_units), m.config.gru_layers);
    const auto file = dir / json_get<std::string>(e, "parameters", where);
    nn::deserialize_parameters(level, read_file_bytes(file), file.string());
    m.levels.push_back(std::move(level));
    m.summaries.push_back({json_get<std::size_t>(e, "episodes", where), json_get<bool>(e, "converged", where)});
    if (with_metrics) {
      const auto mfile = dir / json_get<std::string>(e, "metrics", where);
      m.metrics.push_back(parse_metrics_log(read_file_text(mfile), mfile.string()));
    } else {
      m.metrics.emplace_back();
    }
  }
  return m;
}

}  // namespace hgan_tsa::hgan
