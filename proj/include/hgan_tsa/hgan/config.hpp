#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/io.hpp"

namespace hgan_tsa::hgan {

enum class EnsemblePolicy {
  kMajority,  // stable iff strictly more than half of the levels vote stable
  kAverage,   // stable iff the mean stable probability exceeds the threshold
};

inline const char* to_string(EnsemblePolicy p) { return p == EnsemblePolicy::kMajority ? "majority" : "average"; }

inline EnsemblePolicy parse_policy(const std::string& s) {
  if (s == "majority") return EnsemblePolicy::kMajority;
  if (s == "average") return EnsemblePolicy::kAverage;
  throw ConfigError("unknown ensemble policy '" + s + "' (expected majority or average)");
}

/// Hyperparameters of the hierarchy. Defaults are the reference values
/// (3 levels, 20000 episodes, 2 x 30 GRU units, batch 128).
struct HganConfig {
  std::size_t levels = 3;
  std::size_t episodes = 20000;
  double lr_generator = 1e-3;
  double lr_discriminator = 1e-4;
  std::size_t gru_layers = 2;
  std::size_t hidden_units = 30;
  std::size_t batch_size = 128;
  double clip_norm = 5.0;
  std::size_t convergence_window = 200;
  double convergence_tolerance = 1e-4;
  EnsemblePolicy policy = EnsemblePolicy::kMajority;
  double vote_threshold = 0.5;
  bool non_saturating = false;

  void validate() const {
    if (levels < 1) throw ConfigError("levels must be >= 1");
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
    if (gru_layers < 1) throw ConfigError("gru_layers must be >= 1");
    if (hidden_units < 1) throw ConfigError("hidden_units must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr_generator >= 0.0) || !(lr_discriminator >= 0.0)) throw ConfigError("learning rates must be >= 0");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
    if (!(convergence_tolerance >= 0.0)) throw ConfigError("convergence_tolerance must be >= 0");
    if (!(vote_threshold > 0.0 && vote_threshold < 1.0)) throw ConfigError("vote_threshold must lie in (0, 1)");
  }
};

inline Json to_json(const HganConfig& c) {
  return Json{{"levels", c.levels},
              {"episodes", c.episodes},
              {"lr_generator", c.lr_generator},
              {"lr_discriminator", c.lr_discriminator},
              {"gru_layers", c.gru_layers},
              {"hidden_units", c.hidden_units},
              {"batch_size", c.batch_size},
              {"clip_norm", c.clip_norm},
              {"convergence_window", c.convergence_window},
              {"convergence_tolerance", c.convergence_tolerance},
              {"ensemble_policy", to_string(c.policy)},
              {"vote_threshold", c.vote_threshold},
              {"non_saturating", c.non_saturating}};
}

/// Reads the keys present in `j` on top of `base`; unknown keys are rejected.
inline HganConfig config_from_json(const Json& j, HganConfig base = {}) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  require_known_keys(j,
                     {"levels", "episodes", "lr_generator", "lr_discriminator", "gru_layers", "hidden_units",
                      "batch_size", "clip_norm", "convergence_window", "convergence_tolerance", "ensemble_policy",
                      "vote_threshold", "non_saturating"},
                     "model");
  HganConfig c = base;
  c.levels = json_get_or<std::size_t>(j, "levels", c.levels, "model");
  c.episodes = json_get_or<std::size_t>(j, "episodes", c.episodes, "model");
  c.lr_generator = json_get_or<double>(j, "lr_generator", c.lr_generator, "model");
  c.lr_discriminator = json_get_or<double>(j, "lr_discriminator", c.lr_discriminator, "model");
  c.gru_layers = json_get_or<std::size_t>(j, "gru_layers", c.gru_layers, "model");
  c.hidden_units = json_get_or<std::size_t>(j, "hidden_units", c.hidden_units, "model");
  c.batch_size = json_get_or<std::size_t>(j, "batch_size", c.batch_size, "model");
  c.clip_norm = json_get_or<double>(j, "clip_norm", c.clip_norm, "model");
  c.convergence_window = json_get_or<std::size_t>(j, "convergence_window", c.convergence_window, "model");
  c.convergence_tolerance = json_get_or<double>(j, "convergence_tolerance", c.convergence_tolerance, "model");
  if (j.contains("ensemble_policy")) c.policy = parse_policy(json_get<std::string>(j, "ensemble_policy", "model"));
  c.vote_threshold = json_get_or<double>(j, "vote_threshold", c.vote_threshold, "model");
  c.non_saturating = json_get_or<bool>(j, "non_saturating", c.non_saturating, "model");
  c.validate();
  return c;
}

}  // namespace hgan_tsa::hgan
