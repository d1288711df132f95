#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/random.hpp"
#include "hgan_tsa/gan/level.hpp"
#include "hgan_tsa/grid/dataset.hpp"
#include "hgan_tsa/hgan/config.hpp"
#include "hgan_tsa/hgan/data.hpp"

namespace hgan_tsa::hgan {

struct LevelSummary {
  std::size_t episodes = 0;
  bool converged = false;
};

/// A stack of conditional GAN levels plus the normalization they were
/// trained under. Level k (1-based) sees k samples and predicts sample k.
struct HganModel {
  HganConfig config;
  Normalization normalization;
  std::vector<int> pmu_bus_ids;
  std::uint64_t seed = 0;
  std::vector<gan::GanLevel> levels;                   // trained levels, ascending
  std::vector<std::vector<gan::StepMetrics>> metrics;  // per trained level
  std::vector<LevelSummary> summaries;

  std::size_t channels() const { return normalization.channels(); }
  std::size_t trained_levels() const { return levels.size(); }
  bool ready() const { return levels.size() == config.levels; }
};

// ---- Rollout -------------------------------------------------------------

struct Rollout {
  std::vector<Matrix> steps;  // depth + 1 entries, channels x batch; steps[0] is the input
  Matrix p_stable;            // depth x batch, row k-1 = level k's stable probability
};

/// Runs levels 1..depth autoregressively from normalized measured samples
/// (channels x batch).
inline Rollout roll_forward(std::span<const gan::GanLevel> levels, const Matrix& measured, std::size_t depth) {
  if (depth > levels.size())
    throw RangeError("rollout depth " + std::to_string(depth) + " exceeds the " + std::to_string(levels.size()) +
                     " available levels");
  Rollout r;
  r.steps.push_back(measured);
  r.p_stable.resize(static_cast<Eigen::Index>(depth), measured.cols());
  for (std::size_t k = 1; k <= depth; ++k) {
    auto out = gan::generator_forward(levels[k - 1].generator, std::span<const Matrix>(r.steps.data(), k));
    r.p_stable.row(static_cast<Eigen::Index>(k - 1)) = out.p_stable;
    r.steps.push_back(std::move(out.x_hat));
  }
  return r;
}

/// Single-sample rollout: (depth + 1) x channels, row 0 = `measured`.
inline Matrix roll_forward(const Eigen::VectorXd& measured, const HganModel& model, std::size_t depth) {
  if (depth > model.config.levels)
    throw RangeError("rollout depth " + std::to_string(depth) + " exceeds level count " +
                     std::to_string(model.config.levels));
  if (depth > model.trained_levels())
    throw StateError("rollout depth " + std::to_string(depth) + " needs untrained levels");
  if (static_cast<std::size_t>(measured.size()) != model.channels())
    throw ShapeError("sample has " + std::to_string(measured.size()) + " channels, model expects " +
                     std::to_string(model.channels()));
  const auto r = roll_forward(model.levels, Matrix(measured), depth);
  Matrix seq(static_cast<Eigen::Index>(depth + 1), measured.size());
  for (std::size_t k = 0; k <= depth; ++k) seq.row(static_cast<Eigen::Index>(k)) = r.steps[k].col(0).transpose();
  return seq;
}

// ---- Ensemble ------------------------------------------------------------

/// 1 iff strictly more than half of the votes are 1.
inline int majority_vote(std::span<const int> votes) {
  const auto stable = std::count(votes.begin(), votes.end(), 1);
  return 2 * static_cast<std::size_t>(stable) > votes.size() ? 1 : 0;
}

struct EnsembleDecision {
  std::vector<int> votes;
  double mean_probability = 0.0;
  int label = 0;
};

inline EnsembleDecision decide(std::span<const double> p_stable, EnsemblePolicy policy, double threshold) {
  EnsembleDecision d;
  for (double p : p_stable) d.votes.push_back(p > threshold ? 1 : 0);
  d.mean_probability =
      p_stable.empty() ? 0.0 : std::accumulate(p_stable.begin(), p_stable.end(), 0.0) / static_cast<double>(p_stable.size());
  d.label = policy == EnsemblePolicy::kMajority ? majority_vote(d.votes) : (d.mean_probability > threshold ? 1 : 0);
  return d;
}

// ---- Assessment ----------------------------------------------------------

struct TsaVerdict {
  std::vector<double> per_level_probabilities;
  std::vector<int> per_level_votes;
  double mean_probability = 0.0;
  int final_label = 0;
  Matrix predicted_sequence;  // (N + 1) x channels, normalized, row 0 = input
  double elapsed_seconds = 0.0;
};

inline void require_ready(const HganModel& model) {
  if (!model.ready())
    throw StateError("model is not ready: " + std::to_string(model.trained_levels()) + " of " +
                     std::to_string(model.config.levels) + " levels trained");
}

/// Assesses one normalized measured sample.
inline TsaVerdict assess(const HganModel& model, const Eigen::VectorXd& measured) {
  const auto start = std::chrono::steady_clock::now();
  require_ready(model);
  if (static_cast<std::size_t>(measured.size()) != model.channels())
    throw ShapeError("sample has " + std::to_string(measured.size()) + " channels, model expects " +
                     std::to_string(model.channels()));
  const auto r = roll_forward(model.levels, Matrix(measured), model.config.levels);
  TsaVerdict v;
  for (Eigen::Index k = 0; k < r.p_stable.rows(); ++k) v.per_level_probabilities.push_back(r.p_stable(k, 0));
  const auto d = decide(v.per_level_probabilities, model.config.policy, model.config.vote_threshold);
  v.per_level_votes = d.votes;
  v.mean_probability = d.mean_probability;
  v.final_label = d.label;
  v.predicted_sequence.resize(static_cast<Eigen::Index>(r.steps.size()), measured.size());
  for (std::size_t k = 0; k < r.steps.size(); ++k)
    v.predicted_sequence.row(static_cast<Eigen::Index>(k)) = r.steps[k].col(0).transpose();
  v.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return v;
}

/// Batched assessment without timing: per-level probabilities (N x batch)
/// and ensemble labels.
struct BatchAssessment {
  Matrix p_stable;
  std::vector<int> labels;
};

inline BatchAssessment assess_batch(const HganModel& model, const Matrix& measured) {
  require_ready(model);
  nn::require_shape(measured, static_cast<Eigen::Index>(model.channels()), measured.cols(), "assess_batch");
  BatchAssessment out;
  out.p_stable = roll_forward(model.levels, measured, model.config.levels).p_stable;
  out.labels.resize(static_cast<std::size_t>(measured.cols()));
  std::vector<double> col(static_cast<std::size_t>(out.p_stable.rows()));
  for (Eigen::Index b = 0; b < measured.cols(); ++b) {
    for (Eigen::Index k = 0; k < out.p_stable.rows(); ++k) col[static_cast<std::size_t>(k)] = out.p_stable(k, b);
    out.labels[static_cast<std::size_t>(b)] = decide(col, model.config.policy, model.config.vote_threshold).label;
  }
  return out;
}

// ---- Training ------------------------------------------------------------

struct TrainHooks {
  std::function<void(std::size_t level, const gan::StepMetrics&)> on_step;
  std::function<void(const HganModel&, std::size_t level)> on_level_complete;
};

/// Relative change of the mean cross-entropy between the last two windows.
inline bool converged(const std::vector<gan::StepMetrics>& history, std::size_t window, double tolerance) {
  if (window == 0 || history.size() < 2 * window) return false;
  double prev = 0.0, last = 0.0;
  const auto n = history.size();
  for (std::size_t i = n - 2 * window; i < n - window; ++i) prev += history[i].cross_entropy;
  for (std::size_t i = n - window; i < n; ++i) last += history[i].cross_entropy;
  return std::abs(last - prev) <= tolerance * std::max(std::abs(prev), 1e-300);
}

/// Fresh, untrained model for `ds` with normalization fitted on its training split.
inline HganModel init_model(const grid::Dataset& ds, const HganConfig& config, std::uint64_t seed) {
  config.validate();
  HganModel m;
  m.config = config;
  m.seed = seed;
  m.pmu_bus_ids = ds.pmu_bus_ids;
  m.normalization = fit_normalization(ds, config.levels);
  return m;
}

namespace detail {

inline Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& cols) { return m(Eigen::all, cols); }

}  // namespace detail

/// The untrained level k exactly as training would initialize it.
inline gan::GanLevel initial_level(const HganModel& model, std::size_t k) {
  Rng init = make_rng(model.seed, "init", k);
  return gan::GanLevel::create(k, static_cast<Eigen::Index>(model.channels()),
                               static_cast<Eigen::Index>(model.config.hidden_units), model.config.gru_layers, init);
}

struct LevelLosses {
  double cross_entropy = 0.0;
  double squared_error = 0.0;
  double accuracy = 0.0;
};

/// Full-set losses of `level` (index k) conditioned through the frozen
/// `lower` levels (1..k-1), against ground truth in `data`.
inline LevelLosses evaluate_level(const gan::GanLevel& level, std::span<const gan::GanLevel> lower,
                                  const SequenceSet& data) {
  const std::size_t k = level.index;
  if (lower.size() + 1 < k) throw StateError("evaluate_level: missing lower levels");
  if (data.steps.size() < k + 1) throw DataError("evaluate_level: sequences shorter than level " + std::to_string(k));
  const auto r = roll_forward(lower, data.steps[0], k - 1);
  const auto out = gan::generator_forward(level.generator, r.steps);
  LevelLosses l;
  l.cross_entropy = nn::bce_loss(out.p_stable, data.labels).value;
  l.squared_error = nn::mse_loss(out.x_hat, data.steps[k]).value;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < data.labels.cols(); ++i)
    if ((out.p_stable(i) > 0.5) == (data.labels(i) > 0.5)) ++correct;
  l.accuracy = static_cast<double>(correct) / static_cast<double>(std::max<Eigen::Index>(1, data.labels.cols()));
  return l;
}

/// Trains one level on top of the frozen lower levels already in `model`.
inline void train_next_level(HganModel& model, const SequenceSet& train, const TrainHooks& hooks = {}) {
  const std::size_t k = model.trained_levels() + 1;
  if (k > model.config.levels) throw StateError("all levels are already trained");
  if (train.steps.size() < k + 1) throw DataError("training sequences are shorter than level " + std::to_string(k));
  if (train.size() == 0) throw DataError("training split is empty");
  const auto& cfg = model.config;

  // Conditions for level k: the measured sample followed by the frozen
  // predictions of levels 1..k-1.
  const auto rollout = roll_forward(model.levels, train.steps[0], k - 1);
  const Matrix& target = train.steps[k];

  auto level = initial_level(model, k);
  Rng batches = make_rng(model.seed, "batches", k);

  gan::StepOptions opt;
  opt.lr_generator = cfg.lr_generator;
  opt.lr_discriminator = cfg.lr_discriminator;
  opt.clip_norm = cfg.clip_norm;
  opt.non_saturating = cfg.non_saturating;

  const std::size_t n = train.size();
  const std::size_t b = std::min(cfg.batch_size, n);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t cursor = n;  // forces a shuffle before the first batch

  std::vector<gan::StepMetrics> history;
  history.reserve(cfg.episodes);
  LevelSummary summary;
  gan::StepMetrics last;
  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    if (cursor + b > n) {
      shuffle(order, batches);
      cursor = 0;
    }
    const std::vector<Eigen::Index> cols(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                         order.begin() + static_cast<std::ptrdiff_t>(cursor + b));
    cursor += b;
    gan::LevelBatch batch;
    for (std::size_t t = 0; t < k; ++t) batch.condition.push_back(detail::gather(rollout.steps[t], cols));
    batch.target_next = detail::gather(target, cols);
    batch.labels = detail::gather(train.labels, cols);

    try {
      last = gan::train_level_step(level, batch, opt, last);
    } catch (const gan::DivergenceError& e) {
      throw gan::DivergenceError("level " + std::to_string(k) + " diverged at episode " + std::to_string(ep + 1) +
                                     ": " + e.what(),
                                 e.last_good());
    }
    history.push_back(last);
    if (hooks.on_step) hooks.on_step(k, last);
    summary.episodes = ep + 1;
    if (converged(history, cfg.convergence_window, cfg.convergence_tolerance)) {
      summary.converged = true;
      break;
    }
  }
  model.levels.push_back(std::move(level));
  model.metrics.push_back(std::move(history));
  model.summaries.push_back(summary);
  if (hooks.on_level_complete) hooks.on_level_complete(model, k);
}

/// Trains every remaining level of `model` in ascending order.
inline void train_remaining_levels(HganModel& model, const SequenceSet& train, const TrainHooks& hooks = {}) {
  while (!model.ready()) train_next_level(model, train, hooks);
}

inline SequenceSet training_sequences(const grid::Dataset& ds, const HganModel& model) {
  return extract_sequences(ds, ds.indices(grid::Split::kTrain), model.normalization, model.config.levels);
}

inline HganModel train_hgan(const grid::Dataset& ds, const HganConfig& config, std::uint64_t seed,
                            const TrainHooks& hooks = {}) {
  auto model = init_model(ds, config, seed);
  train_remaining_levels(model, training_sequences(ds, model), hooks);
  return model;
}

}  // namespace hgan_tsa::hgan
