#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/random.hpp"
#include "hgan_tsa/grid/dataset.hpp"
#include "hgan_tsa/grid/noise.hpp"
#include "hgan_tsa/hgan/data.hpp"
#include "hgan_tsa/hgan/model.hpp"

namespace hgan_tsa::eval {

/// Binary confusion counts with "stable" (label 1) as the positive class.
struct ConfusionMatrix {
  std::size_t true_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  void add(int predicted, int actual) {
    if (predicted == 1) {
      actual == 1 ? ++true_positive : ++false_positive;
    } else {
      actual == 1 ? ++false_negative : ++true_negative;
    }
  }

  std::size_t total() const { return true_positive + true_negative + false_positive + false_negative; }
  std::size_t correct() const { return true_positive + true_negative; }
  double accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(total());
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct EvaluationResult {
  std::vector<ConfusionMatrix> per_level;  // level 1..N
  ConfusionMatrix ensemble;
  std::size_t samples = 0;
  double mean_response_seconds = 0.0;  // wall time of assess, averaged
  double response_cycles = 0.0;        // mean assess time plus one PMU frame, in fundamental cycles

  std::vector<double> level_accuracies() const {
    std::vector<double> out;
    for (const auto& c : per_level) out.push_back(c.accuracy());
    return out;
  }
};

struct EvalOptions {
  double snr_db = grid::kNoNoise;  // infinite SNR leaves measurements untouched
  std::uint64_t noise_seed = 0;
};

/// Measured sample of record `index`, with noise injected into the record's
/// full voltage trajectory first when a finite SNR is requested.
inline Eigen::VectorXd observed_sample(const grid::Dataset& ds, std::size_t index, const EvalOptions& opt) {
  const auto& r = ds.records.at(index);
  if (std::isinf(opt.snr_db) && opt.snr_db > 0.0) return hgan::measured_sample(r);
  Rng rng = make_rng(opt.noise_seed, "noise", index);
  const Eigen::MatrixXd noisy = grid::inject_noise(r.voltages, opt.snr_db, rng);
  return noisy.row(static_cast<Eigen::Index>(r.measured_index)).transpose();
}

/// Assesses every record of `split` one at a time and tallies per-level and
/// ensemble confusion matrices.
inline EvaluationResult evaluate(const hgan::HganModel& model, const grid::Dataset& ds, grid::Split split,
                                 const EvalOptions& opt = {}) {
  hgan::require_ready(model);
  if (ds.channels() != model.channels())
    throw ShapeError("dataset has " + std::to_string(ds.channels()) + " channels, model expects " +
                     std::to_string(model.channels()));
  const auto indices = ds.indices(split);
  if (indices.empty()) throw DataError(std::string("the ") + grid::to_string(split) + " split is empty");

  EvaluationResult res;
  res.per_level.resize(model.config.levels);
  double elapsed = 0.0;
  for (auto i : indices) {
    const int truth = ds.records[i].label;
    const auto x = observed_sample(ds, i, opt);
    Eigen::VectorXd normalized(x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c) normalized(c) = model.normalization.normalize(x(c), static_cast<std::size_t>(c));
    const auto v = hgan::assess(model, normalized);
    for (std::size_t k = 0; k < v.per_level_votes.size(); ++k) res.per_level[k].add(v.per_level_votes[k], truth);
    res.ensemble.add(v.final_label, truth);
    elapsed += v.elapsed_seconds;
  }
  res.samples = indices.size();
  res.mean_response_seconds = elapsed / static_cast<double>(indices.size());
  res.response_cycles = res.mean_response_seconds * ds.nominal_frequency + ds.nominal_frequency / ds.sample_rate;
  return res;
}

}  // namespace hgan_tsa::eval
