#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hgan_tsa/core/parallel.hpp"
#include "hgan_tsa/eval/metrics.hpp"

namespace hgan_tsa::eval {

enum class SweepAxis { kSnrDb, kPmuSubset, kPmuCount };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kSnrDb: return "snr_db";
    case SweepAxis::kPmuSubset: return "pmu_subset";
    case SweepAxis::kPmuCount: return "pmu_count";
  }
  return "unknown";
}

struct Band {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

inline Band band(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  Band b{0.0, xs.front(), xs.front()};
  for (double x : xs) {
    b.mean += x;
    b.min = std::min(b.min, x);
    b.max = std::max(b.max, x);
  }
  b.mean /= static_cast<double>(xs.size());
  return b;
}

struct SweepPoint {
  std::string setting;  // "inf", "50", "1+2+4", ...
  double value = 0.0;   // numeric sort key
  std::vector<Band> per_level;
  Band ensemble;
  std::string error;  // non-empty when the point failed
};

struct SweepReport {
  SweepAxis axis = SweepAxis::kSnrDb;
  std::size_t levels = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepPoint> points;  // ascending by value
};

namespace detail {

inline SweepPoint aggregate(std::string setting, double value, std::size_t levels,
                            const std::vector<EvaluationResult>& runs) {
  SweepPoint p{std::move(setting), value, {}, {}, {}};
  for (std::size_t k = 0; k < levels; ++k) {
    std::vector<double> acc;
    for (const auto& r : runs) acc.push_back(r.per_level.at(k).accuracy());
    p.per_level.push_back(band(acc));
  }
  std::vector<double> ens;
  for (const auto& r : runs) ens.push_back(r.ensemble.accuracy());
  p.ensemble = band(ens);
  return p;
}

// Point p owns runs [p * n_seeds, (p + 1) * n_seeds). The first failing
// seed marks the whole point as failed.
inline SweepPoint collect(std::string setting, double value, std::size_t levels,
                          const std::vector<EvaluationResult>& runs, const std::vector<std::string>& errors,
                          std::size_t p, std::size_t n_seeds) {
  std::vector<EvaluationResult> ok;
  for (std::size_t i = p * n_seeds; i < (p + 1) * n_seeds; ++i) {
    if (!errors[i].empty()) return SweepPoint{std::move(setting), value, {}, {}, errors[i]};
    ok.push_back(runs[i]);
  }
  return aggregate(std::move(setting), value, levels, ok);
}

inline std::string format_snr(double snr) {
  if (std::isinf(snr)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr);
  return buf;
}

inline void sort_points(std::vector<SweepPoint>& pts) {
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
}

}  // namespace detail

/// Evaluates `split` under measurement noise at each SNR, once per seed.
/// Each (SNR, seed) pair is an independent job.
inline SweepReport noise_sweep(const hgan::HganModel& model, const grid::Dataset& ds, grid::Split split,
                               const std::vector<double>& snr_db, const std::vector<std::uint64_t>& seeds,
                               std::size_t jobs = 1) {
  if (seeds.empty()) throw ConfigError("noise sweep needs at least one seed");
  SweepReport rep{SweepAxis::kSnrDb, model.config.levels, seeds, {}};
  const std::size_t n_seeds = seeds.size();
  std::vector<EvaluationResult> runs(snr_db.size() * n_seeds);
  std::vector<std::string> errors(runs.size());
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    try {
      runs[i] = evaluate(model, ds, split, {snr_db[i / n_seeds], seeds[i % n_seeds]});
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t p = 0; p < snr_db.size(); ++p)
    rep.points.push_back(detail::collect(detail::format_snr(snr_db[p]), snr_db[p], rep.levels, runs, errors, p, n_seeds));
  detail::sort_points(rep.points);
  return rep;
}

/// Trains a model for a channel subset of the dataset.
using ModelFactory = std::function<hgan::HganModel(const grid::Dataset& subset, std::uint64_t seed)>;

inline std::string subset_label(const grid::Dataset& ds, const std::vector<std::size_t>& subset) {
  std::string s;
  for (auto c : subset) s += (s.empty() ? "" : "+") + std::to_string(ds.pmu_bus_ids[c]);
  return s;
}

/// Retrains and evaluates one model per (channel subset, seed) on the test
/// split. A failing point is kept with its error message; the others still run.
inline SweepReport placement_sweep(const ModelFactory& factory, const grid::Dataset& ds,
                                   const std::vector<std::vector<std::size_t>>& subsets,
                                   const std::vector<std::uint64_t>& seeds, std::size_t levels,
                                   SweepAxis axis = SweepAxis::kPmuSubset, std::size_t jobs = 1) {
  if (seeds.empty()) throw ConfigError("placement sweep needs at least one seed");
  for (const auto& s : subsets) {
    if (s.empty()) throw RangeError("channel subset must not be empty");
    for (auto c : s)
      if (c >= ds.channels())
        throw RangeError("channel index " + std::to_string(c) + " out of range (dataset has " +
                         std::to_string(ds.channels()) + ")");
  }
  SweepReport rep{axis, levels, seeds, {}};
  const std::size_t n_seeds = seeds.size();
  std::vector<EvaluationResult> runs(subsets.size() * n_seeds);
  std::vector<std::string> errors(runs.size());
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    try {
      const auto sub = grid::select_channels(ds, subsets[i / n_seeds]);
      runs[i] = evaluate(factory(sub, seeds[i % n_seeds]), sub, grid::Split::kTest);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t p = 0; p < subsets.size(); ++p) {
    const double value = axis == SweepAxis::kPmuCount ? static_cast<double>(subsets[p].size()) : static_cast<double>(p);
    rep.points.push_back(detail::collect(subset_label(ds, subsets[p]), value, levels, runs, errors, p, n_seeds));
  }
  detail::sort_points(rep.points);
  return rep;
}

/// Subsets {first channel}, {first two}, ..., for a PMU-count sweep.
inline std::vector<std::vector<std::size_t>> prefix_subsets(const std::vector<std::size_t>& order,
                                                            const std::vector<std::size_t>& counts) {
  std::vector<std::vector<std::size_t>> out;
  for (auto n : counts) {
    if (n == 0 || n > order.size()) throw RangeError("PMU count " + std::to_string(n) + " out of range");
    out.emplace_back(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

}  // namespace hgan_tsa::eval
