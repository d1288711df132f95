#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/io.hpp"
#include "hgan_tsa/core/parallel.hpp"
#include "hgan_tsa/core/random.hpp"
#include "hgan_tsa/grid/case.hpp"
#include "hgan_tsa/grid/dynamics.hpp"
#include "hgan_tsa/grid/equilibrium.hpp"

namespace hgan_tsa::grid {

enum class Split { kTrain, kTest };

inline const char* to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

struct Dataset {
  std::string case_name;
  double sample_rate = 120.0;
  double nominal_frequency = 60.0;
  std::vector<int> pmu_bus_ids;
  std::size_t machine_count = 0;
  std::uint64_t seed = 0;
  std::vector<TransientSample> records;
  std::vector<Split> split;  // parallel to records

  std::size_t channels() const { return pmu_bus_ids.size(); }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
      if (split[i] == s) out.push_back(i);
    return out;
  }

  std::array<std::size_t, 2> label_counts(std::optional<Split> only = std::nullopt) const {
    std::array<std::size_t, 2> n{0, 0};
    for (std::size_t i = 0; i < records.size(); ++i)
      if (!only || split[i] == *only) ++n[static_cast<std::size_t>(records[i].label)];
    return n;
  }
};

/// Critical clearing time of one (loading, fault) scenario, or which class
/// the whole search interval produces when no crossing exists.
struct ClearingSearch {
  enum class Outcome { kCrossing, kAlwaysStable, kAlwaysUnstable };
  Outcome outcome = Outcome::kCrossing;
  double critical_cycles = 0.0;
};

struct ScenarioKey {
  std::size_t loading = 0;
  FaultElement fault;
};

namespace detail {

struct PreparedScenario {
  ScenarioKey key;
  const OperatingPoint* op = nullptr;
  NetworkModel network;
};

inline TransientSample simulate(const CaseData& c, const PreparedScenario& s, double duration_cycles) {
  const auto spec = c.scenario(s.op->loading_factor, s.key.fault, duration_cycles);
  return integrate_transient(spec, s.op->machines, s.network, s.op->initial_angles);
}

inline ClearingSearch find_critical_clearing(const CaseData& c, const PreparedScenario& s, int iterations = 16) {
  double lo = c.grid.min_duration_cycles, hi = c.grid.max_duration_cycles;
  if (simulate(c, s, lo).label == 0) return {ClearingSearch::Outcome::kAlwaysUnstable, lo};
  if (simulate(c, s, hi).label == 1) return {ClearingSearch::Outcome::kAlwaysStable, hi};
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    (simulate(c, s, mid).label == 1 ? lo : hi) = mid;
  }
  return {ClearingSearch::Outcome::kCrossing, 0.5 * (lo + hi)};
}

inline std::string format_id(const CaseData& c, const PreparedScenario& s, double cycles, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "-d%.4f-r%05zu", cycles, index);
  char lf[32];
  std::snprintf(lf, sizeof lf, "L%.2f-", s.op->loading_factor);
  return std::string(lf) + c.describe(s.key.fault) + buf;
}

}  // namespace detail

struct GenerationReport {
  std::size_t scenarios = 0;
  std::size_t crossing = 0;
  std::size_t always_stable = 0;
  std::size_t always_unstable = 0;
};

/// Simulates a class-balanced dataset. Fault durations are drawn around each
/// scenario's critical clearing time so both classes are reachable; the
/// result depends only on (case, request, seed).
inline Dataset generate_dataset(const CaseData& c, const DatasetRequest& request, std::size_t jobs = 1,
                                GenerationReport* report = nullptr) {
  if (c.machines.size() < 2) throw ConfigError("dataset generation needs at least two machines");
  const auto faults = c.grid.fault_elements();
  if (faults.empty()) throw ConfigError("scenario grid has no fault elements");
  if (c.grid.loading_factors.empty()) throw ConfigError("scenario grid has no loading factors");

  std::vector<OperatingPoint> ops(c.grid.loading_factors.size());
  parallel_for(ops.size(), jobs, [&](std::size_t i) { ops[i] = initialize_operating_point(c, c.grid.loading_factors[i]); });

  std::vector<detail::PreparedScenario> scenarios;
  for (std::size_t li = 0; li < ops.size(); ++li)
    for (const auto& f : faults)
      scenarios.push_back({{li, f}, &ops[li], build_network(ops[li].branch_y, ops[li].load_admittances, c.branches,
                                                            ops[li].machines, f)});

  std::vector<ClearingSearch> searches(scenarios.size());
  parallel_for(scenarios.size(), jobs, [&](std::size_t i) { searches[i] = detail::find_critical_clearing(c, scenarios[i]); });

  std::vector<std::size_t> stable_pool, unstable_pool;
  GenerationReport rep;
  rep.scenarios = scenarios.size();
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    switch (searches[i].outcome) {
      case ClearingSearch::Outcome::kCrossing:
        ++rep.crossing;
        stable_pool.push_back(i);
        unstable_pool.push_back(i);
        break;
      case ClearingSearch::Outcome::kAlwaysStable:
        ++rep.always_stable;
        stable_pool.push_back(i);
        break;
      case ClearingSearch::Outcome::kAlwaysUnstable:
        ++rep.always_unstable;
        unstable_pool.push_back(i);
        break;
    }
  }
  if (report) *report = rep;
  const char* hint = " (widen the duration_search_cycles range or add fault elements)";
  if (request.stable > 0 && stable_pool.empty())
    throw ImbalanceError("stable", std::string("scenario grid cannot produce stable events") + hint);
  if (request.unstable > 0 && unstable_pool.empty())
    throw ImbalanceError("unstable", std::string("scenario grid cannot produce unstable events") + hint);

  const std::size_t total = request.stable + request.unstable;
  Dataset ds;
  ds.case_name = c.name;
  ds.sample_rate = c.simulation.sample_rate;
  ds.nominal_frequency = c.nominal_frequency;
  for (auto b : c.pmu_buses) ds.pmu_bus_ids.push_back(c.bus_id(b));
  ds.machine_count = c.machines.size();
  ds.seed = request.seed;
  ds.records.resize(total);

  parallel_for(total, jobs, [&](std::size_t r) {
    const bool want_stable = r < request.stable;
    const std::size_t slot = want_stable ? r : r - request.stable;
    const auto& pool = want_stable ? stable_pool : unstable_pool;
    const auto& scen = scenarios[pool[slot % pool.size()]];
    const auto& search = searches[pool[slot % pool.size()]];
    Rng rng = make_rng(request.seed, want_stable ? "duration-stable" : "duration-unstable", slot);
    for (int attempt = 0; attempt < 64; ++attempt) {
      double cycles;
      if (search.outcome == ClearingSearch::Outcome::kCrossing) {
        cycles = want_stable ? search.critical_cycles * uniform(rng, c.grid.stable_fraction_lo, c.grid.stable_fraction_hi)
                             : search.critical_cycles *
                                   uniform(rng, c.grid.unstable_fraction_lo, c.grid.unstable_fraction_hi);
        cycles = std::clamp(cycles, c.grid.min_duration_cycles, c.grid.max_duration_cycles);
      } else {
        cycles = uniform(rng, c.grid.min_duration_cycles, c.grid.max_duration_cycles);
      }
      auto sample = detail::simulate(c, scen, cycles);
      if (sample.label == (want_stable ? 1 : 0)) {
        sample.fault = c.describe(scen.key.fault);
        sample.scenario_id = detail::format_id(c, scen, cycles, r);
        ds.records[r] = std::move(sample);
        return;
      }
    }
    throw ImbalanceError(want_stable ? "stable" : "unstable",
                         "could not draw a " + std::string(want_stable ? "stable" : "unstable") +
                             " event for scenario " + c.describe(scen.key.fault));
  });

  // Stratified split: the first round(train_fraction * n) of each shuffled class go to training.
  ds.split.assign(total, Split::kTest);
  for (int label = 0; label <= 1; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < total; ++i)
      if (ds.records[i].label == label) idx.push_back(i);
    Rng rng = make_rng(request.seed, "split", static_cast<std::uint64_t>(label));
    shuffle(idx, rng);
    const auto n_train = static_cast<std::size_t>(std::llround(request.train_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < n_train; ++k) ds.split[idx[k]] = Split::kTrain;
  }
  return ds;
}

inline Dataset generate_dataset(const CaseData& c, std::size_t jobs = 1) { return generate_dataset(c, c.dataset, jobs); }

/// Keeps only the listed voltage channels (positions into pmu_bus_ids).
inline Dataset select_channels(const Dataset& ds, std::span<const std::size_t> channels) {
  if (channels.empty()) throw ConfigError("channel subset must not be empty");
  Dataset out = ds;
  out.pmu_bus_ids.clear();
  std::vector<Eigen::Index> cols;
  for (auto ch : channels) {
    if (ch >= ds.channels()) throw ConfigError("channel index " + std::to_string(ch) + " out of range");
    out.pmu_bus_ids.push_back(ds.pmu_bus_ids[ch]);
    cols.push_back(static_cast<Eigen::Index>(ch));
  }
  for (auto& rec : out.records) rec.voltages = Eigen::MatrixXd(rec.voltages(Eigen::all, cols));
  return out;
}

// ---------------------------------------------------------------------------
// On-disk format (version 1)
//
//   <dir>/manifest.json   record table, channels, sample rate, split, seed
//   <dir>/records/NNNNNN.bin, little-endian:
//     "HGTR"  u32 version  u32 rows  u32 voltage_cols  u32 angle_cols
//     u32 measured_index  u8 label  f64 eta
//     rows*voltage_cols f64 voltages (row-major, pu)
//     rows*angle_cols   f64 rotor angles (row-major, deg rel. machine 1)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::vector<std::uint8_t> encode_record(const TransientSample& s) {
  ByteWriter w;
  w.tag("HGTR");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(s.voltages.rows()));
  w.u32(static_cast<std::uint32_t>(s.voltages.cols()));
  w.u32(static_cast<std::uint32_t>(s.rotor_angles.cols()));
  w.u32(static_cast<std::uint32_t>(s.measured_index));
  w.u8(static_cast<std::uint8_t>(s.label));
  w.f64(s.eta);
  for (Eigen::Index r = 0; r < s.voltages.rows(); ++r)
    for (Eigen::Index c = 0; c < s.voltages.cols(); ++c) w.f64(s.voltages(r, c));
  for (Eigen::Index r = 0; r < s.rotor_angles.rows(); ++r)
    for (Eigen::Index c = 0; c < s.rotor_angles.cols(); ++c) w.f64(s.rotor_angles(r, c));
  return w.bytes();
}

inline void decode_record(std::span<const std::uint8_t> bytes, const std::string& source, TransientSample& s) {
  ByteReader r(bytes, source);
  r.expect_tag("HGTR");
  if (const auto v = r.u32(); v != kDatasetVersion)
    throw IoError(source + ": unsupported record version " + std::to_string(v));
  const auto rows = r.u32(), vcols = r.u32(), acols = r.u32();
  s.measured_index = r.u32();
  s.label = r.u8();
  s.eta = r.f64();
  s.voltages.resize(rows, vcols);
  s.rotor_angles.resize(rows, acols);
  for (Eigen::Index i = 0; i < s.voltages.rows(); ++i)
    for (Eigen::Index c = 0; c < s.voltages.cols(); ++c) s.voltages(i, c) = r.f64();
  for (Eigen::Index i = 0; i < s.rotor_angles.rows(); ++i)
    for (Eigen::Index c = 0; c < s.rotor_angles.cols(); ++c) s.rotor_angles(i, c) = r.f64();
  if (!r.at_end()) throw IoError(source + ": trailing bytes");
}

inline Json dataset_manifest(const Dataset& ds) {
  Json records = Json::array();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& s = ds.records[i];
    char file[32];
    std::snprintf(file, sizeof file, "records/%06zu.bin", i);
    records.push_back({{"id", s.scenario_id},
                       {"file", file},
                       {"label", s.label},
                       {"eta", s.eta},
                       {"measured_index", s.measured_index},
                       {"split", to_string(ds.split[i])},
                       {"loading_factor", s.loading_factor},
                       {"fault", s.fault},
                       {"fault_duration_cycles", s.fault_duration_cycles},
                       {"terminated_early", s.terminated_early}});
  }
  const auto rows = ds.records.empty() ? 0 : ds.records.front().voltages.rows();
  return {{"format", "hgan-tsa-dataset"},
          {"version", kDatasetVersion},
          {"case", ds.case_name},
          {"record_count", ds.records.size()},
          {"channels", ds.channels()},
          {"pmu_buses", ds.pmu_bus_ids},
          {"machine_count", ds.machine_count},
          {"sample_rate", ds.sample_rate},
          {"nominal_frequency", ds.nominal_frequency},
          {"rows_per_record", rows},
          {"normalization", nullptr},
          {"seed", ds.seed},
          {"records", records}};
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "records", ec);
  if (ec) throw IoError("cannot create dataset directory '" + dir.string() + "': " + ec.message());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    char file[32];
    std::snprintf(file, sizeof file, "records/%06zu.bin", i);
    write_file_bytes(dir / file, encode_record(ds.records[i]));
  }
  write_file_text(dir / "manifest.json", dataset_manifest(ds).dump(2) + "\n");
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError("dataset manifest not found: " + manifest_path.string());
  const Json m = parse_json_file(manifest_path);
  const std::string where = manifest_path.string();
  if (json_get<std::string>(m, "format", where) != "hgan-tsa-dataset")
    throw IoError(where + ": not a dataset manifest");
  if (const auto v = json_get<std::uint32_t>(m, "version", where); v != kDatasetVersion)
    throw IoError(where + ": unsupported dataset version " + std::to_string(v));
  Dataset ds;
  ds.case_name = json_get<std::string>(m, "case", where);
  ds.sample_rate = json_get<double>(m, "sample_rate", where);
  ds.nominal_frequency = json_get<double>(m, "nominal_frequency", where);
  ds.pmu_bus_ids = json_get<std::vector<int>>(m, "pmu_buses", where);
  ds.machine_count = json_get<std::size_t>(m, "machine_count", where);
  ds.seed = json_get<std::uint64_t>(m, "seed", where);
  const auto& recs = m.at("records");
  if (recs.size() != json_get<std::size_t>(m, "record_count", where)) throw IoError(where + ": record_count mismatch");
  for (const auto& jr : recs) {
    TransientSample s;
    const auto file = json_get<std::string>(jr, "file", where);
    const auto bytes = read_file_bytes(dir / file);
    decode_record(bytes, (dir / file).string(), s);
    s.scenario_id = json_get<std::string>(jr, "id", where);
    s.loading_factor = json_get<double>(jr, "loading_factor", where);
    s.fault = json_get<std::string>(jr, "fault", where);
    s.fault_duration_cycles = json_get<double>(jr, "fault_duration_cycles", where);
    s.terminated_early = json_get<bool>(jr, "terminated_early", where);
    if (static_cast<std::size_t>(s.voltages.cols()) != ds.pmu_bus_ids.size())
      throw IoError(file + ": channel count disagrees with manifest");
    const auto split = json_get<std::string>(jr, "split", where);
    if (split != "train" && split != "test") throw IoError(where + ": bad split '" + split + "'");
    ds.split.push_back(split == "train" ? Split::kTrain : Split::kTest);
    ds.records.push_back(std::move(s));
  }
  return ds;
}

}  // namespace hgan_tsa::grid
