#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/io.hpp"

namespace hgan_tsa::grid {

/// Classical machine behind transient reactance. `mechanical_power` and
/// `internal_emf_magnitude` are outputs of equilibrium initialization, not
/// inputs of the case file.
struct MachineParams {
  std::size_t bus = 0;                // 0-based bus index
  double inertia_constant = 0.0;      // H [s], system base
  double damping = 0.0;               // D [pu power / pu speed]
  double transient_reactance = 0.0;   // x'd [pu]
  double mechanical_power = 0.0;      // Pm [pu]
  double internal_emf_magnitude = 0.0;  // |E'| [pu]

  void validate() const {
    if (!(inertia_constant > 0.0)) throw ConfigError("machine inertia_constant must be > 0");
    if (!(transient_reactance > 0.0)) throw ConfigError("machine transient_reactance must be > 0");
    if (mechanical_power < 0.0) throw ConfigError("machine mechanical_power must be >= 0");
  }
};

enum class BusType { kSlack, kPv, kPq };

struct Bus {
  int id = 0;
  BusType type = BusType::kPq;
  double voltage = 1.0;  // setpoint magnitude for slack/PV, initial guess for PQ
  double p_gen = 0.0;    // scheduled generation (PV)
  double p_load = 0.0;
  double q_load = 0.0;
};

struct Branch {
  std::size_t from = 0;  // 0-based
  std::size_t to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;  // total line charging
};

struct FaultElement {
  enum class Kind { kNone, kBus, kLine };
  Kind kind = Kind::kNone;
  std::size_t bus = 0;         // faulted bus (kBus)
  std::size_t branch = 0;      // index into CaseData::branches (kLine)
  double position = 0.5;       // fraction of the line from its `from` end (kLine)

  static FaultElement none() { return {}; }
  static FaultElement at_bus(std::size_t b) { return {Kind::kBus, b, 0, 0.0}; }
  static FaultElement on_line(std::size_t br, double pos) { return {Kind::kLine, 0, br, pos}; }
};

struct SimulationSettings {
  double time_step = 1e-3;
  double horizon = 2.0;
  double sample_rate = 120.0;
  double fault_start = 0.1;
  double angle_guard_deg = 1e4;
  double stability_window = 0.0;  // seconds after clearing used for the index; 0 = full horizon
};

/// One simulated event.
struct ScenarioSpec {
  double loading_factor = 1.0;
  FaultElement fault;
  double fault_start = 0.1;            // s
  double fault_duration_cycles = 5.0;  // cycles at nominal frequency
  double time_step = 1e-3;
  double horizon = 2.0;
  std::vector<std::size_t> pmu_buses;  // 0-based
  double sample_rate = 120.0;
  double nominal_frequency = 60.0;
  double angle_guard_deg = 1e4;
  double stability_window = 0.0;

  double clearing_time() const { return fault_start + fault_duration_cycles / nominal_frequency; }

  void validate(std::size_t bus_count) const {
    if (fault_start < 0.0) throw ConfigError("fault_start must be >= 0");
    if (fault.kind != FaultElement::Kind::kNone && !(fault_duration_cycles > 0.0))
      throw ConfigError("fault_duration must be > 0 cycles");
    if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be > 0");
    if (!(time_step > 0.0)) throw ConfigError("time_step must be > 0");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
    if (pmu_buses.empty()) throw ConfigError("pmu_buses must not be empty");
    for (auto b : pmu_buses)
      if (b >= bus_count) throw ConfigError("pmu bus index " + std::to_string(b) + " out of range");
    if (fault.kind == FaultElement::Kind::kLine && !(fault.position > 0.0 && fault.position < 1.0))
      throw ConfigError("line fault position must lie strictly inside (0, 1)");
  }
};

struct ScenarioGrid {
  std::vector<double> loading_factors{1.0};
  std::vector<std::size_t> fault_buses;
  std::vector<std::size_t> fault_branches;
  std::vector<double> line_positions{0.5};
  double min_duration_cycles = 0.5;
  double max_duration_cycles = 60.0;
  // Durations are drawn as a fraction of the scenario's critical clearing time.
  double stable_fraction_lo = 0.3, stable_fraction_hi = 0.95;
  double unstable_fraction_lo = 1.05, unstable_fraction_hi = 1.8;

  std::vector<FaultElement> fault_elements() const {
    std::vector<FaultElement> out;
    for (auto b : fault_buses) out.push_back(FaultElement::at_bus(b));
    for (auto br : fault_branches)
      for (double p : line_positions) out.push_back(FaultElement::on_line(br, p));
    return out;
  }
};

struct DatasetRequest {
  std::size_t stable = 10;
  std::size_t unstable = 10;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

struct CaseData {
  std::string name;
  double nominal_frequency = 60.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<MachineParams> machines;
  std::vector<std::size_t> pmu_buses;
  SimulationSettings simulation;
  ScenarioGrid grid;
  DatasetRequest dataset;

  std::size_t bus_count() const { return buses.size(); }

  int bus_id(std::size_t index) const { return buses.at(index).id; }

  std::string describe(const FaultElement& f) const {
    switch (f.kind) {
      case FaultElement::Kind::kNone:
        return "none";
      case FaultElement::Kind::kBus:
        return "bus" + std::to_string(bus_id(f.bus));
      case FaultElement::Kind::kLine: {
        const auto& br = branches.at(f.branch);
        return "line" + std::to_string(bus_id(br.from)) + "-" + std::to_string(bus_id(br.to)) + "@" +
               std::to_string(static_cast<int>(f.position * 100.0 + 0.5));
      }
    }
    return "?";
  }

  ScenarioSpec scenario(double loading, const FaultElement& fault, double duration_cycles) const {
    ScenarioSpec s;
    s.loading_factor = loading;
    s.fault = fault;
    s.fault_start = simulation.fault_start;
    s.fault_duration_cycles = duration_cycles;
    s.time_step = simulation.time_step;
    s.horizon = simulation.horizon;
    s.pmu_buses = pmu_buses;
    s.sample_rate = simulation.sample_rate;
    s.nominal_frequency = nominal_frequency;
    s.angle_guard_deg = simulation.angle_guard_deg;
    s.stability_window = simulation.stability_window;
    return s;
  }
};

namespace detail {

inline std::size_t bus_index(const std::map<int, std::size_t>& ids, int id, const std::string& where) {
  auto it = ids.find(id);
  if (it == ids.end()) throw ConfigError(where + ": unknown bus id " + std::to_string(id));
  return it->second;
}

inline std::pair<double, double> json_range(const Json& j, const char* key, std::pair<double, double> fallback,
                                            const std::string& where) {
  if (!j.contains(key)) return fallback;
  auto v = json_get<std::vector<double>>(j, key, where);
  if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError(where + "." + key + ": expected [lo, hi] with lo < hi");
  return {v[0], v[1]};
}

}  // namespace detail

/// Parses a case description (see README, "Case file"). Unknown keys are rejected.
inline CaseData parse_case(const Json& j, const std::string& source = "case") {
  require_known_keys(j, {"name", "frequency_hz", "buses", "branches", "machines", "pmu_buses", "simulation",
                         "scenarios", "dataset"},
                     source);
  CaseData c;
  c.name = json_get_or<std::string>(j, "name", "case", source);
  c.nominal_frequency = json_get_or<double>(j, "frequency_hz", 60.0, source);
  if (!(c.nominal_frequency > 0.0)) throw ConfigError(source + ": frequency_hz must be > 0");

  std::map<int, std::size_t> ids;
  if (!j.contains("buses") || !j["buses"].is_array() || j["buses"].empty())
    throw ConfigError(source + ": 'buses' must be a nonempty array");
  for (const auto& jb : j["buses"]) {
    const std::string where = source + ".buses[" + std::to_string(c.buses.size()) + "]";
    require_known_keys(jb, {"id", "type", "voltage", "p_gen", "p_load", "q_load"}, where);
    Bus b;
    b.id = json_get<int>(jb, "id", where);
    const auto type = json_get_or<std::string>(jb, "type", "pq", where);
    if (type == "slack") b.type = BusType::kSlack;
    else if (type == "pv") b.type = BusType::kPv;
    else if (type == "pq") b.type = BusType::kPq;
    else throw ConfigError(where + ": type must be slack, pv or pq");
    b.voltage = json_get_or<double>(jb, "voltage", 1.0, where);
    b.p_gen = json_get_or<double>(jb, "p_gen", 0.0, where);
    b.p_load = json_get_or<double>(jb, "p_load", 0.0, where);
    b.q_load = json_get_or<double>(jb, "q_load", 0.0, where);
    if (!ids.emplace(b.id, c.buses.size()).second)
      throw ConfigError(where + ": duplicate bus id " + std::to_string(b.id));
    c.buses.push_back(b);
  }
  if (std::count_if(c.buses.begin(), c.buses.end(), [](const Bus& b) { return b.type == BusType::kSlack; }) != 1)
    throw ConfigError(source + ": exactly one slack bus required");

  for (const auto& jb : j.value("branches", Json::array())) {
    const std::string where = source + ".branches[" + std::to_string(c.branches.size()) + "]";
    require_known_keys(jb, {"from", "to", "r", "x", "b"}, where);
    Branch br;
    br.from = detail::bus_index(ids, json_get<int>(jb, "from", where), where);
    br.to = detail::bus_index(ids, json_get<int>(jb, "to", where), where);
    br.r = json_get_or<double>(jb, "r", 0.0, where);
    br.x = json_get<double>(jb, "x", where);
    br.b = json_get_or<double>(jb, "b", 0.0, where);
    if (br.from == br.to) throw ConfigError(where + ": branch endpoints must differ");
    if (br.r == 0.0 && br.x == 0.0) throw ConfigError(where + ": zero series impedance");
    c.branches.push_back(br);
  }

  if (!j.contains("machines") || !j["machines"].is_array() || j["machines"].empty())
    throw ConfigError(source + ": 'machines' must be a nonempty array");
  std::vector<bool> has_machine(c.buses.size(), false);
  for (const auto& jm : j["machines"]) {
    const std::string where = source + ".machines[" + std::to_string(c.machines.size()) + "]";
    require_known_keys(jm, {"bus", "inertia", "damping", "xd_prime"}, where);
    MachineParams m;
    m.bus = detail::bus_index(ids, json_get<int>(jm, "bus", where), where);
    m.inertia_constant = json_get<double>(jm, "inertia", where);
    m.damping = json_get_or<double>(jm, "damping", 0.0, where);
    m.transient_reactance = json_get<double>(jm, "xd_prime", where);
    try {
      m.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
    if (has_machine[m.bus]) throw ConfigError(where + ": at most one machine per bus");
    if (c.buses[m.bus].type == BusType::kPq) throw ConfigError(where + ": machine bus must be slack or pv");
    has_machine[m.bus] = true;
    c.machines.push_back(m);
  }
  for (std::size_t b = 0; b < c.buses.size(); ++b)
    if (c.buses[b].type != BusType::kPq && !has_machine[b])
      throw ConfigError(source + ": bus " + std::to_string(c.buses[b].id) + " is slack/pv but has no machine");

  if (j.contains("pmu_buses")) {
    for (int id : json_get<std::vector<int>>(j, "pmu_buses", source))
      c.pmu_buses.push_back(detail::bus_index(ids, id, source + ".pmu_buses"));
  } else {
    for (std::size_t b = 0; b < c.buses.size(); ++b)
      if (!has_machine[b]) c.pmu_buses.push_back(b);
  }
  if (c.pmu_buses.empty()) throw ConfigError(source + ": no PMU buses");

  if (j.contains("simulation")) {
    const auto& js = j["simulation"];
    const std::string where = source + ".simulation";
    require_known_keys(js, {"time_step", "horizon", "sample_rate", "fault_start", "angle_guard_deg",
                            "stability_window"},
                       where);
    auto& s = c.simulation;
    s.time_step = json_get_or<double>(js, "time_step", s.time_step, where);
    s.horizon = json_get_or<double>(js, "horizon", s.horizon, where);
    s.sample_rate = json_get_or<double>(js, "sample_rate", s.sample_rate, where);
    s.fault_start = json_get_or<double>(js, "fault_start", s.fault_start, where);
    s.angle_guard_deg = json_get_or<double>(js, "angle_guard_deg", s.angle_guard_deg, where);
    s.stability_window = json_get_or<double>(js, "stability_window", s.stability_window, where);
  }

  if (j.contains("scenarios")) {
    const auto& jg = j["scenarios"];
    const std::string where = source + ".scenarios";
    require_known_keys(jg, {"loading_factors", "fault_buses", "fault_lines", "line_positions",
                            "duration_search_cycles", "stable_fraction", "unstable_fraction"},
                       where);
    auto& g = c.grid;
    g.loading_factors = json_get_or<std::vector<double>>(jg, "loading_factors", g.loading_factors, where);
    for (int id : json_get_or<std::vector<int>>(jg, "fault_buses", {}, where))
      g.fault_buses.push_back(detail::bus_index(ids, id, where + ".fault_buses"));
    for (const auto& pair : json_get_or<std::vector<std::vector<int>>>(jg, "fault_lines", {}, where)) {
      if (pair.size() != 2) throw ConfigError(where + ".fault_lines: entries must be [from, to]");
      const auto a = detail::bus_index(ids, pair[0], where), b = detail::bus_index(ids, pair[1], where);
      auto it = std::find_if(c.branches.begin(), c.branches.end(), [&](const Branch& br) {
        return (br.from == a && br.to == b) || (br.from == b && br.to == a);
      });
      if (it == c.branches.end())
        throw ConfigError(where + ".fault_lines: no branch " + std::to_string(pair[0]) + "-" +
                          std::to_string(pair[1]));
      g.fault_branches.push_back(static_cast<std::size_t>(it - c.branches.begin()));
    }
    g.line_positions = json_get_or<std::vector<double>>(jg, "line_positions", g.line_positions, where);
    for (double p : g.line_positions)
      if (!(p > 0.0 && p < 1.0)) throw ConfigError(where + ".line_positions: values must lie in (0, 1)");
    std::tie(g.min_duration_cycles, g.max_duration_cycles) =
        detail::json_range(jg, "duration_search_cycles", {g.min_duration_cycles, g.max_duration_cycles}, where);
    std::tie(g.stable_fraction_lo, g.stable_fraction_hi) =
        detail::json_range(jg, "stable_fraction", {g.stable_fraction_lo, g.stable_fraction_hi}, where);
    std::tie(g.unstable_fraction_lo, g.unstable_fraction_hi) =
        detail::json_range(jg, "unstable_fraction", {g.unstable_fraction_lo, g.unstable_fraction_hi}, where);
    if (g.stable_fraction_hi > 1.0 || g.unstable_fraction_lo < 1.0)
      throw ConfigError(where + ": stable_fraction must stay <= 1 and unstable_fraction >= 1");
  }

  if (j.contains("dataset")) {
    const auto& jd = j["dataset"];
    const std::string where = source + ".dataset";
    require_known_keys(jd, {"stable", "unstable", "train_fraction", "seed"}, where);
    auto& d = c.dataset;
    d.stable = json_get_or<std::size_t>(jd, "stable", d.stable, where);
    d.unstable = json_get_or<std::size_t>(jd, "unstable", d.unstable, where);
    d.train_fraction = json_get_or<double>(jd, "train_fraction", d.train_fraction, where);
    d.seed = json_get_or<std::uint64_t>(jd, "seed", d.seed, where);
    if (!(d.train_fraction > 0.0 && d.train_fraction < 1.0))
      throw ConfigError(where + ".train_fraction must lie in (0, 1)");
  }
  return c;
}

inline CaseData load_case(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("case file not found: " + path.string());
  return parse_case(parse_json_file(path), path.string());
}

}  // namespace hgan_tsa::grid
