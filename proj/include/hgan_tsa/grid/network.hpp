#pragma once

#include <algorithm>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/grid/case.hpp"

namespace hgan_tsa::grid {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

enum class TopologyPhase { kPreFault, kFaultOn, kPostFault };

/// Bus admittance matrices (branches plus constant-impedance loads) for the
/// three topology phases of one scenario.
struct NetworkModel {
  std::size_t bus_count = 0;
  ComplexMatrix pre_fault;
  ComplexMatrix fault_on;
  ComplexMatrix post_fault;
  // Buses held at zero voltage while the fault is on (bolted bus fault).
  std::vector<std::size_t> grounded_during_fault;
  std::vector<std::size_t> generator_buses;
  ComplexVector load_admittances;

  const ComplexMatrix& admittance(TopologyPhase phase) const {
    switch (phase) {
      case TopologyPhase::kPreFault:
        return pre_fault;
      case TopologyPhase::kFaultOn:
        return fault_on;
      case TopologyPhase::kPostFault:
        return post_fault;
    }
    return pre_fault;
  }

  std::span<const std::size_t> grounded(TopologyPhase phase) const {
    if (phase == TopologyPhase::kFaultOn) return grounded_during_fault;
    return {};
  }
};

/// Branch-only bus admittance matrix (pi model, no loads).
inline ComplexMatrix branch_admittance(std::size_t bus_count, std::span<const Branch> branches) {
  ComplexMatrix y = ComplexMatrix::Zero(static_cast<Eigen::Index>(bus_count), static_cast<Eigen::Index>(bus_count));
  for (const auto& br : branches) {
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, br.b / 2.0);
    const auto i = static_cast<Eigen::Index>(br.from), k = static_cast<Eigen::Index>(br.to);
    y(i, i) += ys + ysh;
    y(k, k) += ys + ysh;
    y(i, k) -= ys;
    y(k, i) -= ys;
  }
  return y;
}

/// Builds the three phase matrices. `branch_y` excludes loads; loads are
/// folded into every diagonal. Post-fault equals pre-fault (no switching
/// after clearing).
inline NetworkModel build_network(const ComplexMatrix& branch_y, const ComplexVector& load_admittances,
                                  std::span<const Branch> branches, std::span<const MachineParams> machines,
                                  const FaultElement& fault) {
  NetworkModel net;
  net.bus_count = static_cast<std::size_t>(branch_y.rows());
  net.load_admittances = load_admittances;
  net.pre_fault = branch_y;
  net.pre_fault.diagonal() += load_admittances;
  net.post_fault = net.pre_fault;
  net.fault_on = net.pre_fault;
  for (const auto& m : machines) net.generator_buses.push_back(m.bus);

  switch (fault.kind) {
    case FaultElement::Kind::kNone:
      break;
    case FaultElement::Kind::kBus:
      if (fault.bus >= net.bus_count) throw ConfigError("fault bus out of range");
      net.grounded_during_fault.push_back(fault.bus);
      break;
    case FaultElement::Kind::kLine: {
      const auto& br = branches[fault.branch];
      const Complex z(br.r, br.x);
      const Complex ys = 1.0 / z;
      const auto i = static_cast<Eigen::Index>(br.from), k = static_cast<Eigen::Index>(br.to);
      // The grounded fault point splits the series impedance into two shunts.
      net.fault_on(i, i) += -ys + 1.0 / (fault.position * z);
      net.fault_on(k, k) += -ys + 1.0 / ((1.0 - fault.position) * z);
      net.fault_on(i, k) += ys;
      net.fault_on(k, i) += ys;
      break;
    }
  }
  return net;
}

/// Schur complement of `y` onto the nodes in `keep`:
///   Y_red = Y_kk - Y_ke * Y_ee^{-1} * Y_ek.
/// Nodes in `drop` are removed outright (held at zero voltage). All other
/// nodes are eliminated.
inline ComplexMatrix kron_reduce(const ComplexMatrix& y, std::span<const std::size_t> keep,
                                 std::span<const std::size_t> drop = {}) {
  const auto n = static_cast<std::size_t>(y.rows());
  std::vector<char> role(n, 'e');
  for (auto k : keep) role.at(k) = 'k';
  for (auto d : drop) role.at(d) = 'd';
  std::vector<Eigen::Index> eliminated;
  for (std::size_t i = 0; i < n; ++i)
    if (role[i] == 'e') eliminated.push_back(static_cast<Eigen::Index>(i));
  std::vector<Eigen::Index> kept(keep.begin(), keep.end());

  const ComplexMatrix y_kk = y(kept, kept);
  if (eliminated.empty()) return y_kk;
  const ComplexMatrix y_ee = y(eliminated, eliminated);
  Eigen::FullPivLU<ComplexMatrix> lu(y_ee);
  if (!lu.isInvertible()) throw DegenerateNetworkError("singular eliminated-bus admittance submatrix");
  return y_kk - y(kept, eliminated) * lu.solve(y(eliminated, kept));
}

/// The network as seen from the machine internal nodes for one phase,
/// together with the map from internal EMFs to bus voltages.
struct ReducedNetwork {
  ComplexMatrix admittance;  // machines x machines
  ComplexMatrix recovery;    // buses x machines, V_bus = recovery * E
};

/// Extended (buses + internal nodes) admittance: every machine contributes
/// 1/(j x'd) between its internal node (index bus_count + i) and its bus.
inline ComplexMatrix extended_admittance(const ComplexMatrix& bus_y, std::span<const MachineParams> machines) {
  const auto n = bus_y.rows();
  const auto m = static_cast<Eigen::Index>(machines.size());
  ComplexMatrix y = ComplexMatrix::Zero(n + m, n + m);
  y.topLeftCorner(n, n) = bus_y;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Complex yi = 1.0 / Complex(0.0, machines[static_cast<std::size_t>(i)].transient_reactance);
    const auto b = static_cast<Eigen::Index>(machines[static_cast<std::size_t>(i)].bus);
    y(b, b) += yi;
    y(n + i, n + i) += yi;
    y(b, n + i) -= yi;
    y(n + i, b) -= yi;
  }
  return y;
}

inline ReducedNetwork reduce_to_machines(const NetworkModel& net, std::span<const MachineParams> machines,
                                         TopologyPhase phase) {
  const auto n = static_cast<Eigen::Index>(net.bus_count);
  const auto m = static_cast<Eigen::Index>(machines.size());
  const ComplexMatrix y = extended_admittance(net.admittance(phase), machines);
  const auto grounded = net.grounded(phase);

  std::vector<std::size_t> internal;
  for (Eigen::Index i = 0; i < m; ++i) internal.push_back(static_cast<std::size_t>(n + i));
  std::vector<Eigen::Index> live;
  for (Eigen::Index b = 0; b < n; ++b)
    if (std::find(grounded.begin(), grounded.end(), static_cast<std::size_t>(b)) == grounded.end()) live.push_back(b);
  std::vector<Eigen::Index> internal_idx(internal.begin(), internal.end());

  ReducedNetwork out;
  out.recovery = ComplexMatrix::Zero(n, m);
  if (live.empty()) {
    out.admittance = y(internal_idx, internal_idx);
    return out;
  }
  const ComplexMatrix y_ll = y(live, live);
  Eigen::FullPivLU<ComplexMatrix> lu(y_ll);
  if (!lu.isInvertible()) throw DegenerateNetworkError("singular load-bus admittance submatrix");
  const ComplexMatrix solved = lu.solve(y(live, internal_idx));  // Y_ll^{-1} Y_lg
  out.admittance = y(internal_idx, internal_idx) - y(internal_idx, live) * solved;
  for (std::size_t r = 0; r < live.size(); ++r) out.recovery.row(live[r]) = -solved.row(static_cast<Eigen::Index>(r));
  return out;
}

/// Machine internal EMF phasors from magnitudes and rotor angles [rad].
inline ComplexVector internal_emfs(std::span<const MachineParams> machines, const Eigen::VectorXd& angles) {
  ComplexVector e(static_cast<Eigen::Index>(machines.size()));
  for (Eigen::Index i = 0; i < e.size(); ++i)
    e(i) = std::polar(machines[static_cast<std::size_t>(i)].internal_emf_magnitude, angles(i));
  return e;
}

/// All bus voltage phasors for given internal EMFs. Grounded (faulted) buses read 0.
inline ComplexVector recover_bus_voltages(const ReducedNetwork& reduced, const ComplexVector& emf) {
  return reduced.recovery * emf;
}

inline Eigen::VectorXd pmu_magnitudes(const ComplexVector& bus_voltages, std::span<const std::size_t> pmu_buses) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(pmu_buses.size()));
  for (std::size_t i = 0; i < pmu_buses.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = std::abs(bus_voltages(static_cast<Eigen::Index>(pmu_buses[i])));
  return out;
}

}  // namespace hgan_tsa::grid
