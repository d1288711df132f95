#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgan_tsa/grid/case.hpp"
#include "hgan_tsa/grid/network.hpp"
#include "hgan_tsa/grid/stability.hpp"

namespace hgan_tsa::grid {

/// Swing state: rotor angles [rad] and speed deviations [rad/s].
struct SwingState {
  Eigen::VectorXd angle;
  Eigen::VectorXd speed;

  SwingState operator+(const SwingState& o) const { return {angle + o.angle, speed + o.speed}; }
  SwingState operator*(double s) const { return {angle * s, speed * s}; }
  bool finite() const { return angle.allFinite() && speed.allFinite(); }
};

/// Electrical power output Pe_i = Re(E_i conj((Y_red E)_i)).
inline Eigen::VectorXd electrical_power(const ComplexMatrix& reduced, std::span<const MachineParams> machines,
                                        const Eigen::VectorXd& angles) {
  const ComplexVector e = internal_emfs(machines, angles);
  const ComplexVector i = reduced * e;
  return (e.array() * i.conjugate().array()).real();
}

/// Classical swing equation
///   dδ/dt = ω,   (2H/ω_s) dω/dt = Pm - Pe - D ω/ω_s.
inline SwingState swing_derivative(const SwingState& state, const ComplexMatrix& reduced,
                                   std::span<const MachineParams> machines, double nominal_frequency) {
  const double omega_s = 2.0 * std::numbers::pi * nominal_frequency;
  const Eigen::VectorXd pe = electrical_power(reduced, machines, state.angle);
  SwingState d{state.speed, Eigen::VectorXd(state.speed.size())};
  for (Eigen::Index i = 0; i < d.speed.size(); ++i) {
    const auto& m = machines[static_cast<std::size_t>(i)];
    const double inertia = 2.0 * m.inertia_constant / omega_s;
    d.speed(i) = (m.mechanical_power - pe(i) - m.damping * state.speed(i) / omega_s) / inertia;
  }
  return d;
}

inline SwingState rk4_step(const SwingState& x, double h, const ComplexMatrix& reduced,
                           std::span<const MachineParams> machines, double nominal_frequency) {
  const auto f = [&](const SwingState& s) { return swing_derivative(s, reduced, machines, nominal_frequency); };
  const SwingState k1 = f(x);
  const SwingState k2 = f(x + k1 * (h / 2.0));
  const SwingState k3 = f(x + k2 * (h / 2.0));
  const SwingState k4 = f(x + k3 * h);
  return x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

/// One simulated event. Rows are sample instants k / sample_rate.
struct TransientSample {
  std::string scenario_id;
  Eigen::MatrixXd voltages;      // samples x pmu_count [pu]
  Eigen::MatrixXd rotor_angles;  // samples x machines [deg], relative to machine 1
  double eta = 1.0;
  int label = 1;                 // 1 = stable, 0 = unstable
  std::size_t measured_index = 0;  // first sample at or after fault clearing
  double loading_factor = 1.0;
  std::string fault;
  double fault_duration_cycles = 0.0;
  bool terminated_early = false;
};

/// Fixed-step RK4 over pre-fault, fault-on and post-fault phases. Steps are
/// shortened where needed so that phase switches and sample instants fall on
/// step boundaries.
inline TransientSample integrate_transient(const ScenarioSpec& spec, std::span<const MachineParams> machines,
                                           const NetworkModel& network, const Eigen::VectorXd& initial_angles) {
  spec.validate(network.bus_count);
  const bool faulted = spec.fault.kind != FaultElement::Kind::kNone;
  const double t_on = faulted ? spec.fault_start : spec.horizon + 1.0;
  const double t_off = faulted ? spec.clearing_time() : spec.horizon + 1.0;
  const auto phase_at = [&](double t) {
    if (t < t_on) return TopologyPhase::kPreFault;
    if (t < t_off) return TopologyPhase::kFaultOn;
    return TopologyPhase::kPostFault;
  };

  const ReducedNetwork phases[3] = {reduce_to_machines(network, machines, TopologyPhase::kPreFault),
                                    reduce_to_machines(network, machines, TopologyPhase::kFaultOn),
                                    reduce_to_machines(network, machines, TopologyPhase::kPostFault)};
  const auto reduced = [&](TopologyPhase p) -> const ReducedNetwork& { return phases[static_cast<int>(p)]; };

  const auto samples = static_cast<std::size_t>(std::floor(spec.horizon * spec.sample_rate + 1e-9)) + 1;
  const auto m = static_cast<Eigen::Index>(machines.size());
  TransientSample out;
  out.voltages.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(spec.pmu_buses.size()));
  out.rotor_angles.resize(static_cast<Eigen::Index>(samples), m);
  out.loading_factor = spec.loading_factor;
  out.fault_duration_cycles = faulted ? spec.fault_duration_cycles : 0.0;

  constexpr double kDeg = 180.0 / std::numbers::pi;
  const auto record = [&](std::size_t k, const SwingState& s, TopologyPhase p) {
    const auto row = static_cast<Eigen::Index>(k);
    const ComplexVector v = recover_bus_voltages(reduced(p), internal_emfs(machines, s.angle));
    out.voltages.row(row) = pmu_magnitudes(v, spec.pmu_buses).transpose();
    out.rotor_angles.row(row) = ((s.angle.array() - s.angle(0)) * kDeg).matrix().transpose();
  };

  SwingState x{initial_angles, Eigen::VectorXd::Zero(m)};
  double t = 0.0;
  record(0, x, phase_at(0.0));
  out.measured_index = faulted ? samples : 0;
  if (faulted && t_off <= 0.0) out.measured_index = 0;

  std::size_t k = 1;
  for (; k < samples; ++k) {
    const double t_sample = static_cast<double>(k) / spec.sample_rate;
    bool blown = false;
    while (t < t_sample && !blown) {
      double stop = t_sample;
      if (t < t_on && t_on < stop) stop = t_on;
      if (t < t_off && t_off < stop) stop = t_off;
      const auto p = phase_at(0.5 * (t + stop));
      const auto steps = std::max<long>(1, static_cast<long>(std::ceil((stop - t) / spec.time_step - 1e-9)));
      const double h = (stop - t) / static_cast<double>(steps);
      for (long s = 0; s < steps; ++s) {
        x = rk4_step(x, h, reduced(p).admittance, machines, spec.nominal_frequency);
        const double spread = ((x.angle.array() - x.angle(0)).abs() * kDeg).maxCoeff();
        if (!x.finite() || spread > spec.angle_guard_deg) {
          blown = true;
          break;
        }
      }
      t = stop;
    }
    if (blown) {
      // Hold the runaway state for the remaining rows; the index sees |Δδ| beyond the guard.
      out.terminated_early = true;
      if (!x.finite()) {
        x.angle.setZero();
        x.angle(m - 1) = 2.0 * spec.angle_guard_deg / kDeg;
      }
      for (; k < samples; ++k) {
        record(k, x, phase_at(static_cast<double>(k) / spec.sample_rate));
        if (out.measured_index == samples && static_cast<double>(k) / spec.sample_rate >= t_off)
          out.measured_index = k;
      }
      break;
    }
    t = t_sample;
    record(k, x, phase_at(t_sample));
    if (out.measured_index == samples && t_sample >= t_off) out.measured_index = k;
  }
  if (out.measured_index >= samples)
    throw ConfigError("horizon ends before fault clearing; no post-fault sample");

  std::size_t end = samples;
  if (spec.stability_window > 0.0)
    end = std::min(samples, out.measured_index +
                                static_cast<std::size_t>(std::ceil(spec.stability_window * spec.sample_rate)) + 1);
  out.eta = stability_index(out.rotor_angles.middleRows(static_cast<Eigen::Index>(out.measured_index),
                                                        static_cast<Eigen::Index>(end - out.measured_index)));
  out.label = stability_label(out.eta);
  return out;
}

}  // namespace hgan_tsa::grid
