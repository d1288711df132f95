#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/grid/case.hpp"
#include "hgan_tsa/grid/network.hpp"

namespace hgan_tsa::grid {

struct PowerFlowResult {
  ComplexVector voltages;
  int iterations = 0;
  double mismatch = 0.0;
};

/// Newton-Raphson power flow in polar form. Loads and PV generation are
/// scaled by `loading`; the slack bus absorbs the balance.
inline PowerFlowResult solve_power_flow(const CaseData& c, const ComplexMatrix& ybus, double loading,
                                        double tolerance = 1e-12, int max_iterations = 30) {
  const auto n = static_cast<Eigen::Index>(c.bus_count());
  Eigen::VectorXd vm(n), va = Eigen::VectorXd::Zero(n), p_spec(n), q_spec(n);
  std::vector<Eigen::Index> pvpq, pq;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = c.buses[static_cast<std::size_t>(i)];
    vm(i) = b.voltage;
    const double gen = (b.type == BusType::kPv) ? loading * b.p_gen : 0.0;
    p_spec(i) = gen - loading * b.p_load;
    q_spec(i) = -loading * b.q_load;
    if (b.type != BusType::kSlack) pvpq.push_back(i);
    if (b.type == BusType::kPq) pq.push_back(i);
  }
  const auto npvpq = static_cast<Eigen::Index>(pvpq.size());
  const auto npq = static_cast<Eigen::Index>(pq.size());

  PowerFlowResult res;
  for (int it = 0; it <= max_iterations; ++it) {
    ComplexVector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
    const ComplexVector current = ybus * v;
    const ComplexVector s = v.array() * current.conjugate().array();

    Eigen::VectorXd mismatch(npvpq + npq);
    for (Eigen::Index k = 0; k < npvpq; ++k) mismatch(k) = s(pvpq[k]).real() - p_spec(pvpq[k]);
    for (Eigen::Index k = 0; k < npq; ++k) mismatch(npvpq + k) = s(pq[k]).imag() - q_spec(pq[k]);
    res.mismatch = mismatch.size() ? mismatch.cwiseAbs().maxCoeff() : 0.0;
    res.voltages = v;
    res.iterations = it;
    if (res.mismatch < tolerance) return res;
    if (it == max_iterations) break;

    // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
    const ComplexVector vnorm = v.array() / vm.array().cast<Complex>();
    const ComplexMatrix dva = Complex(0.0, 1.0) * v.asDiagonal() *
                              (ComplexMatrix(current.asDiagonal()) - ybus * v.asDiagonal()).conjugate();
    const ComplexMatrix dvm = v.asDiagonal() * (ybus * vnorm.asDiagonal()).conjugate() +
                              ComplexMatrix(current.conjugate().asDiagonal()) * vnorm.asDiagonal();

    Eigen::MatrixXd jac(npvpq + npq, npvpq + npq);
    for (Eigen::Index r = 0; r < npvpq; ++r) {
      for (Eigen::Index k = 0; k < npvpq; ++k) jac(r, k) = dva(pvpq[r], pvpq[k]).real();
      for (Eigen::Index k = 0; k < npq; ++k) jac(r, npvpq + k) = dvm(pvpq[r], pq[k]).real();
    }
    for (Eigen::Index r = 0; r < npq; ++r) {
      for (Eigen::Index k = 0; k < npvpq; ++k) jac(npvpq + r, k) = dva(pq[r], pvpq[k]).imag();
      for (Eigen::Index k = 0; k < npq; ++k) jac(npvpq + r, npvpq + k) = dvm(pq[r], pq[k]).imag();
    }
    const Eigen::VectorXd dx = jac.fullPivLu().solve(-mismatch);
    for (Eigen::Index k = 0; k < npvpq; ++k) va(pvpq[k]) += dx(k);
    for (Eigen::Index k = 0; k < npq; ++k) vm(pq[k]) += dx(npvpq + k);
  }
  throw DegenerateNetworkError("power flow did not converge at loading " + std::to_string(loading) +
                               " (mismatch " + std::to_string(res.mismatch) + ")");
}

/// Pre-fault steady state of a case at one loading level: machines carry
/// their internal EMF magnitudes and mechanical powers, chosen so that the
/// swing dynamics start at rest.
struct OperatingPoint {
  double loading_factor = 1.0;
  std::vector<MachineParams> machines;
  Eigen::VectorXd initial_angles;  // rad, absolute
  ComplexMatrix branch_y;
  ComplexVector load_admittances;
  ComplexVector bus_voltages;
};

inline OperatingPoint initialize_operating_point(const CaseData& c, double loading) {
  const ComplexMatrix ybranch = branch_admittance(c.bus_count(), c.branches);
  const auto pf = solve_power_flow(c, ybranch, loading);
  const auto n = static_cast<Eigen::Index>(c.bus_count());

  OperatingPoint op;
  op.loading_factor = loading;
  op.branch_y = ybranch;
  op.bus_voltages = pf.voltages;
  op.load_admittances = ComplexVector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = c.buses[static_cast<std::size_t>(i)];
    const Complex s_load(loading * b.p_load, loading * b.q_load);
    op.load_admittances(i) = std::conj(s_load) / std::norm(pf.voltages(i));
  }
  const ComplexVector injection = pf.voltages.array() * (ybranch * pf.voltages).conjugate().array();

  op.machines = c.machines;
  op.initial_angles.resize(static_cast<Eigen::Index>(c.machines.size()));
  ComplexVector emf(static_cast<Eigen::Index>(c.machines.size()));
  for (std::size_t i = 0; i < c.machines.size(); ++i) {
    auto& m = op.machines[i];
    const auto b = static_cast<Eigen::Index>(m.bus);
    const Complex v = pf.voltages(b);
    const Complex s_gen = injection(b) + Complex(loading * c.buses[m.bus].p_load, loading * c.buses[m.bus].q_load);
    const Complex i_gen = std::conj(s_gen / v);
    const Complex e = v + Complex(0.0, m.transient_reactance) * i_gen;
    emf(static_cast<Eigen::Index>(i)) = e;
    m.internal_emf_magnitude = std::abs(e);
    op.initial_angles(static_cast<Eigen::Index>(i)) = std::arg(e);
  }

  // Mechanical power from the reduced network itself so that Pe = Pm exactly.
  const auto net = build_network(ybranch, op.load_admittances, c.branches, op.machines, FaultElement::none());
  const auto reduced = reduce_to_machines(net, op.machines, TopologyPhase::kPreFault);
  const ComplexVector currents = reduced.admittance * emf;
  for (std::size_t i = 0; i < op.machines.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    op.machines[i].mechanical_power = (emf(k) * std::conj(currents(k))).real();
  }
  return op;
}

}  // namespace hgan_tsa::grid
