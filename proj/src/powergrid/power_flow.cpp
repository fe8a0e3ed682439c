#include "mamgrid/powergrid/power_flow.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace mamgrid::powergrid {

namespace {

using Eigen::Index;
using Eigen::VectorXcd;
using Eigen::VectorXd;

struct Schedule {
  VectorXcd sbus;                  // scheduled net injection, p.u.
  std::vector<BusType> types;
  VectorXd v_setpoint;             // NaN where not voltage-controlled
  std::vector<std::vector<std::size_t>> gens_at_bus;
  VectorXd q_min;                  // per bus, MVAr (sum over generators)
  VectorXd q_max;
  VectorXd load_p;                 // per bus, MW
  VectorXd load_q;
};

Schedule make_schedule(const GridCase& grid) {
  const auto n = static_cast<Index>(grid.buses.size());
  Schedule s;
  s.sbus = VectorXcd::Zero(n);
  s.types.resize(grid.buses.size());
  s.v_setpoint = VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  s.gens_at_bus.resize(grid.buses.size());
  s.q_min = VectorXd::Zero(n);
  s.q_max = VectorXd::Zero(n);
  s.load_p = VectorXd::Zero(n);
  s.load_q = VectorXd::Zero(n);

  for (std::size_t i = 0; i < grid.buses.size(); ++i) s.types[i] = grid.buses[i].type;
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    const Generator& gen = grid.generators[g];
    const auto i = static_cast<Index>(grid.bus_index(gen.bus));
    s.gens_at_bus[static_cast<std::size_t>(i)].push_back(g);
    s.q_min(i) += gen.q_min_mvar;
    s.q_max(i) += gen.q_max_mvar;
    if (s.types[static_cast<std::size_t>(i)] != BusType::pq && std::isnan(s.v_setpoint(i))) {
      s.v_setpoint(i) = gen.v_setpoint;
    }
    s.sbus(i) += Complex(gen.p_mw, gen.q_mvar);
  }
  for (const Load& load : grid.loads) {
    const auto i = static_cast<Index>(grid.bus_index(load.bus));
    s.load_p(i) += load.p_mw;
    s.load_q(i) += load.q_mvar;
    s.sbus(i) -= Complex(load.p_mw, load.q_mvar);
  }
  s.sbus /= grid.base_mva;
  return s;
}

Complex phasor(double magnitude, double angle) {
  return {magnitude * std::cos(angle), magnitude * std::sin(angle)};
}

struct NewtonResult {
  bool converged = false;
  bool singular = false;
  int iterations = 0;
  double mismatch = 0.0;
};

double mismatch_norm(const VectorXcd& mis, const std::vector<Index>& pvpq, const std::vector<Index>& pq) {
  double worst = 0.0;
  for (Index i : pvpq) worst = std::max(worst, std::abs(mis(i).real()));
  for (Index i : pq) worst = std::max(worst, std::abs(mis(i).imag()));
  return worst;
}

NewtonResult newton(const Eigen::MatrixXcd& y, const VectorXcd& sbus, const std::vector<BusType>& types,
                    VectorXd& vm, VectorXd& va, const PowerFlowOptions& options) {
  std::vector<Index> pvpq;
  std::vector<Index> pq;
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (types[i] != BusType::slack) pvpq.push_back(static_cast<Index>(i));
    if (types[i] == BusType::pq) pq.push_back(static_cast<Index>(i));
  }
  const auto npvpq = static_cast<Index>(pvpq.size());
  const auto npq = static_cast<Index>(pq.size());
  const Index dim = npvpq + npq;

  NewtonResult result;
  VectorXcd v(vm.size());
  for (Index i = 0; i < vm.size(); ++i) v(i) = phasor(vm(i), va(i));

  VectorXcd current = y * v;
  VectorXcd mis = v.cwiseProduct(current.conjugate()) - sbus;
  result.mismatch = mismatch_norm(mis, pvpq, pq);
  if (!std::isfinite(result.mismatch)) return result;
  if (result.mismatch <= options.tolerance) {
    result.converged = true;
    return result;
  }

  Eigen::MatrixXd jac(dim, dim);
  VectorXd rhs(dim);
  for (int it = 1; it <= options.max_iterations; ++it) {
    result.iterations = it;
    // dS/dVa(i,k) = j V_i conj(I_i delta_ik - Y_ik V_k)
    // dS/dVm(i,k) = V_i conj(Y_ik) conj(V_k)/|V_k| + delta_ik conj(I_i) V_i/|V_i|
    auto ds_dva = [&](Index i, Index k) {
      Complex term = -y(i, k) * v(k);
      if (i == k) term += current(i);
      return Complex(0.0, 1.0) * v(i) * std::conj(term);
    };
    auto ds_dvm = [&](Index i, Index k) {
      const Complex unit_k = v(k) / std::abs(v(k));
      Complex out = v(i) * std::conj(y(i, k) * unit_k);
      if (i == k) out += std::conj(current(i)) * unit_k;
      return out;
    };
    for (Index r = 0; r < npvpq; ++r) {
      const Index i = pvpq[static_cast<std::size_t>(r)];
      for (Index c = 0; c < npvpq; ++c) jac(r, c) = ds_dva(i, pvpq[static_cast<std::size_t>(c)]).real();
      for (Index c = 0; c < npq; ++c) jac(r, npvpq + c) = ds_dvm(i, pq[static_cast<std::size_t>(c)]).real();
      rhs(r) = mis(i).real();
    }
    for (Index r = 0; r < npq; ++r) {
      const Index i = pq[static_cast<std::size_t>(r)];
      for (Index c = 0; c < npvpq; ++c) jac(npvpq + r, c) = ds_dva(i, pvpq[static_cast<std::size_t>(c)]).imag();
      for (Index c = 0; c < npq; ++c) jac(npvpq + r, npvpq + c) = ds_dvm(i, pq[static_cast<std::size_t>(c)]).imag();
      rhs(npvpq + r) = mis(i).imag();
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (!(lu.rcond() > 1e-14)) {
      result.singular = true;
      return result;
    }
    const VectorXd dx = lu.solve(-rhs);
    if (!dx.allFinite()) {
      result.singular = true;
      return result;
    }
    for (Index r = 0; r < npvpq; ++r) va(pvpq[static_cast<std::size_t>(r)]) += dx(r);
    for (Index r = 0; r < npq; ++r) vm(pq[static_cast<std::size_t>(r)]) += dx(npvpq + r);
    for (Index i = 0; i < vm.size(); ++i) v(i) = phasor(vm(i), va(i));

    current = y * v;
    mis = v.cwiseProduct(current.conjugate()) - sbus;
    result.mismatch = mismatch_norm(mis, pvpq, pq);
    if (!std::isfinite(result.mismatch)) return result;
    if (result.mismatch <= options.tolerance) {
      result.converged = true;
      return result;
    }
  }
  return result;
}

}  // namespace

PowerFlowSolver::PowerFlowSolver(const GridCase& topology, PowerFlowOptions options)
    : options_(options), admittance_(build_admittance(topology)) {
  y_ = admittance_.complex();
  branches_.reserve(topology.lines.size());
  for (const Line& line : topology.lines) {
    branches_.push_back(branch_admittance(line));
    branch_ends_.emplace_back(static_cast<Index>(topology.bus_index(line.from_bus)),
                              static_cast<Index>(topology.bus_index(line.to_bus)));
  }
}

PowerFlowSolution PowerFlowSolver::solve(const GridCase& grid, const VoltageProfile* warm_start) const {
  const auto n = static_cast<Index>(grid.buses.size());
  if (n != y_.rows() || grid.lines.size() != branches_.size()) {
    throw CaseError("power flow: case topology does not match the solver");
  }
  Schedule sched = make_schedule(grid);
  const auto slack = static_cast<Index>(grid.slack_bus_index());

  VectorXd vm = VectorXd::Ones(n);
  VectorXd va = VectorXd::Zero(n);
  if (warm_start != nullptr) {
    if (warm_start->vm.size() != n || warm_start->va.size() != n) {
      throw CaseError("power flow: warm start does not match the bus count");
    }
    vm = warm_start->vm;
    va = warm_start->va;
  }
  va(slack) = 0.0;

  PowerFlowSolution sol;
  std::vector<BusType> types = sched.types;
  VectorXcd sbus = sched.sbus;
  // Reactive output pinned at a limit for buses switched from PV to PQ.
  VectorXd pinned_q = VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());

  const int rounds = options_.enforce_q_limits ? options_.max_q_limit_rounds : 1;
  for (int round = 0; round < rounds; ++round) {
    for (Index i = 0; i < n; ++i) {
      if (types[static_cast<std::size_t>(i)] != BusType::pq) vm(i) = sched.v_setpoint(i);
    }
    NewtonResult nr = newton(y_, sbus, types, vm, va, options_);
    sol.iterations += nr.iterations;
    sol.max_mismatch = nr.mismatch;
    sol.singular = nr.singular;
    sol.converged = nr.converged;
    if (!nr.converged) break;
    if (!options_.enforce_q_limits) break;

    const VectorXcd s = [&] {
      VectorXcd v(n);
      for (Index i = 0; i < n; ++i) v(i) = phasor(vm(i), va(i));
      return VectorXcd(v.cwiseProduct((y_ * v).conjugate()));
    }();
    bool switched = false;
    for (Index i = 0; i < n; ++i) {
      if (types[static_cast<std::size_t>(i)] != BusType::pv) continue;
      const double qg = s(i).imag() * grid.base_mva + sched.load_q(i);
      double limit = std::numeric_limits<double>::quiet_NaN();
      if (qg > sched.q_max(i) + 1e-9) limit = sched.q_max(i);
      if (qg < sched.q_min(i) - 1e-9) limit = sched.q_min(i);
      if (std::isnan(limit)) continue;
      types[static_cast<std::size_t>(i)] = BusType::pq;
      pinned_q(i) = limit;
      sbus(i) = Complex(sbus(i).real(), (limit - sched.load_q(i)) / grid.base_mva);
      switched = true;
    }
    if (!switched) break;
    if (round + 1 == rounds) sol.converged = false;
  }

  // Report with the slack angle at zero.
  va.array() -= va(slack);

  VectorXcd v(n);
  for (Index i = 0; i < n; ++i) v(i) = phasor(vm(i), va(i));
  const VectorXcd s = v.cwiseProduct((y_ * v).conjugate()) * grid.base_mva;

  sol.vm = vm;
  sol.va = va;
  sol.p_mw = s.real();
  sol.q_mvar = s.imag();
  sol.bus_types = types;

  const auto nl = static_cast<Index>(branches_.size());
  sol.line_p_from_mw.resize(nl);
  sol.line_p_to_mw.resize(nl);
  for (Index k = 0; k < nl; ++k) {
    const BranchAdmittance& a = branches_[static_cast<std::size_t>(k)];
    const auto [f, t] = branch_ends_[static_cast<std::size_t>(k)];
    const Complex sf = v(f) * std::conj(a.ff * v(f) + a.ft * v(t));
    const Complex st = v(t) * std::conj(a.tf * v(f) + a.tt * v(t));
    sol.line_p_from_mw(k) = sf.real() * grid.base_mva;
    sol.line_p_to_mw(k) = st.real() * grid.base_mva;
  }

  const auto ng = static_cast<Index>(grid.generators.size());
  sol.gen_p_mw.resize(ng);
  sol.gen_q_mvar.resize(ng);
  for (Index g = 0; g < ng; ++g) {
    sol.gen_p_mw(g) = grid.generators[static_cast<std::size_t>(g)].p_mw;
    sol.gen_q_mvar(g) = grid.generators[static_cast<std::size_t>(g)].q_mvar;
  }
  for (Index i = 0; i < n; ++i) {
    const auto& gens = sched.gens_at_bus[static_cast<std::size_t>(i)];
    if (gens.empty()) continue;
    const BusType original = sched.types[static_cast<std::size_t>(i)];
    if (original == BusType::pq) continue;  // fixed Q, as scheduled
    const double qg = std::isnan(pinned_q(i)) ? s(i).imag() + sched.load_q(i) : pinned_q(i);
    for (std::size_t g : gens) sol.gen_q_mvar(static_cast<Index>(g)) = qg / static_cast<double>(gens.size());
    if (i == slack) {
      double others = 0.0;
      for (std::size_t k = 1; k < gens.size(); ++k) others += grid.generators[gens[k]].p_mw;
      sol.gen_p_mw(static_cast<Index>(gens.front())) = s(i).real() + sched.load_p(i) - others;
    }
  }
  return sol;
}

PowerFlowSolution solve_power_flow(const GridCase& grid, const std::optional<VoltageProfile>& warm_start,
                                   PowerFlowOptions options) {
  PowerFlowSolver solver(grid, options);
  return solver.solve(grid, warm_start ? &*warm_start : nullptr);
}

Residuals power_flow_residuals(const GridCase& grid, const PowerFlowSolution& sol) {
  const AdmittanceMatrix y = build_admittance(grid);
  const auto n = static_cast<Index>(grid.buses.size());
  VectorXd p_sched = VectorXd::Zero(n);
  VectorXd q_sched = VectorXd::Zero(n);
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    const auto i = static_cast<Index>(grid.bus_index(grid.generators[g].bus));
    p_sched(i) += sol.gen_p_mw(static_cast<Index>(g));
    q_sched(i) += sol.gen_q_mvar(static_cast<Index>(g));
  }
  for (const Load& load : grid.loads) {
    const auto i = static_cast<Index>(grid.bus_index(load.bus));
    p_sched(i) -= load.p_mw;
    q_sched(i) -= load.q_mvar;
  }
  Residuals r{VectorXd::Zero(n), VectorXd::Zero(n)};
  for (Index i = 0; i < n; ++i) {
    double p = 0.0;
    double q = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double w = sol.va(i) - sol.va(j);
      p += sol.vm(j) * (y.g(i, j) * std::cos(w) + y.b(i, j) * std::sin(w));
      q += sol.vm(j) * (y.g(i, j) * std::sin(w) - y.b(i, j) * std::cos(w));
    }
    r.dp(i) = p_sched(i) / grid.base_mva - sol.vm(i) * p;
    r.dq(i) = q_sched(i) / grid.base_mva - sol.vm(i) * q;
  }
  return r;
}

}  // namespace mamgrid::powergrid
