#include "gridopt/power_flow.hpp"

#include <cmath>

#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "gridopt/error.hpp"

namespace gridopt {

namespace {

/// Bus roles for the power flow: PV buses without an in-service generator
/// behave as PQ buses.
struct BusRoles {
  std::vector<Index> pv, pq;
  std::vector<int> gens_at_bus;
};

BusRoles classify(const Network& net) {
  BusRoles roles;
  roles.gens_at_bus.assign(static_cast<std::size_t>(net.n_bus()), 0);
  for (const Generator& g : net.gens)
    ++roles.gens_at_bus[static_cast<std::size_t>(g.bus)];
  for (Index i = 0; i < net.n_bus(); ++i) {
    const BusType type = net.buses[static_cast<std::size_t>(i)].type;
    if (type == BusType::Ref) continue;
    if (type == BusType::PV && roles.gens_at_bus[static_cast<std::size_t>(i)] > 0)
      roles.pv.push_back(i);
    else
      roles.pq.push_back(i);
  }
  return roles;
}

}  // namespace

CVec PfSolution::voltage() const {
  CVec v(vm.size());
  for (Index i = 0; i < vm.size(); ++i) v(i) = std::polar(vm(i), va(i));
  return v;
}

PfMismatch::PfMismatch(const Network& net) : net_(net) {
  BusRoles roles = classify(net);
  pvpq_ = roles.pv;
  pvpq_.insert(pvpq_.end(), roles.pq.begin(), roles.pq.end());
  pq_ = roles.pq;
  CVec sg = CVec::Zero(net.n_gen());
  for (Index k = 0; k < net.n_gen(); ++k) {
    const Generator& g = net.gens[static_cast<std::size_t>(k)];
    sg(k) = Complex(g.pg0, g.qg0);
  }
  sbus_ = net.cg.cast<Complex>() * sg - net.demand();
}

Vec PfMismatch::unknowns(const CVec& v) const {
  Vec x(size());
  Index k = 0;
  for (Index i : pvpq_) x(k++) = std::arg(v(i));
  for (Index i : pq_) x(k++) = std::abs(v(i));
  return x;
}

CVec PfMismatch::voltage(const Vec& x, const CVec& base) const {
  Vec va = base.array().arg().matrix();
  Vec vm = base.cwiseAbs();
  Index k = 0;
  for (Index i : pvpq_) va(i) = x(k++);
  for (Index i : pq_) vm(i) = x(k++);
  CVec v(base.size());
  for (Index i = 0; i < v.size(); ++i) v(i) = std::polar(vm(i), va(i));
  return v;
}

Vec PfMismatch::residual(const CVec& v) const {
  const CVec mis = bus_injection(net_, v) - sbus_;
  Vec f(size());
  Index k = 0;
  for (Index i : pvpq_) f(k++) = mis(i).real();
  for (Index i : pq_) f(k++) = mis(i).imag();
  return f;
}

SpMat PfMismatch::jacobian(const CVec& v) const {
  const Index nb = v.size();
  const CVec ibus = net_.ybus * v;
  const CVec vnorm = v.array() / v.array().abs().cast<Complex>();
  const CSpMat diag_v = sparse_diagonal(v);
  const CSpMat diag_i = sparse_diagonal(ibus);
  const CSpMat diag_vnorm = sparse_diagonal(vnorm);

  // dS/dVa = j·diag(V)·conj(diag(I) − Y·diag(V))
  // dS/dVm = diag(V)·conj(Y·diag(V/|V|)) + conj(diag(I))·diag(V/|V|)
  const CSpMat ds_dva = Complex(0, 1) * CSpMat(diag_v * CSpMat(diag_i - net_.ybus * diag_v).conjugate());
  const CSpMat ds_dvm = CSpMat(diag_v * CSpMat(net_.ybus * diag_vnorm).conjugate()) +
                        CSpMat(diag_i.conjugate() * diag_vnorm);

  std::vector<Index> col_va(static_cast<std::size_t>(nb), -1),
      col_vm(static_cast<std::size_t>(nb), -1),
      row_p(static_cast<std::size_t>(nb), -1),
      row_q(static_cast<std::size_t>(nb), -1);
  const Index npvpq = static_cast<Index>(pvpq_.size());
  for (Index k = 0; k < npvpq; ++k) {
    col_va[static_cast<std::size_t>(pvpq_[static_cast<std::size_t>(k)])] = k;
    row_p[static_cast<std::size_t>(pvpq_[static_cast<std::size_t>(k)])] = k;
  }
  for (Index k = 0; k < static_cast<Index>(pq_.size()); ++k) {
    col_vm[static_cast<std::size_t>(pq_[static_cast<std::size_t>(k)])] = npvpq + k;
    row_q[static_cast<std::size_t>(pq_[static_cast<std::size_t>(k)])] = npvpq + k;
  }

  std::vector<Triplet> trip;
  auto scatter = [&](const CSpMat& m, const std::vector<Index>& cols) {
    for (int j = 0; j < m.outerSize(); ++j) {
      const Index c = cols[static_cast<std::size_t>(j)];
      if (c < 0) continue;
      for (CSpMat::InnerIterator it(m, j); it; ++it) {
        const auto r = static_cast<std::size_t>(it.row());
        if (row_p[r] >= 0)
          trip.emplace_back(static_cast<int>(row_p[r]), static_cast<int>(c),
                            it.value().real());
        if (row_q[r] >= 0)
          trip.emplace_back(static_cast<int>(row_q[r]), static_cast<int>(c),
                            it.value().imag());
      }
    }
  };
  scatter(ds_dva, col_va);
  scatter(ds_dvm, col_vm);
  SpMat jac(size(), size());
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

PfSolution newton_pf(const Network& net, const PfOptions& opts) {
  const Index nb = net.n_bus();
  CVec v(nb);
  for (Index i = 0; i < nb; ++i) {
    const Bus& b = net.buses[static_cast<std::size_t>(i)];
    v(i) = std::polar(b.vm0, b.va0);
  }
  const BusRoles roles = classify(net);
  for (const Generator& g : net.gens) {
    const BusType type = net.buses[static_cast<std::size_t>(g.bus)].type;
    if (type == BusType::PV || type == BusType::Ref)
      v(g.bus) = std::polar(g.vg, std::arg(v(g.bus)));
  }

  PfMismatch mismatch(net);
  PfSolution sol;
  Vec x = mismatch.unknowns(v);
  Vec f = mismatch.residual(v);
  double norm_f = f.size() > 0 ? f.lpNorm<Eigen::Infinity>() : 0.0;
  int iter = 0;
  Eigen::SparseLU<SpMat> lu;
  while (!(norm_f <= opts.tol)) {
    if (iter >= opts.max_iter || !std::isfinite(norm_f))
      throw Error(ErrorCode::Diverged,
                  fmt::format("power flow mismatch {:.3e} after {} iterations",
                              norm_f, iter));
    SpMat jac = mismatch.jacobian(v);
    lu.compute(jac);
    if (lu.info() != Eigen::Success)
      throw Error(ErrorCode::SingularJacobian,
                  fmt::format("iteration {}: {}", iter, lu.lastErrorMessage()));
    Vec dx = lu.solve(f);
    x -= dx;
    v = mismatch.voltage(x, v);
    f = mismatch.residual(v);
    norm_f = f.lpNorm<Eigen::Infinity>();
    ++iter;
  }

  sol.vm = v.cwiseAbs();
  sol.va = v.array().arg().matrix();
  sol.va(net.ref_bus) = net.buses[static_cast<std::size_t>(net.ref_bus)].va0;
  sol.iterations = iter;
  sol.max_mismatch = norm_f;
  sol.converged = true;

  // Slack absorption: REF takes the active mismatch, REF and PV buses take
  // the reactive injection, split evenly among co-located generators.
  const CVec sbus = bus_injection(net, v) + net.demand();
  sol.pg.resize(net.n_gen());
  sol.qg.resize(net.n_gen());
  Vec pg_sched = Vec::Zero(nb);
  for (Index k = 0; k < net.n_gen(); ++k) {
    const Generator& g = net.gens[static_cast<std::size_t>(k)];
    sol.pg(k) = g.pg0;
    sol.qg(k) = g.qg0;
    pg_sched(g.bus) += g.pg0;
  }
  for (Index k = 0; k < net.n_gen(); ++k) {
    const Generator& g = net.gens[static_cast<std::size_t>(k)];
    const BusType type = net.buses[static_cast<std::size_t>(g.bus)].type;
    const double count = roles.gens_at_bus[static_cast<std::size_t>(g.bus)];
    if (type == BusType::Ref)
      sol.pg(k) += (sbus(g.bus).real() - pg_sched(g.bus)) / count;
    if (type == BusType::Ref || type == BusType::PV)
      sol.qg(k) = sbus(g.bus).imag() / count;
  }
  return sol;
}

}  // namespace gridopt
