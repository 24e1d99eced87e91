#include "gridopt/network.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "gridopt/error.hpp"

namespace gridopt {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

CostCurve read_cost(const Eigen::MatrixXd& gencost, Index row) {
  CostCurve curve;
  curve.model = static_cast<int>(gencost(row, cost_col::MODEL));
  const double n_raw = gencost(row, cost_col::NCOST);
  if (!(n_raw >= 0) || n_raw != std::floor(n_raw))
    throw Error(ErrorCode::InvalidCase,
                fmt::format("gencost row {}: bad NCOST {}", row + 1, n_raw));
  const Index n = static_cast<Index>(n_raw);
  const Index width = curve.model == 1 ? 2 * n : n;
  if (cost_col::COST + width > gencost.cols())
    throw Error(ErrorCode::InvalidCase,
                fmt::format("gencost row {}: {} coefficients declared, {} "
                            "columns present",
                            row + 1, width, gencost.cols() - cost_col::COST));
  curve.coeffs.resize(static_cast<std::size_t>(width));
  if (curve.model == 2) {
    // stored highest power first
    for (Index k = 0; k < n; ++k)
      curve.coeffs[static_cast<std::size_t>(k)] =
          gencost(row, cost_col::COST + n - 1 - k);
  } else {
    for (Index k = 0; k < width; ++k)
      curve.coeffs[static_cast<std::size_t>(k)] =
          gencost(row, cost_col::COST + k);
  }
  return curve;
}

}  // namespace

double CostCurve::value(double p) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * p + *it;
  return acc;
}

double CostCurve::derivative(double p) const {
  double acc = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 1;)
    acc = acc * p + static_cast<double>(k) * coeffs[k];
  return acc;
}

double CostCurve::second_derivative(double p) const {
  double acc = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 2;)
    acc = acc * p + static_cast<double>(k * (k - 1)) * coeffs[k];
  return acc;
}

Complex Branch::yff() const {
  return (ys + Complex(0.0, bc / 2.0)) / (tap * tap);
}
Complex Branch::yft() const {
  return -ys / (tap * std::exp(Complex(0.0, -shift)));
}
Complex Branch::ytf() const {
  return -ys / (tap * std::exp(Complex(0.0, shift)));
}
Complex Branch::ytt() const { return ys + Complex(0.0, bc / 2.0); }

std::vector<Index> Network::limited_branches() const {
  std::vector<Index> out;
  for (Index l = 0; l < n_branch(); ++l)
    if (branches[static_cast<std::size_t>(l)].rate > 0.0) out.push_back(l);
  return out;
}

CVec Network::demand() const {
  CVec sd(n_bus());
  for (Index i = 0; i < n_bus(); ++i) {
    const Bus& b = buses[static_cast<std::size_t>(i)];
    sd(i) = Complex(b.pd, b.qd);
  }
  return sd;
}

CVec Network::shunt_admittance() const {
  CVec y(n_bus());
  for (Index i = 0; i < n_bus(); ++i) {
    const Bus& b = buses[static_cast<std::size_t>(i)];
    y(i) = Complex(b.gs, b.bs);
  }
  return y;
}

Network build_network(const CaseData& c) {
  using namespace bus_col;
  Network net;
  net.name = c.name;
  net.base_mva = c.base_mva;
  const double base = c.base_mva;

  std::map<double, Index> bus_index;
  Index n_ref = 0;
  for (Index r = 0; r < c.bus.rows(); ++r) {
    Bus b;
    b.id = c.bus(r, BUS_I);
    const double type = c.bus(r, BUS_TYPE);
    if (type == 1) {
      b.type = BusType::PQ;
    } else if (type == 2) {
      b.type = BusType::PV;
    } else if (type == 3) {
      b.type = BusType::Ref;
      net.ref_bus = r;
      ++n_ref;
    } else if (type == 4) {
      throw Error(ErrorCode::IsolatedBus,
                  fmt::format("bus {} is isolated", b.id));
    } else {
      throw Error(ErrorCode::InvalidCase,
                  fmt::format("bus {} has unknown type {}", b.id, type));
    }
    b.pd = c.bus(r, PD) / base;
    b.qd = c.bus(r, QD) / base;
    b.gs = c.bus(r, GS) / base;
    b.bs = c.bus(r, BS) / base;
    b.vm0 = c.bus(r, VM);
    b.va0 = c.bus(r, VA) * kDegToRad;
    b.vmax = c.bus(r, VMAX);
    b.vmin = c.bus(r, VMIN);
    bus_index.emplace(b.id, r);
    net.buses.push_back(b);
  }
  if (n_ref == 0) throw Error(ErrorCode::NoRefBus, "no reference bus");
  if (n_ref > 1)
    throw Error(ErrorCode::MultipleRefBus,
                fmt::format("{} reference buses", n_ref));

  const Index n_gen_rows = c.gen.rows();
  const bool has_cost = c.gencost.rows() > 0;
  if (has_cost && c.gencost.rows() < n_gen_rows)
    throw Error(ErrorCode::InvalidCase,
                fmt::format("gencost has {} rows for {} generators",
                            c.gencost.rows(), n_gen_rows));
  const bool has_q_cost = has_cost && c.gencost.rows() >= 2 * n_gen_rows &&
                          n_gen_rows > 0;
  for (Index r = 0; r < n_gen_rows; ++r) {
    using namespace gen_col;
    if (!(c.gen(r, GEN_STATUS) > 0)) continue;
    auto it = bus_index.find(c.gen(r, GEN_BUS));
    if (it == bus_index.end())
      throw Error(ErrorCode::DanglingGen,
                  fmt::format("generator row {} is on unknown bus {}", r + 1,
                              c.gen(r, GEN_BUS)));
    Generator g;
    g.bus = it->second;
    g.pg0 = c.gen(r, PG) / base;
    g.qg0 = c.gen(r, QG) / base;
    g.qmax = c.gen(r, QMAX) / base;
    g.qmin = c.gen(r, QMIN) / base;
    g.vg = c.gen(r, VG);
    g.pmax = c.gen(r, PMAX) / base;
    g.pmin = c.gen(r, PMIN) / base;
    g.source_row = r;
    if (has_cost) g.cost = read_cost(c.gencost, r);
    if (has_q_cost) g.q_cost.push_back(read_cost(c.gencost, n_gen_rows + r));
    net.gens.push_back(std::move(g));
  }

  for (Index r = 0; r < c.branch.rows(); ++r) {
    using namespace branch_col;
    if (!(c.branch(r, BR_STATUS) > 0)) continue;
    auto from = bus_index.find(c.branch(r, F_BUS));
    auto to = bus_index.find(c.branch(r, T_BUS));
    if (from == bus_index.end() || to == bus_index.end())
      throw Error(ErrorCode::InvalidCase,
                  fmt::format("branch row {} references an unknown bus", r + 1));
    const double rr = c.branch(r, BR_R), xx = c.branch(r, BR_X);
    if (rr == 0.0 && xx == 0.0)
      throw Error(ErrorCode::ZeroImpedanceBranch,
                  fmt::format("branch row {} has r = x = 0", r + 1));
    Branch br;
    br.from = from->second;
    br.to = to->second;
    br.ys = 1.0 / Complex(rr, xx);
    br.bc = c.branch(r, BR_B);
    br.tap = c.branch(r, TAP) == 0.0 ? 1.0 : c.branch(r, TAP);
    br.shift = c.branch(r, SHIFT) * kDegToRad;
    br.rate = c.branch(r, RATE_A) / base;
    br.angmin = c.branch(r, ANGMIN) * kDegToRad;
    br.angmax = c.branch(r, ANGMAX) * kDegToRad;
    br.source_row = r;
    net.branches.push_back(br);
  }

  const Index nb = net.n_bus(), ng = net.n_gen(), nl = net.n_branch();
  std::vector<Triplet> tf, tt;
  std::vector<CTriplet> tyf, tyt;
  for (Index l = 0; l < nl; ++l) {
    const Branch& br = net.branches[static_cast<std::size_t>(l)];
    const int li = static_cast<int>(l), f = static_cast<int>(br.from),
              t = static_cast<int>(br.to);
    tf.emplace_back(li, f, 1.0);
    tt.emplace_back(li, t, 1.0);
    tyf.emplace_back(li, f, br.yff());
    tyf.emplace_back(li, t, br.yft());
    tyt.emplace_back(li, f, br.ytf());
    tyt.emplace_back(li, t, br.ytt());
  }
  net.cf.resize(nl, nb);
  net.cf.setFromTriplets(tf.begin(), tf.end());
  net.ct.resize(nl, nb);
  net.ct.setFromTriplets(tt.begin(), tt.end());
  net.yf.resize(nl, nb);
  net.yf.setFromTriplets(tyf.begin(), tyf.end());
  net.yt.resize(nl, nb);
  net.yt.setFromTriplets(tyt.begin(), tyt.end());

  std::vector<Triplet> tg;
  for (Index k = 0; k < ng; ++k)
    tg.emplace_back(static_cast<int>(net.gens[static_cast<std::size_t>(k)].bus),
                    static_cast<int>(k), 1.0);
  net.cg.resize(nb, ng);
  net.cg.setFromTriplets(tg.begin(), tg.end());

  const CSpMat cfc = net.cf.cast<Complex>(), ctc = net.ct.cast<Complex>();
  net.ybus = CSpMat(cfc.transpose() * net.yf) +
             CSpMat(ctc.transpose() * net.yt) +
             sparse_diagonal(net.shunt_admittance());
  net.ybus.makeCompressed();
  return net;
}

CVec bus_injection(const Network& net, const CVec& v) {
  return v.cwiseProduct((net.ybus * v).conjugate());
}

BranchFlows branch_flows(const Network& net, const CVec& v) {
  const CSpMat cfc = net.cf.cast<Complex>(), ctc = net.ct.cast<Complex>();
  BranchFlows flows;
  flows.from = (cfc * v).cwiseProduct((net.yf * v).conjugate());
  flows.to = (ctc * v).cwiseProduct((net.yt * v).conjugate());
  return flows;
}

}  // namespace gridopt
