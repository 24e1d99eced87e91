#include "gridopt/opf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "ac_derivatives.hpp"
#include "gridopt/error.hpp"

namespace gridopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const Complex kJ(0.0, 1.0);

using Trips = std::vector<Triplet>;

/// Real and imaginary parts of m go to rows re_row + i and im_row + i.
void put_complex(Trips& t, const CSpMat& m, Index re_row, Index im_row,
                 Index col) {
  for (int j = 0; j < m.outerSize(); ++j)
    for (CSpMat::InnerIterator it(m, j); it; ++it) {
      const int c = static_cast<int>(col + it.col());
      t.emplace_back(static_cast<int>(re_row + it.row()), c, it.value().real());
      t.emplace_back(static_cast<int>(im_row + it.row()), c, it.value().imag());
    }
}

void put_real(Trips& t, const SpMat& m, Index row, Index col) {
  for (int j = 0; j < m.outerSize(); ++j)
    for (SpMat::InnerIterator it(m, j); it; ++it)
      t.emplace_back(static_cast<int>(row + it.row()),
                     static_cast<int>(col + it.col()), it.value());
}

/// Emits real(a) + imag(b) at (row, col).
void put_re_im(Trips& t, const CSpMat& a, const CSpMat& b, Index row,
               Index col) {
  put_real(t, SpMat(a.real()), row, col);
  put_real(t, SpMat(b.imag()), row, col);
}

/// Emits the symmetric voltage block [[h11 h12]; [h21 h22]] as
/// real(a) + imag(b).
void put_quad(Trips& t, const detail::CQuad& a, const detail::CQuad& b,
              const VarLayout& lay) {
  put_re_im(t, a.h11, b.h11, lay.v1(), lay.v1());
  put_re_im(t, a.h12, b.h12, lay.v1(), lay.v2());
  put_re_im(t, a.h21, b.h21, lay.v2(), lay.v1());
  put_re_im(t, a.h22, b.h22, lay.v2(), lay.v2());
}

void put_quad(Trips& t, const detail::RQuad& h, const VarLayout& lay) {
  put_real(t, h.h11, lay.v1(), lay.v1());
  put_real(t, h.h12, lay.v1(), lay.v2());
  put_real(t, h.h21, lay.v2(), lay.v1());
  put_real(t, h.h22, lay.v2(), lay.v2());
}

CSpMat select_rows(const CSpMat& m, const std::vector<Index>& rows) {
  std::vector<CTriplet> t;
  for (std::size_t k = 0; k < rows.size(); ++k)
    t.emplace_back(static_cast<int>(k), static_cast<int>(rows[k]), 1.0);
  CSpMat sel(static_cast<Index>(rows.size()), m.rows());
  sel.setFromTriplets(t.begin(), t.end());
  return sel * m;
}

/// Gradient of muᵀ|S|² rows: 2·Re(diag(conj S)·dS).
SpMat flow_jacobian(const CVec& s, const CSpMat& ds) {
  return SpMat((2.0 * (sparse_diagonal(s.conjugate()) * ds)).real());
}

void check_costs(const Network& net) {
  auto check = [](const CostCurve& c, std::size_t k, const char* what) {
    if (c.coeffs.empty()) return;
    if (c.model == 1)
      throw Error(ErrorCode::UnsupportedCost,
                  fmt::format("generator {}: piecewise-linear {} cost", k, what));
    if (c.model != 2)
      throw Error(ErrorCode::UnsupportedCost,
                  fmt::format("generator {}: cost model {}", k, c.model));
    if (c.coeffs.size() > 4)
      throw Error(ErrorCode::UnsupportedCost,
                  fmt::format("generator {}: {} cost of degree {}", k, what,
                              c.coeffs.size() - 1));
  };
  for (std::size_t k = 0; k < net.gens.size(); ++k) {
    check(net.gens[k].cost, k, "active");
    for (const CostCurve& q : net.gens[k].q_cost) check(q, k, "reactive");
  }
}

}  // namespace

Formulation Formulation::parse(std::string_view name) {
  for (const Formulation& f : kAllFormulations)
    if (f.name() == name) return f;
  throw std::invalid_argument(fmt::format("unknown formulation '{}'", name));
}

std::string Formulation::name() const {
  return fmt::format("{}-{}", voltage == VoltageCoords::Polar ? "polar" : "cart",
                     balance == BalanceKind::Power ? "power" : "current");
}

OpfProblem::OpfProblem(std::shared_ptr<const Network> net, Formulation form)
    : net_(std::move(net)), form_(form) {
  const Network& nw = *net_;
  check_costs(nw);
  layout_.nb = nw.n_bus();
  layout_.ng = nw.n_gen();
  const Index nb = layout_.nb, ng = layout_.ng;
  const bool cart = form_.voltage == VoltageCoords::Cartesian;

  limited_ = nw.limited_branches();
  const CSpMat cfc = nw.cf.cast<Complex>(), ctc = nw.ct.cast<Complex>();
  yf_lim_ = select_rows(nw.yf, limited_);
  yt_lim_ = select_rows(nw.yt, limited_);
  cf_lim_ = select_rows(cfc, limited_).real();
  ct_lim_ = select_rows(ctc, limited_).real();
  rate2_.resize(n_limited());
  for (Index k = 0; k < n_limited(); ++k) {
    const double r = nw.branches[static_cast<std::size_t>(limited_[static_cast<std::size_t>(k)])].rate;
    rate2_(k) = r * r;
  }
  cg_c_ = nw.cg.cast<Complex>();

  m_eq_ = 2 * nb + (cart ? 1 : 0);
  m_ineq_ = 2 * n_limited() + (cart ? 2 * nb : 0);

  x_min_.resize(layout_.size());
  x_max_.resize(layout_.size());
  for (Index i = 0; i < nb; ++i) {
    const Bus& b = nw.buses[static_cast<std::size_t>(i)];
    if (cart) {
      x_min_(layout_.v1() + i) = i == nw.ref_bus ? 0.0 : -b.vmax;
      x_max_(layout_.v1() + i) = b.vmax;
      x_min_(layout_.v2() + i) = -b.vmax;
      x_max_(layout_.v2() + i) = b.vmax;
    } else {
      const bool ref = i == nw.ref_bus;
      x_min_(layout_.v1() + i) = ref ? b.va0 : -kInf;
      x_max_(layout_.v1() + i) = ref ? b.va0 : kInf;
      x_min_(layout_.v2() + i) = b.vmin;
      x_max_(layout_.v2() + i) = b.vmax;
    }
  }
  for (Index k = 0; k < ng; ++k) {
    const Generator& g = nw.gens[static_cast<std::size_t>(k)];
    x_min_(layout_.pg() + k) = g.pmin;
    x_max_(layout_.pg() + k) = g.pmax;
    x_min_(layout_.qg() + k) = g.qmin;
    x_max_(layout_.qg() + k) = g.qmax;
  }
}

OpfProblem build_nlp(std::shared_ptr<const Network> net, Formulation form) {
  return OpfProblem(std::move(net), form);
}

CVec OpfProblem::voltage(const Vec& x) const {
  const Index nb = layout_.nb;
  CVec v(nb);
  const auto a = x.segment(layout_.v1(), nb), b = x.segment(layout_.v2(), nb);
  if (form_.voltage == VoltageCoords::Cartesian)
    for (Index i = 0; i < nb; ++i) v(i) = Complex(a(i), b(i));
  else
    for (Index i = 0; i < nb; ++i) v(i) = std::polar(b(i), a(i));
  return v;
}

void OpfProblem::set_voltage(Vec& x, const CVec& v) const {
  const Index nb = layout_.nb;
  for (Index i = 0; i < nb; ++i) {
    if (form_.voltage == VoltageCoords::Cartesian) {
      x(layout_.v1() + i) = v(i).real();
      x(layout_.v2() + i) = v(i).imag();
    } else {
      x(layout_.v1() + i) = std::arg(v(i));
      x(layout_.v2() + i) = std::abs(v(i));
    }
  }
}

CVec OpfProblem::net_injection(const Vec& x) const {
  const Index ng = layout_.ng;
  CVec sg(ng);
  for (Index k = 0; k < ng; ++k)
    sg(k) = Complex(x(layout_.pg() + k), x(layout_.qg() + k));
  return cg_c_ * sg - net_->demand();
}

void OpfProblem::check_domain(const CVec& v) const {
  for (Index i = 0; i < v.size(); ++i)
    if (v(i) == Complex(0.0, 0.0))
      throw Error(ErrorCode::ZeroVoltageDomain,
                  fmt::format("|V| = 0 at bus {}",
                              net_->buses[static_cast<std::size_t>(i)].id));
}

double OpfProblem::eval_f(const Vec& x) const {
  const double base = net_->base_mva;
  double f = 0.0;
  for (Index k = 0; k < layout_.ng; ++k) {
    const Generator& g = net_->gens[static_cast<std::size_t>(k)];
    f += g.cost.value(x(layout_.pg() + k) * base);
    for (const CostCurve& q : g.q_cost) f += q.value(x(layout_.qg() + k) * base);
  }
  return f;
}

Vec OpfProblem::eval_grad_f(const Vec& x) const {
  const double base = net_->base_mva;
  Vec grad = Vec::Zero(n());
  for (Index k = 0; k < layout_.ng; ++k) {
    const Generator& g = net_->gens[static_cast<std::size_t>(k)];
    grad(layout_.pg() + k) = base * g.cost.derivative(x(layout_.pg() + k) * base);
    for (const CostCurve& q : g.q_cost)
      grad(layout_.qg() + k) += base * q.derivative(x(layout_.qg() + k) * base);
  }
  return grad;
}

Vec OpfProblem::eval_g(const Vec& x) const {
  const Index nb = layout_.nb;
  const CVec v = voltage(x);
  const CVec sinj = net_injection(x);
  CVec mis;
  if (form_.balance == BalanceKind::Power) {
    mis = bus_injection(*net_, v) - sinj;
  } else {
    check_domain(v);
    mis = net_->ybus * v - sinj.cwiseQuotient(v).conjugate();
  }
  Vec g(m_eq_);
  g.head(nb) = mis.real();
  g.segment(nb, nb) = mis.imag();
  if (form_.voltage == VoltageCoords::Cartesian)
    g(2 * nb) = x(layout_.v2() + net_->ref_bus);
  return g;
}

SpMat OpfProblem::eval_jac_g(const Vec& x) const {
  const Index nb = layout_.nb;
  const CVec v = voltage(x);
  Trips t;
  if (form_.balance == BalanceKind::Power) {
    const detail::CPair ds = detail::dsbus_dv(net_->ybus, v, form_.voltage);
    put_complex(t, ds.d1, 0, nb, layout_.v1());
    put_complex(t, ds.d2, 0, nb, layout_.v2());
    const SpMat neg_cg = -net_->cg;
    put_real(t, neg_cg, 0, layout_.pg());
    put_real(t, neg_cg, nb, layout_.qg());
  } else {
    check_domain(v);
    const detail::CPair di =
        detail::dimis_dv(net_injection(x), net_->ybus, v, form_.voltage);
    put_complex(t, di.d1, 0, nb, layout_.v1());
    put_complex(t, di.d2, 0, nb, layout_.v2());
    const CSpMat dpg =
        -CSpMat(sparse_diagonal(v.conjugate().cwiseInverse()) * cg_c_);
    put_complex(t, dpg, 0, nb, layout_.pg());
    put_complex(t, CSpMat(-kJ * dpg), 0, nb, layout_.qg());
  }
  if (form_.voltage == VoltageCoords::Cartesian)
    t.emplace_back(static_cast<int>(2 * nb),
                   static_cast<int>(layout_.v2() + net_->ref_bus), 1.0);
  SpMat jac(m_eq_, n());
  jac.setFromTriplets(t.begin(), t.end());
  return jac;
}

Vec OpfProblem::eval_h(const Vec& x) const {
  const Index nl = n_limited(), nb = layout_.nb;
  const CVec v = voltage(x);
  const CSpMat cf = cf_lim_.cast<Complex>(), ct = ct_lim_.cast<Complex>();
  const CVec sf = (cf * v).cwiseProduct((yf_lim_ * v).conjugate());
  const CVec st = (ct * v).cwiseProduct((yt_lim_ * v).conjugate());
  Vec h(m_ineq_);
  h.head(nl) = sf.cwiseAbs2() - rate2_;
  h.segment(nl, nl) = st.cwiseAbs2() - rate2_;
  if (form_.voltage == VoltageCoords::Cartesian) {
    for (Index i = 0; i < nb; ++i) {
      const Bus& b = net_->buses[static_cast<std::size_t>(i)];
      const double m2 = std::norm(v(i));
      h(2 * nl + i) = b.vmin * b.vmin - m2;
      h(2 * nl + nb + i) = m2 - b.vmax * b.vmax;
    }
  }
  return h;
}

SpMat OpfProblem::eval_jac_h(const Vec& x) const {
  const Index nl = n_limited(), nb = layout_.nb;
  const CVec v = voltage(x);
  const CSpMat cf = cf_lim_.cast<Complex>(), ct = ct_lim_.cast<Complex>();
  const CVec sf = (cf * v).cwiseProduct((yf_lim_ * v).conjugate());
  const CVec st = (ct * v).cwiseProduct((yt_lim_ * v).conjugate());
  const detail::CPair dsf = detail::dsbr_dv(yf_lim_, cf, v, form_.voltage);
  const detail::CPair dst = detail::dsbr_dv(yt_lim_, ct, v, form_.voltage);
  Trips t;
  put_real(t, flow_jacobian(sf, dsf.d1), 0, layout_.v1());
  put_real(t, flow_jacobian(sf, dsf.d2), 0, layout_.v2());
  put_real(t, flow_jacobian(st, dst.d1), nl, layout_.v1());
  put_real(t, flow_jacobian(st, dst.d2), nl, layout_.v2());
  if (form_.voltage == VoltageCoords::Cartesian) {
    for (Index i = 0; i < nb; ++i) {
      const int lo = static_cast<int>(2 * nl + i), hi = lo + static_cast<int>(nb);
      const int cr = static_cast<int>(layout_.v1() + i),
                ci = static_cast<int>(layout_.v2() + i);
      t.emplace_back(lo, cr, -2.0 * v(i).real());
      t.emplace_back(lo, ci, -2.0 * v(i).imag());
      t.emplace_back(hi, cr, 2.0 * v(i).real());
      t.emplace_back(hi, ci, 2.0 * v(i).imag());
    }
  }
  SpMat jac(m_ineq_, n());
  jac.setFromTriplets(t.begin(), t.end());
  return jac;
}

SpMat OpfProblem::eval_hessian(const Vec& x, double obj_weight,
                               const Vec& lambda_g,
                               const Vec& lambda_h) const {
  const Index nb = layout_.nb, ng = layout_.ng, nl = n_limited();
  const double base = net_->base_mva;
  const CVec v = voltage(x);
  Trips t;

  for (Index k = 0; k < ng; ++k) {
    const Generator& g = net_->gens[static_cast<std::size_t>(k)];
    const int ip = static_cast<int>(layout_.pg() + k),
              iq = static_cast<int>(layout_.qg() + k);
    t.emplace_back(ip, ip,
                   obj_weight * base * base *
                       g.cost.second_derivative(x(ip) * base));
    double hq = 0.0;
    for (const CostCurve& q : g.q_cost)
      hq += base * base * q.second_derivative(x(iq) * base);
    t.emplace_back(iq, iq, obj_weight * hq);
  }

  const CVec lam_p = lambda_g.head(nb).cast<Complex>();
  const CVec lam_q = lambda_g.segment(nb, nb).cast<Complex>();
  if (form_.balance == BalanceKind::Power) {
    put_quad(t, detail::d2sbus_dv2(net_->ybus, v, lam_p, form_.voltage),
             detail::d2sbus_dv2(net_->ybus, v, lam_q, form_.voltage), layout_);
  } else {
    check_domain(v);
    const CVec sinj = net_injection(x);
    put_quad(t,
             detail::d2imis_dv2(sinj, net_->ybus, v, lam_p, form_.voltage),
             detail::d2imis_dv2(sinj, net_->ybus, v, lam_q, form_.voltage),
             layout_);
    const detail::CQuad gr =
        detail::d2imis_dvdsg(cg_c_, v, lam_p, form_.voltage);
    const detail::CQuad gi =
        detail::d2imis_dvdsg(cg_c_, v, lam_q, form_.voltage);
    auto both = [&](const CSpMat& a, const CSpMat& b, Index row, Index col) {
      put_re_im(t, a, b, row, col);
      put_re_im(t, CSpMat(a.transpose()), CSpMat(b.transpose()), col, row);
    };
    both(gr.h11, gi.h11, layout_.pg(), layout_.v1());
    both(gr.h12, gi.h12, layout_.pg(), layout_.v2());
    both(gr.h21, gi.h21, layout_.qg(), layout_.v1());
    both(gr.h22, gi.h22, layout_.qg(), layout_.v2());
  }

  if (nl > 0) {
    const CSpMat cf = cf_lim_.cast<Complex>(), ct = ct_lim_.cast<Complex>();
    const CVec sf = (cf * v).cwiseProduct((yf_lim_ * v).conjugate());
    const CVec st = (ct * v).cwiseProduct((yt_lim_ * v).conjugate());
    const detail::CPair dsf = detail::dsbr_dv(yf_lim_, cf, v, form_.voltage);
    const detail::CPair dst = detail::dsbr_dv(yt_lim_, ct, v, form_.voltage);
    put_quad(t,
             detail::d2abr_dv2(dsf, sf, cf, yf_lim_, v, lambda_h.head(nl),
                               form_.voltage),
             layout_);
    put_quad(t,
             detail::d2abr_dv2(dst, st, ct, yt_lim_, v,
                               lambda_h.segment(nl, nl), form_.voltage),
             layout_);
  }

  if (form_.voltage == VoltageCoords::Cartesian) {
    for (Index i = 0; i < nb; ++i) {
      const double d = 2.0 * (lambda_h(2 * nl + nb + i) - lambda_h(2 * nl + i));
      const int cr = static_cast<int>(layout_.v1() + i),
                ci = static_cast<int>(layout_.v2() + i);
      t.emplace_back(cr, cr, d);
      t.emplace_back(ci, ci, d);
    }
  }

  SpMat hess(n(), n());
  hess.setFromTriplets(t.begin(), t.end());
  return hess;
}

StartMode parse_start_mode(std::string_view name) {
  if (name == "flat") return StartMode::Flat;
  if (name == "mpc") return StartMode::CaseData;
  if (name == "pf") return StartMode::PfSolve;
  throw std::invalid_argument(fmt::format("unknown start mode '{}'", name));
}

std::string to_string(StartMode mode) {
  switch (mode) {
    case StartMode::Flat: return "flat";
    case StartMode::CaseData: return "mpc";
    case StartMode::PfSolve: return "pf";
  }
  return "?";
}

Vec initial_guess(const OpfProblem& prob, StartMode mode,
                  const PfOptions& pf_opts) {
  const Network& net = prob.network();
  const VarLayout& lay = prob.layout();
  const Vec& lb = prob.x_min();
  const Vec& ub = prob.x_max();
  const bool cart = prob.formulation().voltage == VoltageCoords::Cartesian;
  Vec x(prob.n());

  if (mode == StartMode::Flat) {
    for (Index i = 0; i < x.size(); ++i) {
      const bool lo = std::isfinite(lb(i)), hi = std::isfinite(ub(i));
      if (lo && hi)
        x(i) = 0.5 * (lb(i) + ub(i));
      else if (lo)
        x(i) = lb(i) + 1.0;
      else if (hi)
        x(i) = ub(i) - 1.0;
      else
        x(i) = 0.0;
    }
    if (cart) {
      // the box midpoint would be V = 0; use the magnitude corridor midpoint
      for (Index i = 0; i < lay.nb; ++i) {
        const Bus& b = net.buses[static_cast<std::size_t>(i)];
        x(lay.v1() + i) = 0.5 * (b.vmin + b.vmax);
        x(lay.v2() + i) = 0.0;
      }
    }
    return x;
  }

  CVec v(lay.nb);
  Vec pg(lay.ng), qg(lay.ng);
  if (mode == StartMode::CaseData) {
    for (Index i = 0; i < lay.nb; ++i) {
      const Bus& b = net.buses[static_cast<std::size_t>(i)];
      v(i) = std::polar(b.vm0, b.va0);
    }
    for (Index k = 0; k < lay.ng; ++k) {
      pg(k) = net.gens[static_cast<std::size_t>(k)].pg0;
      qg(k) = net.gens[static_cast<std::size_t>(k)].qg0;
    }
  } else {
    PfSolution pf;
    try {
      pf = newton_pf(net, pf_opts);
    } catch (const Error& e) {
      throw Error(ErrorCode::PfDiverged, e.what());
    }
    v = pf.voltage();
    pg = pf.pg;
    qg = pf.qg;
  }
  if (cart) v *= std::polar(1.0, -std::arg(v(net.ref_bus)));
  prob.set_voltage(x, v);
  x.segment(lay.pg(), lay.ng) = pg;
  x.segment(lay.qg(), lay.ng) = qg;
  return x.cwiseMax(lb).cwiseMin(ub);
}

}  // namespace gridopt
