#include "ac_derivatives.hpp"

namespace gridopt::detail {

namespace {

const Complex kJ(0.0, 1.0);

CSpMat diag(const CVec& v) { return sparse_diagonal(v); }

CSpMat tr(const CSpMat& m) { return CSpMat(m.transpose()); }

CSpMat conj(const CSpMat& m) { return CSpMat(m.conjugate()); }

CVec inv_abs(const CVec& v) {
  return v.cwiseAbs().cwiseInverse().cast<Complex>();
}

}  // namespace

CPair dsbus_dv(const CSpMat& ybus, const CVec& v, VoltageCoords c) {
  const CVec ibus = ybus * v;
  const CSpMat dv = diag(v), di = diag(ibus);
  if (c == VoltageCoords::Cartesian) {
    const CSpMat a = conj(di), b = dv * conj(ybus);
    return {a + b, kJ * CSpMat(a - b)};
  }
  const CSpMat dvn = diag(v.cwiseProduct(inv_abs(v)));
  return {kJ * CSpMat(dv * conj(di - ybus * dv)),
          CSpMat(dv * conj(ybus * dvn)) + CSpMat(conj(di) * dvn)};
}

CQuad d2sbus_dv2(const CSpMat& ybus, const CVec& v, const CVec& lam,
                 VoltageCoords c) {
  const CSpMat dl = diag(lam);
  if (c == VoltageCoords::Cartesian) {
    const CSpMat e = dl * conj(ybus);
    const CSpMat f = e + tr(e);
    const CSpMat g = kJ * CSpMat(e - tr(e));
    return {f, tr(g), g, f};
  }
  const CVec ibus = ybus * v;
  const CSpMat dv = diag(v);
  const CSpMat a = diag(lam.cwiseProduct(v));
  const CSpMat b = ybus * dv;
  const CSpMat cc = a * conj(b);
  const CSpMat d = CSpMat(ybus.adjoint()) * dv;
  const CSpMat e = conj(dv) * CSpMat(d * dl - diag(d * lam));
  const CSpMat f = cc - a * diag(ibus.conjugate());
  const CSpMat g = diag(inv_abs(v));
  const CSpMat h21 = kJ * CSpMat(g * CSpMat(e - f));
  return {e + f, tr(h21), h21, g * CSpMat(cc + tr(cc)) * g};
}

CPair dimis_dv(const CVec& sbus, const CSpMat& ybus, const CVec& v,
               VoltageCoords c) {
  if (c == VoltageCoords::Cartesian) {
    const CSpMat d = diag(sbus.cwiseQuotient(v.cwiseProduct(v)).conjugate());
    return {ybus + d, kJ * CSpMat(ybus - d)};
  }
  const CVec vm = v.cwiseAbs().cast<Complex>();
  const CVec ibus = sbus.cwiseQuotient(v).conjugate();
  return {kJ * CSpMat(ybus * diag(v) - diag(ibus)),
          CSpMat(ybus * diag(v.cwiseQuotient(vm))) +
              diag(ibus.cwiseQuotient(vm))};
}

CQuad d2imis_dv2(const CVec& sbus, const CSpMat& ybus, const CVec& v,
                 const CVec& lam, VoltageCoords c) {
  const Index nb = v.size();
  if (c == VoltageCoords::Cartesian) {
    CVec cc(nb);
    for (Index i = 0; i < nb; ++i)
      cc(i) = 2.0 * lam(i) * std::conj(sbus(i) / (v(i) * v(i) * v(i)));
    const CSpMat g22 = diag(cc);
    const CSpMat g12 = kJ * g22;
    return {-g22, g12, g12, g22};
  }
  CVec g11(nb), g22(nb), g21(nb);
  const CVec ylam = ybus.transpose() * lam;
  for (Index i = 0; i < nb; ++i) {
    const Complex vi = v(i), ls = lam(i) * sbus(i);
    const double a = std::abs(vi);
    g11(i) = -ylam(i) * vi + std::conj(ls / vi);
    g22(i) = -2.0 * std::conj(ls / (vi * a * a));
    g21(i) = kJ * (ylam(i) * vi / a + std::conj(ls / (vi * a)));
  }
  const CSpMat h21 = diag(g21);
  return {diag(g11), h21, h21, diag(g22)};
}

CQuad d2imis_dvdsg(const CSpMat& cg, const CVec& v, const CVec& lam,
                   VoltageCoords c) {
  const CSpMat cgt = tr(cg);
  if (c == VoltageCoords::Cartesian) {
    const CSpMat d =
        cgt * diag(lam.cwiseQuotient(v.cwiseProduct(v).conjugate()));
    const CSpMat pv2 = -kJ * d;
    return {d, pv2, pv2, -d};
  }
  const CSpMat k = cgt * diag(lam.cwiseQuotient(v.conjugate()));
  const CSpMat l = k * diag(inv_abs(v));
  return {-kJ * k, l, -k, -kJ * l};
}

CPair dsbr_dv(const CSpMat& ybr, const CSpMat& cbr, const CVec& v,
              VoltageCoords c) {
  const CVec vbr = cbr * v;
  const CVec ic = (ybr * v).conjugate();
  const CSpMat dvbr = diag(vbr), dic = diag(ic);
  if (c == VoltageCoords::Cartesian) {
    const CSpMat a = dic * cbr, b = dvbr * conj(ybr);
    return {a + b, kJ * CSpMat(a - b)};
  }
  const CVec vnorm = v.cwiseProduct(inv_abs(v));
  const CSpMat cv = dvbr * cbr;
  const CSpMat cvn = diag(cbr * vnorm) * cbr;
  return {kJ * CSpMat(dic * cv - dvbr * conj(ybr) * diag(v.conjugate())),
          CSpMat(dvbr * conj(ybr * diag(vnorm))) + CSpMat(dic * cvn)};
}

CQuad d2sbr_dv2(const CSpMat& cbr, const CSpMat& ybr, const CVec& v,
                const CVec& mu, VoltageCoords c) {
  const CSpMat a = CSpMat(ybr.adjoint()) * diag(mu) * cbr;
  if (c == VoltageCoords::Cartesian) {
    const CSpMat h11 = a + tr(a);
    const CSpMat h12 = kJ * CSpMat(a - tr(a));
    return {h11, h12, -h12, h11};
  }
  const CSpMat dv = diag(v);
  const CSpMat b = conj(dv) * a * dv;
  const CSpMat d = diag((a * v).cwiseProduct(v.conjugate()));
  const CSpMat e = diag((a.transpose() * v.conjugate()).cwiseProduct(v));
  const CSpMat f = b + tr(b);
  const CSpMat g = diag(inv_abs(v));
  const CSpMat h21 = kJ * CSpMat(g * CSpMat(b - tr(b) - d + e));
  return {f - d - e, tr(h21), h21, g * f * g};
}

RQuad d2abr_dv2(const CPair& ds, const CVec& s, const CSpMat& cbr,
                const CSpMat& ybr, const CVec& v, const Vec& mu,
                VoltageCoords c) {
  const CVec cmu = mu.cast<Complex>();
  const CQuad f = d2sbr_dv2(cbr, ybr, v, s.conjugate().cwiseProduct(cmu), c);
  const CSpMat dmu = diag(cmu);
  const CSpMat c1 = conj(ds.d1), c2 = conj(ds.d2);
  const CSpMat t1 = tr(ds.d1) * dmu, t2 = tr(ds.d2) * dmu;
  auto re2 = [](const CSpMat& m) { return SpMat(2.0 * m.real()); };
  return {re2(f.h11 + t1 * c1), re2(f.h12 + t1 * c2), re2(f.h21 + t2 * c1),
          re2(f.h22 + t2 * c2)};
}

}  // namespace gridopt::detail
