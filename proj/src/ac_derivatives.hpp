#pragma once

// First and second derivatives of bus injections, current mismatches and
// branch flows with respect to polar (Va, Vm) or Cartesian (Vr, Vi) voltage
// coordinates. Second-derivative routines return λ-weighted sums, i.e. the
// Hessian of λᵀF(V) split into 2×2 blocks over the two voltage slices.

#include "gridopt/opf.hpp"
#include "gridopt/types.hpp"

namespace gridopt::detail {

struct CPair {
  CSpMat d1, d2;
};

struct CQuad {
  CSpMat h11, h12, h21, h22;
};

struct RQuad {
  SpMat h11, h12, h21, h22;
};

/// dS/dV for S = diag(V)·conj(Ybus·V).
CPair dsbus_dv(const CSpMat& ybus, const CVec& v, VoltageCoords c);
CQuad d2sbus_dv2(const CSpMat& ybus, const CVec& v, const CVec& lam,
                 VoltageCoords c);

/// dI/dV for I = Ybus·V − conj(Sbus/V) with Sbus held fixed.
CPair dimis_dv(const CVec& sbus, const CSpMat& ybus, const CVec& v,
               VoltageCoords c);
CQuad d2imis_dv2(const CVec& sbus, const CSpMat& ybus, const CVec& v,
                 const CVec& lam, VoltageCoords c);
/// Mixed second derivatives of λᵀI w.r.t. (Pg, Qg) and V. Blocks are
/// h11 = Pg×V1, h12 = Pg×V2, h21 = Qg×V1, h22 = Qg×V2 (ng × nb each).
CQuad d2imis_dvdsg(const CSpMat& cg, const CVec& v, const CVec& lam,
                   VoltageCoords c);

/// dS/dV for branch-end flows S = diag(Cbr·V)·conj(Ybr·V).
CPair dsbr_dv(const CSpMat& ybr, const CSpMat& cbr, const CVec& v,
              VoltageCoords c);
CQuad d2sbr_dv2(const CSpMat& cbr, const CSpMat& ybr, const CVec& v,
                const CVec& mu, VoltageCoords c);

/// Hessian of muᵀ|S|² given S and its first derivatives.
RQuad d2abr_dv2(const CPair& ds, const CVec& s, const CSpMat& cbr,
                const CSpMat& ybr, const CVec& v, const Vec& mu,
                VoltageCoords c);

}  // namespace gridopt::detail
