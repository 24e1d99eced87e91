#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "gridopt/network.hpp"
#include "gridopt/nlp.hpp"
#include "gridopt/power_flow.hpp"

namespace gridopt {

enum class VoltageCoords { Polar, Cartesian };
enum class BalanceKind { Power, Current };

struct Formulation {
  VoltageCoords voltage = VoltageCoords::Polar;
  BalanceKind balance = BalanceKind::Power;

  /// "polar-power", "polar-current", "cart-power", "cart-current".
  static Formulation parse(std::string_view name);
  std::string name() const;

  friend bool operator==(const Formulation&, const Formulation&) = default;
};

inline constexpr Formulation kAllFormulations[] = {
    {VoltageCoords::Polar, BalanceKind::Power},
    {VoltageCoords::Polar, BalanceKind::Current},
    {VoltageCoords::Cartesian, BalanceKind::Power},
    {VoltageCoords::Cartesian, BalanceKind::Current},
};

/// Slices of x: polar [Va; Vm; Pg; Qg], Cartesian [Vr; Vi; Pg; Qg].
struct VarLayout {
  Index nb = 0, ng = 0;

  Index v1() const { return 0; }
  Index v2() const { return nb; }
  Index pg() const { return 2 * nb; }
  Index qg() const { return 2 * nb + ng; }
  Index size() const { return 2 * nb + 2 * ng; }
};

/// AC OPF in one of the four formulations, with analytic first and second
/// derivatives.
///
/// Equalities: [Re; Im] of the nodal power or current mismatch (2·nb rows),
/// plus Vi[ref] = 0 last in Cartesian form. Inequalities: squared apparent
/// power at both ends of every rated branch (from rows, then to rows), then
/// in Cartesian form the magnitude corridor Vmin² − |V|² ≤ 0 (nb rows) and
/// |V|² − Vmax² ≤ 0 (nb rows).
class OpfProblem final : public Nlp {
 public:
  OpfProblem(std::shared_ptr<const Network> net, Formulation form);

  Index n() const override { return layout_.size(); }
  Index m_eq() const override { return m_eq_; }
  Index m_ineq() const override { return m_ineq_; }
  const Vec& x_min() const override { return x_min_; }
  const Vec& x_max() const override { return x_max_; }

  double eval_f(const Vec& x) const override;
  Vec eval_grad_f(const Vec& x) const override;
  Vec eval_g(const Vec& x) const override;
  Vec eval_h(const Vec& x) const override;
  SpMat eval_jac_g(const Vec& x) const override;
  SpMat eval_jac_h(const Vec& x) const override;
  SpMat eval_hessian(const Vec& x, double obj_weight, const Vec& lambda_g,
                     const Vec& lambda_h) const override;

  const Network& network() const { return *net_; }
  const Formulation& formulation() const { return form_; }
  const VarLayout& layout() const { return layout_; }
  Index n_limited() const { return static_cast<Index>(limited_.size()); }

  /// Complex bus voltages encoded in x.
  CVec voltage(const Vec& x) const;
  /// Writes voltages into the voltage slices of x.
  void set_voltage(Vec& x, const CVec& v) const;
  /// Net complex injection Cg·(Pg + jQg) − Sd at every bus.
  CVec net_injection(const Vec& x) const;

 private:
  void check_domain(const CVec& v) const;

  std::shared_ptr<const Network> net_;
  Formulation form_;
  VarLayout layout_;
  Index m_eq_ = 0, m_ineq_ = 0;
  Vec x_min_, x_max_;
  std::vector<Index> limited_;
  CSpMat yf_lim_, yt_lim_;  // rows of Yf/Yt for rated branches
  SpMat cf_lim_, ct_lim_;
  Vec rate2_;  // squared ratings of rated branches
  CSpMat cg_c_;  // complex copy of Cg
};

/// Throws Error{UnsupportedCost} for piecewise-linear or degree > 3 costs.
OpfProblem build_nlp(std::shared_ptr<const Network> net, Formulation form);

enum class StartMode { Flat, CaseData, PfSolve };

StartMode parse_start_mode(std::string_view name);  // flat | mpc | pf
std::string to_string(StartMode mode);

/// Initial point. Flat: bound midpoints, lb + 1 or ub − 1 for one-sided
/// bounds, 0 when free; Cartesian voltages start at the midpoint of the
/// magnitude corridor on the real axis. CaseData and PfSolve map case or
/// power-flow values into the layout (rotated so the reference angle is zero
/// in Cartesian form) and clip into the bounds. Throws Error{PfDiverged}.
Vec initial_guess(const OpfProblem& prob, StartMode mode,
                  const PfOptions& pf_opts = {});

}  // namespace gridopt
