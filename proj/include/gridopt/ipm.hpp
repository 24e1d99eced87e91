#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "gridopt/nlp.hpp"
#include "gridopt/sparse_ldlt.hpp"

namespace gridopt {

enum class MuRule { ScaledComplementarity, MonotoneFM };

enum class SolveStatus { Optimal, MaxIter, TimeLimit, NumericalFailure, Infeasible };

std::string to_string(SolveStatus status);
std::string to_string(MuRule rule);

struct SolveOptions {
  double tol = 1e-4;
  int max_iter = 500;
  double xi = 0.99995;  // fraction-to-boundary factor
  double mu0 = 1.0;
  MuRule mu_rule = MuRule::ScaledComplementarity;
  double sigma = 0.1;  // ScaledComplementarity
  double kappa = 0.2;  // MonotoneFM
  double theta = 1.5;  // MonotoneFM
  bool step_control = true;
  /// Distance kept from box bounds when the start point is clipped, and the
  /// floor of the initial slacks.
  double bound_shift = 1e-2;
  /// The solver works on obj_scale·f; convergence measures and μ refer to
  /// the scaled problem, while SolveResult and the log report f and the
  /// multipliers of the unscaled one.
  double obj_scale = 1.0;
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  bool verbose = false;
  std::ostream* log = nullptr;  // std::clog when verbose and unset
  LdltOptions linear{Ordering::Amd, 0.01, 1e-14, false, 2};
};

/// The problem with box bounds folded into the constraints:
///   g_b = [g(x); x_p − lb_p]                 (p: pinned, lb = ub)
///   h_b = [h(x); x_u − ub_u; lb_l − x_l]     (u, l: other finite bounds)
class BarrierProblem {
 public:
  explicit BarrierProblem(const Nlp& nlp);

  const Nlp& nlp() const { return *nlp_; }
  Index n() const { return nlp_->n(); }
  Index m_eq() const { return nlp_->m_eq() + static_cast<Index>(pinned_.size()); }
  Index m_ineq() const {
    return nlp_->m_ineq() + static_cast<Index>(upper_.size() + lower_.size());
  }
  const std::vector<Index>& pinned() const { return pinned_; }
  const std::vector<Index>& upper() const { return upper_; }
  const std::vector<Index>& lower() const { return lower_; }

  Vec eval_g(const Vec& x) const;
  Vec eval_h(const Vec& x) const;
  SpMat eval_jac_g(const Vec& x) const;
  SpMat eval_jac_h(const Vec& x) const;
  /// Bound rows are linear, so only the leading multipliers matter.
  SpMat eval_hessian(const Vec& x, double obj_weight, const Vec& lambda_g,
                     const Vec& lambda_h) const;

 private:
  const Nlp* nlp_;
  std::vector<Index> pinned_, upper_, lower_;
};

BarrierProblem to_barrier_form(const Nlp& nlp);

struct IterateState {
  Vec x, s, lam_g, lam_h;
  double mu = 1.0;
  int k = 0;
};

/// Function values and derivatives at one x.
struct Evaluation {
  double f = 0;
  Vec grad, g, h;
  SpMat jac_g, jac_h;
};

/// Throws Error{EvalFailure} when the problem cannot be evaluated at x.
Evaluation evaluate(const BarrierProblem& bp, const Vec& x);

struct KktResiduals {
  Vec r_x, r_s, r_g, r_h;

  double inf_norm() const;
};

KktResiduals kkt_residuals(const BarrierProblem& bp, const IterateState& st);
KktResiduals kkt_residuals(const Evaluation& ev, const IterateState& st);

struct KktConditions {
  double feas = 0, grad = 0, comp = 0, cost = 0;

  bool satisfied(double tol) const {
    return feas <= tol && grad <= tol && comp <= tol && cost <= tol;
  }
};

/// The four stopping measures; cost uses f_prev (pass NaN for none).
KktConditions kkt_conditions(const Evaluation& ev, const IterateState& st,
                             const KktResiduals& r, double f_prev);

struct NewtonStep {
  Vec dx, ds, dlam_g, dlam_h;
  double delta_x = 0, delta_g = 0;
  int factorizations = 0;
  Inertia inertia;
  /// max block residual of the (regularized) four-block linear system over
  /// 1 + its right-hand-side norm.
  double block_residual = 0;
};

/// Solves the reduced system for (Δx, Δλ_g), recovers Δs and Δλ_h, with
/// inertia correction. Throws Error{FactorizationBreakdown}.
NewtonStep newton_step(const BarrierProblem& bp, const IterateState& st,
                       const Evaluation& ev, SparseSym& solver,
                       const SolveOptions& opts);

struct StepLengths {
  double primal = 1, dual = 1;
};

StepLengths fraction_to_boundary(const Vec& s, const Vec& ds, const Vec& lam,
                                 const Vec& dlam, double xi);

/// subproblem_error is only consulted by MonotoneFM, whose floor is
/// tol/(10·m_ineq).
double update_mu(const IterateState& st, const SolveOptions& opts,
                 double subproblem_error);

struct IterationRecord {
  int k = 0;
  double f = 0;
  KktConditions cond;
  double mu = 0, alpha_p = 0, alpha_d = 0, delta_x = 0;
  double block_residual = 0;
  double min_s = 0, min_lam = 0;
  int factorizations = 0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::string message;
  Vec x;
  double f = std::numeric_limits<double>::quiet_NaN();
  Vec lam_g, lam_h, s;  // barrier-form sizes
  int iterations = 0;
  KktConditions kkt;
  double wall_time = 0;
  std::size_t peak_mem = 0;
  int factorization_count = 0;
  std::vector<IterationRecord> trace;
};

/// Default μ₀ for a start mode given by name: 1 for flat, 1e-2 otherwise.
double default_mu0(bool flat_start);

/// Formats one iteration-log line: k f feascond gradcond compcond mu
/// alpha_p alpha_d delta_x.
std::string format_iteration(const IterationRecord& rec);
std::string iteration_header();

SolveResult ipm_solve(const Nlp& nlp, const Vec& x0, const SolveOptions& opts = {});

}  // namespace gridopt
