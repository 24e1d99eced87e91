#include "gridopt/ipm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>

#include <fmt/format.h>

#include "gridopt/error.hpp"

namespace gridopt {

namespace {

double inf_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

double max_or(const Vec& v, double fallback) {
  return v.size() ? v.maxCoeff() : fallback;
}

/// Row-sum norm of a sparse matrix.
double inf_norm(const SpMat& m) {
  Vec rows = Vec::Zero(m.rows());
  for (int j = 0; j < m.outerSize(); ++j)
    for (SpMat::InnerIterator it(m, j); it; ++it) rows(it.row()) += std::abs(it.value());
  return inf_norm(rows);
}

std::size_t vec_bytes(const Vec& v) {
  return static_cast<std::size_t>(v.size()) * sizeof(double);
}

std::size_t sp_bytes(const SpMat& m) {
  return static_cast<std::size_t>(m.nonZeros()) * (sizeof(double) + sizeof(int)) +
         static_cast<std::size_t>(m.outerSize() + 1) * sizeof(int);
}

bool finite(const Evaluation& ev) {
  return std::isfinite(ev.f) && ev.grad.allFinite() && ev.g.allFinite() &&
         ev.h.allFinite();
}

/// Lower triangle of [[W + δx·I, J_gᵀ], [J_g, −δg·I]], every diagonal entry
/// present.
SpMat reduced_matrix(const SpMat& w, const SpMat& jg, double dx, double dg) {
  const Index n = w.rows(), m = jg.rows();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(w.nonZeros() / 2 + jg.nonZeros() + n + m));
  for (int j = 0; j < w.outerSize(); ++j)
    for (SpMat::InnerIterator it(w, j); it; ++it)
      if (it.row() >= j) t.emplace_back(static_cast<int>(it.row()), j, it.value());
  for (int j = 0; j < jg.outerSize(); ++j)
    for (SpMat::InnerIterator it(jg, j); it; ++it)
      t.emplace_back(static_cast<int>(n + it.row()), j, it.value());
  for (Index i = 0; i < n; ++i) t.emplace_back(static_cast<int>(i), static_cast<int>(i), dx);
  for (Index i = 0; i < m; ++i)
    t.emplace_back(static_cast<int>(n + i), static_cast<int>(n + i), -dg);
  SpMat k(n + m, n + m);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::TimeLimit: return "TimeLimit";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
    case SolveStatus::Infeasible: return "Infeasible";
  }
  return "?";
}

std::string to_string(MuRule rule) {
  return rule == MuRule::ScaledComplementarity ? "sigma" : "fm";
}

BarrierProblem::BarrierProblem(const Nlp& nlp) : nlp_(&nlp) {
  const Vec& lb = nlp.x_min();
  const Vec& ub = nlp.x_max();
  for (Index i = 0; i < nlp.n(); ++i) {
    if (lb(i) == ub(i)) {
      pinned_.push_back(i);
      continue;
    }
    if (std::isfinite(ub(i))) upper_.push_back(i);
    if (std::isfinite(lb(i))) lower_.push_back(i);
  }
}

BarrierProblem to_barrier_form(const Nlp& nlp) { return BarrierProblem(nlp); }

Vec BarrierProblem::eval_g(const Vec& x) const {
  Vec g(m_eq());
  const Index m = nlp_->m_eq();
  g.head(m) = nlp_->eval_g(x);
  for (std::size_t k = 0; k < pinned_.size(); ++k)
    g(m + static_cast<Index>(k)) = x(pinned_[k]) - nlp_->x_min()(pinned_[k]);
  return g;
}

Vec BarrierProblem::eval_h(const Vec& x) const {
  Vec h(m_ineq());
  Index r = nlp_->m_ineq();
  h.head(r) = nlp_->eval_h(x);
  for (Index i : upper_) h(r++) = x(i) - nlp_->x_max()(i);
  for (Index i : lower_) h(r++) = nlp_->x_min()(i) - x(i);
  return h;
}

namespace {

/// Appends ±1 rows for the given variables below `base`.
SpMat stack_rows(const SpMat& base, Index n,
                 std::initializer_list<std::pair<const std::vector<Index>*, double>> parts) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(base.nonZeros()));
  for (int j = 0; j < base.outerSize(); ++j)
    for (SpMat::InnerIterator it(base, j); it; ++it)
      t.emplace_back(static_cast<int>(it.row()), j, it.value());
  Index r = base.rows();
  for (const auto& [vars, sign] : parts)
    for (Index i : *vars) t.emplace_back(static_cast<int>(r++), static_cast<int>(i), sign);
  SpMat out(r, n);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace

SpMat BarrierProblem::eval_jac_g(const Vec& x) const {
  return stack_rows(nlp_->eval_jac_g(x), n(), {{&pinned_, 1.0}});
}

SpMat BarrierProblem::eval_jac_h(const Vec& x) const {
  return stack_rows(nlp_->eval_jac_h(x), n(), {{&upper_, 1.0}, {&lower_, -1.0}});
}

SpMat BarrierProblem::eval_hessian(const Vec& x, double obj_weight,
                                   const Vec& lambda_g,
                                   const Vec& lambda_h) const {
  return nlp_->eval_hessian(x, obj_weight, lambda_g.head(nlp_->m_eq()),
                            lambda_h.head(nlp_->m_ineq()));
}

Evaluation evaluate(const BarrierProblem& bp, const Vec& x) {
  Evaluation ev;
  try {
    ev.f = bp.nlp().eval_f(x);
    ev.grad = bp.nlp().eval_grad_f(x);
    ev.g = bp.eval_g(x);
    ev.h = bp.eval_h(x);
    ev.jac_g = bp.eval_jac_g(x);
    ev.jac_h = bp.eval_jac_h(x);
  } catch (const Error& e) {
    throw Error(ErrorCode::EvalFailure, e.what());
  }
  return ev;
}

double KktResiduals::inf_norm() const {
  return std::max({gridopt::inf_norm(r_x), gridopt::inf_norm(r_s),
                   gridopt::inf_norm(r_g), gridopt::inf_norm(r_h)});
}

KktResiduals kkt_residuals(const Evaluation& ev, const IterateState& st) {
  KktResiduals r;
  r.r_x = ev.grad + ev.jac_g.transpose() * st.lam_g + ev.jac_h.transpose() * st.lam_h;
  r.r_s = st.lam_h.cwiseProduct(st.s).array() - st.mu;
  r.r_g = ev.g;
  r.r_h = ev.h + st.s;
  return r;
}

KktResiduals kkt_residuals(const BarrierProblem& bp, const IterateState& st) {
  return kkt_residuals(evaluate(bp, st.x), st);
}

KktConditions kkt_conditions(const Evaluation& ev, const IterateState& st,
                             const KktResiduals& r, double f_prev) {
  KktConditions c;
  const double xn = inf_norm(st.x);
  c.feas = std::max(inf_norm(ev.g), std::max(max_or(ev.h, 0.0), 0.0)) /
           (1.0 + std::max(xn, inf_norm(st.s)));
  c.grad = inf_norm(r.r_x) /
           (1.0 + std::max(inf_norm(st.lam_g), inf_norm(st.lam_h)));
  c.comp = st.s.dot(st.lam_h) / (1.0 + xn);
  c.cost = std::isnan(f_prev) ? 0.0 : std::abs(ev.f - f_prev) / (1.0 + std::abs(f_prev));
  return c;
}

NewtonStep newton_step(const BarrierProblem& bp, const IterateState& st,
                       const Evaluation& ev, SparseSym& solver,
                       const SolveOptions& /*opts*/) {
  const Index n = bp.n(), me = bp.m_eq();
  const KktResiduals r = kkt_residuals(ev, st);
  SpMat h;
  try {
    h = bp.eval_hessian(st.x, 1.0, st.lam_g, st.lam_h);
  } catch (const Error& e) {
    throw Error(ErrorCode::EvalFailure, e.what());
  }
  const Vec sigma = st.lam_h.cwiseQuotient(st.s);
  const SpMat jht = ev.jac_h.transpose();
  const SpMat w = h + SpMat(jht * (sigma.asDiagonal() * ev.jac_h));

  const Vec& lam = st.lam_h;
  const Vec& sl = st.s;

  NewtonStep step;
  const Inertia want{n, me, 0};
  const double h_norm = inf_norm(h);
  double dx = 0.0, dg = 0.0;
  for (;;) {
    const SpMat k = reduced_matrix(w, ev.jac_g, dx, dg);
    step.inertia = solver.factorize(k);
    ++step.factorizations;
    if (step.inertia == want) break;
    if (dx == 0.0) {
      dx = 1e-8 * (1.0 + h_norm);
      dg = 1e-10;
    } else {
      dx *= 10.0;
    }
    if (dx > 1e8)
      throw Error(ErrorCode::FactorizationBreakdown,
                  fmt::format("inertia ({}, {}, {}) after regularization up to 1e8",
                              step.inertia.pos, step.inertia.neg, step.inertia.zero));
  }
  step.delta_x = dx;
  step.delta_g = dg;

  // Solves the four-block system for right-hand side (b1, b2, b3, b4) through
  // the reduced matrix.
  struct Blocks {
    Vec x, s, lg, lh;
  };
  auto reduced_solve = [&](const Vec& b1, const Vec& b2, const Vec& b3,
                           const Vec& b4) {
    const Vec q = (b2 - lam.cwiseProduct(b4)).cwiseQuotient(sl);
    Vec rhs(n + me);
    rhs.head(n) = b1 - jht * q;
    rhs.tail(me) = b3;
    const Vec sol = solver.solve(rhs);
    Blocks d;
    d.x = sol.head(n);
    d.lg = sol.tail(me);
    d.s = b4 - ev.jac_h * d.x;
    d.lh = (b2 - lam.cwiseProduct(d.s)).cwiseQuotient(sl);
    return d;
  };
  auto residual = [&](const Blocks& d, Vec& e1, Vec& e2, Vec& e3, Vec& e4) {
    e1 = -r.r_x - (h * d.x + dx * d.x + ev.jac_g.transpose() * d.lg + jht * d.lh);
    e2 = -r.r_s - (lam.cwiseProduct(d.s) + sl.cwiseProduct(d.lh));
    e3 = -r.r_g - (ev.jac_g * d.x - dg * d.lg);
    e4 = -r.r_h - (ev.jac_h * d.x + d.s);
    return std::max({inf_norm(e1), inf_norm(e2), inf_norm(e3), inf_norm(e4)});
  };

  const double scale = 1.0 + r.inf_norm();
  Blocks d = reduced_solve(-r.r_x, -r.r_s, -r.r_g, -r.r_h);
  Vec e1, e2, e3, e4;
  double err = residual(d, e1, e2, e3, e4);
  // refinement on the unreduced system: large Σ makes the reduced right-hand
  // side cancel badly
  for (int it = 0; it < 10 && err > 1e-12 * scale; ++it) {
    const Blocks c = reduced_solve(e1, e2, e3, e4);
    Blocks t{d.x + c.x, d.s + c.s, d.lg + c.lg, d.lh + c.lh};
    Vec f1, f2, f3, f4;
    const double terr = residual(t, f1, f2, f3, f4);
    if (!(terr < err)) break;
    d = std::move(t);
    err = terr;
    e1.swap(f1);
    e2.swap(f2);
    e3.swap(f3);
    e4.swap(f4);
  }
  step.dx = std::move(d.x);
  step.ds = std::move(d.s);
  step.dlam_g = std::move(d.lg);
  step.dlam_h = std::move(d.lh);
  step.block_residual = err / scale;
  return step;
}

StepLengths fraction_to_boundary(const Vec& s, const Vec& ds, const Vec& lam,
                                 const Vec& dlam, double xi) {
  auto one = [xi](const Vec& v, const Vec& dv) {
    double ratio = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < v.size(); ++i)
      if (dv(i) < 0.0) ratio = std::min(ratio, -v(i) / dv(i));
    return std::isfinite(ratio) ? std::min(1.0, xi * ratio) : 1.0;
  };
  return {one(s, ds), one(lam, dlam)};
}

double update_mu(const IterateState& st, const SolveOptions& opts,
                 double subproblem_error) {
  if (opts.mu_rule == MuRule::ScaledComplementarity) {
    if (st.s.size() == 0) return st.mu;
    return opts.sigma * st.s.dot(st.lam_h) / static_cast<double>(st.s.size());
  }
  if (subproblem_error > 10.0 * st.mu) return st.mu;
  // floor per slack, so that sᵀλ ≈ m·μ can still fall below tol
  const double floor =
      opts.tol / (10.0 * std::max<double>(1.0, static_cast<double>(st.s.size())));
  return std::max(floor, std::min(opts.kappa * st.mu, std::pow(st.mu, opts.theta)));
}

double default_mu0(bool flat_start) { return flat_start ? 1.0 : 1e-2; }

std::string iteration_header() {
  return "#  it          objective   feascond   gradcond   compcond         mu"
         "    alpha_p    alpha_d    delta_x";
}

std::string format_iteration(const IterationRecord& rec) {
  return fmt::format("{:5d} {:18.10e} {:10.3e} {:10.3e} {:10.3e} {:10.3e} "
                     "{:10.3e} {:10.3e} {:10.3e}",
                     rec.k, rec.f, rec.cond.feas, rec.cond.grad, rec.cond.comp,
                     rec.mu, rec.alpha_p, rec.alpha_d, rec.delta_x);
}

namespace {

/// c·f with the constraints untouched.
class ScaledObjective final : public Nlp {
 public:
  ScaledObjective(const Nlp& base, double c) : base_(base), c_(c) {}

  Index n() const override { return base_.n(); }
  Index m_eq() const override { return base_.m_eq(); }
  Index m_ineq() const override { return base_.m_ineq(); }
  const Vec& x_min() const override { return base_.x_min(); }
  const Vec& x_max() const override { return base_.x_max(); }
  double eval_f(const Vec& x) const override { return c_ * base_.eval_f(x); }
  Vec eval_grad_f(const Vec& x) const override { return c_ * base_.eval_grad_f(x); }
  Vec eval_g(const Vec& x) const override { return base_.eval_g(x); }
  Vec eval_h(const Vec& x) const override { return base_.eval_h(x); }
  SpMat eval_jac_g(const Vec& x) const override { return base_.eval_jac_g(x); }
  SpMat eval_jac_h(const Vec& x) const override { return base_.eval_jac_h(x); }
  SpMat eval_hessian(const Vec& x, double w, const Vec& lg,
                     const Vec& lh) const override {
    return base_.eval_hessian(x, c_ * w, lg, lh);
  }

 private:
  const Nlp& base_;
  double c_;
};

}  // namespace

SolveResult ipm_solve(const Nlp& problem, const Vec& x0, const SolveOptions& opts) {
  const double c = opts.obj_scale;
  const ScaledObjective scaled(problem, c);
  const Nlp& nlp = c == 1.0 ? problem : static_cast<const Nlp&>(scaled);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };
  std::ostream* log = opts.verbose ? (opts.log ? opts.log : &std::clog) : nullptr;

  const BarrierProblem bp(nlp);
  const Index n = bp.n();
  const Vec& lb = nlp.x_min();
  const Vec& ub = nlp.x_max();
  SolveResult res;

  IterateState st;
  st.x = x0;
  for (Index i = 0; i < n; ++i) {
    if (lb(i) == ub(i)) {
      st.x(i) = lb(i);
      continue;
    }
    const double margin = std::isfinite(ub(i) - lb(i))
                              ? std::min(opts.bound_shift, 0.5 * (ub(i) - lb(i)))
                              : opts.bound_shift;
    if (std::isfinite(lb(i))) st.x(i) = std::max(st.x(i), lb(i) + margin);
    if (std::isfinite(ub(i))) st.x(i) = std::min(st.x(i), ub(i) - margin);
  }

  SparseSym solver(opts.linear);
  std::size_t peak = 0;
  auto finish = [&](SolveStatus status, std::string msg) {
    res.status = status;
    res.message = std::move(msg);
    res.x = st.x;
    res.s = st.s;
    res.lam_g = st.lam_g / c;
    res.lam_h = st.lam_h / c;
    res.wall_time = elapsed();
    res.peak_mem = peak;
    return res;
  };

  Evaluation ev;
  try {
    ev = evaluate(bp, st.x);
  } catch (const Error& e) {
    return finish(SolveStatus::NumericalFailure, e.what());
  }
  if (!finite(ev)) return finish(SolveStatus::NumericalFailure, "non-finite values at the start point");

  st.mu = opts.mu0;
  st.s = (-ev.h).cwiseMax(opts.bound_shift);
  st.lam_h = Vec::Constant(bp.m_ineq(), opts.mu0).cwiseQuotient(st.s);
  st.lam_g = Vec::Zero(bp.m_eq());

  if (log) *log << iteration_header() << '\n';
  double f_prev = std::numeric_limits<double>::quiet_NaN();
  double best_feas = std::numeric_limits<double>::infinity();
  int stall = 0;
  IterationRecord rec;

  for (st.k = 0;; ++st.k) {
    const KktResiduals r = kkt_residuals(ev, st);
    const KktConditions cond = kkt_conditions(ev, st, r, f_prev);
    res.f = ev.f / c;
    res.kkt = cond;
    res.iterations = st.k;

    rec = IterationRecord{};
    rec.k = st.k;
    rec.f = ev.f / c;
    rec.cond = cond;
    rec.mu = st.mu;
    rec.min_s = st.s.size() ? st.s.minCoeff() : 0.0;
    rec.min_lam = st.lam_h.size() ? st.lam_h.minCoeff() : 0.0;

    if (cond.satisfied(opts.tol)) {
      res.trace.push_back(rec);
      if (log) *log << format_iteration(rec) << '\n';
      return finish(SolveStatus::Optimal, "converged");
    }
    if (cond.feas > 1e3 * opts.tol) {
      if (cond.feas < best_feas * (1.0 - 1e-3)) {
        best_feas = cond.feas;
        stall = 0;
      } else if (++stall >= 50) {
        res.trace.push_back(rec);
        return finish(SolveStatus::Infeasible,
                      "primal infeasibility stalled for 50 iterations");
      }
    } else {
      best_feas = std::min(best_feas, cond.feas);
      stall = 0;
    }
    if (st.k >= opts.max_iter) {
      res.trace.push_back(rec);
      return finish(SolveStatus::MaxIter, "iteration limit");
    }
    if (elapsed() > opts.time_limit) {
      res.trace.push_back(rec);
      return finish(SolveStatus::TimeLimit, "time limit");
    }

    // barrier update, then the Newton step for the new subproblem
    if (bp.m_ineq() > 0) {
      const double sub_err = std::max({cond.feas, cond.grad, inf_norm(r.r_s)});
      st.mu = update_mu(st, opts, sub_err);
    }
    rec.mu = st.mu;

    NewtonStep step;
    try {
      step = newton_step(bp, st, ev, solver, opts);
    } catch (const Error& e) {
      res.trace.push_back(rec);
      return finish(SolveStatus::NumericalFailure, e.what());
    }
    res.factorization_count += step.factorizations;
    rec.delta_x = step.delta_x;
    rec.block_residual = step.block_residual;
    rec.factorizations = step.factorizations;
    if (!step.dx.allFinite() || !step.dlam_g.allFinite() || !step.dlam_h.allFinite()) {
      res.trace.push_back(rec);
      return finish(SolveStatus::NumericalFailure, "non-finite Newton direction");
    }

    const StepLengths alpha =
        fraction_to_boundary(st.s, step.ds, st.lam_h, step.dlam_h, opts.xi);
    double scale = 1.0;
    Evaluation next_ev;
    bool have_next = false;
    auto trial_state = [&](double t) {
      IterateState trial = st;
      trial.x += t * alpha.primal * step.dx;
      trial.s += t * alpha.primal * step.ds;
      trial.lam_g += t * alpha.dual * step.dlam_g;
      trial.lam_h += t * alpha.dual * step.dlam_h;
      return trial;
    };
    if (opts.step_control) {
      IterateState cur = st;  // residual at the current point under the new μ
      const double base = kkt_residuals(ev, cur).inf_norm();
      double t = 1.0;
      for (int halvings = 0; halvings <= 10; ++halvings, t *= 0.5) {
        const IterateState trial = trial_state(t);
        Evaluation tev;
        try {
          tev = evaluate(bp, trial.x);
        } catch (const Error&) {
          continue;
        }
        if (!finite(tev)) continue;
        const double norm = kkt_residuals(tev, trial).inf_norm();
        scale = t;
        next_ev = std::move(tev);
        have_next = true;
        if (norm <= 1.1 * base) break;
      }
      if (!have_next) {
        res.trace.push_back(rec);
        return finish(SolveStatus::NumericalFailure, "every trial step failed to evaluate");
      }
    }
    rec.alpha_p = scale * alpha.primal;
    rec.alpha_d = scale * alpha.dual;
    f_prev = ev.f;
    st = [&] {
      IterateState next = trial_state(scale);
      next.k = st.k;
      return next;
    }();
    res.trace.push_back(rec);
    if (log) *log << format_iteration(rec) << '\n';

    if (have_next) {
      ev = std::move(next_ev);
    } else {
      try {
        ev = evaluate(bp, st.x);
      } catch (const Error& e) {
        return finish(SolveStatus::NumericalFailure, e.what());
      }
    }
    if (!finite(ev)) return finish(SolveStatus::NumericalFailure, "non-finite function values");

    const std::size_t mem = 4 * vec_bytes(st.x) + 4 * (vec_bytes(st.s) + vec_bytes(st.lam_h)) +
                            4 * vec_bytes(st.lam_g) + sp_bytes(ev.jac_g) +
                            sp_bytes(ev.jac_h) + solver.bytes();
    peak = std::max(peak, mem);
  }
}

}  // namespace gridopt
