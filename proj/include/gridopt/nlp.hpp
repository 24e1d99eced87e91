#pragma once

#include <functional>

#include "gridopt/types.hpp"

namespace gridopt {

/// Smooth nonlinear program
///
///   min f(x)  s.t.  g(x) = 0,  h(x) <= 0,  x_min <= x <= x_max.
///
/// Jacobian and Hessian sparsity patterns must not depend on x. The Hessian
/// is that of the Lagrangian w·f + λ_gᵀg + λ_hᵀh, returned as a full
/// symmetric matrix.
class Nlp {
 public:
  virtual ~Nlp() = default;

  virtual Index n() const = 0;
  virtual Index m_eq() const = 0;
  virtual Index m_ineq() const = 0;
  virtual const Vec& x_min() const = 0;
  virtual const Vec& x_max() const = 0;

  virtual double eval_f(const Vec& x) const = 0;
  virtual Vec eval_grad_f(const Vec& x) const = 0;
  virtual Vec eval_g(const Vec& x) const = 0;
  virtual Vec eval_h(const Vec& x) const = 0;
  virtual SpMat eval_jac_g(const Vec& x) const = 0;
  virtual SpMat eval_jac_h(const Vec& x) const = 0;
  virtual SpMat eval_hessian(const Vec& x, double obj_weight,
                             const Vec& lambda_g,
                             const Vec& lambda_h) const = 0;
};

/// An Nlp assembled from callables; handy for small analytic problems.
class CallbackNlp final : public Nlp {
 public:
  Index n_ = 0, m_eq_ = 0, m_ineq_ = 0;
  Vec lower, upper;
  std::function<double(const Vec&)> f;
  std::function<Vec(const Vec&)> grad_f;
  std::function<Vec(const Vec&)> g, h;
  std::function<SpMat(const Vec&)> jac_g, jac_h;
  std::function<SpMat(const Vec&, double, const Vec&, const Vec&)> hessian;

  Index n() const override { return n_; }
  Index m_eq() const override { return m_eq_; }
  Index m_ineq() const override { return m_ineq_; }
  const Vec& x_min() const override { return lower; }
  const Vec& x_max() const override { return upper; }

  double eval_f(const Vec& x) const override { return f(x); }
  Vec eval_grad_f(const Vec& x) const override { return grad_f(x); }
  Vec eval_g(const Vec& x) const override {
    return g ? g(x) : Vec(Vec::Zero(m_eq_));
  }
  Vec eval_h(const Vec& x) const override {
    return h ? h(x) : Vec(Vec::Zero(m_ineq_));
  }
  SpMat eval_jac_g(const Vec& x) const override {
    return jac_g ? jac_g(x) : SpMat(m_eq_, n_);
  }
  SpMat eval_jac_h(const Vec& x) const override {
    return jac_h ? jac_h(x) : SpMat(m_ineq_, n_);
  }
  SpMat eval_hessian(const Vec& x, double w, const Vec& lg,
                     const Vec& lh) const override {
    return hessian(x, w, lg, lh);
  }
};

}  // namespace gridopt
