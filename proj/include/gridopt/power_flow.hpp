#pragma once

#include "gridopt/network.hpp"

namespace gridopt {

struct PfOptions {
  double tol = 1e-8;  // pu, infinity norm of the mismatch
  int max_iter = 30;
};

struct PfSolution {
  Vec vm, va;  // n_bus
  Vec pg, qg;  // n_gen, pu
  int iterations = 0;
  double max_mismatch = 0;
  bool converged = false;

  CVec voltage() const;
};

/// Polar Newton-Raphson on the PV/PQ mismatch equations, seeded from the case
/// voltages with generator set-points applied at PV and REF buses. No reactive
/// limit enforcement. Throws Error{Diverged, SingularJacobian}.
PfSolution newton_pf(const Network& net, const PfOptions& opts = {});

/// Power-flow mismatch f(Va, Vm) over the unknowns ordered as
/// [Va at PV and PQ buses; Vm at PQ buses] and its analytic Jacobian.
/// Exposed for derivative testing.
class PfMismatch {
 public:
  explicit PfMismatch(const Network& net);

  Index size() const { return static_cast<Index>(pvpq_.size() + pq_.size()); }
  Vec unknowns(const CVec& v) const;
  CVec voltage(const Vec& unknowns, const CVec& base) const;
  Vec residual(const CVec& v) const;
  SpMat jacobian(const CVec& v) const;

  const CVec& scheduled() const { return sbus_; }

 private:
  const Network& net_;
  std::vector<Index> pvpq_, pq_;
  CVec sbus_;
};

}  // namespace gridopt
