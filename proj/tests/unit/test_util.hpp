#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "gridopt/case_io.hpp"
#include "gridopt/network.hpp"
#include "gridopt/nlp.hpp"

namespace test {

inline std::string data_path(const std::string& name) {
  return std::string(GRIDOPT_TEST_DATA) + "/" + name;
}

inline std::shared_ptr<const gridopt::Network> load_net(const std::string& name) {
  return std::make_shared<const gridopt::Network>(
      gridopt::build_network(gridopt::load_case(data_path(name))));
}

/// max|a − b| / max(1, max|b|)
inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (b.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

/// Central-difference Jacobian of fn at x, one column per variable.
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& x, double step = 1e-6) {
  const Eigen::VectorXd f0 = fn(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(x(j)));
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    jac.col(j) = (fn(xp) - fn(xm)) / (2.0 * h);
  }
  return jac;
}

/// A random point strictly inside the box; free variables drawn from
/// [-0.5, 0.5], pinned variables at their value.
inline gridopt::Vec random_interior(const gridopt::Nlp& nlp, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95), free(-0.5, 0.5);
  gridopt::Vec x(nlp.n());
  for (gridopt::Index i = 0; i < nlp.n(); ++i) {
    const double lo = nlp.x_min()(i), hi = nlp.x_max()(i);
    if (lo == hi)
      x(i) = lo;
    else if (std::isfinite(lo) && std::isfinite(hi))
      x(i) = lo + u(rng) * (hi - lo);
    else
      x(i) = free(rng);
  }
  return x;
}

inline gridopt::Vec random_vec(gridopt::Index n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  gridopt::Vec v(n);
  for (gridopt::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// A small hand-built case: bus table rows are
/// [id type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin].
inline gridopt::CaseData one_bus_case(double load_mw, double lin_cost) {
  gridopt::CaseData c;
  c.name = "one_bus";
  c.base_mva = 100;
  c.bus.resize(1, 13);
  c.bus << 1, 3, load_mw, 0, 0, 0, 1, 1, 0, 230, 1, 1.1, 0.9;
  c.gen.resize(1, 10);
  c.gen << 1, 0, 0, 100, -100, 1, 100, 1, 500, 0;
  c.branch.resize(0, 13);
  c.gencost.resize(1, 6);
  c.gencost << 2, 0, 0, 2, lin_cost, 0;
  return c;
}

}  // namespace test
