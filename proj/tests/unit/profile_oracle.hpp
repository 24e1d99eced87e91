#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gridopt/bench.hpp"

namespace test {

/// p_m(α) by direct enumeration of k(θ_ms, θ̃_s, α) = [θ_ms ≤ α·θ̃_s],
/// keyed by solver id, one value per alpha.
inline std::map<std::string, std::vector<double>> brute_profile(
    const std::vector<gridopt::RunRecord>& recs, gridopt::Metric metric,
    const std::vector<double>& alphas) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::set<std::string> solvers, problems;
  std::map<std::pair<std::string, std::string>, double> theta;
  for (const auto& r : recs) {
    solvers.insert(r.solver_id);
    problems.insert(r.problem_id);
    double v = r.success ? gridopt::metric_value(r, metric) : inf;
    if (v == 0) v = std::numeric_limits<double>::denorm_min();
    theta[{r.solver_id, r.problem_id}] = v;
  }
  auto get = [&](const std::string& m, const std::string& s) {
    auto it = theta.find({m, s});
    return it == theta.end() ? inf : it->second;
  };
  std::map<std::string, std::vector<double>> out;
  for (const auto& m : solvers) {
    std::vector<double> vals;
    for (double a : alphas) {
      int k = 0;
      for (const auto& s : problems) {
        double best = inf;
        for (const auto& m2 : solvers) best = std::min(best, get(m2, s));
        const double t = get(m, s);
        if (std::isfinite(t) && t <= a * best) ++k;
      }
      vals.push_back(static_cast<double>(k) / static_cast<double>(problems.size()));
    }
    out[m] = vals;
  }
  return out;
}

/// θ = [[2, 4], [1, 8], [∞, 3]]: rows are problems, columns solvers m1, m2.
inline std::vector<gridopt::RunRecord> two_solver_records() {
  const double t[3][2] = {{2, 4}, {1, 8}, {-1, 3}};
  std::vector<gridopt::RunRecord> recs;
  for (int s = 0; s < 3; ++s)
    for (int m = 0; m < 2; ++m) {
      gridopt::RunRecord r;
      r.solver_id = "m" + std::to_string(m + 1);
      r.problem_id = "s" + std::to_string(s + 1);
      r.success = t[s][m] > 0;
      r.iters = r.success ? t[s][m] : 500;
      r.time_s = r.iters;
      r.memory_bytes = r.iters;
      recs.push_back(r);
    }
  return recs;
}

/// Random records: up to 5 solvers, 9 problems; some failures, some missing
/// pairs, integer statistics half the time so that ties occur.
inline std::vector<gridopt::RunRecord> random_records(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ns_d(1, 5), np_d(1, 9), small(0, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int ns = ns_d(rng), np = np_d(rng);
  const bool ints = u(rng) < 0.5;
  std::vector<gridopt::RunRecord> recs;
  for (int m = 0; m < ns; ++m)
    for (int s = 0; s < np; ++s) {
      if (u(rng) < 0.05) continue;
      gridopt::RunRecord r;
      r.solver_id = "solver" + std::to_string(m);
      r.problem_id = "p" + std::to_string(s);
      r.success = u(rng) > 0.2;
      r.iters = ints ? small(rng) : std::exp(4.0 * u(rng));
      r.time_s = std::exp(6.0 * u(rng) - 3.0);
      r.memory_bytes = std::round(1e3 * std::exp(3.0 * u(rng)));
      recs.push_back(r);
    }
  if (recs.empty()) {
    gridopt::RunRecord r;
    r.solver_id = "solver0";
    r.problem_id = "p0";
    recs.push_back(r);
  }
  return recs;
}

}  // namespace test
