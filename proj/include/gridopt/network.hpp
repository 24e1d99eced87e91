#pragma once

#include <string>
#include <vector>

#include "gridopt/case_io.hpp"
#include "gridopt/types.hpp"

namespace gridopt {

enum class BusType { PQ = 1, PV = 2, Ref = 3, Isolated = 4 };

struct Bus {
  double id = 0;  // external bus number
  BusType type = BusType::PQ;
  double pd = 0, qd = 0;  // pu
  double gs = 0, bs = 0;  // pu (already divided by base MVA)
  double vm0 = 1, va0 = 0;  // pu, rad
  double vmin = 0, vmax = 0;  // pu
};

/// Cost polynomial of a generator output in MW: c[0] + c[1]·P + c[2]·P² + ...
/// `model` is the gencost MODEL column (2 = polynomial).
struct CostCurve {
  int model = 2;
  std::vector<double> coeffs;  // ascending powers

  double value(double p_mw) const;
  double derivative(double p_mw) const;
  double second_derivative(double p_mw) const;
};

struct Generator {
  Index bus = 0;  // internal bus index
  double pg0 = 0, qg0 = 0;  // pu
  double pmin = 0, pmax = 0, qmin = 0, qmax = 0;  // pu
  double vg = 1;  // pu
  CostCurve cost;
  std::vector<CostCurve> q_cost;  // empty, or one curve for reactive output
  Index source_row = 0;  // row in the case gen table
};

struct Branch {
  Index from = 0, to = 0;
  Complex ys;  // series admittance
  double bc = 0;  // total line charging
  double tap = 1;  // never 0
  double shift = 0;  // rad
  double rate = 0;  // pu MVA, 0 = unlimited
  double angmin = 0, angmax = 0;  // rad, parsed but not enforced
  Index source_row = 0;

  Complex yff() const;
  Complex yft() const;
  Complex ytf() const;
  Complex ytt() const;
};

/// Validated per-unit grid model. Out-of-service generators and branches are
/// not part of the model at all. Immutable after construction.
struct Network {
  std::string name;
  double base_mva = 100;
  std::vector<Bus> buses;
  std::vector<Generator> gens;
  std::vector<Branch> branches;
  Index ref_bus = 0;

  CSpMat ybus;  // n_bus x n_bus
  CSpMat yf, yt;  // n_branch x n_bus
  SpMat cf, ct;  // branch-bus incidence, n_branch x n_bus
  SpMat cg;  // bus-generator incidence, n_bus x n_gen

  Index n_bus() const { return static_cast<Index>(buses.size()); }
  Index n_gen() const { return static_cast<Index>(gens.size()); }
  Index n_branch() const { return static_cast<Index>(branches.size()); }

  /// Indices of branches with a finite flow rating.
  std::vector<Index> limited_branches() const;

  /// Complex demand per bus, pu.
  CVec demand() const;
  CVec shunt_admittance() const;
};

/// Throws Error{NoRefBus, MultipleRefBus, DanglingGen, ZeroImpedanceBranch,
/// IsolatedBus}.
Network build_network(const CaseData& c);

/// Branch power injections at both ends for a bus voltage vector.
struct BranchFlows {
  CVec from, to;
};
BranchFlows branch_flows(const Network& net, const CVec& v);

/// Complex power injected into the network at each bus, diag(V)·conj(Ybus·V).
CVec bus_injection(const Network& net, const CVec& v);

}  // namespace gridopt
