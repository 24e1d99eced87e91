#pragma once

#include <cstddef>
#include <vector>

#include "gridopt/types.hpp"

namespace gridopt {

struct Inertia {
  Index pos = 0, neg = 0, zero = 0;

  friend bool operator==(const Inertia&, const Inertia&) = default;
};

enum class Ordering { Amd, Natural };

/// Symbolic analysis of a symmetric pattern under a fill-reducing ordering,
/// assuming no pivoting. perm[k] is the original index eliminated k-th;
/// etree and col_counts refer to the permuted matrix; col_counts include
/// the diagonal.
struct Symbolic {
  std::vector<Index> perm;
  std::vector<Index> etree;
  std::vector<Index> col_counts;
  Index factor_nnz = 0;
};

/// `lower` holds the lower triangle of a symmetric matrix (only the pattern
/// is used). Deterministic for a fixed input.
Symbolic analyze(const SpMat& lower, Ordering ordering = Ordering::Amd);

/// Minimal interface for symmetric indefinite factorizations used by the
/// interior-point solver.
class LinearSolver {
 public:
  virtual ~LinearSolver() = default;
  virtual void analyze(const SpMat& lower) = 0;
  virtual Inertia factorize(const SpMat& lower) = 0;
  virtual Vec solve(const Vec& rhs) const = 0;
  virtual Inertia inertia() const = 0;
  /// Bytes held by the matrix copy and the factor.
  virtual std::size_t bytes() const = 0;
};

struct LdltOptions {
  Ordering ordering = Ordering::Amd;
  double pivot_threshold = 0.01;  // Bunch-Kaufman acceptance ratio
  double zero_tol = 1e-14;        // relative to max|diag|
  bool static_pivot = false;      // replace zero pivots instead of failing
  int refinement_steps = 1;
  /// Symmetric power-of-two scaling S·A·S with row maxima near 1 before the
  /// factorization; zero pivots are then judged on the scaled matrix.
  bool equilibrate = true;
};

/// Symmetric indefinite matrix with a sparse LDLᵀ factorization using 1×1
/// and 2×2 pivots. The ordering is computed once per sparsity pattern and
/// reused by later factorizations of matrices with the same pattern.
///
/// Zero pivots (|pivot| below zero_tol·max|diag| of the possibly equilibrated
/// matrix) are counted in the inertia.
/// A factor containing zero pivots cannot be used by solve() unless
/// static_pivot is set: solve() then throws Error{BreakdownPivot}. A
/// non-finite pivot makes factorize() throw Error{BreakdownPivot}.
class SparseSym final : public LinearSolver {
 public:
  explicit SparseSym(LdltOptions opts = {}) : opts_(opts) {}

  void analyze(const SpMat& lower) override;
  Inertia factorize(const SpMat& lower) override;
  /// Throws Error{NotFactorized} before the first successful factorize().
  Vec solve(const Vec& rhs) const override;
  Inertia inertia() const override { return inertia_; }
  std::size_t bytes() const override;

  Index dim() const { return n_; }
  bool factorized() const { return factorized_; }
  const Symbolic& symbolic() const { return symbolic_; }
  /// Off-diagonal entries of L actually produced (pivoting may add fill).
  Index factor_nnz() const { return static_cast<Index>(l_rows_.size()); }
  int analyze_count() const { return analyze_count_; }

  /// Dense factors for inspection: A(order, order) = L·D·Lᵀ with L unit
  /// lower triangular and D block diagonal.
  void dense_factors(Eigen::MatrixXd& l, Eigen::MatrixXd& d,
                     std::vector<Index>& order) const;

 private:
  struct Block {
    Index first;  // position in elim_
    int size;
    double d11, d12, d22;
  };

  bool same_pattern(const SpMat& lower) const;
  Vec solve_once(const Vec& rhs) const;

  LdltOptions opts_;
  Index n_ = 0;
  Symbolic symbolic_;
  std::vector<int> pattern_outer_, pattern_inner_;
  SpMat matrix_;  // lower triangle of the last factorized matrix
  bool factorized_ = false;
  int analyze_count_ = 0;
  Inertia inertia_;
  bool has_zero_ = false;
  std::size_t work_peak_bytes_ = 0;  // active-submatrix high-water mark

  std::vector<Index> elim_;  // original index eliminated at each position
  std::vector<Index> l_ptr_;  // per position, start into l_rows_/l_vals_
  std::vector<Index> l_rows_;
  std::vector<double> l_vals_;
  std::vector<Block> blocks_;
  std::vector<double> scaling_;  // S, all ones without equilibration
};

}  // namespace gridopt
