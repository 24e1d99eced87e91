#pragma once

#include <complex>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace gridopt {

using Index = Eigen::Index;
using Complex = std::complex<double>;

using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using IndexVec = Eigen::Matrix<Index, Eigen::Dynamic, 1>;

template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;

using SpMat = SparseMatrix<double>;
using CSpMat = SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<double, int>;
using CTriplet = Eigen::Triplet<Complex, int>;

/// Sparse diagonal matrix with an explicit (possibly zero) entry on every
/// diagonal position, so the structure never depends on the values.
template <typename Derived>
SparseMatrix<typename Derived::Scalar> sparse_diagonal(
    const Eigen::MatrixBase<Derived>& d) {
  using Scalar = typename Derived::Scalar;
  SparseMatrix<Scalar> m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (Index i = 0; i < d.size(); ++i) m.insert(i, i) = d(i);
  m.makeCompressed();
  return m;
}

}  // namespace gridopt
