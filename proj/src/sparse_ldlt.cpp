#include "gridopt/sparse_ldlt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/OrderingMethods>
#include <fmt/format.h>

#include "gridopt/error.hpp"

namespace gridopt {

namespace {

struct Entry {
  Index row;
  double val;
};

/// Lower triangle pattern of P·A·Pᵀ, with inv[old] = new.
SpMat permuted_pattern(const SpMat& lower, const std::vector<Index>& inv) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(lower.nonZeros()));
  for (int j = 0; j < lower.outerSize(); ++j)
    for (SpMat::InnerIterator it(lower, j); it; ++it) {
      const Index a = inv[static_cast<std::size_t>(it.row())];
      const Index b = inv[static_cast<std::size_t>(j)];
      t.emplace_back(static_cast<int>(std::max(a, b)),
                     static_cast<int>(std::min(a, b)), 1.0);
    }
  SpMat c(lower.rows(), lower.cols());
  c.setFromTriplets(t.begin(), t.end());
  return c;
}

/// Symmetric Ruiz equilibration of a lower triangle, rounded to powers of two
/// so that scaling introduces no rounding error.
std::vector<double> ruiz_scaling(const SpMat& lower) {
  const auto n = static_cast<std::size_t>(lower.rows());
  std::vector<double> s(n, 1.0), rmax(n);
  for (int iter = 0; iter < 20; ++iter) {
    std::fill(rmax.begin(), rmax.end(), 0.0);
    for (int j = 0; j < lower.outerSize(); ++j)
      for (SpMat::InnerIterator it(lower, j); it; ++it) {
        const auto i = static_cast<std::size_t>(it.row());
        const auto c = static_cast<std::size_t>(j);
        const double a = std::abs(it.value()) * s[i] * s[c];
        rmax[i] = std::max(rmax[i], a);
        rmax[c] = std::max(rmax[c], a);
      }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (rmax[i] == 0.0 || !std::isfinite(rmax[i])) continue;
      worst = std::max(worst, std::abs(1.0 - rmax[i]));
      s[i] /= std::sqrt(rmax[i]);
    }
    if (worst < 0.1) break;
  }
  for (double& v : s) v = std::exp2(std::round(std::log2(v)));
  return s;
}

}  // namespace

Symbolic analyze(const SpMat& lower, Ordering ordering) {
  const Index n = lower.rows();
  Symbolic s;
  s.perm.resize(static_cast<std::size_t>(n));
  std::iota(s.perm.begin(), s.perm.end(), Index{0});
  if (ordering == Ordering::Amd && n > 0) {
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
    Eigen::AMDOrdering<int> amd;
    amd(lower, p);
    for (Index k = 0; k < n; ++k) s.perm[static_cast<std::size_t>(k)] = p.indices()(k);
  }
  std::vector<Index> inv(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) inv[static_cast<std::size_t>(s.perm[static_cast<std::size_t>(k)])] = k;

  // rows of the permuted lower triangle = columns of its transpose
  const SpMat upper = permuted_pattern(lower, inv).transpose();

  s.etree.assign(static_cast<std::size_t>(n), -1);
  std::vector<Index> ancestor(static_cast<std::size_t>(n), -1);
  for (Index k = 0; k < n; ++k) {
    for (SpMat::InnerIterator it(upper, static_cast<int>(k)); it; ++it) {
      Index i = it.row();
      while (i != -1 && i < k) {
        const Index next = ancestor[static_cast<std::size_t>(i)];
        ancestor[static_cast<std::size_t>(i)] = k;
        if (next == -1) s.etree[static_cast<std::size_t>(i)] = k;
        i = next;
      }
    }
  }

  // row subtrees: every node on the path from j to i in the etree gains an
  // entry in row i
  s.col_counts.assign(static_cast<std::size_t>(n), 1);
  std::vector<Index> mark(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    mark[static_cast<std::size_t>(i)] = i;
    for (SpMat::InnerIterator it(upper, static_cast<int>(i)); it; ++it) {
      Index p = it.row();
      while (p != -1 && p < i && mark[static_cast<std::size_t>(p)] != i) {
        ++s.col_counts[static_cast<std::size_t>(p)];
        mark[static_cast<std::size_t>(p)] = i;
        p = s.etree[static_cast<std::size_t>(p)];
      }
    }
  }
  s.factor_nnz = std::accumulate(s.col_counts.begin(), s.col_counts.end(), Index{0});
  return s;
}

bool SparseSym::same_pattern(const SpMat& lower) const {
  if (lower.rows() != n_ || !lower.isCompressed()) return false;
  const auto nz = static_cast<std::size_t>(lower.nonZeros());
  return pattern_inner_.size() == nz &&
         std::equal(pattern_outer_.begin(), pattern_outer_.end(),
                    lower.outerIndexPtr()) &&
         std::equal(pattern_inner_.begin(), pattern_inner_.end(),
                    lower.innerIndexPtr());
}

void SparseSym::analyze(const SpMat& lower_in) {
  SpMat lower = lower_in.triangularView<Eigen::Lower>();
  lower.makeCompressed();
  n_ = lower.rows();
  symbolic_ = gridopt::analyze(lower, opts_.ordering);
  pattern_outer_.assign(lower.outerIndexPtr(), lower.outerIndexPtr() + n_ + 1);
  pattern_inner_.assign(lower.innerIndexPtr(),
                        lower.innerIndexPtr() + lower.nonZeros());
  factorized_ = false;
  ++analyze_count_;
}

Inertia SparseSym::factorize(const SpMat& lower_in) {
  SpMat lower = lower_in.triangularView<Eigen::Lower>();
  lower.makeCompressed();
  if (lower.rows() != lower.cols())
    throw Error(ErrorCode::FactorizationBreakdown, "matrix is not square");
  if (!same_pattern(lower)) analyze(lower);
  factorized_ = false;

  const auto n = static_cast<std::size_t>(n_);
  if (opts_.equilibrate)
    scaling_ = ruiz_scaling(lower);
  else
    scaling_.assign(n, 1.0);
  std::vector<double> diag(n, 0.0);
  std::vector<std::vector<Entry>> cols(n);
  double scale = 0.0, entry_max = 0.0;
  for (int j = 0; j < lower.outerSize(); ++j)
    for (SpMat::InnerIterator it(lower, j); it; ++it) {
      const auto i = static_cast<std::size_t>(it.row());
      const double v = it.value() * scaling_[i] * scaling_[static_cast<std::size_t>(j)];
      entry_max = std::max(entry_max, std::abs(v));
      if (i == static_cast<std::size_t>(j)) {
        diag[i] += v;
      } else {
        cols[static_cast<std::size_t>(j)].push_back({it.row(), v});
        cols[i].push_back({j, v});
      }
    }
  for (double d : diag) scale = std::max(scale, std::abs(d));
  if (scale == 0.0) scale = entry_max;
  const double thresh = opts_.zero_tol * scale;
  const double alpha = opts_.pivot_threshold;

  const std::vector<Index>& perm = symbolic_.perm;
  std::vector<Index> order_pos(n);
  for (std::size_t k = 0; k < n; ++k) order_pos[static_cast<std::size_t>(perm[k])] = static_cast<Index>(k);
  std::vector<char> gone(n, 0);
  std::vector<Index> where(n, -1);

  elim_.clear();
  l_ptr_.assign(1, 0);
  l_rows_.clear();
  l_vals_.clear();
  blocks_.clear();
  inertia_ = Inertia{};
  has_zero_ = false;
  std::size_t live = 0, peak = 0;
  for (const auto& c : cols) live += c.size();
  peak = live;

  auto compact = [&](std::size_t c) {
    auto& v = cols[c];
    const std::size_t before = v.size();
    v.erase(std::remove_if(v.begin(), v.end(),
                           [&](const Entry& e) { return gone[static_cast<std::size_t>(e.row)] != 0; }),
            v.end());
    live -= before - v.size();
  };
  // largest off-diagonal magnitude in column c; ties go to the earlier
  // position in the ordering
  auto col_max = [&](std::size_t c, Index& arg) {
    double best = 0.0;
    arg = -1;
    for (const Entry& e : cols[c]) {
      const double a = std::abs(e.val);
      if (!std::isfinite(a))
        throw Error(ErrorCode::BreakdownPivot,
                    fmt::format("non-finite entry in column {}", c));
      if (a > best || (a == best && arg >= 0 && a > 0.0 &&
                       order_pos[static_cast<std::size_t>(e.row)] <
                           order_pos[static_cast<std::size_t>(arg)])) {
        best = a;
        arg = e.row;
      }
    }
    return best;
  };
  auto count_eigen = [&](double lam) {
    if (std::abs(lam) <= thresh) {
      ++inertia_.zero;
      has_zero_ = true;
    } else if (lam > 0) {
      ++inertia_.pos;
    } else {
      ++inertia_.neg;
    }
  };
  // subtracts upd(idx) from column j at every row rows[idx] except j
  auto update_col = [&](std::size_t j, const std::vector<Index>& rows,
                        auto&& upd) {
    auto& c = cols[j];
    std::size_t w = 0;
    for (std::size_t t = 0; t < c.size(); ++t) {
      if (gone[static_cast<std::size_t>(c[t].row)]) continue;
      c[w] = c[t];
      where[static_cast<std::size_t>(c[w].row)] = static_cast<Index>(w);
      ++w;
    }
    live -= c.size() - w;
    c.resize(w);
    for (std::size_t idx = 0; idx < rows.size(); ++idx) {
      const auto i = static_cast<std::size_t>(rows[idx]);
      if (i == j) continue;
      const double v = upd(idx);
      if (where[i] >= 0) {
        c[static_cast<std::size_t>(where[i])].val -= v;
      } else {
        where[i] = static_cast<Index>(c.size());
        c.push_back({rows[idx], -v});
        ++live;
      }
    }
    for (const Entry& e : c) where[static_cast<std::size_t>(e.row)] = -1;
  };
  auto retire = [&](std::size_t p) {
    gone[p] = 1;
    live -= cols[p].size();
    std::vector<Entry>().swap(cols[p]);
  };

  std::vector<Index> rows;
  std::vector<double> u1, u2;
  std::size_t next = 0;
  while (next < n) {
    const auto k = static_cast<std::size_t>(perm[next]);
    if (gone[k]) {
      ++next;
      continue;
    }
    compact(k);
    Index r = -1;
    const double w1 = col_max(k, r);
    const double akk = diag[k];
    if (!std::isfinite(akk))
      throw Error(ErrorCode::BreakdownPivot,
                  fmt::format("non-finite pivot at column {}", k));

    if (std::max(std::abs(akk), w1) <= thresh) {
      // numerically zero row and column
      double d = 0.0;
      if (opts_.static_pivot)
        d = (akk < 0 ? -1.0 : 1.0) * std::max(thresh, 1e-8 * scale);
      ++inertia_.zero;
      if (!opts_.static_pivot) has_zero_ = true;
      blocks_.push_back({static_cast<Index>(elim_.size()), 1, d, 0.0, 0.0});
      elim_.push_back(static_cast<Index>(k));
      l_ptr_.push_back(static_cast<Index>(l_rows_.size()));
      retire(k);
      continue;
    }

    std::size_t p1 = k;
    bool two = false;
    if (std::abs(akk) < alpha * w1) {
      const auto rr = static_cast<std::size_t>(r);
      compact(rr);
      Index dummy;
      const double wr = col_max(rr, dummy);
      if (std::abs(akk) * wr >= alpha * w1 * w1) {
        p1 = k;
      } else if (std::abs(diag[rr]) >= alpha * wr) {
        p1 = rr;
      } else {
        two = true;
      }
    }

    if (!two) {
      const double d = diag[p1];
      rows.clear();
      u1.clear();
      for (const Entry& e : cols[p1]) {
        rows.push_back(e.row);
        u1.push_back(e.val);
      }
      blocks_.push_back({static_cast<Index>(elim_.size()), 1, d, 0.0, 0.0});
      elim_.push_back(static_cast<Index>(p1));
      for (std::size_t t = 0; t < rows.size(); ++t) {
        l_rows_.push_back(rows[t]);
        l_vals_.push_back(u1[t] / d);
      }
      l_ptr_.push_back(static_cast<Index>(l_rows_.size()));
      count_eigen(d);
      retire(p1);
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const auto j = static_cast<std::size_t>(rows[a]);
        const double uj = u1[a];
        diag[j] -= (uj * uj) / d;
        update_col(j, rows, [&](std::size_t b) { return (u1[b] * uj) / d; });
      }
    } else {
      const auto rr = static_cast<std::size_t>(r);
      rows.clear();
      u1.clear();
      u2.clear();
      double akr = 0.0;
      for (const Entry& e : cols[k]) {
        if (static_cast<std::size_t>(e.row) == rr) {
          akr = e.val;
          continue;
        }
        where[static_cast<std::size_t>(e.row)] = static_cast<Index>(rows.size());
        rows.push_back(e.row);
        u1.push_back(e.val);
        u2.push_back(0.0);
      }
      for (const Entry& e : cols[rr]) {
        if (static_cast<std::size_t>(e.row) == k) continue;
        Index& slot = where[static_cast<std::size_t>(e.row)];
        if (slot < 0) {
          slot = static_cast<Index>(rows.size());
          rows.push_back(e.row);
          u1.push_back(0.0);
          u2.push_back(e.val);
        } else {
          u2[static_cast<std::size_t>(slot)] = e.val;
        }
      }
      for (Index i : rows) where[static_cast<std::size_t>(i)] = -1;

      const double d11 = akk, d12 = akr, d22 = diag[rr];
      const double det = d11 * d22 - d12 * d12;
      if (!(std::isfinite(det)) || det == 0.0)
        throw Error(ErrorCode::BreakdownPivot,
                    fmt::format("singular 2x2 pivot at columns {}, {}", k, rr));
      const double i11 = d22 / det, i12 = -d12 / det, i22 = d11 / det;

      blocks_.push_back({static_cast<Index>(elim_.size()), 2, d11, d12, d22});
      elim_.push_back(static_cast<Index>(k));
      for (std::size_t t = 0; t < rows.size(); ++t) {
        l_rows_.push_back(rows[t]);
        l_vals_.push_back(u1[t] * i11 + u2[t] * i12);
      }
      l_ptr_.push_back(static_cast<Index>(l_rows_.size()));
      elim_.push_back(static_cast<Index>(rr));
      for (std::size_t t = 0; t < rows.size(); ++t) {
        l_rows_.push_back(rows[t]);
        l_vals_.push_back(u1[t] * i12 + u2[t] * i22);
      }
      l_ptr_.push_back(static_cast<Index>(l_rows_.size()));

      const double half_tr = 0.5 * (d11 + d22);
      const double rad = std::hypot(0.5 * (d11 - d22), d12);
      count_eigen(half_tr + rad);
      count_eigen(half_tr - rad);
      retire(k);
      retire(rr);
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const auto j = static_cast<std::size_t>(rows[a]);
        const double a1 = u1[a], a2 = u2[a];
        diag[j] -= i11 * (a1 * a1) + i12 * (a1 * a2 + a2 * a1) + i22 * (a2 * a2);
        update_col(j, rows, [&](std::size_t b) {
          return i11 * (u1[b] * a1) + i12 * (u1[b] * a2 + u2[b] * a1) +
                 i22 * (u2[b] * a2);
        });
      }
    }
    peak = std::max(peak, live);
  }
  work_peak_bytes_ = peak * sizeof(Entry);

  matrix_ = std::move(lower);
  factorized_ = true;
  return inertia_;
}

Vec SparseSym::solve_once(const Vec& rhs) const {
  Vec y = rhs;
  const std::size_t n = elim_.size();
  for (std::size_t p = 0; p < n; ++p) {
    const double yc = y(elim_[p]);
    if (yc == 0.0) continue;
    for (Index t = l_ptr_[p]; t < l_ptr_[p + 1]; ++t)
      y(l_rows_[static_cast<std::size_t>(t)]) -= l_vals_[static_cast<std::size_t>(t)] * yc;
  }
  for (const Block& b : blocks_) {
    const Index c1 = elim_[static_cast<std::size_t>(b.first)];
    if (b.size == 1) {
      if (b.d11 == 0.0)
        throw Error(ErrorCode::BreakdownPivot,
                    fmt::format("zero pivot at column {}", c1));
      y(c1) /= b.d11;
    } else {
      const Index c2 = elim_[static_cast<std::size_t>(b.first) + 1];
      const double det = b.d11 * b.d22 - b.d12 * b.d12;
      const double y1 = y(c1), y2 = y(c2);
      y(c1) = (b.d22 * y1 - b.d12 * y2) / det;
      y(c2) = (b.d11 * y2 - b.d12 * y1) / det;
    }
  }
  for (std::size_t p = n; p-- > 0;) {
    const Index c = elim_[p];
    double s = y(c);
    for (Index t = l_ptr_[p]; t < l_ptr_[p + 1]; ++t)
      s -= l_vals_[static_cast<std::size_t>(t)] * y(l_rows_[static_cast<std::size_t>(t)]);
    y(c) = s;
  }
  return y;
}

Vec SparseSym::solve(const Vec& rhs) const {
  if (!factorized_) throw Error(ErrorCode::NotFactorized, "solve before factorize");
  if (rhs.size() != n_)
    throw Error(ErrorCode::NotFactorized,
                fmt::format("rhs has size {}, matrix has dimension {}",
                            rhs.size(), n_));
  if (has_zero_)
    throw Error(ErrorCode::BreakdownPivot,
                fmt::format("factor has {} zero pivots", inertia_.zero));
  const Eigen::Map<const Vec> sc(scaling_.data(), n_);
  auto scaled_solve = [&](const Vec& b) -> Vec {
    return sc.cwiseProduct(solve_once(sc.cwiseProduct(b)));
  };
  Vec x = scaled_solve(rhs);
  for (int s = 0; s < opts_.refinement_steps; ++s) {
    const Vec r = rhs - matrix_.selfadjointView<Eigen::Lower>() * x;
    if (r.lpNorm<Eigen::Infinity>() == 0.0) break;
    x += scaled_solve(r);
  }
  return x;
}

std::size_t SparseSym::bytes() const {
  const auto nz = static_cast<std::size_t>(matrix_.nonZeros());
  std::size_t b = nz * (sizeof(double) + sizeof(int)) +
                  static_cast<std::size_t>(matrix_.outerSize() + 1) * sizeof(int);
  b += l_rows_.capacity() * sizeof(Index) + l_vals_.capacity() * sizeof(double);
  b += (elim_.capacity() + l_ptr_.capacity()) * sizeof(Index);
  b += blocks_.capacity() * sizeof(Block) + scaling_.capacity() * sizeof(double);
  b += (symbolic_.perm.capacity() + symbolic_.etree.capacity() +
        symbolic_.col_counts.capacity()) * sizeof(Index);
  return b + work_peak_bytes_;
}

void SparseSym::dense_factors(Eigen::MatrixXd& l, Eigen::MatrixXd& d,
                              std::vector<Index>& order) const {
  if (!factorized_) throw Error(ErrorCode::NotFactorized, "no factor");
  order = elim_;
  const Index n = n_;
  std::vector<Index> pos(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) pos[static_cast<std::size_t>(elim_[static_cast<std::size_t>(p)])] = p;
  l = Eigen::MatrixXd::Identity(n, n);
  d = Eigen::MatrixXd::Zero(n, n);
  const auto sc = [this](Index i) { return scaling_[static_cast<std::size_t>(i)]; };
  for (Index p = 0; p < n; ++p)
    for (Index t = l_ptr_[static_cast<std::size_t>(p)]; t < l_ptr_[static_cast<std::size_t>(p) + 1]; ++t) {
      const Index row = l_rows_[static_cast<std::size_t>(t)];
      l(pos[static_cast<std::size_t>(row)], p) =
          l_vals_[static_cast<std::size_t>(t)] * sc(elim_[static_cast<std::size_t>(p)]) /
          sc(row);
    }
  // A = S⁻¹·(L·D·Lᵀ)·S⁻¹ = (S⁻¹LS)·(S⁻¹DS⁻¹)·(SLᵀS⁻¹)
  for (const Block& b : blocks_) {
    const double s1 = sc(elim_[static_cast<std::size_t>(b.first)]);
    d(b.first, b.first) = b.d11 / (s1 * s1);
    if (b.size == 2) {
      const double s2 = sc(elim_[static_cast<std::size_t>(b.first) + 1]);
      d(b.first, b.first + 1) = d(b.first + 1, b.first) = b.d12 / (s1 * s2);
      d(b.first + 1, b.first + 1) = b.d22 / (s2 * s2);
    }
  }
}

}  // namespace gridopt
