#pragma once

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "paddle/types.hpp"

namespace paddle {

/// Top-k principal directions of the column-centered data, as an
/// orthonormal d x k matrix in descending order of variance.
template <typename Derived>
MatrixX<typename Derived::Scalar> pca_basis(const Eigen::MatrixBase<Derived>& X,
                                            Index k) {
  using Scalar = typename Derived::Scalar;
  if (k < 1 || k > std::min(X.rows(), X.cols())) {
    throw ContractViolation("pca_basis: need 1 <= k <= min(d, N)");
  }
  const MatrixX<Scalar> centered = X.colwise() - X.rowwise().mean();
  Eigen::BDCSVD<MatrixX<Scalar>> svd(centered, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(k);
}

namespace detail {

template <typename Derived>
MatrixX<typename Derived::Scalar> orthonormal_basis(const Eigen::MatrixBase<Derived>& A,
                                                    const char* name) {
  using Scalar = typename Derived::Scalar;
  Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(A.eval());
  if (qr.rank() < A.cols()) {
    throw ContractViolation(std::string("largest_principal_angle: ") + name +
                            " is rank deficient");
  }
  return qr.householderQ() * MatrixX<Scalar>::Identity(A.rows(), A.cols());
}

}  // namespace detail

/// Largest principal angle (radians, in [0, pi/2]) between the column
/// spans of A and B, both d x k of full column rank.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar largest_principal_angle(const Eigen::MatrixBase<DerivedA>& A,
                                                  const Eigen::MatrixBase<DerivedB>& B) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_conform(A.rows() == B.rows() && A.cols() == B.cols(), "A", A, "B", B);
  detail::require_nonempty(A, "A");
  const MatrixX<Scalar> qa = detail::orthonormal_basis(A, "A");
  const MatrixX<Scalar> qb = detail::orthonormal_basis(B, "B");

  const MatrixX<Scalar> overlap = qa.transpose() * qb;
  const Scalar smallest_cos =
      std::clamp(Eigen::JacobiSVD<MatrixX<Scalar>>(overlap).singularValues().minCoeff(),
                 Scalar(-1), Scalar(1));
  const Scalar angle = std::acos(smallest_cos);
  if (angle > Scalar(0.5)) return angle;

  // arccos loses half the digits near zero; the sine of the largest angle
  // is the norm of the part of B's basis outside span(A).
  const MatrixX<Scalar> outside = qb - qa * overlap;
  const Scalar sine = std::min(
      Scalar(1), Eigen::JacobiSVD<MatrixX<Scalar>>(outside).singularValues()(0));
  return std::asin(sine);
}

template <typename Scalar>
struct DualDistance {
  Scalar value = 0;
  Index pairs_used = 0;
  Index pairs_skipped = 0;  ///< pairs with a zero atom or filter
};

/// Mean over atoms of 1 - |d_i . c_i| / (||d_i|| ||c_i||), pairing column i
/// of D with row i of C. `include` selects atoms (empty means all).
template <typename Scalar>
DualDistance<Scalar> dual_distance(const MatrixX<Scalar>& D, const MatrixX<Scalar>& C,
                                   const std::vector<bool>& include = {}) {
  detail::require_conform(C.rows() == D.cols() && C.cols() == D.rows(), "C", C, "D", D);
  DualDistance<Scalar> out;
  Scalar sum = 0;
  for (Index i = 0; i < D.cols(); ++i) {
    if (!include.empty() && !include[static_cast<std::size_t>(i)]) continue;
    const Scalar nd = D.col(i).norm();
    const Scalar nc = C.row(i).norm();
    if (nd == Scalar(0) || nc == Scalar(0)) {
      ++out.pairs_skipped;
      continue;
    }
    const Scalar cosine = std::min(Scalar(1), std::abs(D.col(i).dot(C.row(i).transpose())) / (nd * nc));
    sum += Scalar(1) - cosine;
    ++out.pairs_used;
  }
  if (out.pairs_used == 0) {
    throw UndefinedMetric("dual_distance: no pair with nonzero atom and filter");
  }
  out.value = sum / static_cast<Scalar>(out.pairs_used);
  return out;
}

template <typename Scalar>
DualDistance<Scalar> dual_distance(const Model<Scalar>& model) {
  return dual_distance(model.dictionary(), model.dual());
}

struct SupportStats {
  double avg_support = 0.0;
  std::vector<Index> per_atom_usage;
};

/// Mean number of entries with |u| > zero_tol per column, and per-row counts.
template <typename Derived>
SupportStats support_stats(const Eigen::MatrixBase<Derived>& U, double zero_tol = 1e-12) {
  if (!(zero_tol >= 0.0)) throw ContractViolation("support_stats: zero_tol must be >= 0");
  SupportStats stats;
  stats.per_atom_usage.assign(static_cast<std::size_t>(U.rows()), 0);
  Index total = 0;
  for (Index j = 0; j < U.cols(); ++j) {
    for (Index i = 0; i < U.rows(); ++i) {
      if (std::abs(static_cast<double>(U(i, j))) > zero_tol) {
        ++stats.per_atom_usage[static_cast<std::size_t>(i)];
        ++total;
      }
    }
  }
  stats.avg_support =
      U.cols() > 0 ? static_cast<double>(total) / static_cast<double>(U.cols()) : 0.0;
  return stats;
}

template <typename Scalar>
struct AtomPair {
  Index true_index;
  Index learned_index;
  Scalar cosine;  ///< absolute cosine similarity
};

template <typename Scalar>
struct MatchReport {
  std::vector<AtomPair<Scalar>> pairs;
  double matched_fraction = 0.0;
  std::vector<Index> zero_true;     ///< zero-norm true atoms, never matched
  std::vector<Index> zero_learned;  ///< zero-norm learned atoms, never matched
};

/// Greedy one-to-one matching on |cosine| in descending order. Insensitive
/// to atom order and sign. matched_fraction counts true atoms whose match
/// reaches theta.
template <typename Scalar>
MatchReport<Scalar> match_atoms(const MatrixX<Scalar>& true_dict,
                                const MatrixX<Scalar>& learned_dict, double theta) {
  detail::require_conform(true_dict.rows() == learned_dict.rows(), "true", true_dict,
                          "learned", learned_dict);
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw ContractViolation("match_atoms: theta must be in (0, 1]");
  }
  MatchReport<Scalar> report;

  auto unit_columns = [](const MatrixX<Scalar>& M, std::vector<Index>& zeros) {
    MatrixX<Scalar> out = M;
    for (Index j = 0; j < M.cols(); ++j) {
      const Scalar n = M.col(j).norm();
      if (n == Scalar(0)) {
        zeros.push_back(j);
      } else {
        out.col(j) /= n;
      }
    }
    return out;
  };
  const MatrixX<Scalar> t = unit_columns(true_dict, report.zero_true);
  const MatrixX<Scalar> l = unit_columns(learned_dict, report.zero_learned);
  const MatrixX<Scalar> cosines = (t.transpose() * l).cwiseAbs();

  std::vector<std::tuple<Scalar, Index, Index>> candidates;
  candidates.reserve(static_cast<std::size_t>(cosines.size()));
  for (Index j = 0; j < cosines.cols(); ++j) {
    for (Index i = 0; i < cosines.rows(); ++i) {
      candidates.emplace_back(std::min(Scalar(1), cosines(i, j)), i, j);
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });

  std::vector<bool> true_used(static_cast<std::size_t>(t.cols()), false);
  std::vector<bool> learned_used(static_cast<std::size_t>(l.cols()), false);
  for (Index z : report.zero_true) true_used[static_cast<std::size_t>(z)] = true;
  for (Index z : report.zero_learned) learned_used[static_cast<std::size_t>(z)] = true;

  Index matched = 0;
  for (const auto& [cosine, i, j] : candidates) {
    if (true_used[static_cast<std::size_t>(i)] || learned_used[static_cast<std::size_t>(j)]) {
      continue;
    }
    true_used[static_cast<std::size_t>(i)] = learned_used[static_cast<std::size_t>(j)] = true;
    report.pairs.push_back({i, j, cosine});
    if (static_cast<double>(cosine) >= theta) ++matched;
  }
  std::sort(report.pairs.begin(), report.pairs.end(),
            [](const auto& a, const auto& b) { return a.true_index < b.true_index; });
  report.matched_fraction =
      t.cols() > 0 ? static_cast<double>(matched) / static_cast<double>(t.cols()) : 0.0;
  return report;
}

}  // namespace paddle
