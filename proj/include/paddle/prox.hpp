#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "paddle/types.hpp"

namespace paddle {

// ---------------------------------------------------------------------------
// Proximity operators
// ---------------------------------------------------------------------------

/// Elementwise sign(x) max(|x| - lambda, 0), the prox of lambda |.|.
template <typename Derived>
typename Derived::PlainObject soft_threshold(const Eigen::MatrixBase<Derived>& M,
                                             typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  if (!(lambda >= Scalar(0))) {
    throw ContractViolation("soft_threshold: lambda must be nonnegative");
  }
  return M.unaryExpr([lambda](Scalar x) {
    const Scalar shrunk = std::abs(x) - lambda;
    return shrunk > Scalar(0) ? std::copysign(shrunk, x) : Scalar(0);
  });
}

/// Projection on the unit ball: v / max(1, ||v||).
template <typename Derived>
typename Derived::PlainObject project_ball(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm = v.norm();
  if (norm <= Scalar(1)) return v;
  return v / norm;
}

/// Applies project_ball to every column.
template <typename Derived>
typename Derived::PlainObject project_columns(const Eigen::MatrixBase<Derived>& M) {
  typename Derived::PlainObject out = M;
  for (Index j = 0; j < out.cols(); ++j) {
    const auto norm = out.col(j).norm();
    if (norm > 1) out.col(j) /= norm;
  }
  return out;
}

/// Applies project_ball to every row.
template <typename Derived>
typename Derived::PlainObject project_rows(const Eigen::MatrixBase<Derived>& M) {
  typename Derived::PlainObject out = M;
  for (Index i = 0; i < out.rows(); ++i) {
    const auto norm = out.row(i).norm();
    if (norm > 1) out.row(i) /= norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradients of the smooth parts
// ---------------------------------------------------------------------------

/// Gradient in U of (1/d)||X-DU||^2 + (eta/K)||U-CX||^2 + (mu/K)||U||^2.
template <typename Scalar>
MatrixX<Scalar> grad_codes(const MatrixX<Scalar>& X, const MatrixX<Scalar>& D,
                           const MatrixX<Scalar>& C, const MatrixX<Scalar>& U,
                           const HyperParams& hp) {
  detail::require_conform(X.rows() == D.rows(), "X", X, "D", D);
  detail::require_conform(D.cols() == U.rows(), "D", D, "U", U);
  detail::require_conform(X.cols() == U.cols(), "X", X, "U", U);
  detail::require_conform(C.rows() == D.cols() && C.cols() == D.rows(), "C", C,
                          "D", D);
  const Scalar d = static_cast<Scalar>(X.rows());
  const Scalar K = static_cast<Scalar>(D.cols());
  const Scalar eta = static_cast<Scalar>(hp.eta);
  const Scalar mu = static_cast<Scalar>(hp.mu);
  MatrixX<Scalar> g = (Scalar(-2) / d) * (D.transpose() * (X - D * U));
  if (eta != Scalar(0)) g += (Scalar(2) * eta / K) * (U - C * X);
  if (mu != Scalar(0)) g += (Scalar(2) * mu / K) * U;
  return g;
}

/// Gradient in D of (1/d)||X-DU||^2.
template <typename Scalar>
MatrixX<Scalar> grad_dictionary(const MatrixX<Scalar>& X, const MatrixX<Scalar>& D,
                                const MatrixX<Scalar>& U) {
  detail::require_conform(X.rows() == D.rows(), "X", X, "D", D);
  detail::require_conform(D.cols() == U.rows(), "D", D, "U", U);
  detail::require_conform(X.cols() == U.cols(), "X", X, "U", U);
  const Scalar d = static_cast<Scalar>(X.rows());
  return (Scalar(-2) / d) * (X - D * U) * U.transpose();
}

/// Gradient in C of (1/K)||U-CX||^2. The coding weight eta only rescales
/// this block and is left out, as in the dual update step.
template <typename Scalar>
MatrixX<Scalar> grad_dual(const MatrixX<Scalar>& X, const MatrixX<Scalar>& C,
                          const MatrixX<Scalar>& U) {
  detail::require_conform(C.cols() == X.rows(), "C", C, "X", X);
  detail::require_conform(C.rows() == U.rows(), "C", C, "U", U);
  detail::require_conform(X.cols() == U.cols(), "X", X, "U", U);
  const Scalar K = static_cast<Scalar>(C.rows());
  return (Scalar(-2) / K) * (U - C * X) * X.transpose();
}

// ---------------------------------------------------------------------------
// Step sizes
// ---------------------------------------------------------------------------

template <typename Scalar>
struct EigenRange {
  Scalar min = 0;
  Scalar max = 0;
};

/// Extreme eigenvalues of a symmetric matrix. Negative values within
/// rounding of zero are clamped to zero, so Gram matrices report a >= 0.
template <typename Derived>
EigenRange<typename Derived::Scalar> eigen_range(const Eigen::MatrixBase<Derived>& G) {
  using Scalar = typename Derived::Scalar;
  if (G.rows() != G.cols() || G.size() == 0) {
    throw ContractViolation("eigen_range: matrix must be square and nonempty (got " +
                            detail::shape_of(G) + ")");
  }
  const Scalar scale = std::max(Scalar(1), G.cwiseAbs().maxCoeff());
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale) {
    throw ContractViolation("eigen_range: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(G.eval(),
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalDivergence("eigen_range: eigensolver failed", 0);
  }
  const auto& values = solver.eigenvalues();  // ascending
  EigenRange<Scalar> range{values(0), values(values.size() - 1)};
  const Scalar tiny = Scalar(1e-10) * std::max(Scalar(1), std::abs(range.max));
  if (range.min < Scalar(0) && range.min > -tiny) range.min = Scalar(0);
  if (range.max < Scalar(0) && range.max > -tiny) range.max = Scalar(0);
  return range;
}

template <typename Scalar>
struct StepSizes {
  /// (a+b)/(2d) + (eta+mu)/K with (a,b) the eigenvalue range of D^T D.
  Scalar sigma_u = 0;
  /// b/d + (eta+mu)/K: half the Lipschitz constant of the code gradient.
  /// This is the value the accelerated code solver uses.
  Scalar sigma_u_lipschitz = 0;
  Scalar sigma_d = 0;  ///< 2||UU^T||_F / d
  Scalar sigma_c = 0;  ///< 2||XX^T||_F / K
};

template <typename Scalar>
StepSizes<Scalar> code_step(const EigenRange<Scalar>& range, Index d, Index K,
                            const HyperParams& hp) {
  const Scalar dd = static_cast<Scalar>(d);
  const Scalar KK = static_cast<Scalar>(K);
  const Scalar ridge = static_cast<Scalar>(hp.eta + hp.mu) / KK;
  StepSizes<Scalar> s;
  s.sigma_u = (range.min + range.max) / (Scalar(2) * dd) + ridge;
  s.sigma_u_lipschitz = range.max / dd + ridge;
  return s;
}

template <typename Scalar>
Scalar dictionary_step(Index d, const MatrixX<Scalar>& U) {
  return Scalar(2) * (U * U.transpose()).norm() / static_cast<Scalar>(d);
}

template <typename Scalar>
Scalar dual_step(const MatrixX<Scalar>& X, Index K) {
  return Scalar(2) * (X * X.transpose()).norm() / static_cast<Scalar>(K);
}

template <typename Scalar>
StepSizes<Scalar> step_sizes(const MatrixX<Scalar>& X, const MatrixX<Scalar>& D,
                             const MatrixX<Scalar>& U, const HyperParams& hp) {
  detail::require_conform(X.rows() == D.rows(), "X", X, "D", D);
  detail::require_conform(D.cols() == U.rows(), "D", D, "U", U);
  detail::require_conform(X.cols() == U.cols(), "X", X, "U", U);
  const MatrixX<Scalar> gram = D.transpose() * D;
  StepSizes<Scalar> s = code_step(eigen_range(gram), D.rows(), D.cols(), hp);
  s.sigma_d = dictionary_step(D.rows(), U);
  s.sigma_c = dual_step(X, D.cols());
  return s;
}

}  // namespace paddle
