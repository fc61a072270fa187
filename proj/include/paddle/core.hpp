#pragma once

#include "paddle/types.hpp"

namespace paddle {

/// Evaluates
///   (1/d)||X - DU||^2 + (eta/K)||U - CX||^2 + (2 tau/K) sum_i ||u_i||_1
///   + (mu/K)||U||^2
/// term by term. X is d x N, D is d x K, C is K x d and U is K x N.
template <typename Scalar>
EnergyBreakdown<Scalar> energy(const MatrixX<Scalar>& X, const MatrixX<Scalar>& D,
                               const MatrixX<Scalar>& C, const MatrixX<Scalar>& U,
                               const HyperParams& hp) {
  detail::require_conform(X.rows() == D.rows(), "X", X, "D", D);
  detail::require_conform(D.cols() == U.rows(), "D", D, "U", U);
  detail::require_conform(X.cols() == U.cols(), "X", X, "U", U);
  detail::require_conform(C.rows() == D.cols() && C.cols() == D.rows(), "C", C,
                          "D", D);

  const Scalar d = static_cast<Scalar>(X.rows());
  const Scalar K = static_cast<Scalar>(D.cols());

  EnergyBreakdown<Scalar> e;
  e.reconstruction = (X - D * U).squaredNorm() / d;
  e.coding = hp.eta == 0.0
                 ? Scalar(0)
                 : static_cast<Scalar>(hp.eta) / K * (U - C * X).squaredNorm();
  e.l1 = Scalar(2) * static_cast<Scalar>(hp.tau) / K * U.template lpNorm<1>();
  e.l2 = static_cast<Scalar>(hp.mu) / K * U.squaredNorm();
  e.total = e.reconstruction + e.coding + e.l1 + e.l2;
  return e;
}

template <typename Scalar>
EnergyBreakdown<Scalar> energy(const MatrixX<Scalar>& X, const Model<Scalar>& model,
                               const MatrixX<Scalar>& U, const HyperParams& hp) {
  return energy(X, model.dictionary(), model.dual(), U, hp);
}

/// Codes obtained with a single product by the dual: C X. No thresholding.
template <typename Scalar, typename Derived>
MatrixX<Scalar> encode_linear(const Eigen::MatrixBase<Derived>& X,
                              const Model<Scalar>& model) {
  detail::require_conform(X.rows() == model.dual().cols(), "X", X, "C",
                          model.dual());
  return model.dual() * X;
}

/// Synthesis D U.
template <typename Scalar, typename Derived>
MatrixX<Scalar> decode(const Model<Scalar>& model,
                       const Eigen::MatrixBase<Derived>& U) {
  detail::require_conform(model.dictionary().cols() == U.rows(), "D",
                          model.dictionary(), "U", U);
  return model.dictionary() * U;
}

}  // namespace paddle
