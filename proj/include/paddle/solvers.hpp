#pragma once

#include <algorithm>
#include <utility>

#include "paddle/fista.hpp"
#include "paddle/prox.hpp"

namespace paddle {

/// Which constant scales the gradient step of the code solver.
enum class CodeStep {
  /// b/d + (eta+mu)/K. Stable under momentum.
  lipschitz,
  /// (a+b)/(2d) + (eta+mu)/K. Optimal for the unaccelerated scheme on a
  /// strongly convex problem, unstable under momentum once the spectrum of
  /// D^T D is spread.
  paired_eigen,
};

struct SolverOptions {
  bool accelerate = true;
  CodeStep code_step = CodeStep::lipschitz;
};

/// Objective of the code block with D and C fixed: all four energy terms.
template <typename Scalar>
Scalar codes_objective(const MatrixX<Scalar>& X, const MatrixX<Scalar>& D,
                       const MatrixX<Scalar>& CX, const MatrixX<Scalar>& U,
                       const HyperParams& hp) {
  const Scalar d = static_cast<Scalar>(X.rows());
  const Scalar K = static_cast<Scalar>(D.cols());
  Scalar value = (X - D * U).squaredNorm() / d;
  if (hp.eta != 0.0) value += static_cast<Scalar>(hp.eta) / K * (U - CX).squaredNorm();
  if (hp.mu != 0.0) value += static_cast<Scalar>(hp.mu) / K * U.squaredNorm();
  if (hp.tau != 0.0) {
    value += Scalar(2) * static_cast<Scalar>(hp.tau) / K * U.template lpNorm<1>();
  }
  return value;
}

/// Minimizes the energy over U with D and C fixed. Each step is the
/// soft-thresholded gradient step
///   S_{tau/(K s)}[(1 - (eta+mu)/(K s)) U + (1/s)((1/d) D^T(X-DU) + (eta/K) CX)].
template <typename Scalar>
std::pair<MatrixX<Scalar>, SolveReport<Scalar>> solve_codes(
    const MatrixX<Scalar>& X, const MatrixX<Scalar>& D, const MatrixX<Scalar>& C,
    MatrixX<Scalar> U_init, const HyperParams& hp, const SolverOptions& options = {}) {
  detail::require_conform(X.rows() == D.rows(), "X", X, "D", D);
  detail::require_conform(D.cols() == U_init.rows(), "D", D, "U", U_init);
  detail::require_conform(X.cols() == U_init.cols(), "X", X, "U", U_init);
  detail::require_conform(C.rows() == D.cols() && C.cols() == D.rows(), "C", C,
                          "D", D);

  const Index d = X.rows();
  const Index K = D.cols();
  const Scalar dd = static_cast<Scalar>(d);
  const Scalar KK = static_cast<Scalar>(K);
  const Scalar eta = static_cast<Scalar>(hp.eta);
  const Scalar mu = static_cast<Scalar>(hp.mu);
  const Scalar tau = static_cast<Scalar>(hp.tau);

  const MatrixX<Scalar> gram = D.transpose() * D;
  const MatrixX<Scalar> DtX = D.transpose() * X;
  const MatrixX<Scalar> CX = eta != Scalar(0) ? MatrixX<Scalar>(C * X)
                                              : MatrixX<Scalar>::Zero(K, X.cols());

  const StepSizes<Scalar> steps = code_step(eigen_range(gram), d, K, hp);
  const Scalar sigma = options.code_step == CodeStep::lipschitz ? steps.sigma_u_lipschitz
                                                                : steps.sigma_u;

  auto objective = [&](const MatrixX<Scalar>& U) {
    return codes_objective(X, D, CX, U, hp);
  };

  if (!(sigma > Scalar(0))) {
    // D = 0 and no quadratic code terms: only the l1 term depends on U.
    SolveReport<Scalar> report;
    report.initial_objective = objective(U_init);
    if (tau > Scalar(0)) U_init.setZero();
    report.final_objective = objective(U_init);
    report.converged = true;
    return {std::move(U_init), report};
  }

  auto gradient = [&](const MatrixX<Scalar>& U) {
    MatrixX<Scalar> g = (Scalar(2) / dd) * (gram * U - DtX);
    if (eta != Scalar(0)) g += (Scalar(2) * eta / KK) * (U - CX);
    if (mu != Scalar(0)) g += (Scalar(2) * mu / KK) * U;
    return g;
  };
  const Scalar threshold = tau / (KK * sigma);
  auto prox = [threshold](const MatrixX<Scalar>& V) -> MatrixX<Scalar> {
    return soft_threshold(V, threshold);
  };

  InnerControls controls = InnerControls::from(hp);
  controls.accelerate = options.accelerate;
  return fista_solve(objective, gradient, prox, sigma, std::move(U_init), controls);
}

template <typename Scalar>
std::pair<MatrixX<Scalar>, SolveReport<Scalar>> solve_codes(
    const MatrixX<Scalar>& X, const Model<Scalar>& model, MatrixX<Scalar> U_init,
    const HyperParams& hp, const SolverOptions& options = {}) {
  return solve_codes(X, model.dictionary(), model.dual(), std::move(U_init), hp,
                     options);
}

/// Minimizes (1/d)||X - DU||^2 over D with atoms in the unit ball.
/// Works with the Gram matrices U U^T and X U^T, so an iteration costs
/// O(d K^2) whatever the number of examples.
template <typename Scalar>
std::pair<MatrixX<Scalar>, SolveReport<Scalar>> solve_dictionary(
    const MatrixX<Scalar>& X, MatrixX<Scalar> D_init, const MatrixX<Scalar>& U,
    const HyperParams& hp, const SolverOptions& options = {}) {
  detail::require_conform(X.rows() == D_init.rows(), "X", X, "D", D_init);
  detail::require_conform(D_init.cols() == U.rows(), "D", D_init, "U", U);
  detail::require_conform(X.cols() == U.cols(), "X", X, "U", U);

  const Scalar dd = static_cast<Scalar>(X.rows());
  const MatrixX<Scalar> UUt = U * U.transpose();
  const MatrixX<Scalar> XUt = X * U.transpose();
  const Scalar xx = X.squaredNorm();

  auto objective = [&](const MatrixX<Scalar>& D) {
    const Scalar cross = D.cwiseProduct(XUt).sum();
    const Scalar quad = (D * UUt).cwiseProduct(D).sum();
    return std::max(Scalar(0), (xx - Scalar(2) * cross + quad) / dd);
  };

  const Scalar sigma = Scalar(2) * UUt.norm() / dd;
  if (!(sigma > Scalar(0))) {
    SolveReport<Scalar> report;
    report.initial_objective = report.final_objective = objective(D_init);
    report.converged = true;
    return {std::move(D_init), report};
  }

  auto gradient = [&](const MatrixX<Scalar>& D) -> MatrixX<Scalar> {
    return (Scalar(2) / dd) * (D * UUt - XUt);
  };
  auto prox = [](const MatrixX<Scalar>& V) -> MatrixX<Scalar> {
    return project_columns(V);
  };

  InnerControls controls = InnerControls::from(hp);
  controls.accelerate = options.accelerate;
  return fista_solve(objective, gradient, prox, sigma, std::move(D_init), controls);
}

/// Minimizes (eta/K)||U - CX||^2 over C with filters in the unit ball.
/// Returns the initializer when eta = 0 or X = 0, where the objective does
/// not depend on C.
template <typename Scalar>
std::pair<MatrixX<Scalar>, SolveReport<Scalar>> solve_dual(
    const MatrixX<Scalar>& X, MatrixX<Scalar> C_init, const MatrixX<Scalar>& U,
    const HyperParams& hp, const SolverOptions& options = {}) {
  detail::require_conform(C_init.cols() == X.rows(), "C", C_init, "X", X);
  detail::require_conform(C_init.rows() == U.rows(), "C", C_init, "U", U);
  detail::require_conform(X.cols() == U.cols(), "X", X, "U", U);

  const Scalar KK = static_cast<Scalar>(C_init.rows());
  const Scalar eta = static_cast<Scalar>(hp.eta);
  if (eta == Scalar(0)) {
    return {std::move(C_init), SolveReport<Scalar>{0, 0, 0, true}};
  }

  const MatrixX<Scalar> XXt = X * X.transpose();
  const MatrixX<Scalar> UXt = U * X.transpose();
  const Scalar uu = U.squaredNorm();

  auto objective = [&](const MatrixX<Scalar>& C) {
    const Scalar cross = C.cwiseProduct(UXt).sum();
    const Scalar quad = (C * XXt).cwiseProduct(C).sum();
    return eta / KK * std::max(Scalar(0), uu - Scalar(2) * cross + quad);
  };

  const Scalar sigma = Scalar(2) * XXt.norm() / KK;
  if (!(sigma > Scalar(0))) {
    SolveReport<Scalar> report;
    report.initial_objective = report.final_objective = objective(C_init);
    report.converged = true;
    return {std::move(C_init), report};
  }

  auto gradient = [&](const MatrixX<Scalar>& C) -> MatrixX<Scalar> {
    return (Scalar(2) / KK) * (C * XXt - UXt);
  };
  auto prox = [](const MatrixX<Scalar>& V) -> MatrixX<Scalar> { return project_rows(V); };

  InnerControls controls = InnerControls::from(hp);
  controls.accelerate = options.accelerate;
  return fista_solve(objective, gradient, prox, sigma, std::move(C_init), controls);
}

}  // namespace paddle
