#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "paddle/types.hpp"

namespace paddle {

/// Iterates of the accelerated proximal scheme. At iteration p, `current`
/// holds xi^{p-1}, `momentum_point` holds phi^p and `a` holds a_p.
template <typename Scalar>
struct FistaState {
  MatrixX<Scalar> current;
  MatrixX<Scalar> previous;
  MatrixX<Scalar> momentum_point;
  Scalar a = 1;
  int iteration = 0;
};

template <typename Scalar>
struct SolveReport {
  int iterations_run = 0;
  Scalar initial_objective = 0;
  Scalar final_objective = 0;
  bool converged = false;
};

struct InnerControls {
  int max_iter = 200;
  double rtol = 1e-6;
  /// When false the momentum step is skipped (plain forward-backward).
  bool accelerate = true;

  static InnerControls from(const HyperParams& hp) {
    return InnerControls{hp.inner_max_iter, hp.inner_rtol, true};
  }
};

/// a_{p+1} = (1 + sqrt(1 + 4 a_p^2)) / 2
template <typename Scalar>
Scalar next_momentum(Scalar a) {
  return (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * a * a)) / Scalar(2);
}

struct NoObserver {
  template <typename State>
  void operator()(const State&) const noexcept {}
};

/// Minimizes F + J given the objective F + J, the gradient of F, the prox
/// of J at the step 1/(2 sigma), and a starting point. Returns the iterate
/// with the smallest objective seen (the starting point included), so the
/// result never scores worse than `init`.
template <typename Scalar, typename Objective, typename Gradient, typename Prox,
          typename Observer = NoObserver>
std::pair<MatrixX<Scalar>, SolveReport<Scalar>> fista_solve(
    Objective&& objective, Gradient&& gradient, Prox&& prox, Scalar sigma,
    MatrixX<Scalar> init, const InnerControls& controls, Observer&& observer = {}) {
  if (!(sigma > Scalar(0))) {
    throw ContractViolation("fista_solve: step constant sigma must be positive");
  }
  if (controls.max_iter < 1 || !(controls.rtol >= 0.0)) {
    throw ContractViolation("fista_solve: invalid inner controls");
  }
  detail::require_finite(init, "fista_solve initial point");

  const Scalar step = Scalar(1) / (Scalar(2) * sigma);
  const Scalar rtol = static_cast<Scalar>(controls.rtol);

  SolveReport<Scalar> report;
  Scalar last = objective(init);
  if (!std::isfinite(last)) {
    throw NumericalDivergence("fista_solve: objective not finite at start", 0);
  }
  report.initial_objective = last;

  FistaState<Scalar> state;
  state.momentum_point = init;
  state.previous = init;
  state.current = std::move(init);

  MatrixX<Scalar> best = state.current;
  Scalar best_value = last;

  for (int p = 1; p <= controls.max_iter; ++p) {
    state.iteration = p;
    observer(static_cast<const FistaState<Scalar>&>(state));

    MatrixX<Scalar> next =
        prox(state.momentum_point - step * gradient(state.momentum_point));
    const Scalar value = objective(next);
    if (!next.allFinite() || !std::isfinite(value)) {
      throw NumericalDivergence("fista_solve: non-finite iterate", p);
    }

    if (controls.accelerate) {
      const Scalar a_next = next_momentum(state.a);
      state.momentum_point = next + ((state.a - Scalar(1)) / a_next) * (next - state.current);
      state.a = a_next;
    } else {
      state.momentum_point = next;
    }
    state.previous = std::move(state.current);
    state.current = std::move(next);
    report.iterations_run = p;

    if (value < best_value) {
      best_value = value;
      best = state.current;
    }

    // Relative change with respect to the previous objective value.
    const Scalar change = std::abs(value - last);
    const bool settled = change == Scalar(0) || change < rtol * std::abs(last);
    last = value;
    if (settled) {
      report.converged = true;
      break;
    }
  }

  report.final_objective = best_value;
  return {std::move(best), report};
}

}  // namespace paddle
