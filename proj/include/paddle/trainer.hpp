#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "paddle/core.hpp"
#include "paddle/metrics.hpp"
#include "paddle/solvers.hpp"

namespace paddle {

enum class InitVariant { data_columns, gaussian, provided };

template <typename Scalar>
struct InitStrategy {
  InitVariant variant = InitVariant::data_columns;
  // Only read for InitVariant::provided.
  MatrixX<Scalar> dictionary;
  MatrixX<Scalar> dual;
  MatrixX<Scalar> codes;

  static InitStrategy provided(MatrixX<Scalar> D0, MatrixX<Scalar> C0, MatrixX<Scalar> U0) {
    return InitStrategy{InitVariant::provided, std::move(D0), std::move(C0), std::move(U0)};
  }
};

template <typename Scalar>
struct Initialization {
  MatrixX<Scalar> dictionary;
  MatrixX<Scalar> dual;
  MatrixX<Scalar> codes;
};

/// Starting point (D0, C0, U0) for K atoms. data_columns draws K distinct
/// columns of X, gaussian draws i.i.d. normal atoms; both are projected on
/// the unit ball, C0 is the projected transpose of D0 and U0 is zero.
template <typename Scalar>
Initialization<Scalar> initialize(const MatrixX<Scalar>& X, Index K,
                                  const InitStrategy<Scalar>& strategy, std::uint64_t seed) {
  detail::require_nonempty(X, "X");
  if (K < 1) throw ContractViolation("initialize: K must be positive");
  const Index d = X.rows();
  const Index N = X.cols();

  if (strategy.variant == InitVariant::provided) {
    const auto& D0 = strategy.dictionary;
    const auto& C0 = strategy.dual;
    const auto& U0 = strategy.codes;
    detail::require_conform(D0.rows() == d && D0.cols() == K, "D0", D0, "X", X);
    detail::require_conform(C0.rows() == K && C0.cols() == d, "C0", C0, "D0", D0);
    detail::require_conform(U0.rows() == K && U0.cols() == N, "U0", U0, "X", X);
    detail::require_finite(D0, "D0");
    detail::require_finite(C0, "C0");
    detail::require_finite(U0, "U0");
    return {project_columns(D0), project_rows(C0), U0};
  }

  std::mt19937_64 rng(seed);
  MatrixX<Scalar> D0(d, K);
  if (strategy.variant == InitVariant::data_columns) {
    if (N < K) {
      throw InsufficientData("initialize: " + std::to_string(N) +
                             " examples cannot seed " + std::to_string(K) + " atoms");
    }
    // Partial Fisher-Yates: the first K slots end up a uniform K-subset.
    std::vector<Index> pool(static_cast<std::size_t>(N));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index i = 0; i < K; ++i) {
      std::uniform_int_distribution<Index> pick(i, N - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      D0.col(i) = project_ball(X.col(pool[static_cast<std::size_t>(i)]));
    }
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index j = 0; j < K; ++j) {
      for (Index i = 0; i < d; ++i) D0(i, j) = static_cast<Scalar>(normal(rng));
    }
    D0 = project_columns(D0);
  }
  MatrixX<Scalar> C0 = project_rows(D0.transpose());
  return {std::move(D0), std::move(C0), MatrixX<Scalar>::Zero(K, N)};
}

struct AtomReplacement {
  Index atom;
  Index example;
};

template <typename Scalar>
struct ReplacementResult {
  MatrixX<Scalar> codes;
  std::vector<AtomReplacement> replaced;
  /// Under-used atoms left alone for lack of an eligible example.
  Index unserved = 0;
};

/// Re-seeds atoms used by at most `min_usage` codes (default: rows of U
/// that are entirely zero). Atoms are visited in ascending order; each one
/// claims the unclaimed example with the largest residual ||x_j - D u_j||
/// (ties to the smaller j) by setting u_j = e_i. An example is skipped when
/// it is the last user of some other atom, so no new zero row appears.
template <typename Scalar>
ReplacementResult<Scalar> replace_underused_atoms(const MatrixX<Scalar>& X,
                                                  const MatrixX<Scalar>& D,
                                                  MatrixX<Scalar> U, int min_usage = 0) {
  detail::require_conform(X.rows() == D.rows(), "X", X, "D", D);
  detail::require_conform(D.cols() == U.rows(), "D", D, "U", U);
  detail::require_conform(X.cols() == U.cols(), "X", X, "U", U);
  const Index K = U.rows();
  const Index N = U.cols();

  std::vector<Index> usage(static_cast<std::size_t>(K), 0);
  for (Index j = 0; j < N; ++j) {
    for (Index i = 0; i < K; ++i) {
      if (U(i, j) != Scalar(0)) ++usage[static_cast<std::size_t>(i)];
    }
  }
  std::vector<Index> underused;
  for (Index i = 0; i < K; ++i) {
    if (usage[static_cast<std::size_t>(i)] <= min_usage) underused.push_back(i);
  }
  ReplacementResult<Scalar> result;
  if (underused.empty()) {
    result.codes = std::move(U);
    return result;
  }

  const VectorX<Scalar> residual = (X - D * U).colwise().norm().transpose();
  std::vector<Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return residual(a) > residual(b); });

  std::vector<bool> claimed(static_cast<std::size_t>(N), false);
  auto eligible = [&](Index atom, Index j) {
    if (claimed[static_cast<std::size_t>(j)]) return false;
    for (Index k = 0; k < K; ++k) {
      if (k != atom && U(k, j) != Scalar(0) && usage[static_cast<std::size_t>(k)] < 2) {
        return false;
      }
    }
    return true;
  };

  for (Index atom : underused) {
    auto it = std::find_if(order.begin(), order.end(),
                           [&](Index j) { return eligible(atom, j); });
    if (it == order.end()) {
      ++result.unserved;
      continue;
    }
    const Index j = *it;
    for (Index k = 0; k < K; ++k) {
      if (U(k, j) != Scalar(0)) --usage[static_cast<std::size_t>(k)];
    }
    U.col(j).setZero();
    U(atom, j) = Scalar(1);
    ++usage[static_cast<std::size_t>(atom)];
    claimed[static_cast<std::size_t>(j)] = true;
    result.replaced.push_back({atom, j});
  }
  result.codes = std::move(U);
  return result;
}

/// Windowed stopping rule. With E_H = (E^{max(t-H,0)} + ... + E^{t-1}) / H,
/// stops when |E^t - E_H| / E_H < rtol. E_H is divided by H even when the
/// window holds fewer than H values. When E_H = 0 it stops iff E^t = 0.
inline bool should_stop(std::span<const double> energies, int t, int H, double rtol) {
  if (t < 1 || H < 1 || energies.size() < static_cast<std::size_t>(t) + 1) {
    throw ContractViolation("should_stop: need t >= 1, H >= 1 and energies E^0..E^t");
  }
  const int first = std::max(t - H, 0);
  double sum = 0.0;
  for (int i = first; i < t; ++i) sum += energies[static_cast<std::size_t>(i)];
  const double window = sum / static_cast<double>(H);
  const double current = energies[static_cast<std::size_t>(t)];
  if (window == 0.0) return current == 0.0;
  return std::abs(current - window) / window < rtol;
}

template <typename Scalar>
struct IterationRecord {
  int t = 0;
  EnergyBreakdown<Scalar> energy;
  double avg_support = 0.0;
  Index atoms_replaced = 0;
  int inner_u = 0;
  int inner_d = 0;
  int inner_c = 0;
};

enum class StopReason { converged, max_iterations, diverged };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::diverged: return "diverged";
  }
  return "unknown";
}

template <typename Scalar>
struct TrainTrace {
  std::uint64_t seed = 0;
  HyperParams hp;
  Index signal_dim = 0;
  Index examples = 0;
  Index atoms = 0;
  Scalar initial_energy = 0;  ///< E^0
  std::vector<IterationRecord<Scalar>> records;
  StopReason stop = StopReason::max_iterations;
};

/// Raised when an inner solve diverges; carries the trace up to that point.
template <typename Scalar>
class TrainingDiverged : public NumericalDivergence {
 public:
  TrainingDiverged(const NumericalDivergence& cause, TrainTrace<Scalar> trace)
      : NumericalDivergence(cause), trace_(std::move(trace)) {}

  const TrainTrace<Scalar>& trace() const noexcept { return trace_; }

 private:
  TrainTrace<Scalar> trace_;
};

template <typename Scalar>
struct TrainResult {
  Model<Scalar> model;
  MatrixX<Scalar> codes;
  TrainTrace<Scalar> trace;
};

struct NoTrainObserver {
  template <typename... Args>
  void operator()(const Args&...) const noexcept {}
};

/// Block coordinate descent over U, D and C. Each outer iteration solves
/// for U, re-seeds unused atoms, solves for D, then for C, every inner
/// solve warm-started from the previous iterate, and stops on the windowed
/// energy rule or after hp.t_max iterations.
///
/// `observer(record, D, C, U)` is called after every outer iteration.
template <typename Scalar, typename Observer = NoTrainObserver>
TrainResult<Scalar> train(const MatrixX<Scalar>& X, Index K, const HyperParams& hp,
                          const InitStrategy<Scalar>& strategy, Observer&& observer = {},
                          const SolverOptions& options = {}) {
  hp.validate();
  detail::require_nonempty(X, "X");
  detail::require_finite(X, "X");

  Initialization<Scalar> init = initialize(X, K, strategy, hp.seed);
  MatrixX<Scalar> D = std::move(init.dictionary);
  MatrixX<Scalar> C = std::move(init.dual);
  MatrixX<Scalar> U = std::move(init.codes);

  TrainTrace<Scalar> trace;
  trace.seed = hp.seed;
  trace.hp = hp;
  trace.signal_dim = X.rows();
  trace.examples = X.cols();
  trace.atoms = K;
  trace.initial_energy = energy(X, D, C, U, hp).total;
  trace.records.reserve(static_cast<std::size_t>(hp.t_max));

  std::vector<double> energies{static_cast<double>(trace.initial_energy)};
  for (int t = 1; t <= hp.t_max; ++t) {
    IterationRecord<Scalar> record;
    record.t = t;
    try {
      auto [codes, ru] = solve_codes(X, D, C, std::move(U), hp, options);
      ReplacementResult<Scalar> swap =
          replace_underused_atoms(X, D, std::move(codes), hp.min_usage);
      U = std::move(swap.codes);
      record.atoms_replaced = static_cast<Index>(swap.replaced.size());

      auto [dictionary, rd] = solve_dictionary(X, std::move(D), U, hp, options);
      D = std::move(dictionary);
      auto [dual, rc] = solve_dual(X, std::move(C), U, hp, options);
      C = std::move(dual);

      record.inner_u = ru.iterations_run;
      record.inner_d = rd.iterations_run;
      record.inner_c = rc.iterations_run;
    } catch (const NumericalDivergence& e) {
      trace.stop = StopReason::diverged;
      throw TrainingDiverged<Scalar>(e, std::move(trace));
    }

    record.energy = energy(X, D, C, U, hp);
    record.avg_support = support_stats(U, 0.0).avg_support;
    trace.records.push_back(record);
    observer(static_cast<const IterationRecord<Scalar>&>(record),
             static_cast<const MatrixX<Scalar>&>(D), static_cast<const MatrixX<Scalar>&>(C),
             static_cast<const MatrixX<Scalar>&>(U));

    energies.push_back(static_cast<double>(record.energy.total));
    if (should_stop(energies, t, hp.history_h, hp.rtol)) {
      trace.stop = StopReason::converged;
      break;
    }
  }

  return TrainResult<Scalar>{Model<Scalar>(std::move(D), std::move(C)), std::move(U),
                             std::move(trace)};
}

}  // namespace paddle
