#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <sstream>
#include <string>
#include <utility>

#include "paddle/errors.hpp"

namespace paddle {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

/// Slack on the unit-norm constraints of atoms and filters.
inline constexpr double kFeasibilitySlack = 1e-12;

namespace detail {

template <typename Derived>
std::string shape_of(const Eigen::MatrixBase<Derived>& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

/// Throws ContractViolation naming both operands when `ok` is false.
template <typename A, typename B>
void require_conform(bool ok, const char* name_a, const Eigen::MatrixBase<A>& a,
                     const char* name_b, const Eigen::MatrixBase<B>& b) {
  if (!ok) {
    throw ContractViolation(std::string("dimension mismatch: ") + name_a + " (" +
                            shape_of(a) + ") vs " + name_b + " (" + shape_of(b) +
                            ")");
  }
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* name) {
  if (!m.allFinite()) {
    throw ContractViolation(std::string(name) + " contains non-finite entries");
  }
}

template <typename Derived>
void require_nonempty(const Eigen::MatrixBase<Derived>& m, const char* name) {
  if (m.size() == 0) {
    throw ContractViolation(std::string(name) + " is empty");
  }
}

}  // namespace detail

/// A dictionary D (d x K, atoms as columns) paired with its dual encoder
/// C (K x d, filters as rows). Atoms and filters lie in the unit ball.
template <typename Scalar>
class Model {
 public:
  Model(MatrixX<Scalar> dictionary, MatrixX<Scalar> dual)
      : dictionary_(std::move(dictionary)), dual_(std::move(dual)) {
    detail::require_nonempty(dictionary_, "dictionary");
    detail::require_conform(dictionary_.cols() == dual_.rows() &&
                                dictionary_.rows() == dual_.cols(),
                            "dictionary", dictionary_, "dual", dual_);
    detail::require_finite(dictionary_, "dictionary");
    detail::require_finite(dual_, "dual");
    const Scalar bound = Scalar(1) + Scalar(kFeasibilitySlack);
    if ((dictionary_.colwise().squaredNorm().array() > bound).any()) {
      throw ContractViolation("dictionary has an atom outside the unit ball");
    }
    if ((dual_.rowwise().squaredNorm().array() > bound).any()) {
      throw ContractViolation("dual has a filter outside the unit ball");
    }
  }

  const MatrixX<Scalar>& dictionary() const noexcept { return dictionary_; }
  const MatrixX<Scalar>& dual() const noexcept { return dual_; }

  Index signal_dim() const noexcept { return dictionary_.rows(); }
  Index atoms() const noexcept { return dictionary_.cols(); }

 private:
  MatrixX<Scalar> dictionary_;
  MatrixX<Scalar> dual_;
};

/// Weights of the energy and controls of the outer and inner loops.
struct HyperParams {
  double tau = 0.0;  ///< l1 weight
  double eta = 1.0;  ///< coding-error weight
  double mu = 0.0;   ///< l2 weight on the codes
  double rtol = 1e-4;
  int t_max = 500;
  int history_h = 5;
  int inner_max_iter = 200;
  double inner_rtol = 1e-6;
  std::uint64_t seed = 0;
  /// An atom is replaced when at most this many codes use it.
  int min_usage = 0;

  void validate() const {
    if (!(tau >= 0.0) || !(eta >= 0.0) || !(mu >= 0.0)) {
      throw ContractViolation("tau, eta and mu must be nonnegative");
    }
    if (!(rtol > 0.0) || !(inner_rtol > 0.0)) {
      throw ContractViolation("rtol and inner_rtol must be positive");
    }
    // A single-iteration run never consults the history window.
    if (t_max < 1 || history_h < 1 || (t_max > 1 && history_h >= t_max)) {
      throw ContractViolation("require 1 <= history_h < t_max");
    }
    if (inner_max_iter < 1) {
      throw ContractViolation("inner_max_iter must be positive");
    }
    if (min_usage < 0) {
      throw ContractViolation("min_usage must be nonnegative");
    }
  }
};

/// The weighted terms of the energy and their sum.
template <typename Scalar>
struct EnergyBreakdown {
  Scalar reconstruction = 0;
  Scalar coding = 0;
  Scalar l1 = 0;
  Scalar l2 = 0;
  Scalar total = 0;
};

}  // namespace paddle
