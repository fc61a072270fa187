#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "paddle/data.hpp"
#include "paddle/metrics.hpp"
#include "paddle/prox.hpp"

using namespace paddle;

TEST_CASE("pca basis") {
  SUBCASE("plane") {
    std::mt19937_64 rng(1);
    Matrix X = Matrix::Zero(4, 50);
    X.topRows(2) = oracle::gaussian(2, 50, rng);
    const Matrix B = pca_basis(X, 2);
    CHECK((B.transpose() * B - Matrix::Identity(2, 2)).norm() < 1e-12);
    CHECK(largest_principal_angle(B, Matrix(Matrix::Identity(4, 2))) < 1e-12);
  }
  SUBCASE("isotropic data gives an orthonormal vector") {
    std::mt19937_64 rng(2);
    const Matrix B = pca_basis(oracle::gaussian(5, 40, rng), 1);
    CHECK(B.col(0).norm() == doctest::Approx(1.0));
  }
  SUBCASE("exact low-rank recovery") {
    SyntheticSpec spec;
    spec.noise_sigma = 0.0;
    spec.n = 500;
    const SyntheticData data = gen_low_rank(spec);
    const Matrix B = pca_basis(data.X, 15);
    const Matrix centered = data.X.colwise() - data.X.rowwise().mean();
    CHECK((centered - B * (B.transpose() * centered)).norm() < 1e-10 * centered.norm());
  }
  SUBCASE("agrees with the covariance eigenvectors") {
    std::mt19937_64 rng(3);
    const Matrix mix = oracle::gaussian(6, 6, rng);
    const Matrix X = mix * oracle::gaussian(6, 80, rng);
    const Matrix ours = pca_basis(X, 3);
    const Matrix ref = oracle::pca_basis(X, 3);
    CHECK(oracle::largest_principal_angle(ours, ref) < 1e-8);
  }
  CHECK_THROWS_AS(pca_basis(Matrix(Matrix::Ones(3, 5)), 4), ContractViolation);
  CHECK_THROWS_AS(pca_basis(Matrix(Matrix::Ones(3, 5)), 0), ContractViolation);
}

TEST_CASE("largest principal angle") {
  const Matrix e1 = Matrix::Identity(2, 1);
  Matrix e2(2, 1);
  e2 << 0, 1;
  Matrix diag(2, 1);
  diag << 1, 1;
  CHECK(largest_principal_angle(e1, e1) == 0.0);
  CHECK(largest_principal_angle(e1, e2) == doctest::Approx(std::numbers::pi / 2));
  CHECK(largest_principal_angle(e1, diag) == doctest::Approx(std::numbers::pi / 4));

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix A = oracle::gaussian(7, 3, rng);
    const Matrix B = A + 1e-6 * oracle::gaussian(7, 3, rng);
    CHECK(largest_principal_angle(A, B) ==
          doctest::Approx(oracle::largest_principal_angle(A, B)).epsilon(1e-6));
    const Matrix C = oracle::gaussian(7, 3, rng);
    CHECK(largest_principal_angle(A, C) ==
          doctest::Approx(oracle::largest_principal_angle(A, C)).epsilon(1e-8));
  }
  // Span, not basis, matters.
  const Matrix A = oracle::gaussian(6, 3, rng);
  CHECK(largest_principal_angle(A, Matrix(A * oracle::gaussian(3, 3, rng))) < 1e-10);
  CHECK_THROWS_AS(largest_principal_angle(Matrix(Matrix::Zero(3, 1)), e1), ContractViolation);
  CHECK_THROWS_AS(largest_principal_angle(Matrix(Matrix::Zero(3, 1)),
                                          Matrix(Matrix::Identity(3, 1))),
                  ContractViolation);
}

TEST_CASE("dual distance") {
  std::mt19937_64 rng(5);
  const Matrix D = project_columns(oracle::gaussian(5, 4, rng, 3.0));
  CHECK(dual_distance(D, Matrix(D.transpose())).value == doctest::Approx(0.0));
  CHECK(dual_distance(D, Matrix(-D.transpose())).value == doctest::Approx(0.0));

  Matrix I = Matrix::Identity(3, 3);
  Matrix shifted(3, 3);
  shifted << 0, 1, 0,
             0, 0, 1,
             1, 0, 0;
  CHECK(dual_distance(I, shifted).value == doctest::Approx(1.0));

  Matrix C = D.transpose();
  C.row(1).setZero();
  const auto partial = dual_distance(D, C);
  CHECK(partial.pairs_used == 3);
  CHECK(partial.pairs_skipped == 1);
  CHECK(dual_distance(D, C, {true, false, false, false}).pairs_used == 1);
  CHECK_THROWS_AS(dual_distance(D, Matrix(Matrix::Zero(4, 5))), UndefinedMetric);
  CHECK_THROWS_AS(dual_distance(D, Matrix(Matrix::Zero(5, 4))), ContractViolation);
}

TEST_CASE("support statistics") {
  Matrix U = Matrix::Zero(6, 3);
  U.col(0).head(2).setOnes();
  U.col(1).head(4).setOnes();
  U.col(2).setOnes();
  const SupportStats s = support_stats(U);
  CHECK(s.avg_support == doctest::Approx(4.0));
  CHECK(s.per_atom_usage[0] == 3);
  CHECK(s.per_atom_usage[5] == 1);

  const SupportStats z = support_stats(Matrix(Matrix::Zero(4, 5)));
  CHECK(z.avg_support == 0.0);
  CHECK(std::all_of(z.per_atom_usage.begin(), z.per_atom_usage.end(),
                    [](Index n) { return n == 0; }));

  std::mt19937_64 rng(6);
  const Matrix shrunk = soft_threshold(oracle::gaussian(10, 20, rng), 0.8);
  CHECK(support_stats(shrunk, 0.0).avg_support == support_stats(shrunk, 1e-12).avg_support);
  CHECK_THROWS_AS(support_stats(shrunk, -1.0), ContractViolation);
}

TEST_CASE("atom matching") {
  std::mt19937_64 rng(7);
  const Matrix T = project_columns(oracle::gaussian(8, 5, rng, 3.0));

  SUBCASE("permuted and negated") {
    Matrix L(8, 5);
    const std::array<Index, 5> perm{3, 0, 4, 1, 2};
    for (Index j = 0; j < 5; ++j) L.col(j) = (j % 2 ? -1.0 : 2.0) * T.col(perm[static_cast<std::size_t>(j)]);
    const auto r = match_atoms(T, L, 0.999);
    CHECK(r.matched_fraction == 1.0);
    for (const auto& p : r.pairs) CHECK(perm[static_cast<std::size_t>(p.learned_index)] == p.true_index);
  }
  SUBCASE("orthogonal learned atoms") {
    Matrix A = Matrix::Zero(4, 2);
    A(0, 0) = A(1, 1) = 1;
    Matrix B = Matrix::Zero(4, 2);
    B(2, 0) = B(3, 1) = 1;
    CHECK(match_atoms(A, B, 0.5).matched_fraction == 0.0);
  }
  SUBCASE("small perturbation, checked against every assignment") {
    const Matrix T3 = T.leftCols(3);
    const Matrix L = T3 + 1e-6 * oracle::gaussian(8, 3, rng);
    const auto r = match_atoms(T3, L, 0.9);
    REQUIRE(r.pairs.size() == 3);
    for (const auto& p : r.pairs) CHECK(p.cosine > 1.0 - 1e-9);

    auto cosine = [&](Index i, Index j) {
      return std::abs(T3.col(i).dot(L.col(j))) / (T3.col(i).norm() * L.col(j).norm());
    };
    std::array<Index, 3> perm{0, 1, 2};
    double best = -1.0;
    std::array<Index, 3> best_perm{};
    do {
      double total = 0.0;
      for (Index i = 0; i < 3; ++i) total += cosine(i, perm[static_cast<std::size_t>(i)]);
      if (total > best) {
        best = total;
        best_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (const auto& p : r.pairs) {
      CHECK(best_perm[static_cast<std::size_t>(p.true_index)] == p.learned_index);
    }
  }
  SUBCASE("zero atoms are reported and never matched") {
    Matrix L = T;
    L.col(2).setZero();
    const auto r = match_atoms(T, L, 0.99);
    REQUIRE(r.zero_learned.size() == 1);
    CHECK(r.zero_learned[0] == 2);
    CHECK(r.matched_fraction == doctest::Approx(0.8));
  }
  CHECK_THROWS_AS(match_atoms(T, T, 0.0), ContractViolation);
  CHECK_THROWS_AS(match_atoms(T, Matrix(Matrix::Zero(3, 5)), 0.9), ContractViolation);
}
