#include "paddle/data.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace paddle {

namespace {

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) M(i, j) = normal(rng);
  }
  return M;
}

// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
// signs of R's diagonal folded into Q.
Matrix random_orthogonal(Index d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(d, d, rng));
  Matrix Q = qr.householderQ();
  const Matrix& R = qr.matrixQR();
  for (Index j = 0; j < d; ++j) {
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return Q;
}

void normalize_columns(Matrix& M) {
  for (Index j = 0; j < M.cols(); ++j) {
    const double n = M.col(j).norm();
    if (n > 0.0) M.col(j) /= n;
  }
}

void add_noise(SyntheticData& data, std::optional<double> sigma, std::mt19937_64& rng) {
  const double rms = std::sqrt(data.X.squaredNorm() / static_cast<double>(data.X.size()));
  data.noise_sigma = sigma.value_or(0.01 * rms);
  if (data.noise_sigma > 0.0) {
    data.X += data.noise_sigma * gaussian_matrix(data.X.rows(), data.X.cols(), rng);
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (d < 1 || k_true < 1 || n < 1) {
    throw ContractViolation("synthetic spec: d, k_true and n must be positive");
  }
  if (k_true > n) throw ContractViolation("synthetic spec: k_true must not exceed n");
  if (noise_sigma && !(*noise_sigma >= 0.0 && std::isfinite(*noise_sigma))) {
    throw ContractViolation("synthetic spec: noise_sigma must be finite and >= 0");
  }
  if (variant == SyntheticVariant::tight_frame) {
    if (d > k_true) {
      throw ContractViolation("synthetic spec: a tight frame needs k_true >= d");
    }
    if (superposition < 1 || superposition > k_true) {
      throw ContractViolation("synthetic spec: need 1 <= superposition <= k_true");
    }
  }
}

SyntheticData gen_low_rank(const SyntheticSpec& spec) {
  spec.validate();
  if (spec.variant != SyntheticVariant::low_rank) {
    throw ContractViolation("gen_low_rank: spec variant is not low-rank");
  }
  std::mt19937_64 rng(spec.seed);
  SyntheticData data;
  data.generators = gaussian_matrix(spec.d, spec.k_true, rng);
  data.coefficients = gaussian_matrix(spec.k_true, spec.n, rng);
  data.X = data.generators * data.coefficients;
  add_noise(data, spec.noise_sigma, rng);
  return data;
}

double tightness_error(const Matrix& frame) {
  const double scale = static_cast<double>(frame.cols()) / static_cast<double>(frame.rows());
  const Matrix target = scale * Matrix::Identity(frame.rows(), frame.rows());
  return (frame * frame.transpose() - target).norm() / target.norm();
}

Matrix random_tight_frame(Index d, Index K, std::uint64_t seed) {
  if (d < 1 || K < d) throw ContractViolation("random_tight_frame: need 1 <= d <= K");
  std::mt19937_64 rng(seed);
  if (K % d == 0) {
    Matrix frame(d, K);
    for (Index b = 0; b < K / d; ++b) frame.middleCols(b * d, d) = random_orthogonal(d, rng);
    return frame;
  }

  Matrix frame = gaussian_matrix(d, K, rng);
  normalize_columns(frame);
  const double scale = std::sqrt(static_cast<double>(K) / static_cast<double>(d));
  Matrix tight = frame;
  for (int it = 0; it < 10000; ++it) {
    // Nearest tight frame (F F^T)^{-1/2} F, then back to unit-norm atoms.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(frame * frame.transpose());
    const Matrix inv_sqrt = eig.eigenvectors() *
                            eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                            eig.eigenvectors().transpose();
    tight = scale * inv_sqrt * frame;
    frame = tight;
    normalize_columns(frame);
    if (tightness_error(frame) < 1e-12) return frame;
  }
  return tightness_error(frame) < 1e-6 ? frame : tight;
}

SyntheticData gen_tight_frame(const SyntheticSpec& spec) {
  spec.validate();
  if (spec.variant != SyntheticVariant::tight_frame) {
    throw ContractViolation("gen_tight_frame: spec variant is not tight-frame");
  }
  std::mt19937_64 rng(spec.seed);
  SyntheticData data;
  data.generators = random_tight_frame(spec.d, spec.k_true, rng());
  data.coefficients = Matrix::Zero(spec.k_true, spec.n);

  std::uniform_real_distribution<double> magnitude(0.5, 1.0);
  std::bernoulli_distribution negative(0.5);
  std::vector<Index> pool(static_cast<std::size_t>(spec.k_true));
  for (Index j = 0; j < spec.n; ++j) {
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index s = 0; s < spec.superposition; ++s) {
      std::uniform_int_distribution<Index> pick(s, spec.k_true - 1);
      std::swap(pool[static_cast<std::size_t>(s)], pool[static_cast<std::size_t>(pick(rng))]);
      const double m = magnitude(rng);
      data.coefficients(pool[static_cast<std::size_t>(s)], j) = negative(rng) ? -m : m;
    }
  }
  data.X = data.generators * data.coefficients;
  add_noise(data, spec.noise_sigma, rng);
  return data;
}

namespace {

void check_patch_fits(const Matrix& image, Index side) {
  if (side < 1) throw ContractViolation("patch_side must be positive");
  if (image.rows() < side || image.cols() < side) {
    throw ContractViolation("image " + detail::shape_of(image) +
                            " is smaller than patch side " + std::to_string(side));
  }
}

void copy_patch(const Matrix& image, Index row, Index col, Index side, Matrix& out, Index j) {
  // Column-major flattening of the side x side block.
  for (Index c = 0; c < side; ++c) {
    out.col(j).segment(c * side, side) = image.col(col + c).segment(row, side);
  }
}

}  // namespace

Matrix extract_patches(const Matrix& image, const PatchSpec& spec,
                       std::vector<PatchCorner>* corners) {
  const Matrix* images = &image;
  PatchSpec raw = spec;
  raw.normalization = Normalization::none;
  return sample_patches(std::span<const Matrix>(images, 1), raw, corners);
}

Matrix sample_patches(std::span<const Matrix> images, const PatchSpec& spec,
                      std::vector<PatchCorner>* corners) {
  if (images.empty()) throw ContractViolation("sample_patches: no images");
  if (spec.count < 1) throw ContractViolation("sample_patches: count must be positive");
  for (const Matrix& img : images) check_patch_fits(img, spec.patch_side);

  // Whole-set normalization precedes extraction.
  std::vector<Matrix> normalized;
  std::span<const Matrix> source = images;
  if (spec.normalization != Normalization::none) {
    double sum = 0.0;
    double lo = images[0](0, 0);
    double hi = lo;
    Index total = 0;
    for (const Matrix& img : images) {
      sum += img.sum();
      total += img.size();
      lo = std::min(lo, img.minCoeff());
      hi = std::max(hi, img.maxCoeff());
    }
    normalized.reserve(images.size());
    if (spec.normalization == Normalization::berkeley) {
      const double mean = sum / static_cast<double>(total);
      for (const Matrix& img : images) {
        normalized.push_back((img.array() - mean) / kBerkeleyHalfRange);
      }
    } else {
      if (!(hi > lo)) throw ConstantData("unit-range normalization of constant images");
      for (const Matrix& img : images) normalized.push_back((img.array() - lo) / (hi - lo));
    }
    source = normalized;
  }

  const Index side = spec.patch_side;
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> pick_image(0, source.size() - 1);
  Matrix patches(side * side, spec.count);
  if (corners) corners->clear();
  for (Index j = 0; j < spec.count; ++j) {
    const std::size_t k = pick_image(rng);
    const Matrix& img = source[k];
    std::uniform_int_distribution<Index> pick_row(0, img.rows() - side);
    std::uniform_int_distribution<Index> pick_col(0, img.cols() - side);
    const Index r = pick_row(rng);
    const Index c = pick_col(rng);
    copy_patch(img, r, c, side, patches, j);
    if (corners) corners->push_back({static_cast<Index>(k), r, c});
  }
  if (spec.normalization == Normalization::berkeley) {
    patches.rowwise() -= patches.colwise().mean();
  }
  return patches;
}

Matrix normalize(const Matrix& X, Normalization mode) {
  detail::require_nonempty(X, "X");
  switch (mode) {
    case Normalization::none:
      return X;
    case Normalization::berkeley: {
      Matrix out = (X.array() - X.mean()) / kBerkeleyHalfRange;
      out.rowwise() -= out.colwise().mean();
      return out;
    }
    case Normalization::unit_range: {
      const double lo = X.minCoeff();
      const double hi = X.maxCoeff();
      if (!(hi > lo)) throw ConstantData("unit-range normalization of constant data");
      return (X.array() - lo) / (hi - lo);
    }
  }
  throw ContractViolation("normalize: unknown mode");
}

}  // namespace paddle
