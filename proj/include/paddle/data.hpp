#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "paddle/types.hpp"

namespace paddle {

enum class SyntheticVariant { low_rank, tight_frame };

struct SyntheticSpec {
  SyntheticVariant variant = SyntheticVariant::low_rank;
  Index d = 25;
  Index k_true = 15;
  Index n = 2000;
  Index superposition = 3;  ///< atoms per example, tight frame only
  /// Standard deviation of the additive noise. When unset, 1% of the RMS
  /// of the noiseless data.
  std::optional<double> noise_sigma;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  Matrix X;             ///< d x n
  Matrix generators;    ///< d x k_true, Gaussian vectors or frame atoms
  Matrix coefficients;  ///< k_true x n, X = generators * coefficients + noise
  double noise_sigma = 0.0;
};

/// X = G A + noise with G (d x k_true) and A (k_true x n) i.i.d. standard normal.
SyntheticData gen_low_rank(const SyntheticSpec& spec);

/// Each example is a signed superposition of `superposition` distinct
/// atoms of a unit-norm tight frame, magnitudes uniform in [0.5, 1].
SyntheticData gen_tight_frame(const SyntheticSpec& spec);

/// d x K unit-norm tight frame. A union of K/d random orthonormal bases
/// when d divides K, otherwise a random frame equalized by alternating
/// symmetric orthogonalization and column normalization.
Matrix random_tight_frame(Index d, Index K, std::uint64_t seed);

/// ||F F^T - (K/d) I||_F / ||(K/d) I||_F
double tightness_error(const Matrix& frame);

enum class Normalization { berkeley, unit_range, none };

/// Half of the 8-bit intensity range used by the berkeley normalization.
inline constexpr double kBerkeleyHalfRange = 125.0;

struct PatchSpec {
  Index patch_side = 12;
  Index count = 1000;
  Normalization normalization = Normalization::berkeley;
  std::uint64_t seed = 0;
};

struct PatchCorner {
  Index image = 0;
  Index row = 0;
  Index col = 0;
};

/// `count` patches with top-left corners drawn uniformly with replacement,
/// each flattened column-major into a column of length patch_side^2. No
/// normalization is applied.
Matrix extract_patches(const Matrix& image, const PatchSpec& spec,
                       std::vector<PatchCorner>* corners = nullptr);

/// Patch pipeline over an image set: normalizes the images as a whole,
/// samples patches (image chosen uniformly, then the corner), and for the
/// berkeley mode recenters every patch on its own mean.
Matrix sample_patches(std::span<const Matrix> images, const PatchSpec& spec,
                      std::vector<PatchCorner>* corners = nullptr);

/// berkeley: (X - mean(X)) / 125, then every column recentered.
/// unit_range: affine map of [min(X), max(X)] onto [0, 1].
Matrix normalize(const Matrix& X, Normalization mode);

}  // namespace paddle
