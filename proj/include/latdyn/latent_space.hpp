#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "latdyn/linalg.hpp"

namespace latdyn {

// PCA + standardization map from upstream feature vectors to the
// standardized residual-latent space.
struct LatentSpaceModel {
  Matrix w;        // d_z x D, orthonormal rows
  Vec mu_f;        // D
  Vec mu_z;        // d_z
  Vec sigma_z;     // d_z, entries >= 0
  double eps = 1e-8;
  Vec z_ref;       // d_z
  std::size_t d_z = 0;

  std::size_t feature_dim() const { return mu_f.size(); }
};

// Deterministic symmetric eigendecomposition (cyclic Jacobi).
// Returns eigenvalues in decreasing order with matching eigenvector columns.
std::pair<Vec, Matrix> symmetric_eig(const Matrix& a, double tol = 1e-14,
                                     int max_sweeps = 100);

// Top-d_z principal directions of the centered samples (rows of `features`).
// Rows of W orthonormal, decreasing variance, sign fixed so each row's
// largest-|entry| is positive (tie: lowest index).
std::pair<Matrix, Vec> fit_pca(const Matrix& features, std::size_t d_z);

// Per-dimension mean and population (1/N) standard deviation.
std::pair<Vec, Vec> fit_standardizer(const Matrix& projected);

Vec encode(const Vec& f, const LatentSpaceModel& m);

// Fits W, mu_f, mu_z, sigma_z and z_ref from a training feature matrix.
// rest_frame selects which row provides z_ref (default 0, the first frame).
LatentSpaceModel fit_latent_space(const Matrix& features, std::size_t d_z,
                                  double eps = 1e-8, std::size_t rest_frame = 0);

// Encodes every row of a feature matrix.
Matrix encode_all(const Matrix& features, const LatentSpaceModel& m);

}  // namespace latdyn
