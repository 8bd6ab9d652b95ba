#include "latdyn/latent_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace latdyn {

std::pair<Vec, Matrix> symmetric_eig(const Matrix& a, double tol, int max_sweeps) {
  if (a.rows != a.cols) throw DimensionError("symmetric_eig: matrix not square");
  const std::size_t n = a.rows;
  Matrix m = a;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += m(p, q) * m(p, q);
    return std::sqrt(2.0 * s);
  };

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(m(i, i)));
  scale = std::max(scale, off_norm());
  double threshold = tol * std::max(scale, 1.0);

  for (int sweep = 0; sweep < max_sweeps && off_norm() > threshold; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = m(p, q);
        if (std::abs(apq) <= threshold * 1e-2) continue;
        double app = m(p, p), aqq = m(q, q);
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  Vec evals(n);
  for (std::size_t i = 0; i < n; ++i) evals[i] = m(i, i);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return evals[i] > evals[j]; });

  Vec sorted_vals(n);
  Matrix sorted_vecs(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    sorted_vals[j] = evals[order[j]];
    for (std::size_t i = 0; i < n; ++i) sorted_vecs(i, j) = v(i, order[j]);
  }
  return {std::move(sorted_vals), std::move(sorted_vecs)};
}

namespace {

void fix_row_signs(Matrix& w) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t c = 0; c < w.cols; ++c) {
      double a = std::abs(w(r, c));
      if (a > best + 1e-300 && a > best) {
        best = a;
        arg = c;
      }
    }
    if (w(r, arg) < 0.0)
      for (std::size_t c = 0; c < w.cols; ++c) w(r, c) = -w(r, c);
  }
}

Matrix centered(const Matrix& x, Vec& mean_out) {
  const std::size_t n = x.rows, d = x.cols;
  mean_out.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean_out[c] += x(r, c);
  for (std::size_t c = 0; c < d; ++c) mean_out[c] /= static_cast<double>(n);
  Matrix xc(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) xc(r, c) = x(r, c) - mean_out[c];
  return xc;
}

constexpr std::size_t kGramThreshold = 4096;

}  // namespace

std::pair<Matrix, Vec> fit_pca(const Matrix& features, std::size_t d_z) {
  const std::size_t n = features.rows, d = features.cols;
  if (d_z < 1) throw FitError("fit_pca: d_z must be >= 1");
  if (n < d_z)
    throw FitError("fit_pca: need at least d_z = " + std::to_string(d_z) +
                   " samples, got " + std::to_string(n));
  if (d < d_z)
    throw FitError("fit_pca: feature dimension " + std::to_string(d) +
                   " is smaller than d_z = " + std::to_string(d_z));

  Vec mu_f;
  Matrix xc = centered(features, mu_f);
  Matrix w(d_z, d);

  if (d <= kGramThreshold) {
    // D x D covariance route.
    Matrix cov(d, d);
    for (std::size_t r = 0; r < n; ++r) {
      const double* xr = xc.row(r);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) cov(i, j) += xr[i] * xr[j];
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        cov(i, j) /= static_cast<double>(n);
        cov(j, i) = cov(i, j);
      }
    auto [evals, evecs] = symmetric_eig(cov);
    double top = std::max(std::abs(evals[0]), 1e-300);
    for (std::size_t k = 0; k < d_z; ++k) {
      if (evals[k] <= 1e-12 * top)
        throw FitError("fit_pca: data rank deficient at dimension " + std::to_string(k));
      for (std::size_t c = 0; c < d; ++c) w(k, c) = evecs(c, k);
    }
  } else {
    // Gram trick on the N x N matrix.
    Matrix gram(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double s = 0.0;
        const double* xi = xc.row(i);
        const double* xj = xc.row(j);
        for (std::size_t c = 0; c < d; ++c) s += xi[c] * xj[c];
        gram(i, j) = s / static_cast<double>(n);
        gram(j, i) = gram(i, j);
      }
    auto [evals, evecs] = symmetric_eig(gram);
    double top = std::max(std::abs(evals[0]), 1e-300);
    for (std::size_t k = 0; k < d_z; ++k) {
      if (evals[k] <= 1e-12 * top)
        throw FitError("fit_pca: data rank deficient at dimension " + std::to_string(k));
      // direction = X^T u, normalized
      Vec dir(d, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        double u = evecs(r, k);
        const double* xr = xc.row(r);
        for (std::size_t c = 0; c < d; ++c) dir[c] += u * xr[c];
      }
      double nm = norm2(dir);
      if (nm <= 0.0)
        throw FitError("fit_pca: data rank deficient at dimension " + std::to_string(k));
      for (std::size_t c = 0; c < d; ++c) w(k, c) = dir[c] / nm;
    }
  }

  fix_row_signs(w);
  return {std::move(w), std::move(mu_f)};
}

std::pair<Vec, Vec> fit_standardizer(const Matrix& projected) {
  const std::size_t n = projected.rows, d = projected.cols;
  if (n < 2) throw FitError("fit_standardizer: need at least 2 samples");
  Vec mu(d, 0.0), sigma(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += projected(r, c);
  for (std::size_t c = 0; c < d; ++c) mu[c] /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      double dlt = projected(r, c) - mu[c];
      sigma[c] += dlt * dlt;
    }
  // population (1/N) standard deviation
  for (std::size_t c = 0; c < d; ++c) sigma[c] = std::sqrt(sigma[c] / static_cast<double>(n));
  return {std::move(mu), std::move(sigma)};
}

Vec encode(const Vec& f, const LatentSpaceModel& m) {
  if (f.size() != m.feature_dim())
    throw DimensionError("encode: feature length " + std::to_string(f.size()) +
                         " does not match model dimension " + std::to_string(m.feature_dim()));
  Vec c(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) c[i] = f[i] - m.mu_f[i];
  Vec zp = matvec(m.w, c);
  for (std::size_t i = 0; i < zp.size(); ++i)
    zp[i] = (zp[i] - m.mu_z[i]) / (m.sigma_z[i] + m.eps);
  return zp;
}

LatentSpaceModel fit_latent_space(const Matrix& features, std::size_t d_z, double eps,
                                  std::size_t rest_frame) {
  if (features.rows == 0) throw FitError("fit_latent_space: empty feature matrix");
  if (rest_frame >= features.rows)
    throw ConfigError("fit_latent_space: rest frame index out of range");
  LatentSpaceModel m;
  m.d_z = d_z;
  m.eps = eps;
  std::tie(m.w, m.mu_f) = fit_pca(features, d_z);

  Matrix projected(features.rows, d_z);
  for (std::size_t r = 0; r < features.rows; ++r) {
    Vec c(features.cols);
    for (std::size_t i = 0; i < features.cols; ++i) c[i] = features(r, i) - m.mu_f[i];
    Vec zp = matvec(m.w, c);
    std::copy(zp.begin(), zp.end(), projected.row(r));
  }
  std::tie(m.mu_z, m.sigma_z) = fit_standardizer(projected);

  Vec rest(features.row(rest_frame), features.row(rest_frame) + features.cols);
  m.z_ref = encode(rest, m);
  return m;
}

Matrix encode_all(const Matrix& features, const LatentSpaceModel& m) {
  Matrix out(features.rows, m.d_z);
  for (std::size_t r = 0; r < features.rows; ++r) {
    Vec f(features.row(r), features.row(r) + features.cols);
    Vec z = encode(f, m);
    std::copy(z.begin(), z.end(), out.row(r));
  }
  return out;
}

}  // namespace latdyn
