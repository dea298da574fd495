#pragma once

#include "tensormi/common.hpp"

namespace tensormi::symmat {

inline Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline double min_eigenvalue(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Mat& a, double tol = 1e-10) {
  return min_eigenvalue(a) >= -tol;
}

// Unit symmetric direction E^{(l,l')}: ones at (l,l') and (l',l).
inline Mat unit_direction(int dim, int l, int lp) {
  Mat e = Mat::Zero(dim, dim);
  e(l, lp) = 1.0;
  e(lp, l) = 1.0;
  return e;
}

// Entrywise k-th power; k=0 gives the all-ones matrix.
inline Mat hadamard_power(const Mat& a, int k) {
  if (k < 0) throw std::invalid_argument("hadamard_power: negative exponent");
  Mat r = Mat::Ones(a.rows(), a.cols());
  for (int i = 0; i < k; ++i) r = r.cwiseProduct(a);
  return r;
}

// PSD square root via eigendecomposition, eigenvalues below -1e-8 rejected,
// round-off negatives clamped to zero.
inline Mat sqrt_psd(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(a));
  Vec ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-8) throw NotPSD("sqrt_psd: matrix is not PSD");
  Vec s = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

inline Mat project_psd(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(a));
  Vec ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Solves sqrt(R) D + D sqrt(R) = B in the eigenbasis of R. R must be PD.
inline Mat sylvester_sqrt_solve(const Mat& r, const Mat& b) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(r));
  Vec mu = es.eigenvalues();
  if (mu.minCoeff() <= 1e-10) throw SingularMatrix("sylvester_sqrt_solve: R is singular");
  const Mat& v = es.eigenvectors();
  Mat bt = v.transpose() * b * v;
  Mat dt(r.rows(), r.cols());
  for (int i = 0; i < r.rows(); ++i)
    for (int j = 0; j < r.cols(); ++j)
      dt(i, j) = bt(i, j) / (std::sqrt(mu[i]) + std::sqrt(mu[j]));
  return sym(v * dt * v.transpose());
}

// d sqrt(R) / d R_{ll'}: unique symmetric solution of
// sqrt(R) D + D sqrt(R) = E^{(l,l')}.
inline Mat dsqrt(const Mat& r, int l, int lp) {
  return sylvester_sqrt_solve(r, unit_direction(static_cast<int>(r.rows()), l, lp));
}

// d^2 sqrt(R) / d R_{ll'}^2: solves sqrt(R) D + D sqrt(R) = -2 (dsqrt)^2.
inline Mat d2sqrt(const Mat& r, int l, int lp) {
  Mat d1 = dsqrt(r, l, lp);
  return sylvester_sqrt_solve(r, -2.0 * d1 * d1);
}

// Hypercube of diagonally dominant PD perturbations with side s_n.
struct PerturbationBox {
  int dim;
  double s_n;

  PerturbationBox(int k, double sn) : dim(k), s_n(sn) {
    if (!(sn > 0.0 && sn < 1.0)) throw std::invalid_argument("PerturbationBox: s_n must be in (0,1)");
  }

  Mat sample(Rng& rng) const {
    std::uniform_real_distribution<double> off(s_n, 2.0 * s_n);
    std::uniform_real_distribution<double> diag(2.0 * dim * s_n, (2.0 * dim + 1.0) * s_n);
    Mat e(dim, dim);
    for (int i = 0; i < dim; ++i) {
      e(i, i) = diag(rng);
      for (int j = i + 1; j < dim; ++j) e(i, j) = e(j, i) = off(rng);
    }
    return e;
  }
};

// Shrink rate s_n = (0.99/n)^alpha with alpha at half the admissible
// upper limit 1/(9+3K(K+1)), so that s_n -> 0 and s_n^{9+3K(K+1)} n -> inf.
inline double default_sn(long n, int k) {
  double alpha = 0.5 / (9.0 + 3.0 * k * (k + 1));
  return std::pow(0.99 / static_cast<double>(n), alpha);
}

}  // namespace tensormi::symmat
