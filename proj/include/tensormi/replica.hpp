#pragma once

#include "tensormi/prior.hpp"
#include "tensormi/quadrature.hpp"
#include "tensormi/symmat.hpp"

namespace tensormi::replica {

// psi(S) = E ln sum_x w_x exp(X^T S x + Z^T sqrt(S) x - x^T S x / 2),
// with the expectation over X exact (atoms) and over Z per the quadrature
// spec. The inner log-sum is stabilized.
inline Estimate psi(const Prior& prior, const Mat& s, const QuadSpec& quad) {
  const int k = prior.dim();
  const int na = prior.n_atoms();
  if (symmat::min_eigenvalue(s) < -1e-8) throw NotPSD("psi: S is not PSD");
  Mat b = symmat::sqrt_psd(s);

  // exponent pieces independent of z: e(a, x) = X_a^T S x - x^T S x / 2 + ln w_x
  Mat e(na, na);
  for (int x = 0; x < na; ++x) {
    Vec sx = s * prior.point(x);
    double quad_term = -0.5 * prior.point(x).dot(sx) + prior.log_weight(x);
    for (int a = 0; a < na; ++a) e(a, x) = prior.point(a).dot(sx) + quad_term;
  }
  Mat bx(k, na);  // sqrt(S) x, per atom
  for (int x = 0; x < na; ++x) bx.col(x) = b * prior.point(x);

  std::vector<double> terms(static_cast<std::size_t>(na));
  return gaussian_expectation(k, quad, [&](const Vec& z) {
    double out = 0.0;
    Vec zb = bx.transpose() * z;
    for (int a = 0; a < na; ++a) {
      for (int x = 0; x < na; ++x) terms[static_cast<std::size_t>(x)] = e(a, x) + zb[x];
      out += prior.weight(a) * log_sum_exp(terms);
    }
    return out;
  });
}

// Gradient of psi at S: G = sym(E[<x>_S X^T]) / 2, so that
// psi(S + hD) - psi(S) = h <G, D>_F + o(h) for symmetric D.
inline MatEstimate grad_psi(const Prior& prior, const Mat& s, const QuadSpec& quad) {
  const int k = prior.dim();
  const int na = prior.n_atoms();
  if (symmat::min_eigenvalue(s) < -1e-8) throw NotPSD("grad_psi: S is not PSD");
  Mat b = symmat::sqrt_psd(s);

  Mat e(na, na);
  for (int x = 0; x < na; ++x) {
    Vec sx = s * prior.point(x);
    double quad_term = -0.5 * prior.point(x).dot(sx) + prior.log_weight(x);
    for (int a = 0; a < na; ++a) e(a, x) = prior.point(a).dot(sx) + quad_term;
  }
  Mat bx(k, na);
  for (int x = 0; x < na; ++x) bx.col(x) = b * prior.point(x);

  std::vector<double> logp(static_cast<std::size_t>(na));
  auto est = gaussian_expectation_mat(k, quad, k, k, [&](const Vec& z) {
    Mat acc = Mat::Zero(k, k);
    Vec zb = bx.transpose() * z;
    for (int a = 0; a < na; ++a) {
      for (int x = 0; x < na; ++x) logp[static_cast<std::size_t>(x)] = e(a, x) + zb[x];
      double lse = log_sum_exp(logp);
      Vec mean_x = Vec::Zero(k);
      for (int x = 0; x < na; ++x)
        mean_x += std::exp(logp[static_cast<std::size_t>(x)] - lse) * prior.point(x);
      acc += prior.weight(a) * mean_x * prior.point(a).transpose();
    }
    return acc;
  });
  est.value = 0.5 * symmat::sym(est.value);
  est.std_err = 0.5 * symmat::sym(est.std_err);
  return est;
}

// phi_{p,lambda}(S) = psi(lambda S^{o(p-1)}) - lambda(p-1)/(2p) sum_{ll'} (S^{op})_{ll'}
inline Estimate phi(const Prior& prior, const Mat& s, int p, double lambda, const QuadSpec& quad) {
  if (!(lambda > 0.0)) throw std::invalid_argument("phi: lambda must be > 0");
  if (p < 2) throw std::invalid_argument("phi: p must be >= 2");
  Estimate v = psi(prior, lambda * symmat::hadamard_power(s, p - 1), quad);
  double penalty = lambda * (p - 1) / (2.0 * p) * symmat::hadamard_power(s, p).sum();
  return {v.value - penalty, v.std_err};
}

inline Mat grad_phi(const Prior& prior, const Mat& s, int p, double lambda, const QuadSpec& quad) {
  Mat inner = lambda * symmat::hadamard_power(s, p - 1);
  Mat g_psi = grad_psi(prior, inner, quad).value;
  Mat chain = lambda * (p - 1) * symmat::hadamard_power(s, p - 2).cwiseProduct(g_psi);
  return chain - lambda * (p - 1) / 2.0 * symmat::hadamard_power(s, p - 1);
}

struct TraceEntry {
  int iter;
  double phi;
  double grad_norm;
};

struct LocalMax {
  Mat s;
  double phi;
  double grad_norm;
  bool converged;
};

struct ReplicaSolution {
  Mat s_star;
  double phi_value = 0.0;
  double mi_limit = 0.0;
  std::vector<LocalMax> local_maxima;
  std::vector<TraceEntry> trace;  // of the winning run
  bool converged = false;
  bool boundary_hit = false;
};

struct SolverConfig {
  int max_iters = 5000;
  double grad_tol = 1e-8;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double step_init = 1.0;
  int n_random_starts = 5;
  int grid_points = 400;  // K=1 safeguard scan
  double cluster_tol = 1e-4;
  std::uint64_t seed = 7;
  unsigned threads = 1;
  std::optional<QuadSpec> quad;  // default per K when unset
};

namespace detail {

struct AscentResult {
  LocalMax max;
  std::vector<TraceEntry> trace;
  bool boundary_hit = false;
};

// Projected gradient ascent with Armijo backtracking. The iterate stays in
// the search region ||S||_F <= radius; fixed points satisfy overlap-type
// bounds so a finite radius loses nothing.
inline AscentResult ascend(const Prior& prior, Mat s, int p, double lambda,
                           const QuadSpec& quad, const SolverConfig& cfg, double radius) {
  AscentResult out;
  auto clip = [&](Mat m) {
    m = symmat::project_psd(m);
    double nrm = m.norm();
    if (nrm > radius) {
      m *= radius / nrm;
      out.boundary_hit = true;
    }
    return m;
  };
  s = clip(s);
  double value = phi(prior, s, p, lambda, quad).value;
  double step = cfg.step_init;
  double pg_norm = 0.0;
  bool converged = false;
  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    Mat g = grad_phi(prior, s, p, lambda, quad);
    pg_norm = (clip(s + g) - s).norm();
    if (iter % 25 == 0) out.trace.push_back({iter, value, pg_norm});
    if (pg_norm <= cfg.grad_tol) {
      converged = true;
      break;
    }
    step = std::min(step * 2.0, 64.0);
    bool accepted = false;
    while (step > 1e-14) {
      Mat cand = clip(s + step * g);
      if ((cand - s).norm() == 0.0) {  // step underflowed against the iterate
        step *= cfg.shrink;
        continue;
      }
      double cand_value = phi(prior, cand, p, lambda, quad).value;
      if (cand_value >= value + cfg.armijo_c * g.cwiseProduct(cand - s).sum()) {
        s = cand;
        value = cand_value;
        accepted = true;
        break;
      }
      step *= cfg.shrink;
    }
    if (!accepted) break;  // no ascent direction left at this scale
  }
  out.trace.push_back({iter, value, pg_norm});
  out.max = {s, value, pg_norm, converged};
  return out;
}

}  // namespace detail

// Maximizes phi_{p,lambda} over the PSD cone: multistart projected gradient
// ascent (0, Sigma_X, random PSD starts) plus a dense grid safeguard for K=1.
inline ReplicaSolution solve_replica(const Prior& prior, int p, double lambda,
                                     const SolverConfig& cfg = {}) {
  const int k = prior.dim();
  QuadSpec quad = cfg.quad ? *cfg.quad : QuadSpec::default_for_dim(k, cfg.seed);
  Mat sigma = prior.second_moment();
  double radius = 4.0 * std::max(sigma.norm(), 1e-6) * std::sqrt(static_cast<double>(k));

  std::vector<Mat> starts;
  starts.push_back(Mat::Zero(k, k));
  starts.push_back(sigma);
  for (int r = 0; r < cfg.n_random_starts; ++r) {
    Rng rng = make_rng(cfg.seed, 100 + static_cast<std::uint64_t>(r));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat a(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) a(i, j) = gauss(rng);
    Mat psd = a * a.transpose();
    double nrm = psd.norm();
    if (nrm > 0) psd *= std::max(sigma.norm(), 1e-3) * (0.2 + 0.8 * (r + 1.0) / cfg.n_random_starts) / nrm;
    starts.push_back(psd);
  }
  if (k == 1) {
    double hi = std::max(sigma(0, 0), 1e-6);
    double best_s = 0.0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.grid_points; ++i) {
      double sv = hi * static_cast<double>(i) / (cfg.grid_points - 1);
      Mat m(1, 1);
      m << sv;
      double v = phi(prior, m, p, lambda, quad).value;
      if (v > best_v) {
        best_v = v;
        best_s = sv;
      }
    }
    Mat m(1, 1);
    m << best_s;
    starts.push_back(m);
  }

  std::vector<detail::AscentResult> runs(starts.size());
  parallel_for(starts.size(), cfg.threads, [&](std::size_t i) {
    runs[i] = detail::ascend(prior, starts[i], p, lambda, quad, cfg, radius);
  });

  ReplicaSolution sol;
  std::size_t best = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].max.phi > runs[best].max.phi) best = i;
    sol.boundary_hit = sol.boundary_hit || runs[i].boundary_hit;
    bool duplicate = false;
    for (const auto& lm : sol.local_maxima)
      if ((lm.s - runs[i].max.s).norm() <= cfg.cluster_tol) {
        duplicate = true;
        break;
      }
    if (!duplicate) sol.local_maxima.push_back(runs[i].max);
  }
  sol.s_star = runs[best].max.s;
  sol.phi_value = runs[best].max.phi;
  sol.trace = runs[best].trace;
  sol.converged = runs[best].max.converged;
  sol.mi_limit = lambda / (2.0 * p) * symmat::hadamard_power(sigma, p).sum() - sol.phi_value;
  return sol;
}

struct SweepRow {
  double lambda;
  ReplicaSolution solution;
};

// Warm-started sweep over an ascending lambda grid.
inline std::vector<SweepRow> lambda_sweep(const Prior& prior, int p,
                                          const std::vector<double>& lambda_grid,
                                          const SolverConfig& cfg = {}) {
  std::vector<SweepRow> rows;
  std::optional<Mat> warm;
  const int k = prior.dim();
  QuadSpec quad = cfg.quad ? *cfg.quad : QuadSpec::default_for_dim(k, cfg.seed);
  Mat sigma = prior.second_moment();
  double radius = 4.0 * std::max(sigma.norm(), 1e-6) * std::sqrt(static_cast<double>(k));
  for (double lambda : lambda_grid) {
    ReplicaSolution sol = solve_replica(prior, p, lambda, cfg);
    if (warm) {
      auto run = detail::ascend(prior, *warm, p, lambda, quad, cfg, radius);
      if (run.max.phi > sol.phi_value) {
        sol.s_star = run.max.s;
        sol.phi_value = run.max.phi;
        sol.converged = run.max.converged;
        sol.trace = run.trace;
        sol.mi_limit = lambda / (2.0 * p) * symmat::hadamard_power(sigma, p).sum() - sol.phi_value;
      }
    }
    warm = sol.s_star;
    rows.push_back({lambda, std::move(sol)});
  }
  return rows;
}

}  // namespace tensormi::replica
