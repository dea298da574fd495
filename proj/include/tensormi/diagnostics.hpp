#pragma once

#include "tensormi/interpolation.hpp"

namespace tensormi::diagnostics {

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

struct ScanRow {
  std::string parameters;
  double statistic = 0.0;
  double std_err = 0.0;
};

struct ScanReport {
  std::string scan_id;
  std::string criterion;
  std::vector<ScanRow> rows;
  Verdict verdict = Verdict::fail;
};

// Bayes-optimal replica symmetry: brackets pairing a posterior sample with the
// planted signal equal brackets pairing two independent posterior replicas.
// Tested for the overlap, its square, and entrywise monomials up to degree p.
inline ScanReport nishimori_suite(const Prior& prior, long n, int p, double t, const Mat& r,
                                  long n_disorder, std::uint64_t seed, unsigned threads = 1,
                                  long budget = 1L << 20) {
  model::ConfigTable table(prior, n, p, budget);
  const int k = prior.dim();
  const long nc = table.n_configs();
  struct Sample {
    std::vector<double> planted;  // E<g(x, X)> statistics
    std::vector<double> replica;  // E<g(x, x')>
  };
  std::vector<Sample> samples(static_cast<std::size_t>(n_disorder));
  std::vector<int> degrees;
  for (int d = 1; d <= p; ++d) degrees.push_back(d);

  // The two-replica bracket sum_{c,c'} p_c p_c' (Q(x_c,x_c')_{ab})^d only
  // depends on disorder through the posterior probabilities, so the pairwise
  // overlap powers are shared across samples: pair_pow[(a,b,d)] is the
  // nc x nc matrix of (Q(x_c, x_c')_{ab})^d.
  if (static_cast<double>(nc) * nc * k * k * p > 1e8)
    throw BudgetExceeded("nishimori_suite: two-replica overlap table too large");
  std::vector<Mat> col(static_cast<std::size_t>(k));  // per-coordinate config columns, nc x n
  for (int a = 0; a < k; ++a) {
    Mat ca(nc, n);
    for (long c = 0; c < nc; ++c) {
      auto x = table.config_map(c);
      for (long j = 0; j < n; ++j) ca(c, j) = x(j, a);
    }
    col[static_cast<std::size_t>(a)] = std::move(ca);
  }
  std::vector<Mat> pair_pow;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      Mat base = col[static_cast<std::size_t>(a)] * col[static_cast<std::size_t>(b)].transpose() /
                 static_cast<double>(n);
      Mat acc = base;
      for (int d : degrees) {
        pair_pow.push_back(acc);
        if (d < degrees.back()) acc = acc.cwiseProduct(base);
      }
    }

  parallel_for(static_cast<std::size_t>(n_disorder), threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    auto inst = interpolation::sample_interpolating_instance(prior, n, p, t, r, rng);
    auto g = interpolation::exact_gibbs(inst, table);
    Sample& s = samples[i];
    std::vector<Mat> planted(degrees.size(), Mat::Zero(k, k));
    for (long c = 0; c < nc; ++c) {
      Mat q = model::overlap(table.config(c), inst.base.x);
      Mat qd = q;
      for (std::size_t di = 0; di < degrees.size(); ++di) {
        planted[di] += g.prob[c] * qd;
        if (di + 1 < degrees.size()) qd = qd.cwiseProduct(q);
      }
    }
    std::size_t pp = 0;
    std::vector<double> replica(static_cast<std::size_t>(k) * k * degrees.size());
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        for (std::size_t di = 0; di < degrees.size(); ++di) {
          replica[(static_cast<std::size_t>(a) * k + b) * degrees.size() + di] =
              g.prob.dot(pair_pow[pp] * g.prob);
          ++pp;
        }
    for (std::size_t di = 0; di < degrees.size(); ++di)
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
          s.planted.push_back(planted[di](a, b));
          s.replica.push_back(replica[(static_cast<std::size_t>(a) * k + b) * degrees.size() + di]);
        }
  });

  ScanReport rep;
  rep.scan_id = "nishimori";
  rep.criterion = "|E<g(x,X)> - E<g(x,x')>| <= 3 stderr for overlap monomials";
  std::size_t n_stats = samples.front().planted.size();
  bool ok = true;
  for (std::size_t j = 0; j < n_stats; ++j) {
    MeanVar diff;
    for (const auto& s : samples) diff.add(s.planted[j] - s.replica[j]);
    ScanRow row;
    row.parameters = "stat_" + std::to_string(j);
    row.statistic = diff.mean;
    row.std_err = diff.stderr_mean();
    rep.rows.push_back(row);
    if (std::abs(diff.mean) > 3.0 * std::max(diff.stderr_mean(), 1e-12)) ok = false;
  }
  rep.verdict = ok ? Verdict::pass : Verdict::fail;
  return rep;
}

// n * Var[(1/n) ln Z_n] should stay bounded in n; pass when the max/min ratio
// over the n grid is at most 3.
inline ScanReport free_entropy_variance_scan(const Prior& prior, int p, double lambda,
                                             const std::vector<long>& n_list, long n_disorder,
                                             std::uint64_t seed, unsigned threads = 1,
                                             long budget = 1L << 20) {
  ScanReport rep;
  rep.scan_id = "free_entropy_variance";
  rep.criterion = "max/min of n*Var(F_n) over the n grid <= 3";
  std::vector<double> stats;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    long n = n_list[ni];
    model::ConfigTable table(prior, n, p, budget);
    std::vector<double> vals(static_cast<std::size_t>(n_disorder));
    parallel_for(static_cast<std::size_t>(n_disorder), threads, [&](std::size_t i) {
      Rng rng = make_rng(mix_seed(seed, ni), i);
      auto inst = model::sample_instance(prior, n, p, lambda, rng);
      vals[i] = model::exact_gibbs(inst, table).log_partition / static_cast<double>(n);
    });
    MeanVar mv;
    for (double v : vals) mv.add(v);
    double stat = static_cast<double>(n) * mv.variance();
    // standard error of a variance estimate ~ var * sqrt(2/(m-1))
    double se = stat * std::sqrt(2.0 / static_cast<double>(n_disorder - 1));
    rep.rows.push_back({"n=" + std::to_string(n), stat, se});
    stats.push_back(stat);
  }
  double lo = *std::min_element(stats.begin(), stats.end());
  double hi = *std::max_element(stats.begin(), stats.end());
  if (hi <= 1e-15) {
    rep.verdict = Verdict::pass;  // degenerate model, zero variance throughout
  } else if (lo <= 1e-15) {
    rep.verdict = Verdict::inconclusive;
  } else {
    rep.verdict = hi / lo <= 3.0 ? Verdict::pass : Verdict::fail;
  }
  return rep;
}

// E<||Q - E<Q>||^2> averaged over R drawn from a fixed compact PSD box,
// evaluated at t = 1/2; the sequence should not increase with n.
inline ScanReport overlap_fluctuation_scan(const Prior& prior, int p,
                                           const std::vector<long>& n_list, long n_samples,
                                           std::uint64_t seed, unsigned threads = 1,
                                           long budget = 1L << 20) {
  const int k = prior.dim();
  double radius = 4.0 * std::pow(static_cast<double>(k), 1.5) +
                  std::pow(prior.second_moment().trace(), p - 1);
  ScanReport rep;
  rep.scan_id = "overlap_fluctuation";
  rep.criterion = "E<||Q - E<Q>||^2> nonincreasing in n up to 2 stderr";
  std::vector<double> stats, errs;
  const double t = 0.5;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    long n = n_list[ni];
    model::ConfigTable table(prior, n, p, budget);
    std::vector<double> vals(static_cast<std::size_t>(n_samples));
    parallel_for(static_cast<std::size_t>(n_samples), threads, [&](std::size_t i) {
      Rng rng = make_rng(mix_seed(seed, ni), i);
      // random PSD draw inside the box: scaled Wishart clipped to radius
      std::normal_distribution<double> gauss(0.0, 1.0);
      Mat a(k, k);
      for (int x = 0; x < k; ++x)
        for (int y = 0; y < k; ++y) a(x, y) = gauss(rng);
      Mat r = a * a.transpose();
      std::uniform_real_distribution<double> u(0.05, 1.0);
      r *= u(rng) * radius / std::max(r.norm(), 1e-12);
      auto inst = interpolation::sample_interpolating_instance(prior, n, p, t, r, rng);
      auto g = interpolation::exact_gibbs(inst, table);
      Mat mean_q = Mat::Zero(k, k);
      double mean_q2 = 0.0;
      for (long c = 0; c < table.n_configs(); ++c) {
        Mat qc = model::overlap(table.config(c), inst.base.x);
        mean_q += g.prob[c] * qc;
        mean_q2 += g.prob[c] * qc.squaredNorm();
      }
      vals[i] = mean_q2 - mean_q.squaredNorm();
    });
    MeanVar mv;
    for (double v : vals) mv.add(v);
    rep.rows.push_back({"n=" + std::to_string(n), mv.mean, mv.stderr_mean()});
    stats.push_back(mv.mean);
    errs.push_back(mv.stderr_mean());
  }
  bool ok = true;
  bool noisy = false;
  for (std::size_t i = 1; i < stats.size(); ++i) {
    double slack = 2.0 * (errs[i] + errs[i - 1]);
    if (stats[i] > stats[i - 1] + slack) ok = false;
    if (errs[i] > 0.5 * std::abs(stats[i]) && std::abs(stats[i]) > 1e-12) noisy = true;
  }
  rep.verdict = !ok ? Verdict::fail : (noisy ? Verdict::inconclusive : Verdict::pass);
  return rep;
}

// Convexity (midpoint) and Lipschitz (constant Tr(Sigma_X)/2 in the entrywise
// l1-type norm sum |S - S'|) checks for psi on random PSD pairs.
inline ScanReport psi_shape_suite(const Prior& prior, const QuadSpec& quad, int n_pairs,
                                  std::uint64_t seed, unsigned threads = 1) {
  const int k = prior.dim();
  ScanReport rep;
  rep.scan_id = "psi_shape";
  rep.criterion = "0 convexity/Lipschitz violations beyond 3x quadrature error";
  double lip = prior.second_moment().trace() / 2.0;
  std::vector<double> convexity_gap(static_cast<std::size_t>(n_pairs));
  std::vector<double> lipschitz_gap(static_cast<std::size_t>(n_pairs));
  std::vector<double> tol(static_cast<std::size_t>(n_pairs));
  parallel_for(static_cast<std::size_t>(n_pairs), threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto rand_psd = [&] {
      Mat a(k, k);
      for (int x = 0; x < k; ++x)
        for (int y = 0; y < k; ++y) a(x, y) = gauss(rng);
      std::uniform_real_distribution<double> u(0.1, 2.0);
      Mat m = a * a.transpose();
      return Mat(u(rng) * m / std::max(m.norm(), 1e-12));
    };
    Mat s1 = rand_psd();
    Mat s2 = rand_psd();
    // same quadrature seed for all three evaluations: common random numbers
    QuadSpec q = quad;
    double f1 = replica::psi(prior, s1, q).value;
    double f2 = replica::psi(prior, s2, q).value;
    auto mid = replica::psi(prior, 0.5 * (s1 + s2), q);
    convexity_gap[i] = mid.value - 0.5 * (f1 + f2);  // must be <= 0 + tol
    double dist = (s1 - s2).cwiseAbs().sum();
    lipschitz_gap[i] = std::abs(f1 - f2) - lip * dist;  // must be <= 0 + tol
    tol[i] = 3.0 * std::max(mid.std_err, 1e-9);
  });
  bool ok = true;
  for (int i = 0; i < n_pairs; ++i) {
    auto ui = static_cast<std::size_t>(i);
    if (convexity_gap[ui] > tol[ui] || lipschitz_gap[ui] > tol[ui]) {
      ok = false;
      rep.rows.push_back({"pair_" + std::to_string(i) + "_violation",
                          std::max(convexity_gap[ui], lipschitz_gap[ui]), tol[ui]});
    }
  }
  double worst_cv = *std::max_element(convexity_gap.begin(), convexity_gap.end());
  double worst_lip = *std::max_element(lipschitz_gap.begin(), lipschitz_gap.end());
  rep.rows.push_back({"worst_convexity_gap", worst_cv, 0.0});
  rep.rows.push_back({"worst_lipschitz_gap", worst_lip, 0.0});
  rep.verdict = ok ? Verdict::pass : Verdict::fail;
  return rep;
}

}  // namespace tensormi::diagnostics
