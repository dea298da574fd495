#pragma once

#include "tensormi/model.hpp"
#include "tensormi/replica.hpp"
#include "tensormi/symmat.hpp"

namespace tensormi::interpolation {

// Tensor channel at strength (1-t)*lambda plus the Gaussian side channel
// Ytilde_j = sqrt(R) X_j + Ztilde_j. Ztilde is kept for the L-matrix.
struct InterpolatingInstance {
  model::TensorInstance base;  // coeff already includes the (1-t) damping
  double t = 0.0;
  Mat r;
  Mat sqrt_r;
  Mat ytilde;  // n x K
  Mat ztilde;  // n x K
};

inline InterpolatingInstance sample_interpolating_instance(const Prior& prior, long n, int p,
                                                           double t, const Mat& r, Rng& rng,
                                                           double lambda = 1.0) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("interpolation: t outside [0,1]");
  InterpolatingInstance inst;
  inst.t = t;
  inst.r = symmat::sym(r);
  inst.sqrt_r = symmat::sqrt_psd(inst.r);
  inst.base = model::sample_instance(prior, n, p, (1.0 - t) * lambda, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int k = prior.dim();
  inst.ztilde.resize(n, k);
  for (long j = 0; j < n; ++j)
    for (int l = 0; l < k; ++l) inst.ztilde(j, l) = gauss(rng);
  inst.ytilde = inst.base.x * inst.sqrt_r + inst.ztilde;
  return inst;
}

inline double interpolating_hamiltonian(const Mat& x, const InterpolatingInstance& inst) {
  double h = model::hamiltonian(x, inst.base);
  h += 0.5 * (x * inst.r).cwiseProduct(x).sum();
  h -= (x * inst.sqrt_r).cwiseProduct(inst.ytilde).sum();
  return h;
}

inline model::GibbsEnsemble exact_gibbs(const InterpolatingInstance& inst,
                                        const model::ConfigTable& table) {
  const auto& base = inst.base;
  double c2 = base.coeff * base.coeff;
  Vec lw = -0.5 * c2 * table.sq() + base.coeff * (table.m() * base.y) + table.log_prior();
  for (long c = 0; c < table.n_configs(); ++c) {
    Mat x = table.config(c);
    lw[c] += -0.5 * (x * inst.r).cwiseProduct(x).sum() +
             (x * inst.sqrt_r).cwiseProduct(inst.ytilde).sum();
  }
  return model::GibbsEnsemble::from_log_weights(table, std::move(lw));
}

// Per-(t,R) Gibbs statistics the interpolation machinery consumes: the mean
// overlap E<Q>, the entrywise p-th moment E<Q_{ll'}^p>, and the asymmetry of
// the raw E<Q> estimate before symmetrization.
struct NodeStats {
  MatEstimate mean_q;    // symmetrized
  MatEstimate mean_qp;   // E<(Q_{ll'})^p>, unsymmetrized entrywise
  double asymmetry = 0.0;
};

inline NodeStats node_stats(const Prior& prior, long n, int p, double t, const Mat& r,
                            long n_disorder, std::uint64_t seed, const model::ConfigTable& table,
                            unsigned threads = 1) {
  const int k = prior.dim();
  std::vector<Mat> qs(static_cast<std::size_t>(n_disorder));
  std::vector<Mat> qps(static_cast<std::size_t>(n_disorder));
  parallel_for(static_cast<std::size_t>(n_disorder), threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    auto inst = sample_interpolating_instance(prior, n, p, t, r, rng);
    auto g = exact_gibbs(inst, table);
    Mat q = Mat::Zero(k, k);
    Mat qp = Mat::Zero(k, k);
    for (long c = 0; c < table.n_configs(); ++c) {
      Mat qc = model::overlap(table.config(c), inst.base.x);
      q += g.prob[c] * qc;
      qp += g.prob[c] * qc.array().pow(p).matrix();
    }
    qs[i] = q;
    qps[i] = qp;
  });
  std::vector<MeanVar> mq(static_cast<std::size_t>(k) * k), mqp(static_cast<std::size_t>(k) * k);
  for (long i = 0; i < n_disorder; ++i)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        mq[static_cast<std::size_t>(a) * k + b].add(qs[static_cast<std::size_t>(i)](a, b));
        mqp[static_cast<std::size_t>(a) * k + b].add(qps[static_cast<std::size_t>(i)](a, b));
      }
  NodeStats out;
  out.mean_q.value.resize(k, k);
  out.mean_q.std_err.resize(k, k);
  out.mean_qp.value.resize(k, k);
  out.mean_qp.std_err.resize(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      out.mean_q.value(a, b) = mq[static_cast<std::size_t>(a) * k + b].mean;
      out.mean_q.std_err(a, b) = mq[static_cast<std::size_t>(a) * k + b].stderr_mean();
      out.mean_qp.value(a, b) = mqp[static_cast<std::size_t>(a) * k + b].mean;
      out.mean_qp.std_err(a, b) = mqp[static_cast<std::size_t>(a) * k + b].stderr_mean();
    }
  out.asymmetry = (out.mean_q.value - out.mean_q.value.transpose()).norm();
  out.mean_q.value = symmat::sym(out.mean_q.value);
  out.mean_q.std_err = symmat::sym(out.mean_q.std_err);
  return out;
}

inline MatEstimate gibbs_mean_overlap(const Prior& prior, long n, int p, double t, const Mat& r,
                                      long n_disorder, std::uint64_t seed,
                                      const model::ConfigTable& table, unsigned threads = 1) {
  return node_stats(prior, n, p, t, r, n_disorder, seed, table, threads).mean_q;
}

struct InterpolationPath {
  Mat epsilon;
  std::vector<double> t;
  std::vector<Mat> r;
  std::vector<Mat> vector_field;    // G at each grid node (fresh estimate)
  std::vector<NodeStats> stats;     // node statistics reused by the checks
  std::vector<double> projection_distance;
  double max_stderr = 0.0;
  int steps = 0;
  long n_disorder = 0;
  std::uint64_t seed = 0;
};

// R' = sym(E<Q>)^{o(p-1)}, estimated from a fresh disorder batch per stage.
// RK4 with fixed step; every accepted step is projected back to the PSD cone.
inline InterpolationPath solve_interpolation_ode(const Prior& prior, long n, int p,
                                                 const Mat& epsilon, int steps, long n_disorder,
                                                 std::uint64_t seed, unsigned threads = 1,
                                                 long budget = 1L << 20) {
  if (steps < 2 || steps % 2 != 0)
    throw std::invalid_argument("solve_interpolation_ode: steps must be even and >= 2");
  model::ConfigTable table(prior, n, p, budget);
  InterpolationPath path;
  path.epsilon = symmat::sym(epsilon);
  path.steps = steps;
  path.n_disorder = n_disorder;
  path.seed = seed;
  double h = 1.0 / steps;
  Mat r = path.epsilon;
  std::uint64_t stage = 0;
  auto field = [&](double t, const Mat& rr, NodeStats* keep) {
    Mat r_psd = symmat::project_psd(rr);
    NodeStats st = node_stats(prior, n, p, std::min(t, 1.0), r_psd, n_disorder,
                              mix_seed(seed, 1000 + stage++), table, threads);
    path.max_stderr = std::max(path.max_stderr, st.mean_q.std_err.maxCoeff());
    if (keep) *keep = st;
    return symmat::hadamard_power(st.mean_q.value, p - 1);
  };
  for (int s = 0; s <= steps; ++s) {
    double t = h * s;
    NodeStats st;
    Mat g = field(t, r, &st);
    path.t.push_back(t);
    path.r.push_back(r);
    path.vector_field.push_back(g);
    path.stats.push_back(std::move(st));
    if (s == steps) break;
    Mat k1 = g;
    Mat k2 = field(t + 0.5 * h, r + 0.5 * h * k1, nullptr);
    Mat k3 = field(t + 0.5 * h, r + 0.5 * h * k2, nullptr);
    Mat k4 = field(t + h, r + h * k3, nullptr);
    Mat next = r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Mat projected = symmat::project_psd(next);
    double dist = (projected - next).norm();
    path.projection_distance.push_back(dist);
    if (dist > 10.0 * std::max(path.max_stderr, 1e-14))
      throw EstimatorTooNoisy("solve_interpolation_ode: PSD projection exceeds noise budget");
    r = projected;
  }
  return path;
}

inline double simpson(const std::vector<double>& values, double h) {
  std::size_t m = values.size();
  if (m < 3 || m % 2 == 0) throw std::invalid_argument("simpson: need odd number of nodes");
  double acc = values.front() + values.back();
  for (std::size_t i = 1; i + 1 < m; ++i) acc += values[i] * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

struct CheckReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double eps_term = 0.0;
  double one_over_n = 0.0;
  double mc_3sigma = 0.0;
  bool pass = false;
};

// Free-entropy decomposition along the path:
// f_n ?= psi(R(1)) + (1/2p) int sum_{ll'} [E<Q^p> - p R'_{ll'} E<Q>] dt,
// up to Tr(Sigma_X)||eps||/2 + O(1/n) + Monte Carlo noise.
inline CheckReport sum_rule_check(const Prior& prior, long n, int p,
                                  const InterpolationPath& path, long n_disorder,
                                  std::uint64_t seed, unsigned threads = 1) {
  Estimate lhs = model::free_entropy_mc(prior, n, p, 1.0, n_disorder, seed, threads);
  std::vector<double> integrand;
  double integrand_err = 0.0;
  for (std::size_t s = 0; s < path.t.size(); ++s) {
    const NodeStats& st = path.stats[s];
    const Mat& rp = path.vector_field[s];
    double g = st.mean_qp.value.sum() - p * rp.cwiseProduct(st.mean_q.value).sum();
    integrand.push_back(g);
    integrand_err = std::max(integrand_err,
                             st.mean_qp.std_err.sum() + p * rp.cwiseProduct(st.mean_q.std_err).sum());
  }
  double h = path.t[1] - path.t[0];
  double integral = simpson(integrand, h);
  QuadSpec quad = QuadSpec::default_for_dim(prior.dim(), seed);
  Estimate psi_end = replica::psi(prior, path.r.back(), quad);
  CheckReport rep;
  rep.lhs = lhs.value;
  rep.rhs = psi_end.value + integral / (2.0 * p);
  rep.residual = rep.lhs - rep.rhs;
  rep.eps_term = prior.second_moment().trace() * path.epsilon.norm() / 2.0;
  rep.one_over_n = 5.0 / static_cast<double>(n);
  rep.mc_3sigma = 3.0 * (lhs.std_err + psi_end.std_err + integrand_err / (2.0 * p));
  rep.pass = std::abs(rep.residual) <= rep.eps_term + rep.one_over_n + rep.mc_3sigma;
  return rep;
}

// (1/n) E ln Z at a fixed (t,R), sharing disorder seeds across calls so that
// finite differences in t use common random numbers.
inline Estimate free_entropy_tr(const Prior& prior, long n, int p, double t, const Mat& r,
                                long n_disorder, std::uint64_t seed,
                                const model::ConfigTable& table, unsigned threads = 1) {
  std::vector<double> vals(static_cast<std::size_t>(n_disorder));
  parallel_for(static_cast<std::size_t>(n_disorder), threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    auto inst = sample_interpolating_instance(prior, n, p, t, r, rng);
    vals[i] = exact_gibbs(inst, table).log_partition / static_cast<double>(n);
  });
  MeanVar mv;
  for (double v : vals) mv.add(v);
  return {mv.mean, mv.stderr_mean()};
}

// d/dt of the path free entropy at an interior grid node versus
// -(1/2p) sum E<Q^p> + (1/2) Tr(R' E<Q>), with a central finite difference
// along the path as the reference.
inline CheckReport free_entropy_t_derivative_check(const Prior& prior, long n, int p,
                                                   const InterpolationPath& path,
                                                   std::size_t node, long n_disorder,
                                                   std::uint64_t seed, unsigned threads = 1,
                                                   long budget = 1L << 20) {
  if (node == 0 || node + 1 >= path.t.size())
    throw std::invalid_argument("free_entropy_t_derivative_check: interior node required");
  model::ConfigTable table(prior, n, p, budget);
  double h = path.t[node + 1] - path.t[node - 1];
  Estimate lo = free_entropy_tr(prior, n, p, path.t[node - 1], path.r[node - 1], n_disorder,
                                seed, table, threads);
  Estimate hi = free_entropy_tr(prior, n, p, path.t[node + 1], path.r[node + 1], n_disorder,
                                seed, table, threads);
  const NodeStats& st = path.stats[node];
  const Mat& rp = path.vector_field[node];
  CheckReport rep;
  rep.lhs = (hi.value - lo.value) / h;
  rep.rhs = -st.mean_qp.value.sum() / (2.0 * p) + 0.5 * rp.cwiseProduct(st.mean_q.value).sum();
  rep.residual = rep.lhs - rep.rhs;
  rep.one_over_n = 1.0 / static_cast<double>(n);
  rep.mc_3sigma = 3.0 * ((lo.std_err + hi.std_err) / h + st.mean_qp.std_err.sum() / (2.0 * p) +
                         0.5 * rp.cwiseProduct(st.mean_q.std_err).sum());
  rep.pass = std::abs(rep.residual) <= rep.one_over_n + rep.mc_3sigma;
  return rep;
}

inline double h_p(double r, double q, int p) {
  if (p < 2) throw std::invalid_argument("h_p: p must be >= 2");
  return std::pow(q, p) - p * q * std::pow(r, p - 1) + (p - 1) * std::pow(r, p);
}

struct DivergenceResult {
  Mat delta;
  Mat delta_stderr;
  double divergence = 0.0;
  double div_stderr = 0.0;
  Mat mean_q;
};

// Divergence of the ODE vector field over the matching R-entries:
// n(p-1) sum_{ll'} E[<Q_{ll'}>]^{p-2} Delta_{ll'}, with Delta the gap between
// the thermal variance of the symmetrized overlap and the quenched spread of
// its bracket around <x>^T<x>/n. Both expectations share disorder.
inline DivergenceResult divergence_gn(const Prior& prior, long n, int p, double t, const Mat& r,
                                      long n_disorder, std::uint64_t seed,
                                      const model::ConfigTable& table, unsigned threads = 1) {
  const int k = prior.dim();
  std::vector<Mat> per_sample(static_cast<std::size_t>(n_disorder));
  std::vector<Mat> qs(static_cast<std::size_t>(n_disorder));
  parallel_for(static_cast<std::size_t>(n_disorder), threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    auto inst = sample_interpolating_instance(prior, n, p, t, r, rng);
    auto g = exact_gibbs(inst, table);
    Mat mean_qs = Mat::Zero(k, k);   // <(Q+Q^T)/2>
    Mat mean_qs2 = Mat::Zero(k, k);  // <((Q+Q^T)/2)^2> entrywise
    Mat mean_q = Mat::Zero(k, k);
    Mat mean_x = Mat::Zero(inst.base.x.rows(), k);
    for (long c = 0; c < table.n_configs(); ++c) {
      Mat x = table.config(c);
      Mat qc = model::overlap(x, inst.base.x);
      Mat qsym = symmat::sym(qc);
      mean_q += g.prob[c] * qc;
      mean_qs += g.prob[c] * qsym;
      mean_qs2 += g.prob[c] * qsym.cwiseProduct(qsym);
      mean_x += g.prob[c] * x;
    }
    Mat xx = mean_x.transpose() * mean_x / static_cast<double>(n);
    Mat thermal = mean_qs2 - mean_qs.cwiseProduct(mean_qs);
    Mat quenched = (mean_qs - xx).cwiseProduct(mean_qs - xx);
    per_sample[i] = thermal - quenched;
    qs[i] = mean_q;
  });
  std::vector<MeanVar> md(static_cast<std::size_t>(k) * k), mq(static_cast<std::size_t>(k) * k);
  for (long i = 0; i < n_disorder; ++i)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        md[static_cast<std::size_t>(a) * k + b].add(per_sample[static_cast<std::size_t>(i)](a, b));
        mq[static_cast<std::size_t>(a) * k + b].add(qs[static_cast<std::size_t>(i)](a, b));
      }
  DivergenceResult out;
  out.delta.resize(k, k);
  out.delta_stderr.resize(k, k);
  out.mean_q.resize(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      out.delta(a, b) = md[static_cast<std::size_t>(a) * k + b].mean;
      out.delta_stderr(a, b) = md[static_cast<std::size_t>(a) * k + b].stderr_mean();
      out.mean_q(a, b) = mq[static_cast<std::size_t>(a) * k + b].mean;
    }
  double div = 0.0, err = 0.0;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      double w = n * (p - 1) * std::pow(out.mean_q(a, b), p - 2);
      div += w * out.delta(a, b);
      err += std::abs(w) * out.delta_stderr(a, b);
    }
  out.divergence = div;
  out.div_stderr = err;
  return out;
}

struct LiouvilleResult {
  std::vector<double> divergence;       // at path nodes
  std::vector<double> div_stderr;
  std::vector<double> partial_det;      // det at even nodes (Simpson prefixes)
  double det = 1.0;
  double det_err = 1.0;  // multiplicative 1-sigma factor
};

// det J = exp int_0^1 divergence dt along the path; must be >= 1 for even p.
inline LiouvilleResult jacobian_det_liouville(const Prior& prior, long n, int p,
                                              const InterpolationPath& path, long n_disorder,
                                              std::uint64_t seed, unsigned threads = 1,
                                              long budget = 1L << 20) {
  model::ConfigTable table(prior, n, p, budget);
  LiouvilleResult out;
  for (std::size_t s = 0; s < path.t.size(); ++s) {
    auto d = divergence_gn(prior, n, p, path.t[s], symmat::project_psd(path.r[s]), n_disorder,
                           mix_seed(seed, s), table, threads);
    out.divergence.push_back(d.divergence);
    out.div_stderr.push_back(d.div_stderr);
  }
  double h = path.t[1] - path.t[0];
  for (std::size_t m = 2; m < out.divergence.size(); m += 2) {
    std::vector<double> head(out.divergence.begin(), out.divergence.begin() + m + 1);
    out.partial_det.push_back(std::exp(simpson(head, h)));
  }
  out.det = out.partial_det.empty() ? 1.0 : out.partial_det.back();
  double err_int = 0.0;
  for (double e : out.div_stderr) err_int = std::max(err_int, e);
  out.det_err = std::exp(err_int);
  return out;
}

struct LBracket {
  double mean = 0.0;         // <L_{ll'}>
  double second_moment = 0.0;  // <L_{ll'}^2>
  double dmean = 0.0;        // <dL_{ll'}/dR_{ll'}> at fixed x
};

// L_{ll'} = (1/n) sum_j [ x_j^T E x_j / 2 - X_j^T E x_j - x_j^T dsqrt(R) Ztilde_j ]
// with E the unit symmetric direction; dL/dR at fixed x only touches the
// noise term through the second Frechet derivative of sqrt(R).
inline LBracket compute_L(const InterpolatingInstance& inst, const model::GibbsEnsemble& g,
                          int l, int lp) {
  const int k = static_cast<int>(inst.r.rows());
  if (symmat::min_eigenvalue(inst.r) <= 1e-10)
    throw SingularMatrix("compute_L: R must be positive definite");
  Mat e = symmat::unit_direction(k, l, lp);
  Mat d1 = symmat::dsqrt(inst.r, l, lp);
  Mat d2 = symmat::d2sqrt(inst.r, l, lp);
  double inv_n = 1.0 / static_cast<double>(inst.base.n);
  LBracket out;
  const auto& table = *g.table;
  for (long c = 0; c < table.n_configs(); ++c) {
    Mat x = table.config(c);
    double val = inv_n * (0.5 * (x * e).cwiseProduct(x).sum() -
                          (inst.base.x * e).cwiseProduct(x).sum() -
                          (x * d1).cwiseProduct(inst.ztilde).sum());
    double dval = -inv_n * (x * d2).cwiseProduct(inst.ztilde).sum();
    out.mean += g.prob[c] * val;
    out.second_moment += g.prob[c] * val * val;
    out.dmean += g.prob[c] * dval;
  }
  return out;
}

// Both estimator outputs of the linear-path free-entropy decomposition,
// assembled from the same node statistics; they agree algebraically.
struct LinearPathDecomposition {
  double direct = 0.0;      // psi(S^{o(p-1)}) + (1/2p) int [sum E<Q^p> - p S^{o(p-1)} : E<Q>]
  double potential = 0.0;   // phi_p(S) + (1/2p) int sum E<h_p(S_{ll'}, Q_{ll'})>
};

inline LinearPathDecomposition linear_path_decomposition(const Prior& prior, int p, const Mat& s,
                                                         const std::vector<NodeStats>& stats,
                                                         double h, const QuadSpec& quad) {
  Mat sp1 = symmat::hadamard_power(s, p - 1);
  std::vector<double> direct_i, pot_i;
  for (const auto& st : stats) {
    direct_i.push_back(st.mean_qp.value.sum() - p * sp1.cwiseProduct(st.mean_q.value).sum());
    double hp = st.mean_qp.value.sum() - p * sp1.cwiseProduct(st.mean_q.value).sum() +
                (p - 1) * symmat::hadamard_power(s, p).sum();
    pot_i.push_back(hp);
  }
  LinearPathDecomposition out;
  out.direct = replica::psi(prior, sp1, quad).value + simpson(direct_i, h) / (2.0 * p);
  out.potential = replica::phi(prior, s, p, 1.0, quad).value + simpson(pot_i, h) / (2.0 * p);
  return out;
}

}  // namespace tensormi::interpolation
