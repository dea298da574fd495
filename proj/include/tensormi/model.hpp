#pragma once

#include <json.hpp>

#include "tensormi/prior.hpp"
#include "tensormi/quadrature.hpp"

namespace tensormi::model {

// Nondecreasing p-tuples over {0,...,n-1} in lexicographic order.
inline std::vector<std::vector<int>> ordered_indices(long n, int p) {
  if (n < 1 || p < 2) throw std::invalid_argument("ordered_indices: need n >= 1, p >= 2");
  std::vector<std::vector<int>> out;
  std::vector<int> tuple(static_cast<std::size_t>(p), 0);
  while (true) {
    out.push_back(tuple);
    int a = p - 1;
    while (a >= 0 && tuple[static_cast<std::size_t>(a)] == n - 1) --a;
    if (a < 0) break;
    int v = ++tuple[static_cast<std::size_t>(a)];
    for (int b = a + 1; b < p; ++b) tuple[static_cast<std::size_t>(b)] = v;
  }
  return out;
}

inline double factorial(int m) {
  double f = 1.0;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}

// Coupling in front of the rank-K product term of the observation channel.
inline double signal_coeff(long n, int p, double lambda) {
  return std::sqrt(lambda * factorial(p - 1) / std::pow(static_cast<double>(n), p - 1));
}

// m_i(x) = sum_l prod_a x_{i_a l}
inline double product_term(const Mat& x, const std::vector<int>& tuple) {
  double total = 0.0;
  for (int l = 0; l < x.cols(); ++l) {
    double prod = 1.0;
    for (int ia : tuple) prod *= x(ia, l);
    total += prod;
  }
  return total;
}

struct TensorInstance {
  long n = 0;
  int k = 0;
  int p = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  Mat x;                                // planted signal, n x K
  std::vector<std::vector<int>> idx;    // ordered index set I
  Vec y;                                // one observation per tuple
  double coeff = 0.0;                   // sqrt(lambda (p-1)! / n^{p-1})
};

inline Mat sample_signal(const Prior& prior, long n, Rng& rng) {
  Mat x(n, prior.dim());
  for (long j = 0; j < n; ++j) x.row(j) = prior.point(prior.sample_atom(rng)).transpose();
  return x;
}

inline TensorInstance sample_instance(const Prior& prior, long n, int p, double lambda,
                                      Rng& rng, std::uint64_t seed = 0) {
  TensorInstance inst;
  inst.n = n;
  inst.k = prior.dim();
  inst.p = p;
  inst.lambda = lambda;
  inst.seed = seed;
  inst.idx = ordered_indices(n, p);
  inst.coeff = signal_coeff(n, p, lambda);
  inst.x = sample_signal(prior, n, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  inst.y.resize(static_cast<long>(inst.idx.size()));
  for (std::size_t i = 0; i < inst.idx.size(); ++i)
    inst.y[static_cast<long>(i)] = inst.coeff * product_term(inst.x, inst.idx[i]) + gauss(rng);
  return inst;
}

// H(x; Y) = sum_i [ c^2 m_i(x)^2 / 2 - c Y_i m_i(x) ] with c the signal coefficient.
inline double hamiltonian(const Mat& x, const TensorInstance& inst) {
  if (x.rows() != inst.n || x.cols() != inst.k)
    throw std::invalid_argument("hamiltonian: shape mismatch");
  double h = 0.0;
  for (std::size_t i = 0; i < inst.idx.size(); ++i) {
    double m = product_term(x, inst.idx[i]);
    h += 0.5 * inst.coeff * inst.coeff * m * m - inst.coeff * inst.y[static_cast<long>(i)] * m;
  }
  return h;
}

// Full enumeration of the |support|^n configurations with the per-config
// quantities every estimator needs: the m_i vectors (rows of `m`), their
// squared norms, the log prior mass, and the flattened configurations.
class ConfigTable {
 public:
  ConfigTable(const Prior& prior, long n, int p, long budget = 1L << 20)
      : prior_(prior), n_(n), p_(p), idx_(ordered_indices(n, p)) {
    const int na = prior.n_atoms();
    double count = std::pow(static_cast<double>(na), static_cast<double>(n));
    if (count > static_cast<double>(budget))
      throw BudgetExceeded("ConfigTable: |support|^n exceeds configuration budget");
    n_configs_ = static_cast<long>(count + 0.5);
    if (n_configs_ * static_cast<long>(idx_.size()) > (200L << 20))
      throw BudgetExceeded("ConfigTable: configuration table too large");

    const int k = prior.dim();
    m_.resize(n_configs_, static_cast<long>(idx_.size()));
    sq_.resize(n_configs_);
    log_prior_.resize(n_configs_);
    configs_.resize(n_configs_, n * k);
    std::vector<int> digits(static_cast<std::size_t>(n), 0);
    Mat x(n, k);
    for (long c = 0; c < n_configs_; ++c) {
      double lw = 0.0;
      for (long j = 0; j < n; ++j) {
        int a = digits[static_cast<std::size_t>(j)];
        x.row(j) = prior.point(a).transpose();
        lw += prior.log_weight(a);
      }
      log_prior_[c] = lw;
      for (long j = 0; j < n; ++j)
        for (int l = 0; l < k; ++l) configs_(c, j * k + l) = x(j, l);
      double sq = 0.0;
      for (std::size_t i = 0; i < idx_.size(); ++i) {
        double m = product_term(x, idx_[i]);
        m_(c, static_cast<long>(i)) = m;
        sq += m * m;
      }
      sq_[c] = sq;
      for (long j = n - 1; j >= 0; --j) {
        if (++digits[static_cast<std::size_t>(j)] < na) break;
        digits[static_cast<std::size_t>(j)] = 0;
      }
    }
  }

  const Prior& prior() const { return prior_; }
  long n() const { return n_; }
  int p() const { return p_; }
  long n_configs() const { return n_configs_; }
  const std::vector<std::vector<int>>& indices() const { return idx_; }
  const Mat& m() const { return m_; }
  const Vec& sq() const { return sq_; }
  const Vec& log_prior() const { return log_prior_; }

  Mat config(long c) const {
    const int k = prior_.dim();
    Mat x(n_, k);
    for (long j = 0; j < n_; ++j)
      for (int l = 0; l < k; ++l) x(j, l) = configs_(c, j * k + l);
    return x;
  }

  // Row view of config c as an n x K map, no copy.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  config_map(long c) const {
    return {configs_.row(c).data(), n_, prior_.dim()};
  }

 private:
  Prior prior_;
  long n_;
  int p_;
  std::vector<std::vector<int>> idx_;
  long n_configs_ = 0;
  Mat m_;             // n_configs x |I|
  Vec sq_;            // row-wise squared norm of m_
  Vec log_prior_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> configs_;
};

struct GibbsEnsemble {
  const ConfigTable* table = nullptr;
  Vec log_weight;      // unnormalized, one per configuration
  double log_partition = 0.0;
  Vec prob;            // normalized posterior probabilities

  static GibbsEnsemble from_log_weights(const ConfigTable& table, Vec log_weight) {
    GibbsEnsemble g;
    g.table = &table;
    g.log_partition = log_sum_exp({log_weight.data(), static_cast<std::size_t>(log_weight.size())});
    g.prob = (log_weight.array() - g.log_partition).exp();
    g.log_weight = std::move(log_weight);
    return g;
  }

  template <typename F>
  auto bracket(F&& f) const {
    using Result = std::decay_t<decltype(f(std::declval<const Mat&>()))>;
    Result acc = f(table->config(0)) * prob[0];
    for (long c = 1; c < prob.size(); ++c) acc += prob[c] * f(table->config(c));
    return acc;
  }
};

// Tensor-channel log weights: -H(x_c; Y) + log prior(x_c), vectorized over c.
inline GibbsEnsemble exact_gibbs(const TensorInstance& inst, const ConfigTable& table) {
  if (table.n() != inst.n || table.p() != inst.p)
    throw std::invalid_argument("exact_gibbs: table/instance mismatch");
  double c2 = inst.coeff * inst.coeff;
  Vec lw = -0.5 * c2 * table.sq() + inst.coeff * (table.m() * inst.y) + table.log_prior();
  return GibbsEnsemble::from_log_weights(table, std::move(lw));
}

inline Mat overlap(const Mat& x, const Mat& planted) {
  if (x.rows() != planted.rows() || x.cols() != planted.cols())
    throw std::invalid_argument("overlap: shape mismatch");
  return x.transpose() * planted / static_cast<double>(x.rows());
}

// Posterior mean of the overlap with the planted signal, one disorder sample.
inline Mat bracket_overlap(const GibbsEnsemble& g, const Mat& planted) {
  return g.bracket([&](const Mat& x) { return overlap(x, planted); });
}

// f_n = (1/n) E ln Z_n via exact enumeration per disorder sample.
inline Estimate free_entropy_mc(const Prior& prior, long n, int p, double lambda,
                                long n_disorder, std::uint64_t seed, unsigned threads = 1,
                                long budget = 1L << 20) {
  ConfigTable table(prior, n, p, budget);
  std::vector<double> vals(static_cast<std::size_t>(n_disorder));
  parallel_for(static_cast<std::size_t>(n_disorder), threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    TensorInstance inst = sample_instance(prior, n, p, lambda, rng, seed);
    vals[i] = exact_gibbs(inst, table).log_partition / static_cast<double>(n);
  });
  MeanVar mv;
  for (double v : vals) mv.add(v);
  return {mv.mean, mv.stderr_mean()};
}

// (1/n) I(X;Y) = (1/n) E[-H(X;Y)] - f_n with E[-H(X;Y)] = (1/2) E sum_i s_i(X)^2,
// where s_i = c m_i(X) is the signal part of observation i. Both expectations
// share disorder samples so their difference is a per-sample statistic.
inline Estimate exact_mutual_info(const Prior& prior, long n, int p, double lambda,
                                  long n_disorder, std::uint64_t seed, unsigned threads = 1,
                                  long budget = 1L << 20) {
  ConfigTable table(prior, n, p, budget);
  std::vector<double> vals(static_cast<std::size_t>(n_disorder));
  parallel_for(static_cast<std::size_t>(n_disorder), threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    TensorInstance inst = sample_instance(prior, n, p, lambda, rng, seed);
    double energy = 0.0;
    for (std::size_t t = 0; t < inst.idx.size(); ++t) {
      double s = inst.coeff * product_term(inst.x, inst.idx[t]);
      energy += 0.5 * s * s;
    }
    double ln_z = exact_gibbs(inst, table).log_partition;
    vals[i] = (energy - ln_z) / static_cast<double>(n);
  });
  MeanVar mv;
  for (double v : vals) mv.add(v);
  return {mv.mean, mv.stderr_mean()};
}

inline nlohmann::json instance_to_json(const TensorInstance& inst) {
  nlohmann::json rows = nlohmann::json::array();
  for (long j = 0; j < inst.n; ++j) {
    std::vector<double> row(inst.k);
    for (int l = 0; l < inst.k; ++l) row[static_cast<std::size_t>(l)] = inst.x(j, l);
    rows.push_back(row);
  }
  nlohmann::json obs = nlohmann::json::array();
  for (std::size_t i = 0; i < inst.idx.size(); ++i)
    obs.push_back({{"idx", inst.idx[i]}, {"y", inst.y[static_cast<long>(i)]}});
  return {{"n", inst.n}, {"K", inst.k},      {"p", inst.p}, {"lambda", inst.lambda},
          {"seed", inst.seed}, {"X", rows}, {"Y", obs}};
}

}  // namespace tensormi::model
