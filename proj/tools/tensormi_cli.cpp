// Batch front end for the tensor mutual-information library: replica solves,
// lambda sweeps, channel simulation, exact small-n oracles, interpolation
// paths, and the full verification suite.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "tensormi/diagnostics.hpp"
#include "tensormi/io.hpp"

namespace fs = std::filesystem;
using namespace tensormi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoConvergence = 2;
constexpr int kExitBudget = 3;
constexpr int kExitNoisy = 4;
constexpr int kExitRegime = 5;

struct CommonOpts {
  std::string prior_spec = "rademacher";
  int k = 0;  // 0 = take from prior
  int p = 2;
  double lambda = 1.0;
  std::string lambda_grid;
  long n = 4;
  std::string n_grid;
  std::uint64_t seed = 1;
  long disorder = 200;
  long budget = 1L << 20;
  int quad_nodes = 0;  // 0 = auto per rank
  long mc_samples = 20000;
  int steps = 20;
  std::string out_dir = ".";
  unsigned threads = 1;
  bool strict = false;
};

Prior load_prior(const CommonOpts& opt) {
  Prior prior = [&] {
    if (!opt.prior_spec.empty() && opt.prior_spec.front() == '@') {
      std::ifstream in(opt.prior_spec.substr(1));
      if (!in) throw std::invalid_argument("cannot open prior file: " + opt.prior_spec.substr(1));
      nlohmann::json j;
      in >> j;
      return prior_from_json(j);
    }
    return named_prior(opt.prior_spec);
  }();
  if (opt.k != 0 && opt.k != prior.dim())
    throw std::invalid_argument("--K does not match the prior dimension");
  return prior;
}

std::vector<double> parse_grid(const std::string& spec) {
  // "a:b:step" inclusive of both ends up to rounding
  double a, b, step;
  char c1, c2;
  std::istringstream in(spec);
  if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0)
    throw std::invalid_argument("bad grid spec (want a:b:step): " + spec);
  std::vector<double> out;
  for (double v = a; v <= b + 1e-12; v += step) out.push_back(v);
  return out;
}

std::vector<long> parse_n_grid(const std::string& spec) {
  std::vector<long> out;
  std::istringstream in(spec);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stol(tok));
  if (out.empty()) throw std::invalid_argument("empty n grid");
  return out;
}

std::uint64_t hash_opts(const CommonOpts& o, const std::string& cmd) {
  std::ostringstream s;
  s << cmd << "|" << o.prior_spec << "|" << o.k << "|" << o.p << "|" << io::fmt(o.lambda) << "|"
    << o.lambda_grid << "|" << o.n << "|" << o.n_grid << "|" << o.seed << "|" << o.disorder << "|"
    << o.budget << "|" << o.quad_nodes << "|" << o.mc_samples << "|" << o.steps << "|" << o.strict;
  return io::config_hash(s.str());
}

QuadSpec quad_for(const CommonOpts& o, int k) {
  if (o.quad_nodes == 0) {
    QuadSpec q = QuadSpec::default_for_dim(k, o.seed);
    if (q.scheme == QuadScheme::monte_carlo) q.samples = o.mc_samples;
    return q;
  }
  return k <= 3 ? QuadSpec::gauss_hermite(o.quad_nodes)
                : QuadSpec::monte_carlo(o.mc_samples, o.seed);
}

std::string s_entries(const Mat& m) {
  std::string s;
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) {
      if (!s.empty()) s += ";";
      s += io::fmt(m(i, j));
    }
  return s;
}

nlohmann::json solution_json(const replica::ReplicaSolution& sol, const CommonOpts& o) {
  nlohmann::json j;
  j["lambda"] = o.lambda;
  j["p"] = o.p;
  j["phi_star"] = sol.phi_value;
  j["mi_limit"] = sol.mi_limit;
  j["s_star"] = io::mat_to_json(sol.s_star);
  j["converged"] = sol.converged;
  j["boundary_hit"] = sol.boundary_hit;
  j["n_local_maxima"] = sol.local_maxima.size();
  if (o.p % 2 != 0) j["regime"] = "exploratory — unproven regime";
  return j;
}

nlohmann::json report_json(const interpolation::CheckReport& r) {
  return {{"value_lhs", r.lhs},
          {"value_rhs", r.rhs},
          {"residual", r.residual},
          {"budget", {{"eps_term", r.eps_term}, {"one_over_n", r.one_over_n}, {"mc_3sigma", r.mc_3sigma}}},
          {"pass", r.pass}};
}

nlohmann::json scan_json(const diagnostics::ScanReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"parameters", row.parameters}, {"statistic", row.statistic}, {"stderr", row.std_err}});
  return {{"scan_id", r.scan_id}, {"criterion", r.criterion}, {"rows", rows},
          {"verdict", diagnostics::to_string(r.verdict)}};
}

int cmd_replica(const CommonOpts& o, bool sweep) {
  if (o.strict && o.p % 2 != 0) {
    std::cerr << "odd p with --strict: even-p-only guarantees refused\n";
    return kExitRegime;
  }
  Prior prior = load_prior(o);
  replica::SolverConfig cfg;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.quad = quad_for(o, prior.dim());
  std::uint64_t hash = hash_opts(o, sweep ? "sweep" : "replica");
  fs::create_directories(o.out_dir);

  std::vector<double> grid =
      sweep ? parse_grid(o.lambda_grid) : std::vector<double>{o.lambda};
  auto rows = replica::lambda_sweep(prior, o.p, grid, cfg);

  io::CsvWriter csv((fs::path(o.out_dir) / (sweep ? "sweep.csv" : "replica.csv")).string(), hash,
                    o.seed,
                    {"lambda", "K", "p", "phi_star", "mi_limit", "s_star_entries", "grad_norm",
                     "n_local_maxima"});
  bool all_converged = true;
  for (const auto& row : rows) {
    const auto& sol = row.solution;
    all_converged = all_converged && sol.converged;
    csv.row({io::fmt(row.lambda), std::to_string(prior.dim()), std::to_string(o.p),
             io::fmt(sol.phi_value), io::fmt(sol.mi_limit), s_entries(sol.s_star),
             io::fmt(sol.trace.back().grad_norm), std::to_string(sol.local_maxima.size())});
  }
  if (!sweep) {
    CommonOpts oj = o;
    oj.lambda = rows.front().lambda;
    io::write_json((fs::path(o.out_dir) / "replica.json").string(),
                   solution_json(rows.front().solution, oj), hash, o.seed);
  }
  return all_converged ? kExitOk : kExitNoConvergence;
}

int cmd_simulate(const CommonOpts& o) {
  Prior prior = load_prior(o);
  std::uint64_t hash = hash_opts(o, "simulate");
  fs::create_directories(o.out_dir);
  Rng rng = make_rng(o.seed);
  auto inst = model::sample_instance(prior, o.n, o.p, o.lambda, rng, o.seed);
  io::write_json((fs::path(o.out_dir) / "instance.json").string(), model::instance_to_json(inst),
                 hash, o.seed);
  return kExitOk;
}

int cmd_oracle(const CommonOpts& o) {
  Prior prior = load_prior(o);
  std::uint64_t hash = hash_opts(o, "oracle");
  fs::create_directories(o.out_dir);
  std::vector<long> ns = o.n_grid.empty() ? std::vector<long>{o.n} : parse_n_grid(o.n_grid);
  io::CsvWriter csv((fs::path(o.out_dir) / "oracle.csv").string(), hash, o.seed,
                    {"n", "lambda", "f_n", "f_n_stderr", "mi", "mi_stderr", "n_disorder"});
  for (std::size_t i = 0; i < ns.size(); ++i) {
    long n = ns[i];
    auto f = model::free_entropy_mc(prior, n, o.p, o.lambda, o.disorder, mix_seed(o.seed, i),
                                    o.threads, o.budget);
    auto mi = model::exact_mutual_info(prior, n, o.p, o.lambda, o.disorder, mix_seed(o.seed, i),
                                       o.threads, o.budget);
    csv.row({std::to_string(n), io::fmt(o.lambda), io::fmt(f.value), io::fmt(f.std_err),
             io::fmt(mi.value), io::fmt(mi.std_err), std::to_string(o.disorder)});
  }
  return kExitOk;
}

void dump_path(const interpolation::InterpolationPath& path, const std::string& file,
               std::uint64_t hash, std::uint64_t seed, int k) {
  std::vector<std::string> header{"t"};
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) header.push_back("R_" + std::to_string(a) + std::to_string(b));
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) header.push_back("stderr_" + std::to_string(a) + std::to_string(b));
  io::CsvWriter csv(file, hash, seed, header);
  for (std::size_t s = 0; s < path.t.size(); ++s) {
    std::vector<std::string> cells{io::fmt(path.t[s])};
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) cells.push_back(io::fmt(path.r[s](a, b)));
    const Mat& err = path.stats[s].mean_q.std_err;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) cells.push_back(io::fmt(err(a, b)));
    csv.row(cells);
  }
}

int cmd_interpolate(const CommonOpts& o) {
  Prior prior = load_prior(o);
  std::uint64_t hash = hash_opts(o, "interpolate");
  fs::create_directories(o.out_dir);
  const int k = prior.dim();
  Rng rng = make_rng(o.seed, 77);
  symmat::PerturbationBox box(k, symmat::default_sn(o.n, k));
  Mat eps = box.sample(rng);
  auto path = interpolation::solve_interpolation_ode(prior, o.n, o.p, eps, o.steps, o.disorder,
                                                     o.seed, o.threads, o.budget);
  dump_path(path, (fs::path(o.out_dir) / "path.csv").string(), hash, o.seed, k);
  nlohmann::json meta;
  meta["epsilon"] = io::mat_to_json(eps);
  meta["steps"] = o.steps;
  meta["n_disorder"] = o.disorder;
  meta["max_stderr"] = path.max_stderr;
  meta["projection_distance"] = path.projection_distance;
  io::write_json((fs::path(o.out_dir) / "path_meta.json").string(), meta, hash, o.seed);
  return kExitOk;
}

int cmd_check(const CommonOpts& o) {
  if (o.strict && o.p % 2 != 0) {
    std::cerr << "odd p with --strict: even-p-only guarantees refused\n";
    return kExitRegime;
  }
  Prior prior = load_prior(o);
  std::uint64_t hash = hash_opts(o, "check");
  fs::create_directories(o.out_dir);
  const int k = prior.dim();
  bool all_pass = true;
  auto note = [&](const std::string& name, bool pass) {
    std::cout << name << ": " << (pass ? "pass" : "FAIL") << "\n";
    all_pass = all_pass && pass;
  };

  Rng rng = make_rng(o.seed, 77);
  symmat::PerturbationBox box(k, symmat::default_sn(o.n, k));
  Mat eps = box.sample(rng);
  auto path = interpolation::solve_interpolation_ode(prior, o.n, o.p, eps, o.steps, o.disorder,
                                                     o.seed, o.threads, o.budget);
  dump_path(path, (fs::path(o.out_dir) / "path.csv").string(), hash, o.seed, k);

  auto sum_rule = interpolation::sum_rule_check(prior, o.n, o.p, path, o.disorder,
                                                mix_seed(o.seed, 1), o.threads);
  io::write_json((fs::path(o.out_dir) / "sum_rule.json").string(), report_json(sum_rule), hash,
                 o.seed);
  note("sum_rule", sum_rule.pass);

  std::size_t mid = path.t.size() / 2;
  auto deriv = interpolation::free_entropy_t_derivative_check(prior, o.n, o.p, path, mid,
                                                              o.disorder, mix_seed(o.seed, 2),
                                                              o.threads, o.budget);
  io::write_json((fs::path(o.out_dir) / "t_derivative.json").string(), report_json(deriv), hash,
                 o.seed);
  note("t_derivative", deriv.pass);

  model::ConfigTable table(prior, o.n, o.p, o.budget);
  bool div_ok = true;
  Rng rrng = make_rng(o.seed, 88);
  std::uniform_real_distribution<double> ut(0.1, 0.9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Mat a(k, k);
    for (int x = 0; x < k; ++x)
      for (int y = 0; y < k; ++y) a(x, y) = gauss(rrng);
    Mat r = a * a.transpose() / k + 0.05 * Mat::Identity(k, k);
    auto d = interpolation::divergence_gn(prior, o.n, o.p, ut(rrng), r, o.disorder,
                                          mix_seed(o.seed, 300 + trial), table, o.threads);
    if (o.p % 2 == 0 && d.divergence < -3.0 * d.div_stderr) div_ok = false;
    if ((d.delta.array() < -3.0 * d.delta_stderr.array().max(1e-12)).any()) div_ok = false;
  }
  note("divergence", div_ok);

  auto liouville = interpolation::jacobian_det_liouville(prior, o.n, o.p, path, o.disorder,
                                                         mix_seed(o.seed, 3), o.threads, o.budget);
  bool det_ok = o.p % 2 != 0 || liouville.det >= 0.95;
  nlohmann::json lj{{"det", liouville.det}, {"divergence", liouville.divergence},
                    {"partial_det", liouville.partial_det}, {"pass", det_ok}};
  io::write_json((fs::path(o.out_dir) / "liouville.json").string(), lj, hash, o.seed);
  note("liouville", det_ok);

  // L-matrix bracket identity E<L_{ll'}> == -(1 - delta/2) E<Q_{ll'}>
  bool l_ok = true;
  {
    Mat r = Mat::Identity(k, k) * 0.3 + Mat::Constant(k, k, 0.05);
    double t = 0.5;
    std::vector<Mat> lvals(static_cast<std::size_t>(o.disorder)), qvals(static_cast<std::size_t>(o.disorder));
    parallel_for(static_cast<std::size_t>(o.disorder), o.threads, [&](std::size_t i) {
      Rng r2 = make_rng(mix_seed(o.seed, 4), i);
      auto inst = interpolation::sample_interpolating_instance(prior, o.n, o.p, t, r, r2);
      auto g = interpolation::exact_gibbs(inst, table);
      Mat lm(k, k), qm = model::bracket_overlap(g, inst.base.x);
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) lm(a, b) = interpolation::compute_L(inst, g, a, b).mean;
      lvals[i] = lm;
      qvals[i] = qm;
    });
    for (int a = 0; a < k && l_ok; ++a)
      for (int b = 0; b < k && l_ok; ++b) {
        MeanVar diff;
        for (long i = 0; i < o.disorder; ++i) {
          double expect = -(1.0 - (a == b ? 0.5 : 0.0)) * qvals[static_cast<std::size_t>(i)](a, b);
          diff.add(lvals[static_cast<std::size_t>(i)](a, b) - expect);
        }
        if (std::abs(diff.mean) > 3.0 * std::max(diff.stderr_mean(), 1e-12)) l_ok = false;
      }
  }
  note("l_identity", l_ok);

  auto nish = diagnostics::nishimori_suite(prior, o.n, o.p, 0.4, 0.2 * Mat::Identity(k, k),
                                           o.disorder, mix_seed(o.seed, 5), o.threads, o.budget);
  io::write_json((fs::path(o.out_dir) / "nishimori.json").string(), scan_json(nish), hash, o.seed);
  note("nishimori", nish.verdict == diagnostics::Verdict::pass);

  auto shape = diagnostics::psi_shape_suite(prior, quad_for(o, k), 50, mix_seed(o.seed, 6),
                                            o.threads);
  io::write_json((fs::path(o.out_dir) / "psi_shape.json").string(), scan_json(shape), hash, o.seed);
  note("psi_shape", shape.verdict == diagnostics::Verdict::pass);

  return all_pass ? kExitOk : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-rank tensor factorization: replica formula and interpolation checks"};
  app.require_subcommand(1);
  CommonOpts o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--prior", o.prior_spec, "prior name or @file.json");
    sub->add_option("--K", o.k, "rank (validated against the prior)");
    sub->add_option("--p", o.p, "tensor order");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--disorder", o.disorder, "disorder samples");
    sub->add_option("--budget", o.budget, "configuration budget");
    sub->add_option("--quad-nodes", o.quad_nodes, "Gauss-Hermite nodes per dimension");
    sub->add_option("--mc-samples", o.mc_samples, "Monte Carlo quadrature samples");
    sub->add_option("--steps", o.steps, "ODE steps");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--threads", o.threads, "worker threads");
    sub->add_flag("--strict", o.strict, "refuse regimes without guarantees");
  };

  auto* c_replica = app.add_subcommand("replica", "solve the replica variational problem");
  c_replica->add_option("--lambda", o.lambda);
  add_common(c_replica);
  auto* c_sweep = app.add_subcommand("sweep", "replica solve over a lambda grid");
  c_sweep->add_option("--lambda-grid", o.lambda_grid, "a:b:step")->required();
  add_common(c_sweep);
  auto* c_simulate = app.add_subcommand("simulate", "draw and dump a channel instance");
  c_simulate->add_option("--lambda", o.lambda);
  c_simulate->add_option("--n", o.n);
  add_common(c_simulate);
  auto* c_oracle = app.add_subcommand("oracle", "exact small-n free entropy and mutual information");
  c_oracle->add_option("--lambda", o.lambda);
  c_oracle->add_option("--n", o.n);
  c_oracle->add_option("--n-grid", o.n_grid, "comma-separated n values");
  add_common(c_oracle);
  auto* c_interp = app.add_subcommand("interpolate", "solve the overlap-matching ODE path");
  c_interp->add_option("--n", o.n);
  add_common(c_interp);
  auto* c_check = app.add_subcommand("check", "run the full verification suite");
  c_check->add_option("--n", o.n);
  add_common(c_check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (const char* env = std::getenv("TRL_SEED")) o.seed = std::strtoull(env, nullptr, 10);

  try {
    if (c_replica->parsed()) return cmd_replica(o, false);
    if (c_sweep->parsed()) return cmd_replica(o, true);
    if (c_simulate->parsed()) return cmd_simulate(o);
    if (c_oracle->parsed()) return cmd_oracle(o);
    if (c_interp->parsed()) return cmd_interpolate(o);
    if (c_check->parsed()) return cmd_check(o);
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return kExitBudget;
  } catch (const EstimatorTooNoisy& e) {
    std::cerr << "estimator too noisy: " << e.what() << " (raise --disorder)\n";
    return kExitNoisy;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
