#pragma once

#include <json.hpp>

#include <optional>

#include "tensormi/common.hpp"
#include "tensormi/symmat.hpp"

namespace tensormi {

// Finitely supported prior on R^K. Immutable after construction.
class Prior {
 public:
  Prior(std::vector<Vec> points, std::vector<double> weights) {
    if (points.empty()) throw std::invalid_argument("Prior: empty atom list");
    if (points.size() != weights.size())
      throw std::invalid_argument("Prior: points/weights size mismatch");
    k_ = static_cast<int>(points.front().size());
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != k_) throw std::invalid_argument("Prior: dimension mismatch");
      if (!(weights[i] > 0.0)) throw std::invalid_argument("Prior: nonpositive weight");
      total += weights[i];
    }
    points_ = std::move(points);
    weights_ = std::move(weights);
    for (double& w : weights_) w /= total;
  }

  int dim() const { return k_; }
  int n_atoms() const { return static_cast<int>(points_.size()); }
  const Vec& point(int i) const { return points_[i]; }
  double weight(int i) const { return weights_[i]; }
  double log_weight(int i) const { return std::log(weights_[i]); }

  // Sigma_X = E[X X^T], exact sum over atoms.
  Mat second_moment() const {
    Mat s = Mat::Zero(k_, k_);
    for (int i = 0; i < n_atoms(); ++i) s += weights_[i] * points_[i] * points_[i].transpose();
    return symmat::sym(s);
  }

  // max over coordinates of E|X_l|^order.
  double moment(int order) const {
    if (order < 1) throw std::invalid_argument("Prior::moment: order must be >= 1");
    double best = 0.0;
    for (int l = 0; l < k_; ++l) {
      double m = 0.0;
      for (int i = 0; i < n_atoms(); ++i)
        m += weights_[i] * std::pow(std::abs(points_[i][l]), order);
      best = std::max(best, m);
    }
    return best;
  }

  int sample_atom(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng);
    double acc = 0.0;
    for (int i = 0; i < n_atoms(); ++i) {
      acc += weights_[i];
      if (r <= acc) return i;
    }
    return n_atoms() - 1;
  }

 private:
  std::vector<Vec> points_;
  std::vector<double> weights_;
  int k_;
};

inline Prior make_prior(std::vector<std::pair<Vec, double>> atoms) {
  std::vector<Vec> points;
  std::vector<double> weights;
  points.reserve(atoms.size());
  weights.reserve(atoms.size());
  for (auto& [x, w] : atoms) {
    points.push_back(std::move(x));
    weights.push_back(w);
  }
  return Prior(std::move(points), std::move(weights));
}

// Absorbs the SNR into the prior: scaling every atom by lambda^{1/(2p)} makes
// the observation law of the model (n,K,p,lambda,P_X) identical to
// (n,K,p,1,rescaled P_X), since the signal term carries sqrt(lambda) times a
// product of p coordinates.
inline Prior rescale_to_unit_snr(const Prior& prior, int p, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("rescale_to_unit_snr: lambda must be > 0");
  double scale = std::pow(lambda, 1.0 / (2.0 * p));
  std::vector<Vec> points;
  std::vector<double> weights;
  for (int i = 0; i < prior.n_atoms(); ++i) {
    points.push_back(scale * prior.point(i));
    weights.push_back(prior.weight(i));
  }
  return Prior(std::move(points), std::move(weights));
}

inline Prior rademacher_prior() {
  Vec plus(1), minus(1);
  plus << 1.0;
  minus << -1.0;
  return make_prior({{plus, 0.5}, {minus, 0.5}});
}

// P(X = sqrt(1/rho)) = rho, P(X = 0) = 1 - rho; unit second moment.
inline Prior sparse_prior(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("sparse_prior: rho must be in (0,1)");
  Vec zero(1), spike(1);
  zero << 0.0;
  spike << std::sqrt(1.0 / rho);
  return make_prior({{zero, 1.0 - rho}, {spike, rho}});
}

// Product of K independent Rademacher coordinates: 2^K sign atoms.
inline Prior product_rademacher_prior(int k) {
  if (k < 1 || k > 20) throw std::invalid_argument("product_rademacher_prior: bad K");
  std::vector<std::pair<Vec, double>> atoms;
  double w = std::pow(0.5, k);
  for (int mask = 0; mask < (1 << k); ++mask) {
    Vec x(k);
    for (int l = 0; l < k; ++l) x[l] = (mask >> l) & 1 ? 1.0 : -1.0;
    atoms.emplace_back(x, w);
  }
  return make_prior(std::move(atoms));
}

// JSON schema: {"K": int, "atoms": [{"x": [..], "w": float}, ...]}
inline Prior prior_from_json(const nlohmann::json& j) {
  int k = j.at("K").get<int>();
  std::vector<std::pair<Vec, double>> atoms;
  for (const auto& a : j.at("atoms")) {
    auto xs = a.at("x").get<std::vector<double>>();
    if (static_cast<int>(xs.size()) != k)
      throw std::invalid_argument("prior_from_json: atom dimension != K");
    Vec x = Eigen::Map<Vec>(xs.data(), static_cast<long>(xs.size()));
    atoms.emplace_back(x, a.at("w").get<double>());
  }
  return make_prior(std::move(atoms));
}

inline nlohmann::json prior_to_json(const Prior& prior) {
  nlohmann::json atoms = nlohmann::json::array();
  for (int i = 0; i < prior.n_atoms(); ++i) {
    std::vector<double> xs(prior.point(i).data(), prior.point(i).data() + prior.dim());
    atoms.push_back({{"x", xs}, {"w", prior.weight(i)}});
  }
  return {{"K", prior.dim()}, {"atoms", atoms}};
}

// Accepts "rademacher", "sparse(rho)", "product_rademacher(K)".
inline Prior named_prior(const std::string& name) {
  if (name == "rademacher") return rademacher_prior();
  auto call = [&](const std::string& fn) -> std::optional<std::string> {
    if (name.rfind(fn + "(", 0) == 0 && name.back() == ')')
      return name.substr(fn.size() + 1, name.size() - fn.size() - 2);
    return std::nullopt;
  };
  if (auto arg = call("sparse")) return sparse_prior(std::stod(*arg));
  if (auto arg = call("product_rademacher")) return product_rademacher_prior(std::stoi(*arg));
  throw std::invalid_argument("unknown prior name: " + name);
}

}  // namespace tensormi
