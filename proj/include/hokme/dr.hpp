#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "hokme/error.hpp"
#include "hokme/higher_order.hpp"
#include "hokme/parallel.hpp"
#include "hokme/path.hpp"
#include "hokme/random.hpp"

namespace hokme {

struct Bag {
  Ensemble ensemble;
  double label = 0.0;
};

struct DrModel {
  Eigen::VectorXd alpha;
  double sigma = 1.0;
  double ridge = 1e-3;
  HigherOrderConfig config;
  Eigen::MatrixXd train_mmd;
  std::vector<std::uint64_t> fingerprints;
};

namespace detail {

inline std::vector<const Ensemble*> ensembles_of(std::span<const Bag> bags) {
  std::vector<const Ensemble*> out;
  out.reserve(bags.size());
  for (const Bag& b : bags) out.push_back(&b.ensemble);
  return out;
}

inline std::vector<SelfTower> towers(std::span<const Ensemble* const> sets, const HigherOrderConfig& cfg) {
  std::vector<SelfTower> out(sets.size());
  parallel_for(sets.size(), [&](std::size_t k) { out[k] = self_tower(*sets[k], cfg); });
  return out;
}

inline double biased_mmd(const SelfTower& tx, const SelfTower& ty, const Eigen::MatrixXd& cross) {
  return mmd_squared(tx.top, cross, ty.top, MmdVariant::biased);
}

}  // namespace detail

/// Pairwise biased order-k MMD^2 between ensembles; zero diagonal, symmetric.
inline Eigen::MatrixXd pairwise_mmd2(std::span<const Ensemble* const> sets, const HigherOrderConfig& cfg) {
  cfg.validate();
  for (std::size_t a = 1; a < sets.size(); ++a) require_same_grid(*sets[0], *sets[a]);
  const auto tw = detail::towers(sets, cfg);
  const auto n = static_cast<Eigen::Index>(sets.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [a, b] = pairs[k];
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    const double v = detail::biased_mmd(tw[ua], tw[ub], cross_top(*sets[ua], tw[ua], *sets[ub], tw[ub], cfg));
    out(a, b) = v;
    out(b, a) = v;
  });
  return out;
}

/// exp(-max(D, 0) / sigma), entrywise.
inline Eigen::MatrixXd kernel_from_mmd(const Eigen::MatrixXd& mmd2, double sigma) {
  require(sigma > 0 && std::isfinite(sigma), "sigma must be positive");
  return mmd2.unaryExpr([sigma](double d) { return std::exp(-std::max(d, 0.0) / sigma); });
}

inline Eigen::MatrixXd process_kernel_matrix(std::span<const Bag> bags, const HigherOrderConfig& cfg, double sigma) {
  require(sigma > 0 && std::isfinite(sigma), "sigma must be positive");
  const auto sets = detail::ensembles_of(bags);
  return kernel_from_mmd(pairwise_mmd2(sets, cfg), sigma);
}

/// (K + ridge I)^{-1} y.
inline Eigen::VectorXd solve_krr(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double ridge) {
  require(ridge > 0 && std::isfinite(ridge), "ridge must be positive");
  Eigen::MatrixXd reg = k;
  reg.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success) throw NumericError("kernel ridge system could not be factorized");
  Eigen::VectorXd alpha = ldlt.solve(y);
  if (!alpha.allFinite()) throw NumericError("kernel ridge solve produced non-finite coefficients");
  return alpha;
}

inline Eigen::VectorXd labels_of(std::span<const Bag> bags) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(bags.size()));
  for (std::size_t a = 0; a < bags.size(); ++a) {
    require(std::isfinite(bags[a].label), "bag labels must be finite");
    y(static_cast<Eigen::Index>(a)) = bags[a].label;
  }
  return y;
}

inline DrModel fit_krr(std::span<const Bag> bags, const HigherOrderConfig& cfg, double sigma, double ridge) {
  cfg.validate();
  require(bags.size() >= 2, "distribution regression needs at least two bags");
  require(sigma > 0 && std::isfinite(sigma), "sigma must be positive");
  require(ridge > 0 && std::isfinite(ridge), "ridge must be positive");
  const Eigen::VectorXd y = labels_of(bags);
  DrModel model;
  model.sigma = sigma;
  model.ridge = ridge;
  model.config = cfg;
  model.train_mmd = pairwise_mmd2(detail::ensembles_of(bags), cfg);
  model.alpha = solve_krr(kernel_from_mmd(model.train_mmd, sigma), y, ridge);
  for (const Bag& b : bags) model.fingerprints.push_back(fingerprint(b.ensemble));
  return model;
}

/// Prediction with the training towers cached across queries.
class DrPredictor {
 public:
  DrPredictor(DrModel model, std::span<const Bag> train_bags) : model_(std::move(model)) {
    require(static_cast<Eigen::Index>(train_bags.size()) == model_.alpha.size(),
            "number of training bags does not match the model");
    for (const Bag& b : train_bags) train_.push_back(&b.ensemble);
    for (std::size_t a = 1; a < train_.size(); ++a) require_same_grid(*train_[0], *train_[a]);
    towers_ = detail::towers(train_, model_.config);
  }

  const DrModel& model() const { return model_; }

  double predict(const Ensemble& x) const {
    require_same_grid(*train_[0], x);
    const SelfTower tx = self_tower(x, model_.config);
    std::vector<double> k(train_.size());
    parallel_for(train_.size(), [&](std::size_t a) {
      const double d = detail::biased_mmd(towers_[a], tx, cross_top(*train_[a], towers_[a], x, tx, model_.config));
      k[a] = std::exp(-std::max(d, 0.0) / model_.sigma);
    });
    double out = 0.0;
    for (std::size_t a = 0; a < k.size(); ++a) out += model_.alpha(static_cast<Eigen::Index>(a)) * k[a];
    return out;
  }

 private:
  DrModel model_;
  std::vector<const Ensemble*> train_;
  std::vector<SelfTower> towers_;
};

inline double predict(const DrModel& model, std::span<const Bag> train_bags, const Ensemble& x) {
  return DrPredictor(model, train_bags).predict(x);
}

struct CvCandidate {
  int order = 1;
  double sigma = 1.0;
  double ridge = 1e-3;
  std::vector<double> fold_mse;
  double mean_mse = 0.0;
};

struct CvResult {
  CvCandidate best;
  std::vector<CvCandidate> candidates;
  std::vector<int> fold_of;
};

/// Fold index of every bag: a seeded shuffle dealt round-robin.
inline std::vector<int> assign_folds(std::size_t count, int folds, std::uint64_t seed) {
  require(folds >= 2, "need at least two folds");
  require(count >= static_cast<std::size_t>(folds), "fewer bags than folds");
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = derived_stream(seed, 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold(count);
  for (std::size_t k = 0; k < count; ++k) fold[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  return fold;
}

/// Mean squared validation error of KRR on a precomputed MMD^2 matrix for one fold split.
inline double fold_mse(const Eigen::MatrixXd& mmd2, const Eigen::VectorXd& y, const std::vector<int>& fold_of, int fold,
                       double sigma, double ridge) {
  std::vector<Eigen::Index> train, test;
  for (std::size_t a = 0; a < fold_of.size(); ++a)
    (fold_of[a] == fold ? test : train).push_back(static_cast<Eigen::Index>(a));
  const Eigen::MatrixXd k = kernel_from_mmd(mmd2, sigma);
  const Eigen::VectorXd alpha = solve_krr(k(train, train), y(train), ridge);
  const Eigen::VectorXd pred = k(test, train) * alpha;
  return (pred - y(test)).squaredNorm() / static_cast<double>(test.size());
}

inline CvResult cv_grid_search(std::span<const Bag> bags, std::vector<int> orders, std::vector<double> sigmas,
                               std::vector<double> ridges, int folds, std::uint64_t seed,
                               const HigherOrderConfig& base = {}) {
  require(!orders.empty() && !sigmas.empty() && !ridges.empty(), "grid search needs at least one candidate per axis");
  for (double s : sigmas) require(s > 0 && std::isfinite(s), "sigma must be positive");
  for (double r : ridges) require(r > 0 && std::isfinite(r), "ridge must be positive");
  auto dedupe = [](auto& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedupe(orders);
  dedupe(sigmas);
  dedupe(ridges);
  CvResult result;
  result.fold_of = assign_folds(bags.size(), folds, seed);
  const Eigen::VectorXd y = labels_of(bags);
  const auto sets = detail::ensembles_of(bags);
  double best = std::numeric_limits<double>::infinity();
  for (int order : orders) {
    HigherOrderConfig cfg = base;
    cfg.order = order;
    const Eigen::MatrixXd mmd2 = pairwise_mmd2(sets, cfg);
    for (double sigma : sigmas)
      for (double ridge : ridges) {
        CvCandidate c{order, sigma, ridge, {}, 0.0};
        for (int f = 0; f < folds; ++f) c.fold_mse.push_back(fold_mse(mmd2, y, result.fold_of, f, sigma, ridge));
        c.mean_mse = std::accumulate(c.fold_mse.begin(), c.fold_mse.end(), 0.0) / folds;
        // Candidates are visited in increasing (order, sigma, ridge), so a strict comparison keeps the smallest tie.
        if (c.mean_mse < best) {
          best = c.mean_mse;
          result.best = c;
        }
        result.candidates.push_back(std::move(c));
      }
  }
  if (!std::isfinite(best)) throw NumericError("cross-validation produced no finite score");
  return result;
}

}  // namespace hokme
