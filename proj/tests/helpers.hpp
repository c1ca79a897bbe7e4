#pragma once

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "hokme/hokme.hpp"

namespace testing_util {

/// Random piecewise-linear path with `segments` increments, each rescaled to norm <= max_norm.
inline hokme::Path random_path(std::mt19937_64& rng, int segments, int dim, double max_norm = 1.0) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  std::vector<double> times(static_cast<std::size_t>(segments) + 1);
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(segments + 1, dim);
  for (int k = 0; k <= segments; ++k) times[static_cast<std::size_t>(k)] = k;
  for (int k = 1; k <= segments; ++k) {
    Eigen::RowVectorXd step(dim);
    for (int c = 0; c < dim; ++c) step(c) = normal(rng);
    step *= max_norm * unit(rng) / step.norm();
    values.row(k) = values.row(k - 1) + step;
  }
  return hokme::Path(std::move(times), std::move(values));
}

inline hokme::Ensemble random_ensemble(std::uint64_t seed, std::size_t m, int segments, int dim,
                                       double max_norm = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<hokme::Path> paths;
  for (std::size_t i = 0; i < m; ++i) paths.push_back(random_path(rng, segments, dim, max_norm));
  return hokme::Ensemble(std::move(paths));
}

inline hokme::Ensemble constant_ensemble(std::size_t m, int points, double level = 0.5) {
  std::vector<hokme::Path> paths;
  std::vector<double> times;
  for (int k = 0; k < points; ++k) times.push_back(k);
  for (std::size_t i = 0; i < m; ++i) paths.emplace_back(times, Eigen::MatrixXd::Constant(points, 1, level));
  return hokme::Ensemble(std::move(paths));
}

inline double min_eigenvalue(const Eigen::MatrixXd& k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (k + k.transpose()));
  return es.eigenvalues().minCoeff();
}

}  // namespace testing_util
