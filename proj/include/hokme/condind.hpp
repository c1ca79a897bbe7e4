#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hokme/error.hpp"
#include "hokme/mmd_test.hpp"
#include "hokme/parallel.hpp"
#include "hokme/path.hpp"
#include "hokme/sigkernel.hpp"

namespace hokme {

/// Coefficients alpha of the conditional mean embedding sum_i alpha_i k_S(y^i, .) given X = x_query:
/// alpha = (K^{x,x} + m lambda I)^{-1} k^x.
inline Eigen::VectorXd conditional_kme_weights(const Ensemble& X, const Path& x_query, double lambda,
                                               const KernelOptions& opts = {}) {
  require(lambda > 0 && std::isfinite(lambda), "lambda must be positive");
  require(x_query.times() == X.times() && x_query.dim() == X.dim(), "query path is not on the ensemble grid");
  const Eigen::MatrixXd kxx = first_order_gram_terminal(X, opts);
  Eigen::VectorXd kx(static_cast<Eigen::Index>(X.size()));
  for (std::size_t i = 0; i < X.size(); ++i) kx(static_cast<Eigen::Index>(i)) = signature_kernel(X[i], x_query, opts);
  Eigen::MatrixXd reg = kxx;
  reg.diagonal().array() += static_cast<double>(X.size()) * lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) throw NumericError("regularized Gram matrix is not positive definite");
  return llt.solve(kx);
}

/// H K H with H = I - (1/m) 11^T.
inline Eigen::MatrixXd center_gram(const Eigen::MatrixXd& k) {
  const Eigen::VectorXd row_means = k.rowwise().mean();
  const Eigen::RowVectorXd col_means = k.colwise().mean();
  const double total = k.mean();
  Eigen::MatrixXd out = k;
  out.colwise() -= row_means;
  out.rowwise() -= col_means;
  out.array() += total;
  return out;
}

/// Unconditional criterion tr(K~x K~y) / m^2.
inline double hsic(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky) {
  require(kx.rows() == ky.rows() && kx.cols() == kx.rows() && ky.cols() == ky.rows(), "Gram size mismatch");
  const auto m = static_cast<double>(kx.rows());
  return (center_gram(kx).cwiseProduct(center_gram(ky).transpose())).sum() / (m * m);
}

/// How the Y-side Gram enters the conditional criterion: as displayed (K^y) or as the
/// joint (Y, Z) product kernel K^y * K^z (entrywise).
enum class CiVariant { displayed, product };

inline const char* to_string(CiVariant v) { return v == CiVariant::displayed ? "displayed" : "product"; }

namespace detail {

/// P = K~z (K~z + eps I)^{-2} K~z, through the eigendecomposition of K~z so that the tiny negative
/// eigenvalues left by the PDE discretization do not break the solve.
inline Eigen::MatrixXd conditioning_projector(const Eigen::MatrixXd& kz_centered, double epsilon) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (kz_centered + kz_centered.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition of K~z failed");
  const Eigen::VectorXd mu = es.eigenvalues();
  const double scale = std::max(mu.cwiseAbs().maxCoeff(), epsilon);
  Eigen::VectorXd weight(mu.size());
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    const double shifted = mu(k) + epsilon;
    if (std::abs(shifted) <= 1e-14 * scale) throw NumericError("K~z + eps I is singular");
    weight(k) = (mu(k) * mu(k)) / (shifted * shifted);
  }
  return es.eigenvectors() * weight.asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::MatrixXd y_side(const Eigen::MatrixXd& ky, const Eigen::MatrixXd& kz, CiVariant variant) {
  return variant == CiVariant::product ? Eigen::MatrixXd(ky.cwiseProduct(kz)) : ky;
}

}  // namespace detail

/// Conditional dependence estimate
///   (1/m^2) { tr(K~x K~y) - 2 tr(K~x K~z R^2 K~z K~y) + tr(K~x K~z R^2 K~z K~y K~z R^2 K~z) },
/// R = (K~z + eps I)^{-1}, with double-centred Gram matrices.
inline double hs_conditional_criterion(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky,
                                       const Eigen::MatrixXd& kz, double epsilon,
                                       CiVariant variant = CiVariant::displayed) {
  require(epsilon > 0 && std::isfinite(epsilon), "epsilon must be positive");
  require(kx.rows() == ky.rows() && ky.rows() == kz.rows(), "Gram matrices must share the sample count");
  const auto m = static_cast<double>(kx.rows());
  const Eigen::MatrixXd cx = center_gram(kx);
  const Eigen::MatrixXd cy = center_gram(detail::y_side(ky, kz, variant));
  const Eigen::MatrixXd cz = center_gram(kz);
  const Eigen::MatrixXd proj = detail::conditioning_projector(cz, epsilon);
  const Eigen::MatrixXd proj_cy = proj * cy;
  const double t1 = cx.cwiseProduct(cy.transpose()).sum();
  const double t2 = cx.cwiseProduct(proj_cy.transpose()).sum();
  const double t3 = cx.cwiseProduct((proj_cy * proj).transpose()).sum();
  return (t1 - 2.0 * t2 + t3) / (m * m);
}

inline double hs_conditional_criterion(const Ensemble& X, const Ensemble& Y, const Ensemble& Z, double epsilon,
                                       const KernelOptions& opts = {}, CiVariant variant = CiVariant::displayed) {
  require(X.size() == Y.size() && Y.size() == Z.size(), "X, Y and Z must have the same number of samples");
  return hs_conditional_criterion(first_order_gram_terminal(X, opts), first_order_gram_terminal(Y, opts),
                                  first_order_gram_terminal(Z, opts), epsilon, variant);
}

enum class CiMode { threshold, permutation };

struct CiOptions {
  double epsilon = 1e-3;
  CiMode mode = CiMode::permutation;
  /// Threshold mode: dependence is declared when h_value >= alpha.
  double alpha = 0.0;
  /// Permutation mode: dependence is declared when p_value <= level.
  double level = 0.05;
  int permutations = 199;
  std::uint64_t seed = 0;
  CiVariant variant = CiVariant::displayed;

  void validate() const {
    require(epsilon > 0 && std::isfinite(epsilon), "epsilon must be positive");
    if (mode == CiMode::permutation) {
      require(permutations >= 19, "need at least 19 permutations");
      require(level > 0 && level < 1, "level must lie in (0, 1)");
    } else {
      require(std::isfinite(alpha), "alpha must be finite");
    }
  }
};

struct CiStatistic {
  double h_value = 0.0;
  double epsilon = 1e-3;
  /// Set in permutation mode only.
  std::optional<double> p_value;
  bool dependent = false;
};

/// Conditional-independence test of X and Y given Z (unconditional when kz is empty) on Gram
/// matrices. The permutation null relabels X only.
inline CiStatistic ci_test(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky, const std::optional<Eigen::MatrixXd>& kz,
                           const CiOptions& opts) {
  opts.validate();
  require(kx.rows() == ky.rows() && (!kz || kz->rows() == kx.rows()), "Gram matrices must share the sample count");
  CiStatistic out;
  out.epsilon = opts.epsilon;
  out.h_value = kz ? hs_conditional_criterion(kx, ky, *kz, opts.epsilon, opts.variant) : hsic(kx, ky);
  if (opts.mode == CiMode::threshold) {
    out.dependent = out.h_value >= opts.alpha;
    return out;
  }
  // h(pi) = tr(K~x^pi R) / m^2 with R = K~y - 2 P K~y + P K~y P.
  const Eigen::Index m = kx.rows();
  const Eigen::MatrixXd cx = center_gram(kx);
  Eigen::MatrixXd r = center_gram(kz ? detail::y_side(ky, *kz, opts.variant) : ky);
  if (kz) {
    const Eigen::MatrixXd proj = detail::conditioning_projector(center_gram(*kz), opts.epsilon);
    const Eigen::MatrixXd proj_cy = proj * r;
    r = (r - 2.0 * proj_cy + proj_cy * proj).eval();
  }
  const double scale = 1.0 / (static_cast<double>(m) * static_cast<double>(m));
  auto permuted_stat = [&](const std::vector<Eigen::Index>& perm) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) acc += cx(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) * r(j, i);
    return acc * scale;
  };
  std::vector<Eigen::Index> identity(static_cast<std::size_t>(m));
  std::iota(identity.begin(), identity.end(), Eigen::Index{0});
  const double observed = permuted_stat(identity);
  std::vector<double> null(static_cast<std::size_t>(opts.permutations));
  parallel_for(null.size(), [&](std::size_t k) {
    null[k] = permuted_stat(permutation_for(static_cast<std::size_t>(m), opts.seed, k));
  });
  out.p_value = permutation_p_value(observed, null);
  out.dependent = *out.p_value <= opts.level;
  return out;
}

/// Ensemble form; Z is a conditioning set (possibly empty) joined coordinate-wise into one process.
inline CiStatistic ci_test(const Ensemble& X, const Ensemble& Y, std::span<const Ensemble* const> Z,
                           const CiOptions& opts, const KernelOptions& kopts = {}) {
  require(X.size() == Y.size(), "X and Y must have the same number of samples");
  std::optional<Eigen::MatrixXd> kz;
  if (!Z.empty()) {
    const Ensemble joint = join_coordinates(Z);
    require(joint.size() == X.size(), "Z must have the same number of samples as X");
    kz = first_order_gram_terminal(joint, kopts);
  }
  return ci_test(first_order_gram_terminal(X, kopts), first_order_gram_terminal(Y, kopts), kz, opts);
}

}  // namespace hokme
