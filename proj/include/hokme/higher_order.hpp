#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "hokme/error.hpp"
#include "hokme/parallel.hpp"
#include "hokme/path.hpp"
#include "hokme/sigkernel.hpp"

namespace hokme {

struct HigherOrderConfig {
  int order = 1;
  /// Tikhonov regularizer of the conditional mean embeddings.
  double lambda = 1e-3;
  int refinement = 2;
  /// Time-augmentation scale applied at every order; 0 disables it.
  double time_scale = 0.0;

  void validate() const {
    require(order >= 1, "order must be at least 1");
    require(lambda > 0 && std::isfinite(lambda), "lambda must be positive");
    require(refinement >= 1, "refinement must be at least 1");
    kernel().validate();
  }

  KernelOptions kernel() const { return KernelOptions{refinement, time_scale}; }
};

enum class MmdVariant { biased, unbiased };

inline const char* to_string(MmdVariant v) { return v == MmdVariant::biased ? "biased" : "unbiased"; }

inline MmdVariant parse_variant(const std::string& s) {
  if (s == "biased") return MmdVariant::biased;
  if (s == "unbiased") return MmdVariant::unbiased;
  throw ValidationError("unknown MMD variant '" + s + "' (expected biased or unbiased)");
}

struct MmdEstimate {
  int order = 1;
  /// Estimate of the squared MMD; the unbiased variant can be negative.
  double value_squared = 0.0;
  MmdVariant variant = MmdVariant::unbiased;
};

namespace detail {

inline void check_field_shapes(const GramField& gxx, const GramField& gxy, const GramField& gyy) {
  require(gxx.rows() == gxx.cols(), "Gxx must be square in its sample indices");
  require(gyy.rows() == gyy.cols(), "Gyy must be square in its sample indices");
  require(gxy.rows() == gxx.rows() && gxy.cols() == gyy.rows(), "Gxy sample counts do not match Gxx/Gyy");
  require(gxx.s_times() == gxy.s_times() && gxx.t_times() == gxy.s_times(),
          "Gxx time grid does not match Gxy rows");
  require(gyy.s_times() == gxy.t_times() && gyy.t_times() == gxy.t_times(),
          "Gyy time grid does not match Gxy columns");
}

/// (K + size * lambda * I)^{-1} K through a Cholesky factorization.
inline Eigen::MatrixXd regularized_ratio(const Eigen::MatrixXd& k, double lambda) {
  const auto size = static_cast<double>(k.rows());
  Eigen::MatrixXd reg = k;
  reg.diagonal().array() += size * lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success)
    throw NumericError("regularized Gram matrix is not positive definite (lambda too small?)");
  Eigen::MatrixXd out = llt.solve(k);
  if (!out.allFinite()) throw NumericError("regularized solve produced non-finite values");
  return out;
}

}  // namespace detail

/// Estimated inner products <x~^i_{s_p}, y~^j_{t_q}> of the predictive conditional mean
/// embeddings of every sample prefix. Returned with the layout of a GramField.
inline GramField inner_prod_pred_kme(const GramField& gxx, const GramField& gxy, const GramField& gyy,
                                     double lambda) {
  require(lambda > 0 && std::isfinite(lambda), "lambda must be positive");
  detail::check_field_shapes(gxx, gxy, gyy);
  const Eigen::Index m = gxy.rows();
  const Eigen::Index n = gxy.cols();
  const Eigen::Index P = gxy.grid_rows();
  const Eigen::Index Q = gxy.grid_cols();
  const Eigen::MatrixXd k_tt = gxy.terminal();

  // left[p] = K_pp (K_pp + m lambda I)^{-1} K_TT, right[q] = (L_qq + n lambda I)^{-1} L_qq.
  std::vector<Eigen::MatrixXd> left(static_cast<std::size_t>(P));
  std::vector<Eigen::MatrixXd> right(static_cast<std::size_t>(Q));
  parallel_for(static_cast<std::size_t>(P + Q), [&](std::size_t k) {
    if (k < static_cast<std::size_t>(P)) {
      const auto p = static_cast<Eigen::Index>(k);
      left[k] = detail::regularized_ratio(gxx.slice(p, p), lambda).transpose() * k_tt;
    } else {
      const auto q = static_cast<Eigen::Index>(k) - P;
      right[static_cast<std::size_t>(q)] = detail::regularized_ratio(gyy.slice(q, q), lambda);
    }
  });

  GramField out(m, n, gxy.s_times(), gxy.t_times());
  parallel_for(static_cast<std::size_t>(P * Q), [&](std::size_t k) {
    const auto p = static_cast<Eigen::Index>(k) / Q;
    const auto q = static_cast<Eigen::Index>(k) % Q;
    const Eigen::MatrixXd block = left[static_cast<std::size_t>(p)] * right[static_cast<std::size_t>(q)];
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j) out(i, j, p, q) = block(i, j);
  });
  return out;
}

/// Gram field of the next order: signature kernels between the predictive-KME paths.
/// Passing the same field three times computes a symmetric same-ensemble field.
inline GramField higher_order_gram(const GramField& gxx, const GramField& gxy, const GramField& gyy,
                                   double lambda, const KernelOptions& opts = {}) {
  opts.validate();
  const GramField lifted = inner_prod_pred_kme(gxx, gxy, gyy, lambda);
  const bool symmetric = &gxx == &gxy && &gxy == &gyy;
  const Eigen::Index Q = gxy.grid_cols();
  const Eigen::Index rows = gxy.grid_rows() - 1;
  const Eigen::Index cols = Q - 1;
  const bool with_time = opts.time_scale > 0;
  std::vector<double> ds, dt;
  for (Eigen::Index p = 0; p < rows; ++p)
    ds.push_back(opts.time_scale * (gxy.s_times()[p + 1] - gxy.s_times()[p]));
  for (Eigen::Index q = 0; q < cols; ++q)
    dt.push_back(opts.time_scale * (gxy.t_times()[q + 1] - gxy.t_times()[q]));

  GramField out(gxy.rows(), gxy.cols(), gxy.s_times(), gxy.t_times());
  detail::solve_field(out, opts.refinement, symmetric, [&](Eigen::Index i, Eigen::Index j, double* inner) {
    const double* mm = lifted.cell(i, j);
    for (Eigen::Index p = 0; p < rows; ++p)
      for (Eigen::Index q = 0; q < cols; ++q) {
        double v = mm[(p + 1) * Q + (q + 1)] + mm[p * Q + q] - mm[(p + 1) * Q + q] - mm[p * Q + (q + 1)];
        if (with_time) v += ds[static_cast<std::size_t>(p)] * dt[static_cast<std::size_t>(q)];
        inner[p * cols + q] = v;
      }
  });
  return out;
}

/// Terminal Gram matrices of one order for the XX, XY and YY blocks.
struct TerminalGrams {
  Eigen::MatrixXd xx, xy, yy;
};

/// Raises full first-order fields to cfg.order and returns the terminal slices.
inline TerminalGrams lift_to_order(GramField xx, GramField xy, GramField yy, const HigherOrderConfig& cfg) {
  cfg.validate();
  const KernelOptions opts = cfg.kernel();
  for (int order = 2; order <= cfg.order; ++order) {
    GramField next_xy = higher_order_gram(xx, xy, yy, cfg.lambda, opts);
    GramField next_xx = higher_order_gram(xx, xx, xx, cfg.lambda, opts);
    GramField next_yy = higher_order_gram(yy, yy, yy, cfg.lambda, opts);
    xx = std::move(next_xx);
    xy = std::move(next_xy);
    yy = std::move(next_yy);
  }
  return TerminalGrams{xx.terminal(), xy.terminal(), yy.terminal()};
}

/// Combines terminal Gram blocks into an MMD^2 estimate.
inline double mmd_squared(const Eigen::MatrixXd& kxx, const Eigen::MatrixXd& kxy, const Eigen::MatrixXd& kyy,
                          MmdVariant variant) {
  const auto m = static_cast<double>(kxx.rows());
  const auto n = static_cast<double>(kyy.rows());
  if (variant == MmdVariant::biased) return kxx.mean() - 2.0 * kxy.mean() + kyy.mean();
  require(kxx.rows() >= 2 && kyy.rows() >= 2, "unbiased MMD needs at least two samples per ensemble");
  const double xx = (kxx.sum() - kxx.trace()) / (m * (m - 1.0));
  const double yy = (kyy.sum() - kyy.trace()) / (n * (n - 1.0));
  return xx - 2.0 * kxy.mean() + yy;
}

inline double mmd_squared(const TerminalGrams& g, MmdVariant variant) {
  return mmd_squared(g.xx, g.xy, g.yy, variant);
}

/// Terminal Gram blocks of order cfg.order for two ensembles.
inline TerminalGrams terminal_grams(const Ensemble& X, const Ensemble& Y, const HigherOrderConfig& cfg) {
  cfg.validate();
  require_same_grid(X, Y);
  const KernelOptions opts = cfg.kernel();
  if (cfg.order == 1)
    return TerminalGrams{first_order_gram_terminal(X, opts), first_order_gram_terminal(X, Y, opts),
                         first_order_gram_terminal(Y, opts)};
  return lift_to_order(first_order_gram(X, opts), first_order_gram(X, Y, opts), first_order_gram(Y, opts), cfg);
}

/// Order-k MMD^2 estimator between two ensembles.
inline MmdEstimate higher_order_mmd(const Ensemble& X, const Ensemble& Y, const HigherOrderConfig& cfg,
                                    MmdVariant variant = MmdVariant::unbiased) {
  cfg.validate();
  require_same_grid(X, Y);
  if (variant == MmdVariant::unbiased)
    require(X.size() >= 2 && Y.size() >= 2, "unbiased MMD needs at least two samples per ensemble");
  return MmdEstimate{cfg.order, mmd_squared(terminal_grams(X, Y, cfg), variant), variant};
}

// ---------------------------------------------------------------------------------------------
// Per-ensemble caches for many pairwise MMDs (distribution regression).

/// Same-ensemble fields of orders 1..k-1 (full) plus the order-k terminal Gram matrix.
struct SelfTower {
  std::vector<GramField> fields;
  Eigen::MatrixXd top;
};

inline SelfTower self_tower(const Ensemble& X, const HigherOrderConfig& cfg) {
  cfg.validate();
  const KernelOptions opts = cfg.kernel();
  SelfTower tower;
  if (cfg.order == 1) {
    tower.top = first_order_gram_terminal(X, opts);
    return tower;
  }
  tower.fields.push_back(first_order_gram(X, opts));
  for (int order = 2; order < cfg.order; ++order) {
    const GramField& last = tower.fields.back();
    tower.fields.push_back(higher_order_gram(last, last, last, cfg.lambda, opts));
  }
  const GramField& last = tower.fields.back();
  tower.top = higher_order_gram(last, last, last, cfg.lambda, opts).terminal();
  return tower;
}

/// Order-k cross terminal Gram matrix given both self towers.
inline Eigen::MatrixXd cross_top(const Ensemble& X, const SelfTower& tx, const Ensemble& Y, const SelfTower& ty,
                                 const HigherOrderConfig& cfg) {
  cfg.validate();
  require_same_grid(X, Y);
  const KernelOptions opts = cfg.kernel();
  if (cfg.order == 1) return first_order_gram_terminal(X, Y, opts);
  require(tx.fields.size() == static_cast<std::size_t>(cfg.order - 1) && ty.fields.size() == tx.fields.size(),
          "self towers do not match the requested order");
  GramField xy = first_order_gram(X, Y, opts);
  for (std::size_t level = 0; level < tx.fields.size(); ++level)
    xy = higher_order_gram(tx.fields[level], xy, ty.fields[level], cfg.lambda, opts);
  return xy.terminal();
}

}  // namespace hokme
