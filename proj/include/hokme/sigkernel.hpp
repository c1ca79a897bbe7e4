#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "hokme/error.hpp"
#include "hokme/parallel.hpp"
#include "hokme/path.hpp"

namespace hokme {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Discretization of the signature-kernel PDE.
struct KernelOptions {
  /// Each grid cell is split into 2^refinement x 2^refinement sub-cells.
  int refinement = 2;
  /// When positive, paths are treated as time-augmented with first coordinate time_scale * t.
  double time_scale = 0.0;

  void validate() const {
    require(refinement >= 0 && refinement <= 12, "refinement must lie in [0, 12]");
    require(time_scale >= 0 && std::isfinite(time_scale), "time_scale must be non-negative");
  }
};

/// Solution of the Goursat problem on the coarse grid: u(p, q) = k_S(x|[0,s_p], y|[0,t_q]).
struct PdeGrid {
  Eigen::MatrixXd u;
  int refinement = 0;
};

namespace detail {

/// Explicit second-order scheme for u_st = <x', y'> u with unit boundary data.
/// `inc` is the rows x cols matrix (row-major) of increment inner products. When `grid` is
/// non-null the coarse (rows+1) x (cols+1) solution is written there row-major.
/// `work` must hold at least 2 * (cols * 2^refinement + 1) doubles.
inline double solve_goursat(const double* inc, Eigen::Index rows, Eigen::Index cols,
                            int refinement, double* grid, double* work) {
  const Eigen::Index n_sub = Eigen::Index{1} << refinement;
  const Eigen::Index fine_cols = cols * n_sub;
  const double cell_scale = 1.0 / static_cast<double>(n_sub * n_sub);
  double* prev = work;
  double* cur = work + fine_cols + 1;
  for (Eigen::Index k = 0; k <= fine_cols; ++k) prev[k] = 1.0;
  if (grid != nullptr)
    for (Eigen::Index b = 0; b <= cols; ++b) grid[b] = 1.0;

  for (Eigen::Index a = 0; a < rows; ++a) {
    const double* inc_row = inc + a * cols;
    for (Eigen::Index r = 0; r < n_sub; ++r) {
      cur[0] = 1.0;
      for (Eigen::Index b = 0; b < cols; ++b) {
        const double m = inc_row[b] * cell_scale;
        const double c1 = 1.0 + 0.5 * m + m * m / 12.0;
        const double c2 = 1.0 - m * m / 12.0;
        const Eigen::Index base = b * n_sub;
        for (Eigen::Index s = 0; s < n_sub; ++s) {
          const Eigen::Index k = base + s;
          cur[k + 1] = (cur[k] + prev[k + 1]) * c1 - prev[k] * c2;
        }
      }
      std::swap(prev, cur);
    }
    if (grid != nullptr) {
      double* out = grid + (a + 1) * (cols + 1);
      for (Eigen::Index b = 0; b <= cols; ++b) out[b] = prev[b * n_sub];
    }
  }
  return prev[fine_cols];
}

inline void check_finite(const double* data, std::size_t count, const char* what) {
  for (std::size_t k = 0; k < count; ++k)
    if (!std::isfinite(data[k])) throw NumericError(std::string(what) + " contains non-finite values");
}

/// Increment matrix of each path plus scaled time steps, reused across all pairs.
struct IncrementSet {
  std::vector<RowMatrix> inc;
  std::vector<double> dt;
};

inline IncrementSet prepare_increments(const Ensemble& e, double time_scale) {
  IncrementSet out;
  out.inc.reserve(e.size());
  for (const Path& p : e) out.inc.emplace_back(increments(p));
  const auto& t = e.times();
  for (std::size_t k = 0; k + 1 < t.size(); ++k) out.dt.push_back(time_scale * (t[k + 1] - t[k]));
  return out;
}

/// inner[p * cols + q] = <dx_p, dy_q> (+ time term), summed in a fixed order.
inline void increment_products(const RowMatrix& dx, const RowMatrix& dy, const std::vector<double>& ds,
                               const std::vector<double>& dt, bool with_time, double* inner) {
  const Eigen::Index rows = dx.rows();
  const Eigen::Index cols = dy.rows();
  const Eigen::Index d = dx.cols();
  for (Eigen::Index p = 0; p < rows; ++p) {
    for (Eigen::Index q = 0; q < cols; ++q) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) acc += dx(p, c) * dy(q, c);
      if (with_time) acc += ds[static_cast<std::size_t>(p)] * dt[static_cast<std::size_t>(q)];
      inner[p * cols + q] = acc;
    }
  }
}

}  // namespace detail

/// Signature kernel of the pair whose increment inner products are `inc`.
inline double pde_solve(const Eigen::MatrixXd& inc, int refinement = 2) {
  require(refinement >= 0 && refinement <= 12, "refinement must lie in [0, 12]");
  RowMatrix m = inc;
  detail::check_finite(m.data(), static_cast<std::size_t>(m.size()), "increment matrix");
  std::vector<double> work(2 * static_cast<std::size_t>((m.cols() << refinement) + 1));
  const double v = detail::solve_goursat(m.data(), m.rows(), m.cols(), refinement, nullptr, work.data());
  if (!std::isfinite(v)) throw NumericError("PDE solution overflowed");
  return v;
}

/// Full solution on the coarse grid.
inline PdeGrid pde_solve_full(const Eigen::MatrixXd& inc, int refinement = 2) {
  require(refinement >= 0 && refinement <= 12, "refinement must lie in [0, 12]");
  RowMatrix m = inc;
  detail::check_finite(m.data(), static_cast<std::size_t>(m.size()), "increment matrix");
  std::vector<double> work(2 * static_cast<std::size_t>((m.cols() << refinement) + 1));
  RowMatrix u(m.rows() + 1, m.cols() + 1);
  detail::solve_goursat(m.data(), m.rows(), m.cols(), refinement, u.data(), work.data());
  detail::check_finite(u.data(), static_cast<std::size_t>(u.size()), "PDE solution");
  return PdeGrid{u, refinement};
}

/// Increment inner-product matrix <x_{s_{p+1}} - x_{s_p}, y_{t_{q+1}} - y_{t_q}>.
inline Eigen::MatrixXd increment_inner_products(const Path& x, const Path& y, double time_scale = 0.0) {
  require(x.dim() == y.dim(), "paths have different dimensions");
  RowMatrix dx = increments(x);
  RowMatrix dy = increments(y);
  std::vector<double> ds, dt;
  for (std::size_t k = 0; k + 1 < x.times().size(); ++k)
    ds.push_back(time_scale * (x.times()[k + 1] - x.times()[k]));
  for (std::size_t k = 0; k + 1 < y.times().size(); ++k)
    dt.push_back(time_scale * (y.times()[k + 1] - y.times()[k]));
  RowMatrix inner(dx.rows(), dy.rows());
  detail::increment_products(dx, dy, ds, dt, time_scale > 0, inner.data());
  return inner;
}

/// k_S(x, y) via the PDE.
inline double signature_kernel(const Path& x, const Path& y, const KernelOptions& opts = {}) {
  opts.validate();
  return pde_solve(increment_inner_products(x, y, opts.time_scale), opts.refinement);
}

/// Kernel values on all prefix pairs: g(i, j, p, q) = k_S(x^i|[0,s_p], y^j|[0,t_q]).
/// Storage is cell-major: the P x Q grid of pair (i, j) is contiguous and row-major.
class GramField {
 public:
  GramField() = default;
  GramField(Eigen::Index m, Eigen::Index n, std::vector<double> s_times, std::vector<double> t_times)
      : m_(m), n_(n), s_times_(std::move(s_times)), t_times_(std::move(t_times)) {
    require(m >= 1 && n >= 1, "Gram field needs at least one row and column sample");
    require(!s_times_.empty() && !t_times_.empty(), "Gram field needs non-empty time grids");
    data_.assign(static_cast<std::size_t>(m_ * n_) * cell_size(), 0.0);
  }

  Eigen::Index rows() const { return m_; }
  Eigen::Index cols() const { return n_; }
  Eigen::Index grid_rows() const { return static_cast<Eigen::Index>(s_times_.size()); }
  Eigen::Index grid_cols() const { return static_cast<Eigen::Index>(t_times_.size()); }
  const std::vector<double>& s_times() const { return s_times_; }
  const std::vector<double>& t_times() const { return t_times_; }
  std::size_t cell_size() const { return s_times_.size() * t_times_.size(); }

  double* cell(Eigen::Index i, Eigen::Index j) {
    return data_.data() + static_cast<std::size_t>(i * n_ + j) * cell_size();
  }
  const double* cell(Eigen::Index i, Eigen::Index j) const {
    return data_.data() + static_cast<std::size_t>(i * n_ + j) * cell_size();
  }

  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index p, Eigen::Index q) const {
    return cell(i, j)[p * grid_cols() + q];
  }
  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index p, Eigen::Index q) {
    return cell(i, j)[p * grid_cols() + q];
  }

  /// The m x n matrix g(:, :, p, q).
  Eigen::MatrixXd slice(Eigen::Index p, Eigen::Index q) const {
    Eigen::MatrixXd out(m_, n_);
    const Eigen::Index offset = p * grid_cols() + q;
    for (Eigen::Index i = 0; i < m_; ++i)
      for (Eigen::Index j = 0; j < n_; ++j) out(i, j) = cell(i, j)[offset];
    return out;
  }

  Eigen::MatrixXd terminal() const { return slice(grid_rows() - 1, grid_cols() - 1); }

  /// Sub-field on the given row and column sample indices.
  GramField gather(const std::vector<Eigen::Index>& row_idx, const std::vector<Eigen::Index>& col_idx) const {
    GramField out(static_cast<Eigen::Index>(row_idx.size()), static_cast<Eigen::Index>(col_idx.size()),
                  s_times_, t_times_);
    const std::size_t cs = cell_size();
    for (std::size_t a = 0; a < row_idx.size(); ++a)
      for (std::size_t b = 0; b < col_idx.size(); ++b) {
        const double* src = cell(row_idx[a], col_idx[b]);
        std::copy(src, src + cs, out.cell(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
      }
    return out;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  Eigen::Index m_ = 0;
  Eigen::Index n_ = 0;
  std::vector<double> s_times_;
  std::vector<double> t_times_;
  std::vector<double> data_;
};

namespace detail {

/// Solves every (i, j) cell given a per-cell increment provider.
/// fill(i, j, inner) must write the (P-1) x (Q-1) increment matrix of the pair into `inner`.
/// With `symmetric`, only i <= j is solved and the rest mirrored by transposition.
template <typename Fill>
void solve_field(GramField& field, int refinement, bool symmetric, Fill&& fill) {
  const Eigen::Index m = field.rows();
  const Eigen::Index n = field.cols();
  const Eigen::Index rows = field.grid_rows() - 1;
  const Eigen::Index cols = field.grid_cols() - 1;
  const std::size_t work_size = 2 * static_cast<std::size_t>((cols << refinement) + 1);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    std::vector<double> inner(static_cast<std::size_t>(rows * cols));
    std::vector<double> work(work_size);
    for (Eigen::Index j = symmetric ? i : 0; j < n; ++j) {
      fill(i, j, inner.data());
      check_finite(inner.data(), inner.size(), "increment matrix");
      double* out = field.cell(i, j);
      solve_goursat(inner.data(), rows, cols, refinement, out, work.data());
      check_finite(out, field.cell_size(), "PDE solution");
    }
  });
  if (!symmetric) return;
  const Eigen::Index P = field.grid_rows();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double* src = field.cell(i, j);
      double* dst = field.cell(j, i);
      for (Eigen::Index p = 0; p < P; ++p)
        for (Eigen::Index q = 0; q < P; ++q) dst[q * P + p] = src[p * P + q];
    }
}

}  // namespace detail

/// Full first-order Gram field between two ensembles on a shared grid.
inline GramField first_order_gram(const Ensemble& X, const Ensemble& Y, const KernelOptions& opts = {}) {
  opts.validate();
  require_same_grid(X, Y);
  const bool symmetric = &X == &Y;
  const auto ix = detail::prepare_increments(X, opts.time_scale);
  const auto iy = symmetric ? ix : detail::prepare_increments(Y, opts.time_scale);
  GramField field(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(Y.size()), X.times(),
                  Y.times());
  const bool with_time = opts.time_scale > 0;
  detail::solve_field(field, opts.refinement, symmetric, [&](Eigen::Index i, Eigen::Index j, double* inner) {
    detail::increment_products(ix.inc[static_cast<std::size_t>(i)], iy.inc[static_cast<std::size_t>(j)],
                               ix.dt, iy.dt, with_time, inner);
  });
  return field;
}

/// Same-ensemble Gram field; exploits symmetry.
inline GramField first_order_gram(const Ensemble& X, const KernelOptions& opts = {}) {
  return first_order_gram(X, X, opts);
}

/// Terminal values only: the m x n matrix k_S(x^i, y^j).
inline Eigen::MatrixXd first_order_gram_terminal(const Ensemble& X, const Ensemble& Y,
                                                 const KernelOptions& opts = {}) {
  opts.validate();
  require_same_grid(X, Y);
  const bool symmetric = &X == &Y;
  const auto ix = detail::prepare_increments(X, opts.time_scale);
  const auto iy = symmetric ? ix : detail::prepare_increments(Y, opts.time_scale);
  const auto m = static_cast<Eigen::Index>(X.size());
  const auto n = static_cast<Eigen::Index>(Y.size());
  const Eigen::Index rows = X.length() - 1;
  const Eigen::Index cols = Y.length() - 1;
  const bool with_time = opts.time_scale > 0;
  Eigen::MatrixXd out(m, n);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    std::vector<double> inner(static_cast<std::size_t>(rows * cols));
    std::vector<double> work(2 * static_cast<std::size_t>((cols << opts.refinement) + 1));
    for (Eigen::Index j = symmetric ? i : 0; j < n; ++j) {
      detail::increment_products(ix.inc[ii], iy.inc[static_cast<std::size_t>(j)], ix.dt, iy.dt, with_time,
                                 inner.data());
      detail::check_finite(inner.data(), inner.size(), "increment matrix");
      const double v = detail::solve_goursat(inner.data(), rows, cols, opts.refinement, nullptr, work.data());
      if (!std::isfinite(v)) throw NumericError("PDE solution overflowed");
      out(i, j) = v;
    }
  });
  if (symmetric)
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) out(j, i) = out(i, j);
  return out;
}

inline Eigen::MatrixXd first_order_gram_terminal(const Ensemble& X, const KernelOptions& opts = {}) {
  return first_order_gram_terminal(X, X, opts);
}

// ---------------------------------------------------------------------------------------------
// Truncated signatures (Chen's relation), used as an independent check on the PDE route.

namespace detail {

/// levels[k] holds the d^k coefficients of the level-k signature term, words in base-d order.
using TensorSeries = std::vector<std::vector<double>>;

inline TensorSeries segment_exponential(const Eigen::RowVectorXd& delta, int level) {
  const auto d = static_cast<std::size_t>(delta.size());
  TensorSeries e(static_cast<std::size_t>(level) + 1);
  e[0] = {1.0};
  for (int k = 1; k <= level; ++k) {
    const auto& prev = e[static_cast<std::size_t>(k) - 1];
    auto& cur = e[static_cast<std::size_t>(k)];
    cur.resize(prev.size() * d);
    for (std::size_t w = 0; w < prev.size(); ++w)
      for (std::size_t c = 0; c < d; ++c)
        cur[w * d + c] = prev[w] * delta(static_cast<Eigen::Index>(c)) / static_cast<double>(k);
  }
  return e;
}

inline TensorSeries tensor_product(const TensorSeries& a, const TensorSeries& b, int level) {
  TensorSeries out(static_cast<std::size_t>(level) + 1);
  for (int k = 0; k <= level; ++k) {
    auto& dst = out[static_cast<std::size_t>(k)];
    dst.assign(a[static_cast<std::size_t>(k)].size(), 0.0);
    for (int i = 0; i <= k; ++i) {
      const auto& left = a[static_cast<std::size_t>(i)];
      const auto& right = b[static_cast<std::size_t>(k - i)];
      for (std::size_t u = 0; u < left.size(); ++u) {
        const double lu = left[u];
        double* row = dst.data() + u * right.size();
        for (std::size_t v = 0; v < right.size(); ++v) row[v] += lu * right[v];
      }
    }
  }
  return out;
}

}  // namespace detail

/// Signature of a piecewise-linear path truncated at `level`.
inline detail::TensorSeries truncated_signature(const Path& x, int level) {
  require(level >= 0, "signature level must be non-negative");
  const Eigen::MatrixXd inc = increments(x);
  detail::TensorSeries sig(static_cast<std::size_t>(level) + 1);
  sig[0] = {1.0};
  std::size_t width = 1;
  for (int k = 1; k <= level; ++k) {
    width *= static_cast<std::size_t>(x.dim());
    sig[static_cast<std::size_t>(k)].assign(width, 0.0);
  }
  for (Eigen::Index r = 0; r < inc.rows(); ++r)
    sig = detail::tensor_product(sig, detail::segment_exponential(inc.row(r), level), level);
  return sig;
}

/// Sum over levels 0..level of <S_k(x), S_k(y)>.
inline double truncated_sig_kernel(const Path& x, const Path& y, int level) {
  require(x.dim() == y.dim(), "paths have different dimensions");
  const auto sx = truncated_signature(x, level);
  const auto sy = truncated_signature(y, level);
  double total = 0.0;
  for (std::size_t k = 0; k < sx.size(); ++k)
    for (std::size_t w = 0; w < sx[k].size(); ++w) total += sx[k][w] * sy[k][w];
  return total;
}

// ---------------------------------------------------------------------------------------------
// Static kernels on flattened value matrices (rows in time order, times excluded).

enum class StaticKernel { rbf, matern32 };

inline Eigen::MatrixXd static_kernel_gram(const Ensemble& X, const Ensemble& Y, StaticKernel kind, double gamma) {
  require(gamma > 0 && std::isfinite(gamma), "gamma must be positive");
  require(X.length() == Y.length() && X.dim() == Y.dim(), "ensembles have incompatible shapes");
  const double g2 = gamma * gamma;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(Y.size()));
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = 0; j < Y.size(); ++j) {
      const double sq = (X[i].values() - Y[j].values()).squaredNorm();
      double v = 0.0;
      if (kind == StaticKernel::rbf) {
        v = std::exp(-sq / g2);
      } else {
        const double r = std::sqrt(3.0) * std::sqrt(sq) / g2;
        v = (1.0 + r) * std::exp(-r);
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  return out;
}

}  // namespace hokme
