#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hokme/error.hpp"

namespace hokme {

/// A piecewise-linear path: values[k] is the state at times[k], linear in between.
class Path {
 public:
  Path(std::vector<double> times, Eigen::MatrixXd values)
      : times_(std::move(times)), values_(std::move(values)) {
    require(!times_.empty(), "path needs at least one time point");
    require(static_cast<Eigen::Index>(times_.size()) == values_.rows(),
            "path times/values length mismatch: " + std::to_string(times_.size()) + " vs " +
                std::to_string(values_.rows()));
    require(values_.cols() >= 1, "path dimension must be at least 1");
    for (std::size_t k = 0; k < times_.size(); ++k) {
      require(std::isfinite(times_[k]), "path times must be finite");
      if (k > 0) require(times_[k] > times_[k - 1], "path times must be strictly increasing");
    }
    require(values_.allFinite(), "path values must be finite");
  }

  const std::vector<double>& times() const { return times_; }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::Index length() const { return values_.rows(); }
  Eigen::Index dim() const { return values_.cols(); }

  bool operator==(const Path& other) const {
    return times_ == other.times_ && values_.rows() == other.values_.rows() &&
           values_.cols() == other.values_.cols() && values_ == other.values_;
  }

 private:
  std::vector<double> times_;
  Eigen::MatrixXd values_;
};

/// Prefix of `p` made of its first `index_q` grid points (1-based count).
inline Path restrict(const Path& p, Eigen::Index index_q) {
  require(index_q >= 1 && index_q <= p.length(),
          "restrict index " + std::to_string(index_q) + " outside [1, " +
              std::to_string(p.length()) + "]");
  std::vector<double> times(p.times().begin(), p.times().begin() + index_q);
  return Path(std::move(times), p.values().topRows(index_q));
}

/// Row k holds values[k+1] - values[k].
inline Eigen::MatrixXd increments(const Path& p) {
  const Eigen::Index n = p.length() - 1;
  return p.values().bottomRows(n) - p.values().topRows(n);
}

/// Prepends the coordinate scale * t.
inline Path time_augment(const Path& p, double scale) {
  require(scale > 0 && std::isfinite(scale), "time_augment scale must be positive");
  Eigen::MatrixXd values(p.length(), p.dim() + 1);
  for (Eigen::Index k = 0; k < p.length(); ++k) values(k, 0) = scale * p.times()[k];
  values.rightCols(p.dim()) = p.values();
  return Path(p.times(), std::move(values));
}

/// Samples of one process on a shared time grid.
class Ensemble {
 public:
  explicit Ensemble(std::vector<Path> paths) : paths_(std::move(paths)) {
    require(!paths_.empty(), "ensemble must contain at least one path");
    const Path& first = paths_.front();
    for (std::size_t i = 1; i < paths_.size(); ++i) {
      require(paths_[i].times() == first.times(),
              "ensemble path " + std::to_string(i) + " is on a different time grid");
      require(paths_[i].dim() == first.dim(),
              "ensemble path " + std::to_string(i) + " has a different dimension");
    }
  }

  std::size_t size() const { return paths_.size(); }
  const Path& operator[](std::size_t i) const { return paths_[i]; }
  const std::vector<Path>& paths() const { return paths_; }
  const std::vector<double>& times() const { return paths_.front().times(); }
  Eigen::Index length() const { return paths_.front().length(); }
  Eigen::Index dim() const { return paths_.front().dim(); }

  auto begin() const { return paths_.begin(); }
  auto end() const { return paths_.end(); }

  bool operator==(const Ensemble& other) const { return paths_ == other.paths_; }

 private:
  std::vector<Path> paths_;
};

inline bool same_grid(const Ensemble& a, const Ensemble& b) {
  return a.times() == b.times() && a.dim() == b.dim();
}

inline void require_same_grid(const Ensemble& a, const Ensemble& b) {
  require(a.times() == b.times(), "ensembles are on different time grids");
  require(a.dim() == b.dim(), "ensembles have different path dimensions");
}

/// Ensemble with every path's values multiplied by `factor` (times untouched).
inline Ensemble rescale(const Ensemble& e, double factor) {
  require(factor > 0 && std::isfinite(factor), "rescale factor must be positive");
  std::vector<Path> out;
  out.reserve(e.size());
  for (const Path& p : e) out.emplace_back(p.times(), p.values() * factor);
  return Ensemble(std::move(out));
}

/// Root-mean-square norm of the per-step increments across the ensemble.
inline double increment_rms(const Ensemble& e) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const Path& p : e) {
    Eigen::MatrixXd inc = increments(p);
    sum += inc.squaredNorm();
    count += static_cast<std::size_t>(inc.rows());
  }
  return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

/// Joint process: coordinates of the i-th path of every ensemble concatenated.
inline Ensemble join_coordinates(std::span<const Ensemble* const> parts) {
  require(!parts.empty(), "join_coordinates needs at least one ensemble");
  const Ensemble& first = *parts.front();
  Eigen::Index total_dim = 0;
  for (const Ensemble* e : parts) {
    require(e->size() == first.size(), "joined ensembles must have equal sample counts");
    require(e->times() == first.times(), "joined ensembles must share a time grid");
    total_dim += e->dim();
  }
  std::vector<Path> out;
  out.reserve(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    Eigen::MatrixXd values(first.length(), total_dim);
    Eigen::Index col = 0;
    for (const Ensemble* e : parts) {
      values.middleCols(col, e->dim()) = (*e)[i].values();
      col += e->dim();
    }
    out.emplace_back(first.times(), std::move(values));
  }
  return Ensemble(std::move(out));
}

/// Linear interpolation of `p` onto `grid`; the grid must lie inside p's time span.
inline Path resample(const Path& p, const std::vector<double>& grid) {
  const auto& t = p.times();
  Eigen::MatrixXd values(static_cast<Eigen::Index>(grid.size()), p.dim());
  std::size_t seg = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double s = grid[k];
    require(s >= t.front() && s <= t.back(),
            "cannot resample: grid point " + std::to_string(s) + " outside path time span");
    while (seg + 1 < t.size() - 1 && t[seg + 1] < s) ++seg;
    if (t.size() == 1 || s == t[seg]) {
      values.row(static_cast<Eigen::Index>(k)) = p.values().row(static_cast<Eigen::Index>(seg));
      continue;
    }
    const double w = (s - t[seg]) / (t[seg + 1] - t[seg]);
    const auto a = p.values().row(static_cast<Eigen::Index>(seg));
    const auto b = p.values().row(static_cast<Eigen::Index>(seg + 1));
    values.row(static_cast<Eigen::Index>(k)) = (1.0 - w) * a + w * b;
  }
  return Path(grid, std::move(values));
}

/// 64-bit FNV-1a digest of an ensemble's grid and values.
inline std::uint64_t fingerprint(const Ensemble& e) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < bytes; ++k) {
      h ^= b[k];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t header[3] = {e.size(), static_cast<std::uint64_t>(e.length()),
                                    static_cast<std::uint64_t>(e.dim())};
  mix(header, sizeof(header));
  mix(e.times().data(), e.times().size() * sizeof(double));
  for (const Path& p : e) {
    for (Eigen::Index r = 0; r < p.length(); ++r)
      for (Eigen::Index c = 0; c < p.dim(); ++c) {
        const double v = p.values()(r, c);
        mix(&v, sizeof(double));
      }
  }
  return h;
}

}  // namespace hokme
