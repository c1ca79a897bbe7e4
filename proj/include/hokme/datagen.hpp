#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hokme/error.hpp"
#include "hokme/path.hpp"
#include "hokme/random.hpp"

namespace hokme {

/// Evenly spaced grid of `points` times on [0, horizon].
inline std::vector<double> uniform_grid(std::size_t points, double horizon = 1.0) {
  require(points >= 2, "grid needs at least two points");
  require(horizon > 0, "grid horizon must be positive");
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k)
    grid[k] = horizon * static_cast<double>(k) / static_cast<double>(points - 1);
  return grid;
}

// ---------------------------------------------------------------------------------------------
// Two-branch processes with equal terminal laws but different information flow.
//
//   early: 0 -> +-1/n at t=1 (fair coin) -> +-1 at t=2, same sign. Future known at t=1.
//   late:  0 -> 0 at t=1 -> +-1 at t=2 (fair coin). Future unknown until t=2.

enum class Fig3Variant { early, late };

inline Ensemble gen_fig3(Fig3Variant variant, double n, std::size_t m, std::uint64_t seed) {
  require(m >= 1, "need at least one sample");
  if (variant == Fig3Variant::early) require(n >= 1, "branch parameter n must be at least 1");
  const std::vector<double> times{0.0, 1.0, 2.0};
  std::vector<Path> paths;
  paths.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto rng = derived_stream(seed, i);
    const bool up = std::bernoulli_distribution(0.5)(rng);
    const double sign = up ? 1.0 : -1.0;
    Eigen::MatrixXd values(3, 1);
    values(0, 0) = 0.0;
    values(1, 0) = variant == Fig3Variant::early ? sign / n : 0.0;
    values(2, 0) = sign;
    paths.emplace_back(times, std::move(values));
  }
  return Ensemble(std::move(paths));
}

// ---------------------------------------------------------------------------------------------

inline Ensemble gen_brownian(std::size_t d, std::size_t m, const std::vector<double>& grid, std::uint64_t seed) {
  require(d >= 1 && m >= 1, "need positive dimension and sample count");
  require(grid.size() >= 2, "grid needs at least two points");
  std::vector<Path> paths;
  paths.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto rng = derived_stream(seed, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()),
                                                   static_cast<Eigen::Index>(d));
    for (std::size_t k = 1; k < grid.size(); ++k) {
      const double sd = std::sqrt(grid[k] - grid[k - 1]);
      for (std::size_t c = 0; c < d; ++c)
        values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
            values(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(c)) + sd * normal(rng);
    }
    paths.emplace_back(grid, std::move(values));
  }
  return Ensemble(std::move(paths));
}

/// Exact fractional Brownian motion on `grid` via Cholesky factorization of
/// C(s, t) = (s^2h + t^2h - |s - t|^2h) / 2. Coordinates are independent; X_0 = 0.
inline Ensemble gen_fbm(double hurst, std::size_t d, std::size_t m, const std::vector<double>& grid,
                        std::uint64_t seed) {
  require(hurst > 0 && hurst < 1, "Hurst exponent must lie in (0, 1)");
  require(d >= 1 && m >= 1, "need positive dimension and sample count");
  require(grid.size() >= 2 && grid.front() >= 0, "grid must have two or more non-negative times");
  // Rows of the covariance are the grid points with t > 0; t = 0 is pinned at zero.
  std::vector<double> active;
  for (double t : grid)
    if (t > 0) active.push_back(t);
  const auto k = static_cast<Eigen::Index>(active.size());
  const double two_h = 2.0 * hurst;
  Eigen::MatrixXd cov(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) {
      const double s = active[static_cast<std::size_t>(a)];
      const double t = active[static_cast<std::size_t>(b)];
      cov(a, b) = 0.5 * (std::pow(s, two_h) + std::pow(t, two_h) - std::pow(std::abs(s - t), two_h));
    }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("fBm covariance factorization failed");
  const Eigen::MatrixXd lower = llt.matrixL();

  std::vector<Path> paths;
  paths.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto rng = derived_stream(seed, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()),
                                                   static_cast<Eigen::Index>(d));
    Eigen::VectorXd z(k);
    for (std::size_t c = 0; c < d; ++c) {
      for (Eigen::Index a = 0; a < k; ++a) z(a) = normal(rng);
      values.col(static_cast<Eigen::Index>(c)).tail(k) = lower * z;
    }
    paths.emplace_back(grid, std::move(values));
  }
  return Ensemble(std::move(paths));
}

// ---------------------------------------------------------------------------------------------
// Triples for conditional-independence checks, all Brownian on `grid`.
//
//   shared: X = Z + noise_x, Y = Z + noise_y, so X and Y are independent given Z.
//   direct: X = noise_x, Y = X + noise_y, Z an unrelated Brownian motion.

struct CiTriple {
  Ensemble x, y, z;
};

inline CiTriple gen_ci_triple(bool direct, std::size_t m, const std::vector<double>& grid, std::uint64_t seed,
                              double noise = 0.5) {
  require(noise >= 0 && std::isfinite(noise), "noise scale must be non-negative");
  const Ensemble z = gen_brownian(1, m, grid, derived_stream(seed, 0)());
  const Ensemble nx = gen_brownian(1, m, grid, derived_stream(seed, 1)());
  const Ensemble ny = gen_brownian(1, m, grid, derived_stream(seed, 2)());
  std::vector<Path> xs, ys;
  xs.reserve(m);
  ys.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::MatrixXd xv = direct ? Eigen::MatrixXd(nx[i].values()) : Eigen::MatrixXd(z[i].values() + noise * nx[i].values());
    const Eigen::MatrixXd yv = direct ? Eigen::MatrixXd(xv + noise * ny[i].values()) : Eigen::MatrixXd(z[i].values() + noise * ny[i].values());
    xs.emplace_back(grid, xv);
    ys.emplace_back(grid, yv);
  }
  return {Ensemble(std::move(xs)), Ensemble(std::move(ys)), z};
}

// ---------------------------------------------------------------------------------------------
// Bodies in the plane coupled by linear springs, driven by random exogenous forces.

struct SpringSpec {
  std::size_t bodies = 3;
  /// Undirected springs between body indices.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t episodes = 100;
  std::size_t steps = 20;
  double dt = 0.05;
  double stiffness = 20.0;
  double rest_min = 20.0;
  double rest_max = 120.0;
  /// Initial positions are uniform in [0, box]^2.
  double box = 200.0;
  /// Place each body at rest length from an already placed neighbour, at a uniform random angle.
  /// Bodies with no placed neighbour, or all bodies when false, are uniform in the box.
  bool start_at_rest = true;
  /// Standard deviation of each coordinate of the per-step random force.
  double force_scale = 200.0;
  /// Reported positions are divided by this length unit.
  double unit = 100.0;

  void validate() const {
    require(bodies >= 1, "need at least one body");
    require(episodes >= 1 && steps >= 1, "need at least one episode and one step");
    require(dt > 0 && stiffness >= 0 && rest_min >= 0 && rest_max >= rest_min, "invalid spring parameters");
    require(box > 0 && force_scale >= 0 && unit > 0, "invalid spring parameters");
    for (const auto& [a, b] : edges) {
      require(a < bodies && b < bodies, "spring endpoint out of range");
      require(a != b, "springs cannot connect a body to itself");
    }
  }
};

/// One 2-D ensemble per body; sample i is that body's trajectory in episode i.
inline std::vector<Ensemble> gen_spring_system(const SpringSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t nb = spec.bodies;
  std::vector<double> rest(spec.edges.size());
  {
    auto rng = derived_stream(seed, 0);
    std::uniform_real_distribution<double> length(spec.rest_min, spec.rest_max);
    for (double& r : rest) r = length(rng);
  }
  std::vector<double> times(spec.steps + 1);
  for (std::size_t k = 0; k <= spec.steps; ++k) times[k] = static_cast<double>(k) * spec.dt;

  std::vector<std::vector<Path>> per_body(nb);
  for (std::size_t ep = 0; ep < spec.episodes; ++ep) {
    auto rng = derived_stream(seed, ep + 1);
    std::uniform_real_distribution<double> place(0.0, spec.box);
    std::normal_distribution<double> kick(0.0, spec.force_scale);
    Eigen::MatrixXd pos(static_cast<Eigen::Index>(nb), 2);
    Eigen::MatrixXd vel = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), 2);
    if (spec.start_at_rest) {
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::acos(-1.0));
      std::vector<bool> placed(nb, false);
      for (std::size_t root = 0; root < nb; ++root) {
        if (placed[root]) continue;
        pos(static_cast<Eigen::Index>(root), 0) = place(rng);
        pos(static_cast<Eigen::Index>(root), 1) = place(rng);
        placed[root] = true;
        std::vector<std::size_t> queue{root};
        for (std::size_t head = 0; head < queue.size(); ++head) {
          const std::size_t u = queue[head];
          for (std::size_t e = 0; e < spec.edges.size(); ++e) {
            const auto [a, b] = spec.edges[e];
            if (a != u && b != u) continue;
            const std::size_t v = a == u ? b : a;
            if (placed[v]) continue;
            const double theta = angle(rng);
            pos.row(static_cast<Eigen::Index>(v)) =
                pos.row(static_cast<Eigen::Index>(u)) + rest[e] * Eigen::RowVector2d(std::cos(theta), std::sin(theta));
            placed[v] = true;
            queue.push_back(v);
          }
        }
      }
    } else {
      for (Eigen::Index b = 0; b < pos.rows(); ++b) {
        pos(b, 0) = place(rng);
        pos(b, 1) = place(rng);
      }
    }
    std::vector<Eigen::MatrixXd> traj(nb, Eigen::MatrixXd(static_cast<Eigen::Index>(spec.steps + 1), 2));
    auto record = [&](std::size_t k) {
      for (std::size_t b = 0; b < nb; ++b)
        traj[b].row(static_cast<Eigen::Index>(k)) = pos.row(static_cast<Eigen::Index>(b)) / spec.unit;
    };
    record(0);
    for (std::size_t k = 1; k <= spec.steps; ++k) {
      Eigen::MatrixXd force(static_cast<Eigen::Index>(nb), 2);
      for (Eigen::Index b = 0; b < force.rows(); ++b) {
        force(b, 0) = kick(rng);
        force(b, 1) = kick(rng);
      }
      for (std::size_t e = 0; e < spec.edges.size(); ++e) {
        const auto a = static_cast<Eigen::Index>(spec.edges[e].first);
        const auto b = static_cast<Eigen::Index>(spec.edges[e].second);
        const Eigen::RowVector2d gap = pos.row(b) - pos.row(a);
        const double dist = gap.norm();
        if (dist <= 0) continue;
        const Eigen::RowVector2d f = spec.stiffness * (dist - rest[e]) / dist * gap;
        force.row(a) += f;
        force.row(b) -= f;
      }
      // Semi-implicit Euler with unit masses.
      vel += spec.dt * force;
      pos += spec.dt * vel;
      record(k);
    }
    for (std::size_t b = 0; b < nb; ++b) per_body[b].emplace_back(times, std::move(traj[b]));
  }
  std::vector<Ensemble> out;
  out.reserve(nb);
  for (auto& paths : per_body) out.emplace_back(std::move(paths));
  return out;
}

}  // namespace hokme
