#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace hokme;

TEST(Fig3, LateVariantMiddleValueIsZero) {
  const Ensemble e = gen_fig3(Fig3Variant::late, 0, 200, 1);
  for (const Path& p : e) {
    EXPECT_EQ(p.times(), (std::vector<double>{0, 1, 2}));
    EXPECT_EQ(p.values()(1, 0), 0.0);
    EXPECT_EQ(std::abs(p.values()(2, 0)), 1.0);
  }
}

TEST(Fig3, EarlyVariantStructure) {
  const Ensemble e = gen_fig3(Fig3Variant::early, 2.0, 200, 2);
  for (const Path& p : e) {
    EXPECT_EQ(p.values()(0, 0), 0.0);
    EXPECT_EQ(std::abs(p.values()(1, 0)), 0.5);
    EXPECT_EQ(p.values()(2, 0), p.values()(1, 0) > 0 ? 1.0 : -1.0);
  }
  EXPECT_THROW(gen_fig3(Fig3Variant::early, 0.5, 10, 1), ValidationError);
}

TEST(Fig3, TerminalLawsAgree) {
  const std::size_t m = 4000;
  double mean_e = 0, mean_l = 0;
  for (const Path& p : gen_fig3(Fig3Variant::early, 10, m, 3)) mean_e += p.values()(2, 0);
  for (const Path& p : gen_fig3(Fig3Variant::late, 0, m, 4)) mean_l += p.values()(2, 0);
  mean_e /= m;
  mean_l /= m;
  const double se = 1.0 / std::sqrt(static_cast<double>(m));
  EXPECT_LT(std::abs(mean_e), 4 * se);
  EXPECT_LT(std::abs(mean_l), 4 * se);
  EXPECT_LT(std::abs(mean_e - mean_l), 4 * std::sqrt(2.0) * se);
}

TEST(Fbm, HalfIsBrownian) {
  const auto grid = uniform_grid(11);
  const Ensemble e = gen_fbm(0.5, 1, 2000, grid, 1);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    double s = 0;
    for (const Path& p : e) {
      const double d = p.values()(static_cast<Eigen::Index>(k), 0) - p.values()(static_cast<Eigen::Index>(k - 1), 0);
      s += d * d;
    }
    EXPECT_NEAR(s / 2000, 0.1, 0.01);
  }
  // Adjacent increments are uncorrelated.
  double c = 0;
  for (const Path& p : e) c += (p.values()(2, 0) - p.values()(1, 0)) * (p.values()(1, 0) - p.values()(0, 0));
  EXPECT_LT(std::abs(c / 2000), 0.01);
}

TEST(Fbm, MarginalVariance) {
  const auto grid = uniform_grid(11);
  const double h = 0.3;
  const Ensemble e = gen_fbm(h, 1, 2000, grid, 2);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    double s = 0;
    for (const Path& p : e) s += std::pow(p.values()(static_cast<Eigen::Index>(k), 0), 2);
    EXPECT_NEAR(s / 2000, std::pow(grid[k], 2 * h), 0.1 * std::pow(grid[k], 2 * h));
  }
}

TEST(Fbm, PreconditionsAndDeterminism) {
  EXPECT_THROW(gen_fbm(0.0, 1, 5, uniform_grid(5), 1), ValidationError);
  EXPECT_THROW(gen_fbm(1.0, 1, 5, uniform_grid(5), 1), ValidationError);
  EXPECT_EQ(gen_fbm(0.7, 2, 5, uniform_grid(6), 9), gen_fbm(0.7, 2, 5, uniform_grid(6), 9));
  EXPECT_EQ(gen_fig3(Fig3Variant::early, 3, 5, 9), gen_fig3(Fig3Variant::early, 3, 5, 9));
  EXPECT_EQ(gen_brownian(2, 5, uniform_grid(6), 9), gen_brownian(2, 5, uniform_grid(6), 9));
}

TEST(Springs, ShapesAndDeterminism) {
  SpringSpec spec;
  spec.edges = {{0, 1}};
  spec.episodes = 7;
  const auto a = gen_spring_system(spec, 3);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0].size(), 7u);
  EXPECT_EQ(a[0].dim(), 2);
  EXPECT_EQ(a[0].length(), 21);
  const auto b = gen_spring_system(spec, 3);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a[k], b[k]);
  spec.edges = {{1, 1}};
  EXPECT_THROW(gen_spring_system(spec, 1), ValidationError);
  spec.edges = {{0, 5}};
  EXPECT_THROW(gen_spring_system(spec, 1), ValidationError);
}

TEST(Springs, DistanceMeanReverts) {
  // Two connected bodies: the deviation of their distance from its mean has lag-1 autocorrelation below 1.
  SpringSpec spec;
  spec.bodies = 2;
  spec.edges = {{0, 1}};
  spec.episodes = 50;
  spec.steps = 200;
  const auto bodies = gen_spring_system(spec, 5);
  double num = 0, den = 0;
  for (std::size_t ep = 0; ep < spec.episodes; ++ep) {
    const Eigen::MatrixXd gap = bodies[1][ep].values() - bodies[0][ep].values();
    Eigen::VectorXd dist = gap.rowwise().norm();
    dist.array() -= dist.mean();
    for (Eigen::Index k = 1; k < dist.size(); ++k) num += dist(k) * dist(k - 1);
    den += dist.squaredNorm();
  }
  EXPECT_LT(num / den, 1.0);
}

TEST(CiTriple, Construction) {
  const auto grid = uniform_grid(5);
  const CiTriple shared = gen_ci_triple(false, 8, grid, 3);
  const CiTriple again = gen_ci_triple(false, 8, grid, 3);
  const CiTriple direct = gen_ci_triple(true, 8, grid, 3);
  ASSERT_EQ(shared.x.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(shared.x[i].values(), again.x[i].values());
    // Both sides share the driver, so X - Z and Y - Z are the two noise paths.
    const Eigen::MatrixXd nx = (shared.x[i].values() - shared.z[i].values()) / 0.5;
    EXPECT_TRUE(nx.isApprox(direct.x[i].values(), 1e-12));
    EXPECT_TRUE((direct.y[i].values() - direct.x[i].values()).isApprox(shared.y[i].values() - shared.z[i].values(), 1e-12));
  }
  EXPECT_THROW(gen_ci_triple(false, 4, grid, 1, -1.0), ValidationError);
}

TEST(Springs, StartAtRestLength) {
  SpringSpec spec;
  spec.bodies = 4;
  spec.edges = {{0, 1}, {1, 2}};
  spec.episodes = 5;
  const auto bodies = gen_spring_system(spec, 11);
  for (std::size_t ep = 0; ep < spec.episodes; ++ep) {
    // Rest lengths are shared by all episodes.
    const double d01 = (bodies[1][ep].values().row(0) - bodies[0][ep].values().row(0)).norm() * spec.unit;
    const double d12 = (bodies[2][ep].values().row(0) - bodies[1][ep].values().row(0)).norm() * spec.unit;
    const double first01 = (bodies[1][0].values().row(0) - bodies[0][0].values().row(0)).norm() * spec.unit;
    EXPECT_NEAR(d01, first01, 1e-9);
    EXPECT_GE(d01, spec.rest_min - 1e-9);
    EXPECT_LE(d01, spec.rest_max + 1e-9);
    EXPECT_GE(d12, spec.rest_min - 1e-9);
    EXPECT_LE(d12, spec.rest_max + 1e-9);
  }
}
