#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hokme/error.hpp"
#include "hokme/higher_order.hpp"
#include "hokme/parallel.hpp"
#include "hokme/path.hpp"
#include "hokme/random.hpp"
#include "hokme/sigkernel.hpp"

namespace hokme {

struct TestReport {
  double statistic = 0.0;
  double p_value = 1.0;
  std::vector<double> null_samples;
  double level = 0.05;
  bool reject = false;
  int order = 1;
  int permutations = 0;
  std::uint64_t seed = 0;
  MmdVariant variant = MmdVariant::unbiased;
};

/// Add-one permutation p-value: (1 + #{null >= observed}) / (1 + permutations).
inline double permutation_p_value(double observed, const std::vector<double>& null_samples) {
  const auto exceed = std::count_if(null_samples.begin(), null_samples.end(),
                                    [observed](double v) { return v >= observed; });
  return (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(null_samples.size()));
}

/// Uniformly random relabeling of `size` pooled samples for replica `replica`.
inline std::vector<Eigen::Index> permutation_for(std::size_t size, std::uint64_t seed, std::uint64_t replica) {
  std::vector<Eigen::Index> perm(size);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  auto rng = derived_stream(seed, replica);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

/// Permutation two-sample test of H0: X and Y have the same order-k embedding.
/// The pooled first-order Gram (field) is computed once; permutations only re-index it, and at
/// order >= 2 the higher-order recursion is re-run on the permuted blocks.
inline TestReport two_sample_test(const Ensemble& X, const Ensemble& Y, const HigherOrderConfig& cfg,
                                  MmdVariant variant, double level, int permutations, std::uint64_t seed) {
  cfg.validate();
  require(level > 0 && level < 1, "level must lie in (0, 1)");
  require(permutations >= 19, "need at least 19 permutations");
  require(X.size() >= 2 && Y.size() >= 2, "two-sample test needs at least two samples per ensemble");
  require_same_grid(X, Y);

  std::vector<Path> all(X.paths());
  all.insert(all.end(), Y.paths().begin(), Y.paths().end());
  const Ensemble pooled(std::move(all));
  const std::size_t m = X.size();
  const std::size_t total = pooled.size();
  const KernelOptions opts = cfg.kernel();

  Eigen::MatrixXd pooled_terminal;
  GramField pooled_field;
  if (cfg.order == 1)
    pooled_terminal = first_order_gram_terminal(pooled, opts);
  else
    pooled_field = first_order_gram(pooled, opts);

  auto statistic = [&](const std::vector<Eigen::Index>& perm) {
    const std::vector<Eigen::Index> xi(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
    const std::vector<Eigen::Index> yi(perm.begin() + static_cast<std::ptrdiff_t>(m), perm.end());
    if (cfg.order == 1) {
      return mmd_squared(pooled_terminal(xi, xi), pooled_terminal(xi, yi), pooled_terminal(yi, yi), variant);
    }
    return mmd_squared(lift_to_order(pooled_field.gather(xi, xi), pooled_field.gather(xi, yi),
                                     pooled_field.gather(yi, yi), cfg),
                       variant);
  };

  std::vector<Eigen::Index> identity(total);
  std::iota(identity.begin(), identity.end(), Eigen::Index{0});

  TestReport report;
  report.statistic = statistic(identity);
  report.null_samples.assign(static_cast<std::size_t>(permutations), 0.0);
  parallel_for(static_cast<std::size_t>(permutations), [&](std::size_t r) {
    report.null_samples[r] = statistic(permutation_for(total, seed, r));
  });
  report.p_value = permutation_p_value(report.statistic, report.null_samples);
  report.level = level;
  report.reject = report.p_value <= level;
  report.order = cfg.order;
  report.permutations = permutations;
  report.seed = seed;
  report.variant = variant;
  return report;
}

}  // namespace hokme
