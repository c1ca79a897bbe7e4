#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "hokme/condind.hpp"
#include "hokme/error.hpp"
#include "hokme/parallel.hpp"
#include "hokme/path.hpp"
#include "hokme/sigkernel.hpp"

namespace hokme {

using Edge = std::pair<std::size_t, std::size_t>;

struct KpcOptions {
  double epsilon = 1e-3;
  /// An edge is removed when the criterion falls below alpha.
  double alpha = 0.0;
  int max_cond_size = 1;
  /// Run an unconditional (empty conditioning set) pass before level 1.
  bool marginal_level = true;
  CiVariant variant = CiVariant::displayed;
  std::uint64_t seed = 0;
  KernelOptions kernel{};

  void validate() const {
    require(epsilon > 0 && std::isfinite(epsilon), "epsilon must be positive");
    require(std::isfinite(alpha), "alpha must be finite");
    require(max_cond_size >= 0, "max_cond_size must be non-negative");
    kernel.validate();
  }
};

struct CiRecord {
  Edge edge;
  std::vector<std::size_t> conditioning;
  CiStatistic statistic;
};

struct CausalGraph {
  std::size_t n_vars = 0;
  std::set<Edge> edges;
  std::map<Edge, std::vector<std::size_t>> separating_sets;
  /// Every test performed, in execution order.
  std::vector<CiRecord> tests;

  bool adjacent(std::size_t a, std::size_t b) const { return edges.count({std::min(a, b), std::max(a, b)}) > 0; }
};

namespace detail {

/// All size-k subsets of `pool` (sorted) in lexicographic order.
inline std::vector<std::vector<std::size_t>> combinations(const std::vector<std::size_t>& pool, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  if (k > pool.size()) return out;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    std::vector<std::size_t> pick(k);
    for (std::size_t i = 0; i < k; ++i) pick[i] = pool[idx[i]];
    out.push_back(std::move(pick));
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == pool.size() - k + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

}  // namespace detail

/// Skeleton phase of the PC algorithm with the conditional HS criterion in threshold mode.
inline CausalGraph kpc_skeleton(std::span<const Ensemble> variables, const KpcOptions& opts) {
  opts.validate();
  const std::size_t n = variables.size();
  require(n >= 1, "kPC needs at least one variable");
  for (std::size_t v = 1; v < n; ++v) {
    require(variables[v].size() == variables[0].size(),
            "variable " + std::to_string(v) + " has a different number of samples");
    require(variables[v].times() == variables[0].times(),
            "variable " + std::to_string(v) + " is on a different time grid");
  }

  CausalGraph graph;
  graph.n_vars = n;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) graph.edges.insert({a, b});
  if (n < 2) return graph;

  std::vector<Eigen::MatrixXd> grams(n);
  for (std::size_t v = 0; v < n; ++v) grams[v] = first_order_gram_terminal(variables[v], opts.kernel);

  std::map<std::vector<std::size_t>, Eigen::MatrixXd> joint_grams;
  auto conditioning_gram = [&](const std::vector<std::size_t>& set) -> const Eigen::MatrixXd& {
    if (set.size() == 1) return grams[set.front()];
    auto it = joint_grams.find(set);
    if (it == joint_grams.end()) {
      std::vector<const Ensemble*> parts;
      for (std::size_t v : set) parts.push_back(&variables[v]);
      it = joint_grams.emplace(set, first_order_gram_terminal(join_coordinates(parts), opts.kernel)).first;
    }
    return it->second;
  };

  CiOptions ci;
  ci.epsilon = opts.epsilon;
  ci.mode = CiMode::threshold;
  ci.alpha = opts.alpha;
  ci.variant = opts.variant;
  ci.seed = opts.seed;

  if (opts.marginal_level) {
    const std::vector<Edge> snapshot(graph.edges.begin(), graph.edges.end());
    std::vector<CiRecord> records(snapshot.size());
    parallel_for(snapshot.size(), [&](std::size_t k) {
      const auto [a, b] = snapshot[k];
      records[k] = CiRecord{snapshot[k], {}, ci_test(grams[a], grams[b], std::nullopt, ci)};
    });
    for (const CiRecord& r : records) {
      graph.tests.push_back(r);
      if (!r.statistic.dependent) {
        graph.edges.erase(r.edge);
        graph.separating_sets[r.edge] = {};
      }
    }
  }

  for (int level = 1; level <= opts.max_cond_size; ++level) {
    const std::set<Edge> snapshot = graph.edges;
    auto neighbours = [&](std::size_t v) {
      std::vector<std::size_t> out;
      for (std::size_t u = 0; u < n; ++u)
        if (u != v && snapshot.count({std::min(u, v), std::max(u, v)})) out.push_back(u);
      return out;
    };
    struct Job {
      Edge edge;
      std::vector<std::vector<std::size_t>> sets;
    };
    std::vector<Job> jobs;
    for (const Edge& e : snapshot) {
      std::vector<std::size_t> pool;
      for (std::size_t u : neighbours(e.first))
        if (u != e.second) pool.push_back(u);
      for (std::size_t u : neighbours(e.second))
        if (u != e.first) pool.push_back(u);
      std::sort(pool.begin(), pool.end());
      pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
      auto sets = detail::combinations(pool, static_cast<std::size_t>(level));
      if (!sets.empty()) jobs.push_back(Job{e, std::move(sets)});
    }
    if (jobs.empty()) break;
    // Joint Gram matrices are built up front so the parallel section only reads them.
    for (const Job& job : jobs)
      for (const auto& set : job.sets) conditioning_gram(set);

    std::vector<std::vector<CiRecord>> results(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t k) {
      const Job& job = jobs[k];
      const auto [a, b] = job.edge;
      for (const auto& set : job.sets) {
        const Eigen::MatrixXd& kz = set.size() == 1 ? grams[set.front()] : joint_grams.at(set);
        results[k].push_back(CiRecord{job.edge, set, ci_test(grams[a], grams[b], kz, ci)});
        if (!results[k].back().statistic.dependent) break;
      }
    });
    for (const auto& records : results)
      for (const CiRecord& r : records) {
        graph.tests.push_back(r);
        if (!r.statistic.dependent) {
          graph.edges.erase(r.edge);
          graph.separating_sets[r.edge] = r.conditioning;
        }
      }
  }
  return graph;
}

}  // namespace hokme
