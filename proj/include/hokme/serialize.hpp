#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>

#include "hokme/causal.hpp"
#include "hokme/condind.hpp"
#include "hokme/dr.hpp"
#include "hokme/error.hpp"
#include "hokme/format.hpp"
#include "hokme/higher_order.hpp"
#include "hokme/mmd_test.hpp"

namespace hokme {

namespace detail {
inline ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

inline ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace detail

inline ordered_json config_json(const HigherOrderConfig& cfg) {
  ordered_json j;
  j["order"] = cfg.order;
  j["lambda"] = cfg.lambda;
  j["refinement"] = cfg.refinement;
  j["time_scale"] = cfg.time_scale;
  return j;
}

inline ordered_json to_json(const MmdEstimate& e) {
  ordered_json j;
  j["order"] = e.order;
  j["variant"] = to_string(e.variant);
  j["value_squared"] = e.value_squared;
  return j;
}

inline ordered_json to_json(const TestReport& r) {
  ordered_json j;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["level"] = r.level;
  j["reject"] = r.reject;
  j["order"] = r.order;
  j["variant"] = to_string(r.variant);
  j["permutations"] = r.permutations;
  j["seed"] = r.seed;
  j["null_samples"] = r.null_samples;
  return j;
}

inline void write_null_csv(std::ostream& out, const TestReport& r) {
  out << "replica,statistic\n";
  for (std::size_t k = 0; k < r.null_samples.size(); ++k) out << k << ',' << format_double(r.null_samples[k]) << '\n';
}

inline ordered_json to_json(const CiStatistic& s) {
  ordered_json j;
  j["h_value"] = s.h_value;
  j["epsilon"] = s.epsilon;
  j["p_value"] = s.p_value ? ordered_json(*s.p_value) : ordered_json(nullptr);
  j["dependent"] = s.dependent;
  return j;
}

inline ordered_json to_json(const CausalGraph& g) {
  ordered_json j;
  j["n_vars"] = g.n_vars;
  ordered_json edges = ordered_json::array();
  for (const auto& [a, b] : g.edges) edges.push_back(ordered_json::array({a, b}));
  j["edges"] = edges;
  ordered_json seps = ordered_json::array();
  for (const auto& [e, set] : g.separating_sets) {
    ordered_json s;
    s["edge"] = ordered_json::array({e.first, e.second});
    s["conditioning"] = set;
    seps.push_back(s);
  }
  j["separating_sets"] = seps;
  ordered_json tests = ordered_json::array();
  for (const CiRecord& r : g.tests) {
    ordered_json t;
    t["edge"] = ordered_json::array({r.edge.first, r.edge.second});
    t["conditioning"] = r.conditioning;
    t["h_value"] = r.statistic.h_value;
    t["dependent"] = r.statistic.dependent;
    tests.push_back(t);
  }
  j["tests"] = tests;
  return j;
}

inline void write_edge_csv(std::ostream& out, const CausalGraph& g) {
  out << "source,target\n";
  for (const auto& [a, b] : g.edges) out << a << ',' << b << '\n';
}

inline ordered_json to_json(const DrModel& m) {
  ordered_json j;
  j["config"] = config_json(m.config);
  j["sigma"] = m.sigma;
  j["ridge"] = m.ridge;
  j["alpha"] = detail::vector_json(m.alpha);
  ordered_json fp = ordered_json::array();
  for (std::uint64_t f : m.fingerprints) fp.push_back(detail::hex64(f));
  j["fingerprints"] = fp;
  j["train_mmd"] = detail::matrix_json(m.train_mmd);
  return j;
}

inline DrModel dr_model_from_json(const nlohmann::json& j) {
  try {
    DrModel m;
    const auto& c = j.at("config");
    m.config.order = c.at("order").get<int>();
    m.config.lambda = c.at("lambda").get<double>();
    m.config.refinement = c.at("refinement").get<int>();
    m.config.time_scale = c.at("time_scale").get<double>();
    m.config.validate();
    m.sigma = j.at("sigma").get<double>();
    m.ridge = j.at("ridge").get<double>();
    require(m.sigma > 0 && m.ridge > 0, "model sigma and ridge must be positive");
    const auto alpha = j.at("alpha").get<std::vector<double>>();
    m.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    for (const auto& f : j.at("fingerprints")) m.fingerprints.push_back(std::stoull(f.get<std::string>(), nullptr, 16));
    const auto rows = j.at("train_mmd").get<std::vector<std::vector<double>>>();
    m.train_mmd.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      require(rows[r].size() == rows.size(), "train_mmd must be square");
      for (std::size_t c2 = 0; c2 < rows.size(); ++c2)
        m.train_mmd(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c2)) = rows[r][c2];
    }
    require(m.fingerprints.size() == alpha.size(), "model fingerprints do not match alpha");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ValidationError*>(&e)) throw;
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
}

inline ordered_json to_json(const CvResult& r) {
  auto cand = [](const CvCandidate& c) {
    ordered_json j;
    j["order"] = c.order;
    j["sigma"] = c.sigma;
    j["ridge"] = c.ridge;
    j["mean_mse"] = c.mean_mse;
    j["fold_mse"] = c.fold_mse;
    return j;
  };
  ordered_json j;
  j["best"] = cand(r.best);
  ordered_json all = ordered_json::array();
  for (const auto& c : r.candidates) all.push_back(cand(c));
  j["candidates"] = all;
  j["fold_of"] = r.fold_of;
  return j;
}

/// Writes through a temporary sibling file and renames it into place, so readers never see a
/// partial file.
inline void write_file_atomic(const std::filesystem::path& target, const std::function<void(std::ostream&)>& body,
                              bool binary = false) {
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw ValidationError("cannot open output file " + target.string());
    try {
      body(out);
      out.flush();
      if (!out) throw ValidationError("failed writing " + target.string());
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ValidationError("cannot move output into place: " + target.string());
  }
}

}  // namespace hokme
