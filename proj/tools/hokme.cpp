#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hokme/hokme.hpp"

namespace fs = std::filesystem;
using namespace hokme;

namespace {

struct KernelArgs {
  int order = 1;
  double lambda = 1e-3;
  int refinement = 2;
  double time_scale = 0.0;

  void add(CLI::App* cmd, bool with_order = true, bool with_lambda = true) {
    if (with_order) cmd->add_option("--order", order, "Embedding order k >= 1")->capture_default_str();
    if (with_lambda) cmd->add_option("--lambda", lambda, "Conditional embedding regularizer")->capture_default_str();
    cmd->add_option("--refinement", refinement, "Dyadic PDE refinement")->capture_default_str();
    cmd->add_option("--time-scale", time_scale, "Time-augmentation scale (0 = off)")->capture_default_str();
  }

  HigherOrderConfig config() const {
    HigherOrderConfig cfg{order, lambda, refinement, time_scale};
    cfg.validate();
    return cfg;
  }
};

void emit_json(const std::string& out, const ordered_json& j) {
  const std::string text = dump_json(j) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  write_file_atomic(out, [&](std::ostream& os) { os << text; });
}

std::vector<std::pair<std::size_t, std::size_t>> parse_edges(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    require(dash != std::string::npos, "edge '" + item + "' must look like a-b");
    try {
      edges.emplace_back(std::stoul(item.substr(0, dash)), std::stoul(item.substr(dash + 1)));
    } catch (const std::logic_error&) {
      throw ValidationError("edge '" + item + "' must look like a-b");
    }
  }
  return edges;
}

struct ManifestEntry {
  std::string dataset;
  std::optional<double> label;
};

/// CSV with header `dataset,label`; relative dataset paths resolve against the manifest's folder.
std::vector<ManifestEntry> read_manifest(const fs::path& file, bool labels_required) {
  std::ifstream in(file);
  require(in.good(), "cannot open manifest " + file.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "manifest " + file.string() + " is empty");
  const auto header = detail::split_csv_line(line);
  require(!header.empty() && header[0] == "dataset", "manifest header must start with 'dataset'");
  const bool has_label = header.size() >= 2 && header[1] == "label";
  require(has_label || !labels_required, "manifest needs a 'label' column");
  std::vector<ManifestEntry> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = file.filename().string() + ":" + std::to_string(lineno);
    require(!f.empty() && !f[0].empty(), where + ": missing dataset");
    fs::path p = f[0];
    if (p.is_relative()) p = file.parent_path() / p;
    ManifestEntry e{p.lexically_normal().string(), std::nullopt};
    if (has_label) {
      require(f.size() >= 2, where + ": missing label");
      e.label = detail::parse_number(f[1], where);
    }
    out.push_back(std::move(e));
  }
  require(!out.empty(), "manifest lists no datasets");
  return out;
}

std::vector<Bag> load_bags(const std::vector<ManifestEntry>& entries) {
  std::vector<Bag> bags;
  for (const auto& e : entries) bags.push_back(Bag{read_dataset(e.dataset), e.label.value_or(0.0)});
  return bags;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Higher-order kernel mean embeddings of stochastic processes"};
  app.set_config("--config", "", "Key-value config file; command-line flags override it");
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = all cores)");
  app.allow_config_extras(false);

  // gen -------------------------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  std::string gen_kind = "brownian", gen_out, gen_format = "json", gen_edges;
  double gen_n = 10.0, gen_hurst = 0.5, gen_horizon = 1.0;
  std::size_t gen_m = 100, gen_dim = 1, gen_points = 21, gen_bodies = 3, gen_episodes = 100, gen_steps = 20;
  bool gen_uniform_start = false;
  std::uint64_t gen_seed = 0;
  gen->add_option("--kind", gen_kind, "fig3-early | fig3-late | brownian | fbm | spring")
      ->check(CLI::IsMember({"fig3-early", "fig3-late", "brownian", "fbm", "spring"}))
      ->capture_default_str();
  gen->add_option("--n", gen_n, "Branch-gap parameter of fig3-early")->capture_default_str();
  gen->add_option("--m", gen_m, "Number of samples")->capture_default_str();
  gen->add_option("--dim", gen_dim, "Path dimension (brownian, fbm)")->capture_default_str();
  gen->add_option("--hurst", gen_hurst, "Hurst exponent (fbm)")->capture_default_str();
  gen->add_option("--points", gen_points, "Grid points (brownian, fbm)")->capture_default_str();
  gen->add_option("--horizon", gen_horizon, "Grid horizon (brownian, fbm)")->capture_default_str();
  gen->add_option("--bodies", gen_bodies, "Bodies (spring)")->capture_default_str();
  gen->add_option("--edges", gen_edges, "Springs as a-b,c-d (spring)");
  gen->add_option("--episodes", gen_episodes, "Episodes (spring)")->capture_default_str();
  gen->add_option("--steps", gen_steps, "Steps per episode (spring)")->capture_default_str();
  gen->add_flag("--uniform-start", gen_uniform_start, "Place every body uniformly in the box (spring)");
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--format", gen_format, "json (JSON-lines file) | csv (directory)")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  gen->add_option("--out", gen_out, "Output file, or directory for spring/csv")->required();

  // gram ------------------------------------------------------------------------------------
  auto* gram = app.add_subcommand("gram", "Compute and cache an order-k Gram field");
  KernelArgs gram_k;
  std::string gram_x, gram_y, gram_out, gram_format = "binary";
  gram_k.add(gram);
  gram->add_option("--x", gram_x, "Dataset X")->required();
  gram->add_option("--y", gram_y, "Dataset Y (defaults to X)");
  gram->add_option("--format", gram_format, "binary | csv")->check(CLI::IsMember({"binary", "csv"}))->capture_default_str();
  gram->add_option("--out", gram_out)->required();

  // mmd -------------------------------------------------------------------------------------
  auto* mmd = app.add_subcommand("mmd", "Order-k MMD^2 estimate");
  KernelArgs mmd_k;
  std::string mmd_x, mmd_y, mmd_out, mmd_variant = "unbiased";
  mmd_k.add(mmd);
  mmd->add_option("--x", mmd_x)->required();
  mmd->add_option("--y", mmd_y)->required();
  mmd->add_option("--variant", mmd_variant, "biased | unbiased")->capture_default_str();
  mmd->add_option("--out", mmd_out, "Output JSON (stdout if omitted)");

  // test2 -----------------------------------------------------------------------------------
  auto* test2 = app.add_subcommand("test2", "Permutation two-sample test");
  KernelArgs t2_k;
  std::string t2_x, t2_y, t2_out, t2_null, t2_variant = "unbiased";
  double t2_level = 0.05;
  int t2_perms = 200;
  std::uint64_t t2_seed = 0;
  t2_k.add(test2);
  test2->add_option("--x", t2_x)->required();
  test2->add_option("--y", t2_y)->required();
  test2->add_option("--variant", t2_variant)->capture_default_str();
  test2->add_option("--level", t2_level)->capture_default_str();
  test2->add_option("--permutations", t2_perms)->capture_default_str();
  test2->add_option("--seed", t2_seed)->capture_default_str();
  test2->add_option("--out", t2_out, "TestReport JSON (stdout if omitted)");
  test2->add_option("--null-csv", t2_null, "Also write the null samples as CSV");

  // ci --------------------------------------------------------------------------------------
  auto* ci = app.add_subcommand("ci", "Conditional-independence test of X and Y given Z");
  KernelArgs ci_k;
  std::string ci_x, ci_y, ci_out, ci_mode = "permutation", ci_variant = "displayed";
  std::vector<std::string> ci_z;
  CiOptions ci_opts;
  ci_k.add(ci, false, false);
  ci->add_option("--x", ci_x)->required();
  ci->add_option("--y", ci_y)->required();
  ci->add_option("--z", ci_z, "Conditioning datasets (repeatable; none = unconditional)");
  ci->add_option("--epsilon", ci_opts.epsilon)->capture_default_str();
  ci->add_option("--mode", ci_mode, "permutation | threshold")
      ->check(CLI::IsMember({"permutation", "threshold"}))
      ->capture_default_str();
  ci->add_option("--alpha", ci_opts.alpha, "Threshold for threshold mode")->capture_default_str();
  ci->add_option("--level", ci_opts.level)->capture_default_str();
  ci->add_option("--permutations", ci_opts.permutations)->capture_default_str();
  ci->add_option("--seed", ci_opts.seed)->capture_default_str();
  ci->add_option("--variant", ci_variant, "displayed | product")
      ->check(CLI::IsMember({"displayed", "product"}))
      ->capture_default_str();
  ci->add_option("--out", ci_out, "CiStatistic JSON (stdout if omitted)");

  // kpc -------------------------------------------------------------------------------------
  auto* kpc = app.add_subcommand("kpc", "kPC skeleton discovery");
  KernelArgs kpc_k;
  std::vector<std::string> kpc_data;
  std::string kpc_out, kpc_edges, kpc_variant = "displayed";
  KpcOptions kpc_opts;
  bool kpc_no_marginal = false;
  kpc_k.add(kpc, false, false);
  kpc->add_option("--data", kpc_data, "One dataset per variable (repeatable)")->required();
  kpc->add_option("--epsilon", kpc_opts.epsilon)->capture_default_str();
  kpc->add_option("--alpha", kpc_opts.alpha)->required();
  kpc->add_option("--max-cond", kpc_opts.max_cond_size)->capture_default_str();
  kpc->add_flag("--no-marginal", kpc_no_marginal, "Skip the unconditional level");
  kpc->add_option("--variant", kpc_variant)->check(CLI::IsMember({"displayed", "product"}))->capture_default_str();
  kpc->add_option("--seed", kpc_opts.seed)->capture_default_str();
  kpc->add_option("--out", kpc_out, "CausalGraph JSON (stdout if omitted)");
  kpc->add_option("--edges-csv", kpc_edges, "Also write the edge list as CSV");

  // dr-fit ----------------------------------------------------------------------------------
  auto* drfit = app.add_subcommand("dr-fit", "Fit distribution regression (grid search when several values are given)");
  KernelArgs dr_k;
  std::string dr_bags, dr_out;
  std::vector<int> dr_orders{1};
  std::vector<double> dr_sigmas{1.0}, dr_ridges{1e-3};
  int dr_folds = 5;
  std::uint64_t dr_seed = 0;
  dr_k.add(drfit, false);
  drfit->add_option("--bags", dr_bags, "Manifest CSV with columns dataset,label")->required();
  drfit->add_option("--order", dr_orders, "Order(s)")->capture_default_str();
  drfit->add_option("--sigma", dr_sigmas, "Bandwidth(s)")->capture_default_str();
  drfit->add_option("--ridge", dr_ridges, "Ridge value(s)")->capture_default_str();
  drfit->add_option("--folds", dr_folds)->capture_default_str();
  drfit->add_option("--seed", dr_seed)->capture_default_str();
  drfit->add_option("--out", dr_out, "Model JSON")->required();

  // dr-predict ------------------------------------------------------------------------------
  auto* drpred = app.add_subcommand("dr-predict", "Predict labels of new bags");
  std::string dp_model, dp_bags, dp_out;
  drpred->add_option("--model", dp_model)->required();
  drpred->add_option("--bags", dp_bags, "Manifest CSV with a dataset column")->required();
  drpred->add_option("--out", dp_out, "Predictions CSV (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_max_threads(threads);

    if (*gen) {
      std::vector<Ensemble> out;
      if (gen_kind == "fig3-early") out.push_back(gen_fig3(Fig3Variant::early, gen_n, gen_m, gen_seed));
      if (gen_kind == "fig3-late") out.push_back(gen_fig3(Fig3Variant::late, gen_n, gen_m, gen_seed));
      if (gen_kind == "brownian") out.push_back(gen_brownian(gen_dim, gen_m, uniform_grid(gen_points, gen_horizon), gen_seed));
      if (gen_kind == "fbm")
        out.push_back(gen_fbm(gen_hurst, gen_dim, gen_m, uniform_grid(gen_points, gen_horizon), gen_seed));
      if (gen_kind == "spring") {
        SpringSpec spec;
        spec.bodies = gen_bodies;
        spec.edges = parse_edges(gen_edges);
        spec.episodes = gen_episodes;
        spec.steps = gen_steps;
        spec.start_at_rest = !gen_uniform_start;
        out = gen_spring_system(spec, gen_seed);
      }
      if (gen_kind != "spring") {
        if (gen_format == "json")
          write_file_atomic(gen_out, [&](std::ostream& os) { write_jsonl(os, out.front()); });
        else
          write_csv_dir(gen_out, out.front());
      } else {
        fs::create_directories(gen_out);
        for (std::size_t b = 0; b < out.size(); ++b) {
          const fs::path target = fs::path(gen_out) / ("body_" + std::to_string(b) + (gen_format == "json" ? ".jsonl" : ""));
          if (gen_format == "json")
            write_file_atomic(target, [&](std::ostream& os) { write_jsonl(os, out[b]); });
          else
            write_csv_dir(target, out[b]);
        }
      }
    } else if (*gram) {
      const HigherOrderConfig cfg = gram_k.config();
      const Ensemble X = read_dataset(gram_x);
      const bool self = gram_y.empty();
      const Ensemble Y = self ? X : read_dataset(gram_y);
      require_same_grid(X, Y);
      const KernelOptions opts = cfg.kernel();
      GramField xx = first_order_gram(X, opts);
      GramField yy = self ? GramField{} : first_order_gram(Y, opts);
      GramField xy = self ? GramField{} : first_order_gram(X, Y, opts);
      for (int k = 2; k <= cfg.order; ++k) {
        if (self) {
          xx = higher_order_gram(xx, xx, xx, cfg.lambda, opts);
          continue;
        }
        GramField next_xy = higher_order_gram(xx, xy, yy, cfg.lambda, opts);
        GramField next_xx = higher_order_gram(xx, xx, xx, cfg.lambda, opts);
        yy = higher_order_gram(yy, yy, yy, cfg.lambda, opts);
        xx = std::move(next_xx);
        xy = std::move(next_xy);
      }
      const GramField& result = self ? xx : xy;
      if (gram_format == "binary")
        write_file_atomic(gram_out, [&](std::ostream& os) { write_gram_binary(os, result); }, true);
      else
        write_file_atomic(gram_out, [&](std::ostream& os) { write_gram_csv(os, result); });
    } else if (*mmd) {
      const HigherOrderConfig cfg = mmd_k.config();
      const MmdVariant variant = parse_variant(mmd_variant);
      const MmdEstimate est = higher_order_mmd(read_dataset(mmd_x), read_dataset(mmd_y), cfg, variant);
      ordered_json j = to_json(est);
      j["config"] = config_json(cfg);
      emit_json(mmd_out, j);
    } else if (*test2) {
      const HigherOrderConfig cfg = t2_k.config();
      const MmdVariant variant = parse_variant(t2_variant);
      const TestReport report =
          two_sample_test(read_dataset(t2_x), read_dataset(t2_y), cfg, variant, t2_level, t2_perms, t2_seed);
      ordered_json j = to_json(report);
      j["config"] = config_json(cfg);
      emit_json(t2_out, j);
      if (!t2_null.empty()) write_file_atomic(t2_null, [&](std::ostream& os) { write_null_csv(os, report); });
    } else if (*ci) {
      ci_k.order = 1;
      const KernelOptions kopts = ci_k.config().kernel();
      ci_opts.mode = ci_mode == "threshold" ? CiMode::threshold : CiMode::permutation;
      ci_opts.variant = ci_variant == "product" ? CiVariant::product : CiVariant::displayed;
      const Ensemble X = read_dataset(ci_x);
      const Ensemble Y = read_dataset(ci_y);
      std::vector<Ensemble> zs;
      for (const auto& z : ci_z) zs.push_back(read_dataset(z));
      std::vector<const Ensemble*> zp;
      for (const auto& z : zs) zp.push_back(&z);
      const CiStatistic stat = ci_test(X, Y, zp, ci_opts, kopts);
      ordered_json j = to_json(stat);
      j["mode"] = ci_mode;
      j["variant"] = ci_variant;
      j["conditioning"] = ci_z.size();
      emit_json(ci_out, j);
    } else if (*kpc) {
      kpc_k.order = 1;
      kpc_opts.kernel = kpc_k.config().kernel();
      kpc_opts.marginal_level = !kpc_no_marginal;
      kpc_opts.variant = kpc_variant == "product" ? CiVariant::product : CiVariant::displayed;
      std::vector<Ensemble> vars;
      for (const auto& d : kpc_data) vars.push_back(read_dataset(d));
      const CausalGraph g = kpc_skeleton(vars, kpc_opts);
      ordered_json j = to_json(g);
      j["alpha"] = kpc_opts.alpha;
      j["epsilon"] = kpc_opts.epsilon;
      emit_json(kpc_out, j);
      if (!kpc_edges.empty()) write_file_atomic(kpc_edges, [&](std::ostream& os) { write_edge_csv(os, g); });
    } else if (*drfit) {
      dr_k.order = 1;
      const HigherOrderConfig base = dr_k.config();
      const auto entries = read_manifest(dr_bags, true);
      const std::vector<Bag> bags = load_bags(entries);
      const bool search = dr_orders.size() > 1 || dr_sigmas.size() > 1 || dr_ridges.size() > 1;
      std::optional<CvResult> cv;
      HigherOrderConfig cfg = base;
      double sigma = dr_sigmas.front(), ridge = dr_ridges.front();
      cfg.order = dr_orders.front();
      if (search) {
        cv = cv_grid_search(bags, dr_orders, dr_sigmas, dr_ridges, dr_folds, dr_seed, base);
        cfg.order = cv->best.order;
        sigma = cv->best.sigma;
        ridge = cv->best.ridge;
      }
      const DrModel model = fit_krr(bags, cfg, sigma, ridge);
      ordered_json j = to_json(model);
      ordered_json paths = ordered_json::array();
      for (const auto& e : entries) paths.push_back(e.dataset);
      j["train_bags"] = paths;
      if (cv) j["cross_validation"] = to_json(*cv);
      emit_json(dr_out, j);
    } else if (*drpred) {
      std::ifstream in(dp_model);
      require(in.good(), "cannot open model " + dp_model);
      nlohmann::json mj;
      try {
        mj = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model JSON: ") + e.what());
      }
      const DrModel model = dr_model_from_json(mj);
      require(mj.contains("train_bags") && mj["train_bags"].is_array(), "model JSON lacks train_bags");
      std::vector<ManifestEntry> train_entries;
      for (const auto& p : mj["train_bags"]) train_entries.push_back({p.get<std::string>(), std::nullopt});
      const std::vector<Bag> train = load_bags(train_entries);
      for (std::size_t a = 0; a < train.size(); ++a)
        require(a < model.fingerprints.size() && fingerprint(train[a].ensemble) == model.fingerprints[a],
                "training bag " + train_entries[a].dataset + " changed since the model was fitted");
      const DrPredictor predictor(model, train);
      const auto entries = read_manifest(dp_bags, false);
      std::vector<double> preds;
      for (const auto& e : entries) preds.push_back(predictor.predict(read_dataset(e.dataset)));
      auto write = [&](std::ostream& os) {
        os << "dataset,prediction\n";
        for (std::size_t k = 0; k < entries.size(); ++k) os << entries[k].dataset << ',' << format_double(preds[k]) << '\n';
      };
      if (dp_out.empty() || dp_out == "-")
        write(std::cout);
      else
        write_file_atomic(dp_out, write);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
