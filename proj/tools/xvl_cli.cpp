// xvl: cross-view localization command line.
//
//   xvl [--config FILE] [--seed N] [--threads N] <subcommand> ...
//
// Exit codes: 0 success, 2 validation error, 3 runtime error.

#include "xvl/config.hpp"
#include "xvl/dictionary.hpp"
#include "xvl/error.hpp"
#include "xvl/evaluation.hpp"
#include "xvl/io.hpp"
#include "xvl/learning.hpp"
#include "xvl/localization.hpp"
#include "xvl/pipeline.hpp"
#include "xvl/synthetic.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace xvl;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

RunConfig load_config(const Globals& g) {
  RunConfig c;
  if (!g.config_path.empty())
    for (const auto& [k, v] : io::read_key_values(g.config_path)) c.set(k, v);
  if (g.seed) c.seed = *g.seed;
  if (g.threads) c.threads = *g.threads;
  c.finalize();
  return c;
}

void check_hash(const Dictionary& dict, std::uint64_t hash, const std::string& which) {
  if (hash != io::fnv1a(dict.feature_config.to_text()))
    throw ValidationError(which + " projection was learned for a different feature configuration");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-view ground-to-satellite localization"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "random seed (overrides config)");
  app.add_option("--threads", g.threads, "worker threads (overrides config)")->check(CLI::PositiveNumber);

  std::string out, dataset, dict_path, w_ground, w_sat, queries_dir, path_csv, results_csv, truth_csv;
  std::optional<double> tau;
  bool no_projection = false;
  bool ground_only = false;

  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic dataset directory");
  synth->add_option("--out", out, "output directory")->required();

  auto* build = app.add_subcommand("build-dict", "build the ground-satellite dictionary");
  build->add_option("--dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  build->add_option("--out", out, "dictionary file")->required();

  auto* learn = app.add_subcommand("learn-proj", "learn W_ground and W_sat from a dictionary");
  learn->add_option("--dict", dict_path, "dictionary file")->required()->check(CLI::ExistingFile);
  learn->add_option("--out-dir", out, "directory for w_ground and w_sat")->required();

  auto* loc = app.add_subcommand("localize", "localize query views along the database path");
  loc->add_option("--dict", dict_path, "dictionary file")->required()->check(CLI::ExistingFile);
  auto* wg = loc->add_option("--w-ground", w_ground, "ground projection file")->check(CLI::ExistingFile);
  auto* ws = loc->add_option("--w-sat", w_sat, "satellite projection file")->check(CLI::ExistingFile);
  auto* np = loc->add_flag("--no-projection", no_projection, "identity projections");
  auto* go = loc->add_flag("--ground-only", ground_only, "ground-image retrieval baseline");
  wg->needs(ws);
  ws->needs(wg);
  np->excludes(wg)->excludes(ws);
  go->excludes(np);
  loc->add_option("--queries", queries_dir, "query directory")->required()->check(CLI::ExistingDirectory);
  loc->add_option("--path", path_csv, "database path pose CSV")->required()->check(CLI::ExistingFile);
  loc->add_option("--tau", tau, "inlier confidence threshold (overrides config)");
  loc->add_option("--out", out, "output CSV")->required();

  auto* eval = app.add_subcommand("evaluate", "error statistics and precision/recall");
  auto* pr = app.add_subcommand("pr-sweep", "precision-recall sweep over confidence thresholds");
  for (auto* sub : {eval, pr}) {
    sub->add_option("--results", results_csv, "localize output CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--truth", truth_csv, "ground truth CSV (id,x,y,theta,inside)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output CSV")->required();
  }

  auto* pipe = app.add_subcommand("pipeline", "run every stage on a synthetic world");
  pipe->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config = load_config(g);
    if (*synth) {
      write_dataset(generate_world(config.synthetic), out);
      write_manifest(fs::path(out) / "dataset", "synth-gen", config);
    } else if (*build) {
      const auto dict = build_dictionary_from_dataset(dataset, config);
      save_dictionary(dict, out);
      write_manifest(out, "build-dict", config);
      std::cout << "dictionary: " << dict.size() << " entries from " << dict.images.size() << " images\n";
    } else if (*learn) {
      const auto dict = load_dictionary(dict_path);
      const auto learned = learn_projections(dict, config.training);
      const auto hash = io::fnv1a(dict.feature_config.to_text());
      fs::create_directories(out);
      save_projection(learned.ground, hash, fs::path(out) / "w_ground");
      save_projection(learned.sat, hash, fs::path(out) / "w_sat");
      write_manifest(fs::path(out) / "w_ground", "learn-proj", config);
      std::cout << "w_ground loss " << learned.ground_report.epoch_losses.front() << " -> "
                << learned.ground_report.epoch_losses.back() << "\nw_sat loss "
                << learned.sat_report.epoch_losses.front() << " -> " << learned.sat_report.epoch_losses.back() << "\n";
    } else if (*loc) {
      const auto dict = load_dictionary(dict_path);
      LearnedProjections learned;
      Method method = Method::NoProjection;
      if (!w_ground.empty()) {
        std::uint64_t hash = 0;
        learned.ground = load_projection(w_ground, &hash);
        check_hash(dict, hash, "ground");
        learned.sat = load_projection(w_sat, &hash);
        check_hash(dict, hash, "satellite");
        method = Method::Full;
      } else if (!no_projection && !ground_only) {
        throw ValidationError("localize needs --w-ground/--w-sat, --no-projection or --ground-only");
      }
      if (ground_only) method = Method::GroundOnly;
      std::vector<Pose2D> path;
      for (const auto& rec : read_pose_csv(path_csv)) path.push_back(rec.pose);
      std::vector<QueryObservation> queries;
      for (auto& q : load_queries(queries_dir, dict.camera, dict.feature_config))
        queries.push_back(prepare_query(std::move(q), dict));
      const auto results = localize_queries(queries, dict, w_ground.empty() ? nullptr : &learned,
                                            method, path, config);
      io::write_text(out, localization_csv(to_records(queries, results, tau.value_or(config.tau))));
      write_manifest(out, std::string("localize ") + method_name(method), config);
    } else if (*eval) {
      const auto report = evaluate_localization(read_localization_csv(results_csv), read_ground_truth_csv(truth_csv),
                                                config.inlier_radius);
      io::write_text(out, eval_report_csv(report));
      write_manifest(out, "evaluate", config);
      std::cout << "median error " << report.median << " m, precision " << report.precision << ", recall "
                << report.recall << "\n";
    } else if (*pr) {
      const auto curve = pr_sweep(read_localization_csv(results_csv), read_ground_truth_csv(truth_csv),
                                  config.inlier_radius);
      io::write_text(out, pr_curve_csv(curve));
      write_manifest(out, "pr-sweep", config);
      std::cout << "optimal tau " << curve.best.tau << ": precision " << curve.best.precision << ", recall "
                << curve.best.recall << "\n";
    } else if (*pipe) {
      fs::create_directories(out);
      run_file_pipeline(config, out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
