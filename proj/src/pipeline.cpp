#include "xvl/pipeline.hpp"

#include "xvl/error.hpp"
#include "xvl/io.hpp"

#include <algorithm>

namespace xvl {

namespace fs = std::filesystem;

const char* method_name(Method m) {
  switch (m) {
    case Method::Full: return "full";
    case Method::NoProjection: return "no-projection";
    case Method::GroundOnly: return "ground-only";
  }
  return "?";
}

LearnedProjections learn_projections(const Dictionary& dict, const TrainConfig& config) {
  const auto locations = dict.locations();
  LearnedProjections out;
  out.ground = learn_projection(dict.ground_feats, locations, config, &out.ground_report);
  out.sat = learn_projection(dict.sat_feats, locations, config, &out.sat_report);
  return out;
}

std::vector<LocalizationResult> localize_queries(const std::vector<QueryObservation>& queries, const Dictionary& dict,
                                                 const LearnedProjections* learned, Method method,
                                                 const std::vector<Pose2D>& path, const RunConfig& config) {
  std::vector<LocalizationResult> out;
  if (method == Method::GroundOnly) {
    const GroundOnlyLocalizer baseline(dict, learned ? learned->ground : Projection::identity(dict.ground_dim()));
    for (const auto& q : queries) out.push_back(baseline.localize(q));
    return out;
  }
  const bool use_learned = method == Method::Full;
  if (use_learned && !learned) throw ValidationError("full method needs learned projections");
  const ProjectedDictionary pdict(dict, use_learned ? learned->ground : Projection::identity(dict.ground_dim()),
                                  use_learned ? learned->sat : Projection::identity(dict.sat_dim()));
  const auto candidates = generate_candidates(path, config.localizer.candidate_spacing);
  for (const auto& q : queries) out.push_back(localize(q, pdict, candidates, config.localizer));
  return out;
}

std::vector<LocalizationRecord> to_records(const std::vector<QueryObservation>& queries,
                                           const std::vector<LocalizationResult>& results, double tau) {
  std::vector<LocalizationRecord> out;
  for (std::size_t i = 0; i < queries.size(); ++i)
    out.push_back({queries[i].id, results[i].estimate, results[i].confidence, classify_query(results[i].confidence, tau)});
  return out;
}

FeatureConfig synthetic_feature_config(const RunConfig& config) {
  FeatureConfig f = config.features;
  f.source = "precomputed";
  f.semantic_suffix.clear();
  return f;
}

std::vector<DatabaseView> database_views(const SyntheticWorld& world) {
  std::vector<DatabaseView> out;
  for (const auto& v : world.database) out.push_back({v.id, v.pose, v.features, v.depth});
  return out;
}

Experiment prepare_experiment(const RunConfig& config) {
  Experiment ex;
  ex.world = generate_world(config.synthetic);
  ex.dict = build_dictionary(database_views(ex.world), ex.world.sat_map, ex.world.georef, ex.world.camera,
                             config.dictionary, synthetic_feature_config(config));
  ex.learned = learn_projections(ex.dict, config.training);
  for (const auto& v : ex.world.queries) {
    ex.queries.push_back(prepare_query({v.id, v.features, v.depth, ex.world.camera, ex.dict.feature_config}, ex.dict));
    ex.truth.push_back({v.id, v.pose, v.inside});
  }
  return ex;
}

void write_dataset(const SyntheticWorld& world, const fs::path& dir) {
  fs::create_directories(dir / "database");
  fs::create_directories(dir / "queries");
  write_georef(dir / "georef.txt", world.georef);
  write_intrinsics(dir / "intrinsics.txt", world.camera);
  save_feature_map(world.sat_map, dir / "satellite.fmap");
  std::vector<PoseRecord> poses;
  for (const auto& v : world.database) {
    save_feature_map(v.features, dir / "database" / (v.id + ".fmap"));
    save_feature_map(v.depth, dir / "database" / (v.id + ".depth.fmap"));
    poses.push_back({v.id, v.pose});
  }
  write_pose_csv(dir / "database" / "poses.csv", poses);
  std::vector<GroundTruthRecord> truth;
  for (const auto& v : world.queries) {
    save_feature_map(v.features, dir / "queries" / (v.id + ".fmap"));
    save_feature_map(v.depth, dir / "queries" / (v.id + ".depth.fmap"));
    truth.push_back({v.id, v.pose, v.inside});
  }
  io::write_text(dir / "queries" / "ground_truth.csv", ground_truth_csv(truth));
}

Dictionary build_dictionary_from_dataset(const fs::path& dir, const RunConfig& config) {
  const auto georef = read_georef(dir / "georef.txt");
  const auto camera = read_intrinsics(dir / "intrinsics.txt");
  const FeatureMap sat = load_view_features(dir / "satellite", config.features);
  std::vector<DatabaseView> views;
  for (const auto& rec : read_pose_csv(dir / "database" / "poses.csv")) {
    const fs::path stem = dir / "database" / rec.id;
    views.push_back({rec.id, rec.pose, load_view_features(stem, config.features),
                     load_feature_map(stem.string() + ".depth.fmap")});
  }
  return build_dictionary(views, sat, georef, camera, config.dictionary, config.features);
}

std::vector<QueryObservation> load_queries(const fs::path& dir, const CameraIntrinsics& fallback,
                                           const FeatureConfig& features) {
  if (!fs::is_directory(dir)) throw ValidationError("query directory not found: " + dir.string());
  const CameraIntrinsics camera = fs::exists(dir / "intrinsics.txt") ? read_intrinsics(dir / "intrinsics.txt") : fallback;
  const std::string suffix = ".depth.fmap";
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  std::vector<QueryObservation> out;
  for (const auto& id : ids)
    out.push_back({id, load_view_features(dir / id, features), load_feature_map(dir / (id + suffix)), camera, features});
  return out;
}

void write_manifest(const fs::path& output, const std::string& command, const RunConfig& config) {
  io::write_text(output.string() + ".manifest.txt",
                 "# xvl run manifest\ncommand = " + command + "\nversion = " + kVersion + "\n" + config.to_text());
}

void run_file_pipeline(const RunConfig& config, const fs::path& out_dir) {
  const fs::path data = out_dir / "dataset";
  write_dataset(generate_world(config.synthetic), data);
  RunConfig file_config = config;
  file_config.features = synthetic_feature_config(config);

  const Dictionary dict = build_dictionary_from_dataset(data, file_config);
  save_dictionary(dict, out_dir / "dictionary.xvld");
  const Dictionary loaded = load_dictionary(out_dir / "dictionary.xvld");

  const auto learned = learn_projections(loaded, file_config.training);
  const auto hash = io::fnv1a(loaded.feature_config.to_text());
  save_projection(learned.ground, hash, out_dir / "w_ground");
  save_projection(learned.sat, hash, out_dir / "w_sat");
  LearnedProjections reloaded;
  reloaded.ground = load_projection(out_dir / "w_ground");
  reloaded.sat = load_projection(out_dir / "w_sat");

  std::vector<Pose2D> path;
  for (const auto& rec : read_pose_csv(data / "database" / "poses.csv")) path.push_back(rec.pose);
  std::vector<QueryObservation> queries;
  for (auto& q : load_queries(data / "queries", loaded.camera, loaded.feature_config))
    queries.push_back(prepare_query(std::move(q), loaded));

  const auto results = localize_queries(queries, loaded, &reloaded, Method::Full, path, file_config);
  const auto records = to_records(queries, results, file_config.tau);
  io::write_text(out_dir / "localization.csv", localization_csv(records));
  write_manifest(out_dir / "localization.csv", "pipeline", file_config);

  const auto truth = read_ground_truth_csv(data / "queries" / "ground_truth.csv");
  io::write_text(out_dir / "evaluation.csv", eval_report_csv(evaluate_localization(records, truth, config.inlier_radius)));
  // The sweep needs both classes.
  const auto inside = std::count_if(truth.begin(), truth.end(), [](const GroundTruthRecord& t) { return t.inside; });
  if (inside > 0 && static_cast<std::size_t>(inside) < truth.size())
    io::write_text(out_dir / "pr_curve.csv", pr_curve_csv(pr_sweep(records, truth, config.inlier_radius)));
}

}  // namespace xvl
