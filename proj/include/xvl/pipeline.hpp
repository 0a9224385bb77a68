#pragma once

#include "xvl/config.hpp"
#include "xvl/dictionary.hpp"
#include "xvl/evaluation.hpp"
#include "xvl/learning.hpp"
#include "xvl/localization.hpp"
#include "xvl/synthetic.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace xvl {

inline constexpr const char* kVersion = "1.0.0";

enum class Method {
  Full,          // learned W_g, W_s
  NoProjection,  // identity projections
  GroundOnly,    // ground-image retrieval baseline
};

const char* method_name(Method m);

struct LearnedProjections {
  Projection ground;
  Projection sat;
  TrainReport ground_report;
  TrainReport sat_report;
};

/// Learns W_g on the dictionary's ground features and W_s on its satellite
/// features, both supervised by entry locations.
LearnedProjections learn_projections(const Dictionary& dict, const TrainConfig& config);

/// Localizes every query with one method. Queries must be prepared.
std::vector<LocalizationResult> localize_queries(const std::vector<QueryObservation>& queries, const Dictionary& dict,
                                                 const LearnedProjections* learned, Method method,
                                                 const std::vector<Pose2D>& path, const RunConfig& config);

std::vector<LocalizationRecord> to_records(const std::vector<QueryObservation>& queries,
                                           const std::vector<LocalizationResult>& results, double tau);

// --- synthetic experiments, in memory ---------------------------------------

struct Experiment {
  SyntheticWorld world;
  Dictionary dict;
  LearnedProjections learned;
  std::vector<QueryObservation> queries;  // prepared
  std::vector<GroundTruthRecord> truth;
};

FeatureConfig synthetic_feature_config(const RunConfig& config);
std::vector<DatabaseView> database_views(const SyntheticWorld& world);

/// World generation, dictionary build, projection learning and query
/// preparation for one config.
Experiment prepare_experiment(const RunConfig& config);

// --- dataset directories ----------------------------------------------------
//
//   georef.txt, intrinsics.txt, satellite.{fmap|png|ppm}
//   database/poses.csv, database/<id>.{fmap|png|ppm}, database/<id>.depth.fmap
//   queries/<id>.{fmap|png|ppm}, queries/<id>.depth.fmap, queries/ground_truth.csv
//
// Queries may carry their own queries/intrinsics.txt.

void write_dataset(const SyntheticWorld& world, const std::filesystem::path& dir);
Dictionary build_dictionary_from_dataset(const std::filesystem::path& dir, const RunConfig& config);
/// Loads (unprepared) queries: every `<id>.depth.fmap` in the directory, by id.
std::vector<QueryObservation> load_queries(const std::filesystem::path& dir, const CameraIntrinsics& fallback,
                                           const FeatureConfig& features);

void write_manifest(const std::filesystem::path& output, const std::string& command, const RunConfig& config);

/// synth-gen -> build-dict -> learn-proj -> localize -> evaluate -> pr-sweep,
/// all through files under `out_dir`.
void run_file_pipeline(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace xvl
