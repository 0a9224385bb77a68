#pragma once

#include "xvl/dictionary.hpp"
#include "xvl/features.hpp"
#include "xvl/geometry.hpp"
#include "xvl/learning.hpp"
#include "xvl/neighbor_index.hpp"

#include <span>
#include <string>
#include <vector>

namespace xvl {

inline constexpr double kScoreDistanceFloor = 1e-6;

struct LocalizerOptions {
  std::size_t knn_m = 10;
  SearchMode search = SearchMode::exact();
  double candidate_spacing = 1.0;
  unsigned threads = 1;

  void validate() const;
};

/// A query ground view. `features` are raw (not yet normalized); the
/// extraction settings must match the dictionary's.
struct QueryObservation {
  std::string id;
  FeatureMap features;
  FeatureMap depth;
  CameraIntrinsics camera;
  FeatureConfig feature_config;
};

/// Dictionary features pushed through W_g / W_s with their own indexes, plus
/// the projected dense satellite cache.
class ProjectedDictionary {
public:
  ProjectedDictionary(const Dictionary& dict, Projection w_ground, Projection w_sat);

  const Dictionary& dictionary() const { return *dict_; }
  const Projection& w_ground() const { return w_ground_; }
  const Projection& w_sat() const { return w_sat_; }
  const NeighborIndex& ground_index() const { return ground_index_; }
  const NeighborIndex& sat_index() const { return sat_index_; }
  const Eigen::MatrixXf& ground_feats() const { return ground_feats_; }
  /// W_s applied to every satellite pixel; column = v * width + u.
  const Eigen::MatrixXf& sat_map() const { return sat_map_; }

private:
  const Dictionary* dict_;
  Projection w_ground_;
  Projection w_sat_;
  Eigen::MatrixXf ground_feats_;
  Eigen::MatrixXf sat_map_;
  NeighborIndex ground_index_;
  NeighborIndex sat_index_;
};

/// Ground/satellite feature pair in the normalized (unprojected) space.
struct FeaturePair {
  int grid_index = 0;
  Eigen::VectorXf ground;
  Eigen::VectorXf sat;
  SatPixel sat_pixel;
};

struct Candidate {
  PathSample pose;
  std::size_t pair_count = 0;
  double raw_score = 0.0;
  double posterior = 0.0;
};

struct LocalizationResult {
  Pose2D estimate;
  std::vector<Candidate> candidates;
  std::vector<std::size_t> top;  // indices of the (up to) three best candidates
  double confidence = 0.0;
  bool inlier = true;
};

std::vector<PathSample> generate_candidates(const std::vector<Pose2D>& db_poses, double spacing);

/// Checks the feature config against the dictionary and normalizes the query
/// features with the dictionary's ground statistics.
QueryObservation prepare_query(QueryObservation obs, const Dictionary& dict);

/// Pairs for a prepared query hypothesized at `pose`: grid samples with valid
/// depth within max_range whose projection lands inside the satellite image.
std::vector<FeaturePair> project_query_pairs(const QueryObservation& obs, const Pose2D& pose, const Dictionary& dict,
                                             const GridSpec& grid);

/// Sum over ids present in both hit lists of 1 / (d_g * d_s), each distance
/// floored at `floor`. Terms are summed in ascending id order.
double cooccurrence_score(std::span<const NeighborHit> ground_hits, std::span<const NeighborHit> sat_hits,
                          double floor = kScoreDistanceFloor);

/// Projects both features and retrieves M neighbors in each view.
double cooccurrence_score(const Eigen::Ref<const Eigen::VectorXf>& ground, const Eigen::Ref<const Eigen::VectorXf>& sat,
                          const ProjectedDictionary& pdict, std::size_t m, SearchMode mode = SearchMode::exact());

/// Normalized raw scores; uniform when every score is zero.
std::vector<double> posterior_over_candidates(std::span<const double> raw_scores);

struct LocationEstimate {
  Pose2D pose;
  std::vector<std::size_t> top;
};

/// Posterior-weighted mean of the three highest-posterior candidates (ties
/// to the lower path index); heading is the weighted circular mean.
LocationEstimate estimate_location(std::span<const double> posterior, std::span<const Pose2D> poses);

/// Inlier iff confidence >= tau.
bool classify_query(double confidence, double tau);

/// Scores every candidate and returns the posterior, estimate and confidence
/// (mean per-pair raw score averaged over the top three candidates).
LocalizationResult localize(const QueryObservation& prepared, const ProjectedDictionary& pdict,
                            std::span<const PathSample> candidates, const LocalizerOptions& options);

/// Ground-only retrieval baseline: per database image, the mean projected
/// ground dictionary vector.
class GroundOnlyLocalizer {
public:
  GroundOnlyLocalizer(const Dictionary& dict, Projection w_ground);

  LocalizationResult localize(const QueryObservation& prepared) const;

private:
  const Dictionary* dict_;
  Projection w_ground_;
  Eigen::MatrixXf descriptors_;  // one column per database image
  std::vector<bool> has_descriptor_;
};

}  // namespace xvl
