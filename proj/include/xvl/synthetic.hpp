#pragma once

#include "xvl/features.hpp"
#include "xvl/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace xvl {

struct SyntheticParams {
  std::uint64_t seed = 0;
  double extent = 300.0;           // square world side, meters
  double meters_per_pixel = 0.5;   // satellite resolution
  int channels = 12;
  double blob_density = 40.0;      // blobs per hectare in the coarsest channel
  // Channel length scales are log-spaced over [min, max]; fine channels carry
  // little location information at database spacing.
  double blob_sigma_min = 0.5;
  double blob_sigma_max = 8.0;
  double noise_sigma = 0.05;       // ground-view feature noise
  bool identity_mixing = false;
  double mixing_condition = 6.0;   // ratio of largest to smallest singular value of A
  double path_length = 200.0;
  double db_spacing = 2.0;
  int num_queries = 30;
  int num_outside_queries = 30;
  double outside_clearance = 40.0;  // min distance of outside queries from the path
  double query_lateral_offset = 1.0;
  double query_heading_deg = 5.0;
  /// Place on-path queries exactly on interpolated candidate poses.
  bool queries_on_candidates = false;
  double candidate_spacing = 1.0;
  int image_w = 144;
  int image_h = 96;
  double focal = 72.0;
  double camera_height = 1.6;

  void validate() const;
};

struct SyntheticView {
  std::string id;
  Pose2D pose;
  FeatureMap features;
  FeatureMap depth;
  bool inside = true;
};

/// Smooth multi-channel field (sum of seeded Gaussian blobs per channel)
/// observed from above as a satellite feature map and from the ground as
/// A * satellite + noise along exact ground-plane rays.
struct SyntheticWorld {
  SyntheticParams params;
  SatGeoref georef;
  CameraIntrinsics camera;
  FeatureMap sat_map;
  Eigen::MatrixXd mixing;
  std::vector<SyntheticView> database;
  std::vector<SyntheticView> queries;  // on-path queries followed by outside-path queries

  std::vector<Pose2D> database_poses() const;
};

SyntheticWorld generate_world(const SyntheticParams& params);

}  // namespace xvl
