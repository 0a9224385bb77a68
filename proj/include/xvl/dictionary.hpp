#pragma once

#include "xvl/features.hpp"
#include "xvl/geometry.hpp"
#include "xvl/neighbor_index.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xvl {

/// One database ground view with its aligned depth map (1 channel, meters
/// along the optical axis; <= 0 or non-finite marks a hole).
struct DatabaseView {
  std::string id;
  Pose2D pose;
  FeatureMap features;
  FeatureMap depth;
};

struct DatabaseImage {
  std::string id;
  Pose2D pose;
};

struct DictEntry {
  std::uint32_t id = 0;
  Eigen::Vector2d location = Eigen::Vector2d::Zero();
  std::uint32_t source_image = 0;  // index into Dictionary::images
};

struct DictionaryOptions {
  GridSpec grid;
  double max_range = 50.0;

  void validate() const;
};

/// Paired ground/satellite feature dictionary. Column i of ground_feats and
/// sat_feats belongs to entries[i], whose id is i. Both indexes are keyed by
/// entry id, and sat_map is the dense satellite cache in the same normalized
/// feature space as sat_feats.
struct Dictionary {
  std::vector<DictEntry> entries;
  Eigen::MatrixXf ground_feats;
  Eigen::MatrixXf sat_feats;
  NeighborIndex ground_index;
  NeighborIndex sat_index;
  FeatureMap sat_map;
  SatGeoref georef;
  CameraIntrinsics camera;
  DictionaryOptions options;
  FeatureConfig feature_config;
  std::vector<DatabaseImage> images;

  std::size_t size() const { return entries.size(); }
  int ground_dim() const { return static_cast<int>(ground_feats.rows()); }
  int sat_dim() const { return static_cast<int>(sat_feats.rows()); }
  std::vector<std::uint32_t> ids() const;
  std::vector<Eigen::Vector2d> locations() const;
};

/// Per grid sample that survives: back-project with depth, reject beyond
/// max_range or outside the satellite image, pair with the nearest satellite
/// pixel. `sat_map` holds raw (un-normalized) satellite features; the fitted
/// channel stats are written into the stored feature config.
Dictionary build_dictionary(const std::vector<DatabaseView>& db, const FeatureMap& sat_map, const SatGeoref& georef,
                            const CameraIntrinsics& camera, const DictionaryOptions& options,
                            FeatureConfig feature_config);

std::vector<std::uint8_t> encode_dictionary(const Dictionary& dict);
Dictionary decode_dictionary(std::span<const std::uint8_t> bytes, const std::string& origin = "dictionary");
void save_dictionary(const Dictionary& dict, const std::filesystem::path& path);
Dictionary load_dictionary(const std::filesystem::path& path);

}  // namespace xvl
