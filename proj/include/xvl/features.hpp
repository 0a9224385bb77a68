#pragma once

#include "xvl/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace xvl {

using FeatureVector = Eigen::VectorXf;

/// Dense per-pixel feature image, row-major and channel-interleaved.
class FeatureMap {
public:
  FeatureMap() = default;
  FeatureMap(int width, int height, int channels);
  FeatureMap(int width, int height, int channels, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  float& at(int u, int v, int c) { return data_[index(u, v) + c]; }
  float at(int u, int v, int c) const { return data_[index(u, v) + c]; }

  Eigen::Map<const FeatureVector> pixel(int u, int v) const { return {data_.data() + index(u, v), channels_}; }
  Eigen::Map<FeatureVector> pixel(int u, int v) { return {data_.data() + index(u, v), channels_}; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

private:
  std::size_t index(int u, int v) const {
    return (static_cast<std::size_t>(v) * width_ + static_cast<std::size_t>(u)) * channels_;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

struct GridSpec {
  int interval = 16;
  int margin = 8;

  void validate() const;
};

struct GridSample {
  int u = 0;
  int v = 0;
  FeatureVector feature;
};

/// Edge-preserving smoothing: separable range-weighted box filter (radius 2,
/// range sigma 0.1 on [0,1] color), horizontal then vertical.
FeatureMap extract_smoothed_color(const RgbImage& image);

/// Central-difference luminance gradient magnitude scaled to [0,1].
FeatureMap extract_edge_magnitude(const RgbImage& image);

// FMAP v1: "FMAP", u32 version, u32 width, u32 height, u32 channels, then
// float32 values, all little-endian.
inline constexpr std::size_t kFmapHeaderBytes = 20;

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& map);
FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes, const std::string& origin = "FMAP");
FeatureMap load_feature_map(const std::filesystem::path& path);
void save_feature_map(const FeatureMap& map, const std::filesystem::path& path);

/// Channel concatenation in input order.
FeatureMap stack_feature_maps(const std::vector<FeatureMap>& maps);

/// Samples at u in {margin, margin + interval, ...} up to width - margin
/// (inclusive, clamped to the image), likewise for v; row-major.
std::vector<GridSample> sample_grid(const FeatureMap& map, const GridSpec& grid);

/// Grid positions only; identical to those of sample_grid.
std::vector<Eigen::Vector2i> grid_positions(int width, int height, const GridSpec& grid);

/// Per-channel affine normalization x -> (x - mean) / scale.
struct ChannelStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static ChannelStats identity(int channels);
  /// Columns are samples. Channels with zero variance keep scale 1.
  static ChannelStats fit(const Eigen::MatrixXf& samples);

  int channels() const { return static_cast<int>(mean.size()); }
  void apply(Eigen::Ref<FeatureVector> v) const;
  void apply(FeatureMap& map) const;
};

/// How feature maps are produced. Stored inside dictionaries so query-time
/// extraction can be checked against database-time extraction.
struct FeatureConfig {
  /// "builtin": smoothed color + edge magnitude computed from RGB images.
  /// "precomputed": `<id>.fmap` files are used as-is.
  std::string source = "builtin";
  /// When non-empty, `<id><semantic_suffix>` FMAP files are stacked after the
  /// base channels.
  std::string semantic_suffix;
  bool standardize = true;

  ChannelStats ground_stats;
  ChannelStats sat_stats;

  void validate() const;
  /// True when the extraction settings (not the fitted stats) agree.
  bool same_extraction(const FeatureConfig& other) const;
  std::string extraction_text() const;

  std::string to_text() const;
  static FeatureConfig from_text(const std::string& text);
};

/// Builds the feature map for one view from the files next to `stem`
/// (`stem.fmap`, `stem.png`, `stem.ppm`, plus the semantic suffix).
FeatureMap load_view_features(const std::filesystem::path& stem, const FeatureConfig& config);

}  // namespace xvl
