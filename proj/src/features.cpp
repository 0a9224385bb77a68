#include "xvl/features.hpp"

#include "xvl/error.hpp"
#include "xvl/io.hpp"

#include <cmath>
#include <sstream>

namespace xvl {

FeatureMap::FeatureMap(int width, int height, int channels)
    : FeatureMap(width, height, channels,
                 std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) *
                                        std::max(channels, 0),
                                    0.0f)) {}

FeatureMap::FeatureMap(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width <= 0 || height <= 0 || channels <= 0) throw ValidationError("feature map dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * height * channels)
    throw ValidationError("feature map data length does not match width*height*channels");
}

void GridSpec::validate() const {
  if (interval < 1) throw ValidationError("grid interval must be >= 1");
  if (margin < 0) throw ValidationError("grid margin must be >= 0");
}

namespace {

constexpr int kSmoothRadius = 2;
constexpr double kRangeSigma = 0.1;

void check_image(const RgbImage& image) {
  if (image.empty()) throw ValidationError("empty image");
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3)
    throw ValidationError("image pixel buffer has the wrong size");
}

// One pass of the range-weighted box filter along (du, dv).
FeatureMap range_box_pass(const FeatureMap& in, int du, int dv) {
  FeatureMap out(in.width(), in.height(), in.channels());
  const double inv_two_sigma2 = 1.0 / (2.0 * kRangeSigma * kRangeSigma);
  for (int v = 0; v < in.height(); ++v) {
    for (int u = 0; u < in.width(); ++u) {
      const auto center = in.pixel(u, v);
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      double total = 0.0;
      for (int k = -kSmoothRadius; k <= kSmoothRadius; ++k) {
        const int uu = u + k * du;
        const int vv = v + k * dv;
        if (uu < 0 || vv < 0 || uu >= in.width() || vv >= in.height()) continue;
        const auto n = in.pixel(uu, vv);
        const double d2 = (n - center).cast<double>().squaredNorm();
        const double w = std::exp(-d2 * inv_two_sigma2);
        acc += w * n.cast<double>();
        total += w;
      }
      out.pixel(u, v) = (acc / total).cast<float>();
    }
  }
  return out;
}

}  // namespace

FeatureMap extract_smoothed_color(const RgbImage& image) {
  check_image(image);
  FeatureMap scaled(image.width, image.height, 3);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) scaled.data()[i] = image.pixels[i] / 255.0f;
  return range_box_pass(range_box_pass(scaled, 1, 0), 0, 1);
}

FeatureMap extract_edge_magnitude(const RgbImage& image) {
  check_image(image);
  const int w = image.width;
  const int h = image.height;
  Eigen::MatrixXd lum(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      lum(v, u) = (image.at(u, v, 0) + image.at(u, v, 1) + image.at(u, v, 2)) / (3.0 * 255.0);

  // Largest possible magnitude is sqrt(0.5^2 + 0.5^2).
  const double norm = 1.0 / std::sqrt(0.5);
  FeatureMap out(w, h, 1);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double gx = 0.5 * (lum(v, std::min(u + 1, w - 1)) - lum(v, std::max(u - 1, 0)));
      const double gy = 0.5 * (lum(std::min(v + 1, h - 1), u) - lum(std::max(v - 1, 0), u));
      out.at(u, v, 0) = static_cast<float>(std::min(1.0, std::hypot(gx, gy) * norm));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& map) {
  io::ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>("FMAP"), 4});
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(map.width()));
  w.u32(static_cast<std::uint32_t>(map.height()));
  w.u32(static_cast<std::uint32_t>(map.channels()));
  for (float f : map.data()) w.f32(f);
  return w.take();
}

FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < kFmapHeaderBytes)
    throw FormatError(origin + ": file shorter than the 20-byte FMAP header", bytes.size());
  if (std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "FMAP")
    throw FormatError(origin + ": bad magic, expected 'FMAP'", 0);
  io::ByteReader r(bytes);
  r.bytes(4);
  const auto version = r.u32();
  if (version != 1) throw FormatError(origin + ": unsupported FMAP version " + std::to_string(version), 4);
  const auto width = r.u32();
  const auto height = r.u32();
  const auto channels = r.u32();
  if (width == 0 || height == 0 || channels == 0 || width > (1u << 24) || height > (1u << 24) || channels > (1u << 16))
    throw FormatError(origin + ": invalid FMAP dimensions " + std::to_string(width) + "x" + std::to_string(height) +
                          "x" + std::to_string(channels),
                      8);
  const std::uint64_t count = std::uint64_t{width} * height * channels;
  const std::uint64_t expected = count * 4;
  if (r.remaining() != expected)
    throw FormatError(origin + ": payload size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(r.remaining()),
                      kFmapHeaderBytes);
  std::vector<float> data(count);
  for (auto& f : data) {
    const auto at = r.offset();
    f = r.f32();
    if (!std::isfinite(f)) throw FormatError(origin + ": non-finite feature value", at);
  }
  return FeatureMap(static_cast<int>(width), static_cast<int>(height), static_cast<int>(channels), std::move(data));
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_feature_map(bytes, path.string());
}

void save_feature_map(const FeatureMap& map, const std::filesystem::path& path) {
  io::write_file(path, encode_feature_map(map));
}

FeatureMap stack_feature_maps(const std::vector<FeatureMap>& maps) {
  if (maps.empty()) throw ValidationError("stack_feature_maps: no maps given");
  const int w = maps.front().width();
  const int h = maps.front().height();
  int channels = 0;
  for (const auto& m : maps) {
    if (m.width() != w || m.height() != h)
      throw ValidationError("stack_feature_maps: dimension mismatch (" + std::to_string(m.width()) + "x" +
                            std::to_string(m.height()) + " vs " + std::to_string(w) + "x" + std::to_string(h) + ")");
    channels += m.channels();
  }
  FeatureMap out(w, h, channels);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      int offset = 0;
      for (const auto& m : maps) {
        out.pixel(u, v).segment(offset, m.channels()) = m.pixel(u, v);
        offset += m.channels();
      }
    }
  }
  return out;
}

std::vector<Eigen::Vector2i> grid_positions(int width, int height, const GridSpec& grid) {
  grid.validate();
  std::vector<Eigen::Vector2i> out;
  const int u_last = std::min(width - grid.margin, width - 1);
  const int v_last = std::min(height - grid.margin, height - 1);
  for (int v = grid.margin; v <= v_last; v += grid.interval)
    for (int u = grid.margin; u <= u_last; u += grid.interval) out.emplace_back(u, v);
  return out;
}

std::vector<GridSample> sample_grid(const FeatureMap& map, const GridSpec& grid) {
  std::vector<GridSample> out;
  for (const auto& p : grid_positions(map.width(), map.height(), grid))
    out.push_back({p.x(), p.y(), map.pixel(p.x(), p.y())});
  return out;
}

ChannelStats ChannelStats::identity(int channels) {
  return {Eigen::VectorXd::Zero(channels), Eigen::VectorXd::Ones(channels)};
}

ChannelStats ChannelStats::fit(const Eigen::MatrixXf& samples) {
  const auto channels = samples.rows();
  ChannelStats s = identity(static_cast<int>(channels));
  if (samples.cols() == 0) return s;
  const Eigen::MatrixXd d = samples.cast<double>();
  s.mean = d.rowwise().mean();
  const Eigen::VectorXd var = (d.colwise() - s.mean).rowwise().squaredNorm() / static_cast<double>(d.cols());
  for (Eigen::Index c = 0; c < channels; ++c) s.scale(c) = var(c) > 1e-24 ? std::sqrt(var(c)) : 1.0;
  return s;
}

void ChannelStats::apply(Eigen::Ref<FeatureVector> v) const {
  if (v.size() != mean.size()) throw ValidationError("channel stats dimension mismatch");
  for (Eigen::Index c = 0; c < v.size(); ++c) v(c) = static_cast<float>((v(c) - mean(c)) / scale(c));
}

void ChannelStats::apply(FeatureMap& map) const {
  if (map.channels() != channels()) throw ValidationError("channel stats dimension mismatch");
  for (int v = 0; v < map.height(); ++v)
    for (int u = 0; u < map.width(); ++u) apply(map.pixel(u, v));
}

void FeatureConfig::validate() const {
  if (source != "builtin" && source != "precomputed")
    throw ValidationError("feature source must be 'builtin' or 'precomputed', got '" + source + "'");
}

bool FeatureConfig::same_extraction(const FeatureConfig& other) const {
  return extraction_text() == other.extraction_text();
}

std::string FeatureConfig::extraction_text() const {
  return "source = " + source + "\nsemantic_suffix = " + semantic_suffix +
         "\nstandardize = " + (standardize ? "true" : "false") + "\n";
}

namespace {

std::string vec_text(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? " " : "") + io::format_double(v(i));
  return out;
}

Eigen::VectorXd parse_vec(const std::string& text, const std::string& what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (ss >> tok) vals.push_back(io::parse_double(tok, what));
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace

std::string FeatureConfig::to_text() const {
  return extraction_text() + "ground_mean = " + vec_text(ground_stats.mean) + "\nground_scale = " +
         vec_text(ground_stats.scale) + "\nsat_mean = " + vec_text(sat_stats.mean) + "\nsat_scale = " +
         vec_text(sat_stats.scale) + "\n";
}

FeatureConfig FeatureConfig::from_text(const std::string& text) {
  const auto kv = io::parse_key_values(text, "feature_config");
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError(std::string("feature_config: missing key '") + key + "'");
    return it->second;
  };
  FeatureConfig c;
  c.source = get("source");
  c.semantic_suffix = get("semantic_suffix");
  c.standardize = io::parse_bool(get("standardize"), "standardize");
  c.ground_stats = {parse_vec(get("ground_mean"), "ground_mean"), parse_vec(get("ground_scale"), "ground_scale")};
  c.sat_stats = {parse_vec(get("sat_mean"), "sat_mean"), parse_vec(get("sat_scale"), "sat_scale")};
  if (c.ground_stats.mean.size() != c.ground_stats.scale.size() || c.sat_stats.mean.size() != c.sat_stats.scale.size())
    throw ValidationError("feature_config: stats length mismatch");
  c.validate();
  return c;
}

FeatureMap load_view_features(const std::filesystem::path& stem, const FeatureConfig& config) {
  config.validate();
  std::vector<FeatureMap> parts;
  if (config.source == "precomputed") {
    parts.push_back(load_feature_map(stem.string() + ".fmap"));
  } else {
    std::filesystem::path image_path;
    for (const char* ext : {".png", ".ppm"}) {
      if (std::filesystem::exists(stem.string() + ext)) {
        image_path = stem.string() + ext;
        break;
      }
    }
    if (image_path.empty()) throw ValidationError("no image found for " + stem.string() + " (.png or .ppm)");
    const RgbImage image = load_image(image_path);
    parts.push_back(extract_smoothed_color(image));
    parts.push_back(extract_edge_magnitude(image));
  }
  if (!config.semantic_suffix.empty()) parts.push_back(load_feature_map(stem.string() + config.semantic_suffix));
  return parts.size() == 1 ? std::move(parts.front()) : stack_feature_maps(parts);
}

}  // namespace xvl
