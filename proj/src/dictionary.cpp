#include "xvl/dictionary.hpp"

#include "xvl/error.hpp"
#include "xvl/io.hpp"

#include <cmath>
#include <numeric>

namespace xvl {

namespace {

constexpr std::uint32_t kDictVersion = 1;

void build_indexes(Dictionary& dict) {
  const auto ids = dict.ids();
  dict.ground_index = NeighborIndex::build(ids, dict.ground_feats);
  dict.sat_index = NeighborIndex::build(ids, dict.sat_feats);
}

}  // namespace

void DictionaryOptions::validate() const {
  grid.validate();
  if (!(max_range > 0.0)) throw ValidationError("max_range must be positive");
}

std::vector<std::uint32_t> Dictionary::ids() const {
  std::vector<std::uint32_t> out(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) out[i] = entries[i].id;
  return out;
}

std::vector<Eigen::Vector2d> Dictionary::locations() const {
  std::vector<Eigen::Vector2d> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.location);
  return out;
}

Dictionary build_dictionary(const std::vector<DatabaseView>& db, const FeatureMap& sat_map, const SatGeoref& georef,
                            const CameraIntrinsics& camera, const DictionaryOptions& options,
                            FeatureConfig feature_config) {
  georef.validate();
  camera.validate();
  options.validate();
  feature_config.validate();
  if (db.empty()) throw ValidationError("build_dictionary: no database images");
  if (sat_map.width() != georef.image_w || sat_map.height() != georef.image_h)
    throw ValidationError("build_dictionary: satellite feature map size does not match georef");

  const int ground_dim = db.front().features.channels();
  std::vector<DictEntry> entries;
  std::vector<float> ground_raw;
  std::vector<float> sat_raw;
  Dictionary dict;

  for (std::size_t img = 0; img < db.size(); ++img) {
    const auto& view = db[img];
    if (view.features.channels() != ground_dim)
      throw ValidationError("build_dictionary: image '" + view.id + "' has " +
                            std::to_string(view.features.channels()) + " channels, expected " +
                            std::to_string(ground_dim));
    if (view.depth.width() != view.features.width() || view.depth.height() != view.features.height() ||
        view.depth.channels() != 1)
      throw ValidationError("build_dictionary: depth map of '" + view.id + "' is not aligned with its features");
    dict.images.push_back({view.id, view.pose});

    for (const auto& sample : sample_grid(view.features, options.grid)) {
      const Eigen::Vector2d px(sample.u, sample.v);
      const double depth = view.depth.at(sample.u, sample.v, 0);
      const auto world = pixel_depth_to_world(px, depth, camera, view.pose);
      if (!world || ground_range(px, depth, camera) > options.max_range) continue;
      const auto sat_px = world_to_sat_index(*world, georef);
      if (!sat_px) continue;
      entries.push_back({static_cast<std::uint32_t>(entries.size()), *world, static_cast<std::uint32_t>(img)});
      ground_raw.insert(ground_raw.end(), sample.feature.data(), sample.feature.data() + ground_dim);
      const auto s = sat_map.pixel(sat_px->u, sat_px->v);
      sat_raw.insert(sat_raw.end(), s.data(), s.data() + sat_map.channels());
    }
  }
  if (entries.empty()) throw ValidationError("empty dictionary");

  const auto n = static_cast<Eigen::Index>(entries.size());
  dict.entries = std::move(entries);
  dict.ground_feats = Eigen::Map<Eigen::MatrixXf>(ground_raw.data(), ground_dim, n);
  dict.sat_feats = Eigen::Map<Eigen::MatrixXf>(sat_raw.data(), sat_map.channels(), n);
  dict.sat_map = sat_map;

  if (feature_config.standardize) {
    feature_config.ground_stats = ChannelStats::fit(dict.ground_feats);
    feature_config.sat_stats = ChannelStats::fit(dict.sat_feats);
  } else {
    feature_config.ground_stats = ChannelStats::identity(ground_dim);
    feature_config.sat_stats = ChannelStats::identity(sat_map.channels());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    feature_config.ground_stats.apply(dict.ground_feats.col(i));
    feature_config.sat_stats.apply(dict.sat_feats.col(i));
  }
  feature_config.sat_stats.apply(dict.sat_map);

  dict.georef = georef;
  dict.camera = camera;
  dict.options = options;
  dict.feature_config = std::move(feature_config);
  build_indexes(dict);
  return dict;
}

std::vector<std::uint8_t> encode_dictionary(const Dictionary& dict) {
  io::ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>("XVLD"), 4});
  w.u32(kDictVersion);
  w.str(dict.feature_config.to_text());

  w.f64(dict.georef.origin_x);
  w.f64(dict.georef.origin_y);
  w.f64(dict.georef.meters_per_pixel);
  w.u32(static_cast<std::uint32_t>(dict.georef.image_w));
  w.u32(static_cast<std::uint32_t>(dict.georef.image_h));

  const auto& c = dict.camera;
  for (double v : {c.fx, c.fy, c.cx, c.cy, c.height}) w.f64(v);
  w.u32(static_cast<std::uint32_t>(c.image_w));
  w.u32(static_cast<std::uint32_t>(c.image_h));

  w.u32(static_cast<std::uint32_t>(dict.options.grid.interval));
  w.u32(static_cast<std::uint32_t>(dict.options.grid.margin));
  w.f64(dict.options.max_range);

  w.u32(static_cast<std::uint32_t>(dict.images.size()));
  for (const auto& img : dict.images) {
    w.str(img.id);
    w.f64(img.pose.x);
    w.f64(img.pose.y);
    w.f64(img.pose.theta);
  }

  w.u32(static_cast<std::uint32_t>(dict.entries.size()));
  w.u32(static_cast<std::uint32_t>(dict.ground_dim()));
  w.u32(static_cast<std::uint32_t>(dict.sat_dim()));
  for (std::size_t i = 0; i < dict.entries.size(); ++i) {
    const auto& e = dict.entries[i];
    w.u32(e.id);
    w.f64(e.location.x());
    w.f64(e.location.y());
    w.u32(e.source_image);
    const auto col = static_cast<Eigen::Index>(i);
    for (Eigen::Index r = 0; r < dict.ground_feats.rows(); ++r) w.f32(dict.ground_feats(r, col));
    for (Eigen::Index r = 0; r < dict.sat_feats.rows(); ++r) w.f32(dict.sat_feats(r, col));
  }

  const auto fmap = encode_feature_map(dict.sat_map);
  w.u64(fmap.size());
  w.bytes(fmap);
  return w.take();
}

Dictionary decode_dictionary(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 8 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "XVLD")
    throw FormatError(origin + ": not a dictionary file (bad magic)", 0);
  io::ByteReader r(bytes);
  r.bytes(4);
  if (const auto version = r.u32(); version != kDictVersion)
    throw FormatError(origin + ": unsupported dictionary version " + std::to_string(version), 4);

  Dictionary d;
  d.feature_config = FeatureConfig::from_text(r.str());
  d.georef.origin_x = r.f64();
  d.georef.origin_y = r.f64();
  d.georef.meters_per_pixel = r.f64();
  d.georef.image_w = static_cast<int>(r.u32());
  d.georef.image_h = static_cast<int>(r.u32());
  d.georef.validate();

  auto& c = d.camera;
  c.fx = r.f64();
  c.fy = r.f64();
  c.cx = r.f64();
  c.cy = r.f64();
  c.height = r.f64();
  c.image_w = static_cast<int>(r.u32());
  c.image_h = static_cast<int>(r.u32());
  c.validate();

  d.options.grid.interval = static_cast<int>(r.u32());
  d.options.grid.margin = static_cast<int>(r.u32());
  d.options.max_range = r.f64();
  d.options.validate();

  const auto n_images = r.u32();
  for (std::uint32_t i = 0; i < n_images; ++i) {
    DatabaseImage img;
    img.id = r.str();
    const double x = r.f64();
    const double y = r.f64();
    const double t = r.f64();
    img.pose = Pose2D(x, y, t);
    d.images.push_back(std::move(img));
  }

  const auto n = r.u32();
  const auto gd = r.u32();
  const auto sd = r.u32();
  if (n == 0 || gd == 0 || sd == 0) throw FormatError(origin + ": empty entry table", r.offset());
  d.entries.resize(n);
  d.ground_feats.resize(gd, n);
  d.sat_feats.resize(sd, n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& e = d.entries[i];
    e.id = r.u32();
    e.location.x() = r.f64();
    e.location.y() = r.f64();
    e.source_image = r.u32();
    if (e.id != i || e.source_image >= n_images)
      throw FormatError(origin + ": inconsistent entry " + std::to_string(i), r.offset());
    for (std::uint32_t k = 0; k < gd; ++k) d.ground_feats(k, i) = r.f32();
    for (std::uint32_t k = 0; k < sd; ++k) d.sat_feats(k, i) = r.f32();
  }

  const auto fmap_len = r.u64();
  const auto fmap_offset = r.offset();
  if (fmap_len > r.remaining())
    throw FormatError(origin + ": satellite map block truncated: expected " + std::to_string(fmap_len) +
                          " bytes, got " + std::to_string(r.remaining()),
                      fmap_offset);
  d.sat_map = decode_feature_map(r.bytes(fmap_len), origin + " (satellite map)");
  if (r.remaining() != 0) throw FormatError(origin + ": trailing bytes after satellite map", r.offset());
  if (d.sat_map.channels() != static_cast<int>(sd) || d.sat_map.width() != d.georef.image_w ||
      d.sat_map.height() != d.georef.image_h)
    throw FormatError(origin + ": satellite map does not match georef or feature dimension", fmap_offset);
  if (d.feature_config.ground_stats.channels() != static_cast<int>(gd) ||
      d.feature_config.sat_stats.channels() != static_cast<int>(sd))
    throw FormatError(origin + ": feature config stats do not match feature dimensions", 8);

  build_indexes(d);
  return d;
}

void save_dictionary(const Dictionary& dict, const std::filesystem::path& path) {
  io::write_file(path, encode_dictionary(dict));
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_dictionary(bytes, path.string());
}

}  // namespace xvl
