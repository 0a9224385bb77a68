#include "xvl/geometry.hpp"

#include "xvl/error.hpp"
#include "xvl/io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace xvl {

double wrap_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Eigen::Matrix2d Pose2D::rotation() const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("camera focal lengths must be positive");
  if (!(height > 0.0)) throw ValidationError("camera height must be positive");
  if (image_w <= 0 || image_h <= 0) throw ValidationError("camera image size must be positive");
  if (!(cx >= 0.0 && cx < image_w) || !(cy >= 0.0 && cy < image_h))
    throw ValidationError("camera principal point must lie inside the image");
}

void SatGeoref::validate() const {
  if (!(meters_per_pixel > 0.0) || !std::isfinite(meters_per_pixel))
    throw ValidationError("georef meters_per_pixel must be positive");
  if (image_w <= 0 || image_h <= 0) throw ValidationError("georef image size must be positive");
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) throw ValidationError("georef origin must be finite");
}

double delta_location(const Pose2D& a, const Pose2D& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<PathSample> interpolate_path(const std::vector<Pose2D>& db_poses, double spacing) {
  if (db_poses.size() < 2) throw ValidationError("path too short");
  if (!(spacing > 0.0)) throw ValidationError("path spacing must be positive");

  std::vector<PathSample> out;
  for (std::size_t i = 0; i + 1 < db_poses.size(); ++i) {
    const Pose2D& a = db_poses[i];
    const Pose2D& b = db_poses[i + 1];
    out.push_back({a, PathSample::Source::DatabaseImage, static_cast<int>(i)});
    const double length = delta_location(a, b);
    const auto pieces = std::max<long>(1, static_cast<long>(std::ceil(length / spacing - 1e-12)));
    const double turn = wrap_angle(b.theta - a.theta);
    for (long k = 1; k < pieces; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(pieces);
      out.push_back({Pose2D(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.theta + t * turn),
                     PathSample::Source::Interpolated, -1});
    }
  }
  out.push_back({db_poses.back(), PathSample::Source::DatabaseImage, static_cast<int>(db_poses.size() - 1)});
  return out;
}

std::optional<Eigen::Vector2d> pixel_depth_to_world(const Eigen::Vector2d& pixel, double depth,
                                                    const CameraIntrinsics& cam, const Pose2D& pose) {
  if (!(depth > 0.0) || !std::isfinite(depth)) return std::nullopt;
  // Camera frame: z forward, x right, y down. Vehicle frame: x forward, y left.
  const double right = (pixel.x() - cam.cx) / cam.fx * depth;
  const Eigen::Vector2d vehicle(depth, -right);
  return pose.position() + pose.rotation() * vehicle;
}

double ground_range(const Eigen::Vector2d& pixel, double depth, const CameraIntrinsics& cam) {
  const double right = (pixel.x() - cam.cx) / cam.fx * depth;
  return std::hypot(depth, right);
}

std::optional<Eigen::Vector2d> world_to_sat_pixel(const Eigen::Vector2d& p, const SatGeoref& geo) {
  const double u = (p.x() - geo.origin_x) / geo.meters_per_pixel;
  const double v = (geo.origin_y - p.y()) / geo.meters_per_pixel;
  if (!(u >= 0.0 && u < geo.image_w && v >= 0.0 && v < geo.image_h)) return std::nullopt;
  return Eigen::Vector2d(u, v);
}

std::optional<SatPixel> world_to_sat_index(const Eigen::Vector2d& p, const SatGeoref& geo) {
  const auto uv = world_to_sat_pixel(p, geo);
  if (!uv) return std::nullopt;
  SatPixel px{static_cast<int>(std::floor(uv->x())), static_cast<int>(std::floor(uv->y()))};
  // Guard against rounding right at the far edge.
  px.u = std::min(px.u, geo.image_w - 1);
  px.v = std::min(px.v, geo.image_h - 1);
  return px;
}

Eigen::Vector2d sat_pixel_center(const SatPixel& px, const SatGeoref& geo) {
  return {geo.origin_x + (px.u + 0.5) * geo.meters_per_pixel, geo.origin_y - (px.v + 0.5) * geo.meters_per_pixel};
}

std::vector<PoseRecord> read_pose_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pose file " + path.string());
  std::vector<PoseRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 4) throw ValidationError(where + ": expected id,x,y,theta");
    if (line_no == 1 && fields[0] == "id") continue;  // header
    out.push_back({fields[0], Pose2D(io::parse_double(fields[1], where), io::parse_double(fields[2], where),
                                     io::parse_double(fields[3], where))});
  }
  return out;
}

void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRecord>& poses) {
  std::string text = "id,x,y,theta\n";
  for (const auto& p : poses)
    text += p.id + "," + io::format_double(p.pose.x) + "," + io::format_double(p.pose.y) + "," +
            io::format_double(p.pose.theta) + "\n";
  io::write_text(path, text);
}

namespace {

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key,
                           const std::filesystem::path& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ValidationError(path.string() + ": missing key '" + key + "'");
  return it->second;
}

void reject_unknown(const std::map<std::string, std::string>& kv, std::initializer_list<const char*> known,
                    const std::filesystem::path& path) {
  for (const auto& [k, v] : kv) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ValidationError(path.string() + ": unknown key '" + k + "'");
  }
}

}  // namespace

SatGeoref read_georef(const std::filesystem::path& path) {
  const auto kv = io::read_key_values(path);
  reject_unknown(kv, {"origin_x", "origin_y", "meters_per_pixel", "image_w", "image_h"}, path);
  SatGeoref g;
  g.origin_x = io::parse_double(require(kv, "origin_x", path), "origin_x");
  g.origin_y = io::parse_double(require(kv, "origin_y", path), "origin_y");
  g.meters_per_pixel = io::parse_double(require(kv, "meters_per_pixel", path), "meters_per_pixel");
  g.image_w = static_cast<int>(io::parse_int(require(kv, "image_w", path), "image_w"));
  g.image_h = static_cast<int>(io::parse_int(require(kv, "image_h", path), "image_h"));
  g.validate();
  return g;
}

void write_georef(const std::filesystem::path& path, const SatGeoref& geo) {
  io::write_text(path, "origin_x = " + io::format_double(geo.origin_x) + "\norigin_y = " +
                           io::format_double(geo.origin_y) + "\nmeters_per_pixel = " +
                           io::format_double(geo.meters_per_pixel) + "\nimage_w = " + std::to_string(geo.image_w) +
                           "\nimage_h = " + std::to_string(geo.image_h) + "\n");
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  const auto kv = io::read_key_values(path);
  reject_unknown(kv, {"fx", "fy", "cx", "cy", "height", "image_w", "image_h"}, path);
  CameraIntrinsics c;
  c.fx = io::parse_double(require(kv, "fx", path), "fx");
  c.fy = io::parse_double(require(kv, "fy", path), "fy");
  c.cx = io::parse_double(require(kv, "cx", path), "cx");
  c.cy = io::parse_double(require(kv, "cy", path), "cy");
  c.height = io::parse_double(require(kv, "height", path), "height");
  c.image_w = static_cast<int>(io::parse_int(require(kv, "image_w", path), "image_w"));
  c.image_h = static_cast<int>(io::parse_int(require(kv, "image_h", path), "image_h"));
  c.validate();
  return c;
}

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& cam) {
  io::write_text(path, "fx = " + io::format_double(cam.fx) + "\nfy = " + io::format_double(cam.fy) +
                           "\ncx = " + io::format_double(cam.cx) + "\ncy = " + io::format_double(cam.cy) +
                           "\nheight = " + io::format_double(cam.height) + "\nimage_w = " +
                           std::to_string(cam.image_w) + "\nimage_h = " + std::to_string(cam.image_h) + "\n");
}

}  // namespace xvl
