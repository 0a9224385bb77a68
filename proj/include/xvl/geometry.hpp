#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace xvl {

/// Wraps an angle to (-pi, pi].
double wrap_angle(double radians);

/// Planar pose in the local metric world frame: x east, y north, heading
/// counter-clockwise from +x.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  Eigen::Vector2d position() const { return {x, y}; }
  Eigen::Matrix2d rotation() const;
};

/// Pinhole camera with zero pitch and roll mounted `height` meters above a flat
/// ground plane.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double height = 1.0;
  int image_w = 1;
  int image_h = 1;

  void validate() const;
};

/// North-up satellite georeference. Pixel u grows east, pixel v grows south.
struct SatGeoref {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double meters_per_pixel = 1.0;
  int image_w = 0;
  int image_h = 0;

  void validate() const;
};

struct SatPixel {
  int u = 0;
  int v = 0;

  friend bool operator==(const SatPixel&, const SatPixel&) = default;
};

struct PathSample {
  enum class Source { DatabaseImage, Interpolated };

  Pose2D pose;
  Source source = Source::Interpolated;
  // Index into the database pose list; -1 for interpolated samples.
  int image_index = -1;
};

/// Planar distance between two poses; heading is ignored.
double delta_location(const Pose2D& a, const Pose2D& b);

/// Database poses plus evenly spaced interpolants on each segment, with no
/// gap larger than `spacing`. Headings follow the shorter arc.
std::vector<PathSample> interpolate_path(const std::vector<Pose2D>& db_poses, double spacing);

/// Back-projects an image pixel with its depth (distance along the optical
/// axis) onto the ground plane and returns the world (x, y). Returns nullopt
/// for non-positive or non-finite depth.
std::optional<Eigen::Vector2d> pixel_depth_to_world(const Eigen::Vector2d& pixel, double depth,
                                                    const CameraIntrinsics& cam, const Pose2D& pose);

/// Horizontal distance from the camera to the back-projected point.
double ground_range(const Eigen::Vector2d& pixel, double depth, const CameraIntrinsics& cam);

/// Continuous satellite pixel coordinates, or nullopt when outside the image.
std::optional<Eigen::Vector2d> world_to_sat_pixel(const Eigen::Vector2d& p, const SatGeoref& geo);

/// Integer pixel containing the world point (nearest-pixel lookup).
std::optional<SatPixel> world_to_sat_index(const Eigen::Vector2d& p, const SatGeoref& geo);

/// World coordinates of a satellite pixel's center.
Eigen::Vector2d sat_pixel_center(const SatPixel& px, const SatGeoref& geo);

// --- text formats ---------------------------------------------------------

struct PoseRecord {
  std::string id;
  Pose2D pose;
};

/// `id,x,y,theta` per line. Blank lines and lines starting with '#' are skipped.
std::vector<PoseRecord> read_pose_csv(const std::filesystem::path& path);
void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRecord>& poses);

SatGeoref read_georef(const std::filesystem::path& path);
void write_georef(const std::filesystem::path& path, const SatGeoref& geo);

CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& cam);

}  // namespace xvl
