#include "xvl/synthetic.hpp"

#include "xvl/error.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <random>

namespace xvl {

namespace {

struct Blob {
  Eigen::Vector2d center;
  double sigma;
  double amplitude;
};

class Field {
public:
  Field(int channels, double extent, double density, double sigma_min, double sigma_max, std::mt19937_64& rng) {
    // Each channel has its own length scale, log-spaced over [sigma_min, sigma_max];
    // finer channels get proportionally more blobs so coverage stays even.
    std::uniform_real_distribution<double> pos(-0.1 * extent, 1.1 * extent);
    std::uniform_real_distribution<double> jitter(0.8, 1.25);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    blobs_.resize(channels);
    for (int c = 0; c < channels; ++c) {
      const double t = channels == 1 ? 1.0 : static_cast<double>(c) / (channels - 1);
      const double scale = sigma_min * std::pow(sigma_max / sigma_min, t);
      const double area_ratio = (sigma_max / scale) * (sigma_max / scale);
      const auto count = static_cast<int>(std::lround(density * area_ratio * extent * extent / 1e4));
      for (int b = 0; b < count; ++b) blobs_[c].push_back({{pos(rng), pos(rng)}, scale * jitter(rng), amp(rng)});
    }
  }

  int channels() const { return static_cast<int>(blobs_.size()); }

  Eigen::VectorXd at(const Eigen::Vector2d& p) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(channels());
    for (int c = 0; c < channels(); ++c)
      for (const auto& b : blobs_[c]) {
        const double d2 = (p - b.center).squaredNorm();
        if (d2 < 25.0 * b.sigma * b.sigma) out(c) += b.amplitude * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
      }
    return out;
  }

  // Rasterizes blob by blob over a 5-sigma window.
  FeatureMap render(const SatGeoref& geo) const {
    std::vector<double> acc(static_cast<std::size_t>(geo.image_w) * geo.image_h * channels(), 0.0);
    for (int c = 0; c < channels(); ++c) {
      for (const auto& b : blobs_[c]) {
        const double r = 5.0 * b.sigma;
        const int u0 = std::max(0, static_cast<int>(std::floor((b.center.x() - r - geo.origin_x) / geo.meters_per_pixel)));
        const int u1 = std::min(geo.image_w - 1, static_cast<int>(std::ceil((b.center.x() + r - geo.origin_x) / geo.meters_per_pixel)));
        const int v0 = std::max(0, static_cast<int>(std::floor((geo.origin_y - b.center.y() - r) / geo.meters_per_pixel)));
        const int v1 = std::min(geo.image_h - 1, static_cast<int>(std::ceil((geo.origin_y - b.center.y() + r) / geo.meters_per_pixel)));
        for (int v = v0; v <= v1; ++v)
          for (int u = u0; u <= u1; ++u) {
            const double d2 = (sat_pixel_center({u, v}, geo) - b.center).squaredNorm();
            if (d2 < 25.0 * b.sigma * b.sigma)
              acc[(static_cast<std::size_t>(v) * geo.image_w + u) * channels() + c] +=
                  b.amplitude * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
          }
      }
    }
    return FeatureMap(geo.image_w, geo.image_h, channels(), std::vector<float>(acc.begin(), acc.end()));
  }

private:
  std::vector<std::vector<Blob>> blobs_;
};

Eigen::MatrixXd random_mixing(int n, double condition, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto orthogonal = [&] {
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return Eigen::MatrixXd(qr.householderQ());
  };
  const Eigen::MatrixXd q1 = orthogonal();
  const Eigen::MatrixXd q2 = orthogonal();
  Eigen::VectorXd s(n);
  // Log-spaced singular values with geometric mean 1: invertible by construction.
  for (int i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
    s(i) = std::pow(condition, 0.5 - t);
  }
  return q1 * s.asDiagonal() * q2.transpose();
}

// Arc-length parameterized smooth path.
class Curve {
public:
  Curve(double length, const Eigen::Vector2d& center, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    const double heading0 = angle(rng);
    const double phase = angle(rng);
    const double wavelength = 120.0 + 60.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double amplitude = 0.35;
    const int steps = static_cast<int>(std::ceil(length / kStep));
    Eigen::Vector2d p = Eigen::Vector2d::Zero();
    for (int i = 0; i <= steps; ++i) {
      const double s = i * kStep;
      const double th = heading0 + amplitude * std::sin(2.0 * std::numbers::pi * s / wavelength + phase);
      points_.push_back(p);
      headings_.push_back(th);
      p += kStep * Eigen::Vector2d(std::cos(th), std::sin(th));
    }
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& q : points_) mean += q;
    mean /= static_cast<double>(points_.size());
    for (auto& q : points_) q += center - mean;
  }

  Pose2D at(double s) const {
    const double f = std::clamp(s / kStep, 0.0, static_cast<double>(points_.size() - 1));
    const auto i = static_cast<std::size_t>(std::min(std::floor(f), static_cast<double>(points_.size() - 2)));
    const double t = f - static_cast<double>(i);
    const Eigen::Vector2d p = (1.0 - t) * points_[i] + t * points_[i + 1];
    return Pose2D(p.x(), p.y(), headings_[i] + t * wrap_angle(headings_[i + 1] - headings_[i]));
  }

  double distance_to(const Eigen::Vector2d& q) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : points_) best = std::min(best, (p - q).norm());
    return best;
  }

private:
  static constexpr double kStep = 0.05;
  std::vector<Eigen::Vector2d> points_;
  std::vector<double> headings_;
};

SyntheticView render_view(const std::string& id, const Pose2D& pose, const SyntheticWorld& world, const Field& field,
                          std::mt19937_64& rng) {
  const auto& cam = world.camera;
  const int channels = world.sat_map.channels();
  SyntheticView view{id, pose, FeatureMap(cam.image_w, cam.image_h, channels), FeatureMap(cam.image_w, cam.image_h, 1),
                     true};
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = world.params.noise_sigma;
  for (int v = 0; v < cam.image_h; ++v) {
    for (int u = 0; u < cam.image_w; ++u) {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(channels);
      if (v > cam.cy) {
        const double depth = cam.height * cam.fy / (v - cam.cy);
        view.depth.at(u, v, 0) = static_cast<float>(depth);
        const auto world_pt = pixel_depth_to_world(Eigen::Vector2d(u, v), depth, cam, pose);
        if (const auto px = world_to_sat_index(*world_pt, world.georef))
          s = world.sat_map.pixel(px->u, px->v).cast<double>();
        else
          s = field.at(*world_pt);
      }
      Eigen::VectorXd g = world.mixing * s;
      if (sigma > 0.0)
        for (int c = 0; c < channels; ++c) g(c) += sigma * noise(rng);
      view.features.pixel(u, v) = g.cast<float>();
    }
  }
  return view;
}

std::string view_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04d", prefix, i);
  return buf;
}

}  // namespace

void SyntheticParams::validate() const {
  if (!(extent > 0.0) || !(meters_per_pixel > 0.0)) throw ValidationError("synthetic extent and resolution must be positive");
  if (channels < 1) throw ValidationError("synthetic channels must be >= 1");
  if (!(blob_density > 0.0) || !(blob_sigma_min > 0.0) || blob_sigma_max < blob_sigma_min)
    throw ValidationError("synthetic blob parameters are invalid");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  if (!(mixing_condition >= 1.0)) throw ValidationError("mixing_condition must be >= 1");
  if (!(path_length > 0.0) || !(db_spacing > 0.0) || path_length < db_spacing)
    throw ValidationError("path_length must exceed db_spacing > 0");
  if (num_queries < 0 || num_outside_queries < 0) throw ValidationError("query counts must be >= 0");
  if (!(candidate_spacing > 0.0)) throw ValidationError("candidate_spacing must be positive");
  if (image_w < 2 || image_h < 2 || !(focal > 0.0) || !(camera_height > 0.0))
    throw ValidationError("synthetic camera parameters are invalid");
}

std::vector<Pose2D> SyntheticWorld::database_poses() const {
  std::vector<Pose2D> out;
  for (const auto& v : database) out.push_back(v.pose);
  return out;
}

SyntheticWorld generate_world(const SyntheticParams& params) {
  params.validate();
  SyntheticWorld world;
  world.params = params;
  std::mt19937_64 rng(params.seed);

  const int px = static_cast<int>(std::lround(params.extent / params.meters_per_pixel));
  world.georef = {0.0, params.extent, params.meters_per_pixel, px, px};
  world.camera = {params.focal, params.focal, params.image_w / 2.0, params.image_h / 2.0,
                  params.camera_height, params.image_w, params.image_h};

  const Field field(params.channels, params.extent, params.blob_density, params.blob_sigma_min,
                    params.blob_sigma_max, rng);
  world.sat_map = field.render(world.georef);
  world.mixing = params.identity_mixing ? Eigen::MatrixXd::Identity(params.channels, params.channels)
                                        : random_mixing(params.channels, params.mixing_condition, rng);

  const Eigen::Vector2d center(params.extent / 2.0, params.extent / 2.0);
  const Curve curve(params.path_length, center, rng);

  const int n_db = static_cast<int>(std::floor(params.path_length / params.db_spacing + 1e-9)) + 1;
  for (int i = 0; i < n_db; ++i)
    world.database.push_back(render_view(view_id("db", i), curve.at(i * params.db_spacing), world, field, rng));

  const auto db_poses = world.database_poses();
  const auto candidates = interpolate_path(db_poses, params.candidate_spacing);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int q = 0; q < params.num_queries; ++q) {
    Pose2D pose;
    if (params.queries_on_candidates) {
      const auto k = static_cast<std::size_t>(unit(rng) * static_cast<double>(candidates.size()));
      pose = candidates[std::min(k, candidates.size() - 1)].pose;
    } else {
      const double last = (n_db - 1) * params.db_spacing;
      const Pose2D on_path = curve.at(last * (0.02 + 0.96 * unit(rng)));
      const double lateral = params.query_lateral_offset * (2.0 * unit(rng) - 1.0);
      const double dtheta = params.query_heading_deg * std::numbers::pi / 180.0 * (2.0 * unit(rng) - 1.0);
      const Eigen::Vector2d p = on_path.position() + lateral * Eigen::Vector2d(-std::sin(on_path.theta), std::cos(on_path.theta));
      pose = Pose2D(p.x(), p.y(), on_path.theta + dtheta);
    }
    world.queries.push_back(render_view(view_id("q", q), pose, world, field, rng));
  }

  const double margin = 0.05 * params.extent;
  std::uniform_real_distribution<double> coord(margin, params.extent - margin);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  for (int q = 0; q < params.num_outside_queries; ++q) {
    Eigen::Vector2d p;
    int tries = 0;
    do {
      if (++tries > 10000) throw ValidationError("synthetic world too small to place outside-path queries");
      p = {coord(rng), coord(rng)};
    } while (curve.distance_to(p) < params.outside_clearance);
    auto view = render_view(view_id("out", q), Pose2D(p.x(), p.y(), angle(rng)), world, field, rng);
    view.inside = false;
    world.queries.push_back(std::move(view));
  }
  return world;
}

}  // namespace xvl
