#include "xvl/localization.hpp"

#include "xvl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace xvl {

namespace {

// A query grid sample expressed in the vehicle frame; independent of the
// hypothesized pose.
struct QueryRay {
  int grid_index;
  Eigen::Vector2i pixel;
  Eigen::Vector2d vehicle;
};

std::vector<QueryRay> query_rays(const QueryObservation& obs, const GridSpec& grid, double max_range) {
  if (obs.depth.width() != obs.features.width() || obs.depth.height() != obs.features.height() ||
      obs.depth.channels() != 1)
    throw ValidationError("query '" + obs.id + "': depth map is not aligned with its features");
  const Pose2D origin;
  std::vector<QueryRay> rays;
  const auto positions = grid_positions(obs.features.width(), obs.features.height(), grid);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Eigen::Vector2d px = positions[i].cast<double>();
    const double depth = obs.depth.at(positions[i].x(), positions[i].y(), 0);
    const auto veh = pixel_depth_to_world(px, depth, obs.camera, origin);
    if (!veh || ground_range(px, depth, obs.camera) > max_range) continue;
    rays.push_back({static_cast<int>(i), positions[i], *veh});
  }
  return rays;
}

std::optional<SatPixel> ray_pixel(const QueryRay& ray, const Pose2D& pose, const SatGeoref& geo) {
  return world_to_sat_index(pose.position() + pose.rotation() * ray.vehicle, geo);
}

std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t count) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  count = std::min(count, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  idx.resize(count);
  return idx;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

void LocalizerOptions::validate() const {
  if (knn_m < 1) throw ValidationError("knn_m must be >= 1");
  if (!(candidate_spacing > 0.0)) throw ValidationError("candidate_spacing must be positive");
}

ProjectedDictionary::ProjectedDictionary(const Dictionary& dict, Projection w_ground, Projection w_sat)
    : dict_(&dict), w_ground_(std::move(w_ground)), w_sat_(std::move(w_sat)) {
  if (w_ground_.input_dim() != dict.ground_dim())
    throw ValidationError("ground projection expects " + std::to_string(w_ground_.input_dim()) +
                          " channels, dictionary has " + std::to_string(dict.ground_dim()));
  if (w_sat_.input_dim() != dict.sat_dim())
    throw ValidationError("satellite projection expects " + std::to_string(w_sat_.input_dim()) +
                          " channels, dictionary has " + std::to_string(dict.sat_dim()));
  ground_feats_ = w_ground_.apply_columns(dict.ground_feats);
  const auto ids = dict.ids();
  ground_index_ = NeighborIndex::build(ids, ground_feats_);
  sat_index_ = NeighborIndex::build(ids, w_sat_.apply_columns(dict.sat_feats));
  const auto& m = dict.sat_map;
  sat_map_ = w_sat_.apply_columns(Eigen::Map<const Eigen::MatrixXf>(m.data().data(), m.channels(),
                                                           static_cast<Eigen::Index>(m.width()) * m.height()));
}

std::vector<PathSample> generate_candidates(const std::vector<Pose2D>& db_poses, double spacing) {
  return interpolate_path(db_poses, spacing);
}

QueryObservation prepare_query(QueryObservation obs, const Dictionary& dict) {
  if (!obs.feature_config.same_extraction(dict.feature_config))
    throw ValidationError("query '" + obs.id + "': feature extraction settings differ from the dictionary's:\n" +
                          obs.feature_config.extraction_text() + "vs\n" + dict.feature_config.extraction_text());
  if (obs.features.channels() != dict.ground_dim())
    throw ValidationError("query '" + obs.id + "': " + std::to_string(obs.features.channels()) +
                          " feature channels, dictionary expects " + std::to_string(dict.ground_dim()));
  obs.camera.validate();
  dict.feature_config.ground_stats.apply(obs.features);
  obs.feature_config = dict.feature_config;
  return obs;
}

std::vector<FeaturePair> project_query_pairs(const QueryObservation& obs, const Pose2D& pose, const Dictionary& dict,
                                             const GridSpec& grid) {
  std::vector<FeaturePair> out;
  for (const auto& ray : query_rays(obs, grid, dict.options.max_range)) {
    const auto px = ray_pixel(ray, pose, dict.georef);
    if (!px) continue;
    out.push_back({ray.grid_index, obs.features.pixel(ray.pixel.x(), ray.pixel.y()), dict.sat_map.pixel(px->u, px->v),
                   *px});
  }
  return out;
}

double cooccurrence_score(std::span<const NeighborHit> ground_hits, std::span<const NeighborHit> sat_hits,
                          double floor) {
  std::vector<NeighborHit> g(ground_hits.begin(), ground_hits.end());
  std::vector<NeighborHit> s(sat_hits.begin(), sat_hits.end());
  auto by_id = [](const NeighborHit& a, const NeighborHit& b) { return a.id < b.id; };
  std::sort(g.begin(), g.end(), by_id);
  std::sort(s.begin(), s.end(), by_id);
  double score = 0.0;
  auto gi = g.begin();
  auto si = s.begin();
  while (gi != g.end() && si != s.end()) {
    if (gi->id < si->id) {
      ++gi;
    } else if (si->id < gi->id) {
      ++si;
    } else {
      score += 1.0 / (std::max(gi->distance, floor) * std::max(si->distance, floor));
      ++gi;
      ++si;
    }
  }
  return score;
}

double cooccurrence_score(const Eigen::Ref<const Eigen::VectorXf>& ground, const Eigen::Ref<const Eigen::VectorXf>& sat,
                          const ProjectedDictionary& pdict, std::size_t m, SearchMode mode) {
  const auto g_hits = pdict.ground_index().knn(pdict.w_ground().apply(ground), m, mode);
  const auto s_hits = pdict.sat_index().knn(pdict.w_sat().apply(sat), m, mode);
  return cooccurrence_score(g_hits, s_hits);
}

std::vector<double> posterior_over_candidates(std::span<const double> raw_scores) {
  if (raw_scores.empty()) throw ValidationError("posterior_over_candidates: no candidates");
  double total = 0.0;
  for (double s : raw_scores) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("posterior_over_candidates: invalid raw score");
    total += s;
  }
  std::vector<double> out(raw_scores.size());
  if (total == 0.0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = raw_scores[i] / total;
  }
  return out;
}

LocationEstimate estimate_location(std::span<const double> posterior, std::span<const Pose2D> poses) {
  if (posterior.empty() || posterior.size() != poses.size())
    throw ValidationError("estimate_location: posterior and candidate counts differ or are empty");
  LocationEstimate out;
  out.top = top_indices(posterior, 3);
  double wsum = 0.0;
  for (auto i : out.top) wsum += posterior[i];
  Eigen::Vector2d pos = Eigen::Vector2d::Zero();
  double s = 0.0;
  double c = 0.0;
  for (auto i : out.top) {
    const double w = wsum > 0.0 ? posterior[i] / wsum : 1.0 / static_cast<double>(out.top.size());
    pos += w * poses[i].position();
    s += w * std::sin(poses[i].theta);
    c += w * std::cos(poses[i].theta);
  }
  out.pose = Pose2D(pos.x(), pos.y(), std::atan2(s, c));
  return out;
}

bool classify_query(double confidence, double tau) { return confidence >= tau; }

LocalizationResult localize(const QueryObservation& prepared, const ProjectedDictionary& pdict,
                            std::span<const PathSample> candidates, const LocalizerOptions& options) {
  options.validate();
  if (candidates.empty()) throw ValidationError("localize: no candidates");
  const Dictionary& dict = pdict.dictionary();
  const std::size_t m = std::min(options.knn_m, dict.size());
  const auto rays = query_rays(prepared, dict.options.grid, dict.options.max_range);

  // Ground retrieval does not depend on the hypothesized pose.
  std::vector<std::vector<NeighborHit>> ground_hits(rays.size());
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto g = pdict.w_ground().apply(prepared.features.pixel(rays[r].pixel.x(), rays[r].pixel.y()));
    ground_hits[r] = pdict.ground_index().knn(g, m, options.search);
  }

  LocalizationResult result;
  result.candidates.resize(candidates.size());
  const int sat_w = dict.georef.image_w;
  parallel_for(candidates.size(), options.threads, [&](std::size_t c) {
    auto& cand = result.candidates[c];
    cand.pose = candidates[c];
    for (std::size_t r = 0; r < rays.size(); ++r) {
      const auto px = ray_pixel(rays[r], cand.pose.pose, dict.georef);
      if (!px) continue;
      const auto col = static_cast<Eigen::Index>(px->v) * sat_w + px->u;
      const auto s_hits = pdict.sat_index().knn(pdict.sat_map().col(col), m, options.search);
      cand.raw_score += cooccurrence_score(ground_hits[r], s_hits);
      ++cand.pair_count;
    }
  });

  std::vector<double> raw(candidates.size());
  std::vector<Pose2D> poses(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    raw[c] = result.candidates[c].raw_score;
    poses[c] = candidates[c].pose;
  }
  const auto posterior = posterior_over_candidates(raw);
  for (std::size_t c = 0; c < candidates.size(); ++c) result.candidates[c].posterior = posterior[c];
  auto est = estimate_location(posterior, poses);
  result.estimate = est.pose;
  result.top = std::move(est.top);

  double conf = 0.0;
  for (auto i : result.top) {
    const auto& cand = result.candidates[i];
    if (cand.pair_count > 0) conf += cand.raw_score / static_cast<double>(cand.pair_count);
  }
  result.confidence = conf / static_cast<double>(result.top.size());
  return result;
}

GroundOnlyLocalizer::GroundOnlyLocalizer(const Dictionary& dict, Projection w_ground)
    : dict_(&dict), w_ground_(std::move(w_ground)) {
  if (w_ground_.input_dim() != dict.ground_dim()) throw ValidationError("ground projection dimension mismatch");
  const Eigen::MatrixXf projected = w_ground_.apply_columns(dict.ground_feats);
  descriptors_ = Eigen::MatrixXf::Zero(projected.rows(), static_cast<Eigen::Index>(dict.images.size()));
  std::vector<double> counts(dict.images.size(), 0.0);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(projected.rows(), descriptors_.cols());
  for (std::size_t i = 0; i < dict.entries.size(); ++i) {
    const auto img = dict.entries[i].source_image;
    sums.col(img) += projected.col(static_cast<Eigen::Index>(i)).cast<double>();
    counts[img] += 1.0;
  }
  has_descriptor_.resize(dict.images.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    has_descriptor_[j] = counts[j] > 0.0;
    if (has_descriptor_[j]) descriptors_.col(static_cast<Eigen::Index>(j)) = (sums.col(j) / counts[j]).cast<float>();
  }
}

LocalizationResult GroundOnlyLocalizer::localize(const QueryObservation& prepared) const {
  const Dictionary& dict = *dict_;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(w_ground_.output_dim());
  const auto rays = query_rays(prepared, dict.options.grid, dict.options.max_range);
  for (const auto& ray : rays)
    sum += w_ground_.apply(prepared.features.pixel(ray.pixel.x(), ray.pixel.y())).template cast<double>();
  const Eigen::VectorXd query = rays.empty() ? sum : Eigen::VectorXd(sum / static_cast<double>(rays.size()));

  LocalizationResult result;
  std::vector<double> inverse(dict.images.size(), 0.0);
  std::vector<Pose2D> poses(dict.images.size());
  for (std::size_t j = 0; j < dict.images.size(); ++j) {
    poses[j] = dict.images[j].pose;
    if (!has_descriptor_[j] || rays.empty()) continue;
    const double d = (descriptors_.col(static_cast<Eigen::Index>(j)).cast<double>() - query).norm();
    inverse[j] = 1.0 / std::max(d, kScoreDistanceFloor);
  }
  const auto posterior = posterior_over_candidates(inverse);
  auto est = estimate_location(posterior, poses);
  result.estimate = est.pose;
  result.top = std::move(est.top);
  result.candidates.resize(poses.size());
  for (std::size_t j = 0; j < poses.size(); ++j) {
    result.candidates[j].pose = {poses[j], PathSample::Source::DatabaseImage, static_cast<int>(j)};
    result.candidates[j].pair_count = rays.size();
    result.candidates[j].raw_score = inverse[j];
    result.candidates[j].posterior = posterior[j];
  }
  double conf = 0.0;
  for (auto i : result.top) conf += inverse[i];
  result.confidence = conf / static_cast<double>(result.top.size());
  return result;
}

}  // namespace xvl
