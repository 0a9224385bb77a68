#include "xvl/learning.hpp"

#include "xvl/error.hpp"
#include "xvl/io.hpp"
#include "xvl/neighbor_index.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

namespace xvl {

Eigen::MatrixXf Projection::apply_columns(const Eigen::MatrixXf& columns) const {
  if (columns.rows() != matrix.cols())
    throw ValidationError("projection expects dimension " + std::to_string(matrix.cols()) + ", got " +
                          std::to_string(columns.rows()));
  Eigen::MatrixXf out(matrix.rows(), columns.cols());
  for (Eigen::Index c = 0; c < columns.cols(); ++c) out.col(c) = apply(columns.col(c));
  return out;
}

Eigen::VectorXf Projection::apply(const Eigen::Ref<const Eigen::VectorXf>& v) const {
  if (v.size() != matrix.cols())
    throw ValidationError("projection expects dimension " + std::to_string(matrix.cols()) + ", got " +
                          std::to_string(v.size()));
  Eigen::VectorXf out(matrix.rows());
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < matrix.cols(); ++k)
      acc += static_cast<double>(matrix(r, k)) * static_cast<double>(v(k));
    out(r) = static_cast<float>(acc);
  }
  return out;
}

void save_projection(const Projection& w, std::uint64_t config_hash, const std::filesystem::path& path) {
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016" PRIx64, config_hash);
  const std::string header = "XVLPROJ 1 " + std::to_string(w.matrix.rows()) + " " +
                             std::to_string(w.matrix.cols()) + " " + hash + "\n";
  io::ByteWriter out;
  out.bytes({reinterpret_cast<const std::uint8_t*>(header.data()), header.size()});
  for (Eigen::Index r = 0; r < w.matrix.rows(); ++r)
    for (Eigen::Index c = 0; c < w.matrix.cols(); ++c) out.f32(w.matrix(r, c));
  io::write_file(path, out.data());
}

Projection load_projection(const std::filesystem::path& path, std::uint64_t* config_hash) {
  const auto bytes = io::read_file(path);
  const auto newline = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
  if (newline == bytes.end()) throw FormatError(path.string() + ": missing projection header line", 0);
  std::istringstream header(std::string(bytes.begin(), newline));
  std::string magic, hash_hex;
  int version = 0;
  long rows = 0, cols = 0;
  header >> magic >> version >> rows >> cols >> hash_hex;
  if (magic != "XVLPROJ") throw FormatError(path.string() + ": not a projection file", 0);
  if (version != 1) throw FormatError(path.string() + ": unsupported projection version", 8);
  if (!header || rows <= 0 || cols <= 0) throw FormatError(path.string() + ": malformed projection header", 0);
  const auto header_len = static_cast<std::size_t>(newline - bytes.begin()) + 1;
  io::ByteReader r(std::span<const std::uint8_t>(bytes).subspan(header_len));
  const auto expected = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 4;
  if (r.remaining() != expected)
    throw FormatError(path.string() + ": projection payload size mismatch: expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(r.remaining()),
                      header_len);
  Projection p{Eigen::MatrixXf(rows, cols)};
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) p.matrix(i, j) = r.f32();
  if (!p.matrix.allFinite()) throw FormatError(path.string() + ": non-finite projection entries", header_len);
  if (config_hash) *config_hash = std::stoull(hash_hex, nullptr, 16);
  return p;
}

std::vector<RankingSample> build_ranking_samples(const Eigen::MatrixXf& feats,
                                                 std::span<const Eigen::Vector2d> locations,
                                                 std::size_t neighborhood_size) {
  const auto n = static_cast<std::size_t>(feats.cols());
  if (locations.size() != n) throw ValidationError("build_ranking_samples: feature/location count mismatch");
  if (neighborhood_size < 1) throw ValidationError("build_ranking_samples: neighborhood size must be >= 1");
  if (n < neighborhood_size + 1)
    throw ValidationError("build_ranking_samples: need at least " + std::to_string(neighborhood_size + 1) +
                          " points, got " + std::to_string(n));

  std::vector<std::uint32_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  const auto index = NeighborIndex::build(ids, feats);

  std::vector<RankingSample> out(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& s = out[i];
    s.anchor = i;
    for (const auto& hit : index.knn(feats.col(i), neighborhood_size + 1)) {
      if (hit.id != i && s.neighborhood.size() < neighborhood_size) s.neighborhood.push_back(hit.id);
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> dl;
    for (auto k : s.neighborhood) {
      const double d = (locations[i] - locations[k]).norm();
      dl.push_back(d);
      if (d < best || (d == best && k < s.k_star)) {
        best = d;
        s.k_star = k;
      }
    }
    for (double d : dl) s.margins.push_back(d - best);
  }
  return out;
}

void TrainConfig::validate() const {
  if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
  if (neighborhood_size < 1) throw ValidationError("neighborhood_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("Adam betas must be in [0,1)");
  if (!(epsilon > 0.0)) throw ValidationError("Adam epsilon must be positive");
  if (!(tolerance >= 0.0)) throw ValidationError("tolerance must be non-negative");
  if (output_dim < 0) throw ValidationError("output_dim must be >= 0");
  if (max_train_points < neighborhood_size + 1) throw ValidationError("max_train_points must exceed neighborhood_size");
}

std::vector<std::uint32_t> sample_training_subset(std::size_t n, std::size_t limit, std::uint64_t seed) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  if (n <= limit) return idx;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Projection learn_projection(const Eigen::MatrixXf& feats, std::span<const Eigen::Vector2d> locations,
                            const TrainConfig& config, TrainReport* report) {
  config.validate();
  if (static_cast<std::size_t>(feats.cols()) != locations.size())
    throw ValidationError("learn_projection: feature/location count mismatch");
  const int in_dim = static_cast<int>(feats.rows());
  const int out_dim = config.output_dim == 0 ? in_dim : config.output_dim;
  if (out_dim > in_dim) throw ValidationError("learn_projection: output_dim exceeds feature dimension");

  const auto subset = sample_training_subset(static_cast<std::size_t>(feats.cols()), config.max_train_points, config.seed);
  Eigen::MatrixXf train_f(feats.rows(), static_cast<Eigen::Index>(subset.size()));
  std::vector<Eigen::Vector2d> train_loc(subset.size());
  for (std::size_t j = 0; j < subset.size(); ++j) {
    train_f.col(static_cast<Eigen::Index>(j)) = feats.col(subset[j]);
    train_loc[j] = locations[subset[j]];
  }
  const auto samples = build_ranking_samples(train_f, train_loc, config.neighborhood_size);
  const MatrixX<double> x = train_f.cast<double>();

  MatrixX<double> w = MatrixX<double>::Identity(out_dim, in_dim);
  AdamState<double> adam(out_dim, in_dim);
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.epsilon = config.epsilon;
  adam.learning_rate = config.learning_rate;

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = {};
  double loss = ranking_loss<double>(samples, w, x);
  rep.epoch_losses.push_back(loss);
  rep.initial_location_loss = location_loss_metric<double>(samples, train_loc, w, x);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  MatrixX<double> grad(out_dim, in_dim);

  for (std::size_t epoch = 1; epoch <= config.max_iter && loss > 0.0; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      grad.setZero();
      if (accumulate_subgradient<double>(samples[i], w, x, grad) > 0.0) {
        w -= adam_step(adam, grad);
        ++rep.updates;
      }
    }
    const double next = ranking_loss<double>(samples, w, x);
    if (!std::isfinite(next) || !w.allFinite())
      throw std::runtime_error("learn_projection: loss diverged at epoch " + std::to_string(epoch));
    rep.epoch_losses.push_back(next);
    const double change = std::abs(loss - next) / std::max(loss, std::numeric_limits<double>::min());
    loss = next;
    if (change < config.tolerance) {
      rep.converged = true;
      break;
    }
  }
  if (loss == 0.0) rep.converged = true;

  Projection out{w.cast<float>()};
  rep.final_location_loss = location_loss_metric<double>(samples, train_loc, out.matrix.cast<double>(), x);
  return out;
}

double location_loss_metric(const Eigen::MatrixXf& feats, std::span<const Eigen::Vector2d> locations,
                            const Projection& w, std::size_t neighborhood_size) {
  const auto samples = build_ranking_samples(feats, locations, neighborhood_size);
  return location_loss_metric<double>(samples, locations, w.matrix.cast<double>(), feats.cast<double>());
}

}  // namespace xvl
