#pragma once

#include "xvl/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace xvl {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Linear map applied to feature vectors: C' x C.
struct Projection {
  Eigen::MatrixXf matrix;

  static Projection identity(int dim) { return {Eigen::MatrixXf::Identity(dim, dim)}; }

  int input_dim() const { return static_cast<int>(matrix.cols()); }
  int output_dim() const { return static_cast<int>(matrix.rows()); }

  /// Projects each column. Accumulates in double with a fixed summation
  /// order, so a vector and the same vector inside a matrix map to identical
  /// floats.
  Eigen::MatrixXf apply_columns(const Eigen::MatrixXf& columns) const;
  Eigen::VectorXf apply(const Eigen::Ref<const Eigen::VectorXf>& v) const;
};

/// Text header line `XVLPROJ 1 <rows> <cols> <config-hash-hex>` followed by
/// the row-major float32 little-endian matrix.
void save_projection(const Projection& w, std::uint64_t config_hash, const std::filesystem::path& path);
Projection load_projection(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

/// One ranking constraint set: the anchor, its feature-space neighborhood,
/// the location-nearest member k_star and per-neighbor margins
/// dL(i,k) - dL(i,k_star).
struct RankingSample {
  std::uint32_t anchor = 0;
  std::vector<std::uint32_t> neighborhood;
  std::uint32_t k_star = 0;
  std::vector<double> margins;
};

/// Neighborhoods are the `neighborhood_size` nearest features under the
/// identity projection, excluding the anchor. `feats` has one column per point.
std::vector<RankingSample> build_ranking_samples(const Eigen::MatrixXf& feats,
                                                 std::span<const Eigen::Vector2d> locations,
                                                 std::size_t neighborhood_size);

/// || W (x_i - x_k) ||.
template <typename Scalar>
Scalar feature_distance(Eigen::Index i, Eigen::Index k, const MatrixX<Scalar>& w, const MatrixX<Scalar>& feats) {
  if (w.cols() != feats.rows()) throw ValidationError("feature_distance: projection/feature dimension mismatch");
  return (w * (feats.col(i) - feats.col(k))).norm();
}

namespace detail {

template <typename Scalar>
struct HingeEval {
  Scalar term = 0;
  std::uint32_t k_hat = 0;  // argmin of f - m
};

template <typename Scalar>
HingeEval<Scalar> evaluate_hinge(const RankingSample& s, const MatrixX<Scalar>& w, const MatrixX<Scalar>& feats) {
  Scalar f_star = 0;
  Scalar inner = std::numeric_limits<Scalar>::infinity();
  std::uint32_t k_hat = s.neighborhood.front();
  for (std::size_t j = 0; j < s.neighborhood.size(); ++j) {
    const auto k = s.neighborhood[j];
    const Scalar f = feature_distance<Scalar>(s.anchor, k, w, feats);
    if (k == s.k_star) f_star = f;
    const Scalar adjusted = f - static_cast<Scalar>(s.margins[j]);
    if (adjusted < inner || (adjusted == inner && k < k_hat)) {
      inner = adjusted;
      k_hat = k;
    }
  }
  return {std::max<Scalar>(0, f_star - inner), k_hat};
}

// d||W d|| / dW = (W d) d^T / ||W d||; zero at ||W d|| = 0.
template <typename Scalar>
void add_distance_gradient(Eigen::Index i, Eigen::Index k, Scalar sign, const MatrixX<Scalar>& w,
                           const MatrixX<Scalar>& feats, MatrixX<Scalar>& grad) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> d = feats.col(i) - feats.col(k);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> wd = w * d;
  const Scalar f = wd.norm();
  if (f > 0) grad.noalias() += (sign / f) * wd * d.transpose();
}

}  // namespace detail

/// (f(i,k*,W) - min_k (f(i,k,W) - m(i,k)))_+
template <typename Scalar>
Scalar hinge_term(const RankingSample& s, const MatrixX<Scalar>& w, const MatrixX<Scalar>& feats) {
  return detail::evaluate_hinge(s, w, feats).term;
}

/// Adds this sample's subgradient into `grad` when its hinge is active and
/// returns the hinge value. The minimizer is taken over f - m; since m does
/// not depend on W the differentiated expression is f(i,k*) - f(i,k_hat).
template <typename Scalar>
Scalar accumulate_subgradient(const RankingSample& s, const MatrixX<Scalar>& w, const MatrixX<Scalar>& feats,
                              MatrixX<Scalar>& grad) {
  const auto h = detail::evaluate_hinge(s, w, feats);
  if (h.term > 0) {
    detail::add_distance_gradient<Scalar>(s.anchor, s.k_star, Scalar(1), w, feats, grad);
    detail::add_distance_gradient<Scalar>(s.anchor, h.k_hat, Scalar(-1), w, feats, grad);
  }
  return h.term;
}

template <typename Scalar>
struct LossAndGradient {
  Scalar loss = 0;
  MatrixX<Scalar> grad;
  std::size_t active = 0;
};

/// Full ranking loss and its subgradient, summed in sample order.
template <typename Scalar>
LossAndGradient<Scalar> loss_and_subgradient(std::span<const RankingSample> samples, const MatrixX<Scalar>& w,
                                             const MatrixX<Scalar>& feats) {
  LossAndGradient<Scalar> out;
  out.grad = MatrixX<Scalar>::Zero(w.rows(), w.cols());
  for (const auto& s : samples) {
    const Scalar term = accumulate_subgradient(s, w, feats, out.grad);
    out.loss += term;
    if (term > 0) ++out.active;
  }
  return out;
}

template <typename Scalar>
Scalar ranking_loss(std::span<const RankingSample> samples, const MatrixX<Scalar>& w, const MatrixX<Scalar>& feats) {
  Scalar loss = 0;
  for (const auto& s : samples) loss += hinge_term(s, w, feats);
  return loss;
}

/// Bias-corrected Adam moments for one parameter matrix.
template <typename Scalar>
struct AdamState {
  std::size_t t = 0;
  MatrixX<Scalar> first_moment;
  MatrixX<Scalar> second_moment;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  Scalar learning_rate = Scalar(1e-3);

  AdamState() = default;
  AdamState(Eigen::Index rows, Eigen::Index cols)
      : first_moment(MatrixX<Scalar>::Zero(rows, cols)), second_moment(MatrixX<Scalar>::Zero(rows, cols)) {}
};

/// Advances the moments and returns the step dW to subtract from W.
template <typename Scalar>
MatrixX<Scalar> adam_step(AdamState<Scalar>& state, const MatrixX<Scalar>& grad) {
  if (grad.rows() != state.first_moment.rows() || grad.cols() != state.first_moment.cols())
    throw ValidationError("adam_step: gradient shape does not match state");
  ++state.t;
  state.first_moment = state.beta1 * state.first_moment + (Scalar(1) - state.beta1) * grad;
  state.second_moment = state.beta2 * state.second_moment + (Scalar(1) - state.beta2) * grad.cwiseAbs2();
  const auto t = static_cast<Scalar>(state.t);
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, t);
  return (state.learning_rate * (state.first_moment / c1).array() /
          ((state.second_moment / c2).array().sqrt() + state.epsilon))
      .matrix();
}

struct TrainConfig {
  std::size_t max_iter = 50;
  std::size_t neighborhood_size = 20;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  int output_dim = 0;  // 0: square
  std::size_t max_train_points = 20000;

  void validate() const;
};

struct TrainReport {
  /// epoch_losses[0] is the loss of the initial W; entry e is after epoch e.
  std::vector<double> epoch_losses;
  std::size_t updates = 0;
  bool converged = false;
  double initial_location_loss = 0.0;
  double final_location_loss = 0.0;
};

/// Per-sample subgradient descent with Adam on the ranking hinge loss,
/// starting from the (truncated) identity. Samples are visited in a seeded
/// shuffle each epoch; stops when the relative change in epoch loss drops
/// below the tolerance or after max_iter epochs. Throws std::runtime_error
/// if the loss becomes non-finite.
Projection learn_projection(const Eigen::MatrixXf& feats, std::span<const Eigen::Vector2d> locations,
                            const TrainConfig& config, TrainReport* report = nullptr);

/// Sum over anchors of the location distance to the feature-space nearest
/// neighbor within N(i) under W (ties to the lowest index).
template <typename Scalar>
Scalar location_loss_metric(std::span<const RankingSample> samples, std::span<const Eigen::Vector2d> locations,
                            const MatrixX<Scalar>& w, const MatrixX<Scalar>& feats) {
  Scalar total = 0;
  for (const auto& s : samples) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    std::uint32_t best_k = 0;
    for (auto k : s.neighborhood) {
      const Scalar f = feature_distance<Scalar>(s.anchor, k, w, feats);
      if (f < best || (f == best && k < best_k)) {
        best = f;
        best_k = k;
      }
    }
    total += static_cast<Scalar>((locations[s.anchor] - locations[best_k]).norm());
  }
  return total;
}

double location_loss_metric(const Eigen::MatrixXf& feats, std::span<const Eigen::Vector2d> locations,
                            const Projection& w, std::size_t neighborhood_size);

/// Seeded uniform subset of [0, n) of size min(n, limit), ascending.
std::vector<std::uint32_t> sample_training_subset(std::size_t n, std::size_t limit, std::uint64_t seed);

}  // namespace xvl
