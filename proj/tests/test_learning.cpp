#include "doctest.h"

#include "oracles.hpp"
#include "xvl/error.hpp"
#include "xvl/learning.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

using namespace xvl;
using Md = MatrixX<double>;

namespace {

// 1-D features with explicit locations along a line.
struct Line {
  Md feats;
  Eigen::MatrixXf feats_f;
  std::vector<Eigen::Vector2d> locations;

  Line(std::initializer_list<double> f, std::initializer_list<double> loc) {
    feats.resize(1, static_cast<Eigen::Index>(f.size()));
    Eigen::Index j = 0;
    for (double x : f) feats(0, j++) = x;
    feats_f = feats.cast<float>();
    for (double l : loc) locations.emplace_back(l, 0.0);
  }
};

RankingSample sample(std::uint32_t anchor, std::vector<std::uint32_t> nbhd, const std::vector<Eigen::Vector2d>& loc) {
  RankingSample s;
  s.anchor = anchor;
  s.neighborhood = std::move(nbhd);
  double best = std::numeric_limits<double>::infinity();
  for (auto k : s.neighborhood) {
    const double d = (loc[anchor] - loc[k]).norm();
    if (d < best) {
      best = d;
      s.k_star = k;
    }
  }
  for (auto k : s.neighborhood) s.margins.push_back((loc[anchor] - loc[k]).norm() - best);
  return s;
}

}  // namespace

TEST_CASE("feature distance") {
  Md x(2, 2);
  x << 0, 3, 0, 4;
  CHECK(feature_distance<double>(0, 1, Md::Identity(2, 2), x) == 5.0);
  CHECK(feature_distance<double>(0, 1, 2 * Md::Identity(2, 2), x) == 10.0);
  CHECK(feature_distance<double>(0, 1, Md::Zero(2, 2), x) == 0.0);
  CHECK_THROWS_AS(feature_distance<double>(0, 1, Md::Identity(3, 3), x), ValidationError);
}

TEST_CASE("ranking samples") {
  const Line line({0, 1, 5}, {0, 1, 5});
  const auto samples = build_ranking_samples(line.feats_f, line.locations, 2);
  REQUIRE(samples.size() == 3);
  CHECK(samples[0].neighborhood == std::vector<std::uint32_t>{1, 2});
  CHECK(samples[0].k_star == 1);
  CHECK(samples[0].margins == std::vector<double>{0.0, 4.0});

  const Line same({0, 1, 2, 3}, {7, 7, 7, 7});
  for (const auto& s : build_ranking_samples(same.feats_f, same.locations, 3))
    for (double m : s.margins) CHECK(m == 0.0);

  const auto single = build_ranking_samples(line.feats_f, line.locations, 1);
  CHECK(single[2].neighborhood == std::vector<std::uint32_t>{1});
  CHECK(single[2].k_star == 1);
  CHECK(single[2].margins == std::vector<double>{0.0});

  CHECK_THROWS_AS(build_ranking_samples(line.feats_f, line.locations, 3), ValidationError);
}

TEST_CASE("hinge term hand cases") {
  // f(i,a) = 1, f(i,b) = 2; dL(i,a) = 0.5, dL(i,b) = 3.
  const Line line({0, 1, 2}, {0, 0.5, 3.0});
  const auto s = sample(0, {1, 2}, line.locations);
  CHECK(s.k_star == 1);
  CHECK(s.margins[1] == 2.5);
  const Md id = Md::Identity(1, 1);
  CHECK(hinge_term<double>(s, id, line.feats) == doctest::Approx(1.5));

  const Line far({0, 1, 5}, {0, 0.5, 3.0});
  CHECK(hinge_term<double>(sample(0, {1, 2}, far.locations), id, far.feats) == 0.0);
  CHECK(hinge_term<double>(sample(0, {1}, line.locations), id, line.feats) == 0.0);

  CHECK(location_loss_metric<double>(std::vector{s}, line.locations, id, line.feats) == 0.5);
}

TEST_CASE("location loss metric") {
  const Line line({0, 1, 2, 4}, {0, 3, 1, 2});
  const std::vector<RankingSample> samples{sample(0, {1, 2, 3}, line.locations)};
  // Identity: feature-nearest is index 1 at location 3.
  CHECK(location_loss_metric<double>(samples, line.locations, Md::Identity(1, 1), line.feats) == 3.0);
  // Zero projection: every f ties, so the lowest index (1) wins.
  CHECK(location_loss_metric<double>(samples, line.locations, Md::Zero(1, 1), line.feats) == 3.0);

  const Line ranked({0, 2, 4, 6}, {0, 1, 2, 3});
  const auto rs = build_ranking_samples(ranked.feats_f, ranked.locations, 2);
  double oracle = 0;
  for (const auto& s : rs) oracle += (ranked.locations[s.anchor] - ranked.locations[s.k_star]).norm();
  CHECK(location_loss_metric(ranked.feats_f, ranked.locations, Projection::identity(1), 2) == oracle);
}

TEST_CASE("subgradient is zero when every hinge is inactive") {
  const Line line({0, 2, 4, 6}, {0, 1, 2, 3});
  const auto samples = build_ranking_samples(line.feats_f, line.locations, 3);
  const auto lg = loss_and_subgradient<double>(samples, Md::Identity(1, 1), line.feats);
  CHECK(lg.loss == 0.0);
  CHECK(lg.active == 0);
  CHECK(lg.grad.isZero(0.0));
}

TEST_CASE("analytic subgradient matches central differences") {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> dim(2, 8), out_extra(0, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 10.0);
  int checked = 0, attempts = 0;
  while (checked < 100 && attempts < 10000) {
    ++attempts;
    const int c = dim(rng);
    const int r = std::max(1, c - out_extra(rng));
    const int n = 12;
    Md x(c, n);
    for (auto& v : x.reshaped()) v = normal(rng);
    std::vector<Eigen::Vector2d> loc(n);
    for (auto& l : loc) l = {unit(rng), unit(rng)};
    const auto samples = build_ranking_samples(x.cast<float>(), loc, 5);
    Md w(r, c);
    for (auto& v : w.reshaped()) v = normal(rng);
    const std::vector<RankingSample> one{samples[static_cast<std::size_t>(attempts) % samples.size()]};
    if (!oracle::away_from_kinks(one, w, x, 1e-3)) continue;

    const auto analytic = loss_and_subgradient<double>(one, w, x).grad;
    const auto numeric = oracle::numeric_gradient(one, w, x, 1e-5);
    const double rel = (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
    CHECK(rel < 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("loss is invariant under translation of all features") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Md x(3, 30);
  for (auto& v : x.reshaped()) v = normal(rng);
  std::vector<Eigen::Vector2d> loc(30);
  for (auto& l : loc) l = {10 * normal(rng), 10 * normal(rng)};
  const auto samples = build_ranking_samples(x.cast<float>(), loc, 6);
  Md w(3, 3);
  for (auto& v : w.reshaped()) v = normal(rng);
  const Eigen::Vector3d t(4.0, -2.0, 0.5);
  const Md shifted = x.colwise() + t;
  CHECK(ranking_loss<double>(samples, w, shifted) == doctest::Approx(ranking_loss<double>(samples, w, x)).epsilon(1e-12));
}

TEST_CASE("scaling W scales every feature distance") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  Md x(4, 10), w(3, 4);
  for (auto& v : x.reshaped()) v = normal(rng);
  for (auto& v : w.reshaped()) v = normal(rng);
  for (double c : {0.5, 3.0, 17.0})
    for (int i = 1; i < 10; ++i)
      CHECK(feature_distance<double>(0, i, Md(c * w), x) ==
            doctest::Approx(c * feature_distance<double>(0, i, w, x)).epsilon(1e-12));
}

TEST_CASE("Adam step") {
  AdamState<double> s(1, 1);
  Md g(1, 1);
  g << 1.0;
  const Md step = adam_step(s, g);
  CHECK(s.t == 1);
  CHECK(step(0, 0) == doctest::Approx(1e-3 / (1.0 + 1e-8)).epsilon(1e-12));

  AdamState<double> z(2, 2);
  CHECK(adam_step(z, Md(Md::Zero(2, 2))).isZero(0.0));

  AdamState<double> m(2, 3);
  Md mixed(2, 3);
  mixed << 2.0, -0.1, 0.0, -5.0, 1e-3, 7.0;
  const Md d = adam_step(m, mixed);
  for (Eigen::Index i = 0; i < mixed.size(); ++i) {
    const double gi = mixed.reshaped()(i), di = d.reshaped()(i);
    CHECK((gi > 0) == (di > 0));
    CHECK((gi < 0) == (di < 0));
  }
  CHECK_THROWS_AS(adam_step(m, Md(Md::Zero(3, 2))), ValidationError);
}

TEST_CASE("perfectly ranked data leaves W at the identity") {
  std::vector<Eigen::Vector2d> loc;
  Eigen::MatrixXf f(2, 40);
  for (int i = 0; i < 40; ++i) {
    loc.emplace_back(0.5 * i, 0.0);
    f(0, i) = static_cast<float>(i);
    f(1, i) = 0.0f;
  }
  TrainConfig cfg;
  cfg.neighborhood_size = 5;
  TrainReport rep;
  const auto w = learn_projection(f, loc, cfg, &rep);
  CHECK(w.matrix == Eigen::MatrixXf::Identity(2, 2));
  CHECK(rep.updates == 0);
  CHECK(rep.epoch_losses.front() == 0.0);
  CHECK(rep.converged);
}

TEST_CASE("training suppresses a nuisance dimension") {
  // Channel 0 follows location; channel 1 is large-amplitude noise
  // anti-correlated with position along the line.
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 300;
  Eigen::MatrixXf f(2, n);
  std::vector<Eigen::Vector2d> loc;
  for (int i = 0; i < n; ++i) {
    const double x = 0.5 * i;
    loc.emplace_back(x, 0.0);
    f(0, i) = static_cast<float>(0.02 * x + 0.01 * normal(rng));
    f(1, i) = static_cast<float>(-0.002 * x + 1.0 * normal(rng));
  }
  TrainConfig cfg;
  TrainReport rep;
  const auto w = learn_projection(f, loc, cfg, &rep);
  CHECK(rep.epoch_losses.back() < rep.epoch_losses.front());
  CHECK(rep.final_location_loss <= rep.initial_location_loss);
  CHECK(rep.initial_location_loss == doctest::Approx(location_loss_metric(f, loc, Projection::identity(2), 20)));
  CHECK(rep.final_location_loss == doctest::Approx(location_loss_metric(f, loc, w, 20)));
  const Eigen::Vector2f col_norms = w.matrix.colwise().norm();
  CHECK(col_norms(0) > col_norms(1));
}

TEST_CASE("training configuration and failure modes") {
  TrainConfig cfg;
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  std::mt19937_64 rng(2);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Eigen::MatrixXf f(3, 50);
  for (auto& v : f.reshaped()) v = normal(rng);
  std::vector<Eigen::Vector2d> loc(50);
  for (int i = 0; i < 50; ++i) loc[i] = {normal(rng) * 20.0, normal(rng) * 20.0};
  CHECK_THROWS_AS(learn_projection(f, loc, cfg), ValidationError);

  TrainConfig narrow;
  narrow.output_dim = 2;
  narrow.max_iter = 1;
  CHECK(learn_projection(f, loc, narrow).matrix.rows() == 2);
  narrow.output_dim = 4;
  CHECK_THROWS_AS(learn_projection(f, loc, narrow), ValidationError);

  TrainConfig wild;
  wild.learning_rate = 1e300;
  const Eigen::MatrixXf big = f * 1e30f;
  CHECK_THROWS_WITH_AS(learn_projection(big, loc, wild), doctest::Contains("epoch 1"), std::runtime_error);
}

TEST_CASE("training is deterministic and subsampling is seeded") {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Eigen::MatrixXf f(3, 200);
  for (auto& v : f.reshaped()) v = normal(rng);
  std::vector<Eigen::Vector2d> loc(200);
  for (auto& l : loc) l = {normal(rng) * 20.0, normal(rng) * 20.0};
  TrainConfig cfg;
  cfg.max_iter = 3;
  cfg.max_train_points = 120;
  CHECK(learn_projection(f, loc, cfg).matrix == learn_projection(f, loc, cfg).matrix);
  const auto a = sample_training_subset(200, 120, 7);
  CHECK(a.size() == 120);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  CHECK(a == sample_training_subset(200, 120, 7));
  CHECK(a != sample_training_subset(200, 120, 8));
  CHECK(sample_training_subset(10, 120, 7).size() == 10);
}

TEST_CASE("projection file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "xvl_test_learning";
  std::filesystem::create_directories(dir);
  Projection w{Eigen::MatrixXf::Random(3, 5)};
  save_projection(w, 0xdeadbeef12345678ULL, dir / "w");
  std::uint64_t hash = 0;
  const auto back = load_projection(dir / "w", &hash);
  CHECK(back.matrix == w.matrix);
  CHECK(hash == 0xdeadbeef12345678ULL);

  std::ofstream(dir / "bad") << "NOTPROJ 1 3 5 00\n";
  CHECK_THROWS_AS(load_projection(dir / "bad"), FormatError);
  std::ofstream(dir / "short") << "XVLPROJ 1 3 5 0000000000000000\nabc";
  CHECK_THROWS_AS(load_projection(dir / "short"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("projection apply is consistent between vectors and matrices") {
  std::mt19937 rng(3);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Projection w{Eigen::MatrixXf(4, 6)};
  for (auto& v : w.matrix.reshaped()) v = normal(rng);
  Eigen::MatrixXf x(6, 20);
  for (auto& v : x.reshaped()) v = normal(rng);
  const auto all = w.apply_columns(x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) CHECK(all.col(j) == w.apply(x.col(j)));
  CHECK_THROWS_AS(w.apply(Eigen::VectorXf::Zero(5)), ValidationError);
}
