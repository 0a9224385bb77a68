#include "doctest.h"

#include "xvl/error.hpp"
#include "xvl/localization.hpp"
#include "xvl/pipeline.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <random>

using namespace xvl;

namespace {

std::vector<NeighborHit> hits(std::initializer_list<std::pair<std::uint32_t, double>> list) {
  std::vector<NeighborHit> out;
  for (auto [id, d] : list) out.push_back({id, d});
  return out;
}

// Small noiseless world: identity mixing, queries on candidate poses,
// database images every meter so that candidates coincide with them.
RunConfig noiseless_config() {
  RunConfig c;
  c.synthetic.extent = 120.0;
  c.synthetic.path_length = 30.0;
  c.synthetic.db_spacing = 1.0;
  c.synthetic.noise_sigma = 0.0;
  c.synthetic.identity_mixing = true;
  c.synthetic.queries_on_candidates = true;
  c.synthetic.num_queries = 4;
  c.synthetic.num_outside_queries = 3;
  c.synthetic.outside_clearance = 25.0;
  c.training.max_iter = 2;
  c.finalize();
  return c;
}

const Experiment& noiseless() {
  static const Experiment ex = prepare_experiment(noiseless_config());
  return ex;
}

}  // namespace

TEST_CASE("co-occurrence score hand cases") {
  const auto g = hits({{3, 0.4}, {7, 1.0}});
  const auto s = hits({{3, 0.4}, {9, 0.1}});
  CHECK(cooccurrence_score(g, s) == doctest::Approx(6.25));
  CHECK(cooccurrence_score(hits({{1, 0.5}}), hits({{2, 0.5}})) == 0.0);
  CHECK(cooccurrence_score(hits({{4, 0.0}}), hits({{4, 0.0}})) == doctest::Approx(1e12));
  CHECK(cooccurrence_score(hits({{4, 0.0}}), hits({{4, 0.0}}), 1e-3) == doctest::Approx(1e6));
  CHECK(cooccurrence_score({}, {}) == 0.0);
}

TEST_CASE("co-occurrence score ignores hit order") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(0.01, 3.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<NeighborHit> g, s;
    for (std::uint32_t id = 0; id < 20; ++id) {
      if (rng() % 2) g.push_back({id, d(rng)});
      if (rng() % 2) s.push_back({id, d(rng)});
    }
    const double base = cooccurrence_score(g, s);
    std::shuffle(g.begin(), g.end(), rng);
    std::shuffle(s.begin(), s.end(), rng);
    CHECK(cooccurrence_score(g, s) == base);
  }
}

TEST_CASE("co-occurrence score decreases with distance") {
  for (double dg : {0.1, 0.5, 2.0})
    CHECK(cooccurrence_score(hits({{1, dg}}), hits({{1, 1.0}})) >
          cooccurrence_score(hits({{1, dg * 1.5}}), hits({{1, 1.0}})));
  CHECK(cooccurrence_score(hits({{1, 1.0}, {2, 1.0}}), hits({{1, 1.0}, {2, 1.0}})) >
        cooccurrence_score(hits({{1, 1.0}, {2, 1.0}}), hits({{1, 1.0}, {5, 1.0}})));
}

TEST_CASE("posterior normalization") {
  const auto p = posterior_over_candidates(std::vector<double>{2, 3, 5});
  CHECK(p[0] == doctest::Approx(0.2));
  CHECK(p[1] == doctest::Approx(0.3));
  CHECK(p[2] == doctest::Approx(0.5));
  CHECK(posterior_over_candidates(std::vector<double>{4.0}) == std::vector<double>{1.0});
  const auto u = posterior_over_candidates(std::vector<double>{0, 0, 0, 0});
  for (double x : u) CHECK(x == 0.25);
  CHECK_THROWS_AS(posterior_over_candidates(std::vector<double>{1.0, -1.0}), ValidationError);
  CHECK_THROWS_AS(posterior_over_candidates(std::vector<double>{}), ValidationError);

  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> raw(1 + rng() % 200);
    for (auto& r : raw) r = e(rng) * std::pow(10.0, static_cast<double>(rng() % 24) - 6.0);
    const auto q = posterior_over_candidates(raw);
    CHECK(std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0) <= 1e-9);
  }
}

TEST_CASE("estimate is the weighted mean of the top three") {
  const std::vector<Pose2D> poses{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  const auto est = estimate_location(std::vector<double>{0.5, 0.3, 0.2, 0.0}, poses);
  CHECK(est.pose.x == doctest::Approx(0.7));
  CHECK(est.top == std::vector<std::size_t>{0, 1, 2});

  // Ties go to the lower index.
  const auto tied = estimate_location(std::vector<double>{0.25, 0.25, 0.25, 0.25}, poses);
  CHECK(tied.top == std::vector<std::size_t>{0, 1, 2});
  CHECK(tied.pose.x == doctest::Approx(1.0));

  const std::vector<Pose2D> two{{0, 0, 0}, {4, 2, 0}};
  const auto e2 = estimate_location(std::vector<double>{0.75, 0.25}, two);
  CHECK(e2.top.size() == 2);
  CHECK(e2.pose.x == doctest::Approx(1.0));
  CHECK(e2.pose.y == doctest::Approx(0.5));

  // Headings average on the circle.
  const std::vector<Pose2D> wrap{{0, 0, 3.0}, {0, 0, -3.0}};
  CHECK(std::abs(estimate_location(std::vector<double>{0.5, 0.5}, wrap).pose.theta) == doctest::Approx(std::numbers::pi));
}

TEST_CASE("estimate is equivariant under translation") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 30; ++t) {
    std::vector<Pose2D> poses, moved;
    std::vector<double> w;
    const Eigen::Vector2d shift(u(rng), u(rng));
    for (int i = 0; i < 8; ++i) {
      poses.emplace_back(u(rng), u(rng), u(rng));
      moved.emplace_back(poses.back().x + shift.x(), poses.back().y + shift.y(), poses.back().theta);
      w.push_back(std::abs(u(rng)));
    }
    const auto post = posterior_over_candidates(w);
    const auto a = estimate_location(post, poses);
    const auto b = estimate_location(post, moved);
    CHECK((b.pose.position() - a.pose.position() - shift).norm() < 1e-9);
    CHECK(b.top == a.top);
  }
}

TEST_CASE("inlier classification") {
  CHECK_FALSE(classify_query(0.05, 0.1));
  CHECK(classify_query(0.1, 0.1));
  CHECK(classify_query(0.0, 0.0));
}

TEST_CASE("hypotheses far from the satellite image produce no pairs") {
  const auto& ex = noiseless();
  const Pose2D far(1e5, 1e5, 0.0);
  CHECK(project_query_pairs(ex.queries[0], far, ex.dict, ex.dict.options.grid).empty());
  CHECK_FALSE(project_query_pairs(ex.queries[0], ex.truth[0].pose, ex.dict, ex.dict.options.grid).empty());
}

TEST_CASE("candidates interpolate the database path") {
  const std::vector<Pose2D> path{{0, 0, 0}, {3, 0, 0}};
  const auto c = generate_candidates(path, 1.0);
  REQUIRE(c.size() == 4);
  CHECK(c[0].source == PathSample::Source::DatabaseImage);
  CHECK(c[3].image_index == 1);
}

TEST_CASE("noiseless world: the true candidate wins and outside queries score low") {
  const auto& ex = noiseless();
  const auto cfg = noiseless_config();
  const auto path = ex.world.database_poses();
  const auto results = localize_queries(ex.queries, ex.dict, &ex.learned, Method::Full, path, cfg);
  REQUIRE(results.size() == 7);
  double min_inside = std::numeric_limits<double>::infinity(), max_outside = 0.0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    const auto& r = results[q];
    double total = 0.0;
    for (const auto& c : r.candidates) total += c.posterior;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    if (!ex.truth[q].inside) {
      max_outside = std::max(max_outside, r.confidence);
      continue;
    }
    min_inside = std::min(min_inside, r.confidence);
    CHECK(delta_location(r.estimate, ex.truth[q].pose) <= 0.5);
    std::size_t truth_idx = 0;
    for (std::size_t k = 0; k < r.candidates.size(); ++k)
      if (delta_location(r.candidates[k].pose.pose, ex.truth[q].pose) < 1e-9) truth_idx = k;
    double best = 0.0;
    for (const auto& c : r.candidates) best = std::max(best, c.raw_score);
    CHECK(r.candidates[truth_idx].raw_score == best);
  }
  CHECK(min_inside > max_outside);
}

TEST_CASE("query preparation checks extraction settings") {
  const auto& ex = noiseless();
  const auto& view = ex.world.database[0];
  QueryObservation obs{"q", view.features, view.depth, ex.world.camera, ex.dict.feature_config};
  CHECK_NOTHROW(prepare_query(obs, ex.dict));
  obs.feature_config.semantic_suffix = ".sem.fmap";
  CHECK_THROWS_AS(prepare_query(obs, ex.dict), ValidationError);
  QueryObservation narrow{"q", FeatureMap(view.features.width(), view.features.height(), 1), view.depth,
                          ex.world.camera, ex.dict.feature_config};
  CHECK_THROWS_AS(prepare_query(narrow, ex.dict), ValidationError);
}

TEST_CASE("ground-only baseline ranks an identical image first") {
  const auto& ex = noiseless();
  const GroundOnlyLocalizer go(ex.dict, Projection::identity(ex.dict.ground_dim()));
  for (std::size_t j : {std::size_t{0}, std::size_t{7}, ex.world.database.size() - 1}) {
    const auto& view = ex.world.database[j];
    const auto q = prepare_query({"q", view.features, view.depth, ex.world.camera, ex.dict.feature_config}, ex.dict);
    const auto r = go.localize(q);
    REQUIRE_FALSE(r.top.empty());
    CHECK(r.top[0] == j);
  }
}
