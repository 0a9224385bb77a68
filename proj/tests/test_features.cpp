#include "doctest.h"

#include "xvl/error.hpp"
#include "xvl/features.hpp"
#include "xvl/image.hpp"
#include "xvl/io.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

using namespace xvl;
namespace fs = std::filesystem;

namespace {

RgbImage gray(int w, int h, std::uint8_t level) {
  RgbImage img(w, h);
  std::fill(img.pixels.begin(), img.pixels.end(), level);
  return img;
}

RgbImage vertical_step(int w, int h, int edge) {
  RgbImage img(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = edge; u < w; ++u)
      for (int c = 0; c < 3; ++c) img.at(u, v, c) = 255;
  return img;
}

RgbImage rotate90(const RgbImage& in) {
  RgbImage out(in.height, in.width);
  for (int v = 0; v < in.height; ++v)
    for (int u = 0; u < in.width; ++u)
      for (int c = 0; c < 3; ++c) out.at(in.height - 1 - v, u, c) = in.at(u, v, c);
  return out;
}

FeatureMap counting_map(int w, int h, int c) {
  FeatureMap m(w, h, c);
  for (std::size_t i = 0; i < m.data().size(); ++i) m.data()[i] = static_cast<float>(i);
  return m;
}

}  // namespace

TEST_CASE("FeatureMap validates dimensions") {
  CHECK_THROWS_AS(FeatureMap(0, 3, 1), ValidationError);
  CHECK_THROWS_AS(FeatureMap(2, 2, 1, std::vector<float>(3)), ValidationError);
  FeatureMap m(3, 2, 4);
  m.at(2, 1, 3) = 7.0f;
  CHECK(m.pixel(2, 1)(3) == 7.0f);
  CHECK(m.data().size() == 24);
}

TEST_CASE("smoothed color of a constant image is the constant") {
  const auto f = extract_smoothed_color(gray(17, 11, 128));
  CHECK(f.channels() == 3);
  for (float x : f.data()) CHECK(x == doctest::Approx(128.0 / 255.0).epsilon(1e-6));
  CHECK(128.0f / 255.0f == doctest::Approx(0.502).epsilon(1e-3));
}

TEST_CASE("smoothed color preserves a step edge") {
  const int edge = 16;
  const auto f = extract_smoothed_color(vertical_step(32, 9, edge));
  for (int v = 0; v < f.height(); ++v) {
    int transition = 0;
    for (int u = 0; u < f.width(); ++u) {
      const float x = f.at(u, v, 0);
      if (x > 0.1f && x < 0.9f) ++transition;
    }
    CHECK(transition <= 2);
    CHECK(f.at(edge - 1, v, 0) < 0.5f);
    CHECK(f.at(edge, v, 0) > 0.5f);
    CHECK(f.at(edge, v, 1) - f.at(edge - 1, v, 1) >= 0.8f);
  }
}

TEST_CASE("1x1 image maps to its scaled value") {
  RgbImage img(1, 1);
  img.at(0, 0, 0) = 10;
  img.at(0, 0, 1) = 200;
  img.at(0, 0, 2) = 255;
  const auto f = extract_smoothed_color(img);
  CHECK(f.at(0, 0, 0) == doctest::Approx(10.0 / 255.0));
  CHECK(f.at(0, 0, 1) == doctest::Approx(200.0 / 255.0));
  CHECK(f.at(0, 0, 2) == doctest::Approx(1.0));
  CHECK(extract_edge_magnitude(img).at(0, 0, 0) == 0.0f);
}

TEST_CASE("extractors reject empty images") {
  CHECK_THROWS_AS(extract_smoothed_color(RgbImage()), ValidationError);
  CHECK_THROWS_AS(extract_edge_magnitude(RgbImage()), ValidationError);
}

TEST_CASE("edge magnitude") {
  const auto flat = extract_edge_magnitude(gray(9, 9, 77));
  for (float x : flat.data()) CHECK(x == 0.0f);

  const auto e = extract_edge_magnitude(vertical_step(20, 6, 10));
  for (int v = 0; v < e.height(); ++v) {
    float best = 0.0f;
    for (int u = 0; u < e.width(); ++u) best = std::max(best, e.at(u, v, 0));
    CHECK(best > 0.0f);
    CHECK(e.at(9, v, 0) == best);
    CHECK(e.at(10, v, 0) == best);
    CHECK(e.at(3, v, 0) == 0.0f);
  }
}

TEST_CASE("edge response of a diagonal edge is invariant under 90 degree rotation") {
  RgbImage img(40, 40);
  for (int v = 0; v < 40; ++v)
    for (int u = 0; u < 40; ++u)
      for (int c = 0; c < 3; ++c) img.at(u, v, c) = u + v > 40 ? 230 : 20;
  const auto a = extract_edge_magnitude(img);
  const auto b = extract_edge_magnitude(rotate90(img));
  double sa = 0.0, sb = 0.0;
  for (float x : a.data()) sa += x;
  for (float x : b.data()) sb += x;
  CHECK(sa > 0.0);
  CHECK(std::abs(sa - sb) <= 0.05 * sa);
}

TEST_CASE("extractor outputs stay finite and in range for random inputs") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> byte(0, 255), dim(1, 24);
  for (int trial = 0; trial < 50; ++trial) {
    RgbImage img(dim(rng), dim(rng));
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(rng));
    for (const auto& f : {extract_smoothed_color(img), extract_edge_magnitude(img)})
      for (float x : f.data()) {
        CHECK(std::isfinite(x));
        CHECK(x >= 0.0f);
        CHECK(x <= 1.0f);
      }
  }
}

TEST_CASE("FMAP layout of a 2x2x1 map") {
  FeatureMap m(2, 2, 1, {0.0f, 1.0f, 2.0f, 3.0f});
  const auto bytes = encode_feature_map(m);
  CHECK(kFmapHeaderBytes == 20);
  REQUIRE(bytes.size() == 20 + 16);
  CHECK(std::memcmp(bytes.data(), "FMAP", 4) == 0);
  io::ByteReader r(bytes);
  r.bytes(4);
  CHECK(r.u32() == 1);
  CHECK(r.u32() == 2);
  CHECK(r.u32() == 2);
  CHECK(r.u32() == 1);
  for (int i = 0; i < 4; ++i) CHECK(r.f32() == static_cast<float>(i));
  CHECK(decode_feature_map(bytes) == m);
}

TEST_CASE("FMAP errors carry offsets") {
  const auto good = encode_feature_map(FeatureMap(2, 2, 1, {0.0f, 1.0f, 2.0f, 3.0f}));

  auto truncated = good;
  truncated.resize(truncated.size() - 4);
  try {
    decode_feature_map(truncated);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("expected 16 bytes, got 12") != std::string::npos);
    CHECK(e.offset() == 20);
  }

  auto magic = good;
  magic[0] = 'X';
  try {
    decode_feature_map(magic);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }

  auto version = good;
  version[4] = 2;
  try {
    decode_feature_map(version);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 4);
  }

  auto nan = good;
  const float q = std::nanf("");
  std::memcpy(nan.data() + 24, &q, 4);
  CHECK_THROWS_AS(decode_feature_map(nan), FormatError);
  CHECK_THROWS_AS(decode_feature_map(std::span<const std::uint8_t>(good.data(), 10)), FormatError);
}

TEST_CASE("FMAP file round trip is bit exact") {
  const auto dir = fs::temp_directory_path() / "xvl_test_features";
  fs::create_directories(dir);
  std::mt19937 rng(9);
  std::normal_distribution<float> n(0.0f, 1e3f);
  FeatureMap m(7, 5, 3);
  for (auto& x : m.data()) x = n(rng);
  m.at(0, 0, 0) = -0.0f;
  m.at(1, 0, 0) = std::numeric_limits<float>::denorm_min();
  save_feature_map(m, dir / "m.fmap");
  const auto back = load_feature_map(dir / "m.fmap");
  CHECK(std::memcmp(back.data().data(), m.data().data(), m.data().size_bytes()) == 0);
  save_feature_map(back, dir / "m2.fmap");
  CHECK(io::read_file(dir / "m.fmap") == io::read_file(dir / "m2.fmap"));
  fs::remove_all(dir);
}

TEST_CASE("checked-in exporter fixture loads and round trips") {
  const fs::path fixture = fs::path(XVL_TEST_DATA_DIR) / "scores_8x8.fmap";
  const auto bytes = io::read_file(fixture);
  const auto m = load_feature_map(fixture);
  CHECK(m.width() == 8);
  CHECK(m.height() == 8);
  CHECK(m.channels() == 21);
  CHECK(encode_feature_map(m) == bytes);
}

TEST_CASE("stack_feature_maps concatenates channels in order") {
  const auto a = counting_map(4, 4, 3);
  const auto b = counting_map(4, 4, 1);
  const auto c = counting_map(4, 4, 21);
  const auto s = stack_feature_maps({a, b, c});
  CHECK(s.channels() == 25);
  CHECK(s.data().size() == 4 * 4 * 25);
  CHECK(s.at(2, 3, 0) == a.at(2, 3, 0));
  CHECK(s.at(2, 3, 3) == b.at(2, 3, 0));
  CHECK(s.at(2, 3, 24) == c.at(2, 3, 20));
  CHECK(stack_feature_maps({a}) == a);
  CHECK(stack_feature_maps({a, b}).data().size() == 4 * 4 * 4);
  CHECK_THROWS_AS(stack_feature_maps({a, counting_map(5, 4, 1)}), ValidationError);
}

TEST_CASE("grid sampling") {
  const auto m = counting_map(100, 80, 2);
  const auto s = sample_grid(m, {16, 8});
  REQUIRE(s.size() == 30);
  const int us[] = {8, 24, 40, 56, 72, 88};
  const int vs[] = {8, 24, 40, 56, 72};
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 6; ++i) {
      const auto& g = s[static_cast<std::size_t>(j * 6 + i)];
      CHECK(g.u == us[i]);
      CHECK(g.v == vs[j]);
      CHECK(g.feature == m.pixel(g.u, g.v));
    }
  CHECK(sample_grid(counting_map(10, 10, 1), {50, 3}).size() <= 1);
  CHECK(sample_grid(counting_map(9, 7, 1), {1, 0}).size() == 63);

  const auto pos = grid_positions(100, 80, {16, 8});
  REQUIRE(pos.size() == s.size());
  for (std::size_t i = 0; i < pos.size(); ++i) CHECK((pos[i] == Eigen::Vector2i(s[i].u, s[i].v)));
  CHECK_THROWS_AS((GridSpec{0, 1}.validate()), ValidationError);
}

TEST_CASE("channel standardization") {
  Eigen::MatrixXf x(2, 4);
  x << 1, 2, 3, 4, 5, 5, 5, 5;
  const auto st = ChannelStats::fit(x);
  CHECK(st.mean(0) == doctest::Approx(2.5));
  CHECK(st.scale(0) == doctest::Approx(std::sqrt(1.25)));
  CHECK(st.scale(1) == 1.0);
  FeatureVector v = x.col(3);
  st.apply(v);
  CHECK(v(0) == doctest::Approx(1.5 / std::sqrt(1.25)));
  CHECK(v(1) == 0.0f);
}

TEST_CASE("feature config text round trip") {
  FeatureConfig c;
  c.source = "precomputed";
  c.semantic_suffix = ".sem.fmap";
  Eigen::MatrixXf x = Eigen::MatrixXf::Random(3, 10);
  c.ground_stats = ChannelStats::fit(x);
  c.sat_stats = ChannelStats::fit(2 * x);
  const auto back = FeatureConfig::from_text(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.same_extraction(c));
  FeatureConfig other = c;
  other.standardize = false;
  CHECK_FALSE(other.same_extraction(c));
  other = c;
  other.source = "neural";
  CHECK_THROWS_AS(other.validate(), ValidationError);
}

TEST_CASE("builtin features from a PPM with a stacked semantic map") {
  const auto dir = fs::temp_directory_path() / "xvl_test_features_ppm";
  fs::create_directories(dir);
  const auto img = vertical_step(12, 6, 5);
  save_ppm(img, dir / "view.ppm");
  const auto loaded = load_image(dir / "view.ppm");
  CHECK(loaded.pixels == img.pixels);
  save_feature_map(counting_map(12, 6, 2), dir / "view.sem.fmap");

  FeatureConfig cfg;
  cfg.semantic_suffix = ".sem.fmap";
  const auto f = load_view_features(dir / "view", cfg);
  CHECK(f.channels() == 3 + 1 + 2);
  CHECK(f.at(11, 5, 0) == doctest::Approx(1.0));
  CHECK(f.at(11, 5, 5) == counting_map(12, 6, 2).at(11, 5, 1));
  fs::remove_all(dir);
}
