#include "doctest.h"

#include "canoncorr/error.hpp"
#include "canoncorr/features.hpp"
#include "canoncorr/matching.hpp"

#include <cmath>
#include <random>

using namespace canoncorr;

namespace {

FeatureGrid random_grid(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                        std::size_t dim, int w, int h) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureGrid g(rows, cols, dim, w, h);
  for (auto& v : g.data) v = n(rng);
  return g;
}

// Bilinear interpolation written against the stated convention only:
// grid coordinate = (pixel + 0.5)·(grid / image) − 0.5, clamped to the
// outermost cell centres.
std::vector<double> bilinear_oracle(const FeatureGrid& g, Pixel px) {
  double gx = (px.x + 0.5) * static_cast<double>(g.cols) / g.image_width - 0.5;
  double gy = (px.y + 0.5) * static_cast<double>(g.rows) / g.image_height - 0.5;
  gx = std::clamp(gx, 0.0, static_cast<double>(g.cols - 1));
  gy = std::clamp(gy, 0.0, static_cast<double>(g.rows - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(gx));
  const auto y0 = static_cast<std::size_t>(std::floor(gy));
  const std::size_t x1 = std::min(x0 + 1, g.cols - 1), y1 = std::min(y0 + 1, g.rows - 1);
  const double fx = gx - x0, fy = gy - y0;
  std::vector<double> out(g.dim);
  for (std::size_t d = 0; d < g.dim; ++d) {
    out[d] = (1 - fx) * (1 - fy) * g.cell(y0, x0)[d] + fx * (1 - fy) * g.cell(y0, x1)[d] +
             (1 - fx) * fy * g.cell(y1, x0)[d] + fx * fy * g.cell(y1, x1)[d];
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("cell centres follow the pixel convention") {
  FeatureGrid g(4, 8, 1, 32, 16);
  const Pixel c = g.cell_center(1, 2);
  CHECK(c.x == doctest::Approx((2 + 0.5) * 4 - 0.5));
  CHECK(c.y == doctest::Approx((1 + 0.5) * 4 - 0.5));
}

TEST_CASE("extract_descriptor at cell centres and midpoints") {
  std::mt19937_64 rng(1);
  const auto g = random_grid(rng, 6, 6, 5, 24, 24);
  const auto head = ProjectionHead::create(5, 3, 0, 9);
  const auto proj = head.apply(g);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      const auto d = extract_descriptor(g, head, g.cell_center(r, c));
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(d[k] == doctest::Approx(proj.cell(r, c)[k]).epsilon(1e-12));
      }
    }
  }
  const Pixel a = g.cell_center(2, 1), b = g.cell_center(2, 2);
  const auto mid = extract_descriptor(g, head, {(a.x + b.x) / 2, a.y});
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(mid[k] == doctest::Approx((proj.cell(2, 1)[k] + proj.cell(2, 2)[k]) / 2).epsilon(1e-12));
  }
  CHECK_THROWS_AS(extract_descriptor(g, head, {-0.6, 3.0}), Error);
  CHECK_THROWS_AS(extract_descriptor(g, head, {3.0, 23.6}), Error);
  CHECK_NOTHROW(extract_descriptor(g, head, {-0.5, 23.5}));
}

TEST_CASE("bilinear sampling agrees with an independent oracle") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const std::size_t rows = 2 + rng() % 10, cols = 2 + rng() % 10;
    const int w = static_cast<int>(cols * (1 + rng() % 4)), h = static_cast<int>(rows * (1 + rng() % 4));
    const auto g = random_grid(rng, rows, cols, 3, w, h);
    for (int q = 0; q < 50; ++q) {
      const Pixel px{-0.5 + u(rng) * w, -0.5 + u(rng) * h};
      const auto got = g.sample(px);
      const auto want = bilinear_oracle(g, px);
      for (std::size_t d = 0; d < 3; ++d) CHECK(std::abs(got[d] - want[d]) < 1e-12);
    }
  }
}

TEST_CASE("match_nn fixtures") {
  FeatureGrid g(4, 5, 3, 20, 16);
  SUBCASE("exact copy in one cell, orthogonal elsewhere") {
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 5; ++c) g.cell(r, c)[1] = 1.0;
    }
    g.cell(2, 3)[0] = 2.0;
    g.cell(2, 3)[1] = 0.0;
    const std::vector<double> q{1.0, 0.0, 0.0};
    const auto m = match_nn(q, g);
    CHECK(m.row == 2);
    CHECK(m.col == 3);
    CHECK(m.peak == doctest::Approx(1.0));
    CHECK(m.px == g.cell_center(2, 3));
    CHECK(m.method == MatchMethod::Nn);
  }
  SUBCASE("ties go to the first cell in row-major order") {
    for (auto& v : g.data) v = 0.5;
    const auto m = match_nn(std::vector<double>{1.0, 2.0, 3.0}, g);
    CHECK(m.row == 0);
    CHECK(m.col == 0);
  }
  SUBCASE("zero-norm query") {
    try {
      match_nn(std::vector<double>{0.0, 0.0, 0.0}, g);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UndefinedSimilarity);
    }
  }
}

TEST_CASE("match_nn equals brute force on random grids") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const auto g = random_grid(rng, 16, 16, 6, 64, 64);
    std::vector<double> q(6);
    for (auto& v : q) v = n(rng);
    std::size_t br = 0, bc = 0;
    double best = -2.0;
    for (std::size_t r = 0; r < 16; ++r) {
      for (std::size_t c = 0; c < 16; ++c) {
        const double s = cosine(q, g.cell(r, c));
        if (s > best) {
          best = s;
          br = r;
          bc = c;
        }
      }
    }
    const auto m = match_nn(q, g);
    CHECK(m.row == br);
    CHECK(m.col == bc);
  }
}

TEST_CASE("similarity maps are bounded and scale invariant") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto g = random_grid(rng, 8, 8, 4, 32, 32);
  std::vector<double> q(4), q7(4);
  for (std::size_t i = 0; i < 4; ++i) {
    q[i] = n(rng);
    q7[i] = 7.0 * q[i];
  }
  auto g7 = g;
  for (auto& v : g7.data) v *= 7.0;
  const auto a = similarity_map(q, g), b = similarity_map(q7, g7);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    CHECK(a.values[i] >= -1.0);
    CHECK(a.values[i] <= 1.0);
    CHECK(std::abs(a.values[i] - b.values[i]) < 1e-12);
  }
  CHECK_THROWS_AS(similarity_map(std::vector<double>{1, 2}, g), Error);
}

TEST_CASE("soft window fixtures") {
  FeatureGrid g(9, 9, 2, 36, 36);
  SUBCASE("delta similarity") {
    for (std::size_t r = 0; r < 9; ++r) {
      for (std::size_t c = 0; c < 9; ++c) g.cell(r, c)[0] = -1.0;
    }
    g.cell(4, 6)[0] = 1.0;
    const auto m = match_soft_window(std::vector<double>{1.0, 0.0}, g, 5, 0.01);
    CHECK(std::abs(m.px.x - g.cell_center(4, 6).x) < 1e-6);
    CHECK(std::abs(m.px.y - g.cell_center(4, 6).y) < 1e-6);
    CHECK(m.method == MatchMethod::SoftWindow);
  }
  SUBCASE("uniform similarity inside an interior window gives its centre") {
    SimilarityMap sim{9, 9, std::vector<double>(81, 0.5)};
    const auto m = soft_window_from_map(sim, g, 5, 0.04);
    // Peak at (0, 0) by tie-break, window clipped to rows/cols 0..2.
    CHECK(m.px.x == doctest::Approx(g.cell_center(1, 1).x));
    CHECK(m.px.y == doctest::Approx(g.cell_center(1, 1).y));
    sim.values.assign(81, 0.0);
    sim.values[4 * 9 + 4] = 0.3;
    for (std::size_t r = 2; r <= 6; ++r) {
      for (std::size_t c = 2; c <= 6; ++c) sim.values[r * 9 + c] = 0.3;
    }
    const auto centred = soft_window_from_map(sim, g, 5, 0.04);
    // Peak is the first cell of the plateau, (2, 2); window rows/cols 0..4.
    CHECK(centred.row == 2);
    CHECK(centred.col == 2);
  }
  SUBCASE("bad parameters") {
    const std::vector<double> q{1.0, 0.0};
    g.cell(0, 0)[0] = 1.0;
    CHECK_THROWS_AS(match_soft_window(q, g, 4, 0.04), Error);
    CHECK_THROWS_AS(match_soft_window(q, g, 3, 0.0), Error);
  }
}

TEST_CASE("soft window properties on random grids") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const auto g = random_grid(rng, 12, 10, 4, 40, 48);
    std::vector<double> q(4);
    for (auto& v : q) v = n(rng);
    const auto nn = match_nn(q, g);
    const auto w1 = match_soft_window(q, g, 1, 0.04);
    CHECK(w1.px == nn.px);

    const std::size_t window = 1 + 2 * (rng() % 8);
    const auto m = match_soft_window(q, g, window, 0.04 + 0.5 * std::abs(n(rng)));
    const std::size_t half = window / 2;
    const Pixel lo = g.cell_center(nn.row > half ? nn.row - half : 0, nn.col > half ? nn.col - half : 0);
    const Pixel hi = g.cell_center(std::min<std::size_t>(11, nn.row + half),
                                   std::min<std::size_t>(9, nn.col + half));
    CHECK(m.px.x >= lo.x - 1e-12);
    CHECK(m.px.x <= hi.x + 1e-12);
    CHECK(m.px.y >= lo.y - 1e-12);
    CHECK(m.px.y <= hi.y + 1e-12);

    const auto cold = match_soft_window(q, g, 15, 1e-6);
    CHECK(std::abs(cold.px.x - nn.px.x) < 1e-4);
    CHECK(std::abs(cold.px.y - nn.px.y) < 1e-4);
  }
}

TEST_CASE("predict_pairs runs every keypoint and skips missing grids") {
  std::mt19937_64 rng(6);
  const auto a = random_grid(rng, 8, 8, 3, 32, 32);
  const auto head = ProjectionHead::create(3, 3, 0, 1);
  const GridLookup lookup = [&](const std::string& id) -> const FeatureGrid* {
    return id == "a" ? &a : nullptr;
  };
  std::vector<EvalPair> pairs{
      {"a", "a", "c", {{0, {3, 4}, {3, 4}, {}}, {1, {20, 9}, {20, 9}, {}}}, {0, 0, 32, 32}},
      {"a", "b", "c", {{0, {3, 4}, {3, 4}, {}}}, {0, 0, 32, 32}}};
  MatchConfig cfg;
  cfg.method = MatchMethod::Nn;
  const auto preds = predict_pairs(pairs, lookup, head, cfg);
  REQUIRE(preds.size() == 2);
  CHECK(preds[0].size() == 2);
  CHECK(preds[1].empty());
  CHECK(to_string(MatchMethod::SoftWindow) == std::string("soft_window"));
  CHECK(match_method_from_string("nn") == MatchMethod::Nn);
  CHECK_THROWS_AS(match_method_from_string("hard"), Error);
}
