#include "doctest.h"

#include "hiermatch/errors.hpp"
#include "hiermatch/matcher.hpp"
#include "hiermatch/synthetic.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdlib>
#include <random>

using namespace hiermatch;

namespace {

const Image& scene() {
  static const Image img = make_textured_image(512, 512, 1);
  return img;
}

const ResponsePyramid& scene_pyramid() {
  static const ResponsePyramid p(scene(), StackConfig{});
  return p;
}

// Copy of `img` with content moved by (dx, dy); uncovered pixels are 0.5.
Image shifted(const Image& img, int dx, int dy) {
  Image out(img.width(), img.height(), 0.5);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.contains(x - dx, y - dy)) out.at(x, y) = img.at(x - dx, y - dy);
  return out;
}

KeyPointTemplate random_template(std::mt19937_64& rng, int layers, int max_level) {
  KeyPointTemplate t;
  t.layers.resize(layers);
  t.relative_positions.resize(layers);
  for (int m = 0; m < layers; ++m)
    for (int l = 0; l < kHexCount; ++l) {
      t.layers[m][l] = oracle::random_vector(rng, 4, max_level);
      t.layers[m][l].address = {m + 1, l};
    }
  return t;
}

LayerFeatures random_layer(std::mt19937_64& rng, int max_level) {
  LayerFeatures f;
  for (auto& v : f) v = oracle::random_vector(rng, 4, max_level);
  return f;
}

}  // namespace

TEST_CASE("seed grid") {
  const Image big(800, 800, 0.5);
  const auto seeds = preselect_seeds(big, 150, 0.0);
  CHECK(seeds.size() == 36);
  CHECK(seeds.front() == Point{74.5, 74.5});
  CHECK(seeds.back() == Point{774.5, 774.5});  // partial last cell 750..799
  CHECK(preselect_seeds(big, 150, 0.01).empty());

  const auto textured = preselect_seeds(scene(), 150, 0.0);
  CHECK(textured.size() == 16);
  CHECK(preselect_seeds(scene(), 150, 1e-6).size() == 16);
  CHECK_THROWS_AS(preselect_seeds(big, 0, 0.0), ConfigError);
}

TEST_CASE("energy threshold drops flat cells only") {
  Image img(300, 150, 0.5);
  const Image tex = make_textured_image(150, 150, 2);
  for (int y = 0; y < 150; ++y)
    for (int x = 0; x < 150; ++x) img.at(150 + x, y) = tex.at(x, y);
  const auto seeds = preselect_seeds(img, 150, 1e-3);
  REQUIRE(seeds.size() == 1);
  CHECK(seeds[0] == Point{224.5, 74.5});
}

TEST_CASE("nearest neighbour agrees with brute-force argmax") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    // Narrow levels make exact ties common, exercising the tie-break order.
    const int max_level = trial % 2 == 0 ? 1 : 16;
    const KeyPointTemplate t = random_template(rng, 4, max_level);
    const LayerFeatures q = random_layer(rng, max_level);
    const int m = 1 + trial % 4;
    const NeighborMatch got = nearest_neighbor(q, m, t);
    const oracle::Best want = oracle::argmax(q, m, t);
    CAPTURE(trial);
    CHECK(got.query_element == want.l);
    CHECK(got.template_element == want.lp);
    CHECK(got.template_layer == want.mp);
    CHECK(got.similarity() == want.sim);
  }
}

TEST_CASE("nearest neighbour finds a verbatim layer") {
  std::mt19937_64 rng(6);
  const KeyPointTemplate t = random_template(rng, 6, 16);
  const NeighborMatch nn = nearest_neighbor(t.layer(4), 2, t);
  CHECK(nn.template_layer == 4);
  CHECK(nn.similarity() == 1.0);
  CHECK(nn.query_element == nn.template_element);

  SearchStats stats;
  nearest_neighbor(t.layer(1), 1, t, &stats);
  CHECK(stats.similarity_evaluations == 19u * 19u * 6u);
}

TEST_CASE("tie-break prefers the nearer layer, then smaller indices") {
  KeyPointTemplate t;
  t.layers.resize(3);
  t.relative_positions.resize(3);
  for (auto& layer : t.layers)
    for (auto& f : layer) f = FeatureVector{{}, 4, std::vector<std::uint8_t>(76, 0)};
  LayerFeatures q = t.layers[0];
  const NeighborMatch nn = nearest_neighbor(q, 2, t);
  CHECK(nn.template_layer == 2);
  CHECK(nn.template_element == 0);
  CHECK(nn.query_element == 0);
  CHECK(nearest_neighbor(q, 3, t).template_layer == 3);
}

TEST_CASE("scale and relocation arithmetic") {
  CHECK(estimate_scale(5, 6) == doctest::Approx(0.7071).epsilon(1e-4));
  CHECK(estimate_scale(3, 3) == 1.0);
  CHECK(estimate_scale(6, 4) == 2.0);

  CHECK(correct_location({100, 100}, {0, 0}, 1.7) == Point{100, 100});
  CHECK(correct_location({100, 100}, {10, 0}, 1.0) == Point{90, 100});

  // Element at [120, 203] relative to a training point at [197, 259].
  const Point cl = correct_location({137, 293}, Point{120, 203} - Point{197, 259}, 1 / std::sqrt(2.0));
  CHECK(cl.x == doctest::Approx(191.4).epsilon(1e-3));
  CHECK(cl.y == doctest::Approx(332.6).epsilon(1e-3));
}

TEST_CASE("refinement layer pairs") {
  CHECK(refine_layers(5, 6, 6).query_layer == 1);
  CHECK(refine_layers(5, 6, 6).template_layer == 2);
  CHECK(refine_layers(4, 4, 6).template_layer == 1);
  CHECK(refine_layers(4, 4, 6).query_layer == 1);
  CHECK(refine_layers(6, 4, 6).query_layer == 3);
  CHECK(refine_layers(6, 4, 6).template_layer == 1);
}

TEST_CASE("evaluation") {
  std::mt19937_64 rng(7);
  const LayerFeatures a = random_layer(rng, 16);
  CHECK(evaluate(a, a, 19, 0, 0) == 1.0);

  const LayerFeatures b = random_layer(rng, 3);
  CHECK(evaluate(a, b, 1, 4, 9) == similarity(a[4], b[9]));

  LayerFeatures c = a;
  c[11].q[5] = static_cast<std::uint8_t>(c[11].q[5] == 0 ? 1 : c[11].q[5] - 1);
  CHECK(evaluate(a, c, 19, 0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(evaluate(a, c, 7, 0, 0), ConfigError);

  for (int i = 0; i < 50; ++i) {
    const LayerFeatures x = random_layer(rng, 1), y = random_layer(rng, 1);
    double direct = 1.0;
    for (int e = 0; e < kHexCount; ++e) direct *= oracle::similarity(oracle::widen(x[e]), oracle::widen(y[e]));
    CHECK(std::abs(evaluate(x, y, 19, 0, 0) - direct) <= 1e-12);
  }
}

TEST_CASE("coarse scan from the training point") {
  const ResponsePyramid& p = scene_pyramid();
  const Point tl{260, 240};
  const Template t = train(p, std::vector<Point>{tl});
  SearchStats stats;
  const CoarseMatch c = scan_coarse(p, t.key_points[0], tl, 5, stats);
  CHECK(c.template_layer == 5);
  CHECK(c.query_element == c.template_element);
  CHECK(c.best_similarity == 1.0);
  CHECK(c.estimated_scale == 1.0);
  CHECK(distance(c.corrected_location, tl) <= p.geometry(5).rf_radius);
  CHECK(stats.similarity_evaluations == 19u * 19u * 6u);
}

TEST_CASE("coarse scan on a flat image is degenerate but deterministic") {
  const ResponsePyramid flat(Image(512, 512, 0.5), StackConfig{});
  const Template t = train(scene_pyramid(), std::vector<Point>{{256, 256}});
  KeyPointTemplate zero = t.key_points[0];
  for (auto& layer : zero.layers)
    for (auto& f : layer) std::fill(f.q.begin(), f.q.end(), 0);
  SearchStats stats;
  const CoarseMatch c = scan_coarse(flat, zero, {256, 256}, 5, stats);
  CHECK(c.degenerate);
  CHECK(c.best_similarity == 1.0);
  CHECK(c.template_layer == 5);
  CHECK(c.template_element == 0);
  CHECK(c.query_element == 0);
}

TEST_CASE("coarse scan recovers a translated pattern") {
  const Point tl{256, 256};
  const Template t = train(scene_pyramid(), std::vector<Point>{tl});
  for (const auto& [dx, dy] : {std::pair{23, -17}, std::pair{-40, 31}, std::pair{0, 55}}) {
    const ResponsePyramid moved(shifted(scene(), dx, dy), StackConfig{});
    SearchStats stats;
    const CoarseMatch c = scan_coarse(moved, t.key_points[0], tl, 5, stats);
    CAPTURE(dx);
    CAPTURE(dy);
    CHECK(distance(c.corrected_location, tl + Point{double(dx), double(dy)}) <=
          2 * moved.geometry(5).rf_radius);
  }
}

TEST_CASE("refinement localizes a self search") {
  const ResponsePyramid& p = scene_pyramid();
  const std::vector<Point> pts{{200, 210}, {300, 280}, {250, 330}};
  const Template t = train(p, pts);
  SearchConfig cfg;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    for (const Point off : {Point{30, -40}, Point{-60, 20}, Point{0, 0}}) {
      SearchStats stats;
      const Point seed = pts[k] + off;
      const CoarseMatch c = scan_coarse(p, t.key_points[k], seed, 5, stats);
      MatchCandidate m = refine(p, t.key_points[k], c, cfg, stats);
      CHECK(distance(m.final_location, pts[k]) <= 8.0);
      polish(p, t.key_points[k], m, cfg, stats);
      CAPTURE(k);
      CAPTURE(off.x);
      CHECK(distance(m.final_location, pts[k]) <= 2.0);
      CHECK(m.refine_template_layer == 1);
      CHECK_FALSE(m.out_of_bounds);
    }
  }
}

TEST_CASE("single evaluation layer is the plain product over the finest pair") {
  const ResponsePyramid& p = scene_pyramid();
  const Point tl{240, 260};
  const Template t = train(p, std::vector<Point>{tl});
  SearchConfig cfg;
  cfg.eval_layers = 1;
  SearchStats stats;
  const CoarseMatch c = scan_coarse(p, t.key_points[0], tl + Point{20, 10}, 5, stats);
  const MatchCandidate m = refine(p, t.key_points[0], c, cfg, stats);
  const LayerFeatures at = p.extract(m.refine_query_layer, m.final_location);
  double direct = 0.0;
  for (int i = 0; i < kHexCount; ++i)
    for (std::size_t e = 0; e < at[i].q.size(); ++e)
      direct += std::abs(int(at[i].q[e]) - int(t.key_points[0].layer(m.refine_template_layer)[i].q[e]));
  CHECK(m.eval_distance == direct);
  CHECK(m.eval_score == std::exp(-direct));
}

TEST_CASE("out-of-bounds corrected location") {
  const ResponsePyramid& p = scene_pyramid();
  const Template t = train(p, std::vector<Point>{{256, 256}});
  CoarseMatch c;
  c.scan_layer = 5;
  c.template_layer = 5;
  c.corrected_location = {-5000, 100};
  SearchStats stats;
  const MatchCandidate m = refine(p, t.key_points[0], c, SearchConfig{}, stats);
  CHECK(m.out_of_bounds);
  CHECK(m.eval_score == 0.0);
}

TEST_CASE("find on a flat image with an energy gate returns nothing") {
  const Template t = train(scene_pyramid(), std::vector<Point>{{256, 256}});
  SearchConfig cfg;
  cfg.energy_threshold = 1e-3;
  const SearchResult r = find(Image(512, 512, 0.5), t, cfg);
  CHECK(r.candidates.empty());
  CHECK(r.stats == SearchStats{});
}

TEST_CASE("search cost per seed") {
  const Template t = train(scene_pyramid(), std::vector<Point>{{256, 256}});
  SearchConfig cfg;
  cfg.subregion = 512;  // a single seed
  cfg.refine_step = 0;  // coarse, then straight to the finest pair
  const SearchResult one = find(scene_pyramid(), t, cfg);
  CHECK(one.stats.subregions_visited == 1);
  CHECK(one.stats.similarity_evaluations == 19u * 19u * 6u + 19u * 19u);

  cfg.refine_step = 2;  // scan layer 5 refines at 3, then 1
  const SearchResult cascade = find(scene_pyramid(), t, cfg);
  CHECK(cascade.stats.similarity_evaluations == 19u * 19u * 6u + 2u * 19u * 19u);
}

TEST_CASE("find is deterministic across thread counts") {
  const auto pts = sample_training_points(512, 512, StackConfig{}, 6, 3);
  const Template t = train(scene_pyramid(), pts);
  SearchConfig cfg;
  cfg.threshold = 1e-300;
  setenv("HIERMATCH_THREADS", "1", 1);
  const SearchResult a = find(scene_pyramid(), t, cfg);
  setenv("HIERMATCH_THREADS", "3", 1);
  const SearchResult b = find(scene_pyramid(), t, cfg);
  unsetenv("HIERMATCH_THREADS");
  CHECK(a.stats == b.stats);
  REQUIRE(a.candidates.size() == b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    CHECK(a.candidates[i].key_point == b.candidates[i].key_point);
    CHECK(a.candidates[i].final_location == b.candidates[i].final_location);
    CHECK(a.candidates[i].eval_distance == b.candidates[i].eval_distance);
  }
}

TEST_CASE("candidates are ranked and thresholded") {
  const auto pts = sample_training_points(512, 512, StackConfig{}, 3, 8);
  const Template t = train(scene_pyramid(), pts);
  SearchConfig all;
  all.threshold = 1e-300;
  const SearchResult r = find(scene_pyramid(), t, all);
  for (std::size_t i = 1; i < r.candidates.size(); ++i) {
    if (r.candidates[i].key_point == r.candidates[i - 1].key_point) {
      CHECK(r.candidates[i - 1].eval_distance <= r.candidates[i].eval_distance);
    }
  }
  const SearchResult best = find(scene_pyramid(), t, SearchConfig{});
  CHECK(best.candidates.size() == pts.size());
  const auto per_kp = best_per_key_point(best, pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    REQUIRE(per_kp[k]);
    CHECK(distance(per_kp[k]->final_location, pts[k]) < 8.0);
  }
}

TEST_CASE("nearest neighbour is unchanged by positive affine intensity maps") {
  const Point tl{256, 256};
  const Template t = train(scene_pyramid(), std::vector<Point>{tl});
  std::vector<double> px(scene().pixels().begin(), scene().pixels().end());
  for (auto& v : px) v = 0.7 * v + 0.12;
  const ResponsePyramid other(Image(512, 512, px), StackConfig{});
  for (const Point seed : {Point{224.5, 224.5}, Point{300, 200}}) {
    const LayerFeatures a = scene_pyramid().extract(5, seed);
    const LayerFeatures b = other.extract(5, seed);
    const NeighborMatch na = nearest_neighbor(a, 5, t.key_points[0]);
    const NeighborMatch nb = nearest_neighbor(b, 5, t.key_points[0]);
    CHECK(na.query_element == nb.query_element);
    CHECK(na.template_element == nb.template_element);
    CHECK(na.template_layer == nb.template_layer);
  }
}

TEST_CASE("exhaustive scan cost and result") {
  const ExhaustiveCost c = exhaustive_scan_cost(512, 512, 5);
  CHECK(c.positions == 512u * 512u);
  CHECK(c.similarity_evaluations == 512u * 512u * 5u * 19u);
  CHECK(exhaustive_scan_cost(10, 7, 1, 3).positions == 4u * 3u);

  StackConfig cfg;
  cfg.num_layers = 3;
  cfg.base_sigma = 1.5;
  const Image img = make_textured_image(96, 96, 9);
  const ResponsePyramid p(img, cfg);
  const Template t = train(p, std::vector<Point>{{50, 45}});
  const std::vector<int> layers{1};
  const ExhaustiveResult r = exhaustive_scan(p, t.key_points[0], layers, 1);
  CHECK(r.best_location == Point{50, 45});
  CHECK(r.best_distance == 0);
  CHECK(r.cost.similarity_evaluations == 96u * 96u * 19u);
}

TEST_CASE("search config validation") {
  const StackConfig stack;
  SearchConfig cfg;
  CHECK_NOTHROW(cfg.validate(stack));
  CHECK(cfg.resolved_scan_layer(stack) == 5);
  cfg.scan_layer = -1;
  CHECK(cfg.resolved_scan_layer(stack) == 4);
  cfg.scan_layer = 2;
  CHECK(cfg.resolved_scan_layer(stack) == 2);
  cfg.scan_layer = -5;
  CHECK_THROWS_AS(cfg.validate(stack), ConfigError);
  cfg = {};
  cfg.eval_elements = 5;
  CHECK_THROWS_AS(cfg.validate(stack), ConfigError);
  cfg = {};
  cfg.scan_layer = 9;
  CHECK_THROWS_AS(cfg.validate(stack), ConfigError);
  cfg = {};
  cfg.threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(stack), ConfigError);
  cfg = {};
  cfg.refine_step = -1;
  CHECK_THROWS_AS(cfg.validate(stack), ConfigError);
}
