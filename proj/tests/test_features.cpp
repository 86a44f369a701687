#include "doctest.h"

#include "hiermatch/errors.hpp"
#include "hiermatch/features.hpp"
#include "hiermatch/synthetic.hpp"
#include "hiermatch/transform.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace hiermatch;

namespace {

StackConfig small_stack() {
  StackConfig cfg;
  cfg.num_layers = 3;
  cfg.base_sigma = 1.0;
  return cfg;
}

LayerRaw raw_from(const std::vector<double>& values, int orientations) {
  LayerRaw raw;
  std::size_t n = 0;
  for (int l = 0; l < kHexCount; ++l) {
    raw[l].address = {1, l};
    raw[l].orientations = orientations;
    raw[l].values.resize(static_cast<std::size_t>(kHexCount) * orientations);
    for (auto& v : raw[l].values) v = values[n++ % values.size()];
  }
  return raw;
}

Image affine(const Image& img, double a, double b) {
  std::vector<double> px(img.pixels().begin(), img.pixels().end());
  for (auto& v : px) v = a * v + b;
  return Image(img.width(), img.height(), std::move(px));
}

}  // namespace

TEST_CASE("constant image pools to zero") {
  const StackConfig cfg = small_stack();
  const LayerGeometry g = layer_geometry(cfg, 2);
  const GaborBank bank = GaborBank::make(g.sigma, cfg.orientations);
  const LayerRaw raw = extract_layer_raw(Image(64, 64, 0.4), bank, g, {32, 32});
  for (const auto& e : raw)
    for (double v : e.values) CHECK(std::abs(v) < 1e-9);
  const LayerFeatures q = quantize_layer(raw);
  for (const auto& f : q) CHECK(f.all_zero());
}

TEST_CASE("raw extraction agrees with per-pixel brute force") {
  const StackConfig cfg = small_stack();
  const Image img = oracle::random_image(64, 64, 21);
  const LayerGeometry g = layer_geometry(cfg, 1);
  const GaborBank bank = GaborBank::make(g.sigma, cfg.orientations);
  const Point mask{31.5, 30.25};
  const LayerRaw raw = extract_layer_raw(img, bank, g, mask);
  for (int o = 0; o < cfg.orientations; ++o) {
    const std::vector<double> map = oracle::correlate(img, bank.kernels[o]);
    for (int l : {0, 4, 11, 18}) {
      for (int j = 0; j < kHexCount; ++j) {
        const Point c = mask + g.element_offsets[l] + g.rf_offsets[j];
        CHECK(std::abs(raw[l].at(j, o) - oracle::pool(map, 64, 64, c.x, c.y, g.rf_radius)) < 1e-9);
      }
    }
  }
}

TEST_CASE("raw extraction is translation equivariant") {
  const StackConfig cfg = small_stack();
  const Image big = oracle::random_image(96, 96, 5);
  std::vector<double> shifted(96 * 96);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) shifted[static_cast<std::size_t>(y) * 96 + x] = big.at((x + 91) % 96, (y + 93) % 96);
  const Image moved(96, 96, shifted);  // content shifted by (+5, +3)
  const ResponsePyramid a(big, cfg), b(moved, cfg);
  const LayerRaw ra = a.extract_raw(1, {44, 46});
  const LayerRaw rb = b.extract_raw(1, {49, 49});
  for (int l = 0; l < kHexCount; ++l)
    for (std::size_t i = 0; i < ra[l].values.size(); ++i) CHECK(std::abs(ra[l].values[i] - rb[l].values[i]) < 1e-9);
}

TEST_CASE("mask entirely outside the image is a coverage error") {
  const ResponsePyramid p(Image(64, 64, 0.5), small_stack());
  CHECK_THROWS_AS(p.extract(1, {-500, -500}), CoverageError);
  CHECK_NOTHROW(p.extract(1, {-5, 10}));
}

TEST_CASE("quantization endpoints and levels") {
  std::vector<double> values;
  for (int i = 0; i <= 16; ++i) values.push_back(i / 16.0);
  const LayerFeatures q = quantize_layer(raw_from(values, 1));
  std::vector<int> seen(17, 0);
  for (int l = 0; l < kHexCount; ++l) {
    for (int j = 0; j < kHexCount; ++j) {
      const std::size_t n = static_cast<std::size_t>(l) * kHexCount + j;
      const double v = values[n % values.size()];
      CHECK(q[l].at(j, 0) == static_cast<int>(std::ceil(16.0 * v - 1e-12)));
      ++seen[q[l].at(j, 0)];
    }
  }
  for (int level = 0; level <= 16; ++level) CHECK(seen[level] > 0);
}

TEST_CASE("round-off just above a level boundary stays below it") {
  std::vector<double> values{0.0, 1.0, 4.7e-16, -1.4e-16, 0.5 + 1e-15, 0.5 - 1e-15};
  const LayerFeatures q = quantize_layer(raw_from(values, 1));
  CHECK(q[0].at(0, 0) == 0);
  CHECK(q[0].at(1, 0) == 16);
  CHECK(q[0].at(2, 0) == 0);
  CHECK(q[0].at(3, 0) == 0);
  CHECK(q[0].at(4, 0) == 8);
  CHECK(q[0].at(5, 0) == 8);
}

TEST_CASE("quantization is per orientation column") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3.0, 5.0);
  std::vector<double> values(2000);
  for (auto& v : values) v = u(rng);
  const LayerRaw raw = raw_from(values, 4);
  const LayerFeatures q = quantize_layer(raw);
  for (int o = 0; o < 4; ++o) {
    double lo = 1e9, hi = -1e9;
    for (const auto& e : raw)
      for (int j = 0; j < kHexCount; ++j) {
        lo = std::min(lo, e.at(j, o));
        hi = std::max(hi, e.at(j, o));
      }
    bool has0 = false, has16 = false;
    for (int l = 0; l < kHexCount; ++l) {
      for (int j = 0; j < kHexCount; ++j) {
        const int expect = static_cast<int>(std::ceil(16.0 * (raw[l].at(j, o) - lo) / (hi - lo)));
        CHECK(q[l].at(j, o) == expect);
        has0 = has0 || expect == 0;
        has16 = has16 || expect == 16;
      }
    }
    CHECK(has0);
    CHECK(has16);
  }
}

TEST_CASE("flat orientation column quantizes to zero") {
  std::vector<double> values(kHexCount * kHexCount * 2);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = (i % 2 == 0) ? 0.25 : static_cast<double>(i);
  const LayerFeatures q = quantize_layer(raw_from(values, 2));
  for (const auto& f : q)
    for (int j = 0; j < kHexCount; ++j) CHECK(f.at(j, 0) == 0);
}

TEST_CASE("quantized features survive positive affine intensity maps") {
  const StackConfig cfg = small_stack();
  const Image base = oracle::random_image(72, 72, 31, 0.3, 0.45);
  const ResponsePyramid ref(base, cfg);
  for (double a : {0.5, 1.2, 2.0}) {
    for (double b : {-0.1, 0.0, 0.1}) {
      const ResponsePyramid other(affine(base, a, b), cfg);
      for (int m = 1; m <= cfg.num_layers; ++m) {
        CAPTURE(a);
        CAPTURE(b);
        CAPTURE(m);
        CHECK(ref.extract(m, {36, 36}) == other.extract(m, {36, 36}));
      }
    }
  }
}

TEST_CASE("similarity") {
  std::mt19937_64 rng(2);
  const FeatureVector a = oracle::random_vector(rng, 4);
  FeatureVector b = a;
  CHECK(similarity(a, b) == 1.0);
  b.q[7] = static_cast<std::uint8_t>(b.q[7] == 16 ? 15 : b.q[7] + 1);
  CHECK(l1_distance(a, b) == 1);
  CHECK(similarity(a, b) == doctest::Approx(0.367879).epsilon(1e-6));
  CHECK(similarity(a, b) == similarity(b, a));

  FeatureVector zeros = a, full = a;
  std::fill(zeros.q.begin(), zeros.q.end(), 0);
  std::fill(full.q.begin(), full.q.end(), 16);
  CHECK(l1_distance(zeros, full) == 1216);
  CHECK(similarity(zeros, full) == 0.0);

  FeatureVector narrow = a;
  narrow.orientations = 2;
  narrow.q.resize(38);
  CHECK_THROWS_AS(l1_distance(a, narrow), ShapeError);
}

TEST_CASE("similarity decreases as one entry moves away") {
  std::mt19937_64 rng(4);
  FeatureVector a = oracle::random_vector(rng, 4);
  a.q[3] = 0;
  FeatureVector b = a;
  double prev = similarity(a, b);
  for (int v = 1; v <= 16; ++v) {
    b.q[3] = static_cast<std::uint8_t>(v);
    const double s = similarity(a, b);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("similarity matches the direct formula on random pairs") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const FeatureVector a = oracle::random_vector(rng, 4, 2);
    const FeatureVector b = oracle::random_vector(rng, 4, 2);
    const double expect = oracle::similarity(oracle::widen(a), oracle::widen(b));
    CHECK(std::abs(similarity(a, b) - expect) <= 1e-12);
  }
}

TEST_CASE("layers compare across scales") {
  // An exact sqrt(2) upscale should make layer m + 1 of the enlarged image
  // describe what layer m saw in the original.
  StackConfig cfg;
  cfg.num_layers = 4;
  const Image img = make_textured_image(256, 256, 3);
  const auto up = apply_transform(img, TransformSpec::scale(std::sqrt(2.0)));
  const ResponsePyramid small(img, cfg), large(up.image, cfg);
  int equal = 0, close = 0, total = 0;
  for (const Point p : {Point{128, 128}, Point{100, 140}, Point{150, 110}}) {
    const Point mapped = map_point(up.map, p);
    for (int m = 1; m < cfg.num_layers; ++m) {
      const LayerFeatures a = small.extract(m, p);
      const LayerFeatures b = large.extract(m + 1, mapped);
      for (int l = 0; l < kHexCount; ++l)
        for (std::size_t i = 0; i < a[l].q.size(); ++i) {
          const int d = std::abs(a[l].q[i] - b[l].q[i]);
          equal += d == 0;
          close += d <= 1;
          ++total;
        }
    }
  }
  // Pixel-grid pooling and bilinear resampling perturb entries by about one
  // level; beyond that the layers should agree.
  MESSAGE("entries equal " << equal << ", within one level " << close << ", of " << total);
  CHECK(close >= 0.9 * total);
  CHECK(equal >= 0.5 * total);
}

TEST_CASE("pyramid responses are cached and shareable") {
  const ResponsePyramid p(oracle::random_image(80, 80, 1), small_stack());
  CHECK(p.responses(2).data() == p.responses(2).data());
  CHECK(p.responses(2).size() == 4);
  CHECK_THROWS_AS(p.geometry(0), ConfigError);
}
