#include "hiermatch/features.hpp"

#include "hiermatch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace hiermatch {

bool FeatureVector::all_zero() const {
  return std::all_of(q.begin(), q.end(), [](std::uint8_t v) { return v == 0; });
}

LayerRaw extract_layer_raw(std::span<const ResponseMap> responses, const LayerGeometry& g,
                           Point mask_center) {
  const int orientations = static_cast<int>(responses.size());
  if (orientations < 1) throw ShapeError("no response maps to pool");
  LayerRaw out;
  bool any_covered = false;
  for (int l = 0; l < kHexCount; ++l) {
    RawElementResponse& element = out[l];
    element.address = {g.layer, l};
    element.orientations = orientations;
    element.values.resize(static_cast<std::size_t>(kHexCount) * orientations);
    const HexPattern centers = absolute_rf_centers(g, mask_center, l);
    for (int j = 0; j < kHexCount; ++j) {
      for (int o = 0; o < orientations; ++o) {
        bool covered = false;
        element.values[static_cast<std::size_t>(j) * orientations + o] =
            pool_rf(responses[o], centers[j], g.rf_radius, covered);
        any_covered = any_covered || covered;
      }
    }
  }
  if (!any_covered) {
    throw CoverageError("layer " + std::to_string(g.layer) + " mask at (" +
                        std::to_string(mask_center.x) + ", " + std::to_string(mask_center.y) +
                        ") lies entirely outside the image");
  }
  return out;
}

LayerRaw extract_layer_raw(const Image& img, const GaborBank& bank, const LayerGeometry& g,
                           Point mask_center) {
  if (std::abs(bank.sigma - g.sigma) > 1e-12 * g.sigma) {
    throw ConfigError("bank sigma does not match layer sigma");
  }
  const std::vector<ResponseMap> maps = convolve_bank(img, bank);
  return extract_layer_raw(maps, g, mask_center);
}

namespace {
constexpr double kLevelSlack = 1e-9;  // in quantization levels
}  // namespace

LayerFeatures quantize_layer(const LayerRaw& raw) {
  const int orientations = raw.front().orientations;
  const int layer = raw.front().address.layer;
  for (const auto& e : raw) {
    if (e.orientations != orientations || e.address.layer != layer) {
      throw ShapeError("quantize_layer needs elements of one layer with equal shape");
    }
  }

  std::vector<double> lo(orientations, std::numeric_limits<double>::infinity());
  std::vector<double> hi(orientations, -std::numeric_limits<double>::infinity());
  for (const auto& e : raw) {
    for (int j = 0; j < kHexCount; ++j) {
      for (int o = 0; o < orientations; ++o) {
        lo[o] = std::min(lo[o], e.at(j, o));
        hi[o] = std::max(hi[o], e.at(j, o));
      }
    }
  }

  LayerFeatures out;
  for (int l = 0; l < kHexCount; ++l) {
    FeatureVector& fv = out[l];
    fv.address = raw[l].address;
    fv.orientations = orientations;
    fv.q.assign(static_cast<std::size_t>(kHexCount) * orientations, 0);
    for (int j = 0; j < kHexCount; ++j) {
      for (int o = 0; o < orientations; ++o) {
        const double range = hi[o] - lo[o];
        if (!(range >= 1e-12)) continue;
        // Round-off in the responses (flat regions give +-1e-16 instead of 0)
        // must not push a value over a level boundary, so shave a hair off.
        const double level = std::ceil(kQuantLevels * (raw[l].at(j, o) - lo[o]) / range - kLevelSlack);
        fv.q[static_cast<std::size_t>(j) * orientations + o] =
            static_cast<std::uint8_t>(std::clamp(level, 0.0, static_cast<double>(kQuantLevels)));
      }
    }
  }
  return out;
}

int l1_distance(const FeatureVector& a, const FeatureVector& b) {
  if (a.q.size() != b.q.size() || a.orientations != b.orientations) {
    throw ShapeError("feature vectors differ in shape");
  }
  int d = 0;
  for (std::size_t i = 0; i < a.q.size(); ++i) {
    d += std::abs(static_cast<int>(a.q[i]) - static_cast<int>(b.q[i]));
  }
  return d;
}

double similarity(const FeatureVector& a, const FeatureVector& b) {
  return std::exp(-static_cast<double>(l1_distance(a, b)));
}

ResponsePyramid::ResponsePyramid(const Image& img, const StackConfig& cfg)
    : image_(std::make_shared<const Image>(img)),
      cfg_(cfg),
      slots_(std::make_unique<Slot[]>(static_cast<std::size_t>(cfg.num_layers))) {
  cfg_.validate();
  for (int m = 1; m <= cfg_.num_layers; ++m) geometry_.push_back(layer_geometry(cfg_, m));
}

const LayerGeometry& ResponsePyramid::geometry(int m) const {
  if (m < 1 || m > cfg_.num_layers) throw ConfigError("layer index out of range");
  return geometry_[m - 1];
}

std::span<const ResponseMap> ResponsePyramid::responses(int m) const {
  const LayerGeometry& g = geometry(m);
  Slot& slot = slots_[m - 1];
  std::call_once(slot.once, [&] {
    slot.maps = convolve_bank(*image_, GaborBank::make(g.sigma, cfg_.orientations, cfg_.bandwidth_phi));
  });
  return slot.maps;
}

LayerRaw ResponsePyramid::extract_raw(int m, Point mask_center) const {
  return extract_layer_raw(responses(m), geometry(m), mask_center);
}

LayerFeatures ResponsePyramid::extract(int m, Point mask_center) const {
  return quantize_layer(extract_raw(m, mask_center));
}

}  // namespace hiermatch
