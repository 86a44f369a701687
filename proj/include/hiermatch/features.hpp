#pragma once

#include "hiermatch/gabor.hpp"
#include "hiermatch/image.hpp"
#include "hiermatch/topology.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace hiermatch {

inline constexpr int kQuantLevels = 16;

struct ElementAddress {
  int layer = 1;    // 1-based
  int element = 0;  // 0-based, kCenterIndex is the mask center
  friend bool operator==(const ElementAddress&, const ElementAddress&) = default;
};

// Pooled responses of one element, stored [rf * orientations + o].
struct RawElementResponse {
  ElementAddress address;
  int orientations = 0;
  std::vector<double> values;

  double at(int rf, int o) const { return values[static_cast<std::size_t>(rf) * orientations + o]; }
};

// Quantized responses of one element, entries in 0..16, same layout as raw.
struct FeatureVector {
  ElementAddress address;
  int orientations = 0;
  std::vector<std::uint8_t> q;

  std::uint8_t at(int rf, int o) const { return q[static_cast<std::size_t>(rf) * orientations + o]; }
  bool all_zero() const;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

using LayerRaw = std::array<RawElementResponse, kHexCount>;
using LayerFeatures = std::array<FeatureVector, kHexCount>;

// Pools the bank's response maps (one per orientation) over every RF of
// every element of a mask placed at mask_center. Throws CoverageError when
// no RF of the mask touches the image.
LayerRaw extract_layer_raw(std::span<const ResponseMap> responses, const LayerGeometry& g,
                           Point mask_center);

// Convenience form that convolves first. bank.sigma must equal g.sigma.
LayerRaw extract_layer_raw(const Image& img, const GaborBank& bank, const LayerGeometry& g,
                           Point mask_center);

// Per orientation, normalizes against the min and max over all 19x19 RFs of
// the layer: q = ceil(16 (G - min) / (max - min)). A flat column (range below
// 1e-12) quantizes to all zeros.
LayerFeatures quantize_layer(const LayerRaw& raw);

// Sum of absolute entry differences. Throws ShapeError on a size mismatch.
int l1_distance(const FeatureVector& a, const FeatureVector& b);

// exp(-l1_distance(a, b)), in (0, 1] up to underflow.
double similarity(const FeatureVector& a, const FeatureVector& b);

// Gabor responses of one image at every layer of a stack, computed on first
// use. Safe to share between threads.
class ResponsePyramid {
public:
  ResponsePyramid(const Image& img, const StackConfig& cfg);

  const Image& image() const { return *image_; }
  const StackConfig& config() const { return cfg_; }
  const LayerGeometry& geometry(int m) const;

  // Throws SizeError if the layer's kernels do not fit the image.
  std::span<const ResponseMap> responses(int m) const;

  LayerRaw extract_raw(int m, Point mask_center) const;
  LayerFeatures extract(int m, Point mask_center) const;

private:
  struct Slot {
    std::once_flag once;
    std::vector<ResponseMap> maps;
  };

  std::shared_ptr<const Image> image_;
  StackConfig cfg_;
  std::vector<LayerGeometry> geometry_;
  std::unique_ptr<Slot[]> slots_;
};

}  // namespace hiermatch
