#pragma once

#include "hiermatch/point.hpp"

#include <array>

namespace hiermatch {

// Every element holds 19 receptive fields and every layer holds 19 elements,
// both laid out as a two-ring hexagonal patch (1 + 6 + 12).
inline constexpr int kHexCount = 19;
inline constexpr int kCenterIndex = 0;

using HexPattern = std::array<Point, kHexCount>;

struct StackConfig {
  int num_layers = 6;
  double base_sigma = 3.0;
  int orientations = 4;
  // Element center spacing in units of (2 * RF diameter). 0.5 puts element
  // centers on the RF lattice, so neighbouring elements share RFs.
  double element_spacing_factor = 0.5;
  double bandwidth_phi = 1.5;

  void validate() const;
  friend bool operator==(const StackConfig&, const StackConfig&) = default;
};

// Center first, then the inner ring (radius `spacing`, angles k*60deg), then
// the outer ring sorted by angle from 0: radius 2*spacing at even multiples
// of 30deg and sqrt(3)*spacing at odd ones.
HexPattern hex_offsets(double spacing);

struct LayerGeometry {
  int layer = 1;           // 1-based
  double sigma = 0.0;      // Gabor envelope scale of this layer
  double rf_radius = 0.0;  // sqrt(2) * sigma
  HexPattern rf_offsets{};       // relative to an element center
  HexPattern element_offsets{};  // relative to the mask center

  double rf_spacing() const { return 2.0 * rf_radius; }
  // Radius of the disc covering every RF of one element.
  double element_footprint_radius() const;
  // Radius of the disc covering every RF of the whole layer.
  double mask_radius() const;
};

// Throws ConfigError when m is outside 1..num_layers.
LayerGeometry layer_geometry(const StackConfig& cfg, int m);

HexPattern absolute_rf_centers(const LayerGeometry& g, Point mask_center, int element);

// sqrt(2)^exponent, exact for even exponents.
double sqrt2_pow(int exponent);

}  // namespace hiermatch
