#include "hiermatch/topology.hpp"

#include "hiermatch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hiermatch {

void StackConfig::validate() const {
  if (num_layers < 2) throw ConfigError("stack needs at least 2 layers");
  if (!(base_sigma > 0.0)) throw ConfigError("base sigma must be positive");
  if (orientations < 1) throw ConfigError("need at least one orientation");
  if (!(element_spacing_factor > 0.0)) throw ConfigError("element spacing factor must be positive");
  if (!(bandwidth_phi > 0.0)) throw ConfigError("bandwidth must be positive");
}

double sqrt2_pow(int exponent) {
  const double whole = std::ldexp(1.0, exponent / 2 - (exponent < 0 && exponent % 2 ? 1 : 0));
  const bool odd = exponent % 2 != 0;
  return odd ? whole * std::numbers::sqrt2 : whole;
}

HexPattern hex_offsets(double spacing) {
  HexPattern p{};
  p[0] = {0.0, 0.0};
  for (int k = 0; k < 6; ++k) {
    const double a = k * std::numbers::pi / 3.0;
    p[1 + k] = {spacing * std::cos(a), spacing * std::sin(a)};
  }
  for (int k = 0; k < 12; ++k) {
    const double a = k * std::numbers::pi / 6.0;
    const double r = (k % 2 == 0 ? 2.0 : std::numbers::sqrt3) * spacing;
    p[7 + k] = {r * std::cos(a), r * std::sin(a)};
  }
  return p;
}

double LayerGeometry::element_footprint_radius() const {
  double reach = 0.0;
  for (const Point& o : rf_offsets) reach = std::max(reach, norm(o));
  return reach + rf_radius;
}

double LayerGeometry::mask_radius() const {
  double reach = 0.0;
  for (const Point& e : element_offsets) reach = std::max(reach, norm(e));
  return reach + element_footprint_radius();
}

LayerGeometry layer_geometry(const StackConfig& cfg, int m) {
  if (m < 1 || m > cfg.num_layers) {
    throw ConfigError("layer " + std::to_string(m) + " outside 1.." + std::to_string(cfg.num_layers));
  }
  LayerGeometry g;
  g.layer = m;
  g.sigma = cfg.base_sigma * sqrt2_pow(m - 1);
  g.rf_radius = std::numbers::sqrt2 * g.sigma;
  g.rf_offsets = hex_offsets(2.0 * g.rf_radius);
  g.element_offsets = hex_offsets(cfg.element_spacing_factor * 2.0 * g.rf_radius * 2.0);
  return g;
}

HexPattern absolute_rf_centers(const LayerGeometry& g, Point mask_center, int element) {
  if (element < 0 || element >= kHexCount) throw ConfigError("element index out of range");
  const Point base = mask_center + g.element_offsets[element];
  HexPattern out{};
  for (int j = 0; j < kHexCount; ++j) out[j] = base + g.rf_offsets[j];
  return out;
}

}  // namespace hiermatch
