#pragma once

#include "hiermatch/image.hpp"
#include "hiermatch/point.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hiermatch {

// Forward affine map from source pixel coordinates to transformed-image
// coordinates: x' = a*x + b*y + tx, y' = c*x + d*y + ty.
struct CoordMap {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
  double tx = 0.0, ty = 0.0;

  static CoordMap identity() { return {}; }

  double determinant() const { return a * d - b * c; }
  bool is_identity() const {
    return a == 1.0 && b == 0.0 && c == 0.0 && d == 1.0 && tx == 0.0 && ty == 0.0;
  }
  CoordMap inverse() const;

  // Map that applies `first`, then `this`.
  CoordMap after(const CoordMap& first) const;

  // "a,b,c,d,tx,ty" with round-trip precision.
  std::string to_csv_row() const;
};

Point map_point(const CoordMap& cm, Point p);

enum class TransformKind { contrast, brightness, rotate, scale, skew, noise, composite };

struct TransformSpec {
  TransformKind kind = TransformKind::composite;
  double value = 0.0;                 // factor, delta, degrees or fraction
  std::uint64_t seed = 0;             // noise only
  std::vector<TransformSpec> members; // composite only, applied in order

  static TransformSpec contrast(double factor);
  static TransformSpec brightness(double delta);
  static TransformSpec rotate(double degrees);
  static TransformSpec scale(double factor);
  static TransformSpec skew(double degrees);
  static TransformSpec noise(double fraction, std::uint64_t seed);
  static TransformSpec composite(std::vector<TransformSpec> members);
  static TransformSpec identity() { return composite({}); }

  // Throws ConfigError on a non-positive scale, a noise fraction outside
  // [0, 1] or a non-finite parameter.
  void validate() const;

  // Short textual form, parseable by parse_transform ("scale:0.5",
  // "contrast:1.2+noise:0.1@7").
  std::string to_string() const;
};

// Parses "kind:value" terms joined by '+'. Noise accepts an optional
// "@seed" suffix; "identity" yields an empty composite.
TransformSpec parse_transform(std::string_view text, std::uint64_t default_seed = 0);

struct TransformResult {
  Image image;
  CoordMap map;
};

// Geometric transforms inverse-map each destination pixel and sample the
// source bilinearly; samples outside the source read 0.5. Rotation and skew
// pivot on the image center and keep the canvas size. Scale anchors at the
// origin and resizes the canvas to round(factor * size).
TransformResult apply_transform(const Image& img, const TransformSpec& spec);

CoordMap transform_map(const TransformSpec& spec, int width, int height);

struct NamedTransform {
  std::string name;
  TransformSpec spec;
};

// The nine robustness transforms A-I used by the benchmark, in report order.
std::vector<NamedTransform> robustness_transforms(std::uint64_t noise_seed);

}  // namespace hiermatch
