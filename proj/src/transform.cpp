#include "hiermatch/transform.hpp"

#include "hiermatch/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

namespace hiermatch {

CoordMap CoordMap::inverse() const {
  const double det = determinant();
  if (det == 0.0 || !std::isfinite(det)) throw ConfigError("coordinate map is singular");
  CoordMap inv;
  inv.a = d / det;
  inv.b = -b / det;
  inv.c = -c / det;
  inv.d = a / det;
  inv.tx = -(inv.a * tx + inv.b * ty);
  inv.ty = -(inv.c * tx + inv.d * ty);
  return inv;
}

CoordMap CoordMap::after(const CoordMap& first) const {
  CoordMap out;
  out.a = a * first.a + b * first.c;
  out.b = a * first.b + b * first.d;
  out.c = c * first.a + d * first.c;
  out.d = c * first.b + d * first.d;
  out.tx = a * first.tx + b * first.ty + tx;
  out.ty = c * first.tx + d * first.ty + ty;
  return out;
}

std::string CoordMap::to_csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", a, b, c, d, tx, ty);
  return buf;
}

Point map_point(const CoordMap& cm, Point p) {
  return {cm.a * p.x + cm.b * p.y + cm.tx, cm.c * p.x + cm.d * p.y + cm.ty};
}

TransformSpec TransformSpec::contrast(double factor) { return {TransformKind::contrast, factor, 0, {}}; }
TransformSpec TransformSpec::brightness(double delta) { return {TransformKind::brightness, delta, 0, {}}; }
TransformSpec TransformSpec::rotate(double degrees) { return {TransformKind::rotate, degrees, 0, {}}; }
TransformSpec TransformSpec::scale(double factor) { return {TransformKind::scale, factor, 0, {}}; }
TransformSpec TransformSpec::skew(double degrees) { return {TransformKind::skew, degrees, 0, {}}; }
TransformSpec TransformSpec::noise(double fraction, std::uint64_t seed) {
  return {TransformKind::noise, fraction, seed, {}};
}
TransformSpec TransformSpec::composite(std::vector<TransformSpec> members) {
  return {TransformKind::composite, 0.0, 0, std::move(members)};
}

void TransformSpec::validate() const {
  if (!std::isfinite(value)) throw ConfigError("transform parameter must be finite");
  switch (kind) {
    case TransformKind::scale:
      if (value <= 0.0) throw ConfigError("scale factor must be > 0");
      break;
    case TransformKind::noise:
      if (value < 0.0 || value > 1.0) throw ConfigError("noise fraction must be in [0, 1]");
      break;
    case TransformKind::skew:
      if (std::abs(value) >= 90.0) throw ConfigError("skew angle must be within (-90, 90) degrees");
      break;
    case TransformKind::composite:
      for (const auto& m : members) m.validate();
      break;
    default:
      break;
  }
}

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

const char* kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::contrast: return "contrast";
    case TransformKind::brightness: return "brightness";
    case TransformKind::rotate: return "rotate";
    case TransformKind::scale: return "scale";
    case TransformKind::skew: return "skew";
    case TransformKind::noise: return "noise";
    case TransformKind::composite: return "composite";
  }
  return "?";
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("bad number in transform spec: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string TransformSpec::to_string() const {
  if (kind == TransformKind::composite) {
    if (members.empty()) return "identity";
    std::string out;
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i) out += '+';
      out += members[i].to_string();
    }
    return out;
  }
  std::string out = std::string(kind_name(kind)) + ':' + format_number(value);
  if (kind == TransformKind::noise) out += '@' + std::to_string(seed);
  return out;
}

TransformSpec parse_transform(std::string_view text, std::uint64_t default_seed) {
  std::vector<TransformSpec> terms;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t plus = text.find('+', start);
    const std::string_view term =
        text.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start);
    if (term == "identity") {
      // contributes nothing
    } else {
      const std::size_t colon = term.find(':');
      if (colon == std::string_view::npos) {
        throw ConfigError("transform term needs kind:value, got '" + std::string(term) + "'");
      }
      const std::string_view kind = term.substr(0, colon);
      std::string_view arg = term.substr(colon + 1);
      std::uint64_t seed = default_seed;
      if (kind == "noise") {
        const std::size_t at = arg.find('@');
        if (at != std::string_view::npos) {
          seed = static_cast<std::uint64_t>(parse_double(arg.substr(at + 1)));
          arg = arg.substr(0, at);
        }
      }
      const double v = parse_double(arg);
      if (kind == "contrast") terms.push_back(TransformSpec::contrast(v));
      else if (kind == "brightness") terms.push_back(TransformSpec::brightness(v));
      else if (kind == "rotate") terms.push_back(TransformSpec::rotate(v));
      else if (kind == "scale") terms.push_back(TransformSpec::scale(v));
      else if (kind == "skew") terms.push_back(TransformSpec::skew(v));
      else if (kind == "noise") terms.push_back(TransformSpec::noise(v, seed));
      else throw ConfigError("unknown transform kind '" + std::string(kind) + "'");
    }
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  TransformSpec spec = terms.size() == 1 ? terms.front() : TransformSpec::composite(std::move(terms));
  spec.validate();
  return spec;
}

namespace {

Point image_center(int width, int height) {
  return {(width - 1) / 2.0, (height - 1) / 2.0};
}

CoordMap linear_about(Point center, double a, double b, double c, double d) {
  CoordMap m{a, b, c, d, 0.0, 0.0};
  m.tx = center.x - (a * center.x + b * center.y);
  m.ty = center.y - (c * center.x + d * center.y);
  return m;
}

int scaled_extent(int n, double factor) {
  return std::max(1, static_cast<int>(std::lround(n * factor)));
}

double sample_bilinear(const Image& src, double x, double y) {
  constexpr double kFill = 0.5;
  const int w = src.width();
  const int h = src.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) return kFill;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = fx > 0.0 ? x0 + 1 : x0;
  const int y1 = fy > 0.0 ? y0 + 1 : y0;
  const double top = src.at(x0, y0) * (1.0 - fx) + src.at(x1, y0) * fx;
  const double bottom = src.at(x0, y1) * (1.0 - fx) + src.at(x1, y1) * fx;
  return fy > 0.0 ? top * (1.0 - fy) + bottom * fy : top;
}

Image warp(const Image& src, const CoordMap& forward, int out_w, int out_h) {
  if (forward.is_identity() && out_w == src.width() && out_h == src.height()) return src;
  const CoordMap inv = forward.inverse();
  Image out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Point s = map_point(inv, {static_cast<double>(x), static_cast<double>(y)});
      out.at(x, y) = sample_bilinear(src, s.x, s.y);
    }
  }
  return out;
}

// Uniform double in [0, 1) from the top 53 bits; std distributions are not
// bit-stable across standard libraries.
double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

Image replace_with_noise(Image img, double fraction, std::uint64_t seed) {
  const std::size_t n = img.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto px = img.pixels();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(rng, n - i));
    std::swap(order[i], order[j]);
    px[order[i]] = unit_double(rng);
  }
  return img;
}

}  // namespace

CoordMap transform_map(const TransformSpec& spec, int width, int height) {
  const Point center = image_center(width, height);
  switch (spec.kind) {
    case TransformKind::contrast:
    case TransformKind::brightness:
    case TransformKind::noise:
      return CoordMap::identity();
    case TransformKind::rotate: {
      const double t = spec.value * std::numbers::pi / 180.0;
      return linear_about(center, std::cos(t), -std::sin(t), std::sin(t), std::cos(t));
    }
    case TransformKind::skew:
      return linear_about(center, 1.0, std::tan(spec.value * std::numbers::pi / 180.0), 0.0, 1.0);
    case TransformKind::scale:
      return CoordMap{spec.value, 0.0, 0.0, spec.value, 0.0, 0.0};
    case TransformKind::composite: {
      CoordMap acc;
      int w = width;
      int h = height;
      for (const auto& m : spec.members) {
        acc = transform_map(m, w, h).after(acc);
        if (m.kind == TransformKind::scale) {
          w = scaled_extent(w, m.value);
          h = scaled_extent(h, m.value);
        }
      }
      return acc;
    }
  }
  return CoordMap::identity();
}

TransformResult apply_transform(const Image& img, const TransformSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case TransformKind::contrast: {
      Image out = img;
      for (double& v : out.pixels()) v = 0.5 + spec.value * (v - 0.5);
      return {clip01(std::move(out)), CoordMap::identity()};
    }
    case TransformKind::brightness: {
      Image out = img;
      for (double& v : out.pixels()) v += spec.value;
      return {clip01(std::move(out)), CoordMap::identity()};
    }
    case TransformKind::noise:
      return {replace_with_noise(img, spec.value, spec.seed), CoordMap::identity()};
    case TransformKind::rotate:
    case TransformKind::skew: {
      const CoordMap m = transform_map(spec, img.width(), img.height());
      return {warp(img, m, img.width(), img.height()), m};
    }
    case TransformKind::scale: {
      const CoordMap m = transform_map(spec, img.width(), img.height());
      return {warp(img, m, scaled_extent(img.width(), spec.value),
                   scaled_extent(img.height(), spec.value)),
              m};
    }
    case TransformKind::composite: {
      TransformResult acc{img, CoordMap::identity()};
      for (const auto& m : spec.members) {
        TransformResult step = apply_transform(acc.image, m);
        acc.image = std::move(step.image);
        acc.map = step.map.after(acc.map);
      }
      return acc;
    }
  }
  return {img, CoordMap::identity()};
}

std::vector<NamedTransform> robustness_transforms(std::uint64_t noise_seed) {
  const auto contrast = TransformSpec::contrast(1.2);
  const auto brightness = TransformSpec::brightness(-0.2);
  const auto scale07 = TransformSpec::scale(0.7);
  const auto noise = TransformSpec::noise(0.1, noise_seed);
  const auto skew = TransformSpec::skew(7.0);
  return {
      {"A_contrast_1.2", contrast},
      {"B_brightness_-0.2", brightness},
      {"C_rotate_10", TransformSpec::rotate(10.0)},
      {"D_scale_0.7", scale07},
      {"E_scale_0.5", TransformSpec::scale(0.5)},
      {"F_noise_10pct", noise},
      {"G_skew_7", skew},
      {"H_scale_1.5", TransformSpec::scale(1.5)},
      {"I_all_ABDFG", TransformSpec::composite({contrast, brightness, scale07, noise, skew})},
  };
}

}  // namespace hiermatch
