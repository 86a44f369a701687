#include "hiermatch/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace hiermatch {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Image make_textured_image(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> acc(static_cast<std::size_t>(width) * height, 0.0);
  std::vector<char> covered(acc.size(), 0);
  std::size_t remaining = acc.size();

  // Dead-leaves scene: opaque shapes dropped front to back until the canvas
  // is covered. Sizes follow a power law so edges appear at every scale.
  const double r_min = 3.0, r_max = 0.2 * std::min(width, height);
  for (int s = 0; remaining > 0 && s < 200000; ++s) {
    const double u = unit(rng);
    const double size = r_min * r_max / std::sqrt(r_max * r_max - u * (r_max * r_max - r_min * r_min));
    const double cx = unit(rng) * (width + 2 * size) - size;
    const double cy = unit(rng) * (height + 2 * size) - size;
    const double level = unit(rng);
    const double ramp = (unit(rng) - 0.5) * 0.02;
    const int kind = static_cast<int>(rng() % 3);
    const double angle = unit(rng) * 3.141592653589793;
    const double ca = std::cos(angle), sa = std::sin(angle);
    const int x0 = std::max(0, static_cast<int>(cx - 2 * size));
    const int x1 = std::min(width - 1, static_cast<int>(cx + 2 * size));
    const int y0 = std::max(0, static_cast<int>(cy - 2 * size));
    const int y1 = std::min(height - 1, static_cast<int>(cy + 2 * size));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        if (covered[i]) continue;
        const double dx = x - cx, dy = y - cy;
        const double pu = dx * ca + dy * sa, pv = -dx * sa + dy * ca;
        bool inside = false;
        if (kind == 0) inside = dx * dx + dy * dy <= size * size;
        else if (kind == 1) inside = std::abs(pu) <= size && std::abs(pv) <= 0.6 * size;
        else inside = std::abs(pu) <= 1.8 * size && std::abs(pv) <= 0.3 * size;
        if (!inside) continue;
        acc[i] = level + ramp * pu;
        covered[i] = 1;
        --remaining;
      }
    }
  }

  const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
  const double a = *lo, b = *hi;
  for (double& v : acc) v = 0.25 + 0.6 * (b > a ? (v - a) / (b - a) : 0.5);
  return Image(width, height, std::move(acc));
}

}  // namespace hiermatch
