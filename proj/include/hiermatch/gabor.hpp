#pragma once

#include "hiermatch/image.hpp"
#include "hiermatch/point.hpp"

#include <string>
#include <vector>

namespace hiermatch {

inline constexpr double kDefaultBandwidth = 1.5;  // octaves

// Spatial frequency (cycles/pixel) of a Gabor kernel with envelope scale
// sigma and octave bandwidth phi:
//   2*pi*f0*sigma = 2*sqrt(ln 2) * (2^phi + 1) / (2^phi - 1)
double f0_from_bandwidth(double sigma, double phi);

// Odd-phase Gabor kernel sampled on integer offsets in [-half_width, half_width]^2:
//   w(x, y) = exp(-(4u^2 + v^2) / (8 sigma^2)) * sin(2 pi f0 u) / (sqrt(2 pi) sigma)
// with u = x cos(theta) + y sin(theta), v = y cos(theta) - x sin(theta).
struct GaborKernel {
  double sigma = 0.0;
  double theta = 0.0;
  double f0 = 0.0;
  int half_width = 0;
  std::vector<double> weights;  // row-major, side() x side()

  int side() const { return 2 * half_width + 1; }
  double at(int dx, int dy) const {
    return weights[static_cast<std::size_t>(dy + half_width) * side() + (dx + half_width)];
  }
  double sum() const;
};

GaborKernel make_kernel(double sigma, double theta, double phi = kDefaultBandwidth);

// Orientations k*pi/count for k = 0..count-1.
std::vector<double> default_orientations(int count);

struct GaborBank {
  double sigma = 0.0;
  double bandwidth_phi = kDefaultBandwidth;
  std::vector<double> orientations;
  std::vector<GaborKernel> kernels;

  static GaborBank make(double sigma, int orientation_count, double phi = kDefaultBandwidth);
  int half_width() const { return kernels.empty() ? 0 : kernels.front().half_width; }
};

// Signed filter output, same dimensions as the source image.
struct ResponseMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Correlates the image with the kernel at every pixel, borders reflected
// (mirror without repeating the edge pixel). FFT-backed.
// Throws SizeError when the kernel side exceeds either image dimension.
ResponseMap convolve(const Image& img, const GaborKernel& k);

// One response map per kernel of the bank; the padded image spectrum is
// computed once and shared.
std::vector<ResponseMap> convolve_bank(const Image& img, const GaborBank& bank);

// Maximum signed response over pixels within `radius` of `center`. Pixels
// outside the map are ignored; returns 0 when none are inside.
double pool_rf(const ResponseMap& rm, Point center, double radius);

// Same as pool_rf, but reports through `covered` whether any pixel was inside.
double pool_rf(const ResponseMap& rm, Point center, double radius, bool& covered);

// Kernel weights as CSV, one kernel row per line.
std::string kernel_to_csv(const GaborKernel& k);

}  // namespace hiermatch
