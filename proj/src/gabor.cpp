#include "hiermatch/gabor.hpp"

#include "hiermatch/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numbers>

namespace hiermatch {

double f0_from_bandwidth(double sigma, double phi) {
  if (!(sigma > 0.0) || !(phi > 0.0)) throw ConfigError("sigma and bandwidth must be positive");
  const double p = std::exp2(phi);
  const double product = 2.0 * std::sqrt(std::numbers::ln2) * (p + 1.0) / (p - 1.0);
  return product / (2.0 * std::numbers::pi * sigma);
}

double GaborKernel::sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

GaborKernel make_kernel(double sigma, double theta, double phi) {
  GaborKernel k;
  k.sigma = sigma;
  k.theta = theta;
  k.f0 = f0_from_bandwidth(sigma, phi);
  k.half_width = static_cast<int>(std::ceil(6.0 * sigma));
  const int hw = k.half_width;
  const int side = k.side();
  k.weights.assign(static_cast<std::size_t>(side) * side, 0.0);

  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);
  const double denom = 8.0 * sigma * sigma;
  const double omega = 2.0 * std::numbers::pi * k.f0;
  auto idx = [&](int dx, int dy) { return static_cast<std::size_t>(dy + hw) * side + (dx + hw); };

  // Fill the half-plane and mirror with a sign flip so that
  // w(x, y) == -w(-x, -y) holds bit-exactly.
  for (int dy = -hw; dy <= hw; ++dy) {
    for (int dx = -hw; dx <= hw; ++dx) {
      if (dy < 0 || (dy == 0 && dx < 0)) continue;
      const double u = dx * ct + dy * st;
      const double v = dy * ct - dx * st;
      const double w = norm * std::exp(-(4.0 * u * u + v * v) / denom) * std::sin(omega * u);
      if (dx == 0 && dy == 0) {
        k.weights[idx(0, 0)] = 0.0;
      } else {
        k.weights[idx(dx, dy)] = w;
        k.weights[idx(-dx, -dy)] = -w;
      }
    }
  }
  return k;
}

std::vector<double> default_orientations(int count) {
  if (count < 1) throw ConfigError("orientation count must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[i] = std::numbers::pi * i / count;
  return out;
}

GaborBank GaborBank::make(double sigma, int orientation_count, double phi) {
  GaborBank bank;
  bank.sigma = sigma;
  bank.bandwidth_phi = phi;
  bank.orientations = default_orientations(orientation_count);
  for (double theta : bank.orientations) bank.kernels.push_back(make_kernel(sigma, theta, phi));
  return bank;
}

namespace {

// FFTW's planner is not re-entrant; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealToComplexPlan {
public:
  RealToComplexPlan(int rows, int cols, double* in, std::complex<double>* out) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_2d(rows, cols, in, reinterpret_cast<fftw_complex*>(out), FFTW_ESTIMATE);
  }
  ~RealToComplexPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealToComplexPlan(const RealToComplexPlan&) = delete;
  RealToComplexPlan& operator=(const RealToComplexPlan&) = delete;
  void execute() const { fftw_execute(plan_); }

private:
  fftw_plan plan_ = nullptr;
};

class ComplexToRealPlan {
public:
  ComplexToRealPlan(int rows, int cols, std::complex<double>* in, double* out) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_c2r_2d(rows, cols, reinterpret_cast<fftw_complex*>(in), out, FFTW_ESTIMATE);
  }
  ~ComplexToRealPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  ComplexToRealPlan(const ComplexToRealPlan&) = delete;
  ComplexToRealPlan& operator=(const ComplexToRealPlan&) = delete;
  void execute() const { fftw_execute(plan_); }

private:
  fftw_plan plan_ = nullptr;
};

int reflect101(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

void check_fits(const Image& img, int half_width) {
  const int side = 2 * half_width + 1;
  if (side > img.width() || side > img.height()) {
    throw SizeError("kernel of side " + std::to_string(side) + " does not fit a " +
                    std::to_string(img.width()) + "x" + std::to_string(img.height()) + " image");
  }
}

}  // namespace

std::vector<ResponseMap> convolve_bank(const Image& img, const GaborBank& bank) {
  if (bank.kernels.empty()) return {};
  const int hw = bank.half_width();
  check_fits(img, hw);
  const int w = img.width();
  const int h = img.height();
  const int cols = w + 2 * hw;
  const int rows = h + 2 * hw;
  const int ccols = cols / 2 + 1;
  const std::size_t real_n = static_cast<std::size_t>(rows) * cols;
  const std::size_t cplx_n = static_cast<std::size_t>(rows) * ccols;

  // The padded image is large enough that circular correlation never wraps
  // into the region that is cropped back out.
  std::vector<double> spatial(real_n);
  for (int y = 0; y < rows; ++y) {
    const int sy = reflect101(y - hw, h);
    for (int x = 0; x < cols; ++x) {
      spatial[static_cast<std::size_t>(y) * cols + x] = img.at(reflect101(x - hw, w), sy);
    }
  }
  std::vector<std::complex<double>> image_spectrum(cplx_n);
  RealToComplexPlan(rows, cols, spatial.data(), image_spectrum.data()).execute();

  std::vector<std::complex<double>> kernel_spectrum(cplx_n);
  RealToComplexPlan kernel_plan(rows, cols, spatial.data(), kernel_spectrum.data());
  ComplexToRealPlan inverse_plan(rows, cols, kernel_spectrum.data(), spatial.data());
  const double scale = 1.0 / static_cast<double>(real_n);

  std::vector<ResponseMap> out;
  out.reserve(bank.kernels.size());
  for (const GaborKernel& k : bank.kernels) {
    if (k.half_width != hw) throw ShapeError("bank kernels must share one size");
    std::fill(spatial.begin(), spatial.end(), 0.0);
    for (int dy = -hw; dy <= hw; ++dy) {
      const int yy = (dy + rows) % rows;
      for (int dx = -hw; dx <= hw; ++dx) {
        spatial[static_cast<std::size_t>(yy) * cols + (dx + cols) % cols] = k.at(dx, dy);
      }
    }
    kernel_plan.execute();
    for (std::size_t i = 0; i < cplx_n; ++i) {
      kernel_spectrum[i] = image_spectrum[i] * std::conj(kernel_spectrum[i]);
    }
    inverse_plan.execute();

    ResponseMap rm{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
    for (int y = 0; y < h; ++y) {
      const double* row = spatial.data() + static_cast<std::size_t>(y + hw) * cols + hw;
      double* dst = rm.values.data() + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) dst[x] = row[x] * scale;
    }
    out.push_back(std::move(rm));
  }
  return out;
}

ResponseMap convolve(const Image& img, const GaborKernel& k) {
  GaborBank single;
  single.sigma = k.sigma;
  single.orientations = {k.theta};
  single.kernels = {k};
  return std::move(convolve_bank(img, single).front());
}

double pool_rf(const ResponseMap& rm, Point center, double radius, bool& covered) {
  const double r2 = radius * radius;
  const int x0 = std::max(0, static_cast<int>(std::ceil(center.x - radius)));
  const int x1 = std::min(rm.width - 1, static_cast<int>(std::floor(center.x + radius)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(center.y - radius)));
  const int y1 = std::min(rm.height - 1, static_cast<int>(std::floor(center.y + radius)));
  double best = -std::numeric_limits<double>::infinity();
  covered = false;
  for (int y = y0; y <= y1; ++y) {
    const double dy = y - center.y;
    const double* row = rm.values.data() + static_cast<std::size_t>(y) * rm.width;
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - center.x;
      if (dx * dx + dy * dy <= r2) {
        covered = true;
        best = std::max(best, row[x]);
      }
    }
  }
  return covered ? best : 0.0;
}

double pool_rf(const ResponseMap& rm, Point center, double radius) {
  bool covered = false;
  return pool_rf(rm, center, radius, covered);
}

std::string kernel_to_csv(const GaborKernel& k) {
  std::string out;
  char buf[40];
  for (int dy = -k.half_width; dy <= k.half_width; ++dy) {
    for (int dx = -k.half_width; dx <= k.half_width; ++dx) {
      std::snprintf(buf, sizeof buf, "%s%.17g", dx == -k.half_width ? "" : ",", k.at(dx, dy));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace hiermatch
