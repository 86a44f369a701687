#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace hiermatch {

// Grayscale raster, row-major, one double per pixel. Values loaded from disk
// or produced by photometric transforms lie in [0, 1].
class Image {
public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  double at(int x, int y) const { return data_[index(x, y)]; }
  double& at(int x, int y) { return data_[index(x, y)]; }

  std::span<const double> pixels() const { return data_; }
  std::span<double> pixels() { return data_; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  friend bool operator==(const Image&, const Image&) = default;

private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Reads PGM (P2/P5) or PPM (P3/P6). Color is reduced to the mean of R, G, B.
// Throws IoError when the file cannot be opened, FormatError otherwise.
Image load_image(const std::filesystem::path& path);

// Writes binary PGM (P5). maxval up to 255 uses one byte per sample, larger
// values two bytes big-endian. Values are clipped to [0, 1] and rounded.
void save_pgm(const Image& img, const std::filesystem::path& path, int maxval = 255);

Image clip01(Image img);

}  // namespace hiermatch
