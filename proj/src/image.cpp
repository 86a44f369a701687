#include "hiermatch/image.hpp"

#include "hiermatch/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace hiermatch {

Image::Image(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw SizeError("image dimensions must be non-negative");
  }
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Image::Image(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0 ||
      data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw SizeError("image data length does not match width x height");
  }
}

Image clip01(Image img) {
  for (double& v : img.pixels()) {
    v = std::clamp(v, 0.0, 1.0);
  }
  return img;
}

namespace {

// Minimal cursor over an in-memory PNM file.
class PnmReader {
public:
  explicit PnmReader(std::string bytes) : bytes_(std::move(bytes)) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError("PNM: expected an integer in header or raster");
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000) throw FormatError("PNM: integer out of range");
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates the header from a binary raster.
  void skip_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError("PNM: missing whitespace before raster");
    }
    ++pos_;
  }

  unsigned read_binary_sample(bool wide) {
    const std::size_t need = wide ? 2 : 1;
    if (pos_ + need > bytes_.size()) throw FormatError("PNM: truncated raster");
    unsigned v = static_cast<unsigned char>(bytes_[pos_]);
    if (wide) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + 1]);
    pos_ += need;
    return v;
  }

  std::string magic() {
    if (bytes_.size() < 2 || bytes_[0] != 'P') throw FormatError("not a PNM file");
    pos_ = 2;
    return bytes_.substr(0, 2);
  }

private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());

  PnmReader reader(std::move(bytes));
  const std::string magic = reader.magic();
  const bool ascii = magic == "P2" || magic == "P3";
  const bool color = magic == "P3" || magic == "P6";
  if (magic != "P2" && magic != "P5" && magic != "P3" && magic != "P6") {
    throw FormatError("unsupported image format '" + magic + "' in " + path.string());
  }

  const long width = reader.read_int();
  const long height = reader.read_int();
  const long maxval = reader.read_int();
  if (width <= 0 || height <= 0 || width > 65536 || height > 65536) {
    throw FormatError("PNM: bad dimensions");
  }
  if (maxval <= 0 || maxval > 65535) throw FormatError("PNM: bad maxval");
  if (!ascii) reader.skip_single_whitespace();

  const bool wide = maxval > 255;
  const int channels = color ? 3 : 1;
  const auto scale = static_cast<double>(maxval);
  std::vector<double> data(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (double& px : data) {
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) {
      const long s = ascii ? reader.read_int() : static_cast<long>(reader.read_binary_sample(wide));
      if (s > maxval) throw FormatError("PNM: sample exceeds maxval");
      sum += static_cast<double>(s);
    }
    px = channels == 1 ? sum / scale : (sum / 3.0) / scale;
  }
  return Image(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

void save_pgm(const Image& img, const std::filesystem::path& path, int maxval) {
  if (maxval <= 0 || maxval > 65535) throw FormatError("PGM: maxval must be in 1..65535");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  const bool wide = maxval > 255;
  std::string raster;
  raster.reserve(img.size() * (wide ? 2 : 1));
  for (double v : img.pixels()) {
    const auto s = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (wide) raster.push_back(static_cast<char>((s >> 8) & 0xff));
    raster.push_back(static_cast<char>(s & 0xff));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace hiermatch
