#include "hiermatch/template.hpp"

#include "hiermatch/errors.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>

namespace hiermatch {

double training_margin(const StackConfig& cfg) {
  return layer_geometry(cfg, cfg.num_layers).element_footprint_radius();
}

Template train(const ResponsePyramid& pyramid, std::span<const Point> points,
               std::string source_image_id) {
  const StackConfig& cfg = pyramid.config();
  const Image& img = pyramid.image();
  if (points.empty()) throw ConfigError("training needs at least one point");

  // Layer M has the largest footprint; smaller layers fit whenever it does.
  const double r = training_margin(cfg);
  for (const Point& p : points) {
    if (p.x - r < 0.0 || p.y - r < 0.0 || p.x + r > img.width() - 1 || p.y + r > img.height() - 1) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "point (%g, %g) is too close to the border for layer %d", p.x,
                    p.y, cfg.num_layers);
      throw CoverageError(buf);
    }
  }

  Template t;
  t.stack_config = cfg;
  t.source_image_id = std::move(source_image_id);
  t.key_points.reserve(points.size());
  for (const Point& p : points) {
    KeyPointTemplate kp;
    kp.training_location = p;
    for (int m = 1; m <= cfg.num_layers; ++m) {
      kp.layers.push_back(pyramid.extract(m, p));
      kp.relative_positions.push_back(pyramid.geometry(m).element_offsets);
    }
    t.key_points.push_back(std::move(kp));
  }
  return t;
}

Template train(const Image& img, std::span<const Point> points, const StackConfig& cfg,
               std::string source_image_id) {
  return train(ResponsePyramid(img, cfg), points, std::move(source_image_id));
}

std::vector<Point> sample_training_points(int width, int height, const StackConfig& cfg, int n,
                                          std::uint64_t seed) {
  const int margin = static_cast<int>(std::ceil(training_margin(cfg)));
  const int lo_x = margin, hi_x = width - 1 - margin;
  const int lo_y = margin, hi_y = height - 1 - margin;
  if (hi_x < lo_x || hi_y < lo_y) {
    throw CoverageError("image too small to train a " + std::to_string(cfg.num_layers) + "-layer stack");
  }
  std::mt19937_64 rng(seed);
  auto draw = [&](int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(rng() % span);
  };
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int x = draw(lo_x, hi_x);
    const int y = draw(lo_y, hi_y);
    pts.push_back({static_cast<double>(x), static_cast<double>(y)});
  }
  return pts;
}

namespace {

constexpr char kMagic[4] = {'H', 'M', 'T', 'P'};

class Writer {
public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t>& buffer() { return buf_; }

private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > b_.size() - pos_) throw FormatError("template file truncated");
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> payload) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
  return static_cast<std::uint32_t>(crc);
}

void append_section(Writer& out, std::span<const std::uint8_t> payload) {
  out.u32(static_cast<std::uint32_t>(payload.size()));
  out.bytes(payload);
  out.u32(crc_of(payload));
}

std::span<const std::uint8_t> read_section(Reader& in, const char* what) {
  const std::uint32_t len = in.u32();
  auto payload = in.take(len);
  if (in.u32() != crc_of(payload)) {
    throw ChecksumError(std::string("template checksum mismatch in ") + what + " section");
  }
  return payload;
}

}  // namespace

std::vector<std::uint8_t> serialize_template(const Template& t) {
  const StackConfig& cfg = t.stack_config;
  Writer out;
  for (char c : kMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u32(t.format_version);

  Writer header;
  header.u32(static_cast<std::uint32_t>(cfg.num_layers));
  header.f64(cfg.base_sigma);
  header.u32(static_cast<std::uint32_t>(cfg.orientations));
  header.f64(cfg.element_spacing_factor);
  header.f64(cfg.bandwidth_phi);
  header.u32(static_cast<std::uint32_t>(t.source_image_id.size()));
  for (char c : t.source_image_id) header.u8(static_cast<std::uint8_t>(c));
  header.u32(static_cast<std::uint32_t>(t.key_points.size()));
  append_section(out, header.buffer());

  const std::size_t entries = static_cast<std::size_t>(kHexCount) * cfg.orientations;
  for (const KeyPointTemplate& kp : t.key_points) {
    if (kp.num_layers() != cfg.num_layers ||
        kp.relative_positions.size() != static_cast<std::size_t>(cfg.num_layers)) {
      throw ShapeError("key point layer count does not match the stack config");
    }
    Writer sec;
    sec.f64(kp.training_location.x);
    sec.f64(kp.training_location.y);
    for (int m = 1; m <= cfg.num_layers; ++m) {
      for (const Point& y : kp.relative_positions[m - 1]) {
        sec.f64(y.x);
        sec.f64(y.y);
      }
      for (const FeatureVector& fv : kp.layer(m)) {
        if (fv.q.size() != entries) throw ShapeError("feature vector size does not match config");
        sec.bytes(fv.q);
      }
    }
    append_section(out, sec.buffer());
  }
  return std::move(out.buffer());
}

Template deserialize_template(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4);
  for (int i = 0; i < 4; ++i) {
    if (magic[i] != static_cast<std::uint8_t>(kMagic[i])) throw FormatError("not a template file (bad magic)");
  }
  Template t;
  t.format_version = in.u32();
  if (t.format_version != kTemplateFormatVersion) {
    throw VersionError("template format version " + std::to_string(t.format_version) +
                       " is not supported (expected " + std::to_string(kTemplateFormatVersion) + ")");
  }

  Reader header(read_section(in, "header"));
  StackConfig& cfg = t.stack_config;
  cfg.num_layers = static_cast<int>(header.u32());
  cfg.base_sigma = header.f64();
  cfg.orientations = static_cast<int>(header.u32());
  cfg.element_spacing_factor = header.f64();
  cfg.bandwidth_phi = header.f64();
  const std::uint32_t id_len = header.u32();
  auto id = header.take(id_len);
  t.source_image_id.assign(id.begin(), id.end());
  const std::uint32_t count = header.u32();
  if (!header.done()) throw FormatError("template header has trailing bytes");
  if (cfg.num_layers > 64 || cfg.orientations > 256) throw FormatError("template header out of range");
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("template header invalid: ") + e.what());
  }

  const std::size_t entries = static_cast<std::size_t>(kHexCount) * cfg.orientations;
  for (std::uint32_t k = 0; k < count; ++k) {
    Reader sec(read_section(in, "key point"));
    KeyPointTemplate kp;
    kp.training_location.x = sec.f64();
    kp.training_location.y = sec.f64();
    for (int m = 1; m <= cfg.num_layers; ++m) {
      HexPattern rel{};
      for (Point& y : rel) {
        y.x = sec.f64();
        y.y = sec.f64();
      }
      kp.relative_positions.push_back(rel);
      LayerFeatures layer;
      for (int l = 0; l < kHexCount; ++l) {
        FeatureVector& fv = layer[l];
        fv.address = {m, l};
        fv.orientations = cfg.orientations;
        auto q = sec.take(entries);
        fv.q.assign(q.begin(), q.end());
        for (std::uint8_t v : fv.q) {
          if (v > kQuantLevels) throw FormatError("feature entry out of range");
        }
      }
      kp.layers.push_back(std::move(layer));
    }
    if (!sec.done()) throw FormatError("key point section has trailing bytes");
    t.key_points.push_back(std::move(kp));
  }
  if (!in.done()) throw FormatError("template file has trailing bytes");
  return t;
}

void save_template(const Template& t, const std::filesystem::path& path) {
  const auto bytes = serialize_template(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write template: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Template load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open template: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_template(bytes);
}

}  // namespace hiermatch
