#pragma once

#include "hiermatch/features.hpp"
#include "hiermatch/image.hpp"
#include "hiermatch/point.hpp"
#include "hiermatch/topology.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hiermatch {

inline constexpr std::uint32_t kTemplateFormatVersion = 1;

// Multi-layer description of one trained key point. Index 0 of `layers` and
// `relative_positions` is layer 1.
struct KeyPointTemplate {
  Point training_location;
  std::vector<LayerFeatures> layers;
  // Element center minus training location, per layer and element.
  std::vector<HexPattern> relative_positions;

  int num_layers() const { return static_cast<int>(layers.size()); }
  const LayerFeatures& layer(int m) const { return layers.at(m - 1); }
  Point relative_position(int m, int element) const { return relative_positions.at(m - 1).at(element); }

  friend bool operator==(const KeyPointTemplate&, const KeyPointTemplate&) = default;
};

struct Template {
  StackConfig stack_config;
  std::uint32_t format_version = kTemplateFormatVersion;
  std::vector<KeyPointTemplate> key_points;
  std::string source_image_id;

  friend bool operator==(const Template&, const Template&) = default;
};

// Radius around a point that must lie inside the image for training at every
// layer: the center-element footprint of the largest layer.
double training_margin(const StackConfig& cfg);

// Builds the template for each point. Throws CoverageError naming the point
// and layer when a point is too close to the border.
Template train(const Image& img, std::span<const Point> points, const StackConfig& cfg,
               std::string source_image_id = {});

// Same, reusing an existing response pyramid of the training image.
Template train(const ResponsePyramid& pyramid, std::span<const Point> points,
               std::string source_image_id = {});

// n integer pixel positions drawn uniformly from the trainable interior.
std::vector<Point> sample_training_points(int width, int height, const StackConfig& cfg, int n,
                                          std::uint64_t seed);

// Binary layout: "HMTP", u32 version, then length-prefixed sections (one
// header, one per key point), each followed by the CRC32 of its payload.
// Integers little-endian, reals as raw IEEE-754 binary64.
std::vector<std::uint8_t> serialize_template(const Template& t);
Template deserialize_template(std::span<const std::uint8_t> bytes);

void save_template(const Template& t, const std::filesystem::path& path);
Template load_template(const std::filesystem::path& path);

}  // namespace hiermatch
