#pragma once

#include "hiermatch/image.hpp"

#include <cstdint>

namespace hiermatch {

// Procedural test scene: dead-leaves occlusion of discs, rectangles and bars
// with power-law sizes, so every scale carries structure. Output spans [0.25, 0.85] so that contrast
// 1.2 (pivot 0.5) and brightness -0.2 never clip.
Image make_textured_image(int width, int height, std::uint64_t seed);

}  // namespace hiermatch
