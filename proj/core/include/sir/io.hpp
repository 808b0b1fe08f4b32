#pragma once

#include <filesystem>

#include "sir/geometry.hpp"
#include "sir/image.hpp"

namespace sir {

// Binary portable pixmaps: P5 (grayscale) and P6 (RGB), maxval 255.
// Pixels map to [0, 1]. The face box is not part of the format.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& image);

// pts-style annotations: "version" and "n_points" headers, then one "x y"
// line per landmark between braces, in original image coordinates.
LandmarkSet read_pts(const std::filesystem::path& path);
void write_pts(const std::filesystem::path& path, const LandmarkSet& landmarks);

}  // namespace sir
