// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfscene/vec.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sdfscene {

template <typename P>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<P> pixels;

    Image() = default;
    Image(int w, int h, const P& fill = P{})
        : width(w), height(h), pixels(static_cast<size_t>(w) * static_cast<size_t>(h), fill) {}

    size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
    P& at(int x, int y) { return pixels[index(x, y)]; }
    const P& at(int x, int y) const { return pixels[index(x, y)]; }
    bool same_size(int w, int h) const { return width == w && height == h; }
    size_t size() const { return pixels.size(); }
};

using ImageRgb = Image<Vec3d>;     // [0,1] float color
using ImageDepth = Image<double>;  // camera-frame z
using ImageMask = Image<uint8_t>;  // 0/1 or instance ids
using ImageIndex = Image<int32_t>;

// 8-bit PNG round trips. Color values clamp to [0,1] and quantize to 255
// levels; encoding settings are fixed so regeneration is byte-identical.
void write_png_rgb(const std::string& path, const ImageRgb& img);
ImageRgb read_png_rgb(const std::string& path);
void write_png_gray(const std::string& path, const ImageMask& img);
ImageMask read_png_gray(const std::string& path);

// Raw float32 depth raster: 16-byte header (8-byte magic "SDFDEPTH",
// uint32 width, uint32 height, little-endian), then row-major float32.
void write_depth_f32(const std::string& path, const ImageDepth& img);
ImageDepth read_depth_f32(const std::string& path);

} // namespace sdfscene
