// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace sdfscene {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const char* what) {
    throw std::runtime_error(path + ": " + what);
}

uint8_t quantize(double v) {
    if (v <= 0.0) return 0;
    if (v >= 1.0) return 255;
    return static_cast<uint8_t>(v * 255.0 + 0.5);
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<uint8_t>& data) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) fail(path, "cannot open for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) fail(path, "png allocation failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(path, "png encode error");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    const size_t stride = static_cast<size_t>(width) * channels;
    for (int y = 0; y < height; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(&data[static_cast<size_t>(y) * stride]);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> read_png(const std::string& path, int expect_channels, int& width, int& height) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) fail(path, "cannot open for reading");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) fail(path, "png allocation failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "png decode error");
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (expect_channels == 3) {
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    } else {
        if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA)
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);
    const size_t stride = png_get_rowbytes(png, info);
    if (stride != static_cast<size_t>(width) * expect_channels) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "unexpected channel layout");
    }
    std::vector<uint8_t> data(stride * static_cast<size_t>(height));
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int y = 0; y < height; ++y) rows[static_cast<size_t>(y)] = &data[static_cast<size_t>(y) * stride];
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return data;
}

constexpr char kDepthMagic[8] = {'S', 'D', 'F', 'D', 'E', 'P', 'T', 'H'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

} // namespace

void write_png_rgb(const std::string& path, const ImageRgb& img) {
    std::vector<uint8_t> data;
    data.reserve(img.size() * 3);
    for (const Vec3d& p : img.pixels) {
        data.push_back(quantize(p.x));
        data.push_back(quantize(p.y));
        data.push_back(quantize(p.z));
    }
    write_png(path, img.width, img.height, 3, data);
}

ImageRgb read_png_rgb(const std::string& path) {
    int w = 0, h = 0;
    const std::vector<uint8_t> data = read_png(path, 3, w, h);
    ImageRgb img(w, h);
    for (size_t i = 0; i < img.size(); ++i)
        img.pixels[i] = Vec3d(data[3 * i] / 255.0, data[3 * i + 1] / 255.0, data[3 * i + 2] / 255.0);
    return img;
}

void write_png_gray(const std::string& path, const ImageMask& img) {
    std::vector<uint8_t> data(img.pixels.begin(), img.pixels.end());
    write_png(path, img.width, img.height, 1, data);
}

ImageMask read_png_gray(const std::string& path) {
    int w = 0, h = 0;
    const std::vector<uint8_t> data = read_png(path, 1, w, h);
    ImageMask img(w, h);
    std::memcpy(img.pixels.data(), data.data(), data.size());
    return img;
}

void write_depth_f32(const std::string& path, const ImageDepth& img) {
    std::vector<uint8_t> out;
    out.reserve(16 + img.size() * 4);
    out.insert(out.end(), kDepthMagic, kDepthMagic + 8);
    put_u32(out, static_cast<uint32_t>(img.width));
    put_u32(out, static_cast<uint32_t>(img.height));
    for (double d : img.pixels) {
        const float f = static_cast<float>(d);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) fail(path, "cannot open for writing");
    if (std::fwrite(out.data(), 1, out.size(), file.get()) != out.size()) fail(path, "short write");
}

ImageDepth read_depth_f32(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) fail(path, "cannot open for reading");
    uint8_t header[16];
    if (std::fread(header, 1, 16, file.get()) != 16) fail(path, "truncated depth header");
    if (std::memcmp(header, kDepthMagic, 8) != 0) fail(path, "bad depth magic");
    const uint32_t w = get_u32(header + 8);
    const uint32_t h = get_u32(header + 12);
    ImageDepth img(static_cast<int>(w), static_cast<int>(h));
    std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 4);
    if (std::fread(raw.data(), 1, raw.size(), file.get()) != raw.size()) fail(path, "truncated depth data");
    for (size_t i = 0; i < img.size(); ++i) {
        const uint32_t bits = get_u32(&raw[4 * i]);
        float f;
        std::memcpy(&f, &bits, 4);
        img.pixels[i] = static_cast<double>(f);
    }
    return img;
}

} // namespace sdfscene
