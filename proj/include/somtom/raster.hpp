#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "somtom/errors.hpp"

namespace somtom {

/// 8-bit single-channel image (luma).
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, width*height

    static GrayImage filled(int w, int h, std::uint8_t value);

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// 8-bit interleaved RGB image.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB, 3*width*height

    static Raster filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    std::size_t offset(int x, int y) const {
        return 3 * (static_cast<std::size_t>(y) * width + x);
    }
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const std::size_t o = offset(x, y);
        pixels[o] = r;
        pixels[o + 1] = g;
        pixels[o + 2] = b;
    }

    bool operator==(const Raster&) const = default;
};

void validate_raster(const Raster& img);

/// ITU-R 601 luma: round(0.299 R + 0.587 G + 0.114 B).
GrayImage to_gray(const Raster& img);
Raster to_rgb(const GrayImage& img);

// PNG via libpng; any input layout is expanded to 8-bit RGB on read.
Raster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raster& img);

// Binary PGM (P5), 8-bit.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

/// Reads one frame image by extension (.png/.pgm) and converts to luma.
GrayImage read_frame_gray(const std::filesystem::path& path);
/// Reads one frame image by extension as RGB.
Raster read_frame_rgb(const std::filesystem::path& path);

/// Lists frame files (*.png, *.pgm) in a directory in lexicographic order.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

}  // namespace somtom
