#include "somtom/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace somtom {

GrayImage GrayImage::filled(int w, int h, std::uint8_t value) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<std::size_t>(w) * h, value);
    return img;
}

Raster Raster::filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Raster img;
    img.width = w;
    img.height = h;
    img.pixels.resize(3 * static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
        img.pixels[i] = r;
        img.pixels[i + 1] = g;
        img.pixels[i + 2] = b;
    }
    return img;
}

void validate_raster(const Raster& img) {
    if (img.width <= 0 || img.height <= 0) {
        throw ValidationError("raster: dimensions must be positive");
    }
    if (img.pixels.size() != 3 * static_cast<std::size_t>(img.width) * img.height) {
        throw ValidationError("raster: pixel buffer size mismatch");
    }
}

GrayImage to_gray(const Raster& img) {
    validate_raster(img);
    GrayImage out;
    out.width = img.width;
    out.height = img.height;
    out.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const double y = 0.299 * img.pixels[3 * i] + 0.587 * img.pixels[3 * i + 1] +
                         0.114 * img.pixels[3 * i + 2];
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(y));
    }
    return out;
}

Raster to_rgb(const GrayImage& img) {
    Raster out;
    out.width = img.width;
    out.height = img.height;
    out.pixels.resize(3 * img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = img.pixels[i];
    }
    return out;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Raster read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ParseError("png: cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ParseError("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ParseError("png: out of memory");
    }
    std::vector<png_bytep> row_ptrs;
    Raster img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("png: failed to decode " + path.string());
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize every layout to 8-bit RGB.
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.pixels.resize(3 * static_cast<std::size_t>(img.width) * img.height);
    row_ptrs.resize(img.height);
    for (int y = 0; y < img.height; ++y) {
        row_ptrs[y] = img.pixels.data() + img.offset(0, y);
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::filesystem::path& path, const Raster& img) {
    validate_raster(img);
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error("png: cannot write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png: out of memory");
    }
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png: failed to encode " + path.string());
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    row_ptrs.resize(img.height);
    Raster& mut = const_cast<Raster&>(img);
    for (int y = 0; y < img.height; ++y) {
        row_ptrs[y] = mut.pixels.data() + img.offset(0, y);
    }
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("pgm: cannot open " + path.string());

    std::string magic;
    in >> magic;
    if (magic != "P5") throw ParseError("pgm: expected P5 magic in " + path.string());

    const auto next_token = [&in, &path]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw ParseError("pgm: truncated header in " + path.string());
    };

    GrayImage img;
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (img.width <= 0 || img.height <= 0 || maxval != 255) {
        throw ParseError("pgm: only 8-bit images supported: " + path.string());
    }
    in.get();  // single whitespace after maxval
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw ParseError("pgm: truncated pixel data in " + path.string());
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("pgm: cannot write " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
}

GrayImage read_frame_gray(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return to_gray(read_png(path));
    throw ValidationError("frame: unsupported extension " + ext);
}

Raster read_frame_rgb(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".pgm") return to_rgb(read_pgm(path));
    if (ext == ".png") return read_png(path);
    throw ValidationError("frame: unsupported extension " + ext);
}

std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir)) {
        throw ValidationError("frames: not a directory: " + dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace somtom
