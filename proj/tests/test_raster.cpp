#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "somtom/raster.hpp"

using namespace somtom;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path d = fs::temp_directory_path() / "somtom_raster_test";
    fs::create_directories(d);
    return d;
}

Raster random_raster(int w, int h, std::uint64_t seed) {
    Raster img = Raster::filled(w, h, 0, 0, 0);
    std::mt19937_64 gen(seed);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(gen() % 256);
    return img;
}

}  // namespace

TEST_CASE("filled constructors produce consistent buffers") {
    const Raster img = Raster::filled(4, 3, 10, 20, 30);
    CHECK(img.pixels.size() == 36);
    CHECK(img.pixels[img.offset(3, 2)] == 10);
    CHECK(img.pixels[img.offset(3, 2) + 1] == 20);
    CHECK(img.pixels[img.offset(3, 2) + 2] == 30);
    CHECK_NOTHROW(validate_raster(img));

    Raster broken = img;
    broken.pixels.pop_back();
    CHECK_THROWS_AS(validate_raster(broken), ValidationError);
    CHECK_THROWS_AS(validate_raster(Raster{}), ValidationError);
}

TEST_CASE("luma conversion uses the 601 weights with rounding") {
    Raster img = Raster::filled(2, 1, 0, 0, 0);
    img.set(0, 0, 255, 0, 0);
    img.set(1, 0, 100, 150, 200);
    const GrayImage g = to_gray(img);
    // round(0.299 * 255) = 76; round(29.9 + 88.05 + 22.8) = round(140.75) = 141
    CHECK(g.at(0, 0) == 76);
    CHECK(g.at(1, 0) == 141);

    const Raster back = to_rgb(g);
    CHECK(back.pixels[0] == 76);
    CHECK(back.pixels[1] == 76);
    CHECK(back.pixels[2] == 76);
}

TEST_CASE("png round-trips RGB images exactly") {
    const fs::path dir = temp_dir();
    const Raster img = random_raster(31, 17, 99);
    const fs::path file = dir / "roundtrip.png";
    write_png(file, img);
    const Raster back = read_png(file);
    CHECK(back == img);
}

TEST_CASE("pgm round-trips gray images exactly") {
    const fs::path dir = temp_dir();
    GrayImage img = GrayImage::filled(13, 7, 0);
    std::mt19937_64 gen(3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(gen() % 256);
    const fs::path file = dir / "roundtrip.pgm";
    write_pgm(file, img);
    const GrayImage back = read_pgm(file);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("reading a missing or corrupt file reports an error") {
    const fs::path dir = temp_dir();
    CHECK_THROWS_AS(read_png(dir / "nope.png"), Error);
    const fs::path junk = dir / "junk.png";
    std::ofstream(junk) << "this is not a png";
    CHECK_THROWS_AS(read_png(junk), Error);
    CHECK_THROWS_AS(read_pgm(dir / "nope.pgm"), Error);
}

TEST_CASE("frame readers dispatch on extension") {
    const fs::path dir = temp_dir() / "frames";
    fs::create_directories(dir);
    for (const auto& e : fs::directory_iterator(dir)) fs::remove(e.path());

    const Raster rgb = random_raster(8, 8, 5);
    write_png(dir / "frame_0002.png", rgb);
    GrayImage gray = GrayImage::filled(8, 8, 77);
    write_pgm(dir / "frame_0001.pgm", gray);
    std::ofstream(dir / "notes.txt") << "ignored";

    const auto files = list_frame_files(dir);
    REQUIRE(files.size() == 2);
    // Lexicographic: frame_0001.pgm before frame_0002.png.
    CHECK(files[0].filename() == "frame_0001.pgm");
    CHECK(files[1].filename() == "frame_0002.png");

    CHECK(read_frame_rgb(files[1]) == rgb);
    CHECK(read_frame_gray(files[0]).pixels == gray.pixels);
    // PGM promoted to RGB has equal channels.
    const Raster promoted = read_frame_rgb(files[0]);
    CHECK(promoted.pixels[0] == 77);
    CHECK(promoted.pixels[1] == 77);
    CHECK(promoted.pixels[2] == 77);
}
