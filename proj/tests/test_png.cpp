#include "infestscope/png_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

namespace fs = std::filesystem;
using namespace infestscope;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "infestscope_png_test";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

Raster random_raster(std::mt19937& rng, int w, int h, int channels) {
    Raster r = make_raster(w, h, channels, 0.0);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& v : r.data) v = byte(rng) / 255.0;
    return r;
}

}  // namespace

TEST(PngIo, ColorRoundTripIsExactOnQuantizedData) {
    std::mt19937 rng(91);
    const Raster r = random_raster(rng, 37, 23, 3);  // already on the 1/255 lattice
    const fs::path p = temp_dir() / "rt.png";
    save_png(r, p);
    const Raster back = load_png(p);
    ASSERT_EQ(back.width, r.width);
    ASSERT_EQ(back.height, r.height);
    ASSERT_EQ(back.channels, 3);
    EXPECT_TRUE(back.data == r.data);
}

TEST(PngIo, GrayRoundTrip) {
    std::mt19937 rng(92);
    const Raster r = random_raster(rng, 16, 31, 1);
    const fs::path p = temp_dir() / "gray.png";
    save_png(r, p);
    const Raster back = load_png(p);
    ASSERT_EQ(back.channels, 1);
    EXPECT_TRUE(back.data == r.data);
}

TEST(PngIo, QuantizationMatchesPixmapPath) {
    Raster r = make_raster(4, 4, 3, 0.5);
    const fs::path png_path = temp_dir() / "half.png";
    const fs::path ppm_path = temp_dir() / "half.ppm";
    save_png(r, png_path);
    save_image(r, ppm_path);
    EXPECT_TRUE(load_png(png_path).data == load_image(ppm_path).data);
}

TEST(PngIo, SignatureDispatch) {
    std::mt19937 rng(93);
    const Raster r = random_raster(rng, 8, 8, 3);
    const fs::path png_path = temp_dir() / "a.png";
    const fs::path ppm_path = temp_dir() / "a.ppm";
    save_image_any(r, png_path);
    save_image_any(r, ppm_path);
    EXPECT_TRUE(looks_like_png(png_path));
    EXPECT_FALSE(looks_like_png(ppm_path));
    EXPECT_TRUE(load_image_any(png_path).data == load_image_any(ppm_path).data);
}

TEST(PngIo, RejectsGarbage) {
    const fs::path p = temp_dir() / "junk.png";
    {
        std::ofstream out(p, std::ios::binary);
        out << "\x89PNG\r\n\x1a\nnot actually a png";
    }
    EXPECT_THROW(load_png(p), std::runtime_error);
    EXPECT_THROW(load_png(temp_dir() / "missing.png"), std::runtime_error);
}
