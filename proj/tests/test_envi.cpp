#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "strata/envi.hpp"

using namespace strata;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "strata_envi_test";
    fs::create_directories(dir);
    return dir / name;
}

HsiCube random_cube(std::size_t rows, std::size_t cols, std::size_t bands, bool wavelengths) {
    std::mt19937 rng(5);
    std::normal_distribution<float> dist(0.3f, 1.0f);
    std::vector<float> data(rows * cols * bands);
    for (auto& v : data) v = dist(rng);
    std::vector<double> wl;
    if (wavelengths)
        for (std::size_t b = 0; b < bands; ++b) wl.push_back(357.27 + 2.5024 * static_cast<double>(b + 1));
    return HsiCube(rows, cols, bands, std::move(data), std::move(wl));
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Envi, RoundTripIsBitExact) {
    auto cube = random_cube(7, 5, 11, true);
    cube.data()[3] = std::numeric_limits<float>::quiet_NaN();
    cube.data()[4] = -0.0f;
    cube.data()[5] = std::numeric_limits<float>::denorm_min();
    const auto hdr = scratch("roundtrip.hdr");
    save_cube(cube, hdr);
    const auto back = load_cube(hdr);
    EXPECT_EQ(back.rows(), 7u);
    EXPECT_EQ(back.cols(), 5u);
    EXPECT_EQ(back.bands(), 11u);
    EXPECT_TRUE(bit_equal(back.data(), cube.data()));
    EXPECT_EQ(back.wavelengths(), cube.wavelengths());
}

TEST(Envi, WithoutWavelengths) {
    const auto cube = random_cube(3, 4, 2, false);
    const auto hdr = scratch("nowl.hdr");
    save_cube(cube, hdr);
    EXPECT_FALSE(load_cube(hdr).has_wavelengths());
}

TEST(Envi, SizeMismatchIsReported) {
    const auto hdr = scratch("short.hdr");
    save_cube(random_cube(4, 4, 3, false), hdr);
    fs::resize_file(raw_path_for(hdr), 4 * 4 * 3 * 4 - 4);
    EXPECT_THROW(load_cube(hdr), EnviError);
}

TEST(Envi, BigEndianAndHeaderOffset) {
    const auto hdr = scratch("be.hdr");
    write_text(hdr, "ENVI\nsamples = 2\nlines = 1\nbands = 1\nheader offset = 3\n"
                    "data type = 4\ninterleave = bsq\nbyte order = 1\n");
    const float values[2] = {1.5f, -2.25f};
    std::ofstream raw(raw_path_for(hdr), std::ios::binary);
    raw.write("xyz", 3);
    for (float v : values) {
        unsigned char bytes[4];
        std::memcpy(bytes, &v, 4);
        if constexpr (std::endian::native == std::endian::little) std::swap(bytes[0], bytes[3]), std::swap(bytes[1], bytes[2]);
        raw.write(reinterpret_cast<const char*>(bytes), 4);
    }
    raw.close();
    const auto cube = load_cube(hdr);
    EXPECT_EQ(cube.data(), (std::vector<float>{1.5f, -2.25f}));
}

TEST(Envi, MultiLineBracedWavelengths) {
    const auto hdr = scratch("braces.hdr");
    write_text(hdr, "ENVI\n; comment\nsamples = 1\nlines = 1\nbands = 3\ndata type = 4\n"
                    "Wavelength = {400.0,\n 401.5 ,\n 403 }\n");
    std::ofstream(raw_path_for(hdr), std::ios::binary).write(std::string(12, '\0').data(), 12);
    EXPECT_EQ(load_cube(hdr).wavelengths(), (std::vector<double>{400.0, 401.5, 403.0}));
}

TEST(Envi, RejectsUnsupportedLayouts) {
    const auto hdr = scratch("bad.hdr");
    std::ofstream(raw_path_for(hdr), std::ios::binary).write(std::string(8, '\0').data(), 8);
    write_text(hdr, "ENVI\nsamples = 2\nlines = 1\nbands = 1\ndata type = 5\n");
    EXPECT_THROW(load_cube(hdr), EnviError);
    write_text(hdr, "ENVI\nsamples = 2\nlines = 1\nbands = 1\ndata type = 4\ninterleave = bil\n");
    EXPECT_THROW(load_cube(hdr), EnviError);
    write_text(hdr, "ENVI\nlines = 1\nbands = 1\ndata type = 4\n");
    EXPECT_THROW(load_cube(hdr), EnviError);
    write_text(hdr, "NOT ENVI\n");
    EXPECT_THROW(load_cube(hdr), EnviError);
    write_text(hdr, "ENVI\nsamples = 2\nlines = 1\nbands = 1\ndata type = 4\nwavelength = {1, 2}\n");
    EXPECT_THROW(load_cube(hdr), EnviError);
    EXPECT_THROW(load_cube(scratch("missing.hdr")), EnviError);
}

TEST(Envi, FeatureStackKeepsNames) {
    FeatureStack stack(2, 2, 3, std::vector<float>(12, 0.5f), {"pc1", "pc1:area:thin40", "S"});
    const auto hdr = scratch("stack.hdr");
    save_features(stack, hdr);
    const auto back = load_features(hdr);
    EXPECT_EQ(back.names(), stack.names());
    EXPECT_EQ(back.data(), stack.data());
    EXPECT_THROW(save_features(FeatureStack(1, 1, 1, {0}, {"a,b"}), hdr), EnviError);

    save_cube(HsiCube(1, 1, 2), hdr);
    EXPECT_EQ(load_features(hdr).names(), (std::vector<std::string>{"f1", "f2"}));
}
