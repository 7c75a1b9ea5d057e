#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "strata/filters.hpp"
#include "strata/preprocess.hpp"

using namespace strata;

namespace {

// white[x, y, b] = w_b * L(x, y), with L a linear ramp and w a bump.
struct Synthetic {
    std::size_t rows = 30, cols = 40, bands = 6;
    std::vector<double> w{0.2, 0.5, 1.0, 0.8, 0.4, 0.1};
    double light(std::size_t r, std::size_t c) const { return 0.3 + 0.01 * static_cast<double>(c) + 0.004 * static_cast<double>(r); }

    HsiCube white() const {
        HsiCube cube(rows, cols, bands);
        for (std::size_t b = 0; b < bands; ++b)
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) cube.at(r, c, b) = static_cast<float>(w[b] * light(r, c));
        return cube;
    }
};

HsiCube noise_cube(std::size_t rows, std::size_t cols, std::size_t bands, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    HsiCube cube(rows, cols, bands);
    for (auto& v : cube.data()) v = u(rng);
    return cube;
}

}  // namespace

TEST(Sensitivity, RecoversBandResponse) {
    const Synthetic s;
    const auto est = estimate_sensitivity(s.white());
    ASSERT_EQ(est.weights.size(), s.bands);
    for (std::size_t b = 0; b < s.bands; ++b) EXPECT_NEAR(est.weights[b], s.w[b], 1e-6);

    const auto flat = normalize_sensitivity(s.white(), est);
    for (std::size_t b = 0; b < s.bands; ++b) EXPECT_NEAR(flat.at(3, 7, b), s.light(3, 7), 1e-5);
}

TEST(Sensitivity, RegionAndErrors) {
    Synthetic s;
    auto white = s.white();
    for (std::size_t b = 0; b < s.bands; ++b) white.at(0, 0, b) = 100.0f;  // outside the region
    const auto est = estimate_sensitivity(white, PixelRect{5, 5, 10, 10});
    for (std::size_t b = 0; b < s.bands; ++b) EXPECT_NEAR(est.weights[b], s.w[b], 1e-6);
    EXPECT_THROW(estimate_sensitivity(white, PixelRect{25, 5, 10, 10}), std::invalid_argument);

    HsiCube dark(2, 2, 2);
    EXPECT_THROW(estimate_sensitivity(dark), std::invalid_argument);
}

TEST(Sensitivity, FloorClampsAndCounts) {
    HsiCube cube(2, 3, 2, std::vector<float>(12, 1.0f));
    std::size_t clamped = 0;
    const auto out = normalize_sensitivity(cube, SpectralSensitivity{{1.0, 0.0}}, &clamped);
    EXPECT_EQ(clamped, 6u);
    EXPECT_FLOAT_EQ(out.at(0, 0, 1), static_cast<float>(1.0 / kDivisionFloor));
    EXPECT_THROW(normalize_sensitivity(cube, SpectralSensitivity{{1.0}}), std::invalid_argument);
}

TEST(Illumination, LinearFieldIsRecoveredExactly) {
    const Synthetic s;
    const auto field = estimate_illumination(s.white());
    double peak = 0.0;
    for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t c = 0; c < s.cols; ++c) peak = std::max(peak, s.light(r, c));
    for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t c = 0; c < s.cols; ++c)
            EXPECT_NEAR(field.values[r * s.cols + c], s.light(r, c) / peak, 1e-6);

    // A scene under the same light becomes flat after correction.
    const auto corrected = correct_illumination(s.white(), field);
    for (std::size_t b = 0; b < s.bands; ++b)
        EXPECT_NEAR(corrected.at(0, 0, b), corrected.at(s.rows - 1, s.cols - 1, b), 1e-5);
}

TEST(Illumination, SmoothingRemovesNoise) {
    Synthetic s;
    auto white = s.white();
    std::mt19937 rng(1);
    std::normal_distribution<float> n(0.0f, 0.01f);
    for (auto& v : white.data()) v += n(rng);
    const auto raw = estimate_illumination(white, {0.0});
    const auto smooth = estimate_illumination(white);
    double err_raw = 0.0, err_smooth = 0.0;
    for (std::size_t p = 0; p < raw.values.size(); ++p) {
        const double truth = s.light(p / s.cols, p % s.cols) / s.light(s.rows - 1, s.cols - 1);
        err_raw += std::abs(raw.values[p] - truth);
        err_smooth += std::abs(smooth.values[p] - truth);
    }
    EXPECT_LT(err_smooth, 0.5 * err_raw);
}

TEST(Illumination, Errors) {
    HsiCube white(2, 2, 1, {1, 1, 0, 1});
    EXPECT_THROW(estimate_illumination(white), std::invalid_argument);
    EXPECT_THROW(correct_illumination(HsiCube(3, 2, 1), IlluminationField{2, 2, {1, 1, 1, 1}}),
                 std::invalid_argument);
}

TEST(FocusStack, CopiesChannelsBitExactly) {
    const auto h1 = noise_cube(5, 6, 258, 1);
    const auto h2 = noise_cube(5, 6, 258, 2);
    const auto out = focus_stack(h1, h2);
    for (std::size_t b = 0; b < 258; ++b) {
        const auto& src = b < 75 ? h1 : h2;
        for (std::size_t p = 0; p < out.pixels(); ++p) ASSERT_EQ(out.band(b)[p], src.band(b)[p]);
    }
    EXPECT_THROW(focus_stack(h1, h2, 0), std::invalid_argument);
    EXPECT_THROW(focus_stack(h1, h2, 258), std::invalid_argument);
    EXPECT_THROW(focus_stack(h1, noise_cube(5, 6, 257, 3)), std::invalid_argument);
}

TEST(FocusStack, AutoSplitFindsSharpnessCrossover) {
    // H1 is textured up to band 12 and blurred after; H2 the reverse.
    const std::size_t rows = 24, cols = 24, bands = 30;
    const auto texture = noise_cube(rows, cols, bands, 4);
    HsiCube h1 = texture, h2 = texture;
    for (std::size_t b = 0; b < bands; ++b) {
        auto& blurred = b < 12 ? h2 : h1;
        const auto smooth = gaussian_blur(std::span<const float>(blurred.band(b)), rows, cols, 2.0);
        for (std::size_t p = 0; p < rows * cols; ++p) blurred.band(b)[p] = static_cast<float>(smooth[p]);
    }
    EXPECT_EQ(auto_split_band(h1, h2), 12u);
}

TEST(Filters, BlurPreservesConstantsAndRamps) {
    const std::size_t rows = 9, cols = 13;
    std::vector<double> ramp(rows * cols), flat(rows * cols, 2.5);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) ramp[r * cols + c] = 0.5 * r - 0.25 * c + 1.0;
    const auto a = gaussian_blur(std::span<const double>(flat), rows, cols, 3.0);
    const auto b = gaussian_blur(std::span<const double>(ramp), rows, cols, 3.0, Border::PointOdd);
    const auto c = gaussian_blur(std::span<const double>(ramp), rows, cols, 0.0);
    for (std::size_t p = 0; p < rows * cols; ++p) {
        EXPECT_NEAR(a[p], 2.5, 1e-12);
        EXPECT_NEAR(b[p], ramp[p], 1e-9);
        EXPECT_EQ(c[p], ramp[p]);
    }
}

TEST(Diagnostics, CorrectionCsv) {
    HsiCube before(1, 2, 2, {1, 3, 2, 2}, {500, 510});
    HsiCube after(1, 2, 2, {2, 2, 4, 4}, {500, 510});
    std::ostringstream out;
    write_correction_csv(out, before, after);
    EXPECT_EQ(out.str(), "band,wavelength_nm,mean_before,mean_after\n1,500.000,2,2\n2,510.000,2,4\n");
}
