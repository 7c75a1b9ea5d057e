#pragma once

// Sensor corrections applied before any descriptor is computed:
// spectral sensitivity normalization and illumination-field correction
// (both estimated from a white reference), and spectral focus stacking of
// two differently focused captures.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/common.hpp"
#include "strata/cube.hpp"
#include "strata/filters.hpp"

namespace strata {

/// Denominators below this are clamped and counted.
inline constexpr double kDivisionFloor = 1e-6;

/// Per-band sensitivity normalized so that its maximum is 1.
struct SpectralSensitivity {
    std::vector<double> weights;
};

/// Per-pixel illumination normalized so that its maximum is 1.
struct IlluminationField {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};

/// Pixel rectangle [row, row+rows) x [col, col+cols).
struct PixelRect {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

namespace preprocess_detail {

inline PixelRect resolve(const std::optional<PixelRect>& rect, const Raster& img) {
    if (!rect) return {0, 0, img.rows(), img.cols()};
    if (rect->rows == 0 || rect->cols == 0 || rect->row + rect->rows > img.rows() ||
        rect->col + rect->cols > img.cols())
        throw std::invalid_argument("white-reference region lies outside the cube");
    return *rect;
}

}  // namespace preprocess_detail

/// Spatial mean of every band over `region` (whole frame by default),
/// divided by the largest band mean.
inline SpectralSensitivity estimate_sensitivity(const HsiCube& white_ref,
                                                std::optional<PixelRect> region = std::nullopt) {
    const PixelRect roi = preprocess_detail::resolve(region, white_ref);
    SpectralSensitivity w;
    w.weights.resize(white_ref.bands());
    for (std::size_t b = 0; b < white_ref.bands(); ++b) {
        const auto plane = white_ref.band(b);
        CompensatedSum acc;
        for (std::size_t r = roi.row; r < roi.row + roi.rows; ++r)
            for (std::size_t c = roi.col; c < roi.col + roi.cols; ++c) {
                const float v = plane[r * white_ref.cols() + c];
                if (v < 0.0f) throw std::invalid_argument("white reference has negative values");
                acc.add(v);
            }
        const double mean = acc.value() / static_cast<double>(roi.rows * roi.cols);
        if (!(mean > 0.0))
            throw std::invalid_argument("white reference band " + std::to_string(b + 1) +
                                        " is all zero; sensitivity undefined");
        w.weights[b] = mean;
    }
    const double peak = *std::max_element(w.weights.begin(), w.weights.end());
    for (auto& v : w.weights) v /= peak;
    return w;
}

/// out[x,y,b] = cube[x,y,b] / w_b. `clamped` (optional) accumulates the
/// number of guarded divisions.
inline HsiCube normalize_sensitivity(const HsiCube& cube, const SpectralSensitivity& w,
                                     std::size_t* clamped = nullptr) {
    if (w.weights.size() != cube.bands())
        throw std::invalid_argument("sensitivity length " + std::to_string(w.weights.size()) +
                                    " != cube bands " + std::to_string(cube.bands()));
    HsiCube out = cube;
    for (std::size_t b = 0; b < cube.bands(); ++b) {
        double denom = w.weights[b];
        if (denom < kDivisionFloor) {
            denom = kDivisionFloor;
            if (clamped) *clamped += cube.pixels();
        }
        for (auto& v : out.band(b)) v = static_cast<float>(v / denom);
    }
    return out;
}

struct IlluminationOptions {
    /// Gaussian sigma as a fraction of the image diagonal; 0 disables smoothing.
    double sigma_fraction = 0.02;
};

/// Band mean per pixel, low-pass filtered, normalized to a maximum of 1.
/// Smoothing uses point-reflection borders so a linear light falloff is
/// reproduced without edge bias.
inline IlluminationField estimate_illumination(const HsiCube& white_ref,
                                               const IlluminationOptions& opts = {}) {
    const std::size_t n = white_ref.pixels();
    std::vector<CompensatedSum> acc(n);
    for (std::size_t b = 0; b < white_ref.bands(); ++b) {
        const auto plane = white_ref.band(b);
        for (std::size_t p = 0; p < n; ++p) acc[p].add(plane[p]);
    }
    std::vector<double> mean(n);
    for (std::size_t p = 0; p < n; ++p) {
        mean[p] = acc[p].value() / static_cast<double>(white_ref.bands());
        if (!(mean[p] > 0.0))
            throw std::invalid_argument("white reference has a zero-valued pixel at index " +
                                        std::to_string(p));
    }
    const double diagonal = std::hypot(static_cast<double>(white_ref.rows()),
                                       static_cast<double>(white_ref.cols()));
    IlluminationField field{white_ref.rows(), white_ref.cols(),
                            gaussian_blur(std::span<const double>(mean), white_ref.rows(),
                                          white_ref.cols(), opts.sigma_fraction * diagonal,
                                          Border::PointOdd)};
    const double peak = *std::max_element(field.values.begin(), field.values.end());
    if (!(peak > 0.0)) throw std::invalid_argument("white reference illumination is zero");
    for (auto& v : field.values) v = std::max(v / peak, kDivisionFloor);
    return field;
}

/// out[x,y,b] = cube[x,y,b] / L(x,y).
inline HsiCube correct_illumination(const HsiCube& cube, const IlluminationField& field,
                                    std::size_t* clamped = nullptr) {
    if (field.rows != cube.rows() || field.cols != cube.cols() ||
        field.values.size() != cube.pixels())
        throw std::invalid_argument("illumination field and cube dimensions differ");
    std::vector<double> denom(field.values);
    for (auto& d : denom) {
        if (d < kDivisionFloor) {
            d = kDivisionFloor;
            if (clamped) *clamped += cube.bands();
        }
    }
    HsiCube out = cube;
    for (std::size_t b = 0; b < cube.bands(); ++b) {
        auto plane = out.band(b);
        for (std::size_t p = 0; p < plane.size(); ++p)
            plane[p] = static_cast<float>(plane[p] / denom[p]);
    }
    return out;
}

/// Default number of leading channels taken from the blue-focused capture.
inline constexpr std::size_t kDefaultSplitBand = 75;

/// Channels 1..split_band (1-based, inclusive) are copied from `h1`, the
/// remaining channels from `h2`. Values are copied bit-exactly.
inline HsiCube focus_stack(const HsiCube& h1, const HsiCube& h2,
                           std::size_t split_band = kDefaultSplitBand) {
    if (!h1.same_grid(h2) || h1.bands() != h2.bands())
        throw std::invalid_argument("focus_stack: captures differ in dimensions");
    if (split_band < 1 || split_band >= h1.bands())
        throw std::invalid_argument("focus_stack: split band " + std::to_string(split_band) +
                                    " outside [1, " + std::to_string(h1.bands() - 1) + "]");
    std::vector<float> data(h1.data().size());
    const std::size_t split_at = split_band * h1.pixels();
    std::copy(h1.data().begin(), h1.data().begin() + static_cast<std::ptrdiff_t>(split_at),
              data.begin());
    std::copy(h2.data().begin() + static_cast<std::ptrdiff_t>(split_at), h2.data().end(),
              data.begin() + static_cast<std::ptrdiff_t>(split_at));
    return h1.with_data(std::move(data));
}

/// Variance-of-Laplacian focus measure of every band.
inline std::vector<double> band_sharpness(const HsiCube& cube) {
    std::vector<double> s(cube.bands());
    parallel_for(cube.bands(),
                 [&](std::size_t b) { s[b] = laplacian_variance(cube.band(b), cube.rows(), cube.cols()); });
    return s;
}

/// Extension beyond the fixed split: picks the 1-based split band that
/// maximizes the summed sharpness of the channels each capture contributes.
/// Ties resolve to the smallest split.
inline std::size_t auto_split_band(const HsiCube& h1, const HsiCube& h2) {
    if (!h1.same_grid(h2) || h1.bands() != h2.bands())
        throw std::invalid_argument("auto_split_band: captures differ in dimensions");
    if (h1.bands() < 2) throw std::invalid_argument("auto_split_band needs at least 2 bands");
    const auto s1 = band_sharpness(h1);
    const auto s2 = band_sharpness(h2);
    double score = 0.0;
    for (double v : s2) score += v;
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t split = 1; split < h1.bands(); ++split) {
        score += s1[split - 1] - s2[split - 1];
        if (score > best_score) {
            best_score = score;
            best = split;
        }
    }
    return best;
}

/// Spatial mean of each band.
inline std::vector<double> band_means(const HsiCube& cube) {
    std::vector<double> m(cube.bands());
    for (std::size_t b = 0; b < cube.bands(); ++b) m[b] = compensated_mean(cube.band(b));
    return m;
}

/// CSV diagnostic: band,wavelength_nm,mean_before,mean_after.
inline void write_correction_csv(std::ostream& out, const HsiCube& before, const HsiCube& after) {
    if (before.bands() != after.bands())
        throw std::invalid_argument("correction diagnostic: band counts differ");
    const auto mb = band_means(before);
    const auto ma = band_means(after);
    out << "band,wavelength_nm,mean_before,mean_after\n";
    char buf[160];
    for (std::size_t b = 0; b < mb.size(); ++b) {
        const double wl = before.has_wavelengths() ? before.wavelengths()[b] : 0.0;
        std::snprintf(buf, sizeof(buf), "%zu,%.3f,%.9g,%.9g\n", b + 1, wl, mb[b], ma[b]);
        out << buf;
    }
}

}  // namespace strata
