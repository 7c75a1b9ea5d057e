#pragma once

// Synthetic layered-drawing cubes with exact ground truth.
//
// Strokes of red chalk, diluted red chalk and iron-gall ink are drawn in
// that order onto a paper substrate. Each pixel's reflectance is then
// modulated by a smooth paper-relief shading field, an uneven (side-lit)
// illumination field and the sensor's spectral sensitivity, and Gaussian
// sensor noise is added. Two captures are produced with different focus
// settings: H1 sharp in the blue range, H2 sharp in the red/NIR range.
//
// Defocus follows the longitudinal chromatic aberration of a singlet
// lens: the focal shift is proportional to the change of 1/lambda^2
// (Cauchy dispersion), so blur grows faster on the blue side.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/common.hpp"
#include "strata/cube.hpp"
#include "strata/filters.hpp"

namespace strata {

/// Piecewise-linear curve over 1-based band indices; constant beyond the
/// first and last knot.
struct SpectralCurve {
    std::vector<std::pair<double, double>> knots;  ///< (band, value), band ascending

    double operator()(double band) const {
        if (knots.empty()) throw std::invalid_argument("empty spectral curve");
        if (band <= knots.front().first) return knots.front().second;
        if (band >= knots.back().first) return knots.back().second;
        const auto it = std::upper_bound(knots.begin(), knots.end(), band,
                                         [](double b, const auto& k) { return b < k.first; });
        const auto& [b1, v1] = *it;
        const auto& [b0, v0] = *(it - 1);
        return v0 + (v1 - v0) * (band - b0) / (b1 - b0);
    }

    std::vector<double> sample(std::size_t bands) const {
        std::vector<double> out(bands);
        for (std::size_t b = 0; b < bands; ++b) out[b] = (*this)(static_cast<double>(b + 1));
        return out;
    }
};

struct MaterialCurves {
    SpectralCurve substrate;
    SpectralCurve red_chalk;
    SpectralCurve diluted_red_chalk;
    SpectralCurve ink;
};

/// Reference reflectances for the default 258-band layout. Knot bands map
/// to wavelengths via the default 357.27 nm + 2.5024 nm/band axis
/// (band 89 ~ 580 nm, band 157 ~ 750 nm).
inline MaterialCurves default_materials() {
    MaterialCurves m;
    // Aged paper: bright, slightly yellow (absorbs a little blue).
    m.substrate.knots = {{1, 0.70}, {60, 0.80}, {120, 0.84}, {258, 0.86}};
    // Iron-oxide red: dark through green, steep rise into the red, weak
    // iron absorption around 870 nm.
    m.red_chalk.knots = {{1, 0.10},   {24, 0.11},  {60, 0.13},  {89, 0.21},  {112, 0.45},
                         {150, 0.55}, {185, 0.52}, {205, 0.51}, {228, 0.52}, {258, 0.58}};
    // Thin wash of the same pigment: the chalk's visible colour at higher
    // lightness, no iron band, more UV scattered back from the binder.
    m.diluted_red_chalk.knots = {{1, 0.17},     {24, 0.1375},  {60, 0.1625},
                                 {89, 0.2625},  {112, 0.5625}, {150, 0.6875}, {258, 0.75}};
    // Iron-gall ink, browned with age.
    m.ink.knots = {{1, 0.06}, {90, 0.08}, {150, 0.14}, {258, 0.28}};
    return m;
}

enum class Labeling {
    Layered,  ///< red chalk / diluted red chalk / ink; the top layer wins
    Overlay,  ///< red chalk / red chalk overlaid by ink / ink (no diluted strokes)
};

struct StrokeLayer {
    std::size_t count = 0;
    double min_width = 2.0;  ///< pixels
    double max_width = 5.0;
    double min_coverage = 1.0;  ///< fraction of material vs. what lies below
    double max_coverage = 1.0;
};

struct PhantomSpec {
    std::size_t rows = 200;
    std::size_t cols = 200;
    std::size_t bands = 258;
    double wavelength_start_nm = 357.27;  ///< wavelength of band 0 (1-based band 1 adds one step)
    double wavelength_step_nm = 2.5024;

    MaterialCurves materials = default_materials();
    double white_reflectance = 0.95;  ///< flat white calibration target

    StrokeLayer chalk{14, 3.0, 7.0, 0.70, 1.00};
    StrokeLayer diluted{14, 3.0, 7.0, 0.80, 1.00};
    StrokeLayer ink{18, 2.0, 5.0, 0.85, 1.00};
    Labeling labeling = Labeling::Layered;

    double illumination_min = 0.25;         ///< relative light at the far side
    double illumination_angle_deg = 20.0;   ///< direction of the light falloff
    double shading_amplitude = 0.55;        ///< paper relief: factor in [1 - a, 1]
    double shading_scale_px = 5.0;          ///< relief correlation length

    double sensitivity_floor = 0.25;  ///< relative response at the spectrum ends
    double sensitivity_peak_band = 170.0;
    double sensitivity_width = 75.0;

    double noise_sd = 0.001;

    std::size_t h1_focus_band = 41;   ///< 1-based, blue side
    std::size_t h2_focus_band = 200;  ///< 1-based, red side
    double max_blur_sigma = 3.0;      ///< px at the largest defocus of either capture

    std::uint64_t seed = 7;

    double wavelength(std::size_t band_1based) const {
        return wavelength_start_nm + wavelength_step_nm * static_cast<double>(band_1based);
    }

    void validate() const {
        if (rows < 4 || cols < 4 || bands < 2) throw std::invalid_argument("phantom must be at least 4x4x2");
        if (!(noise_sd >= 0.0)) throw std::invalid_argument("phantom noise SD must be >= 0");
        if (!(illumination_min > 0.0 && illumination_min <= 1.0))
            throw std::invalid_argument("illumination_min must lie in (0, 1]");
        if (!(shading_amplitude >= 0.0 && shading_amplitude < 1.0))
            throw std::invalid_argument("shading_amplitude must lie in [0, 1)");
        if (!(sensitivity_floor > 0.0 && sensitivity_floor <= 1.0))
            throw std::invalid_argument("sensitivity_floor must lie in (0, 1]");
        if (h1_focus_band < 1 || h1_focus_band > bands || h2_focus_band < 1 || h2_focus_band > bands)
            throw std::invalid_argument("focus bands must lie within [1, bands]");
        if (!(max_blur_sigma >= 0.0)) throw std::invalid_argument("max_blur_sigma must be >= 0");
        if (!(wavelength_step_nm > 0.0) || !(wavelength(1) > 0.0))
            throw std::invalid_argument("wavelength axis must be positive and increasing");
        for (const StrokeLayer* layer : {&chalk, &diluted, &ink}) {
            if (!(layer->min_width > 0.0 && layer->max_width >= layer->min_width))
                throw std::invalid_argument("stroke widths must satisfy 0 < min <= max");
            if (!(layer->min_coverage >= 0.0 && layer->max_coverage <= 1.0 &&
                  layer->max_coverage >= layer->min_coverage))
                throw std::invalid_argument("stroke coverage must satisfy 0 <= min <= max <= 1");
        }
        for (const SpectralCurve* c : {&materials.substrate, &materials.red_chalk,
                                       &materials.diluted_red_chalk, &materials.ink}) {
            if (c->knots.empty()) throw std::invalid_argument("material curve without knots");
            for (std::size_t i = 0; i < c->knots.size(); ++i) {
                const auto& [b, v] = c->knots[i];
                if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("reflectance outside [0, 1]");
                if (i && !(b > c->knots[i - 1].first))
                    throw std::invalid_argument("material knots must have increasing bands");
            }
        }
        if (!(white_reflectance > 0.0 && white_reflectance <= 1.0))
            throw std::invalid_argument("white_reflectance must lie in (0, 1]");
    }
};

/// Ground-truth codes stored in label maps.
enum GroundTruthCode : std::uint8_t { kBackground = 0, kRedChalk = 1, kSecondClass = 2, kInk = 3 };

struct GroundTruth {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> labels;       ///< 0 = background, 1..3 = classes
    std::vector<std::string> class_names;   ///< names of codes 1..3

    /// Class ids for learning: code - 1, background -> -1.
    std::vector<int> class_ids() const {
        std::vector<int> out(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) out[i] = static_cast<int>(labels[i]) - 1;
        return out;
    }
};

inline std::vector<std::string> class_names_for(Labeling labeling) {
    if (labeling == Labeling::Overlay) return {"red_chalk", "red_chalk_under_ink", "ink"};
    return {"red_chalk", "diluted_red_chalk", "ink"};
}

struct PhantomOutput {
    HsiCube clean;      ///< reflectance x shading: no light falloff, sensitivity, blur or noise
    HsiCube h1;         ///< blue-focused capture
    HsiCube h2;         ///< red-focused capture
    HsiCube white_ref;  ///< white target under the same light and sensor
    GroundTruth truth;
    std::vector<double> illumination;  ///< injected field, max 1
    std::vector<double> sensitivity;   ///< injected per-band response, max 1
    std::vector<double> h1_sigma;      ///< per-band blur of H1
    std::vector<double> h2_sigma;      ///< per-band blur of H2
};

namespace phantom_detail {

/// Per-band defocus blur of a capture focused at `focus_band` (1-based).
inline std::vector<double> defocus_profile(const PhantomSpec& spec, std::size_t focus_band) {
    auto power = [&](std::size_t b) {
        const double wl = spec.wavelength(b);
        return 1.0 / (wl * wl);
    };
    double worst = 0.0;
    for (std::size_t focus : {spec.h1_focus_band, spec.h2_focus_band})
        for (std::size_t b = 1; b <= spec.bands; ++b) worst = std::max(worst, std::abs(power(b) - power(focus)));
    std::vector<double> sigma(spec.bands, 0.0);
    if (worst <= 0.0) return sigma;
    for (std::size_t b = 1; b <= spec.bands; ++b)
        sigma[b - 1] = spec.max_blur_sigma * std::abs(power(b) - power(focus_band)) / worst;
    return sigma;
}

struct Painter {
    const PhantomSpec& spec;
    std::mt19937_64& rng;

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

    /// Stamps a random quadratic Bezier stroke; `visit(pixel)` per covered pixel (once).
    template <class Visit>
    void stroke(double width, Visit&& visit) {
        const double margin = 0.05;
        auto point = [&] {
            return std::pair{uniform(margin, 1.0 - margin) * static_cast<double>(spec.rows - 1),
                             uniform(margin, 1.0 - margin) * static_cast<double>(spec.cols - 1)};
        };
        const auto p0 = point(), p1 = point(), p2 = point();
        const double length = std::hypot(p1.first - p0.first, p1.second - p0.second) +
                              std::hypot(p2.first - p1.first, p2.second - p1.second);
        const auto steps = static_cast<std::size_t>(std::ceil(length * 2.0)) + 1;
        const double radius = 0.5 * width;
        std::vector<std::uint8_t> mark(spec.rows * spec.cols, 0);
        for (std::size_t s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / static_cast<double>(steps);
            const double a = (1 - t) * (1 - t), b = 2 * (1 - t) * t, c = t * t;
            const double y = a * p0.first + b * p1.first + c * p2.first;
            const double x = a * p0.second + b * p1.second + c * p2.second;
            const auto r0 = static_cast<std::ptrdiff_t>(std::floor(y - radius));
            const auto r1 = static_cast<std::ptrdiff_t>(std::ceil(y + radius));
            const auto c0 = static_cast<std::ptrdiff_t>(std::floor(x - radius));
            const auto c1 = static_cast<std::ptrdiff_t>(std::ceil(x + radius));
            for (auto r = std::max<std::ptrdiff_t>(0, r0); r <= std::min<std::ptrdiff_t>(spec.rows - 1, r1); ++r)
                for (auto cc = std::max<std::ptrdiff_t>(0, c0); cc <= std::min<std::ptrdiff_t>(spec.cols - 1, c1); ++cc) {
                    const double dy = static_cast<double>(r) - y, dx = static_cast<double>(cc) - x;
                    if (dy * dy + dx * dx > radius * radius) continue;
                    const std::size_t p = static_cast<std::size_t>(r) * spec.cols + static_cast<std::size_t>(cc);
                    if (!mark[p]) {
                        mark[p] = 1;
                        visit(p);
                    }
                }
        }
    }
};

}  // namespace phantom_detail

/// Generates the phantom. Identical specs (including seed) give
/// bit-identical outputs.
inline PhantomOutput generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    const std::size_t R = spec.rows, C = spec.cols, B = spec.bands, N = R * C;
    std::mt19937_64 rng(spec.seed);
    phantom_detail::Painter painter{spec, rng};

    const auto substrate = spec.materials.substrate.sample(B);
    const auto chalk = spec.materials.red_chalk.sample(B);
    const auto diluted = spec.materials.diluted_red_chalk.sample(B);
    const auto ink = spec.materials.ink.sample(B);

    // Reflectance is a per-pixel mix of the four materials (weights sum to 1).
    std::vector<std::array<double, 4>> mix(N, {1.0, 0.0, 0.0, 0.0});
    std::vector<std::uint8_t> labels(N, kBackground);
    std::vector<std::uint8_t> has_chalk(N, 0);

    auto paint_layer = [&](const StrokeLayer& layer, int material, auto&& label_for) {
        for (std::size_t s = 0; s < layer.count; ++s) {
            const double width = painter.uniform(layer.min_width, layer.max_width);
            const double coverage = painter.uniform(layer.min_coverage, layer.max_coverage);
            painter.stroke(width, [&](std::size_t p) {
                auto& w = mix[p];
                for (auto& v : w) v *= (1.0 - coverage);
                w[static_cast<std::size_t>(material)] += coverage;
                labels[p] = label_for(p);
            });
        }
    };
    paint_layer(spec.chalk, 1, [&](std::size_t p) {
        has_chalk[p] = 1;
        return kRedChalk;
    });
    if (spec.labeling == Labeling::Layered)
        paint_layer(spec.diluted, 2, [](std::size_t) { return kSecondClass; });
    paint_layer(spec.ink, 3, [&](std::size_t p) {
        return spec.labeling == Labeling::Overlay && has_chalk[p] ? kSecondClass : kInk;
    });

    // Smooth paper relief in [1 - a, 1].
    std::vector<double> shading(N, 1.0);
    if (spec.shading_amplitude > 0.0) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> white(N);
        for (auto& v : white) v = gauss(rng);
        auto smooth = gaussian_blur(std::span<const double>(white), R, C, spec.shading_scale_px);
        const auto [lo, hi] = std::minmax_element(smooth.begin(), smooth.end());
        const double range = *hi - *lo;
        for (std::size_t p = 0; p < N; ++p)
            shading[p] = 1.0 - spec.shading_amplitude * (range > 0 ? (*hi - smooth[p]) / range : 0.0);
    }

    // Side light: linear falloff along the configured direction.
    std::vector<double> light(N);
    {
        const double angle = spec.illumination_angle_deg * 3.14159265358979323846 / 180.0;
        const double dx = std::cos(angle), dy = std::sin(angle);
        std::vector<double> proj(N);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) proj[r * C + c] = dx * static_cast<double>(c) + dy * static_cast<double>(r);
        const auto [lo, hi] = std::minmax_element(proj.begin(), proj.end());
        const double range = *hi - *lo;
        for (std::size_t p = 0; p < N; ++p)
            light[p] = range > 0 ? spec.illumination_min + (1.0 - spec.illumination_min) * (proj[p] - *lo) / range : 1.0;
    }

    std::vector<double> sensitivity(B);
    for (std::size_t b = 0; b < B; ++b) {
        const double z = (static_cast<double>(b + 1) - spec.sensitivity_peak_band) / spec.sensitivity_width;
        sensitivity[b] = spec.sensitivity_floor + (1.0 - spec.sensitivity_floor) * std::exp(-0.5 * z * z);
    }
    const double peak = *std::max_element(sensitivity.begin(), sensitivity.end());
    for (auto& v : sensitivity) v /= peak;

    std::vector<double> wavelengths(B);
    for (std::size_t b = 0; b < B; ++b) wavelengths[b] = spec.wavelength(b + 1);

    PhantomOutput out;
    out.illumination = light;
    out.sensitivity = sensitivity;
    out.h1_sigma = phantom_detail::defocus_profile(spec, spec.h1_focus_band);
    out.h2_sigma = phantom_detail::defocus_profile(spec, spec.h2_focus_band);

    std::vector<float> clean(B * N), h1(B * N), h2(B * N), white(B * N);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double sd = spec.noise_sd;
    std::vector<double> observed(N);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t p = 0; p < N; ++p) {
            const auto& w = mix[p];
            const double refl = w[0] * substrate[b] + w[1] * chalk[b] + w[2] * diluted[b] + w[3] * ink[b];
            clean[b * N + p] = static_cast<float>(refl * shading[p]);
            observed[p] = refl * shading[p] * light[p] * sensitivity[b];
        }
        const auto blur1 = gaussian_blur(std::span<const double>(observed), R, C, out.h1_sigma[b]);
        const auto blur2 = gaussian_blur(std::span<const double>(observed), R, C, out.h2_sigma[b]);
        for (std::size_t p = 0; p < N; ++p) {
            h1[b * N + p] = static_cast<float>(blur1[p] + sd * noise(rng));
            h2[b * N + p] = static_cast<float>(blur2[p] + sd * noise(rng));
            white[b * N + p] =
                static_cast<float>(spec.white_reflectance * light[p] * sensitivity[b] + sd * noise(rng));
        }
    }
    out.clean = HsiCube(R, C, B, std::move(clean), wavelengths);
    out.h1 = HsiCube(R, C, B, std::move(h1), wavelengths);
    out.h2 = HsiCube(R, C, B, std::move(h2), wavelengths);
    out.white_ref = HsiCube(R, C, B, std::move(white), wavelengths);
    out.truth = GroundTruth{R, C, std::move(labels), class_names_for(spec.labeling)};
    return out;
}

}  // namespace strata
