#pragma once

// Hyper-hue, saturation and intensity of n-band pixels.
//
// The chromatic hyperplane P is the orthogonal complement of the achromatic
// axis (1,...,1). It is spanned by n-1 orthonormal vectors u_1..u_{n-1}
// where u_i has i-1 leading zeros followed by m = n-i+1 nonzero entries:
//
//   u_i = (0, ..., 0, (m-1)/sqrt(m(m-1)), -1/sqrt(m(m-1)), ..., -1/sqrt(m(m-1)))
//
// A pixel x is projected as c = sum_i (x . u_i) u_i. Then
//   hue        h = c / |c|            (zero and flagged if |c| < eps)
//   saturation S = max(x) - min(x)
//   intensity  I = mean(x)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/common.hpp"
#include "strata/cube.hpp"

namespace strata {

/// Orthonormal basis of the chromatic hyperplane for dimension n.
class ChromaticBasis {
public:
    explicit ChromaticBasis(std::size_t n) : n_(n) {
        if (n < 2) throw std::invalid_argument("chromatic basis needs n >= 2");
        vectors_.assign((n - 1) * n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double m = static_cast<double>(n - i);
            const double norm = std::sqrt(m * (m - 1.0));
            double* u = vectors_.data() + i * n;
            u[i] = (m - 1.0) / norm;
            for (std::size_t j = i + 1; j < n; ++j) u[j] = -1.0 / norm;
        }
    }

    std::size_t dimension() const { return n_; }
    std::size_t size() const { return n_ - 1; }

    /// The i-th spanning vector (0-based), length n.
    std::span<const double> vector(std::size_t i) const { return {vectors_.data() + i * n_, n_}; }

    /// Unit achromatic axis (1,...,1)/sqrt(n).
    std::vector<double> achromatic_axis() const {
        return std::vector<double>(n_, 1.0 / std::sqrt(static_cast<double>(n_)));
    }

private:
    std::size_t n_;
    std::vector<double> vectors_;
};

/// Shared immutable basis per dimension.
inline std::shared_ptr<const ChromaticBasis> cached_basis(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, std::shared_ptr<const ChromaticBasis>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_shared<const ChromaticBasis>(n);
    return slot;
}

/// c = sum_i (x . u_i) u_i, written to `out` (length n).
template <class T>
void project_chromatic(std::span<const T> x, const ChromaticBasis& basis, std::span<double> out) {
    const std::size_t n = basis.dimension();
    if (x.size() != n || out.size() != n)
        throw std::invalid_argument("project_chromatic: length mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto u = basis.vector(i);
        // u_i is zero before index i.
        double dot = 0.0;
        for (std::size_t j = i; j < n; ++j) dot += static_cast<double>(x[j]) * u[j];
        for (std::size_t j = i; j < n; ++j) out[j] += dot * u[j];
    }
}

template <class T>
std::vector<double> project_chromatic(std::span<const T> x, const ChromaticBasis& basis) {
    std::vector<double> c(basis.dimension());
    project_chromatic(x, basis, std::span<double>(c));
    return c;
}

inline constexpr double kAchromaticEpsilon = 1e-12;

struct HsiPixel {
    std::vector<double> hue;  ///< unit vector in P, or all zeros if achromatic
    double saturation = 0.0;
    double intensity = 0.0;
    bool achromatic = false;
};

template <class T>
HsiPixel hsi_pixel(std::span<const T> x, const ChromaticBasis& basis,
                   double epsilon = kAchromaticEpsilon) {
    HsiPixel px;
    px.hue = project_chromatic(x, basis);
    double norm_sq = 0.0;
    for (double v : px.hue) norm_sq += v * v;
    const double norm = std::sqrt(norm_sq);
    if (norm < epsilon) {
        std::fill(px.hue.begin(), px.hue.end(), 0.0);
        px.achromatic = true;
    } else {
        for (double& v : px.hue) v /= norm;
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    px.saturation = static_cast<double>(*hi) - static_cast<double>(*lo);
    double sum = 0.0;
    for (const T v : x) sum += static_cast<double>(v);
    px.intensity = sum / static_cast<double>(x.size());
    return px;
}

struct HsiDecomposition {
    FeatureStack hue;         ///< n channels
    FeatureStack saturation;  ///< 1 channel
    FeatureStack intensity;   ///< 1 channel
    std::vector<std::uint8_t> achromatic;  ///< per pixel, 1 = flagged
    std::size_t achromatic_count = 0;
};

/// Per-pixel hyper-hue, saturation and intensity of a cube.
inline HsiDecomposition hsi_transform(const HsiCube& cube, double epsilon = kAchromaticEpsilon) {
    const std::size_t n = cube.bands();
    const auto basis = cached_basis(n);
    const std::size_t pixels = cube.pixels();
    std::vector<float> hue(n * pixels), sat(pixels), inten(pixels);
    std::vector<std::uint8_t> flags(pixels, 0);

    constexpr std::size_t kChunk = 1024;
    const std::size_t chunks = (pixels + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t chunk) {
        std::vector<float> x(n);
        for (std::size_t p = chunk * kChunk; p < std::min(pixels, (chunk + 1) * kChunk); ++p) {
            cube.spectrum(p, x);
            const HsiPixel px = hsi_pixel(std::span<const float>(x), *basis, epsilon);
            for (std::size_t b = 0; b < n; ++b) hue[b * pixels + p] = static_cast<float>(px.hue[b]);
            sat[p] = static_cast<float>(px.saturation);
            inten[p] = static_cast<float>(px.intensity);
            flags[p] = px.achromatic ? 1 : 0;
        }
    });

    std::vector<std::string> hue_names;
    for (std::size_t b = 0; b < n; ++b) hue_names.push_back("hue" + std::to_string(b + 1));
    HsiDecomposition out{
        FeatureStack(cube.rows(), cube.cols(), n, std::move(hue), std::move(hue_names)),
        FeatureStack(cube.rows(), cube.cols(), 1, std::move(sat), {"S"}),
        FeatureStack(cube.rows(), cube.cols(), 1, std::move(inten), {"I"}),
        std::move(flags), 0};
    for (auto f : out.achromatic) out.achromatic_count += f;
    return out;
}

}  // namespace strata
