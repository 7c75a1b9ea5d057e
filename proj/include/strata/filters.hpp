#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "strata/common.hpp"

namespace strata {

enum class Border {
    Reflect,    ///< mirror about the edge sample: f(-k) = f(k)
    PointOdd,   ///< point reflection: f(-k) = 2 f(0) - f(k); preserves linear ramps
};

namespace filter_detail {

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Value at virtual index i of a 1-D line of length n (strided).
template <class T>
double sample(const T* line, std::ptrdiff_t stride, std::ptrdiff_t n, std::ptrdiff_t i,
              Border border) {
    if (n == 1) return line[0];
    if (i >= 0 && i < n) return line[i * stride];
    // Fold repeatedly for kernels wider than the line.
    if (border == Border::Reflect) {
        const std::ptrdiff_t period = 2 * (n - 1);
        std::ptrdiff_t j = i % period;
        if (j < 0) j += period;
        if (j >= n) j = period - j;
        return line[j * stride];
    }
    if (i < 0) return 2.0 * line[0] - sample(line, stride, n, -i, border);
    return 2.0 * line[(n - 1) * stride] - sample(line, stride, n, 2 * (n - 1) - i, border);
}

}  // namespace filter_detail

/// Separable Gaussian blur of one row-major plane. sigma <= 0 copies.
template <class T>
std::vector<double> gaussian_blur(std::span<const T> plane, std::size_t rows, std::size_t cols,
                                  double sigma, Border border = Border::Reflect) {
    std::vector<double> out(plane.begin(), plane.end());
    if (sigma <= 0.0) return out;
    const auto kernel = filter_detail::gaussian_kernel(sigma);
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto R = static_cast<std::ptrdiff_t>(rows);
    const auto C = static_cast<std::ptrdiff_t>(cols);

    std::vector<double> padded;
    auto convolve_line = [&](double* line, std::ptrdiff_t stride, std::ptrdiff_t n) {
        padded.resize(n + 2 * radius);
        for (std::ptrdiff_t i = -radius; i < n + radius; ++i)
            padded[i + radius] = filter_detail::sample(line, stride, n, i, border);
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            double acc = 0.0;
            const double* window = padded.data() + i;
            for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * window[k];
            line[i * stride] = acc;
        }
    };
    for (std::ptrdiff_t r = 0; r < R; ++r) convolve_line(out.data() + r * C, 1, C);
    for (std::ptrdiff_t c = 0; c < C; ++c) convolve_line(out.data() + c, C, R);
    return out;
}

/// Variance of the 4-neighbour Laplacian over interior pixels; a focus measure.
template <class T>
double laplacian_variance(std::span<const T> plane, std::size_t rows, std::size_t cols) {
    if (rows < 3 || cols < 3) return 0.0;
    CompensatedSum sum, sum_sq;
    std::size_t n = 0;
    for (std::size_t r = 1; r + 1 < rows; ++r) {
        for (std::size_t c = 1; c + 1 < cols; ++c) {
            const std::size_t p = r * cols + c;
            const double lap = static_cast<double>(plane[p - cols]) + plane[p + cols] + plane[p - 1] +
                               plane[p + 1] - 4.0 * plane[p];
            sum.add(lap);
            sum_sq.add(lap * lap);
            ++n;
        }
    }
    const double mean = sum.value() / static_cast<double>(n);
    return std::max(0.0, sum_sq.value() / static_cast<double>(n) - mean * mean);
}

}  // namespace strata
