#pragma once

// Multi-channel raster types shared by every stage of the pipeline.
//
// Memory layout is band-sequential (BSQ):
//   data[b * rows * cols + r * cols + c]
// so each band is one contiguous plane.
//
// Channel numbers in public docs, configs and CLI flags are 1-based
// ("channel 24"), matching how hyperspectral channels are usually quoted.
// Every index taken by a C++ function is 0-based unless the parameter
// name says otherwise.

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/common.hpp"

namespace strata {

class Raster {
public:
    Raster() = default;

    /// Empty `data` allocates a zero-filled raster.
    Raster(std::size_t rows, std::size_t cols, std::size_t channels, std::vector<float> data = {})
        : rows_(rows), cols_(cols), channels_(channels), data_(std::move(data)) {
        if (rows == 0 || cols == 0 || channels == 0)
            throw std::invalid_argument("raster dimensions must be positive");
        if (data_.empty()) data_.assign(rows * cols * channels, 0.0f);
        if (data_.size() != rows * cols * channels)
            throw std::invalid_argument("raster data length " + std::to_string(data_.size()) +
                                        " != rows*cols*channels " +
                                        std::to_string(rows * cols * channels));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t channels() const { return channels_; }
    std::size_t pixels() const { return rows_ * cols_; }
    bool empty() const { return data_.empty(); }

    std::span<const float> plane(std::size_t ch) const {
        return {data_.data() + ch * pixels(), pixels()};
    }
    std::span<float> plane(std::size_t ch) { return {data_.data() + ch * pixels(), pixels()}; }

    float at(std::size_t r, std::size_t c, std::size_t ch) const {
        return data_[ch * pixels() + r * cols_ + c];
    }
    float& at(std::size_t r, std::size_t c, std::size_t ch) {
        return data_[ch * pixels() + r * cols_ + c];
    }

    /// Gathers the spectrum of pixel index p (row-major) into `out`.
    void spectrum(std::size_t p, std::span<float> out) const {
        for (std::size_t ch = 0; ch < channels_; ++ch) out[ch] = data_[ch * pixels() + p];
    }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    bool same_grid(const Raster& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t channels_ = 0;
    std::vector<float> data_;
};

/// Reflectance cube with optional per-band wavelengths in nm.
class HsiCube : public Raster {
public:
    HsiCube() = default;
    HsiCube(std::size_t rows, std::size_t cols, std::size_t bands, std::vector<float> data = {},
            std::vector<double> wavelengths = {})
        : Raster(rows, cols, bands, std::move(data)), wavelengths_(std::move(wavelengths)) {
        if (!wavelengths_.empty()) {
            if (wavelengths_.size() != bands)
                throw std::invalid_argument("wavelength count must equal band count");
            for (std::size_t b = 1; b < wavelengths_.size(); ++b)
                if (!(wavelengths_[b] > wavelengths_[b - 1]))
                    throw std::invalid_argument("wavelengths must be strictly increasing");
        }
    }

    std::size_t bands() const { return channels(); }
    std::span<const float> band(std::size_t b) const { return plane(b); }
    std::span<float> band(std::size_t b) { return plane(b); }

    const std::vector<double>& wavelengths() const { return wavelengths_; }
    bool has_wavelengths() const { return !wavelengths_.empty(); }

    /// Same shape and metadata, different values.
    HsiCube with_data(std::vector<float> data) const {
        return HsiCube(rows(), cols(), bands(), std::move(data), wavelengths_);
    }

private:
    std::vector<double> wavelengths_;
};

/// Named per-pixel descriptor channels; the input to classification.
class FeatureStack : public Raster {
public:
    FeatureStack() = default;
    FeatureStack(std::size_t rows, std::size_t cols, std::size_t channels,
                 std::vector<float> data = {}, std::vector<std::string> names = {})
        : Raster(rows, cols, channels, std::move(data)), names_(std::move(names)) {
        if (names_.empty()) {
            names_.reserve(channels);
            for (std::size_t i = 0; i < channels; ++i) names_.push_back("f" + std::to_string(i + 1));
        }
        if (names_.size() != channels)
            throw std::invalid_argument("feature name count must equal channel count");
    }

    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
};

/// Channels are named "<prefix><1-based band>".
inline FeatureStack to_features(const HsiCube& cube, const std::string& prefix = "band") {
    std::vector<std::string> names;
    names.reserve(cube.bands());
    for (std::size_t b = 0; b < cube.bands(); ++b) names.push_back(prefix + std::to_string(b + 1));
    return FeatureStack(cube.rows(), cube.cols(), cube.bands(), cube.data(), std::move(names));
}

/// Reinterprets a stack as a cube (no wavelengths); used to persist stacks.
inline HsiCube to_cube(const FeatureStack& stack) {
    return HsiCube(stack.rows(), stack.cols(), stack.channels(), stack.data());
}

struct RgbImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> r, g, b;
};

/// Inclusive 1-based channel range.
struct ChannelRange {
    std::size_t first = 1;
    std::size_t last = 1;
};

/// Band windows averaged into simulated R, G and B. Defaults correspond to
/// 620-750 nm, 495-570 nm and 415-495 nm on the reference 258-band sensor.
struct RgbBands {
    ChannelRange red{108, 156};
    ChannelRange green{57, 87};
    ChannelRange blue{24, 56};
};

inline RgbImage simulate_rgb(const HsiCube& cube, const RgbBands& bands = {}) {
    for (const ChannelRange* range : {&bands.red, &bands.green, &bands.blue}) {
        if (range->first < 1 || range->last < range->first)
            throw std::invalid_argument("invalid RGB channel range");
        if (range->last > cube.bands())
            throw std::invalid_argument("cube has " + std::to_string(cube.bands()) +
                                        " bands; RGB simulation needs channel " +
                                        std::to_string(range->last));
    }
    RgbImage out{cube.rows(), cube.cols(), {}, {}, {}};
    auto average = [&](const ChannelRange& range, std::vector<float>& dst) {
        dst.assign(cube.pixels(), 0.0f);
        const std::size_t count = range.last - range.first + 1;
        std::vector<double> acc(cube.pixels(), 0.0);
        for (std::size_t b = range.first - 1; b < range.last; ++b) {
            const auto plane = cube.band(b);
            for (std::size_t p = 0; p < plane.size(); ++p) acc[p] += plane[p];
        }
        for (std::size_t p = 0; p < acc.size(); ++p)
            dst[p] = static_cast<float>(acc[p] / static_cast<double>(count));
    };
    average(bands.red, out.r);
    average(bands.green, out.g);
    average(bands.blue, out.b);
    return out;
}

inline FeatureStack to_features(const RgbImage& rgb) {
    std::vector<float> data;
    data.reserve(rgb.r.size() * 3);
    data.insert(data.end(), rgb.r.begin(), rgb.r.end());
    data.insert(data.end(), rgb.g.begin(), rgb.g.end());
    data.insert(data.end(), rgb.b.begin(), rgb.b.end());
    return FeatureStack(rgb.rows, rgb.cols, 3, std::move(data), {"R", "G", "B"});
}

/// Channel-wise concatenation in argument order.
inline FeatureStack stack_features(std::span<const FeatureStack> parts) {
    if (parts.empty()) throw std::invalid_argument("stack_features needs at least one part");
    std::size_t channels = 0;
    for (const auto& part : parts) {
        if (!part.same_grid(parts.front()))
            throw std::invalid_argument("stack_features: parts differ in rows/cols");
        channels += part.channels();
    }
    std::vector<float> data;
    data.reserve(channels * parts.front().pixels());
    std::vector<std::string> names;
    names.reserve(channels);
    for (const auto& part : parts) {
        data.insert(data.end(), part.data().begin(), part.data().end());
        names.insert(names.end(), part.names().begin(), part.names().end());
    }
    return FeatureStack(parts.front().rows(), parts.front().cols(), channels, std::move(data),
                        std::move(names));
}

inline FeatureStack stack_features(std::initializer_list<FeatureStack> parts) {
    return stack_features(std::span<const FeatureStack>(parts.begin(), parts.size()));
}

}  // namespace strata
