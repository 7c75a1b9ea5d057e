#pragma once

// PCA over pixels: every pixel is a sample, every channel a variable.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/cube.hpp"

namespace strata {

struct PcaModel {
    std::vector<double> mean;                ///< length d
    std::vector<double> components;          ///< k x d, row-major, orthonormal rows
    std::vector<double> explained_variance;  ///< length k, non-increasing
    double total_variance = 0.0;
    double retained_ratio = 0.0;

    std::size_t dims() const { return mean.size(); }
    std::size_t rank() const { return explained_variance.size(); }
    std::span<const double> component(std::size_t i) const {
        return {components.data() + i * dims(), dims()};
    }
};

namespace pca_detail {

constexpr std::size_t kBlock = 2048;

/// Rows of pixel indices taken into the fit.
inline std::vector<std::size_t> sample_pixels(std::size_t pixels, const std::vector<std::uint8_t>* mask) {
    std::vector<std::size_t> idx;
    if (mask && mask->size() != pixels) throw std::invalid_argument("PCA mask size mismatch");
    idx.reserve(pixels);
    for (std::size_t p = 0; p < pixels; ++p)
        if (!mask || (*mask)[p]) idx.push_back(p);
    return idx;
}

}  // namespace pca_detail

/// Keeps the smallest number of components whose cumulative explained
/// variance reaches `target_variance`. Pixels with mask == 0 are ignored.
/// Each component's largest-magnitude entry is made positive.
inline PcaModel fit_pca(const FeatureStack& stack, double target_variance,
                        const std::vector<std::uint8_t>* mask = nullptr) {
    if (!(target_variance > 0.0 && target_variance <= 1.0))
        throw std::invalid_argument("PCA target variance must lie in (0, 1]");
    const auto samples = pca_detail::sample_pixels(stack.pixels(), mask);
    if (samples.size() < 2) throw std::invalid_argument("PCA needs at least 2 samples");
    const std::size_t d = stack.channels();
    const auto n = static_cast<double>(samples.size());

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (std::size_t ch = 0; ch < d; ++ch) {
        const auto plane = stack.plane(ch);
        CompensatedSum acc;
        for (auto p : samples) acc.add(plane[p]);
        model.mean[ch] = acc.value() / n;
    }

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::MatrixXd block;
    for (std::size_t start = 0; start < samples.size(); start += pca_detail::kBlock) {
        const std::size_t rows = std::min(pca_detail::kBlock, samples.size() - start);
        block.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
        for (std::size_t ch = 0; ch < d; ++ch) {
            const auto plane = stack.plane(ch);
            for (std::size_t i = 0; i < rows; ++i)
                block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ch)) =
                    plane[samples[start + i]] - model.mean[ch];
        }
        cov.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= (n - 1.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("PCA eigen-decomposition failed");
    const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
    const Eigen::MatrixXd& vectors = solver.eigenvectors();

    double total = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) total += std::max(0.0, values(i));
    if (!(total > 0.0)) throw std::invalid_argument("PCA input has zero total variance");
    model.total_variance = total;

    double cumulative = 0.0;
    for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
        const double var = std::max(0.0, values(i));
        cumulative += var;
        model.explained_variance.push_back(var);
        Eigen::VectorXd v = vectors.col(i);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        model.components.insert(model.components.end(), v.data(), v.data() + v.size());
        // Relative slack absorbs rounding when the target is 1.
        if (cumulative / total >= target_variance * (1.0 - 1e-12)) break;
    }
    model.retained_ratio = std::min(1.0, cumulative / total);
    return model;
}

/// Per-pixel (x - mean) . components^T; k output channels "pc1".."pck".
inline FeatureStack transform_pca(const FeatureStack& stack, const PcaModel& model) {
    const std::size_t d = model.dims();
    if (stack.channels() != d)
        throw std::invalid_argument("PCA model expects " + std::to_string(d) + " channels, got " +
                                    std::to_string(stack.channels()));
    const std::size_t k = model.rank();
    const std::size_t pixels = stack.pixels();
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> comps(
        model.components.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    std::vector<float> out(k * pixels);
    Eigen::MatrixXd block, projected;
    for (std::size_t start = 0; start < pixels; start += pca_detail::kBlock) {
        const std::size_t rows = std::min(pca_detail::kBlock, pixels - start);
        block.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
        for (std::size_t ch = 0; ch < d; ++ch) {
            const auto plane = stack.plane(ch);
            for (std::size_t i = 0; i < rows; ++i)
                block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ch)) =
                    plane[start + i] - model.mean[ch];
        }
        projected.noalias() = block * comps.transpose();
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t i = 0; i < rows; ++i)
                out[c * pixels + start + i] =
                    static_cast<float>(projected(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) names.push_back("pc" + std::to_string(c + 1));
    return FeatureStack(stack.rows(), stack.cols(), k, std::move(out), std::move(names));
}

/// Maps projected channels back to the original space: mean + y . components.
inline FeatureStack inverse_transform_pca(const FeatureStack& projected, const PcaModel& model) {
    const std::size_t k = model.rank(), d = model.dims(), pixels = projected.pixels();
    if (projected.channels() != k) throw std::invalid_argument("inverse PCA: channel count mismatch");
    std::vector<float> out(d * pixels);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < d; ++ch) {
            double v = model.mean[ch];
            for (std::size_t c = 0; c < k; ++c)
                v += static_cast<double>(projected.plane(c)[p]) * model.components[c * d + ch];
            out[ch * pixels + p] = static_cast<float>(v);
        }
    }
    return FeatureStack(projected.rows(), projected.cols(), d, std::move(out));
}

}  // namespace strata
