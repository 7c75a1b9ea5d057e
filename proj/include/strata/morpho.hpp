#pragma once

// Attribute filters on component trees and the AP / MAP / EMAP stacks
// built from them.
//
// A max-tree holds the connected components of the upper level sets
// {f >= t} of an 8-bit image; a min-tree those of the lower level sets.
// Attribute thinning prunes max-tree nodes whose attribute is below the
// threshold (bright components merge into their darker surroundings);
// thickening does the same on the min-tree.
//
// The tree is built with the union-find algorithm of Berger et al. (2007):
// pixels are visited in decreasing (max-tree) or increasing (min-tree)
// level order and merged with already-visited neighbours.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/common.hpp"
#include "strata/cube.hpp"

namespace strata {

inline constexpr int kGrayLevels = 256;

struct QuantizedChannel {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> levels;
    double min = 0.0;  ///< value mapped to level 0
    double max = 0.0;  ///< value mapped to level 255

    std::size_t pixels() const { return rows * cols; }
};

/// Linear min-max mapping onto [0, 255] with round-half-up. A constant
/// channel maps to level 0.
template <class T>
QuantizedChannel quantize(std::span<const T> values, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0 || values.size() != rows * cols)
        throw std::invalid_argument("quantize: values do not match rows*cols");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const T v : values) {
        if (!std::isfinite(static_cast<double>(v)))
            throw std::invalid_argument("quantize: non-finite value");
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    QuantizedChannel q{rows, cols, std::vector<std::uint8_t>(values.size(), 0), lo, hi};
    if (hi > lo) {
        const double scale = 255.0 / (hi - lo);
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double level = std::floor((static_cast<double>(values[i]) - lo) * scale + 0.5);
            q.levels[i] = static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
        }
    }
    return q;
}

inline double dequantize(std::uint8_t level, const QuantizedChannel& q) {
    return q.min + (q.max - q.min) * static_cast<double>(level) / 255.0;
}

enum class Polarity { MaxTree, MinTree };
enum class Connectivity { Four = 4, Eight = 8 };
enum class AttributeKind { Area, StdDev, Moment };
/// How nodes below a failing node are treated for non-increasing attributes.
enum class FilterRule {
    Min,     ///< a node survives only if it and all its ancestors pass
    Direct,  ///< each node is judged on its own attribute
};

inline std::string to_string(AttributeKind k) {
    switch (k) {
        case AttributeKind::Area: return "area";
        case AttributeKind::StdDev: return "stddev";
        case AttributeKind::Moment: return "moment";
    }
    return "?";
}

inline std::string to_string(FilterRule r) { return r == FilterRule::Min ? "min" : "direct"; }

/// Node attributes accumulated over every pixel of the component.
struct NodeStats {
    std::uint64_t area = 0;
    double sum = 0.0;     ///< gray levels
    double sum_sq = 0.0;
    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;

    void merge(const NodeStats& o) {
        area += o.area;
        sum += o.sum;
        sum_sq += o.sum_sq;
        sx += o.sx;
        sy += o.sy;
        sxx += o.sxx;
        syy += o.syy;
    }

    double stddev() const {
        const double n = static_cast<double>(area);
        const double mean = sum / n;
        return std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
    }

    /// First Hu invariant (mu20 + mu02) / area^2 of the member pixel
    /// coordinates. 0 for a single pixel; grows with elongation.
    double moment_of_inertia() const {
        const double n = static_cast<double>(area);
        const double mu20 = sxx - sx * sx / n;
        const double mu02 = syy - sy * sy / n;
        return std::max(0.0, mu20 + mu02) / (n * n);
    }

    double value(AttributeKind kind) const {
        switch (kind) {
            case AttributeKind::Area: return static_cast<double>(area);
            case AttributeKind::StdDev: return stddev();
            case AttributeKind::Moment: return moment_of_inertia();
        }
        return 0.0;
    }
};

/// Component tree in topological order: node 0 is the root and every
/// parent index is smaller than its children's.
struct ComponentTree {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Polarity polarity = Polarity::MaxTree;
    std::vector<std::uint32_t> parent;   ///< per node; root points to itself
    std::vector<std::uint8_t> level;     ///< per node
    std::vector<NodeStats> stats;        ///< per node, whole component
    std::vector<std::uint32_t> node_of;  ///< per pixel: node owning the pixel

    std::size_t size() const { return parent.size(); }

    /// Pixels owned directly by each node (not by a descendant).
    std::vector<std::uint64_t> exclusive_counts() const {
        std::vector<std::uint64_t> n(size(), 0);
        for (auto id : node_of) ++n[id];
        return n;
    }
};

namespace morpho_detail {

inline std::uint32_t find_root(std::vector<std::uint32_t>& zpar, std::uint32_t p) {
    std::uint32_t root = p;
    while (zpar[root] != root) root = zpar[root];
    while (zpar[p] != root) {
        const std::uint32_t next = zpar[p];
        zpar[p] = root;
        p = next;
    }
    return root;
}

}  // namespace morpho_detail

inline ComponentTree build_tree(const QuantizedChannel& img, Polarity polarity,
                                Connectivity connectivity = Connectivity::Four) {
    const std::size_t n = img.pixels();
    if (n == 0 || img.levels.size() != n) throw std::invalid_argument("build_tree: empty image");
    if (n >= std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument("build_tree: image too large");
    const auto& f = img.levels;
    const auto rows = static_cast<std::ptrdiff_t>(img.rows);
    const auto cols = static_cast<std::ptrdiff_t>(img.cols);

    // Counting sort, stable in pixel index. Max-tree: brightest first.
    std::array<std::size_t, kGrayLevels + 1> start{};
    for (auto v : f) ++start[v + 1];
    for (int i = 0; i < kGrayLevels; ++i) start[i + 1] += start[i];
    std::vector<std::uint32_t> order(n);
    {
        auto pos = start;
        for (std::uint32_t p = 0; p < n; ++p) order[pos[f[p]]++] = p;
    }
    if (polarity == Polarity::MaxTree) std::reverse(order.begin(), order.end());

    constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> parent(n), zpar(n, kUnset);
    static constexpr std::array<std::array<int, 2>, 8> kOffsets{
        {{-1, 0}, {0, -1}, {0, 1}, {1, 0}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}}};
    const int neighbours = connectivity == Connectivity::Eight ? 8 : 4;

    for (const std::uint32_t p : order) {
        parent[p] = p;
        zpar[p] = p;
        const std::ptrdiff_t pr = p / cols, pc = p % cols;
        for (int k = 0; k < neighbours; ++k) {
            const std::ptrdiff_t qr = pr + kOffsets[k][0], qc = pc + kOffsets[k][1];
            if (qr < 0 || qr >= rows || qc < 0 || qc >= cols) continue;
            const auto q = static_cast<std::uint32_t>(qr * cols + qc);
            if (zpar[q] == kUnset) continue;
            const std::uint32_t r = morpho_detail::find_root(zpar, q);
            if (r != p) {
                parent[r] = p;
                zpar[r] = p;
            }
        }
    }

    // Canonicalize so every pixel points at the canonical pixel of its node.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const std::uint32_t p = *it;
        const std::uint32_t q = parent[p];
        if (f[parent[q]] == f[q]) parent[p] = parent[q];
    }

    ComponentTree tree;
    tree.rows = img.rows;
    tree.cols = img.cols;
    tree.polarity = polarity;
    tree.node_of.assign(n, 0);
    const std::uint32_t root = order.back();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const std::uint32_t p = *it;
        const bool canonical = p == root || f[parent[p]] != f[p];
        if (canonical) {
            const auto id = static_cast<std::uint32_t>(tree.parent.size());
            tree.parent.push_back(p == root ? id : tree.node_of[parent[p]]);
            tree.level.push_back(f[p]);
            tree.node_of[p] = id;
        } else {
            tree.node_of[p] = tree.node_of[parent[p]];
        }
    }

    tree.stats.assign(tree.size(), NodeStats{});
    for (std::size_t p = 0; p < n; ++p) {
        auto& s = tree.stats[tree.node_of[p]];
        const double v = f[p];
        const double x = static_cast<double>(p % img.cols), y = static_cast<double>(p / img.cols);
        ++s.area;
        s.sum += v;
        s.sum_sq += v * v;
        s.sx += x;
        s.sy += y;
        s.sxx += x * x;
        s.syy += y * y;
    }
    for (std::size_t id = tree.size(); id-- > 1;) tree.stats[tree.parent[id]].merge(tree.stats[id]);
    return tree;
}

/// Filters the image represented by `tree`: nodes whose attribute is below
/// `threshold` take the output level of their parent.
inline std::vector<std::uint8_t> filter_tree(const ComponentTree& tree, AttributeKind kind,
                                             double threshold, FilterRule rule = FilterRule::Min) {
    std::vector<std::uint8_t> out_level(tree.size());
    std::vector<std::uint8_t> kept(tree.size());
    out_level[0] = tree.level[0];
    kept[0] = 1;
    for (std::size_t id = 1; id < tree.size(); ++id) {
        const std::uint32_t par = tree.parent[id];
        bool keep = tree.stats[id].value(kind) >= threshold;
        if (rule == FilterRule::Min) keep = keep && kept[par];
        kept[id] = keep;
        out_level[id] = keep ? tree.level[id] : out_level[par];
    }
    std::vector<std::uint8_t> out(tree.node_of.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = out_level[tree.node_of[p]];
    return out;
}

/// One attribute with its increasing thresholds.
struct ApConfig {
    AttributeKind attribute = AttributeKind::Area;
    std::vector<double> thresholds;
    Connectivity connectivity = Connectivity::Four;
    FilterRule rule = FilterRule::Min;

    void validate() const {
        if (thresholds.empty()) throw std::invalid_argument("ApConfig needs at least one threshold");
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (!(thresholds[i] >= 0.0)) throw std::invalid_argument("ApConfig thresholds must be >= 0");
            if (i && !(thresholds[i] > thresholds[i - 1]))
                throw std::invalid_argument("ApConfig thresholds must be strictly increasing");
        }
    }

    std::size_t profile_length() const { return 2 * thresholds.size() + 1; }
};

inline std::vector<std::uint8_t> attribute_thinning(const QuantizedChannel& img, double threshold,
                                                    const ApConfig& cfg) {
    return filter_tree(build_tree(img, Polarity::MaxTree, cfg.connectivity), cfg.attribute, threshold,
                       cfg.rule);
}

inline std::vector<std::uint8_t> attribute_thickening(const QuantizedChannel& img, double threshold,
                                                      const ApConfig& cfg) {
    return filter_tree(build_tree(img, Polarity::MinTree, cfg.connectivity), cfg.attribute, threshold,
                       cfg.rule);
}

/// Level-domain profile [thick_k, ..., thick_1, f, thin_1, ..., thin_k].
inline std::vector<std::vector<std::uint8_t>> attribute_profile_levels(const QuantizedChannel& img,
                                                                       const ApConfig& cfg) {
    cfg.validate();
    const std::size_t k = cfg.thresholds.size();
    std::vector<std::vector<std::uint8_t>> profile(2 * k + 1);
    const auto min_tree = build_tree(img, Polarity::MinTree, cfg.connectivity);
    for (std::size_t i = 0; i < k; ++i)
        profile[k - 1 - i] = filter_tree(min_tree, cfg.attribute, cfg.thresholds[i], cfg.rule);
    profile[k] = img.levels;
    const auto max_tree = build_tree(img, Polarity::MaxTree, cfg.connectivity);
    for (std::size_t i = 0; i < k; ++i)
        profile[k + 1 + i] = filter_tree(max_tree, cfg.attribute, cfg.thresholds[i], cfg.rule);
    return profile;
}

namespace morpho_detail {

inline std::string threshold_label(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", t);
    return buf;
}

/// Writes the de-quantized profile of `q` to dst (profile_length planes).
inline void write_profile(const QuantizedChannel& q, const ApConfig& cfg, const std::string& base,
                          float* dst, std::vector<std::string>& names) {
    const auto profile = attribute_profile_levels(q, cfg);
    const std::size_t k = cfg.thresholds.size();
    for (std::size_t i = 0; i < profile.size(); ++i) {
        for (auto level : profile[i]) *dst++ = static_cast<float>(dequantize(level, q));
        if (i < k)
            names.push_back(base + ":" + to_string(cfg.attribute) + ":thick" +
                            threshold_label(cfg.thresholds[k - 1 - i]));
        else if (i == k)
            names.push_back(base);
        else
            names.push_back(base + ":" + to_string(cfg.attribute) + ":thin" +
                            threshold_label(cfg.thresholds[i - k - 1]));
    }
}

}  // namespace morpho_detail

/// Attribute profile of one float channel (2k+1 channels), computed on the
/// quantized channel and mapped back to its value range.
template <class T>
FeatureStack attribute_profile(std::span<const T> channel, std::size_t rows, std::size_t cols,
                               const ApConfig& cfg, const std::string& name = "f") {
    const auto q = quantize(channel, rows, cols);
    std::vector<float> data(cfg.profile_length() * rows * cols);
    std::vector<std::string> names;
    morpho_detail::write_profile(q, cfg, name, data.data(), names);
    const std::size_t channels = names.size();
    return FeatureStack(rows, cols, channels, std::move(data), std::move(names));
}

/// Extended multi-attribute profile: for every base channel, the attribute
/// profiles of all configs, concatenated. Output has
/// channels * sum(2 k_cfg + 1) channels.
inline FeatureStack emap(const FeatureStack& base, std::span<const ApConfig> cfgs) {
    if (cfgs.empty()) throw std::invalid_argument("emap needs at least one attribute config");
    std::size_t per_channel = 0;
    for (const auto& cfg : cfgs) {
        cfg.validate();
        per_channel += cfg.profile_length();
    }
    const std::size_t pixels = base.pixels();
    std::vector<float> data(base.channels() * per_channel * pixels);
    std::vector<std::vector<std::string>> block_names(base.channels());
    parallel_for(base.channels(), [&](std::size_t ch) {
        const auto q = quantize(base.plane(ch), base.rows(), base.cols());
        float* dst = data.data() + ch * per_channel * pixels;
        for (const auto& cfg : cfgs) {
            morpho_detail::write_profile(q, cfg, base.names()[ch], dst, block_names[ch]);
            dst += cfg.profile_length() * pixels;
        }
    });
    std::vector<std::string> names;
    for (auto& block : block_names) names.insert(names.end(), block.begin(), block.end());
    const std::size_t channels = names.size();
    return FeatureStack(base.rows(), base.cols(), channels, std::move(data), std::move(names));
}

/// Threshold schedules used when none are configured explicitly:
///  - area:   geometric from max(1, 0.1% of the image) to 20% of the image,
///            rounded to integers and deduplicated;
///  - stddev: linear 2.5 .. 50 (gray levels);
///  - moment: linear 0.2 .. 1.0.
/// k = 1 yields the lower bound alone.
inline std::vector<double> auto_thresholds(AttributeKind kind, std::size_t k, std::size_t image_area) {
    if (k == 0) throw std::invalid_argument("auto_thresholds: k must be >= 1");
    auto linear = [k](double lo, double hi) {
        std::vector<double> t(k);
        for (std::size_t i = 0; i < k; ++i)
            t[i] = k == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
        return t;
    };
    switch (kind) {
        case AttributeKind::StdDev: return linear(2.5, 50.0);
        case AttributeKind::Moment: return linear(0.2, 1.0);
        case AttributeKind::Area: break;
    }
    if (image_area == 0) throw std::invalid_argument("auto_thresholds: empty image");
    const double lo = std::max(1.0, 0.001 * static_cast<double>(image_area));
    const double hi = 0.2 * static_cast<double>(image_area);
    if (hi < lo)
        throw std::invalid_argument("auto_thresholds: image of " + std::to_string(image_area) +
                                    " pixels is too small for area thresholds");
    std::vector<double> t;
    for (std::size_t i = 0; i < k; ++i) {
        const double frac = k == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
        const double v = std::round(lo * std::pow(hi / lo, frac));
        if (t.empty() || v > t.back()) t.push_back(v);
    }
    if (t.empty()) throw std::invalid_argument("auto_thresholds: no distinct thresholds");
    return t;
}

}  // namespace strata
