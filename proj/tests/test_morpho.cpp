#include <gtest/gtest.h>

#include <random>

#include "strata/morpho.hpp"

using namespace strata;

namespace {

QuantizedChannel random_image(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int levels) {
    std::uniform_int_distribution<int> u(0, levels - 1);
    QuantizedChannel q;
    q.rows = rows;
    q.cols = cols;
    q.levels.resize(rows * cols);
    for (auto& v : q.levels) v = static_cast<std::uint8_t>(u(rng));
    return q;
}

// Connected components of a binary mask by flood fill; returns a label per
// pixel (-1 outside the mask) and the component sizes.
std::pair<std::vector<int>, std::vector<std::size_t>> components(const std::vector<bool>& mask, std::size_t rows,
                                                                 std::size_t cols, int conn) {
    std::vector<int> label(mask.size(), -1);
    std::vector<std::size_t> sizes;
    for (std::size_t s = 0; s < mask.size(); ++s) {
        if (!mask[s] || label[s] >= 0) continue;
        const int id = static_cast<int>(sizes.size());
        sizes.push_back(0);
        std::vector<std::size_t> stack{s};
        label[s] = id;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++sizes.back();
            const auto r = static_cast<long>(p / cols), c = static_cast<long>(p % cols);
            for (long dr = -1; dr <= 1; ++dr)
                for (long dc = -1; dc <= 1; ++dc) {
                    if ((dr == 0 && dc == 0) || (conn == 4 && dr != 0 && dc != 0)) continue;
                    const long nr = r + dr, nc = c + dc;
                    if (nr < 0 || nc < 0 || nr >= static_cast<long>(rows) || nc >= static_cast<long>(cols)) continue;
                    const auto q = static_cast<std::size_t>(nr) * cols + static_cast<std::size_t>(nc);
                    if (mask[q] && label[q] < 0) {
                        label[q] = id;
                        stack.push_back(q);
                    }
                }
        }
    }
    return {label, sizes};
}

// Area opening by threshold decomposition: a pixel keeps the highest
// level t at which its component of {f >= t} has at least `lambda` pixels.
std::vector<std::uint8_t> brute_area_opening(const QuantizedChannel& img, double lambda, int conn) {
    std::vector<std::uint8_t> out(img.levels.size(), 0);
    const int lo = *std::min_element(img.levels.begin(), img.levels.end());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = static_cast<std::uint8_t>(lo);
    for (int t = lo + 1; t < kGrayLevels; ++t) {
        std::vector<bool> mask(img.levels.size());
        for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = img.levels[p] >= t;
        const auto [label, sizes] = components(mask, img.rows, img.cols, conn);
        for (std::size_t p = 0; p < out.size(); ++p)
            if (label[p] >= 0 && static_cast<double>(sizes[static_cast<std::size_t>(label[p])]) >= lambda)
                out[p] = static_cast<std::uint8_t>(t);
    }
    return out;
}

QuantizedChannel negate(const QuantizedChannel& img) {
    QuantizedChannel out = img;
    for (auto& v : out.levels) v = static_cast<std::uint8_t>(255 - v);
    return out;
}

ApConfig area_config(std::vector<double> thresholds, Connectivity conn = Connectivity::Four) {
    ApConfig cfg;
    cfg.thresholds = std::move(thresholds);
    cfg.connectivity = conn;
    return cfg;
}

}  // namespace

TEST(AreaFilter, MatchesLevelSetReconstruction) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const auto img = random_image(rng, 8, 8, 8);
        for (const auto conn : {Connectivity::Four, Connectivity::Eight}) {
            const int c = static_cast<int>(conn);
            for (int lambda = 1; lambda <= 10; ++lambda) {
                const auto cfg = area_config({static_cast<double>(lambda)}, conn);
                ASSERT_EQ(attribute_thinning(img, lambda, cfg), brute_area_opening(img, lambda, c))
                    << "trial " << trial << " lambda " << lambda << " conn " << c;
                auto closing = brute_area_opening(negate(img), lambda, c);
                for (auto& v : closing) v = static_cast<std::uint8_t>(255 - v);
                ASSERT_EQ(attribute_thickening(img, lambda, cfg), closing);
            }
        }
    }
}

TEST(AreaFilter, AlgebraicProperties) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 100; ++trial) {
        const auto img = random_image(rng, 8, 8, trial % 2 ? 8 : 256);
        std::vector<std::uint8_t> previous = img.levels;
        for (int lambda = 1; lambda <= 10; ++lambda) {
            const auto cfg = area_config({static_cast<double>(lambda)});
            const auto thin = attribute_thinning(img, lambda, cfg);
            const auto thick = attribute_thickening(img, lambda, cfg);
            QuantizedChannel thin_img = img, thick_img = img;
            thin_img.levels = thin;
            thick_img.levels = thick;
            EXPECT_EQ(attribute_thinning(thin_img, lambda, cfg), thin);     // idempotent
            EXPECT_EQ(attribute_thickening(thick_img, lambda, cfg), thick);
            const auto dual = attribute_thinning(negate(img), lambda, cfg);
            for (std::size_t p = 0; p < thin.size(); ++p) {
                EXPECT_LE(thin[p], img.levels[p]);  // anti-extensive
                EXPECT_GE(thick[p], img.levels[p]);  // extensive
                EXPECT_LE(thin[p], previous[p]);     // larger lambda removes more
                EXPECT_EQ(thick[p], 255 - dual[p]);  // duality
            }
            previous = thin;
        }
    }
}

TEST(ComponentTree, NodeAreasMatchFloodFill) {
    std::mt19937_64 rng(23);
    const auto img = random_image(rng, 8, 8, 5);
    const auto tree = build_tree(img, Polarity::MaxTree);
    EXPECT_EQ(tree.parent[0], 0u);
    EXPECT_EQ(tree.stats[0].area, 64.0);
    for (std::size_t id = 1; id < tree.size(); ++id) EXPECT_LT(tree.parent[id], id);
    for (std::size_t p = 0; p < 64; ++p) {
        const auto id = tree.node_of[p];
        EXPECT_EQ(tree.level[id], img.levels[p]);
        std::vector<bool> mask(64);
        for (std::size_t q = 0; q < 64; ++q) mask[q] = img.levels[q] >= img.levels[p];
        const auto [label, sizes] = components(mask, 8, 8, 4);
        EXPECT_EQ(tree.stats[id].area, static_cast<double>(sizes[static_cast<std::size_t>(label[p])]));
    }
    std::uint64_t owned = 0;
    for (auto n : tree.exclusive_counts()) owned += n;
    EXPECT_EQ(owned, 64u);
}

TEST(NodeStats, StdDevAndMoment) {
    NodeStats s;
    // 2x2 square at levels 1, 2, 3, 4.
    const double xs[] = {0, 1, 0, 1}, ys[] = {0, 0, 1, 1}, vs[] = {1, 2, 3, 4};
    for (int i = 0; i < 4; ++i) {
        s.area += 1;
        s.sum += vs[i];
        s.sum_sq += vs[i] * vs[i];
        s.sx += xs[i];
        s.sy += ys[i];
        s.sxx += xs[i] * xs[i];
        s.syy += ys[i] * ys[i];
    }
    EXPECT_NEAR(s.stddev(), std::sqrt(1.25), 1e-12);
    // (mu20 + mu02) / area^2 = (1 + 1) / 16.
    EXPECT_NEAR(s.moment_of_inertia(), 0.125, 1e-12);
    EXPECT_EQ(s.value(AttributeKind::Area), 4.0);
}

TEST(FilterRules, AgreeForIncreasingAttribute) {
    std::mt19937_64 rng(24);
    const auto img = random_image(rng, 16, 16, 16);
    const auto tree = build_tree(img, Polarity::MaxTree);
    for (double t : {2.0, 5.0, 20.0})
        EXPECT_EQ(filter_tree(tree, AttributeKind::Area, t, FilterRule::Min),
                  filter_tree(tree, AttributeKind::Area, t, FilterRule::Direct));
}

TEST(FilterRules, MinRuleRemovesDescendantsOfRemovedNodes) {
    // Level-1 component {1 x6, 2, 5}: population sd ~1.317. Its child at
    // level 2, {2, 5}, has sd 1.5. A threshold between the two keeps the
    // child only under the direct rule.
    QuantizedChannel img{1, 10, {0, 1, 1, 1, 1, 1, 1, 2, 5, 0}, 0.0, 1.0};
    const auto tree = build_tree(img, Polarity::MaxTree);
    const auto direct = filter_tree(tree, AttributeKind::StdDev, 1.4, FilterRule::Direct);
    const auto min = filter_tree(tree, AttributeKind::StdDev, 1.4, FilterRule::Min);
    EXPECT_EQ(direct, (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 2, 2, 0}));
    EXPECT_EQ(min, std::vector<std::uint8_t>(10, 0));
}

TEST(AttributeProfile, LengthAndOrdering) {
    std::mt19937_64 rng(25);
    const auto img = random_image(rng, 12, 12, 20);
    for (const std::size_t k : {1u, 4u, 20u}) {
        std::vector<double> t;
        for (std::size_t i = 0; i < k; ++i) t.push_back(static_cast<double>(i + 2));
        const auto cfg = area_config(t);
        const auto profile = attribute_profile_levels(img, cfg);
        ASSERT_EQ(profile.size(), 2 * k + 1);
        EXPECT_EQ(profile[k], img.levels);
        for (std::size_t i = 0; i + 1 < profile.size(); ++i)
            for (std::size_t p = 0; p < img.levels.size(); ++p) EXPECT_GE(profile[i][p], profile[i + 1][p]);
    }
}

TEST(Quantize, RangeMappingAndErrors) {
    const std::vector<float> v{-1.0f, 0.0f, 3.0f};
    const auto q = quantize(std::span<const float>(v), 1, 3);
    EXPECT_EQ(q.levels, (std::vector<std::uint8_t>{0, 64, 255}));
    EXPECT_NEAR(dequantize(255, q), 3.0, 1e-12);
    EXPECT_NEAR(dequantize(0, q), -1.0, 1e-12);
    const std::vector<float> flat(4, 2.0f);
    const auto qf = quantize(std::span<const float>(flat), 2, 2);
    EXPECT_EQ(qf.levels, std::vector<std::uint8_t>(4, 0));
    EXPECT_EQ(dequantize(0, qf), 2.0);
    const std::vector<float> bad{0.0f, std::nanf("")};
    EXPECT_THROW(quantize(std::span<const float>(bad), 1, 2), std::invalid_argument);
}

TEST(Emap, ChannelCountAndNames) {
    std::mt19937_64 rng(26);
    FeatureStack base(10, 10, 2, {}, {"pc1", "pc2"});
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& v : base.data()) v = u(rng);
    const std::vector<ApConfig> cfgs{area_config({4, 16}), ApConfig{AttributeKind::StdDev, {5}, Connectivity::Four, FilterRule::Min}};
    const auto out = emap(base, cfgs);
    EXPECT_EQ(out.channels(), 2u * (5 + 3));
    EXPECT_EQ(out.names()[0], "pc1:area:thick16");
    EXPECT_EQ(out.names()[2], "pc1");
    EXPECT_EQ(out.names()[4], "pc1:area:thin16");
    EXPECT_EQ(out.names()[8], "pc2:area:thick16");
    // The identity plane reproduces the channel up to quantization.
    for (std::size_t p = 0; p < 100; ++p) EXPECT_NEAR(out.plane(2)[p], base.plane(0)[p], 1.0 / 255 + 1e-6);
    EXPECT_THROW(emap(base, {}), std::invalid_argument);
}

TEST(AutoThresholds, Schedules) {
    const auto area = auto_thresholds(AttributeKind::Area, 20, 40000);
    EXPECT_EQ(area.size(), 20u);
    EXPECT_EQ(area.front(), 40.0);
    EXPECT_EQ(area.back(), 8000.0);
    for (std::size_t i = 1; i < area.size(); ++i) EXPECT_GT(area[i], area[i - 1]);
    const auto sd = auto_thresholds(AttributeKind::StdDev, 4, 100);
    ASSERT_EQ(sd.size(), 4u);
    EXPECT_NEAR(sd[1], 2.5 + 47.5 / 3, 1e-12);
    EXPECT_EQ(sd.front(), 2.5);
    EXPECT_EQ(sd.back(), 50.0);
    EXPECT_EQ(auto_thresholds(AttributeKind::Moment, 1, 100), (std::vector<double>{0.2}));
    EXPECT_THROW(auto_thresholds(AttributeKind::Area, 0, 100), std::invalid_argument);
}

TEST(ApConfig, Validation) {
    EXPECT_THROW(area_config({}).validate(), std::invalid_argument);
    EXPECT_THROW(area_config({3, 3}).validate(), std::invalid_argument);
    EXPECT_THROW(area_config({-1}).validate(), std::invalid_argument);
    EXPECT_EQ(area_config({1, 2, 3, 4}).profile_length(), 9u);
}
