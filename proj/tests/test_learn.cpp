#include <gtest/gtest.h>

#include <random>
#include <set>

#include "strata/learn.hpp"

using namespace strata;

TEST(Metrics, ReferenceMatrices) {
    const auto perfect = metrics(ConfusionMatrix(2, {50, 0, 0, 50}));
    EXPECT_EQ(perfect.oa, 1.0);
    EXPECT_EQ(perfect.aa, 1.0);
    EXPECT_EQ(perfect.kappa, 1.0);

    const auto chance = metrics(ConfusionMatrix(2, {25, 25, 25, 25}));
    EXPECT_EQ(chance.oa, 0.5);
    EXPECT_EQ(chance.kappa, 0.0);

    // p_e = (50*60 + 50*40) / 100^2 = 0.5.
    const auto mixed = metrics(ConfusionMatrix(2, {40, 10, 20, 30}));
    EXPECT_EQ(mixed.oa, 0.70);
    EXPECT_EQ(mixed.aa, 0.70);
    EXPECT_EQ(mixed.kappa, 0.40);
}

TEST(Metrics, KappaProperties) {
    // Rank-1 (independent) matrix: row and column marginals multiply.
    EXPECT_NEAR(metrics(ConfusionMatrix(3, {2, 4, 6, 1, 2, 3, 3, 6, 9})).kappa, 0.0, 1e-15);
    EXPECT_LT(metrics(ConfusionMatrix(2, {9, 1, 0, 10})).kappa, 1.0);
    // A single class: p_e = 1.
    EXPECT_EQ(metrics(ConfusionMatrix(1, {5})).kappa, 1.0);
    EXPECT_THROW(metrics(ConfusionMatrix(2, {0, 0, 0, 0})), std::invalid_argument);
    // A class with no reference samples has no recall.
    EXPECT_THROW(metrics(ConfusionMatrix(2, {5, 0, 0, 0})), std::invalid_argument);
}

TEST(Metrics, PermutationInvariance) {
    const ConfusionMatrix cm(3, {10, 2, 3, 4, 20, 1, 0, 5, 30});
    // Swap classes 0 and 2 in rows and columns.
    const ConfusionMatrix swapped(3, {30, 5, 0, 1, 20, 4, 3, 2, 10});
    const auto a = metrics(cm), b = metrics(swapped);
    EXPECT_EQ(a.oa, b.oa);
    EXPECT_NEAR(a.aa, b.aa, 1e-15);
    EXPECT_NEAR(a.kappa, b.kappa, 1e-15);
}

TEST(MeanSd, SampleStandardDeviation) {
    const std::vector<double> v{1, 2, 3, 4};
    const auto m = mean_sd(v);
    EXPECT_EQ(m.mean, 2.5);
    EXPECT_NEAR(m.sd, std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_EQ(mean_sd(std::vector<double>{7}).sd, 0.0);
}

TEST(Split, LargeUnevenClasses) {
    const std::size_t sizes[] = {10791, 23528, 85000};
    std::vector<int> labels(500, -1);
    for (int c = 0; c < 3; ++c) labels.insert(labels.end(), sizes[c], c);
    const auto split = sample_split(labels, 3, 100, 42);
    EXPECT_EQ(split.train.size(), 300u);
    EXPECT_EQ(split.test.size(), 119019u);
    std::set<std::size_t> train(split.train.begin(), split.train.end());
    for (auto i : split.test) ASSERT_FALSE(train.count(i));
    std::vector<int> per_class(3, 0);
    for (auto i : split.train) {
        ASSERT_GE(labels[i], 0);
        ++per_class[labels[i]];
    }
    EXPECT_EQ(per_class, (std::vector<int>{100, 100, 100}));
}

TEST(Split, EdgeCasesAndDeterminism) {
    const std::vector<int> labels{0, 0, 0, 1, 1, 1, 1};
    const auto s = sample_split(labels, 2, 2, 9);
    EXPECT_EQ(s.test.size(), 3u);
    EXPECT_EQ(sample_split(labels, 2, 2, 9).train, s.train);
    EXPECT_THROW(sample_split(labels, 2, 3, 9), std::invalid_argument);
    EXPECT_THROW(sample_split(labels, 2, 4, 9), std::invalid_argument);
    // Different seeds eventually draw different subsets.
    bool differs = false;
    for (std::uint64_t seed = 10; seed < 30 && !differs; ++seed) differs = sample_split(labels, 2, 2, seed).train != s.train;
    EXPECT_TRUE(differs);
}

TEST(Forest, SplitsAtMidpoint) {
    const auto data = LabeledPixels::from_rows({{1}, {2}, {3}, {10}, {11}, {12}}, {0, 0, 0, 1, 1, 1});
    ForestOptions opts;
    opts.trees = 1;
    opts.bootstrap = false;
    const auto model = train_forest(data, opts);
    const auto& root = model.trees[0].nodes[0];
    EXPECT_EQ(root.feature, 0);
    EXPECT_EQ(root.threshold, 6.5);
    EXPECT_EQ(model.trees[0].depth(), 1u);
}

TEST(Forest, LearnsXorWithoutBootstrap) {
    std::vector<std::vector<float>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i)
        for (int rep = 0; rep < 5; ++rep) {
            rows.push_back({static_cast<float>(i & 1), static_cast<float>(i >> 1)});
            labels.push_back((i & 1) ^ (i >> 1));
        }
    ForestOptions opts;
    opts.trees = 5;
    opts.mtry = 2;
    opts.bootstrap = false;
    const auto data = LabeledPixels::from_rows(rows, labels);
    EXPECT_EQ(predict(train_forest(data, opts), data), labels);
}

TEST(Forest, DeterministicAcrossThreadCounts) {
    std::mt19937 rng(4);
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<std::vector<float>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 300; ++i) {
        const int c = i % 3;
        rows.push_back({n(rng) + c, n(rng) - c, n(rng), n(rng) * c});
        labels.push_back(c);
    }
    const auto data = LabeledPixels::from_rows(rows, labels);
    ForestOptions a;
    a.trees = 12;
    a.seed = 77;
    a.threads = 1;
    ForestOptions b = a;
    b.threads = 4;
    const auto ma = train_forest(data, a), mb = train_forest(data, b);
    ASSERT_EQ(ma.trees.size(), mb.trees.size());
    for (std::size_t t = 0; t < ma.trees.size(); ++t) {
        ASSERT_EQ(ma.trees[t].nodes.size(), mb.trees[t].nodes.size());
        for (std::size_t i = 0; i < ma.trees[t].nodes.size(); ++i) {
            EXPECT_EQ(ma.trees[t].nodes[i].feature, mb.trees[t].nodes[i].feature);
            EXPECT_EQ(ma.trees[t].nodes[i].threshold, mb.trees[t].nodes[i].threshold);
        }
    }
    EXPECT_EQ(predict(ma, data), predict(mb, data));
    b.seed = 78;
    const auto mc = train_forest(data, b);
    bool differs = false;
    for (std::size_t t = 0; t < ma.trees.size() && !differs; ++t)
        differs = ma.trees[t].nodes.size() != mc.trees[t].nodes.size() ||
                  ma.trees[t].nodes[0].threshold != mc.trees[t].nodes[0].threshold;
    EXPECT_TRUE(differs);
}

TEST(Forest, VoteTiesGoToLowestClass) {
    // Identical features with both labels: every leaf is a 1:1 tie.
    const auto data = LabeledPixels::from_rows({{0}, {0}}, {1, 0});
    ForestOptions opts;
    opts.trees = 3;
    opts.bootstrap = false;
    EXPECT_EQ(predict(train_forest(data, opts), data), (std::vector<int>{0, 0}));
}

TEST(Evaluate, OneHotFeaturesArePerfect) {
    const std::size_t n = 600;
    FeatureStack features(20, 30, 3);
    std::vector<int> labels(n);
    for (std::size_t p = 0; p < n; ++p) {
        labels[p] = p % 7 == 0 ? -1 : static_cast<int>(p % 3);
        if (labels[p] >= 0) features.plane(static_cast<std::size_t>(labels[p]))[p] = 1.0f;
    }
    EvalProtocol protocol;
    protocol.per_class = 20;
    const auto report = evaluate(features, labels, {"a", "b", "c"}, protocol);
    EXPECT_EQ(report.confusions.size(), 25u);
    EXPECT_EQ(report.seeds.size(), 25u);
    EXPECT_EQ(report.aa.mean, 1.0);
    EXPECT_EQ(report.oa.mean, 1.0);
    EXPECT_EQ(report.kappa.mean, 1.0);
    EXPECT_EQ(report.aa.sd, 0.0);
    // Background pixels are in neither set.
    EXPECT_EQ(report.confusions[0].total() + 60, 600u - 86u);
}

TEST(Evaluate, Deterministic) {
    std::mt19937 rng(6);
    std::normal_distribution<float> n(0.0f, 1.0f);
    FeatureStack features(30, 30, 4);
    std::vector<int> labels(900);
    for (std::size_t p = 0; p < 900; ++p) {
        labels[p] = static_cast<int>(p % 3);
        for (std::size_t ch = 0; ch < 4; ++ch) features.plane(ch)[p] = n(rng) + 0.5f * labels[p] * (ch == 0);
    }
    EvalProtocol protocol;
    protocol.per_class = 30;
    protocol.repeats = 5;
    const auto a = evaluate(features, labels, {"a", "b", "c"}, protocol);
    const auto b = evaluate(features, labels, {"a", "b", "c"}, protocol);
    for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(a.confusions[r].counts, b.confusions[r].counts);
    EXPECT_EQ(a.aa.mean, b.aa.mean);
    EXPECT_GT(a.aa.sd, 0.0);
    EXPECT_THROW(evaluate(features, std::vector<int>(10, 0), {"a"}, protocol), std::invalid_argument);
}
