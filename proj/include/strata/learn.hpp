#pragma once

// Random-forest classification and the hold-out evaluation protocol:
// a fixed number of random training pixels per class, the rest for
// testing, repeated with different seeds and summarized as mean and
// sample standard deviation of OA, AA and Cohen's kappa.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/common.hpp"
#include "strata/cube.hpp"

namespace strata {

/// Non-owning feature-major matrix: value(f, i) = data[f * samples + i].
/// A FeatureStack is exactly this layout with pixels as samples.
struct FeatureView {
    const float* data = nullptr;
    std::size_t samples = 0;
    std::size_t dims = 0;

    float value(std::size_t feature, std::size_t sample) const { return data[feature * samples + sample]; }
};

inline FeatureView view_of(const FeatureStack& stack) {
    return {stack.data().data(), stack.pixels(), stack.channels()};
}

/// Owned samples with class ids in [0, C).
struct LabeledPixels {
    std::size_t dims = 0;
    std::vector<float> features;  ///< feature-major, dims x N
    std::vector<int> labels;      ///< length N
    std::vector<std::string> class_names;

    std::size_t size() const { return labels.size(); }
    std::size_t classes() const { return class_names.size(); }
    FeatureView view() const { return {features.data(), labels.size(), dims}; }

    /// Builds from row-major samples (one vector per sample).
    static LabeledPixels from_rows(const std::vector<std::vector<float>>& rows, std::vector<int> labels,
                                   std::vector<std::string> class_names = {}) {
        if (rows.size() != labels.size()) throw std::invalid_argument("feature rows and labels differ in count");
        LabeledPixels out;
        out.dims = rows.empty() ? 0 : rows.front().size();
        out.features.resize(out.dims * rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != out.dims) throw std::invalid_argument("ragged feature rows");
            for (std::size_t f = 0; f < out.dims; ++f) out.features[f * rows.size() + i] = rows[i][f];
        }
        int max_label = -1;
        for (int l : labels) {
            if (l < 0) throw std::invalid_argument("class ids must be non-negative");
            max_label = std::max(max_label, l);
        }
        if (class_names.empty())
            for (int c = 0; c <= max_label; ++c) class_names.push_back("class" + std::to_string(c));
        if (max_label >= static_cast<int>(class_names.size()))
            throw std::invalid_argument("class id exceeds class-name count");
        out.labels = std::move(labels);
        out.class_names = std::move(class_names);
        return out;
    }
};

struct ForestOptions {
    std::size_t trees = 10;
    std::uint64_t seed = 0;
    std::optional<std::size_t> mtry;  ///< default floor(sqrt(d)), at least 1
    bool bootstrap = true;            ///< false: every tree sees the full training set
    unsigned threads = 0;             ///< 0 = hardware concurrency
};

/// Binary decision tree stored as a flat node array; node 0 is the root.
struct DecisionTree {
    struct Node {
        std::int32_t feature = -1;  ///< -1 for leaves
        double threshold = 0.0;     ///< x <= threshold goes left
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        std::uint32_t distribution = 0;  ///< leaves: offset into `counts`
    };
    std::vector<Node> nodes;
    std::vector<std::uint32_t> counts;  ///< per leaf, C class counts
    std::size_t classes = 0;

    std::size_t depth() const {
        std::size_t best = 0;
        std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [id, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            if (nodes[id].feature >= 0) {
                stack.push_back({nodes[id].left, d + 1});
                stack.push_back({nodes[id].right, d + 1});
            }
        }
        return best;
    }

    std::span<const std::uint32_t> leaf_distribution(const FeatureView& x, std::size_t sample) const {
        std::uint32_t id = 0;
        while (nodes[id].feature >= 0) {
            const auto& n = nodes[id];
            id = static_cast<double>(x.value(static_cast<std::size_t>(n.feature), sample)) <= n.threshold
                     ? n.left
                     : n.right;
        }
        return {counts.data() + nodes[id].distribution, classes};
    }

    /// Majority class of the reached leaf; ties go to the lowest class id.
    int predict(const FeatureView& x, std::size_t sample) const {
        const auto dist = leaf_distribution(x, sample);
        return static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    }
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    std::size_t dims = 0;
    std::size_t classes = 0;
    std::size_t mtry = 1;
    std::uint64_t seed = 0;
};

namespace forest_detail {

using u128 = unsigned __int128;

/// Gini split quality as an exact fraction: maximizing
/// sum_c L_c^2 / n_L + sum_c R_c^2 / n_R minimizes weighted Gini impurity.
struct SplitScore {
    u128 numerator = 0;
    u128 denominator = 1;

    bool better_than(const SplitScore& o) const { return numerator * o.denominator > o.numerator * denominator; }
    bool ties(const SplitScore& o) const { return numerator * o.denominator == o.numerator * denominator; }
};

struct Candidate {
    bool valid = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    SplitScore score;
};

class TreeBuilder {
public:
    TreeBuilder(const FeatureView& x, std::span<const int> labels, std::size_t classes, std::size_t mtry,
                std::uint64_t seed)
        : x_(x), labels_(labels), classes_(classes), mtry_(mtry), rng_(seed) {}

    DecisionTree build(std::vector<std::uint32_t> samples) {
        DecisionTree tree;
        tree.classes = classes_;
        tree.nodes.emplace_back();
        struct Task {
            std::uint32_t node;
            std::size_t begin, end;
        };
        samples_ = std::move(samples);
        std::vector<Task> stack{{0, 0, samples_.size()}};
        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            const std::span<std::uint32_t> range(samples_.data() + task.begin, task.end - task.begin);
            std::vector<std::uint32_t> counts(classes_, 0);
            for (auto s : range) ++counts[static_cast<std::size_t>(labels_[s])];
            const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
            Candidate split;
            if (!pure) split = best_split(range, counts);
            if (!split.valid) {
                tree.nodes[task.node].distribution = static_cast<std::uint32_t>(tree.counts.size());
                tree.counts.insert(tree.counts.end(), counts.begin(), counts.end());
                continue;
            }
            const auto mid = std::stable_partition(range.begin(), range.end(), [&](std::uint32_t s) {
                return static_cast<double>(x_.value(split.feature, s)) <= split.threshold;
            });
            const std::size_t cut = task.begin + static_cast<std::size_t>(mid - range.begin());
            const auto left = static_cast<std::uint32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[task.node];
            node.feature = static_cast<std::int32_t>(split.feature);
            node.threshold = split.threshold;
            node.left = left;
            node.right = left + 1;
            stack.push_back({left + 1, cut, task.end});
            stack.push_back({left, task.begin, cut});
        }
        return tree;
    }

private:
    /// Samples features without replacement; if none of the first mtry
    /// admits a split, keeps drawing until one does or all are exhausted.
    Candidate best_split(std::span<const std::uint32_t> range, const std::vector<std::uint32_t>& totals) {
        std::vector<std::size_t> features(x_.dims);
        std::iota(features.begin(), features.end(), 0);
        Candidate best;
        for (std::size_t drawn = 0; drawn < features.size(); ++drawn) {
            if (drawn >= mtry_ && best.valid) break;
            std::uniform_int_distribution<std::size_t> pick(drawn, features.size() - 1);
            std::swap(features[drawn], features[pick(rng_)]);
            evaluate_feature(features[drawn], range, totals, best);
        }
        return best;
    }

    void evaluate_feature(std::size_t f, std::span<const std::uint32_t> range,
                          const std::vector<std::uint32_t>& totals, Candidate& best) {
        order_.clear();
        for (auto s : range) order_.push_back({x_.value(f, s), labels_[s]});
        std::sort(order_.begin(), order_.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first || (a.first == b.first && a.second < b.second); });
        if (!(order_.front().first < order_.back().first)) return;
        left_.assign(classes_, 0);
        const std::size_t n = order_.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            ++left_[static_cast<std::size_t>(order_[i].second)];
            if (!(order_[i].first < order_[i + 1].first)) continue;
            const u128 nl = i + 1, nr = n - i - 1;
            u128 sl = 0, sr = 0;
            for (std::size_t c = 0; c < classes_; ++c) {
                const u128 l = left_[c], r = totals[c] - left_[c];
                sl += l * l;
                sr += r * r;
            }
            const SplitScore score{sl * nr + sr * nl, nl * nr};
            const double threshold =
                0.5 * (static_cast<double>(order_[i].first) + static_cast<double>(order_[i + 1].first));
            const bool take = !best.valid || score.better_than(best.score) ||
                              (score.ties(best.score) &&
                               (f < best.feature || (f == best.feature && threshold < best.threshold)));
            if (take) best = {true, f, threshold, score};
        }
    }

    FeatureView x_;
    std::span<const int> labels_;
    std::size_t classes_;
    std::size_t mtry_;
    std::mt19937_64 rng_;
    std::vector<std::uint32_t> samples_;
    std::vector<std::pair<float, int>> order_;
    std::vector<std::uint32_t> left_;
};

}  // namespace forest_detail

/// Trains on the samples listed in `rows` (indices into x / labels).
/// Tree t uses an RNG stream seeded from (options.seed, t), so the model is
/// identical for any thread count.
inline ForestModel train_forest(const FeatureView& x, std::span<const int> labels, std::span<const std::size_t> rows,
                                std::size_t classes, const ForestOptions& options) {
    if (rows.size() < 2) throw std::invalid_argument("train_forest needs at least 2 samples");
    if (options.trees == 0) throw std::invalid_argument("train_forest needs at least one tree");
    if (x.dims == 0) throw std::invalid_argument("train_forest needs at least one feature");
    std::vector<std::uint32_t> present(classes, 0);
    for (auto r : rows) {
        const int l = labels[r];
        if (l < 0 || static_cast<std::size_t>(l) >= classes) throw std::invalid_argument("training label out of range");
        present[static_cast<std::size_t>(l)] = 1;
    }
    if (std::accumulate(present.begin(), present.end(), 0u) < 2)
        throw std::invalid_argument("train_forest needs at least two classes");

    ForestModel model;
    model.dims = x.dims;
    model.classes = classes;
    model.seed = options.seed;
    model.mtry = options.mtry.value_or(
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.dims))))));
    if (model.mtry < 1 || model.mtry > x.dims) throw std::invalid_argument("mtry must lie in [1, d]");
    model.trees.resize(options.trees);

    parallel_for(
        options.trees,
        [&](std::size_t t) {
            const std::uint64_t tree_seed = mix_seed(options.seed, t);
            std::mt19937_64 rng(tree_seed);
            std::vector<std::uint32_t> sample(rows.size());
            if (options.bootstrap) {
                std::uniform_int_distribution<std::size_t> draw(0, rows.size() - 1);
                for (auto& s : sample) s = static_cast<std::uint32_t>(rows[draw(rng)]);
            } else {
                for (std::size_t i = 0; i < rows.size(); ++i) sample[i] = static_cast<std::uint32_t>(rows[i]);
            }
            forest_detail::TreeBuilder builder(x, labels, classes, model.mtry, rng());
            model.trees[t] = builder.build(std::move(sample));
        },
        options.threads);
    return model;
}

inline ForestModel train_forest(const LabeledPixels& data, const ForestOptions& options) {
    if (data.size() == 0) throw std::invalid_argument("train_forest: empty data");
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), 0);
    return train_forest(data.view(), data.labels, rows, data.classes(), options);
}

/// Majority vote over trees; ties go to the lowest class id.
inline int predict_one(const ForestModel& model, const FeatureView& x, std::size_t sample) {
    std::vector<std::uint32_t> votes(model.classes, 0);
    for (const auto& tree : model.trees) ++votes[static_cast<std::size_t>(tree.predict(x, sample))];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

inline std::vector<int> predict(const ForestModel& model, const FeatureView& x, std::span<const std::size_t> rows,
                                unsigned threads = 0) {
    if (x.dims != model.dims)
        throw std::invalid_argument("predict: model expects " + std::to_string(model.dims) + " features, got " +
                                    std::to_string(x.dims));
    std::vector<int> out(rows.size());
    constexpr std::size_t kChunk = 512;
    parallel_for(
        (rows.size() + kChunk - 1) / kChunk,
        [&](std::size_t chunk) {
            for (std::size_t i = chunk * kChunk; i < std::min(rows.size(), (chunk + 1) * kChunk); ++i)
                out[i] = predict_one(model, x, rows[i]);
        },
        threads);
    return out;
}

inline std::vector<int> predict(const ForestModel& model, const LabeledPixels& data) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), 0);
    return predict(model, data.view(), rows);
}

struct SplitIndices {
    std::vector<std::size_t> train;  ///< ascending
    std::vector<std::size_t> test;   ///< ascending
};

/// Draws `per_class` training samples per class uniformly without
/// replacement; all other labeled samples form the test set. Labels < 0
/// are unlabeled and belong to neither set.
inline SplitIndices sample_split(std::span<const int> labels, std::size_t classes, std::size_t per_class,
                                 std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        if (static_cast<std::size_t>(labels[i]) >= classes) throw std::invalid_argument("label out of range");
        members[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    SplitIndices split;
    for (std::size_t c = 0; c < classes; ++c) {
        auto& m = members[c];
        if (m.size() <= per_class)
            throw std::invalid_argument("class " + std::to_string(c) + " has " + std::to_string(m.size()) +
                                        " samples; needs more than " + std::to_string(per_class));
        std::mt19937_64 rng(mix_seed(seed, c));
        // Partial Fisher-Yates: the first per_class entries become the draw.
        for (std::size_t i = 0; i < per_class; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, m.size() - 1);
            std::swap(m[i], m[pick(rng)]);
        }
        split.train.insert(split.train.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(per_class));
        split.test.insert(split.test.end(), m.begin() + static_cast<std::ptrdiff_t>(per_class), m.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::uint64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t c) : classes(c), counts(c * c, 0) {}
    ConfusionMatrix(std::size_t c, std::vector<std::uint64_t> values) : classes(c), counts(std::move(values)) {
        if (counts.size() != c * c) throw std::invalid_argument("confusion matrix must be C x C");
    }

    std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts[truth * classes + predicted]; }
    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * classes + predicted]; }
    std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
};

inline ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
    if (truth.size() != predicted.size()) throw std::invalid_argument("confusion: length mismatch");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i)
        ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
    return cm;
}

struct Scores {
    double oa = 0.0;
    double aa = 0.0;
    double kappa = 0.0;
};

/// OA = trace / total; AA = mean per-class recall;
/// kappa = (p_o - p_e) / (1 - p_e), p_e = sum_c row_c col_c / total^2,
/// evaluated as (N trace - sum row col) / (N^2 - sum row col) in integers
/// so that only the final division rounds.
/// When p_e = 1 (a single class on both sides) kappa is 1 for perfect
/// agreement and 0 otherwise.
inline Scores metrics(const ConfusionMatrix& cm) {
    if (cm.classes == 0 || cm.total() == 0) throw std::invalid_argument("metrics: empty confusion matrix");
    using Wide = unsigned __int128;
    const std::uint64_t total = cm.total();
    std::uint64_t trace = 0;
    Wide chance = 0;
    double recall_sum = 0.0;
    for (std::size_t c = 0; c < cm.classes; ++c) {
        std::uint64_t row = 0, col = 0;
        for (std::size_t k = 0; k < cm.classes; ++k) {
            row += cm.at(c, k);
            col += cm.at(k, c);
        }
        if (row == 0) throw std::invalid_argument("metrics: class " + std::to_string(c) + " has no samples");
        trace += cm.at(c, c);
        recall_sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
        chance += static_cast<Wide>(row) * col;
    }
    Scores s;
    s.oa = static_cast<double>(trace) / static_cast<double>(total);
    s.aa = recall_sum / static_cast<double>(cm.classes);
    const Wide n2 = static_cast<Wide>(total) * total;
    if (chance >= n2) {
        s.kappa = trace == total ? 1.0 : 0.0;
    } else {
        const Wide agree = static_cast<Wide>(total) * trace;
        const double num = agree >= chance ? static_cast<double>(agree - chance)
                                           : -static_cast<double>(chance - agree);
        s.kappa = num / static_cast<double>(n2 - chance);
    }
    return s;
}

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  ///< sample standard deviation (n - 1); 0 for n = 1
};

inline MeanSd mean_sd(std::span<const double> values) {
    MeanSd out;
    if (values.empty()) return out;
    const auto n = static_cast<double>(values.size());
    out.mean = compensated_mean(values);
    if (values.size() > 1) {
        CompensatedSum acc;
        for (double v : values) acc.add((v - out.mean) * (v - out.mean));
        out.sd = std::sqrt(acc.value() / (n - 1.0));
    }
    return out;
}

struct EvalProtocol {
    std::size_t per_class = 100;
    std::size_t repeats = 25;
    std::size_t trees = 10;
    std::uint64_t seed = 1;
    std::optional<std::size_t> mtry;
    bool bootstrap = true;
};

struct EvalReport {
    std::string feature;
    std::string chain;  ///< description of the stages that produced the features
    std::vector<std::string> class_names;
    std::size_t feature_dims = 0;
    std::vector<ConfusionMatrix> confusions;  ///< one per repeat
    std::vector<std::uint64_t> seeds;         ///< split seed per repeat
    std::vector<Scores> per_repeat;
    MeanSd aa, oa, kappa;
};

/// Seeds used by evaluate() for repeat r.
inline std::uint64_t split_seed(std::uint64_t seed, std::size_t repeat) { return seed + repeat; }
inline std::uint64_t forest_seed(std::uint64_t seed, std::size_t repeat) {
    return mix_seed(split_seed(seed, repeat), 0x5eed);
}

/// Runs the repeated hold-out protocol. `labels` has one entry per pixel:
/// class id in [0, C) or -1 for background (excluded).
inline EvalReport evaluate(const FeatureStack& features, std::span<const int> labels,
                           const std::vector<std::string>& class_names, const EvalProtocol& protocol) {
    if (labels.size() != features.pixels()) throw std::invalid_argument("evaluate: label map does not match features");
    if (protocol.repeats == 0) throw std::invalid_argument("evaluate: repeats must be >= 1");
    const std::size_t classes = class_names.size();
    const FeatureView x = view_of(features);

    EvalReport report;
    report.class_names = class_names;
    report.feature_dims = features.channels();
    report.confusions.resize(protocol.repeats);
    report.per_repeat.resize(protocol.repeats);
    for (std::size_t r = 0; r < protocol.repeats; ++r) report.seeds.push_back(split_seed(protocol.seed, r));

    parallel_for(protocol.repeats, [&](std::size_t r) {
        const auto split = sample_split(labels, classes, protocol.per_class, split_seed(protocol.seed, r));
        ForestOptions opts;
        opts.trees = protocol.trees;
        opts.seed = forest_seed(protocol.seed, r);
        opts.mtry = protocol.mtry;
        opts.bootstrap = protocol.bootstrap;
        opts.threads = 1;
        const auto model = train_forest(x, labels, split.train, classes, opts);
        const auto predicted = predict(model, x, split.test, 1);
        std::vector<int> truth(split.test.size());
        for (std::size_t i = 0; i < split.test.size(); ++i) truth[i] = labels[split.test[i]];
        report.confusions[r] = confusion(truth, predicted, classes);
        report.per_repeat[r] = metrics(report.confusions[r]);
    });

    std::vector<double> aa, oa, kappa;
    for (const auto& s : report.per_repeat) {
        aa.push_back(s.aa);
        oa.push_back(s.oa);
        kappa.push_back(s.kappa);
    }
    report.aa = mean_sd(aa);
    report.oa = mean_sd(oa);
    report.kappa = mean_sd(kappa);
    return report;
}

}  // namespace strata
