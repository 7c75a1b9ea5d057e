#pragma once

// End-to-end experiment: load (or synthesize) the two focus captures, the
// white reference and the ground truth, derive each requested feature
// variant and evaluate it with the repeated random-forest protocol.
//
// Variant chains (HSI = focus-stacked, sensitivity-normalized cube):
//   SimRGB          rgb(HSI)
//   SimRGB-IC       rgb(IC(HSI))
//   SimRGB-IC-SI    rgb(IC(HSI)) + S + I of the RGB pixel
//   SimRGB-IC-EMAP  EMAP(rgb(IC(HSI)))
//   HSI             HSI
//   HSI-IC          IC(HSI)
//   HSI-DR          PCA(IC(HSI))
//   HSI-h           hue(IC(HSI))
//   HSIhSI          IC(HSI) + hue + S + I
//   HSIhSI-DR       PCA(HSIhSI)
//   HSI-EMAP        EMAP(PCA(IC(HSI)))
//   HSIhSI-EMAP     EMAP(PCA(HSIhSI))

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/chromatic.hpp"
#include "strata/cube.hpp"
#include "strata/dimred.hpp"
#include "strata/envi.hpp"
#include "strata/label_io.hpp"
#include "strata/learn.hpp"
#include "strata/morpho.hpp"
#include "strata/phantom.hpp"
#include "strata/preprocess.hpp"
#include "strata/serialization.hpp"

namespace strata {

inline const std::vector<std::string>& all_variants() {
    static const std::vector<std::string> names{
        "SimRGB", "SimRGB-IC", "SimRGB-IC-SI", "SimRGB-IC-EMAP", "HSI",       "HSI-IC",
        "HSI-DR", "HSI-h",     "HSIhSI",       "HSIhSI-DR",      "HSI-EMAP",  "HSIhSI-EMAP"};
    return names;
}

inline bool is_variant(const std::string& name) {
    const auto& v = all_variants();
    return std::find(v.begin(), v.end(), name) != v.end();
}

inline void log_line(const std::string& msg) { std::clog << "[strata] " << msg << std::endl; }

struct InputPaths {
    std::string h1, h2, white, ground_truth;
};

struct EmapSettings {
    AttributeKind attribute = AttributeKind::Area;
    std::size_t k = 20;
    Connectivity connectivity = Connectivity::Four;
    FilterRule rule = FilterRule::Min;
    std::vector<double> thresholds;  ///< empty: auto_thresholds(attribute, k, image area)

    ApConfig resolve(std::size_t image_area) const {
        ApConfig cfg;
        cfg.attribute = attribute;
        cfg.connectivity = connectivity;
        cfg.rule = rule;
        cfg.thresholds = thresholds.empty() ? auto_thresholds(attribute, k, image_area) : thresholds;
        cfg.validate();
        return cfg;
    }
};

struct ExperimentConfig {
    std::optional<PhantomSpec> phantom;
    std::optional<InputPaths> inputs;
    std::vector<std::string> class_names;  ///< overrides the data source's names
    std::optional<PixelRect> white_region;
    std::size_t split_band = kDefaultSplitBand;
    bool auto_split = false;
    double illumination_sigma_fraction = 0.02;
    double pca_target = 0.999;
    double achromatic_epsilon = kAchromaticEpsilon;
    EmapSettings emap;
    std::vector<std::string> variants;
    EvalProtocol protocol;
    bool focus_ablation = false;
    std::string output_dir = "results";
    std::string cache_dir;  ///< empty: no feature cache
    bool label_maps = true;

    void validate() const {
        if (!phantom && !inputs) throw std::invalid_argument("config needs either 'phantom' or 'inputs'");
        if (variants.empty() && !focus_ablation) throw std::invalid_argument("config lists no feature variants");
        for (const auto& v : variants)
            if (!is_variant(v)) throw std::invalid_argument("unknown feature variant '" + v + "'");
        if (!(pca_target > 0.0 && pca_target <= 1.0)) throw std::invalid_argument("pca_target must lie in (0, 1]");
        if (inputs) {
            for (const auto* p : {&inputs->h1, &inputs->h2, &inputs->white, &inputs->ground_truth})
                if (!std::filesystem::exists(*p)) throw std::invalid_argument("input path does not exist: " + *p);
        }
    }
};

inline Json to_json(const ExperimentConfig& c) {
    Json j;
    if (c.phantom) j["phantom"] = to_json(*c.phantom);
    if (c.inputs)
        j["inputs"] = {{"h1", c.inputs->h1},
                       {"h2", c.inputs->h2},
                       {"white", c.inputs->white},
                       {"ground_truth", c.inputs->ground_truth}};
    if (!c.class_names.empty()) j["class_names"] = c.class_names;
    if (c.white_region)
        j["white_region"] = {c.white_region->row, c.white_region->col, c.white_region->rows, c.white_region->cols};
    j["split_band"] = c.split_band;
    j["auto_split"] = c.auto_split;
    j["illumination_sigma_fraction"] = c.illumination_sigma_fraction;
    j["pca_target"] = c.pca_target;
    j["achromatic_epsilon"] = c.achromatic_epsilon;
    j["emap"] = {{"attribute", to_string(c.emap.attribute)},
                 {"k", c.emap.k},
                 {"connectivity", static_cast<int>(c.emap.connectivity)},
                 {"rule", to_string(c.emap.rule)},
                 {"thresholds", c.emap.thresholds}};
    j["variants"] = c.variants;
    j["protocol"] = {{"per_class", c.protocol.per_class},
                     {"repeats", c.protocol.repeats},
                     {"trees", c.protocol.trees},
                     {"seed", c.protocol.seed},
                     {"bootstrap", c.protocol.bootstrap}};
    if (c.protocol.mtry) j["protocol"]["mtry"] = *c.protocol.mtry;
    j["focus_ablation"] = c.focus_ablation;
    j["output_dir"] = c.output_dir;
    j["cache_dir"] = c.cache_dir;
    j["label_maps"] = c.label_maps;
    return j;
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
    ExperimentConfig c;
    if (j.contains("phantom")) c.phantom = phantom_spec_from_json(j.at("phantom"));
    if (j.contains("inputs")) {
        const auto& in = j.at("inputs");
        c.inputs = InputPaths{in.at("h1").get<std::string>(), in.at("h2").get<std::string>(),
                              in.at("white").get<std::string>(), in.at("ground_truth").get<std::string>()};
    }
    c.class_names = j.value("class_names", c.class_names);
    if (j.contains("white_region")) {
        const auto r = j.at("white_region").get<std::vector<std::size_t>>();
        if (r.size() != 4) throw std::invalid_argument("white_region must be [row, col, rows, cols]");
        c.white_region = PixelRect{r[0], r[1], r[2], r[3]};
    }
    c.split_band = j.value("split_band", c.split_band);
    c.auto_split = j.value("auto_split", c.auto_split);
    c.illumination_sigma_fraction = j.value("illumination_sigma_fraction", c.illumination_sigma_fraction);
    c.pca_target = j.value("pca_target", c.pca_target);
    c.achromatic_epsilon = j.value("achromatic_epsilon", c.achromatic_epsilon);
    if (j.contains("emap")) {
        const auto& e = j.at("emap");
        c.emap.attribute = attribute_from_string(e.value("attribute", std::string("area")));
        c.emap.k = e.value("k", c.emap.k);
        c.emap.connectivity = connectivity_from_int(e.value("connectivity", 4));
        c.emap.rule = rule_from_string(e.value("rule", std::string("min")));
        c.emap.thresholds = e.value("thresholds", std::vector<double>{});
    }
    c.variants = j.value("variants", c.variants);
    if (j.contains("protocol")) {
        const auto& p = j.at("protocol");
        c.protocol.per_class = p.value("per_class", c.protocol.per_class);
        c.protocol.repeats = p.value("repeats", c.protocol.repeats);
        c.protocol.trees = p.value("trees", c.protocol.trees);
        c.protocol.seed = p.value("seed", c.protocol.seed);
        c.protocol.bootstrap = p.value("bootstrap", c.protocol.bootstrap);
        if (p.contains("mtry")) c.protocol.mtry = p.at("mtry").get<std::size_t>();
    }
    c.focus_ablation = j.value("focus_ablation", c.focus_ablation);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.label_maps = j.value("label_maps", c.label_maps);
    return c;
}

/// Raw acquisitions and ground truth for one drawing.
struct SceneData {
    HsiCube h1, h2, white;
    LabelMap truth;  ///< codes: 0 background, 1..C classes
    std::vector<std::string> class_names;

    std::vector<int> class_ids() const {
        std::vector<int> ids(truth.codes.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(truth.codes[i]) - 1;
        return ids;
    }
};

inline SceneData scene_from_phantom(const PhantomSpec& spec) {
    auto ph = generate_phantom(spec);
    SceneData scene;
    scene.h1 = std::move(ph.h1);
    scene.h2 = std::move(ph.h2);
    scene.white = std::move(ph.white_ref);
    scene.truth = LabelMap{ph.truth.rows, ph.truth.cols, std::move(ph.truth.labels)};
    scene.class_names = std::move(ph.truth.class_names);
    return scene;
}

inline SceneData load_scene(const ExperimentConfig& config) {
    SceneData scene;
    if (config.phantom) {
        scene = scene_from_phantom(*config.phantom);
    } else {
        scene.h1 = load_cube(config.inputs->h1);
        scene.h2 = load_cube(config.inputs->h2);
        scene.white = load_cube(config.inputs->white);
        scene.truth = read_pgm(config.inputs->ground_truth);
        const auto max_code = *std::max_element(scene.truth.codes.begin(), scene.truth.codes.end());
        for (int c = 1; c <= max_code; ++c) scene.class_names.push_back("class" + std::to_string(c));
    }
    if (!config.class_names.empty()) {
        const auto max_code = *std::max_element(scene.truth.codes.begin(), scene.truth.codes.end());
        if (config.class_names.size() < max_code)
            throw std::invalid_argument("class_names has fewer entries than ground-truth classes");
        scene.class_names = config.class_names;
    }
    if (scene.truth.rows != scene.h1.rows() || scene.truth.cols != scene.h1.cols())
        throw std::invalid_argument("ground truth and cubes differ in size");
    return scene;
}

enum class Capture { H1, H2, Stacked };

inline std::string to_string(Capture c) {
    switch (c) {
        case Capture::H1: return "H1";
        case Capture::H2: return "H2";
        case Capture::Stacked: return "Stacked";
    }
    return "?";
}

/// Lazily computed intermediates of one scene. Not thread-safe.
class Pipeline {
public:
    Pipeline(const ExperimentConfig& config, SceneData scene) : config_(config), scene_(std::move(scene)) {
        split_ = config_.auto_split ? auto_split_band(scene_.h1, scene_.h2) : config_.split_band;
    }

    const SceneData& scene() const { return scene_; }
    std::size_t split_band() const { return split_; }
    std::size_t clamped_divisions() const { return clamped_; }

    /// Sensitivity-normalized cube of a capture, optionally illumination-corrected.
    const HsiCube& corrected(Capture capture, bool illumination) {
        auto& slot = cubes_[{capture, illumination}];
        if (!slot) {
            if (illumination) {
                slot = correct_illumination(corrected(capture, false), field(), &clamped_);
            } else {
                const HsiCube raw = capture == Capture::H1   ? scene_.h1
                                    : capture == Capture::H2 ? scene_.h2
                                                             : focus_stack(scene_.h1, scene_.h2, split_);
                slot = normalize_sensitivity(raw, sensitivity(), &clamped_);
            }
        }
        return *slot;
    }

    std::string chain(const std::string& variant) const {
        const std::string base = "focus_stack(" + std::to_string(split_) + ") > sensitivity";
        const std::string ic = base + " > illumination";
        const std::string pca = "pca(" + format_ratio(config_.pca_target) + ")";
        const std::string em = "emap(" + to_string(config_.emap.attribute) + ",k=" + std::to_string(config_.emap.k) + ")";
        const std::string hsihsi = "concat(" + ic + ", hue, S, I)";
        if (variant == "SimRGB") return base + " > simulate_rgb";
        if (variant == "SimRGB-IC") return ic + " > simulate_rgb";
        if (variant == "SimRGB-IC-SI") return "concat(" + ic + " > simulate_rgb, S, I)";
        if (variant == "SimRGB-IC-EMAP") return ic + " > simulate_rgb > " + em;
        if (variant == "HSI") return base;
        if (variant == "HSI-IC") return ic;
        if (variant == "HSI-DR") return ic + " > " + pca;
        if (variant == "HSI-h") return ic + " > hue";
        if (variant == "HSIhSI") return hsihsi;
        if (variant == "HSIhSI-DR") return hsihsi + " > " + pca;
        if (variant == "HSI-EMAP") return ic + " > " + pca + " > " + em;
        if (variant == "HSIhSI-EMAP") return hsihsi + " > " + pca + " > " + em;
        throw std::invalid_argument("unknown feature variant '" + variant + "'");
    }

    FeatureStack features(const std::string& variant) {
        if (!is_variant(variant)) throw std::invalid_argument("unknown feature variant '" + variant + "'");
        if (variant == "SimRGB") return rgb(false);
        if (variant == "SimRGB-IC") return rgb(true);
        if (variant == "SimRGB-IC-SI") {
            const auto rgb_ic = rgb(true);
            const auto hsi = hsi_transform(to_cube(rgb_ic), config_.achromatic_epsilon);
            return stack_features({rgb_ic, hsi.saturation, hsi.intensity});
        }
        if (variant == "SimRGB-IC-EMAP") return emap_of(rgb(true));
        if (variant == "HSI") return to_features(corrected(Capture::Stacked, false));
        if (variant == "HSI-IC") return to_features(corrected(Capture::Stacked, true));
        if (variant == "HSI-DR") return reduced_hsi();
        if (variant == "HSI-h") return hue().hue;
        if (variant == "HSIhSI") return hsihsi();
        if (variant == "HSIhSI-DR") return reduced_hsihsi();
        if (variant == "HSI-EMAP") return emap_of(reduced_hsi());
        return emap_of(reduced_hsihsi());
    }

    /// Simulated RGB of a capture (used by the focus ablation).
    FeatureStack rgb_of(Capture capture, bool illumination) {
        return to_features(simulate_rgb(corrected(capture, illumination)));
    }

private:
    static std::string format_ratio(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        return buf;
    }

    const SpectralSensitivity& sensitivity() {
        if (!sensitivity_) sensitivity_ = estimate_sensitivity(scene_.white, config_.white_region);
        return *sensitivity_;
    }

    const IlluminationField& field() {
        if (!field_) field_ = estimate_illumination(scene_.white, {config_.illumination_sigma_fraction});
        return *field_;
    }

    FeatureStack rgb(bool illumination) { return rgb_of(Capture::Stacked, illumination); }

    const HsiDecomposition& hue() {
        if (!hue_) hue_ = hsi_transform(corrected(Capture::Stacked, true), config_.achromatic_epsilon);
        return *hue_;
    }

    const FeatureStack& hsihsi() {
        if (!hsihsi_) {
            const auto& h = hue();
            hsihsi_ = stack_features({to_features(corrected(Capture::Stacked, true)), h.hue, h.saturation, h.intensity});
        }
        return *hsihsi_;
    }

    FeatureStack reduce(const FeatureStack& stack, const std::string& label) {
        const auto model = fit_pca(stack, config_.pca_target);
        log_line(label + ": PCA keeps " + std::to_string(model.rank()) + " of " + std::to_string(stack.channels()) +
                 " channels");
        return transform_pca(stack, model);
    }

    const FeatureStack& reduced_hsi() {
        if (!reduced_hsi_) reduced_hsi_ = reduce(to_features(corrected(Capture::Stacked, true)), "HSI-IC");
        return *reduced_hsi_;
    }

    const FeatureStack& reduced_hsihsi() {
        if (!reduced_hsihsi_) reduced_hsihsi_ = reduce(hsihsi(), "HSIhSI");
        return *reduced_hsihsi_;
    }

    FeatureStack emap_of(const FeatureStack& base) {
        const ApConfig cfg = config_.emap.resolve(base.pixels());
        return emap(base, std::span<const ApConfig>(&cfg, 1));
    }

    const ExperimentConfig& config_;
    SceneData scene_;
    std::size_t split_ = kDefaultSplitBand;
    std::size_t clamped_ = 0;
    std::optional<SpectralSensitivity> sensitivity_;
    std::optional<IlluminationField> field_;
    std::map<std::pair<Capture, bool>, std::optional<HsiCube>> cubes_;
    std::optional<HsiDecomposition> hue_;
    std::optional<FeatureStack> hsihsi_;
    std::optional<FeatureStack> reduced_hsi_;
    std::optional<FeatureStack> reduced_hsihsi_;
};

/// Summary table; AA and OA in percent, kappa as a fraction.
inline std::string summary_csv(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << "feature,aa_mean,aa_sd,oa_mean,oa_sd,kappa_mean,kappa_sd\n";
    char buf[256];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f,%.6f,%.6f\n", r.feature.c_str(), 100.0 * r.aa.mean,
                      100.0 * r.aa.sd, 100.0 * r.oa.mean, 100.0 * r.oa.sd, r.kappa.mean, r.kappa.sd);
        out << buf;
    }
    return out.str();
}

struct ExperimentResult {
    std::vector<EvalReport> reports;
    std::vector<EvalReport> ablation;  ///< features "<pipeline>@<capture>"
    std::vector<std::pair<std::string, std::string>> failures;  ///< (variant, reason)
    std::size_t split_band = 0;
};

namespace experiment_detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

/// Predicted label map: forest trained on the first repeat's split,
/// applied to every labeled pixel; background stays 0.
inline LabelMap predicted_map(const FeatureStack& features, const SceneData& scene, const EvalProtocol& protocol) {
    const auto ids = scene.class_ids();
    const auto split = sample_split(ids, scene.class_names.size(), protocol.per_class, split_seed(protocol.seed, 0));
    ForestOptions opts;
    opts.trees = protocol.trees;
    opts.seed = forest_seed(protocol.seed, 0);
    opts.mtry = protocol.mtry;
    opts.bootstrap = protocol.bootstrap;
    const auto model = train_forest(view_of(features), ids, split.train, scene.class_names.size(), opts);
    std::vector<std::size_t> labeled;
    for (std::size_t p = 0; p < ids.size(); ++p)
        if (ids[p] >= 0) labeled.push_back(p);
    const auto predicted = predict(model, view_of(features), labeled);
    LabelMap map{scene.truth.rows, scene.truth.cols, std::vector<std::uint8_t>(ids.size(), 0)};
    for (std::size_t i = 0; i < labeled.size(); ++i)
        map.codes[labeled[i]] = static_cast<std::uint8_t>(predicted[i] + 1);
    return map;
}

inline std::string cache_key(const ExperimentConfig& config, const std::string& variant) {
    Json j = to_json(config);
    j.erase("variants");
    j.erase("protocol");
    j.erase("output_dir");
    j.erase("focus_ablation");
    j.erase("label_maps");
    j.erase("cache_dir");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(j.dump() + "|" + variant)));
    return variant + "-" + buf;
}

}  // namespace experiment_detail

/// Runs every configured variant (and the focus ablation, if enabled).
/// A failing variant is logged and recorded; the others still run.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    namespace fs = std::filesystem;
    const fs::path out_dir = config.output_dir;
    const bool write = !config.output_dir.empty();
    if (write) fs::create_directories(out_dir);

    Pipeline pipeline(config, load_scene(config));
    const auto& scene = pipeline.scene();
    const auto ids = scene.class_ids();
    ExperimentResult result;
    result.split_band = pipeline.split_band();
    log_line("split band " + std::to_string(pipeline.split_band()) + ", " + std::to_string(scene.class_names.size()) +
             " classes");
    if (write) {
        write_pgm(scene.truth, out_dir / "ground_truth.pgm");
        write_label_png(scene.truth, out_dir / "ground_truth.png");
    }

    auto run_one = [&](const std::string& name, const std::string& chain, auto&& make) -> std::optional<EvalReport> {
        try {
            const auto start = std::chrono::steady_clock::now();
            FeatureStack features;
            const fs::path cached = config.cache_dir.empty()
                                        ? fs::path()
                                        : fs::path(config.cache_dir) /
                                              (experiment_detail::cache_key(config, name) + ".hdr");
            if (!cached.empty() && fs::exists(cached)) {
                features = load_features(cached);
            } else {
                features = make();
                if (!cached.empty()) save_features(features, cached);
            }
            EvalReport report = evaluate(features, ids, scene.class_names, config.protocol);
            report.feature = name;
            report.chain = chain;
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            char buf[200];
            std::snprintf(buf, sizeof(buf), "%s: %zu features, AA %.2f%% (+-%.2f), %.1fs", name.c_str(),
                          features.channels(), 100 * report.aa.mean, 100 * report.aa.sd, secs);
            log_line(buf);
            if (write) {
                experiment_detail::write_text(out_dir / (name + ".json"), to_json(report).dump(2) + "\n");
                if (config.label_maps)
                    write_label_png(experiment_detail::predicted_map(features, scene, config.protocol),
                                    out_dir / ("labels_" + name + ".png"));
            }
            return report;
        } catch (const std::exception& e) {
            log_line("variant " + name + " failed: " + e.what());
            result.failures.push_back({name, e.what()});
            return std::nullopt;
        }
    };

    for (const auto& variant : config.variants) {
        if (auto report = run_one(variant, pipeline.chain(variant), [&] { return pipeline.features(variant); }))
            result.reports.push_back(std::move(*report));
    }

    if (config.focus_ablation) {
        for (const bool hsi : {false, true}) {
            for (const Capture capture : {Capture::H1, Capture::H2, Capture::Stacked}) {
                const std::string pipeline_name = hsi ? "HSI-IC" : "SimRGB-IC";
                const std::string name = pipeline_name + "@" + to_string(capture);
                const std::string source = capture == Capture::Stacked
                                               ? "focus_stack(" + std::to_string(pipeline.split_band()) + ")"
                                               : to_string(capture);
                const std::string chain = source + " > sensitivity > illumination" + (hsi ? "" : " > simulate_rgb");
                auto report = run_one(name, chain, [&] {
                    return hsi ? to_features(pipeline.corrected(capture, true)) : pipeline.rgb_of(capture, true);
                });
                if (report) result.ablation.push_back(std::move(*report));
            }
        }
    }

    if (write) {
        experiment_detail::write_text(out_dir / "summary.csv", summary_csv(result.reports));
        if (config.focus_ablation)
            experiment_detail::write_text(out_dir / "focus_ablation.csv", summary_csv(result.ablation));
    }
    if (pipeline.clamped_divisions())
        log_line("warning: " + std::to_string(pipeline.clamped_divisions()) + " divisions clamped at " +
                 std::to_string(kDivisionFloor));
    return result;
}

}  // namespace strata
