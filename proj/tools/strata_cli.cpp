// strata: command-line front end.
//
//   strata phantom generate --out DIR [--config spec.json] [--seed N] ...
//   strata preprocess --h1 A.hdr --h2 B.hdr --white W.hdr --out C.hdr
//   strata features --config exp.json --variant HSI-h --out stack.hdr
//   strata evaluate --features stack.hdr --labels gt.pgm --out report.json
//   strata experiment --config exp.json [--output-dir DIR] ...
//   strata report --dir DIR [--out summary.csv]
//
// Exit codes: 0 success, 1 usage/config/input error, 2 some variants failed.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "strata/experiment.hpp"

namespace fs = std::filesystem;
using namespace strata;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

PixelRect parse_rect(const std::string& text) {
    const auto parts = split_list(text);
    if (parts.size() != 4) throw std::invalid_argument("region must be row,col,rows,cols");
    return PixelRect{std::stoul(parts[0]), std::stoul(parts[1]), std::stoul(parts[2]), std::stoul(parts[3])};
}

/// Flags shared by the commands that build an ExperimentConfig.
struct ConfigFlags {
    std::string config;
    bool phantom = false;
    std::string h1, h2, white, truth;
    std::string class_names;
    std::string white_region;
    std::optional<std::size_t> split;
    bool auto_split = false;
    std::optional<double> sigma_fraction;
    std::optional<double> pca_target;
    std::string emap_attribute;
    std::optional<std::size_t> emap_k;
    std::optional<std::uint64_t> phantom_seed;

    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", config, "Experiment config JSON");
        cmd->add_flag("--phantom", phantom, "Use the default phantom when the config names no data");
        cmd->add_option("--phantom-seed", phantom_seed, "Override the phantom seed");
        cmd->add_option("--h1", h1, "First capture (ENVI header)");
        cmd->add_option("--h2", h2, "Second capture (ENVI header)");
        cmd->add_option("--white", white, "White reference (ENVI header)");
        cmd->add_option("--ground-truth", truth, "Ground-truth label map (PGM)");
        cmd->add_option("--class-names", class_names, "Comma-separated class names");
        cmd->add_option("--white-region", white_region, "row,col,rows,cols of the white target");
        cmd->add_option("--split", split, "Last 1-based band taken from H1");
        cmd->add_flag("--auto-split", auto_split, "Choose the split band by sharpness");
        cmd->add_option("--sigma-fraction", sigma_fraction, "Illumination blur sigma / image diagonal");
        cmd->add_option("--pca-target", pca_target, "Retained variance ratio");
        cmd->add_option("--emap-attribute", emap_attribute, "area | stddev | moment");
        cmd->add_option("--emap-k", emap_k, "Thresholds per attribute");
    }

    ExperimentConfig build() const {
        ExperimentConfig c;
        if (!config.empty()) c = experiment_config_from_json(read_json(config));
        if (phantom && !c.phantom && !c.inputs) c.phantom = PhantomSpec{};
        if (phantom_seed) {
            if (!c.phantom) throw std::invalid_argument("--phantom-seed needs a phantom data source");
            c.phantom->seed = *phantom_seed;
        }
        if (!h1.empty() || !h2.empty() || !white.empty() || !truth.empty()) {
            InputPaths in = c.inputs.value_or(InputPaths{});
            if (!h1.empty()) in.h1 = h1;
            if (!h2.empty()) in.h2 = h2;
            if (!white.empty()) in.white = white;
            if (!truth.empty()) in.ground_truth = truth;
            c.inputs = in;
            c.phantom.reset();
        }
        if (!class_names.empty()) c.class_names = split_list(class_names);
        if (!white_region.empty()) c.white_region = parse_rect(white_region);
        if (split) c.split_band = *split;
        if (auto_split) c.auto_split = true;
        if (sigma_fraction) c.illumination_sigma_fraction = *sigma_fraction;
        if (pca_target) c.pca_target = *pca_target;
        if (!emap_attribute.empty()) c.emap.attribute = attribute_from_string(emap_attribute);
        if (emap_k) c.emap.k = *emap_k;
        return c;
    }
};

struct ProtocolFlags {
    std::optional<std::size_t> per_class, repeats, trees, mtry;
    std::optional<std::uint64_t> seed;
    bool no_bootstrap = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--per-class", per_class, "Training samples per class");
        cmd->add_option("--repeats", repeats, "Random splits");
        cmd->add_option("--trees", trees, "Trees per forest");
        cmd->add_option("--mtry", mtry, "Features tried per split");
        cmd->add_option("--seed", seed, "Protocol seed");
        cmd->add_flag("--no-bootstrap", no_bootstrap, "Grow every tree on the full training set");
    }

    void apply(EvalProtocol& p) const {
        if (per_class) p.per_class = *per_class;
        if (repeats) p.repeats = *repeats;
        if (trees) p.trees = *trees;
        if (mtry) p.mtry = *mtry;
        if (seed) p.seed = *seed;
        if (no_bootstrap) p.bootstrap = false;
    }
};

int cmd_phantom(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
                std::optional<std::size_t> size, const std::string& labeling) {
    Json j = config.empty() ? Json::object() : read_json(config);
    if (j.contains("phantom")) j = j.at("phantom");
    if (seed) j["seed"] = *seed;
    if (size) j["rows"] = j["cols"] = *size;
    if (!labeling.empty()) j["labeling"] = labeling;
    const PhantomSpec spec = phantom_spec_from_json(j);
    log_line("generating " + std::to_string(spec.rows) + "x" + std::to_string(spec.cols) + "x" +
             std::to_string(spec.bands) + " phantom, seed " + std::to_string(spec.seed));
    const auto ph = generate_phantom(spec);
    const fs::path dir = out;
    fs::create_directories(dir);
    save_cube(ph.h1, dir / "h1.hdr");
    save_cube(ph.h2, dir / "h2.hdr");
    save_cube(ph.white_ref, dir / "white_ref.hdr");
    save_cube(ph.clean, dir / "clean.hdr");
    const LabelMap truth{ph.truth.rows, ph.truth.cols, ph.truth.labels};
    write_pgm(truth, dir / "ground_truth.pgm");
    write_label_png(truth, dir / "ground_truth.png");
    Json meta = to_json(spec);
    meta["class_names"] = ph.truth.class_names;
    write_file(dir / "phantom.json", meta.dump(2) + "\n");
    log_line("wrote " + dir.string());
    return kExitOk;
}

int cmd_preprocess(const ConfigFlags& flags, const std::string& out, bool no_illumination,
                   const std::string& report) {
    ExperimentConfig c = flags.build();
    if (!c.phantom && !c.inputs) throw std::invalid_argument("preprocess needs --h1/--h2/--white or a config");
    SceneData scene;
    if (c.inputs) {
        scene.h1 = load_cube(c.inputs->h1);
        scene.h2 = load_cube(c.inputs->h2);
        scene.white = load_cube(c.inputs->white);
    } else {
        scene = scene_from_phantom(*c.phantom);
    }
    const std::size_t split = c.auto_split ? auto_split_band(scene.h1, scene.h2) : c.split_band;
    log_line("focus stacking at band " + std::to_string(split));
    const HsiCube stacked = focus_stack(scene.h1, scene.h2, split);
    std::size_t clamped = 0;
    HsiCube cube = normalize_sensitivity(stacked, estimate_sensitivity(scene.white, c.white_region), &clamped);
    if (!no_illumination)
        cube = correct_illumination(cube, estimate_illumination(scene.white, {c.illumination_sigma_fraction}),
                                    &clamped);
    if (clamped) log_line("warning: " + std::to_string(clamped) + " divisions clamped");
    save_cube(cube, out);
    if (!report.empty()) {
        std::ostringstream csv;
        write_correction_csv(csv, stacked, cube);
        write_file(report, csv.str());
    }
    log_line("wrote " + out);
    return kExitOk;
}

int cmd_features(const ConfigFlags& flags, const std::string& variant, const std::string& out) {
    ExperimentConfig c = flags.build();
    c.variants = {variant};
    c.output_dir.clear();
    c.validate();
    Pipeline pipeline(c, load_scene(c));
    const auto stack = pipeline.features(variant);
    save_features(stack, out);
    log_line(variant + ": " + std::to_string(stack.channels()) + " channels, " + pipeline.chain(variant));
    return kExitOk;
}

int cmd_evaluate(const std::string& features, const std::string& labels, const std::string& class_names,
                 const ProtocolFlags& pflags, const std::string& out) {
    const auto stack = load_features(features);
    const auto truth = read_pgm(labels);
    if (truth.rows != stack.rows() || truth.cols != stack.cols())
        throw std::invalid_argument("label map and features differ in size");
    std::vector<int> ids(truth.codes.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(truth.codes[i]) - 1;
    std::vector<std::string> names = split_list(class_names);
    const int max_id = *std::max_element(ids.begin(), ids.end());
    if (names.empty())
        for (int c = 0; c <= max_id; ++c) names.push_back("class" + std::to_string(c + 1));
    if (static_cast<int>(names.size()) <= max_id)
        throw std::invalid_argument("fewer class names than classes in the label map");
    EvalProtocol protocol;
    pflags.apply(protocol);
    EvalReport report = evaluate(stack, ids, names, protocol);
    report.feature = fs::path(features).stem().string();
    report.chain = "load(" + features + ")";
    if (!out.empty()) write_file(out, to_json(report).dump(2) + "\n");
    std::cout << summary_csv({report});
    return kExitOk;
}

int cmd_experiment(const ConfigFlags& flags, const ProtocolFlags& pflags, const std::string& variants,
                   const std::string& output_dir, const std::string& cache_dir, bool ablation, bool no_maps) {
    ExperimentConfig c = flags.build();
    pflags.apply(c.protocol);
    if (!variants.empty()) c.variants = variants == "all" ? all_variants() : split_list(variants);
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (!cache_dir.empty()) c.cache_dir = cache_dir;
    if (ablation) c.focus_ablation = true;
    if (no_maps) c.label_maps = false;
    c.validate();
    if (!c.output_dir.empty()) write_file(fs::path(c.output_dir) / "config.json", to_json(c).dump(2) + "\n");
    const auto result = run_experiment(c);
    std::cout << summary_csv(result.reports);
    if (c.focus_ablation) std::cout << summary_csv(result.ablation);
    if (!result.failures.empty()) {
        for (const auto& [name, reason] : result.failures) std::cerr << "failed: " << name << ": " << reason << "\n";
        return kExitPartial;
    }
    return kExitOk;
}

int cmd_report(const std::string& dir, const std::string& out) {
    std::vector<EvalReport> reports;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        const Json j = read_json(entry.path().string());
        if (!j.is_object() || !j.contains("confusion_matrices")) continue;
        reports.push_back(eval_report_from_json(j));
    }
    if (reports.empty()) throw std::invalid_argument("no evaluation reports in " + dir);
    const auto& order = all_variants();
    auto rank = [&](const EvalReport& r) {
        const auto it = std::find(order.begin(), order.end(), r.feature);
        return std::pair{static_cast<std::size_t>(it - order.begin()), r.feature};
    };
    std::sort(reports.begin(), reports.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
    const std::string csv = summary_csv(reports);
    if (out.empty())
        std::cout << csv;
    else
        write_file(out, csv);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layer decomposition of hyperspectral drawing scans"};
    app.require_subcommand(1);

    auto* phantom = app.add_subcommand("phantom", "Synthetic test data");
    phantom->require_subcommand(1);
    auto* generate = phantom->add_subcommand("generate", "Write a phantom scene (H1, H2, white reference, truth)");
    std::string ph_config, ph_out, ph_labeling;
    std::optional<std::uint64_t> ph_seed;
    std::optional<std::size_t> ph_size;
    generate->add_option("-c,--config", ph_config, "Phantom spec JSON (or an experiment config)");
    generate->add_option("-o,--out", ph_out, "Output directory")->required();
    generate->add_option("--seed", ph_seed, "Phantom seed");
    generate->add_option("--size", ph_size, "Rows and columns");
    generate->add_option("--labeling", ph_labeling, "layered | overlay");

    auto* preprocess = app.add_subcommand("preprocess", "Focus stacking and sensor corrections");
    ConfigFlags pre_flags;
    pre_flags.attach(preprocess);
    std::string pre_out, pre_report;
    bool pre_no_ic = false;
    preprocess->add_option("-o,--out", pre_out, "Output cube header")->required();
    preprocess->add_flag("--no-illumination", pre_no_ic, "Skip illumination correction");
    preprocess->add_option("--report", pre_report, "Per-band mean CSV before/after correction");

    auto* features = app.add_subcommand("features", "Compute one feature variant");
    ConfigFlags feat_flags;
    feat_flags.attach(features);
    std::string feat_variant, feat_out;
    features->add_option("--variant", feat_variant, "Feature variant")->required();
    features->add_option("-o,--out", feat_out, "Output stack header")->required();

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Repeated random-forest evaluation of a stack");
    ProtocolFlags eval_protocol;
    eval_protocol.attach(evaluate_cmd);
    std::string eval_features, eval_labels, eval_names, eval_out;
    evaluate_cmd->add_option("--features", eval_features, "Feature stack header")->required();
    evaluate_cmd->add_option("--labels", eval_labels, "Label map (PGM, 0 = background)")->required();
    evaluate_cmd->add_option("--class-names", eval_names, "Comma-separated class names");
    evaluate_cmd->add_option("-o,--out", eval_out, "Report JSON");

    auto* experiment = app.add_subcommand("experiment", "Run the feature matrix");
    ConfigFlags exp_flags;
    exp_flags.attach(experiment);
    ProtocolFlags exp_protocol;
    exp_protocol.attach(experiment);
    std::string exp_variants, exp_out, exp_cache;
    bool exp_ablation = false, exp_no_maps = false;
    experiment->add_option("--variants", exp_variants, "Comma-separated variants, or 'all'");
    experiment->add_option("-o,--output-dir", exp_out, "Output directory");
    experiment->add_option("--cache-dir", exp_cache, "Feature stack cache directory");
    experiment->add_flag("--focus-ablation", exp_ablation, "Also evaluate H1 / H2 / stacked");
    experiment->add_flag("--no-label-maps", exp_no_maps, "Skip predicted label PNGs");

    auto* report = app.add_subcommand("report", "Summary CSV from saved reports");
    std::string rep_dir, rep_out;
    report->add_option("-d,--dir", rep_dir, "Directory of report JSON files")->required();
    report->add_option("-o,--out", rep_out, "CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    }

    try {
        if (*generate) return cmd_phantom(ph_config, ph_out, ph_seed, ph_size, ph_labeling);
        if (*preprocess) return cmd_preprocess(pre_flags, pre_out, pre_no_ic, pre_report);
        if (*features) return cmd_features(feat_flags, feat_variant, feat_out);
        if (*evaluate_cmd) return cmd_evaluate(eval_features, eval_labels, eval_names, eval_protocol, eval_out);
        if (*experiment)
            return cmd_experiment(exp_flags, exp_protocol, exp_variants, exp_out, exp_cache, exp_ablation,
                                  exp_no_maps);
        if (*report) return cmd_report(rep_dir, rep_out);
    } catch (const std::exception& e) {
        std::cerr << "strata: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
