#pragma once

// JSON forms of the configuration and result types. Every field of a
// config object is optional when reading; missing keys keep defaults.

#include "json.hpp"

#include <stdexcept>
#include <string>

#include "strata/dimred.hpp"
#include "strata/learn.hpp"
#include "strata/morpho.hpp"
#include "strata/phantom.hpp"

namespace strata {

using Json = nlohmann::json;

inline AttributeKind attribute_from_string(const std::string& s) {
    if (s == "area") return AttributeKind::Area;
    if (s == "stddev") return AttributeKind::StdDev;
    if (s == "moment") return AttributeKind::Moment;
    throw std::invalid_argument("unknown attribute '" + s + "' (area | stddev | moment)");
}

inline FilterRule rule_from_string(const std::string& s) {
    if (s == "min") return FilterRule::Min;
    if (s == "direct") return FilterRule::Direct;
    throw std::invalid_argument("unknown filter rule '" + s + "' (min | direct)");
}

inline Connectivity connectivity_from_int(int c) {
    if (c == 4) return Connectivity::Four;
    if (c == 8) return Connectivity::Eight;
    throw std::invalid_argument("connectivity must be 4 or 8");
}

inline Json to_json(const ApConfig& cfg) {
    return {{"attribute", to_string(cfg.attribute)},
            {"thresholds", cfg.thresholds},
            {"connectivity", static_cast<int>(cfg.connectivity)},
            {"rule", to_string(cfg.rule)}};
}

inline ApConfig ap_config_from_json(const Json& j) {
    ApConfig cfg;
    cfg.attribute = attribute_from_string(j.value("attribute", std::string("area")));
    cfg.thresholds = j.at("thresholds").get<std::vector<double>>();
    cfg.connectivity = connectivity_from_int(j.value("connectivity", 4));
    cfg.rule = rule_from_string(j.value("rule", std::string("min")));
    cfg.validate();
    return cfg;
}

inline Json to_json(const PcaModel& m) {
    return {{"mean", m.mean},
            {"components", m.components},
            {"explained_variance", m.explained_variance},
            {"total_variance", m.total_variance},
            {"retained_ratio", m.retained_ratio}};
}

inline PcaModel pca_model_from_json(const Json& j) {
    PcaModel m;
    m.mean = j.at("mean").get<std::vector<double>>();
    m.components = j.at("components").get<std::vector<double>>();
    m.explained_variance = j.at("explained_variance").get<std::vector<double>>();
    m.total_variance = j.at("total_variance").get<double>();
    m.retained_ratio = j.at("retained_ratio").get<double>();
    if (m.components.size() != m.mean.size() * m.explained_variance.size())
        throw std::invalid_argument("PCA model JSON: components must be k x d");
    return m;
}

inline Json to_json(const SpectralCurve& c) {
    Json arr = Json::array();
    for (const auto& [b, v] : c.knots) arr.push_back({b, v});
    return arr;
}

inline SpectralCurve curve_from_json(const Json& j) {
    SpectralCurve c;
    for (const auto& knot : j) c.knots.push_back({knot.at(0).get<double>(), knot.at(1).get<double>()});
    return c;
}

inline Json to_json(const StrokeLayer& l) {
    return {{"count", l.count},
            {"min_width", l.min_width},
            {"max_width", l.max_width},
            {"min_coverage", l.min_coverage},
            {"max_coverage", l.max_coverage}};
}

inline void update_from_json(StrokeLayer& l, const Json& j) {
    l.count = j.value("count", l.count);
    l.min_width = j.value("min_width", l.min_width);
    l.max_width = j.value("max_width", l.max_width);
    l.min_coverage = j.value("min_coverage", l.min_coverage);
    l.max_coverage = j.value("max_coverage", l.max_coverage);
}

inline Json to_json(const PhantomSpec& s) {
    return {{"rows", s.rows},
            {"cols", s.cols},
            {"bands", s.bands},
            {"wavelength_start_nm", s.wavelength_start_nm},
            {"wavelength_step_nm", s.wavelength_step_nm},
            {"materials",
             {{"substrate", to_json(s.materials.substrate)},
              {"red_chalk", to_json(s.materials.red_chalk)},
              {"diluted_red_chalk", to_json(s.materials.diluted_red_chalk)},
              {"ink", to_json(s.materials.ink)}}},
            {"white_reflectance", s.white_reflectance},
            {"chalk", to_json(s.chalk)},
            {"diluted", to_json(s.diluted)},
            {"ink", to_json(s.ink)},
            {"labeling", s.labeling == Labeling::Overlay ? "overlay" : "layered"},
            {"illumination_min", s.illumination_min},
            {"illumination_angle_deg", s.illumination_angle_deg},
            {"shading_amplitude", s.shading_amplitude},
            {"shading_scale_px", s.shading_scale_px},
            {"sensitivity_floor", s.sensitivity_floor},
            {"sensitivity_peak_band", s.sensitivity_peak_band},
            {"sensitivity_width", s.sensitivity_width},
            {"noise_sd", s.noise_sd},
            {"h1_focus_band", s.h1_focus_band},
            {"h2_focus_band", s.h2_focus_band},
            {"max_blur_sigma", s.max_blur_sigma},
            {"seed", s.seed}};
}

inline PhantomSpec phantom_spec_from_json(const Json& j) {
    PhantomSpec s;
    s.rows = j.value("rows", s.rows);
    s.cols = j.value("cols", s.cols);
    s.bands = j.value("bands", s.bands);
    s.wavelength_start_nm = j.value("wavelength_start_nm", s.wavelength_start_nm);
    s.wavelength_step_nm = j.value("wavelength_step_nm", s.wavelength_step_nm);
    if (j.contains("materials")) {
        const auto& m = j.at("materials");
        if (m.contains("substrate")) s.materials.substrate = curve_from_json(m.at("substrate"));
        if (m.contains("red_chalk")) s.materials.red_chalk = curve_from_json(m.at("red_chalk"));
        if (m.contains("diluted_red_chalk")) s.materials.diluted_red_chalk = curve_from_json(m.at("diluted_red_chalk"));
        if (m.contains("ink")) s.materials.ink = curve_from_json(m.at("ink"));
    }
    s.white_reflectance = j.value("white_reflectance", s.white_reflectance);
    if (j.contains("chalk")) update_from_json(s.chalk, j.at("chalk"));
    if (j.contains("diluted")) update_from_json(s.diluted, j.at("diluted"));
    if (j.contains("ink")) update_from_json(s.ink, j.at("ink"));
    if (j.contains("labeling")) {
        const auto l = j.at("labeling").get<std::string>();
        if (l == "overlay") s.labeling = Labeling::Overlay;
        else if (l == "layered") s.labeling = Labeling::Layered;
        else throw std::invalid_argument("labeling must be 'layered' or 'overlay'");
    }
    s.illumination_min = j.value("illumination_min", s.illumination_min);
    s.illumination_angle_deg = j.value("illumination_angle_deg", s.illumination_angle_deg);
    s.shading_amplitude = j.value("shading_amplitude", s.shading_amplitude);
    s.shading_scale_px = j.value("shading_scale_px", s.shading_scale_px);
    s.sensitivity_floor = j.value("sensitivity_floor", s.sensitivity_floor);
    s.sensitivity_peak_band = j.value("sensitivity_peak_band", s.sensitivity_peak_band);
    s.sensitivity_width = j.value("sensitivity_width", s.sensitivity_width);
    s.noise_sd = j.value("noise_sd", s.noise_sd);
    s.h1_focus_band = j.value("h1_focus_band", s.h1_focus_band);
    s.h2_focus_band = j.value("h2_focus_band", s.h2_focus_band);
    s.max_blur_sigma = j.value("max_blur_sigma", s.max_blur_sigma);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
}

inline Json to_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd}}; }

inline Json to_json(const EvalReport& r) {
    Json confusions = Json::array();
    for (const auto& cm : r.confusions) {
        Json rows = Json::array();
        for (std::size_t t = 0; t < cm.classes; ++t) {
            Json row = Json::array();
            for (std::size_t p = 0; p < cm.classes; ++p) row.push_back(cm.at(t, p));
            rows.push_back(row);
        }
        confusions.push_back(rows);
    }
    Json repeats = Json::array();
    for (const auto& s : r.per_repeat) repeats.push_back({{"oa", s.oa}, {"aa", s.aa}, {"kappa", s.kappa}});
    return {{"feature", r.feature},
            {"chain", r.chain},
            {"class_names", r.class_names},
            {"feature_dims", r.feature_dims},
            {"repeats", r.confusions.size()},
            {"seeds", r.seeds},
            {"confusion_matrices", confusions},
            {"per_repeat", repeats},
            {"aa", to_json(r.aa)},
            {"oa", to_json(r.oa)},
            {"kappa", to_json(r.kappa)}};
}

inline EvalReport eval_report_from_json(const Json& j) {
    EvalReport r;
    r.feature = j.at("feature").get<std::string>();
    r.chain = j.value("chain", std::string());
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.feature_dims = j.value("feature_dims", std::size_t{0});
    r.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    for (const auto& cmj : j.at("confusion_matrices")) {
        ConfusionMatrix cm(cmj.size());
        for (std::size_t t = 0; t < cm.classes; ++t)
            for (std::size_t p = 0; p < cm.classes; ++p) cm.at(t, p) = cmj.at(t).at(p).get<std::uint64_t>();
        r.confusions.push_back(std::move(cm));
    }
    for (const auto& s : j.at("per_repeat"))
        r.per_repeat.push_back({s.at("oa").get<double>(), s.at("aa").get<double>(), s.at("kappa").get<double>()});
    r.aa = {j.at("aa").at("mean").get<double>(), j.at("aa").at("sd").get<double>()};
    r.oa = {j.at("oa").at("mean").get<double>(), j.at("oa").at("sd").get<double>()};
    r.kappa = {j.at("kappa").at("mean").get<double>(), j.at("kappa").at("sd").get<double>()};
    return r;
}

}  // namespace strata
