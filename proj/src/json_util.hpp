#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "chanex/core_model.hpp"
#include "chanex/env_sim.hpp"
#include "chanex/path_alignment.hpp"
#include "chanex/path_extraction.hpp"

namespace chanex {

using nlohmann::json;

/// Rejects keys outside the allowed set (strict config schema).
inline void require_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError(context + ": unknown key '" + item.key() + "'");
    }
}

template <class T>
T get_or(const json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<T>();
}

inline json to_json(const ArrayConfig& a) {
    return {{"n_h", a.n_h}, {"n_v", a.n_v}, {"spacing_ratio", a.spacing_ratio}};
}

inline ArrayConfig array_from_json(const json& j) {
    require_keys(j, {"n_h", "n_v", "spacing_ratio"}, "array");
    ArrayConfig a;
    a.n_h = j.at("n_h").get<int>();
    a.n_v = j.at("n_v").get<int>();
    a.spacing_ratio = get_or(j, "spacing_ratio", 0.5);
    a.validate();
    return a;
}

inline json to_json(const BandConfig& b) {
    return {{"f_start", b.f_start}, {"n_subcarriers", b.n_subcarriers}, {"delta_f", b.delta_f}};
}

inline BandConfig band_from_json(const json& j, const std::string& context) {
    require_keys(j, {"f_start", "n_subcarriers", "delta_f"}, context);
    BandConfig b;
    b.f_start = j.at("f_start").get<double>();
    b.n_subcarriers = j.at("n_subcarriers").get<int>();
    b.delta_f = j.at("delta_f").get<double>();
    b.validate();
    return b;
}

inline json to_json(const Interval& iv) { return {{"lo", iv.lo}, {"hi", iv.hi}}; }

inline Interval interval_from_json(const json& j, const std::string& context) {
    require_keys(j, {"lo", "hi"}, context);
    return {j.at("lo").get<double>(), j.at("hi").get<double>()};
}

inline json to_json(const EnvironmentSpec& s) {
    return {{"name", s.name},
            {"n_paths_min", s.n_paths_min},
            {"n_paths_max", s.n_paths_max},
            {"delay_range", to_json(s.delay_range)},
            {"azimuth_range", to_json(s.azimuth_range)},
            {"elevation_range", to_json(s.elevation_range)},
            {"gain_decay", s.gain_decay},
            {"ground_twin_prob", s.ground_twin_prob},
            {"twin_delay_offset_range", to_json(s.twin_delay_offset_range)},
            {"seed", s.seed}};
}

inline EnvironmentSpec environment_from_json(const json& j) {
    require_keys(j,
                 {"name", "n_paths_min", "n_paths_max", "delay_range", "azimuth_range",
                  "elevation_range", "gain_decay", "ground_twin_prob",
                  "twin_delay_offset_range", "seed"},
                 "environment");
    EnvironmentSpec s;
    s.name = j.at("name").get<std::string>();
    s.n_paths_min = j.at("n_paths_min").get<int>();
    s.n_paths_max = j.at("n_paths_max").get<int>();
    s.delay_range = interval_from_json(j.at("delay_range"), "delay_range");
    s.azimuth_range = interval_from_json(j.at("azimuth_range"), "azimuth_range");
    s.elevation_range = interval_from_json(j.at("elevation_range"), "elevation_range");
    s.gain_decay = j.at("gain_decay").get<double>();
    s.ground_twin_prob = j.at("ground_twin_prob").get<double>();
    s.twin_delay_offset_range =
        interval_from_json(j.at("twin_delay_offset_range"), "twin_delay_offset_range");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
}

inline json to_json(const SageConfig& c) {
    return {{"max_subpaths", c.max_subpaths}, {"residual_stop_db", c.residual_stop_db},
            {"grid_h", c.grid_h},             {"grid_v", c.grid_v},
            {"grid_d", c.grid_d},             {"refine_iters", c.refine_iters},
            {"refine_cycles", c.refine_cycles}, {"em_sweeps", c.em_sweeps}};
}

inline SageConfig sage_from_json(const json& j) {
    require_keys(j,
                 {"max_subpaths", "residual_stop_db", "grid_h", "grid_v", "grid_d",
                  "refine_iters", "refine_cycles", "em_sweeps"},
                 "sage");
    SageConfig c;
    c.max_subpaths = get_or(j, "max_subpaths", c.max_subpaths);
    c.residual_stop_db = get_or(j, "residual_stop_db", c.residual_stop_db);
    c.grid_h = get_or(j, "grid_h", c.grid_h);
    c.grid_v = get_or(j, "grid_v", c.grid_v);
    c.grid_d = get_or(j, "grid_d", c.grid_d);
    c.refine_iters = get_or(j, "refine_iters", c.refine_iters);
    c.refine_cycles = get_or(j, "refine_cycles", c.refine_cycles);
    c.em_sweeps = get_or(j, "em_sweeps", c.em_sweeps);
    c.validate();
    return c;
}

inline json to_json(const OversamplingConfig& c) {
    return {{"o_h", c.o_h}, {"o_v", c.o_v}, {"o_d", c.o_d}};
}

inline OversamplingConfig oversampling_from_json(const json& j) {
    require_keys(j, {"o_h", "o_v", "o_d"}, "oversampling");
    OversamplingConfig c;
    c.o_h = get_or(j, "o_h", 2);
    c.o_v = get_or(j, "o_v", 2);
    c.o_d = get_or(j, "o_d", 2);
    c.validate();
    return c;
}

inline json to_json(const PathParams& p) {
    return {{"gain_re", p.gain.real()},
            {"gain_im", p.gain.imag()},
            {"delay", p.delay},
            {"azimuth", p.azimuth},
            {"elevation", p.elevation}};
}

inline PathParams path_from_json(const json& j) {
    PathParams p;
    p.gain = cplx(j.at("gain_re").get<double>(), j.at("gain_im").get<double>());
    p.delay = j.at("delay").get<double>();
    p.azimuth = j.at("azimuth").get<double>();
    p.elevation = j.at("elevation").get<double>();
    return p;
}

inline json to_json(const SubPathEstimate& sp) {
    return {{"gain_re", sp.gain.real()},
            {"gain_im", sp.gain.imag()},
            {"delay", sp.delay},
            {"azimuth", sp.azimuth},
            {"elevation", sp.elevation}};
}

inline SubPathEstimate subpath_from_json(const json& j, Band band) {
    SubPathEstimate sp;
    sp.gain = cplx(j.at("gain_re").get<double>(), j.at("gain_im").get<double>());
    sp.delay = j.at("delay").get<double>();
    sp.azimuth = j.at("azimuth").get<double>();
    sp.elevation = j.at("elevation").get<double>();
    sp.band = band;
    return sp;
}

}  // namespace chanex
