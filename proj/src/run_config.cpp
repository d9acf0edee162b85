#include "chanex/run_config.hpp"

#include <fstream>

#include "json_util.hpp"

namespace chanex {

namespace {

constexpr const char* kConfigFormat = "chanex-config-v1";

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

json full_json(const RunConfig& c) {
    json envs = json::array();
    for (const auto& e : c.environments) envs.push_back(to_json(e));
    return {{"format", kConfigFormat},
            {"seed", c.seed},
            {"array", to_json(c.array)},
            {"bands", {{"measured", to_json(c.band_m)}, {"target", to_json(c.band_e)}}},
            {"environments", envs},
            {"sage", to_json(c.sage)},
            {"dbscan", {{"eps", c.dbscan_eps}, {"min_pts", c.dbscan_min_pts}}},
            {"oversampling", to_json(c.os)},
            {"alignment_mode", alignment_mode_name(c.alignment)},
            {"mlp", {{"hidden_dims", c.hidden_dims}, {"init_seed", c.mlp_init_seed}}},
            {"train",
             {{"epochs", c.train.epochs},
              {"batch_size", c.train.batch_size},
              {"learning_rate", c.train.learning_rate},
              {"beta1", c.train.beta1},
              {"beta2", c.train.beta2},
              {"epsilon", c.train.epsilon},
              {"validation_fraction", c.train.validation_fraction},
              {"shuffle_seed", c.train.shuffle_seed}}},
            {"wasserstein", {{"max_n", c.w1.max_n}, {"repeats", c.w1.repeats}, {"seed", c.w1.seed}}},
            {"eval", {{"dominant_threshold", c.dominant_threshold}}}};
}

}  // namespace

void RunConfig::validate() const {
    array.validate();
    band_m.validate();
    band_e.validate();
    if (band_m.delta_f != band_e.delta_f) throw ConfigError("bands must share delta_f");
    if (environments.empty()) throw ConfigError("config needs at least one environment");
    for (const auto& e : environments) e.validate();
    sage.validate();
    if (dbscan_eps <= 0.0) throw ConfigError("dbscan eps must be positive");
    if (dbscan_min_pts < 1) throw ConfigError("dbscan min_pts must be >= 1");
    os.validate();
    if (hidden_dims.empty()) throw ConfigError("mlp needs at least one hidden layer");
    for (int d : hidden_dims)
        if (d < 1) throw ConfigError("mlp hidden dims must be positive");
    train.validate();
    if (w1.max_n < 1 || w1.repeats < 1) throw ConfigError("wasserstein max_n/repeats must be >= 1");
    if (dominant_threshold <= 0.0 || dominant_threshold > 1.0)
        throw ConfigError("dominant_threshold must be in (0, 1]");
}

ExtractionConfig RunConfig::extraction() const {
    return {sage, dbscan_eps, dbscan_min_pts};
}

Aligner RunConfig::aligner() const { return {alignment, os}; }

MlpConfig RunConfig::mlp_for(const BandConfig& in_band, const BandConfig& out_band) const {
    MlpConfig m;
    m.layer_dims.push_back(2 * array.total() * in_band.n_subcarriers);
    for (int d : hidden_dims) m.layer_dims.push_back(d);
    m.layer_dims.push_back(2 * array.total() * out_band.n_subcarriers);
    m.init_seed = mlp_init_seed;
    return m;
}

const EnvironmentSpec& RunConfig::environment(const std::string& name) const {
    for (const auto& e : environments)
        if (e.name == name) return e;
    throw ConfigError("environment not in config: " + name);
}

std::string RunConfig::canonical_json() const { return full_json(*this).dump(); }

std::string RunConfig::digest() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_json())));
    return buf;
}

RunConfig default_run_config() {
    RunConfig c;
    c.array = {4, 2, 0.5};
    c.band_m = {3.4e9, 16, 2.5e6};
    c.band_e = {3.5e9, 16, 2.5e6};
    for (const auto& name : environment_preset_names())
        c.environments.push_back(environment_preset(name));
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    require_keys(j,
                 {"format", "seed", "array", "bands", "environments", "sage", "dbscan",
                  "oversampling", "alignment_mode", "mlp", "train", "wasserstein", "eval"},
                 "config");
    if (get_or<std::string>(j, "format", "") != kConfigFormat)
        throw ConfigError("config format must be '" + std::string(kConfigFormat) + "'");

    RunConfig c = default_run_config();
    try {
        c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
        if (j.contains("array")) c.array = array_from_json(j.at("array"));
        if (j.contains("bands")) {
            require_keys(j.at("bands"), {"measured", "target"}, "bands");
            c.band_m = band_from_json(j.at("bands").at("measured"), "bands.measured");
            c.band_e = band_from_json(j.at("bands").at("target"), "bands.target");
        }
        if (j.contains("environments")) {
            c.environments.clear();
            for (const auto& ej : j.at("environments"))
                c.environments.push_back(environment_from_json(ej));
        }
        if (j.contains("sage")) c.sage = sage_from_json(j.at("sage"));
        if (j.contains("dbscan")) {
            require_keys(j.at("dbscan"), {"eps", "min_pts"}, "dbscan");
            c.dbscan_eps = get_or(j.at("dbscan"), "eps", c.dbscan_eps);
            c.dbscan_min_pts = get_or(j.at("dbscan"), "min_pts", c.dbscan_min_pts);
        }
        if (j.contains("oversampling")) c.os = oversampling_from_json(j.at("oversampling"));
        if (j.contains("alignment_mode"))
            c.alignment = parse_alignment_mode(j.at("alignment_mode").get<std::string>());
        if (j.contains("mlp")) {
            require_keys(j.at("mlp"), {"hidden_dims", "init_seed"}, "mlp");
            c.hidden_dims = get_or(j.at("mlp"), "hidden_dims", c.hidden_dims);
            c.mlp_init_seed = get_or(j.at("mlp"), "init_seed", c.mlp_init_seed);
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            require_keys(t,
                         {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon",
                          "validation_fraction", "shuffle_seed"},
                         "train");
            c.train.epochs = get_or(t, "epochs", c.train.epochs);
            c.train.batch_size = get_or(t, "batch_size", c.train.batch_size);
            c.train.learning_rate = get_or(t, "learning_rate", c.train.learning_rate);
            c.train.beta1 = get_or(t, "beta1", c.train.beta1);
            c.train.beta2 = get_or(t, "beta2", c.train.beta2);
            c.train.epsilon = get_or(t, "epsilon", c.train.epsilon);
            c.train.validation_fraction =
                get_or(t, "validation_fraction", c.train.validation_fraction);
            c.train.shuffle_seed = get_or(t, "shuffle_seed", c.train.shuffle_seed);
        }
        if (j.contains("wasserstein")) {
            const json& w = j.at("wasserstein");
            require_keys(w, {"max_n", "repeats", "seed"}, "wasserstein");
            c.w1.max_n = get_or(w, "max_n", c.w1.max_n);
            c.w1.repeats = get_or(w, "repeats", c.w1.repeats);
            c.w1.seed = get_or(w, "seed", c.w1.seed);
        }
        if (j.contains("eval")) {
            require_keys(j.at("eval"), {"dominant_threshold"}, "eval");
            c.dominant_threshold = get_or(j.at("eval"), "dominant_threshold", c.dominant_threshold);
        }
    } catch (const json::exception& e) {
        throw ConfigError("config field error: " + std::string(e.what()));
    }
    c.validate();
    return c;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << full_json(cfg).dump(2) << "\n";
}

}  // namespace chanex
