#pragma once

#include <string>
#include <vector>

#include "chanex/env_sim.hpp"
#include "chanex/evaluation.hpp"
#include "chanex/extrapolator.hpp"

namespace chanex {

/// One experiment configuration; the content digest is stamped into every
/// artifact so that stages from different configurations cannot be mixed.
struct RunConfig {
    ArrayConfig array;
    BandConfig band_m;
    BandConfig band_e;
    std::vector<EnvironmentSpec> environments;
    SageConfig sage;
    double dbscan_eps = 0.5;
    int dbscan_min_pts = 1;
    OversamplingConfig os;
    AlignmentMode alignment = AlignmentMode::full;
    std::vector<int> hidden_dims = {256, 256, 256};
    std::uint64_t mlp_init_seed = 7;
    TrainConfig train;
    W1Config w1;
    double dominant_threshold = 0.999;
    std::uint64_t seed = 1;

    void validate() const;
    ExtractionConfig extraction() const;
    Aligner aligner() const;
    /// MLP dims for a (in_band -> out_band) mapping at this array size.
    MlpConfig mlp_for(const BandConfig& in_band, const BandConfig& out_band) const;
    const EnvironmentSpec& environment(const std::string& name) const;

    std::string canonical_json() const;
    std::string digest() const;  // FNV-1a 64 of the canonical serialization
};

/// Desk-scale defaults with the three shipped environment presets.
RunConfig default_run_config();

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "CHANEX_CONFIG";

}  // namespace chanex
