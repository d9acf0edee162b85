#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chanex/core_model.hpp"

namespace chanex {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    void validate(const char* what) const;
};

/// Synthetic multipath environment. Path counts, delay and angle supports
/// shift across presets; ground-reflection twins model unresolvable pairs.
struct EnvironmentSpec {
    std::string name;
    int n_paths_min = 1;
    int n_paths_max = 1;
    Interval delay_range;             // seconds
    Interval azimuth_range;           // radians, within (-pi, pi]
    Interval elevation_range;         // radians, within (0, pi)
    double gain_decay = 200e-9;       // seconds; |gain| = exp(-delay/gain_decay)
    double ground_twin_prob = 0.0;    // per-path probability of an attached twin
    Interval twin_delay_offset_range; // seconds
    std::uint64_t seed = 1;

    void validate() const;
};

struct Sample {
    CMat h_measured;
    CMat h_target;
    std::vector<PathParams> true_paths;  // raw gains, pre-normalization
    double scale_m = 1.0;                // normalization factor applied per band
    double scale_e = 1.0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::string env_name;
    ArrayConfig array;
    BandConfig band_m;
    BandConfig band_e;
    std::optional<double> snr_db;
    std::uint64_t generation_seed = 0;
};

/// Draws one multipath scene from the spec's marginals.
std::vector<PathParams> sample_paths(const EnvironmentSpec& spec, Rng& rng);

/// size samples; both bands synthesized from the same path draw, optionally
/// noised, then normalized per band. Bit-identical for any thread count.
Dataset generate_dataset(const EnvironmentSpec& spec, int size, const ArrayConfig& array,
                         const BandConfig& band_m, const BandConfig& band_e,
                         std::optional<double> snr_db, unsigned threads = 1);

/// Minimum number of strongest paths holding >= threshold of total power.
int dominant_path_count(const std::vector<PathParams>& paths, double threshold);

/// True paths rescaled into the stored (normalized) channel's scale.
std::vector<PathParams> scaled_paths(const Sample& sample, Band band);

EnvironmentSpec environment_preset(const std::string& name);
std::vector<std::string> environment_preset_names();

// Dataset container: meta.json + channels_m.bin/channels_e.bin +
// paths.jsonl in one directory. Round-trips bit-exactly.
void save_dataset(const Dataset& ds, const std::string& dir, const std::string& config_digest);
Dataset load_dataset(const std::string& dir, std::string* config_digest = nullptr);

}  // namespace chanex
