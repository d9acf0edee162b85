#include "chanex/env_sim.hpp"

#include <algorithm>

namespace chanex {

void Interval::validate(const char* what) const {
    if (!(lo <= hi)) throw ConfigError(std::string(what) + ": interval lo must be <= hi");
}

void EnvironmentSpec::validate() const {
    if (name.empty()) throw ConfigError("EnvironmentSpec: name must be non-empty");
    if (n_paths_min < 1 || n_paths_max < n_paths_min)
        throw ConfigError("EnvironmentSpec: invalid n_paths range");
    delay_range.validate("delay_range");
    azimuth_range.validate("azimuth_range");
    elevation_range.validate("elevation_range");
    twin_delay_offset_range.validate("twin_delay_offset_range");
    if (delay_range.lo < 0.0) throw ConfigError("EnvironmentSpec: delays must be non-negative");
    if (elevation_range.lo <= 0.0 || elevation_range.hi >= kPi)
        throw ConfigError("EnvironmentSpec: elevation range must lie in (0, pi)");
    if (azimuth_range.lo <= -kPi || azimuth_range.hi > kPi)
        throw ConfigError("EnvironmentSpec: azimuth range must lie in (-pi, pi]");
    if (gain_decay <= 0.0) throw ConfigError("EnvironmentSpec: gain_decay must be positive");
    if (ground_twin_prob < 0.0 || ground_twin_prob > 1.0)
        throw ConfigError("EnvironmentSpec: ground_twin_prob must be in [0, 1]");
}

namespace {

double draw(Rng& rng, const Interval& iv) {
    return iv.lo == iv.hi ? iv.lo : rng.uniform(iv.lo, iv.hi);
}

double wrap_azimuth(double az) {
    while (az > kPi) az -= kTwoPi;
    while (az <= -kPi) az += kTwoPi;
    return az;
}

}  // namespace

std::vector<PathParams> sample_paths(const EnvironmentSpec& spec, Rng& rng) {
    const long n = rng.uniform_int(spec.n_paths_min, spec.n_paths_max);
    std::vector<PathParams> paths;
    paths.reserve(2 * n);
    for (long l = 0; l < n; ++l) {
        PathParams p;
        p.delay = draw(rng, spec.delay_range);
        p.azimuth = draw(rng, spec.azimuth_range);
        p.elevation = draw(rng, spec.elevation_range);
        const double mag = std::exp(-p.delay / spec.gain_decay);
        const double phase = rng.uniform(-kPi, kPi);
        p.gain = mag * cplx(std::cos(phase), std::sin(phase));
        paths.push_back(p);
        if (rng.uniform01() < spec.ground_twin_prob) {
            PathParams twin;
            twin.delay = p.delay + draw(rng, spec.twin_delay_offset_range);
            twin.azimuth = wrap_azimuth(p.azimuth + rng.uniform(-0.02, 0.02));
            twin.elevation =
                std::clamp(p.elevation + rng.uniform(-0.02, 0.02), 1e-3, kPi - 1e-3);
            const double twin_mag = mag * rng.uniform(0.4, 0.9);
            const double twin_phase = rng.uniform(-kPi, kPi);
            twin.gain = twin_mag * cplx(std::cos(twin_phase), std::sin(twin_phase));
            paths.push_back(twin);
        }
    }
    return paths;
}

Dataset generate_dataset(const EnvironmentSpec& spec, int size, const ArrayConfig& array,
                         const BandConfig& band_m, const BandConfig& band_e,
                         std::optional<double> snr_db, unsigned threads) {
    spec.validate();
    array.validate();
    band_m.validate();
    band_e.validate();
    if (band_m.delta_f != band_e.delta_f)
        throw ConfigError("generate_dataset: bands must share delta_f");
    if (size < 1) throw ConfigError("generate_dataset: size must be >= 1");

    Dataset ds;
    ds.env_name = spec.name;
    ds.array = array;
    ds.band_m = band_m;
    ds.band_e = band_e;
    ds.snr_db = snr_db;
    ds.generation_seed = spec.seed;
    ds.samples.resize(size);

    parallel_for(static_cast<std::size_t>(size), threads, [&](std::size_t i) {
        Rng rng(derive_seed(spec.seed, 3 * i));
        Sample s;
        s.true_paths = sample_paths(spec, rng);
        CMat h_m = synthesize_channel(s.true_paths, array, band_m);
        CMat h_e = synthesize_channel(s.true_paths, array, band_e);
        if (snr_db) {
            h_m = add_awgn(h_m, *snr_db, derive_seed(spec.seed, 3 * i + 1));
            h_e = add_awgn(h_e, *snr_db, derive_seed(spec.seed, 3 * i + 2));
        }
        s.scale_m = std::sqrt(double(h_m.size())) / h_m.norm();
        s.scale_e = std::sqrt(double(h_e.size())) / h_e.norm();
        s.h_measured = normalize_channel(h_m);
        s.h_target = normalize_channel(h_e);
        ds.samples[i] = std::move(s);
    });
    return ds;
}

int dominant_path_count(const std::vector<PathParams>& paths, double threshold) {
    if (paths.empty()) throw std::invalid_argument("dominant_path_count: empty path list");
    if (threshold <= 0.0 || threshold > 1.0)
        throw std::invalid_argument("dominant_path_count: threshold must be in (0, 1]");
    std::vector<double> power;
    power.reserve(paths.size());
    double total = 0.0;
    for (const auto& p : paths) {
        power.push_back(std::norm(p.gain));
        total += power.back();
    }
    std::sort(power.begin(), power.end(), std::greater<>());
    double acc = 0.0;
    for (std::size_t m = 0; m < power.size(); ++m) {
        acc += power[m];
        if (acc >= threshold * total) return static_cast<int>(m + 1);
    }
    return static_cast<int>(power.size());
}

std::vector<PathParams> scaled_paths(const Sample& sample, Band band) {
    const double scale = band == Band::measured ? sample.scale_m : sample.scale_e;
    std::vector<PathParams> out = sample.true_paths;
    for (auto& p : out) p.gain *= scale;
    return out;
}

EnvironmentSpec environment_preset(const std::string& name) {
    EnvironmentSpec s;
    s.name = name;
    s.twin_delay_offset_range = {5e-9, 13.3e-9};
    if (name == "env-sparse") {
        s.n_paths_min = 1;
        s.n_paths_max = 4;
        s.delay_range = {20e-9, 150e-9};
        s.azimuth_range = {-kPi / 3, kPi / 3};
        s.elevation_range = {1.22, 1.92};
        s.gain_decay = 150e-9;
        s.ground_twin_prob = 0.25;
        s.seed = 1001;
    } else if (name == "env-med") {
        s.n_paths_min = 2;
        s.n_paths_max = 8;
        s.delay_range = {60e-9, 250e-9};
        s.azimuth_range = {-kPi / 2, kPi / 2};
        s.elevation_range = {1.05, 2.09};
        s.gain_decay = 200e-9;
        s.ground_twin_prob = 0.5;
        s.seed = 1002;
    } else if (name == "env-rich") {
        s.n_paths_min = 4;
        s.n_paths_max = 15;
        s.delay_range = {100e-9, 360e-9};
        s.azimuth_range = {-2.4, 2.4};
        s.elevation_range = {0.87, 2.27};
        s.gain_decay = 250e-9;
        s.ground_twin_prob = 0.7;
        s.seed = 1003;
    } else {
        throw ConfigError("unknown environment preset: " + name);
    }
    return s;
}

std::vector<std::string> environment_preset_names() {
    return {"env-sparse", "env-med", "env-rich"};
}

}  // namespace chanex
