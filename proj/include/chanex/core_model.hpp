#pragma once

#include <cstdint>
#include <vector>

#include "chanex/common.hpp"

namespace chanex {

enum class Band { measured, target };

/// Uniform planar array: n_h antennas horizontally, n_v vertically,
/// element spacing expressed as a fraction of the wavelength.
struct ArrayConfig {
    int n_h = 1;
    int n_v = 1;
    double spacing_ratio = 0.5;

    int total() const { return n_h * n_v; }
    void validate() const;
};

/// One OFDM band: first subcarrier frequency, subcarrier count and spacing.
/// Measured and target bands are expected to share delta_f.
struct BandConfig {
    double f_start = 0.0;    // Hz
    int n_subcarriers = 1;   // K
    double delta_f = 0.0;    // Hz

    void validate() const;
};

/// One propagation path of the geometric channel model.
struct PathParams {
    cplx gain;               // complex linear amplitude
    double delay = 0.0;      // seconds, >= 0
    double azimuth = 0.0;    // radians in (-pi, pi]
    double elevation = 0.0;  // radians in (0, pi)
};

// Phase-domain coordinates (cycles per antenna / per subcarrier). The array
// and band responses depend on the geometry only through these.
double horizontal_cycles(double azimuth, double elevation, const ArrayConfig& array);
double vertical_cycles(double elevation, const ArrayConfig& array);

/// Unit-norm UPA steering vector from phase coordinates, horizontal index
/// major: entry p*n_v + q carries phase 2*pi*(p*u + q*v).
CVec steering_from_cycles(double u, double v, const ArrayConfig& array);

/// Phasor ramp [e^{j*2*pi*k*w}], k = 0..n-1.
CVec phasor_ramp(double w, int n);

/// Unit-norm array response a(azimuth, elevation) = a_h kron a_v.
CVec array_response(double azimuth, double elevation, const ArrayConfig& array);

/// Frequency response vector b(tau), entry k = e^{j*2*pi*k*delta_f*tau}.
CVec band_steering(double delay, const BandConfig& band);

/// Response of a single path: gain * e^{-j*2*pi*f_start*tau} * a * b^H.
CMat path_response(const PathParams& path, const ArrayConfig& array, const BandConfig& band);

/// Sum of path responses. Throws on an empty path list.
CMat synthesize_channel(const std::vector<PathParams>& paths, const ArrayConfig& array,
                        const BandConfig& band);

enum class TransformDirection { forward, inverse };

/// Angular-delay transform: forward is T*H*F_K^H with T = F_{n_h} kron F_{n_v}
/// and F the 1/sqrt(n)-normalized DFT; inverse undoes it. Unitary.
CMat angular_delay_transform(const CMat& h, const ArrayConfig& array, TransformDirection dir);

/// Adds i.i.d. circular complex Gaussian noise at the requested per-sample
/// SNR. A non-finite snr_db disables noise. Deterministic under seed.
CMat add_awgn(const CMat& h, double snr_db, std::uint64_t seed);

/// Scales to Frobenius norm sqrt(rows*cols). Throws on zero input.
CMat normalize_channel(const CMat& h);

}  // namespace chanex
