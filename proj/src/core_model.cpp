#include "chanex/core_model.hpp"

#include <unsupported/Eigen/KroneckerProduct>

namespace chanex {

void ArrayConfig::validate() const {
    if (n_h < 1 || n_v < 1) throw ConfigError("ArrayConfig: antenna counts must be >= 1");
    if (spacing_ratio <= 0.0) throw ConfigError("ArrayConfig: spacing_ratio must be positive");
}

void BandConfig::validate() const {
    if (n_subcarriers < 1) throw ConfigError("BandConfig: n_subcarriers must be >= 1");
    if (delta_f <= 0.0) throw ConfigError("BandConfig: delta_f must be positive");
    if (f_start < 0.0) throw ConfigError("BandConfig: f_start must be non-negative");
}

double horizontal_cycles(double azimuth, double elevation, const ArrayConfig& array) {
    return array.spacing_ratio * std::sin(azimuth) * std::sin(elevation);
}

double vertical_cycles(double elevation, const ArrayConfig& array) {
    return array.spacing_ratio * std::cos(elevation);
}

CVec phasor_ramp(double w, int n) {
    CVec v(n);
    for (int k = 0; k < n; ++k) {
        const double phase = kTwoPi * k * w;
        v(k) = cplx(std::cos(phase), std::sin(phase));
    }
    return v;
}

CVec steering_from_cycles(double u, double v, const ArrayConfig& array) {
    const CVec ah = phasor_ramp(u, array.n_h) / std::sqrt(double(array.n_h));
    const CVec av = phasor_ramp(v, array.n_v) / std::sqrt(double(array.n_v));
    CVec a(array.total());
    for (int p = 0; p < array.n_h; ++p)
        for (int q = 0; q < array.n_v; ++q) a(p * array.n_v + q) = ah(p) * av(q);
    return a;
}

CVec array_response(double azimuth, double elevation, const ArrayConfig& array) {
    return steering_from_cycles(horizontal_cycles(azimuth, elevation, array),
                                vertical_cycles(elevation, array), array);
}

CVec band_steering(double delay, const BandConfig& band) {
    return phasor_ramp(band.delta_f * delay, band.n_subcarriers);
}

CMat path_response(const PathParams& path, const ArrayConfig& array, const BandConfig& band) {
    const double phase = -kTwoPi * band.f_start * path.delay;
    const cplx coeff = path.gain * cplx(std::cos(phase), std::sin(phase));
    const CVec a = array_response(path.azimuth, path.elevation, array);
    const CVec b = band_steering(path.delay, band);
    return coeff * a * b.adjoint();
}

CMat synthesize_channel(const std::vector<PathParams>& paths, const ArrayConfig& array,
                        const BandConfig& band) {
    if (paths.empty()) throw std::invalid_argument("synthesize_channel: empty path list");
    CMat h = CMat::Zero(array.total(), band.n_subcarriers);
    for (const auto& p : paths) h += path_response(p, array, band);
    return h;
}

namespace {

CMat dft_matrix(int n) {
    CMat f(n, n);
    const double scale = 1.0 / std::sqrt(double(n));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double phase = -kTwoPi * a * b / n;
            f(a, b) = scale * cplx(std::cos(phase), std::sin(phase));
        }
    return f;
}

}  // namespace

CMat angular_delay_transform(const CMat& h, const ArrayConfig& array, TransformDirection dir) {
    if (h.rows() != array.total())
        throw std::invalid_argument("angular_delay_transform: row count does not match array");
    const CMat t = Eigen::kroneckerProduct(dft_matrix(array.n_h), dft_matrix(array.n_v));
    const CMat fk = dft_matrix(static_cast<int>(h.cols()));
    if (dir == TransformDirection::forward) return t * h * fk.adjoint();
    return t.adjoint() * h * fk;
}

CMat add_awgn(const CMat& h, double snr_db, std::uint64_t seed) {
    if (!std::isfinite(snr_db)) return h;
    const double signal_power = h.squaredNorm() / double(h.size());
    const double sigma = std::sqrt(signal_power / from_db(snr_db));
    Rng rng(seed);
    CMat out = h;
    for (Eigen::Index k = 0; k < out.cols(); ++k)
        for (Eigen::Index n = 0; n < out.rows(); ++n) out(n, k) += sigma * rng.normal_cplx();
    return out;
}

CMat normalize_channel(const CMat& h) {
    const double norm = h.norm();
    if (norm <= 0.0) throw std::invalid_argument("normalize_channel: zero channel");
    return std::sqrt(double(h.size())) / norm * h;
}

}  // namespace chanex
