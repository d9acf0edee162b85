#include "chanex/path_alignment.hpp"

namespace chanex {

void OversamplingConfig::validate() const {
    if (o_h < 1 || o_v < 1 || o_d < 1)
        throw ConfigError("OversamplingConfig: factors must be >= 1");
}

CVec scan_vector_angular(int n1, int n2, const ArrayConfig& array, const OversamplingConfig& os) {
    const CVec wh = phasor_ramp(double(n1) / (os.o_h * array.n_h), array.n_h);
    const CVec wv = phasor_ramp(double(n2) / (os.o_v * array.n_v), array.n_v);
    CVec w(array.total());
    for (int p = 0; p < array.n_h; ++p)
        for (int q = 0; q < array.n_v; ++q) w(p * array.n_v + q) = wh(p) * wv(q);
    return w;
}

CVec scan_vector_delay(int n3, int length, int k_m, const OversamplingConfig& os) {
    return phasor_ramp(double(n3) / (os.o_d * k_m), length);
}

namespace {

void check_peak_range(const PeakPosition& peak, const ArrayConfig& array, int k_m,
                      const OversamplingConfig& os) {
    if (peak.n1 < 0 || peak.n1 >= os.o_h * array.n_h || peak.n2 < 0 ||
        peak.n2 >= os.o_v * array.n_v || peak.n3 < 0 || peak.n3 >= os.o_d * k_m)
        throw std::invalid_argument("peak position out of scan-grid range");
}

int argmax_first(const Eigen::VectorXd& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

std::pair<int, int> angular_argmax(const CMat& a_hat, const ArrayConfig& array,
                                   const OversamplingConfig& os) {
    const int gh = os.o_h * array.n_h, gv = os.o_v * array.n_v;
    CMat w(array.total(), gh * gv);
    for (int n1 = 0; n1 < gh; ++n1)
        for (int n2 = 0; n2 < gv; ++n2)
            w.col(n1 * gv + n2) = scan_vector_angular(n1, n2, array, os);
    const Eigen::VectorXd power = (w.adjoint() * a_hat).rowwise().squaredNorm();
    const int best = argmax_first(power);
    return {best / gv, best % gv};
}

int delay_argmax(const CMat& a_hat, int k_m, const OversamplingConfig& os) {
    const int gd = os.o_d * k_m;
    CMat w(a_hat.cols(), gd);
    for (int n3 = 0; n3 < gd; ++n3)
        w.col(n3) = scan_vector_delay(n3, static_cast<int>(a_hat.cols()), k_m, os);
    const Eigen::VectorXd power = (a_hat * w).colwise().squaredNorm();
    return argmax_first(power);
}

}  // namespace

PeakPosition find_peak(const CMat& a_hat, const ArrayConfig& array, const BandConfig& band,
                       const OversamplingConfig& os) {
    if (a_hat.rows() != array.total() || a_hat.cols() != band.n_subcarriers)
        throw std::invalid_argument("find_peak: dimension mismatch");
    if (a_hat.norm() <= 0.0) throw std::invalid_argument("find_peak: zero matrix");
    auto [n1, n2] = angular_argmax(a_hat, array, os);
    const int n3 = delay_argmax(a_hat, band.n_subcarriers, os);
    return {n1, n2, n3};
}

AlignmentOperator build_measured_mask(const PeakPosition& peak, const ArrayConfig& array,
                                      const BandConfig& band_m, const OversamplingConfig& os) {
    check_peak_range(peak, array, band_m.n_subcarriers, os);
    const CVec wa = scan_vector_angular(peak.n1, peak.n2, array, os);
    const CVec wd = scan_vector_delay(peak.n3, band_m.n_subcarriers, band_m.n_subcarriers, os);
    AlignmentOperator op;
    op.mask = wa.conjugate() * wd.transpose();
    op.band = Band::measured;
    return op;
}

double label_phase_rotation(int n3, const BandConfig& band_m, const BandConfig& band_e,
                            const OversamplingConfig& os) {
    return kTwoPi * (band_e.f_start - band_m.f_start) * n3 /
           (os.o_d * band_m.n_subcarriers * band_m.delta_f);
}

AlignmentOperator build_label_mask(const PeakPosition& peak, const ArrayConfig& array,
                                   const BandConfig& band_m, const BandConfig& band_e,
                                   const OversamplingConfig& os) {
    check_peak_range(peak, array, band_m.n_subcarriers, os);
    const CVec wa = scan_vector_angular(peak.n1, peak.n2, array, os);
    const CVec we = scan_vector_delay(peak.n3, band_e.n_subcarriers, band_m.n_subcarriers, os);
    const double beta = label_phase_rotation(peak.n3, band_m, band_e, os);
    AlignmentOperator op;
    op.mask = cplx(std::cos(beta), std::sin(beta)) * (wa.conjugate() * we.transpose());
    op.band = Band::target;
    op.phase_rotation = beta;
    return op;
}

std::pair<CMat, PeakPosition> align_path(const CMat& a_hat, const ArrayConfig& array,
                                         const BandConfig& band, const OversamplingConfig& os) {
    const PeakPosition peak = find_peak(a_hat, array, band, os);
    const AlignmentOperator u = build_measured_mask(peak, array, band, os);
    return {u.mask.cwiseProduct(a_hat), peak};
}

CMat co_transform_label(const CMat& b_hat, const PeakPosition& peak, const ArrayConfig& array,
                        const BandConfig& band_m, const BandConfig& band_e,
                        const OversamplingConfig& os) {
    if (b_hat.rows() != array.total() || b_hat.cols() != band_e.n_subcarriers)
        throw std::invalid_argument("co_transform_label: dimension mismatch");
    const AlignmentOperator v = build_label_mask(peak, array, band_m, band_e, os);
    return v.mask.cwiseProduct(b_hat);
}

CMat co_compensate(const std::vector<CMat>& outputs, const std::vector<PeakPosition>& peaks,
                   const ArrayConfig& array, const BandConfig& band_m, const BandConfig& band_e,
                   const OversamplingConfig& os) {
    if (outputs.size() != peaks.size())
        throw std::invalid_argument("co_compensate: outputs/peaks length mismatch");
    CMat sum = CMat::Zero(array.total(), band_e.n_subcarriers);
    for (std::size_t l = 0; l < outputs.size(); ++l) {
        if (outputs[l].rows() != sum.rows() || outputs[l].cols() != sum.cols())
            throw std::invalid_argument("co_compensate: output dimension mismatch");
        const AlignmentOperator v = build_label_mask(peaks[l], array, band_m, band_e, os);
        sum += v.mask.conjugate().cwiseProduct(outputs[l]);
    }
    return sum;
}

AlignmentMode parse_alignment_mode(const std::string& name) {
    if (name == "none") return AlignmentMode::none;
    if (name == "delay_only" || name == "delay") return AlignmentMode::delay_only;
    if (name == "angular_only" || name == "angular") return AlignmentMode::angular_only;
    if (name == "full") return AlignmentMode::full;
    throw ConfigError("unknown alignment mode: " + name);
}

std::string alignment_mode_name(AlignmentMode mode) {
    switch (mode) {
        case AlignmentMode::none: return "none";
        case AlignmentMode::delay_only: return "delay_only";
        case AlignmentMode::angular_only: return "angular_only";
        case AlignmentMode::full: return "full";
    }
    return "unknown";
}

PeakPosition restrict_peak(const PeakPosition& peak, AlignmentMode mode) {
    PeakPosition out;
    if (mode == AlignmentMode::full || mode == AlignmentMode::angular_only) {
        out.n1 = peak.n1;
        out.n2 = peak.n2;
    }
    if (mode == AlignmentMode::full || mode == AlignmentMode::delay_only) out.n3 = peak.n3;
    return out;
}

PeakPosition Aligner::find(const CMat& a_hat, const ArrayConfig& array,
                           const BandConfig& band_m) const {
    PeakPosition peak;
    if (mode == AlignmentMode::none) return peak;
    if (mode == AlignmentMode::full || mode == AlignmentMode::angular_only) {
        if (a_hat.norm() <= 0.0) throw std::invalid_argument("Aligner: zero matrix");
        auto [n1, n2] = angular_argmax(a_hat, array, os);
        peak.n1 = n1;
        peak.n2 = n2;
    }
    if (mode == AlignmentMode::full || mode == AlignmentMode::delay_only) {
        if (a_hat.norm() <= 0.0) throw std::invalid_argument("Aligner: zero matrix");
        peak.n3 = delay_argmax(a_hat, band_m.n_subcarriers, os);
    }
    return peak;
}

std::pair<CMat, PeakPosition> Aligner::align(const CMat& a_hat, const ArrayConfig& array,
                                             const BandConfig& band_m) const {
    const PeakPosition peak = find(a_hat, array, band_m);
    if (mode == AlignmentMode::none) return {a_hat, peak};
    const AlignmentOperator u = build_measured_mask(peak, array, band_m, os);
    return {u.mask.cwiseProduct(a_hat), peak};
}

CMat Aligner::apply_measured(const CMat& a_hat, const PeakPosition& peak,
                             const ArrayConfig& array, const BandConfig& band_m) const {
    if (mode == AlignmentMode::none) return a_hat;
    const AlignmentOperator u = build_measured_mask(peak, array, band_m, os);
    return u.mask.cwiseProduct(a_hat);
}

CMat Aligner::transform_label(const CMat& b_hat, const PeakPosition& peak,
                              const ArrayConfig& array, const BandConfig& band_m,
                              const BandConfig& band_e) const {
    if (mode == AlignmentMode::none) return b_hat;
    return co_transform_label(b_hat, peak, array, band_m, band_e, os);
}

CMat Aligner::compensate(const std::vector<CMat>& outputs, const std::vector<PeakPosition>& peaks,
                         const ArrayConfig& array, const BandConfig& band_m,
                         const BandConfig& band_e) const {
    if (mode == AlignmentMode::none) {
        if (outputs.size() != peaks.size())
            throw std::invalid_argument("co_compensate: outputs/peaks length mismatch");
        CMat sum = CMat::Zero(array.total(), band_e.n_subcarriers);
        for (const auto& out : outputs) sum += out;
        return sum;
    }
    return co_compensate(outputs, peaks, array, band_m, band_e, os);
}

}  // namespace chanex
