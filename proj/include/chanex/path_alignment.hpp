#pragma once

#include <string>
#include <utility>
#include <vector>

#include "chanex/core_model.hpp"

namespace chanex {

/// Grid refinement multiples for the angular/delay peak scans.
struct OversamplingConfig {
    int o_h = 2;
    int o_v = 2;
    int o_d = 2;

    void validate() const;
};

/// Oversampled angular-delay peak indices of one extracted path.
/// n1 in [0, o_h*n_h), n2 in [0, o_v*n_v), n3 in [0, o_d*k_m).
struct PeakPosition {
    int n1 = 0;
    int n2 = 0;
    int n3 = 0;

    bool operator==(const PeakPosition&) const = default;
};

/// Unit-modulus phase mask plus the target-band phase rotation it embeds.
struct AlignmentOperator {
    CMat mask;
    Band band = Band::measured;
    double phase_rotation = 0.0;  // radians, target band only
};

// Scanning vectors. Horizontal/vertical ramps are length n_h/n_v with phase
// increment n/(O*N); the combined angular vector is their Kronecker product
// in the canonical horizontal-major antenna order.
CVec scan_vector_angular(int n1, int n2, const ArrayConfig& array, const OversamplingConfig& os);

/// Delay-domain scan vector: `length` entries at phase increment
/// n3/(o_d*k_m). For the measured band length = k_m; the label mask
/// re-samples the same increment over k_e entries.
CVec scan_vector_delay(int n3, int length, int k_m, const OversamplingConfig& os);

/// Independent angular and delay argmax over the oversampled scan grids.
/// Ties break to the lowest linear index. Throws on a zero matrix.
PeakPosition find_peak(const CMat& a_hat, const ArrayConfig& array, const BandConfig& band,
                       const OversamplingConfig& os);

/// U_l: entry (r, k) = conj(w_angular[r]) * w_delay[k].
AlignmentOperator build_measured_mask(const PeakPosition& peak, const ArrayConfig& array,
                                      const BandConfig& band_m, const OversamplingConfig& os);

/// Phase rotation beta(n3) = 2*pi*(f1_e - f1_m)*n3/(o_d*k_m*delta_f).
double label_phase_rotation(int n3, const BandConfig& band_m, const BandConfig& band_e,
                            const OversamplingConfig& os);

/// V_l = e^{j*beta(n3)} * (angular mask over k_e columns) .* (target delay mask).
AlignmentOperator build_label_mask(const PeakPosition& peak, const ArrayConfig& array,
                                   const BandConfig& band_m, const BandConfig& band_e,
                                   const OversamplingConfig& os);

/// Aligned response U .* A_hat together with the found peak.
std::pair<CMat, PeakPosition> align_path(const CMat& a_hat, const ArrayConfig& array,
                                         const BandConfig& band, const OversamplingConfig& os);

/// Co-transformed label V .* B_hat.
CMat co_transform_label(const CMat& b_hat, const PeakPosition& peak, const ArrayConfig& array,
                        const BandConfig& band_m, const BandConfig& band_e,
                        const OversamplingConfig& os);

/// Sum of conj(V_l) .* output_l over paths.
CMat co_compensate(const std::vector<CMat>& outputs, const std::vector<PeakPosition>& peaks,
                   const ArrayConfig& array, const BandConfig& band_m, const BandConfig& band_e,
                   const OversamplingConfig& os);

enum class AlignmentMode { none, delay_only, angular_only, full };

AlignmentMode parse_alignment_mode(const std::string& name);
std::string alignment_mode_name(AlignmentMode mode);

/// Zeroes the peak coordinates a mode does not act on. Valid because the
/// angular and delay argmax problems are independent.
PeakPosition restrict_peak(const PeakPosition& peak, AlignmentMode mode);

/// Alignment restricted to a subset of coordinates. Inactive peak
/// coordinates stay 0, so the induced masks reduce to the active factors.
struct Aligner {
    AlignmentMode mode = AlignmentMode::full;
    OversamplingConfig os;

    PeakPosition find(const CMat& a_hat, const ArrayConfig& array, const BandConfig& band_m) const;
    std::pair<CMat, PeakPosition> align(const CMat& a_hat, const ArrayConfig& array,
                                        const BandConfig& band_m) const;
    /// Mask application for an already-known peak (e.g. from a stored
    /// extraction record).
    CMat apply_measured(const CMat& a_hat, const PeakPosition& peak, const ArrayConfig& array,
                        const BandConfig& band_m) const;
    CMat transform_label(const CMat& b_hat, const PeakPosition& peak, const ArrayConfig& array,
                         const BandConfig& band_m, const BandConfig& band_e) const;
    CMat compensate(const std::vector<CMat>& outputs, const std::vector<PeakPosition>& peaks,
                    const ArrayConfig& array, const BandConfig& band_m,
                    const BandConfig& band_e) const;
};

}  // namespace chanex
