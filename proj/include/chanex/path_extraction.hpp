#pragma once

#include <vector>

#include "chanex/core_model.hpp"
#include "chanex/path_alignment.hpp"

namespace chanex {

/// One SAGE sub-path estimate. The delay lives in the unambiguous
/// range [0, 1/delta_f); the gain is the linear amplitude alpha.
struct SubPathEstimate {
    cplx gain;
    double delay = 0.0;
    double azimuth = 0.0;
    double elevation = 0.0;
    Band band = Band::measured;
};

struct SageConfig {
    int max_subpaths = 24;
    double residual_stop_db = -40.0;
    // Coarse detection grid sizes; 0 selects twice the aperture per
    // dimension (2*n_h, 2*n_v, 2*K).
    int grid_h = 0;
    int grid_v = 0;
    int grid_d = 0;
    int refine_iters = 20;   // golden-section iterations per coordinate pass
    int refine_cycles = 3;   // coordinate passes with shrinking brackets
    int em_sweeps = 3;

    void validate() const;
};

struct SageResult {
    std::vector<SubPathEstimate> subpaths;
    // Residual power after each component addition and after each EM
    // sweep. Non-increasing by construction.
    std::vector<double> residual_trace;
    double total_power = 0.0;
};

/// Serial-interference-cancellation detection with interleaved SAGE
/// expectation-maximization sweeps after every added component.
/// Throws on zero input.
SageResult sage_estimate(const CMat& h, const ArrayConfig& array, const BandConfig& band,
                         const SageConfig& cfg);

/// Wrapped-phase coordinates (pi*sin(az)*sin(el), pi*cos(el), 2*pi*delta_f*tau).
Eigen::Vector3d path_phase_vector(double azimuth, double elevation, double delay, double delta_f);
Eigen::Vector3d subpath_omega(const SubPathEstimate& sp, double delta_f);

/// sqrt(sum_i |e^{j*w_k,i} - e^{j*w_l,i}|^2); a metric on the phase torus.
double path_distance(const Eigen::Vector3d& omega_k, const Eigen::Vector3d& omega_l);

/// DBSCAN over arbitrary 3-vectors under path_distance. Noise points
/// (possible only for min_pts > 1) are appended as singleton clusters so
/// the result is always a partition. Members are sorted ascending.
std::vector<std::vector<int>> dbscan_cluster(const std::vector<Eigen::Vector3d>& points,
                                             double eps, int min_pts);

std::vector<std::vector<int>> dbscan_subpaths(const std::vector<SubPathEstimate>& subpaths,
                                              double delta_f, double eps, int min_pts);

/// Per-band index sets of one jointly clustered path; either side may be
/// empty when a cluster contains sub-paths of only one band.
struct JointCluster {
    std::vector<int> measured;
    std::vector<int> target;
};

/// Clusters the union of both bands' sub-paths, then splits each cluster
/// back into per-band index sets. Throws if either list is empty.
std::vector<JointCluster> joint_cluster(const std::vector<SubPathEstimate>& subpaths_m,
                                        const std::vector<SubPathEstimate>& subpaths_e,
                                        double delta_f, double eps, int min_pts);

struct ExtractedPath {
    std::vector<int> member_indices;
    CMat response;
    Band band = Band::measured;
};

/// Coherent sum of the member sub-path responses. Throws on an empty cluster.
ExtractedPath aggregate_cluster(const std::vector<SubPathEstimate>& subpaths,
                                const std::vector<int>& indices, const ArrayConfig& array,
                                const BandConfig& band);

/// Normalized missed-detection error (linear ratio).
double nmde(const CMat& h_m, const CMat& h_e, const std::vector<ExtractedPath>& extracted_m,
            const std::vector<ExtractedPath>& extracted_e);

/// Upper bound of the normalized physical-association error via the greedy
/// weak partition induced by the clusters' oversampled peak positions.
/// scale_m/scale_e bring the true-path gains into the per-band scale of the
/// channels the extraction ran on (normalization factors).
double ub_npae(const std::vector<ExtractedPath>& extracted_m,
               const std::vector<ExtractedPath>& extracted_e,
               const std::vector<PeakPosition>& peaks, const std::vector<PathParams>& true_paths,
               const ArrayConfig& array, const BandConfig& band_m, const BandConfig& band_e,
               const OversamplingConfig& os, double scale_m = 1.0, double scale_e = 1.0);

/// SAGE + DBSCAN + aggregation bundle.
struct ExtractionConfig {
    SageConfig sage;
    double dbscan_eps = 0.5;
    int dbscan_min_pts = 1;
};

/// Single-band extraction (inference path).
struct SampleExtraction {
    std::vector<SubPathEstimate> subpaths;
    std::vector<ExtractedPath> clusters;
};

SampleExtraction extract_paths(const CMat& h, const ArrayConfig& array, const BandConfig& band,
                               const ExtractionConfig& cfg);

/// Two-band extraction with joint clustering (training path). A cluster
/// missing one band keeps a zero response on that side.
struct JointExtraction {
    std::vector<SubPathEstimate> subpaths_m;
    std::vector<SubPathEstimate> subpaths_e;
    std::vector<JointCluster> clusters;
    std::vector<ExtractedPath> extracted_m;
    std::vector<ExtractedPath> extracted_e;
};

JointExtraction extract_paths_joint(const CMat& h_m, const CMat& h_e, const ArrayConfig& array,
                                    const BandConfig& band_m, const BandConfig& band_e,
                                    const ExtractionConfig& cfg);

}  // namespace chanex
