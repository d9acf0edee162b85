#pragma once

#include <string>
#include <utility>
#include <vector>

#include "chanex/extrapolator.hpp"

namespace chanex {

/// ||H_hat - H_ref||_F^2 / ||H_ref||_F^2. Throws on a zero reference.
double nmse(const CMat& h_hat, const CMat& h_ref);

/// Percentile with linear interpolation between order statistics
/// (the median of two points is their midpoint). p in [0, 1].
double percentile(std::vector<double> values, double p);

/// Empirical CDF of per-sample accuracy 1/NMSE in dB: (value_db, cdf).
std::vector<std::pair<double, double>> accuracy_cdf(const std::vector<double>& nmse_linear);

struct EvalReport {
    std::vector<double> nmse_linear;
    double mean_nmse_db = 0.0;
    double p5_db = 0.0;
    double p50_db = 0.0;
    double p95_db = 0.0;
    std::vector<std::pair<double, double>> accuracy_cdf_points;
    std::string env_name;
    std::string config_digest;
};

EvalReport make_eval_report(std::vector<double> nmse_linear, std::string env_name,
                            std::string config_digest);

/// Exact min-cost assignment on a square cost matrix (shortest augmenting
/// path with potentials, O(n^3)). Optionally returns row -> column.
double solve_assignment(const Eigen::MatrixXd& cost, std::vector<int>* row_to_col = nullptr);

struct W1Config {
    int max_n = 128;
    int repeats = 5;
    std::uint64_t seed = 1;
};

struct W1Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::vector<double> repeat_values;
};

/// Empirical Wasserstein-1 between two sets of matrices under the Frobenius
/// ground cost: equal-size subsampling to n <= max_n per side, exact
/// assignment per draw, mean over repeats.
W1Estimate wasserstein1_detail(const std::vector<CMat>& samples_p,
                               const std::vector<CMat>& samples_q, const W1Config& cfg);
double wasserstein1(const std::vector<CMat>& samples_p, const std::vector<CMat>& samples_q,
                    const W1Config& cfg);

/// Largest singular value by power iteration.
double spectral_norm(const Eigen::MatrixXd& w, int iters = 50, std::uint64_t seed = 1);

/// Mean ||label - net(input)||_F^2 over pairs.
double mean_pair_loss(const Network& net, const std::vector<MatrixPair>& pairs);

struct BoundReport {
    double train_loss = 0.0;          // L_D(eta*)
    double intra_gap_estimate = 0.0;  // |held-out source loss - train loss|
    double w1 = 0.0;                  // aligned-path input marginals
    double w1_std_error = 0.0;
    double r1 = 0.0;                  // sqrt(N_T * K_m)
    double r2_upper = 0.0;            // product of layer spectral norms; loose
    double lipschitz_c = 0.0;         // 8 * R1 * R2^2
    double expected_lhat_sq = 0.0;    // E[Lhat^2] over target extraction counts
    double assembled_bound = 0.0;     // (train + intra + C*W1) * E[Lhat^2]
    double measured_target_path_loss = 0.0;
    bool r2_is_loose_upper_bound = true;
};

BoundReport bound_report(const Network& net, double train_loss, double source_heldout_loss,
                         const std::vector<CMat>& source_aligned_inputs,
                         const std::vector<MatrixPair>& target_aligned_pairs,
                         const std::vector<int>& target_lhat_counts, const ArrayConfig& array,
                         const BandConfig& band_m, const W1Config& w1_cfg);

}  // namespace chanex
