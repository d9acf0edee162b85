#pragma once

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "chanex/path_extraction.hpp"

namespace chanex {

struct MlpConfig {
    // input, hidden..., output. Hidden layers use rectified-linear
    // activation; the output layer is linear.
    std::vector<int> layer_dims;
    std::uint64_t init_seed = 1;

    void validate() const;
};

struct TrainConfig {
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double validation_fraction = 0.1;
    std::uint64_t shuffle_seed = 1;

    void validate() const;
};

struct Network {
    std::vector<Eigen::MatrixXd> weights;  // out x in per layer
    std::vector<Eigen::VectorXd> biases;
    // Adam moment accumulators.
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    long step = 0;

    int n_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return static_cast<int>(weights.front().cols()); }
    int output_dim() const { return static_cast<int>(weights.back().rows()); }
};

/// Uniform init scaled by 1/sqrt(fan_in), biases zero; deterministic.
Network init_network(const MlpConfig& cfg);

Eigen::VectorXd mlp_forward(const Network& net, const Eigen::VectorXd& x);
/// Columns are samples.
Eigen::MatrixXd mlp_forward_batch(const Network& net, const Eigen::MatrixXd& x);

struct Gradients {
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_biases;
    double loss = 0.0;  // mean over batch of squared error
};

/// Exact reverse-mode gradients of the batch MSE (mean over columns of
/// the squared Euclidean error).
Gradients mlp_gradient(const Network& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

void adam_step(Network& net, const Gradients& g, const TrainConfig& cfg);

/// Complex matrix to real vector: all real parts (antenna-major, then
/// subcarrier), then all imaginary parts.
Eigen::VectorXd flatten_complex(const CMat& h);
CMat unflatten_complex(const Eigen::VectorXd& x, Eigen::Index rows, Eigen::Index cols);

using MatrixPair = std::pair<CMat, CMat>;  // (input, label)

struct TrainResult {
    Network net;  // snapshot with minimal validation NMSE
    std::vector<double> train_loss_trace;
    std::vector<double> val_nmse_db_trace;
    int best_epoch = -1;
    double best_val_nmse = std::numeric_limits<double>::infinity();  // linear
    double best_train_loss = 0.0;
    double final_train_loss = 0.0;
    // Positions (into the input pair list) held out for validation.
    std::vector<std::size_t> val_indices;
};

/// Flattens complex pairs, runs Adam, returns the parameter snapshot with
/// minimal validation NMSE (training loss when validation_fraction = 0).
TrainResult train(const std::vector<MatrixPair>& pairs, const MlpConfig& mlp_cfg,
                  const TrainConfig& train_cfg);

/// Baseline: SAGE parameters from the measured band re-synthesized at the
/// target band frequencies.
CMat model_based_extrapolate(const CMat& h_m, const ArrayConfig& array, const BandConfig& band_m,
                             const BandConfig& band_e, const SageConfig& sage_cfg);

/// Maps one aligned path response to its predicted aligned target response.
using PathExtrapolator = std::function<CMat(const CMat&)>;

PathExtrapolator network_path_fn(const Network& net, Eigen::Index rows, Eigen::Index cols_out);

/// Extract -> align (recording peaks) -> per-path inference -> co-compensated sum.
CMat po_pa_extrapolate(const CMat& h_m, const PathExtrapolator& fn, const ArrayConfig& array,
                       const BandConfig& band_m, const BandConfig& band_e,
                       const ExtractionConfig& ext_cfg, const Aligner& aligner);

CMat po_pa_extrapolate(const CMat& h_m, const Network& net, const ArrayConfig& array,
                       const BandConfig& band_m, const BandConfig& band_e,
                       const ExtractionConfig& ext_cfg, const Aligner& aligner);

enum class AugmentScheme { ads, flip, rps };

AugmentScheme parse_augment_scheme(const std::string& name);
std::string augment_scheme_name(AugmentScheme s);

// Deterministic single-pair transforms backing the augmentation schemes.
MatrixPair apply_ads(const MatrixPair& pair, const PeakPosition& shift, const ArrayConfig& array,
                     const BandConfig& band_m, const BandConfig& band_e,
                     const OversamplingConfig& os);
MatrixPair apply_flip(const MatrixPair& pair);
MatrixPair apply_rps(const MatrixPair& pair, double phi);

/// Appends one augmented copy per original pair (dataset size doubles).
void augment_pairs(std::vector<MatrixPair>& pairs, AugmentScheme scheme, const ArrayConfig& array,
                   const BandConfig& band_m, const BandConfig& band_e,
                   const OversamplingConfig& os, Rng& rng);

}  // namespace chanex
