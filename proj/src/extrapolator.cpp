#include "chanex/extrapolator.hpp"

#include <algorithm>
#include <numeric>

namespace chanex {

namespace {

// Fisher-Yates with the project Rng so shuffles are platform-stable.
void shuffle_indices(std::vector<Eigen::Index>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace

void MlpConfig::validate() const {
    if (layer_dims.size() < 2) throw ConfigError("MlpConfig: need at least input and output dims");
    for (int d : layer_dims)
        if (d < 1) throw ConfigError("MlpConfig: layer dims must be positive");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning_rate must be positive");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw ConfigError("TrainConfig: validation_fraction must be in [0, 1)");
}

Network init_network(const MlpConfig& cfg) {
    cfg.validate();
    Network net;
    Rng rng(derive_seed(cfg.init_seed, 0xD1CEULL));
    const int layers = static_cast<int>(cfg.layer_dims.size()) - 1;
    for (int l = 0; l < layers; ++l) {
        const int in = cfg.layer_dims[l], out = cfg.layer_dims[l + 1];
        const double scale = 1.0 / std::sqrt(double(in));
        Eigen::MatrixXd w(out, in);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-scale, scale);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(out));
        net.m_w.push_back(Eigen::MatrixXd::Zero(out, in));
        net.v_w.push_back(Eigen::MatrixXd::Zero(out, in));
        net.m_b.push_back(Eigen::VectorXd::Zero(out));
        net.v_b.push_back(Eigen::VectorXd::Zero(out));
    }
    return net;
}

Eigen::MatrixXd mlp_forward_batch(const Network& net, const Eigen::MatrixXd& x) {
    if (x.rows() != net.input_dim()) throw std::invalid_argument("mlp_forward: dimension mismatch");
    Eigen::MatrixXd a = x;
    for (int l = 0; l < net.n_layers(); ++l) {
        Eigen::MatrixXd z = (net.weights[l] * a).colwise() + net.biases[l];
        a = (l + 1 < net.n_layers()) ? z.cwiseMax(0.0) : z;
    }
    return a;
}

Eigen::VectorXd mlp_forward(const Network& net, const Eigen::VectorXd& x) {
    return mlp_forward_batch(net, x);
}

Gradients mlp_gradient(const Network& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (x.cols() == 0) throw std::invalid_argument("mlp_gradient: empty batch");
    if (x.rows() != net.input_dim() || y.rows() != net.output_dim() || x.cols() != y.cols())
        throw std::invalid_argument("mlp_gradient: dimension mismatch");
    const int layers = net.n_layers();
    const double batch = double(x.cols());

    std::vector<Eigen::MatrixXd> acts(layers + 1);
    acts[0] = x;
    for (int l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = (net.weights[l] * acts[l]).colwise() + net.biases[l];
        acts[l + 1] = (l + 1 < layers) ? z.cwiseMax(0.0) : z;
    }

    Gradients g;
    g.d_weights.resize(layers);
    g.d_biases.resize(layers);
    const Eigen::MatrixXd err = acts[layers] - y;
    g.loss = err.squaredNorm() / batch;

    Eigen::MatrixXd delta = 2.0 / batch * err;
    for (int l = layers - 1; l >= 0; --l) {
        g.d_weights[l] = delta * acts[l].transpose();
        g.d_biases[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = net.weights[l].transpose() * delta;
            // ReLU derivative: active where the layer output is positive.
            delta = delta.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return g;
}

void adam_step(Network& net, const Gradients& g, const TrainConfig& cfg) {
    net.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(net.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(net.step));
    for (int l = 0; l < net.n_layers(); ++l) {
        net.m_w[l] = cfg.beta1 * net.m_w[l] + (1.0 - cfg.beta1) * g.d_weights[l];
        net.v_w[l] = cfg.beta2 * net.v_w[l] + (1.0 - cfg.beta2) * g.d_weights[l].cwiseAbs2();
        net.weights[l] -=
            cfg.learning_rate *
            (net.m_w[l] / bc1).cwiseQuotient(((net.v_w[l] / bc2).cwiseSqrt().array() + cfg.epsilon)
                                                 .matrix());
        net.m_b[l] = cfg.beta1 * net.m_b[l] + (1.0 - cfg.beta1) * g.d_biases[l];
        net.v_b[l] = cfg.beta2 * net.v_b[l] + (1.0 - cfg.beta2) * g.d_biases[l].cwiseAbs2();
        net.biases[l] -=
            cfg.learning_rate *
            (net.m_b[l] / bc1).cwiseQuotient(((net.v_b[l] / bc2).cwiseSqrt().array() + cfg.epsilon)
                                                 .matrix());
    }
}

Eigen::VectorXd flatten_complex(const CMat& h) {
    const Eigen::Index n = h.size();
    Eigen::VectorXd x(2 * n);
    Eigen::Index i = 0;
    for (Eigen::Index r = 0; r < h.rows(); ++r)
        for (Eigen::Index c = 0; c < h.cols(); ++c, ++i) {
            x(i) = h(r, c).real();
            x(n + i) = h(r, c).imag();
        }
    return x;
}

CMat unflatten_complex(const Eigen::VectorXd& x, Eigen::Index rows, Eigen::Index cols) {
    const Eigen::Index n = rows * cols;
    if (x.size() != 2 * n) throw std::invalid_argument("unflatten_complex: size mismatch");
    CMat h(rows, cols);
    Eigen::Index i = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c, ++i) h(r, c) = cplx(x(i), x(n + i));
    return h;
}

TrainResult train(const std::vector<MatrixPair>& pairs, const MlpConfig& mlp_cfg,
                  const TrainConfig& train_cfg) {
    mlp_cfg.validate();
    train_cfg.validate();
    if (pairs.empty()) throw std::invalid_argument("train: empty dataset");

    const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
    const int d_in = static_cast<int>(2 * pairs[0].first.size());
    const int d_out = static_cast<int>(2 * pairs[0].second.size());
    if (mlp_cfg.layer_dims.front() != d_in || mlp_cfg.layer_dims.back() != d_out)
        throw ConfigError("train: network dims do not match dataset dims");

    Eigen::MatrixXd x(d_in, n), y(d_out, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x.col(i) = flatten_complex(pairs[i].first);
        y.col(i) = flatten_complex(pairs[i].second);
    }

    // Deterministic shuffle, then split the trailing fraction for validation.
    Rng rng(derive_seed(train_cfg.shuffle_seed, 0x5a17ULL));
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle_indices(order, rng);
    const Eigen::Index n_val =
        static_cast<Eigen::Index>(std::floor(double(n) * train_cfg.validation_fraction));
    const Eigen::Index n_train = n - n_val;
    if (n_train < 1) throw ConfigError("train: no training samples after validation split");
    std::vector<Eigen::Index> train_idx(order.begin(), order.begin() + n_train);
    std::vector<Eigen::Index> val_idx(order.begin() + n_train, order.end());

    Eigen::MatrixXd x_val, y_val;
    double val_label_power = 0.0;
    if (n_val > 0) {
        x_val.resize(d_in, n_val);
        y_val.resize(d_out, n_val);
        for (Eigen::Index i = 0; i < n_val; ++i) {
            x_val.col(i) = x.col(val_idx[i]);
            y_val.col(i) = y.col(val_idx[i]);
        }
        val_label_power = y_val.squaredNorm();
    }

    TrainResult result;
    result.val_indices.assign(val_idx.begin(), val_idx.end());
    Network net = init_network(mlp_cfg);

    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        shuffle_indices(train_idx, rng);
        double epoch_loss = 0.0;
        Eigen::Index covered = 0;
        for (Eigen::Index start = 0; start < n_train; start += train_cfg.batch_size) {
            const Eigen::Index len = std::min<Eigen::Index>(train_cfg.batch_size, n_train - start);
            Eigen::MatrixXd xb(d_in, len), yb(d_out, len);
            for (Eigen::Index i = 0; i < len; ++i) {
                xb.col(i) = x.col(train_idx[start + i]);
                yb.col(i) = y.col(train_idx[start + i]);
            }
            const Gradients g = mlp_gradient(net, xb, yb);
            if (!std::isfinite(g.loss)) throw std::runtime_error("train: non-finite loss");
            adam_step(net, g, train_cfg);
            epoch_loss += g.loss * double(len);
            covered += len;
        }
        epoch_loss /= double(covered);
        result.train_loss_trace.push_back(epoch_loss);

        double selection_metric;
        if (n_val > 0) {
            const Eigen::MatrixXd pred = mlp_forward_batch(net, x_val);
            const double val_nmse = (pred - y_val).squaredNorm() / val_label_power;
            result.val_nmse_db_trace.push_back(to_db(val_nmse));
            selection_metric = val_nmse;
        } else {
            result.val_nmse_db_trace.push_back(to_db(epoch_loss));
            selection_metric = epoch_loss;
        }
        if (selection_metric < result.best_val_nmse) {
            result.best_val_nmse = selection_metric;
            result.best_epoch = epoch;
            result.best_train_loss = epoch_loss;
            result.net = net;
        }
    }
    result.final_train_loss = result.train_loss_trace.back();
    return result;
}

CMat model_based_extrapolate(const CMat& h_m, const ArrayConfig& array, const BandConfig& band_m,
                             const BandConfig& band_e, const SageConfig& sage_cfg) {
    const SageResult sr = sage_estimate(h_m, array, band_m, sage_cfg);
    CMat h_e = CMat::Zero(array.total(), band_e.n_subcarriers);
    for (const auto& sp : sr.subpaths) {
        const PathParams p{sp.gain, sp.delay, sp.azimuth, sp.elevation};
        h_e += path_response(p, array, band_e);
    }
    return h_e;
}

PathExtrapolator network_path_fn(const Network& net, Eigen::Index rows, Eigen::Index cols_out) {
    return [&net, rows, cols_out](const CMat& aligned) {
        return unflatten_complex(mlp_forward(net, flatten_complex(aligned)), rows, cols_out);
    };
}

CMat po_pa_extrapolate(const CMat& h_m, const PathExtrapolator& fn, const ArrayConfig& array,
                       const BandConfig& band_m, const BandConfig& band_e,
                       const ExtractionConfig& ext_cfg, const Aligner& aligner) {
    const SampleExtraction ex = extract_paths(h_m, array, band_m, ext_cfg);
    std::vector<CMat> outputs;
    std::vector<PeakPosition> peaks;
    outputs.reserve(ex.clusters.size());
    peaks.reserve(ex.clusters.size());
    for (const auto& cluster : ex.clusters) {
        auto [aligned, peak] = aligner.align(cluster.response, array, band_m);
        outputs.push_back(fn(aligned));
        peaks.push_back(peak);
    }
    return aligner.compensate(outputs, peaks, array, band_m, band_e);
}

CMat po_pa_extrapolate(const CMat& h_m, const Network& net, const ArrayConfig& array,
                       const BandConfig& band_m, const BandConfig& band_e,
                       const ExtractionConfig& ext_cfg, const Aligner& aligner) {
    return po_pa_extrapolate(h_m, network_path_fn(net, array.total(), band_e.n_subcarriers),
                             array, band_m, band_e, ext_cfg, aligner);
}

AugmentScheme parse_augment_scheme(const std::string& name) {
    if (name == "ads") return AugmentScheme::ads;
    if (name == "flip") return AugmentScheme::flip;
    if (name == "rps") return AugmentScheme::rps;
    throw ConfigError("unknown augmentation scheme: " + name);
}

std::string augment_scheme_name(AugmentScheme s) {
    switch (s) {
        case AugmentScheme::ads: return "ads";
        case AugmentScheme::flip: return "flip";
        case AugmentScheme::rps: return "rps";
    }
    return "unknown";
}

MatrixPair apply_ads(const MatrixPair& pair, const PeakPosition& shift, const ArrayConfig& array,
                     const BandConfig& band_m, const BandConfig& band_e,
                     const OversamplingConfig& os) {
    const AlignmentOperator u = build_measured_mask(shift, array, band_m, os);
    const AlignmentOperator v = build_label_mask(shift, array, band_m, band_e, os);
    return {u.mask.cwiseProduct(pair.first), v.mask.cwiseProduct(pair.second)};
}

MatrixPair apply_flip(const MatrixPair& pair) {
    return {pair.first.colwise().reverse(), pair.second.colwise().reverse()};
}

MatrixPair apply_rps(const MatrixPair& pair, double phi) {
    const cplx rot(std::cos(phi), std::sin(phi));
    return {rot * pair.first, rot * pair.second};
}

void augment_pairs(std::vector<MatrixPair>& pairs, AugmentScheme scheme, const ArrayConfig& array,
                   const BandConfig& band_m, const BandConfig& band_e,
                   const OversamplingConfig& os, Rng& rng) {
    const std::size_t original = pairs.size();
    pairs.reserve(2 * original);
    for (std::size_t i = 0; i < original; ++i) {
        switch (scheme) {
            case AugmentScheme::ads: {
                PeakPosition shift;
                shift.n1 = static_cast<int>(rng.uniform_int(0, os.o_h * array.n_h - 1));
                shift.n2 = static_cast<int>(rng.uniform_int(0, os.o_v * array.n_v - 1));
                shift.n3 = static_cast<int>(rng.uniform_int(0, os.o_d * band_m.n_subcarriers - 1));
                pairs.push_back(apply_ads(pairs[i], shift, array, band_m, band_e, os));
                break;
            }
            case AugmentScheme::flip:
                pairs.push_back(apply_flip(pairs[i]));
                break;
            case AugmentScheme::rps:
                pairs.push_back(apply_rps(pairs[i], rng.uniform(0.0, kTwoPi)));
                break;
        }
    }
}

}  // namespace chanex
