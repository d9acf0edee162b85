#include "chanex/model_io.hpp"

#include <filesystem>
#include <fstream>

#include "json_util.hpp"

namespace chanex {

namespace {

constexpr const char* kModelFormat = "chanex-model-v1";

void write_block(std::ofstream& out, const double* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), count * sizeof(double));
}

void read_block(std::ifstream& in, double* data, std::size_t count) {
    in.read(reinterpret_cast<char*>(data), count * sizeof(double));
}

}  // namespace

void save_model(const ModelBundle& bundle, const std::string& dir) {
    std::filesystem::create_directories(dir);

    json meta;
    meta["format"] = kModelFormat;
    meta["config_digest"] = bundle.config_digest;
    meta["mode"] = bundle.mode;
    meta["alignment_mode"] = alignment_mode_name(bundle.alignment);
    meta["oversampling"] = to_json(bundle.os);
    meta["layer_dims"] = bundle.mlp.layer_dims;
    meta["init_seed"] = bundle.mlp.init_seed;
    meta["train"] = {{"epochs", bundle.train_cfg.epochs},
                     {"batch_size", bundle.train_cfg.batch_size},
                     {"learning_rate", bundle.train_cfg.learning_rate},
                     {"beta1", bundle.train_cfg.beta1},
                     {"beta2", bundle.train_cfg.beta2},
                     {"epsilon", bundle.train_cfg.epsilon},
                     {"validation_fraction", bundle.train_cfg.validation_fraction},
                     {"shuffle_seed", bundle.train_cfg.shuffle_seed}};
    meta["train_loss_trace"] = bundle.train_loss_trace;
    meta["val_nmse_db_trace"] = bundle.val_nmse_db_trace;
    meta["best_epoch"] = bundle.best_epoch;
    meta["best_val_nmse"] = bundle.best_val_nmse;
    meta["best_train_loss"] = bundle.best_train_loss;
    {
        std::ofstream out(dir + "/model.json");
        if (!out) throw DataError("cannot open for writing: " + dir + "/model.json");
        out << meta.dump(2) << "\n";
    }

    std::ofstream out(dir + "/model.bin", std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + dir + "/model.bin");
    for (int l = 0; l < bundle.net.n_layers(); ++l) {
        // Weights row-major (out x in), then bias.
        const auto& w = bundle.net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                const double v = w(r, c);
                write_block(out, &v, 1);
            }
        write_block(out, bundle.net.biases[l].data(),
                    static_cast<std::size_t>(bundle.net.biases[l].size()));
    }
    if (!out) throw DataError("write failed: " + dir + "/model.bin");
}

ModelBundle load_model(const std::string& dir) {
    std::ifstream meta_in(dir + "/model.json");
    if (!meta_in) throw DataError("missing model meta: " + dir + "/model.json");
    json meta;
    try {
        meta_in >> meta;
    } catch (const json::exception& e) {
        throw DataError("corrupt model.json: " + std::string(e.what()));
    }
    if (get_or<std::string>(meta, "format", "") != kModelFormat)
        throw DataError("unsupported model format in " + dir);

    ModelBundle b;
    try {
        b.config_digest = meta.at("config_digest").get<std::string>();
        b.mode = meta.at("mode").get<std::string>();
        b.alignment = parse_alignment_mode(meta.at("alignment_mode").get<std::string>());
        b.os = oversampling_from_json(meta.at("oversampling"));
        b.mlp.layer_dims = meta.at("layer_dims").get<std::vector<int>>();
        b.mlp.init_seed = meta.at("init_seed").get<std::uint64_t>();
        const json& t = meta.at("train");
        b.train_cfg.epochs = t.at("epochs").get<int>();
        b.train_cfg.batch_size = t.at("batch_size").get<int>();
        b.train_cfg.learning_rate = t.at("learning_rate").get<double>();
        b.train_cfg.beta1 = t.at("beta1").get<double>();
        b.train_cfg.beta2 = t.at("beta2").get<double>();
        b.train_cfg.epsilon = t.at("epsilon").get<double>();
        b.train_cfg.validation_fraction = t.at("validation_fraction").get<double>();
        b.train_cfg.shuffle_seed = t.at("shuffle_seed").get<std::uint64_t>();
        b.train_loss_trace = meta.at("train_loss_trace").get<std::vector<double>>();
        b.val_nmse_db_trace = meta.at("val_nmse_db_trace").get<std::vector<double>>();
        b.best_epoch = meta.at("best_epoch").get<int>();
        b.best_val_nmse = meta.at("best_val_nmse").get<double>();
        b.best_train_loss = meta.at("best_train_loss").get<double>();
    } catch (const json::exception& e) {
        throw DataError("corrupt model.json: " + std::string(e.what()));
    }

    b.net = init_network(b.mlp);
    std::ifstream in(dir + "/model.bin", std::ios::binary);
    if (!in) throw DataError("missing model.bin in " + dir);
    for (int l = 0; l < b.net.n_layers(); ++l) {
        auto& w = b.net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                double v = 0.0;
                read_block(in, &v, 1);
                w(r, c) = v;
            }
        read_block(in, b.net.biases[l].data(), static_cast<std::size_t>(b.net.biases[l].size()));
    }
    if (!in) throw DataError("truncated model.bin in " + dir);
    char extra;
    if (in.read(&extra, 1)) throw DataError("trailing bytes in model.bin in " + dir);
    return b;
}

}  // namespace chanex
