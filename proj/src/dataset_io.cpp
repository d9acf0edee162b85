#include <bit>
#include <filesystem>
#include <fstream>

#include "json_util.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset container is defined little-endian");

namespace chanex {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDatasetFormat = "chanex-dataset-v1";

void write_channels(const std::string& path, const Dataset& ds, Band band) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const auto& s : ds.samples) {
        const CMat& h = band == Band::measured ? s.h_measured : s.h_target;
        for (Eigen::Index n = 0; n < h.rows(); ++n)
            for (Eigen::Index k = 0; k < h.cols(); ++k) {
                const double re = h(n, k).real(), im = h(n, k).imag();
                out.write(reinterpret_cast<const char*>(&re), sizeof(double));
                out.write(reinterpret_cast<const char*>(&im), sizeof(double));
            }
    }
    if (!out) throw DataError("write failed: " + path);
}

void read_channels(const std::string& path, Dataset& ds, Band band) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    for (auto& s : ds.samples) {
        CMat& h = band == Band::measured ? s.h_measured : s.h_target;
        const int cols =
            band == Band::measured ? ds.band_m.n_subcarriers : ds.band_e.n_subcarriers;
        h.resize(ds.array.total(), cols);
        for (Eigen::Index n = 0; n < h.rows(); ++n)
            for (Eigen::Index k = 0; k < h.cols(); ++k) {
                double re = 0.0, im = 0.0;
                in.read(reinterpret_cast<char*>(&re), sizeof(double));
                in.read(reinterpret_cast<char*>(&im), sizeof(double));
                h(n, k) = cplx(re, im);
            }
    }
    if (!in) throw DataError("truncated channel file: " + path);
    char extra;
    if (in.read(&extra, 1)) throw DataError("trailing bytes in channel file: " + path);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir, const std::string& config_digest) {
    fs::create_directories(dir);

    json meta;
    meta["format"] = kDatasetFormat;
    meta["config_digest"] = config_digest;
    meta["env_name"] = ds.env_name;
    meta["array"] = to_json(ds.array);
    meta["bands"] = {{"measured", to_json(ds.band_m)}, {"target", to_json(ds.band_e)}};
    if (ds.snr_db)
        meta["snr_db"] = *ds.snr_db;
    else
        meta["snr_db"] = nullptr;
    meta["generation_seed"] = ds.generation_seed;
    meta["size"] = ds.samples.size();
    meta["provenance"] =
        "synthetic environment generator; interval parameters are artifact configuration";
    {
        std::ofstream out(dir + "/meta.json");
        if (!out) throw DataError("cannot open for writing: " + dir + "/meta.json");
        out << meta.dump(2) << "\n";
    }

    write_channels(dir + "/channels_m.bin", ds, Band::measured);
    write_channels(dir + "/channels_e.bin", ds, Band::target);

    std::ofstream out(dir + "/paths.jsonl");
    if (!out) throw DataError("cannot open for writing: " + dir + "/paths.jsonl");
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        json rec;
        rec["sample"] = i;
        rec["scale_m"] = s.scale_m;
        rec["scale_e"] = s.scale_e;
        json paths = json::array();
        for (const auto& p : s.true_paths) paths.push_back(to_json(p));
        rec["paths"] = paths;
        out << rec.dump() << "\n";
    }
    if (!out) throw DataError("write failed: " + dir + "/paths.jsonl");
}

Dataset load_dataset(const std::string& dir, std::string* config_digest) {
    std::ifstream meta_in(dir + "/meta.json");
    if (!meta_in) throw DataError("missing dataset meta: " + dir + "/meta.json");
    json meta;
    try {
        meta_in >> meta;
    } catch (const json::exception& e) {
        throw DataError("corrupt meta.json: " + std::string(e.what()));
    }
    if (get_or<std::string>(meta, "format", "") != kDatasetFormat)
        throw DataError("unsupported dataset format in " + dir);

    Dataset ds;
    try {
        ds.env_name = meta.at("env_name").get<std::string>();
        ds.array = array_from_json(meta.at("array"));
        ds.band_m = band_from_json(meta.at("bands").at("measured"), "bands.measured");
        ds.band_e = band_from_json(meta.at("bands").at("target"), "bands.target");
        if (!meta.at("snr_db").is_null()) ds.snr_db = meta.at("snr_db").get<double>();
        ds.generation_seed = meta.at("generation_seed").get<std::uint64_t>();
        ds.samples.resize(meta.at("size").get<std::size_t>());
    } catch (const json::exception& e) {
        throw DataError("corrupt meta.json: " + std::string(e.what()));
    }
    if (config_digest) *config_digest = get_or<std::string>(meta, "config_digest", "");

    read_channels(dir + "/channels_m.bin", ds, Band::measured);
    read_channels(dir + "/channels_e.bin", ds, Band::target);

    std::ifstream paths_in(dir + "/paths.jsonl");
    if (!paths_in) throw DataError("missing paths.jsonl in " + dir);
    std::string line;
    std::size_t i = 0;
    while (std::getline(paths_in, line)) {
        if (line.empty()) continue;
        if (i >= ds.samples.size()) throw DataError("extra path records in " + dir);
        json rec;
        try {
            rec = json::parse(line);
            ds.samples[i].scale_m = rec.at("scale_m").get<double>();
            ds.samples[i].scale_e = rec.at("scale_e").get<double>();
            for (const auto& pj : rec.at("paths"))
                ds.samples[i].true_paths.push_back(path_from_json(pj));
        } catch (const json::exception& e) {
            throw DataError("corrupt paths.jsonl: " + std::string(e.what()));
        }
        ++i;
    }
    if (i != ds.samples.size()) throw DataError("path record count mismatch in " + dir);
    return ds;
}

}  // namespace chanex
