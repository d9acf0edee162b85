#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>

#include "chanex/env_sim.hpp"
#include "chanex/evaluation.hpp"
#include "chanex/extrapolator.hpp"
#include "chanex/model_io.hpp"
#include "chanex/run_config.hpp"
#include "json_util.hpp"

using namespace chanex;

namespace {

constexpr const char* kExtractionFormat = "chanex-extraction-v1";

struct CommonOpts {
    std::string config_path;
    unsigned threads = 0;
};

RunConfig resolve_config(const CommonOpts& opts) {
    if (!opts.config_path.empty()) return load_run_config(opts.config_path);
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) return load_run_config(env);
    return default_run_config();
}

// Optional CLI overrides of RunConfig fields. Every applied override is
// logged; the digest reflects the effective configuration.
struct Overrides {
    std::optional<int> sage_max_subpaths;
    std::optional<double> sage_stop_db;
    std::optional<int> sage_em_sweeps;
    std::optional<double> dbscan_eps;
    std::optional<int> dbscan_min_pts;
    std::optional<std::string> alignment;
    std::optional<int> oversampling;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<double> learning_rate;
    std::optional<int> hidden_dim;

    void apply(RunConfig& cfg) const {
        auto log = [](const std::string& what) { std::cerr << "override: " << what << "\n"; };
        if (sage_max_subpaths) {
            cfg.sage.max_subpaths = *sage_max_subpaths;
            log("sage.max_subpaths = " + std::to_string(*sage_max_subpaths));
        }
        if (sage_stop_db) {
            cfg.sage.residual_stop_db = *sage_stop_db;
            log("sage.residual_stop_db = " + std::to_string(*sage_stop_db));
        }
        if (sage_em_sweeps) {
            cfg.sage.em_sweeps = *sage_em_sweeps;
            log("sage.em_sweeps = " + std::to_string(*sage_em_sweeps));
        }
        if (dbscan_eps) {
            cfg.dbscan_eps = *dbscan_eps;
            log("dbscan.eps = " + std::to_string(*dbscan_eps));
        }
        if (dbscan_min_pts) {
            cfg.dbscan_min_pts = *dbscan_min_pts;
            log("dbscan.min_pts = " + std::to_string(*dbscan_min_pts));
        }
        if (alignment) {
            cfg.alignment = parse_alignment_mode(*alignment);
            log("alignment_mode = " + *alignment);
        }
        if (oversampling) {
            cfg.os = {*oversampling, *oversampling, *oversampling};
            log("oversampling = " + std::to_string(*oversampling));
        }
        if (epochs) {
            cfg.train.epochs = *epochs;
            log("train.epochs = " + std::to_string(*epochs));
        }
        if (batch_size) {
            cfg.train.batch_size = *batch_size;
            log("train.batch_size = " + std::to_string(*batch_size));
        }
        if (learning_rate) {
            cfg.train.learning_rate = *learning_rate;
            log("train.learning_rate = " + std::to_string(*learning_rate));
        }
        if (hidden_dim) {
            for (auto& d : cfg.hidden_dims) d = *hidden_dim;
            log("mlp.hidden_dims = " + std::to_string(*hidden_dim));
        }
    }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--sage-max-subpaths", ov.sage_max_subpaths);
    cmd->add_option("--sage-stop-db", ov.sage_stop_db);
    cmd->add_option("--sage-em-sweeps", ov.sage_em_sweeps);
    cmd->add_option("--dbscan-eps", ov.dbscan_eps);
    cmd->add_option("--dbscan-min-pts", ov.dbscan_min_pts);
    cmd->add_option("--alignment", ov.alignment, "none|delay_only|angular_only|full");
    cmd->add_option("--oversampling", ov.oversampling, "single factor for all dimensions");
    cmd->add_option("--epochs", ov.epochs);
    cmd->add_option("--batch-size", ov.batch_size);
    cmd->add_option("--learning-rate", ov.learning_rate);
    cmd->add_option("--hidden-dim", ov.hidden_dim);
}

void require_digest(const std::string& found, const std::string& expected,
                    const std::string& what) {
    if (found != expected)
        throw ConfigError(what + " was produced under config digest " + found +
                          " but the effective config digest is " + expected +
                          "; artifacts from different configurations cannot be mixed");
}

void check_dataset_compatible(const Dataset& ds, const RunConfig& cfg) {
    if (ds.array.n_h != cfg.array.n_h || ds.array.n_v != cfg.array.n_v ||
        ds.band_m.n_subcarriers != cfg.band_m.n_subcarriers ||
        ds.band_e.n_subcarriers != cfg.band_e.n_subcarriers)
        throw DataError("dataset dimensions do not match the configuration");
}

// ---------------------------------------------------------------------------
// Extraction records (extracted.jsonl)

struct ClusterRecord {
    PeakPosition peak;
    std::vector<SubPathEstimate> members_m;
    std::vector<SubPathEstimate> members_e;
};

struct ExtractionRecord {
    int sample = 0;
    std::vector<ClusterRecord> clusters;
    double nmde_linear = 0.0;
    double ub_npae_linear = 0.0;
};

json record_to_json(const ExtractionRecord& rec) {
    json clusters = json::array();
    for (const auto& c : rec.clusters) {
        json members_m = json::array(), members_e = json::array();
        for (const auto& sp : c.members_m) members_m.push_back(to_json(sp));
        for (const auto& sp : c.members_e) members_e.push_back(to_json(sp));
        clusters.push_back({{"peak", {{"n1", c.peak.n1}, {"n2", c.peak.n2}, {"n3", c.peak.n3}}},
                            {"members_m", members_m},
                            {"members_e", members_e}});
    }
    return {{"sample", rec.sample},
            {"clusters", clusters},
            {"nmde", rec.nmde_linear},
            {"ub_npae", rec.ub_npae_linear}};
}

ExtractionRecord record_from_json(const json& j) {
    ExtractionRecord rec;
    rec.sample = j.at("sample").get<int>();
    for (const auto& cj : j.at("clusters")) {
        ClusterRecord c;
        c.peak = {cj.at("peak").at("n1").get<int>(), cj.at("peak").at("n2").get<int>(),
                  cj.at("peak").at("n3").get<int>()};
        for (const auto& sj : cj.at("members_m"))
            c.members_m.push_back(subpath_from_json(sj, Band::measured));
        for (const auto& sj : cj.at("members_e"))
            c.members_e.push_back(subpath_from_json(sj, Band::target));
        rec.clusters.push_back(std::move(c));
    }
    rec.nmde_linear = j.at("nmde").get<double>();
    rec.ub_npae_linear = j.at("ub_npae").get<double>();
    return rec;
}

std::vector<ExtractionRecord> load_extraction(const std::string& path, std::string* digest) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open extraction file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty extraction file: " + path);
    std::vector<ExtractionRecord> records;
    try {
        const json header = json::parse(line);
        if (get_or<std::string>(header, "format", "") != kExtractionFormat)
            throw DataError("unsupported extraction format in " + path);
        if (digest) *digest = header.at("config_digest").get<std::string>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            records.push_back(record_from_json(json::parse(line)));
        }
    } catch (const json::exception& e) {
        throw DataError("corrupt extraction file: " + std::string(e.what()));
    }
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].sample != static_cast<int>(i))
            throw DataError("extraction records out of order in " + path);
    return records;
}

// Per-cluster responses rebuilt from stored member parameters.
struct ClusterView {
    CMat a_hat;
    CMat b_hat;
    PeakPosition peak;
    bool both_sides = false;
};

std::vector<ClusterView> rebuild_clusters(const ExtractionRecord& rec, const RunConfig& cfg) {
    std::vector<ClusterView> views;
    views.reserve(rec.clusters.size());
    for (const auto& c : rec.clusters) {
        ClusterView v;
        v.peak = c.peak;
        v.a_hat = CMat::Zero(cfg.array.total(), cfg.band_m.n_subcarriers);
        v.b_hat = CMat::Zero(cfg.array.total(), cfg.band_e.n_subcarriers);
        for (const auto& sp : c.members_m)
            v.a_hat += path_response({sp.gain, sp.delay, sp.azimuth, sp.elevation}, cfg.array,
                                     cfg.band_m);
        for (const auto& sp : c.members_e)
            v.b_hat += path_response({sp.gain, sp.delay, sp.azimuth, sp.elevation}, cfg.array,
                                     cfg.band_e);
        v.both_sides = !c.members_m.empty() && !c.members_e.empty();
        views.push_back(std::move(v));
    }
    return views;
}

// Training pairs for the path-oriented modes. po ignores the peaks; po_pa
// applies the measured mask and the co-transformed label mask.
std::vector<MatrixPair> pairs_from_extraction(const std::vector<ExtractionRecord>& records,
                                              const RunConfig& cfg, const std::string& mode) {
    const Aligner aligner = cfg.aligner();
    std::vector<MatrixPair> pairs;
    for (const auto& rec : records) {
        for (const auto& view : rebuild_clusters(rec, cfg)) {
            if (!view.both_sides) continue;
            if (mode == "po") {
                pairs.emplace_back(view.a_hat, view.b_hat);
            } else {
                const PeakPosition peak = restrict_peak(view.peak, cfg.alignment);
                pairs.emplace_back(
                    aligner.apply_measured(view.a_hat, peak, cfg.array, cfg.band_m),
                    aligner.transform_label(view.b_hat, peak, cfg.array, cfg.band_m, cfg.band_e));
            }
        }
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// gen

int cmd_gen(const CommonOpts& common, const std::string& env_name, int size,
            const std::string& out, std::optional<double> snr_db) {
    const RunConfig cfg = resolve_config(common);
    const EnvironmentSpec& spec = cfg.environment(env_name);
    const Dataset ds =
        generate_dataset(spec, size, cfg.array, cfg.band_m, cfg.band_e, snr_db, common.threads);
    save_dataset(ds, out, cfg.digest());

    std::map<int, int> histogram;
    for (const auto& s : ds.samples)
        histogram[dominant_path_count(s.true_paths, cfg.dominant_threshold)] += 1;

    std::cout << "generated " << ds.samples.size() << " samples for " << env_name << " into "
              << out << " (digest " << cfg.digest() << ")\n";
    std::cout << "dominant-path histogram (threshold " << cfg.dominant_threshold << "):\n";
    for (const auto& [paths, count] : histogram)
        std::cout << "  " << paths << " paths: " << count << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// extract

int cmd_extract(const CommonOpts& common, const Overrides& ov, const std::string& data_dir,
                const std::string& out_path) {
    RunConfig cfg = resolve_config(common);
    ov.apply(cfg);
    const std::string digest = cfg.digest();

    std::string ds_digest;
    const Dataset ds = load_dataset(data_dir, &ds_digest);
    require_digest(ds_digest, digest, "dataset " + data_dir);
    check_dataset_compatible(ds, cfg);
    if (ds.samples.empty()) throw DataError("dataset is empty: " + data_dir);

    // Resume: records already on disk are kept, work continues at the next
    // sample index.
    std::size_t start = 0;
    if (std::filesystem::exists(out_path)) {
        std::string existing_digest;
        const auto existing = load_extraction(out_path, &existing_digest);
        require_digest(existing_digest, digest, "extraction file " + out_path);
        start = existing.size();
        if (start > ds.samples.size()) throw DataError("extraction file has too many records");
        std::cerr << "resuming at sample " << start << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot open for writing: " + out_path);
        out << json{{"format", kExtractionFormat}, {"config_digest", digest}}.dump() << "\n";
    }

    const std::size_t pending = ds.samples.size() - start;
    std::vector<ExtractionRecord> results(pending);
    const ExtractionConfig ext = cfg.extraction();
    parallel_for(pending, common.threads, [&](std::size_t i) {
        const std::size_t idx = start + i;
        const Sample& s = ds.samples[idx];
        const JointExtraction jx =
            extract_paths_joint(s.h_measured, s.h_target, cfg.array, cfg.band_m, cfg.band_e, ext);

        ExtractionRecord rec;
        rec.sample = static_cast<int>(idx);
        std::vector<PeakPosition> peaks;
        for (std::size_t l = 0; l < jx.clusters.size(); ++l) {
            ClusterRecord c;
            for (int k : jx.clusters[l].measured) c.members_m.push_back(jx.subpaths_m[k]);
            for (int k : jx.clusters[l].target) c.members_e.push_back(jx.subpaths_e[k]);
            // Canonical full-grid peak; single-band clusters fall back to
            // the band that is present.
            if (!jx.clusters[l].measured.empty())
                c.peak = find_peak(jx.extracted_m[l].response, cfg.array, cfg.band_m, cfg.os);
            else
                c.peak = find_peak(jx.extracted_e[l].response, cfg.array, cfg.band_e, cfg.os);
            peaks.push_back(c.peak);
            rec.clusters.push_back(std::move(c));
        }
        rec.nmde_linear = nmde(s.h_measured, s.h_target, jx.extracted_m, jx.extracted_e);
        rec.ub_npae_linear =
            ub_npae(jx.extracted_m, jx.extracted_e, peaks, s.true_paths, cfg.array, cfg.band_m,
                    cfg.band_e, cfg.os, s.scale_m, s.scale_e);
        results[i] = std::move(rec);
    });

    std::ofstream out(out_path, std::ios::app);
    if (!out) throw DataError("cannot append to " + out_path);
    double nmde_sum = 0.0, ub_sum = 0.0, lhat_sum = 0.0;
    for (const auto& rec : results) {
        out << record_to_json(rec).dump() << "\n";
    }
    {
        std::string d;
        for (const auto& rec : load_extraction(out_path, &d)) {
            nmde_sum += rec.nmde_linear;
            ub_sum += rec.ub_npae_linear;
            lhat_sum += double(rec.clusters.size());
        }
    }
    const double n = double(ds.samples.size());
    std::cout << "extracted " << ds.samples.size() << " samples -> " << out_path << "\n";
    std::cout << "mean NMDE: " << to_db(nmde_sum / n) << " dB\n";
    std::cout << "mean UB-NPAE: " << to_db(ub_sum / n) << " dB\n";
    std::cout << "mean extracted paths per sample: " << lhat_sum / n << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const CommonOpts& common, const Overrides& ov, const std::string& data_dir,
              const std::string& mode, const std::string& augment_name,
              const std::string& extraction_path, const std::string& out_dir) {
    RunConfig cfg = resolve_config(common);
    ov.apply(cfg);
    const std::string digest = cfg.digest();

    std::string ds_digest;
    const Dataset ds = load_dataset(data_dir, &ds_digest);
    require_digest(ds_digest, digest, "dataset " + data_dir);
    check_dataset_compatible(ds, cfg);

    std::vector<MatrixPair> pairs;
    if (mode == "co") {
        for (const auto& s : ds.samples) pairs.emplace_back(s.h_measured, s.h_target);
    } else if (mode == "po" || mode == "po_pa") {
        const std::string path =
            extraction_path.empty() ? data_dir + "/extracted.jsonl" : extraction_path;
        if (!std::filesystem::exists(path))
            throw DataError("path-oriented training requires an extraction file; not found: " +
                            path);
        std::string ext_digest;
        const auto records = load_extraction(path, &ext_digest);
        require_digest(ext_digest, digest, "extraction file " + path);
        if (records.size() != ds.samples.size())
            throw DataError("extraction file does not cover the dataset");
        pairs = pairs_from_extraction(records, cfg, mode);
    } else {
        throw ConfigError("unknown training mode: " + mode);
    }
    if (pairs.empty()) throw DataError("no training pairs available");
    std::cout << "training mode " << mode << " on " << pairs.size() << " pairs\n";

    if (!augment_name.empty() && augment_name != "none") {
        const AugmentScheme scheme = parse_augment_scheme(augment_name);
        Rng rng(derive_seed(cfg.seed, 0xA06ULL));
        const std::size_t before = pairs.size();
        augment_pairs(pairs, scheme, cfg.array, cfg.band_m, cfg.band_e, cfg.os, rng);
        std::cout << "augmentation " << augment_name << ": " << before << " -> " << pairs.size()
                  << " pairs\n";
    }

    const MlpConfig mlp = cfg.mlp_for(cfg.band_m, cfg.band_e);
    const TrainResult result = train(pairs, mlp, cfg.train);

    ModelBundle bundle;
    bundle.net = result.net;
    bundle.mlp = mlp;
    bundle.train_cfg = cfg.train;
    bundle.train_loss_trace = result.train_loss_trace;
    bundle.val_nmse_db_trace = result.val_nmse_db_trace;
    bundle.best_epoch = result.best_epoch;
    bundle.best_val_nmse = result.best_val_nmse;
    bundle.best_train_loss = result.best_train_loss;
    bundle.mode = mode;
    bundle.alignment = mode == "po_pa" ? cfg.alignment : AlignmentMode::none;
    bundle.os = cfg.os;
    bundle.config_digest = digest;
    save_model(bundle, out_dir);

    std::ofstream trace(out_dir + "/trace.csv");
    trace << "epoch,train_loss,val_nmse_db\n";
    for (std::size_t e = 0; e < result.train_loss_trace.size(); ++e)
        trace << e << "," << result.train_loss_trace[e] << "," << result.val_nmse_db_trace[e]
              << "\n";

    std::cout << "best epoch " << result.best_epoch << ", validation NMSE "
              << to_db(result.best_val_nmse) << " dB\n";
    std::cout << "model saved to " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

CMat co_predict(const Network& net, const CMat& h_m, const RunConfig& cfg) {
    return unflatten_complex(mlp_forward(net, flatten_complex(h_m)), cfg.array.total(),
                             cfg.band_e.n_subcarriers);
}

int cmd_eval(const CommonOpts& common, const std::string& model_dir, const std::string& data_dir,
             const std::string& out_path, bool oracle, const std::string& extraction_path) {
    const RunConfig cfg = resolve_config(common);
    const std::string digest = cfg.digest();

    std::string ds_digest;
    const Dataset ds = load_dataset(data_dir, &ds_digest);
    require_digest(ds_digest, digest, "dataset " + data_dir);
    check_dataset_compatible(ds, cfg);
    if (ds.samples.empty()) throw DataError("dataset is empty");

    std::vector<double> nmse_linear(ds.samples.size());
    std::string mode = "oracle";

    if (oracle) {
        const std::string path =
            extraction_path.empty() ? data_dir + "/extracted.jsonl" : extraction_path;
        std::string ext_digest;
        const auto records = load_extraction(path, &ext_digest);
        require_digest(ext_digest, digest, "extraction file " + path);
        if (records.size() != ds.samples.size())
            throw DataError("extraction file does not cover the dataset");
        parallel_for(ds.samples.size(), common.threads, [&](std::size_t i) {
            CMat sum = CMat::Zero(cfg.array.total(), cfg.band_e.n_subcarriers);
            for (const auto& view : rebuild_clusters(records[i], cfg)) sum += view.b_hat;
            nmse_linear[i] = nmse(sum, ds.samples[i].h_target);
        });
    } else {
        const ModelBundle bundle = load_model(model_dir);
        require_digest(bundle.config_digest, digest, "model " + model_dir);
        mode = bundle.mode;
        if (bundle.net.input_dim() !=
            2 * cfg.array.total() * (bundle.mode == "co" ? cfg.band_m.n_subcarriers
                                                         : cfg.band_m.n_subcarriers))
            throw DataError("model input dimension does not match the dataset");
        const ExtractionConfig ext = cfg.extraction();
        const Aligner aligner{bundle.alignment, bundle.os};
        parallel_for(ds.samples.size(), common.threads, [&](std::size_t i) {
            const Sample& s = ds.samples[i];
            const CMat pred =
                bundle.mode == "co"
                    ? co_predict(bundle.net, s.h_measured, cfg)
                    : po_pa_extrapolate(s.h_measured, bundle.net, cfg.array, cfg.band_m,
                                        cfg.band_e, ext, aligner);
            nmse_linear[i] = nmse(pred, s.h_target);
        });
    }

    const EvalReport report = make_eval_report(nmse_linear, ds.env_name, digest);
    json out;
    out["format"] = "chanex-report-v1";
    out["config_digest"] = digest;
    out["env_name"] = report.env_name;
    out["model_mode"] = mode;
    out["mean_nmse_db"] = report.mean_nmse_db;
    out["p5_db"] = report.p5_db;
    out["p50_db"] = report.p50_db;
    out["p95_db"] = report.p95_db;
    out["nmse_linear"] = report.nmse_linear;
    json cdf = json::array();
    for (const auto& [v, c] : report.accuracy_cdf_points) cdf.push_back({v, c});
    out["accuracy_cdf_db"] = cdf;
    {
        std::ofstream f(out_path);
        if (!f) throw DataError("cannot open for writing: " + out_path);
        f << out.dump(2) << "\n";
    }
    {
        const std::string csv_path = out_path + ".csv";
        std::ofstream f(csv_path);
        f << "sample,nmse_db,accuracy_db\n";
        for (std::size_t i = 0; i < report.nmse_linear.size(); ++i)
            f << i << "," << to_db(report.nmse_linear[i]) << ","
              << -to_db(report.nmse_linear[i]) << "\n";
    }
    std::cout << "mean NMSE: " << report.mean_nmse_db << " dB over " << ds.samples.size()
              << " samples (mode " << mode << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateRow {
    AlignmentMode mode;
    int o;
};

std::vector<AblateRow> parse_ablate_rows(const std::string& spec_str, int default_o) {
    std::vector<AblateRow> rows;
    std::string token;
    std::stringstream ss(spec_str);
    while (std::getline(ss, token, ',')) {
        const auto at = token.find('@');
        AblateRow row;
        row.o = default_o;
        if (at == std::string::npos) {
            row.mode = parse_alignment_mode(token);
        } else {
            row.mode = parse_alignment_mode(token.substr(0, at));
            row.o = std::stoi(token.substr(at + 1));
        }
        rows.push_back(row);
    }
    if (rows.empty()) throw ConfigError("ablation grid is empty");
    return rows;
}

int cmd_ablate(const CommonOpts& common, const std::string& train_dir,
               const std::string& test_dir, const std::string& out_csv,
               const std::string& rows_spec) {
    const RunConfig cfg = resolve_config(common);
    const std::string digest = cfg.digest();

    std::string d1, d2;
    const Dataset train_ds = load_dataset(train_dir, &d1);
    const Dataset test_ds = load_dataset(test_dir, &d2);
    require_digest(d1, digest, "training dataset " + train_dir);
    require_digest(d2, digest, "test dataset " + test_dir);
    check_dataset_compatible(train_ds, cfg);
    check_dataset_compatible(test_ds, cfg);

    const auto rows = parse_ablate_rows(
        rows_spec.empty() ? "none,delay_only@1,angular_only@1,full@1,full@" +
                                std::to_string(cfg.os.o_d)
                          : rows_spec,
        cfg.os.o_d);

    // Extraction is alignment-independent, so it runs once per dataset.
    const ExtractionConfig ext = cfg.extraction();
    struct TrainSample {
        std::vector<std::pair<CMat, CMat>> clusters;  // (A_hat, B_hat)
    };
    std::vector<TrainSample> train_clusters(train_ds.samples.size());
    parallel_for(train_ds.samples.size(), common.threads, [&](std::size_t i) {
        const Sample& s = train_ds.samples[i];
        const JointExtraction jx =
            extract_paths_joint(s.h_measured, s.h_target, cfg.array, cfg.band_m, cfg.band_e, ext);
        for (std::size_t l = 0; l < jx.clusters.size(); ++l)
            if (!jx.clusters[l].measured.empty() && !jx.clusters[l].target.empty())
                train_clusters[i].clusters.emplace_back(jx.extracted_m[l].response,
                                                        jx.extracted_e[l].response);
    });
    std::vector<std::vector<CMat>> test_clusters(test_ds.samples.size());
    parallel_for(test_ds.samples.size(), common.threads, [&](std::size_t i) {
        const SampleExtraction ex =
            extract_paths(test_ds.samples[i].h_measured, cfg.array, cfg.band_m, ext);
        for (const auto& c : ex.clusters) test_clusters[i].push_back(c.response);
    });

    std::ofstream csv(out_csv);
    if (!csv) throw DataError("cannot open for writing: " + out_csv);
    csv << "mode,o,train_pairs,test_nmse_db,w1,w1_std_error,train_loss,intra_gap,r1,r2_upper,"
           "lipschitz_c,expected_lhat_sq,assembled_bound,target_path_loss,bound_holds\n";

    for (const auto& row : rows) {
        const Aligner aligner{row.mode, {row.o, row.o, row.o}};

        std::vector<MatrixPair> pairs;
        std::vector<CMat> source_inputs;
        for (const auto& ts : train_clusters)
            for (const auto& [a_hat, b_hat] : ts.clusters) {
                auto [aligned, peak] = aligner.align(a_hat, cfg.array, cfg.band_m);
                pairs.emplace_back(aligned, aligner.transform_label(b_hat, peak, cfg.array,
                                                                    cfg.band_m, cfg.band_e));
                source_inputs.push_back(pairs.back().first);
            }
        if (pairs.empty()) throw DataError("no training pairs extracted");

        const MlpConfig mlp = cfg.mlp_for(cfg.band_m, cfg.band_e);
        const TrainResult tr = train(pairs, mlp, cfg.train);

        // Test pass with cached extractions, plus target-side aligned pairs
        // for the bound report.
        std::vector<double> nmse_linear(test_ds.samples.size());
        std::vector<int> lhat_counts(test_ds.samples.size());
        std::mutex pair_mutex;
        std::vector<MatrixPair> target_pairs;
        const PathExtrapolator fn =
            network_path_fn(tr.net, cfg.array.total(), cfg.band_e.n_subcarriers);
        parallel_for(test_ds.samples.size(), common.threads, [&](std::size_t i) {
            std::vector<CMat> outputs;
            std::vector<PeakPosition> peaks;
            std::vector<MatrixPair> local_pairs;
            for (const auto& a_hat : test_clusters[i]) {
                auto [aligned, peak] = aligner.align(a_hat, cfg.array, cfg.band_m);
                outputs.push_back(fn(aligned));
                peaks.push_back(peak);
                local_pairs.emplace_back(aligned, outputs.back());
            }
            const CMat pred =
                aligner.compensate(outputs, peaks, cfg.array, cfg.band_m, cfg.band_e);
            nmse_linear[i] = nmse(pred, test_ds.samples[i].h_target);
            lhat_counts[i] = static_cast<int>(test_clusters[i].size());
            std::lock_guard<std::mutex> lock(pair_mutex);
            for (auto& p : local_pairs) target_pairs.push_back(std::move(p));
        });

        // Held-out source loss at the selected snapshot.
        std::vector<MatrixPair> val_pairs;
        for (std::size_t idx : tr.val_indices) val_pairs.push_back(pairs[idx]);
        const double heldout =
            val_pairs.empty() ? tr.best_train_loss : mean_pair_loss(tr.net, val_pairs);

        // The bound's target loss term needs true aligned labels, not the
        // network outputs; rebuild them from the test channels.
        std::vector<MatrixPair> target_label_pairs;
        {
            std::mutex m2;
            std::vector<std::vector<MatrixPair>> per_sample(test_ds.samples.size());
            parallel_for(test_ds.samples.size(), common.threads, [&](std::size_t i) {
                const Sample& s = test_ds.samples[i];
                const JointExtraction jx = extract_paths_joint(s.h_measured, s.h_target,
                                                               cfg.array, cfg.band_m, cfg.band_e,
                                                               ext);
                for (std::size_t l = 0; l < jx.clusters.size(); ++l) {
                    if (jx.clusters[l].measured.empty() || jx.clusters[l].target.empty())
                        continue;
                    auto [aligned, peak] =
                        aligner.align(jx.extracted_m[l].response, cfg.array, cfg.band_m);
                    per_sample[i].emplace_back(
                        aligned, aligner.transform_label(jx.extracted_e[l].response, peak,
                                                         cfg.array, cfg.band_m, cfg.band_e));
                }
            });
            for (auto& v : per_sample)
                for (auto& p : v) target_label_pairs.push_back(std::move(p));
        }

        const BoundReport bound =
            bound_report(tr.net, tr.best_train_loss, heldout, source_inputs, target_label_pairs,
                         lhat_counts, cfg.array, cfg.band_m, cfg.w1);

        double mean_nmse = 0.0;
        for (double v : nmse_linear) mean_nmse += v;
        mean_nmse /= double(nmse_linear.size());

        const bool holds = bound.assembled_bound >= bound.measured_target_path_loss;
        csv << alignment_mode_name(row.mode) << "," << row.o << "," << pairs.size() << ","
            << to_db(mean_nmse) << "," << bound.w1 << "," << bound.w1_std_error << ","
            << bound.train_loss << "," << bound.intra_gap_estimate << "," << bound.r1 << ","
            << bound.r2_upper << "," << bound.lipschitz_c << "," << bound.expected_lhat_sq << ","
            << bound.assembled_bound << "," << bound.measured_target_path_loss << ","
            << (holds ? 1 : 0) << "\n";
        std::cout << alignment_mode_name(row.mode) << " O=" << row.o << ": test NMSE "
                  << to_db(mean_nmse) << " dB, W1 " << bound.w1 << " (R1 = " << bound.r1
                  << ", bound " << (holds ? "holds" : "VIOLATED") << ")\n";
    }
    std::cout << "ablation table written to " << out_csv << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frequency-domain channel extrapolation workbench"};
    app.require_subcommand(1);
    app.fallthrough();

    CommonOpts common;
    app.add_option("--config", common.config_path,
                   "run configuration file (default: $" + std::string(kConfigEnvVar) + ")");
    app.add_option("--threads", common.threads, "worker threads (0 = hardware)");

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    std::string gen_env, gen_out;
    int gen_size = 1;
    std::optional<double> gen_snr;
    gen->add_option("--env", gen_env)->required();
    gen->add_option("--size", gen_size)->required();
    gen->add_option("--out", gen_out)->required();
    gen->add_option("--snr", gen_snr, "per-sample SNR in dB (omit for noiseless)");

    auto* extract = app.add_subcommand("extract", "run path extraction over a dataset");
    std::string ex_data, ex_out;
    Overrides ex_ov;
    extract->add_option("--data", ex_data)->required();
    extract->add_option("--out", ex_out)->required();
    add_override_flags(extract, ex_ov);

    auto* tr = app.add_subcommand("train", "train an extrapolator");
    std::string tr_data, tr_mode = "co", tr_augment = "none", tr_extraction, tr_out;
    Overrides tr_ov;
    tr->add_option("--data", tr_data)->required();
    tr->add_option("--mode", tr_mode, "co|po|po_pa");
    tr->add_option("--augment", tr_augment, "none|ads|flip|rps");
    tr->add_option("--extraction", tr_extraction, "extraction file (default <data>/extracted.jsonl)");
    tr->add_option("--out", tr_out)->required();
    add_override_flags(tr, tr_ov);

    auto* ev = app.add_subcommand("eval", "evaluate a trained model");
    std::string ev_model, ev_data, ev_out, ev_extraction;
    bool ev_oracle = false;
    ev->add_option("--model", ev_model);
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--out", ev_out)->required();
    ev->add_flag("--oracle", ev_oracle, "use extracted target responses as the prediction");
    ev->add_option("--extraction", ev_extraction);

    auto* ab = app.add_subcommand("ablate", "alignment-mode x oversampling grid");
    std::string ab_train, ab_test, ab_out, ab_rows;
    ab->add_option("--train-data", ab_train)->required();
    ab->add_option("--test-data", ab_test)->required();
    ab->add_option("--out", ab_out)->required();
    ab->add_option("--rows", ab_rows, "grid, e.g. none,full@1,full@2");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(common, gen_env, gen_size, gen_out, gen_snr);
        if (extract->parsed()) return cmd_extract(common, ex_ov, ex_data, ex_out);
        if (tr->parsed())
            return cmd_train(common, tr_ov, tr_data, tr_mode, tr_augment, tr_extraction, tr_out);
        if (ev->parsed()) {
            if (!ev_oracle && ev_model.empty())
                throw ConfigError("eval requires --model (or --oracle)");
            return cmd_eval(common, ev_model, ev_data, ev_out, ev_oracle, ev_extraction);
        }
        if (ab->parsed()) return cmd_ablate(common, ab_train, ab_test, ab_out, ab_rows);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
