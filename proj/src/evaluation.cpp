#include "chanex/evaluation.hpp"

#include <algorithm>
#include <numeric>

namespace chanex {

double nmse(const CMat& h_hat, const CMat& h_ref) {
    if (h_hat.rows() != h_ref.rows() || h_hat.cols() != h_ref.cols())
        throw std::invalid_argument("nmse: dimension mismatch");
    const double ref = h_ref.squaredNorm();
    if (ref <= 0.0) throw std::invalid_argument("nmse: zero reference");
    return (h_hat - h_ref).squaredNorm() / ref;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: empty input");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("percentile: p must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = p * double(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = static_cast<std::size_t>(std::ceil(h));
    const double frac = h - double(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<std::pair<double, double>> accuracy_cdf(const std::vector<double>& nmse_linear) {
    if (nmse_linear.empty()) throw std::invalid_argument("accuracy_cdf: empty input");
    std::vector<double> acc_db;
    acc_db.reserve(nmse_linear.size());
    for (double v : nmse_linear) acc_db.push_back(-to_db(v));  // 1/NMSE in dB
    std::sort(acc_db.begin(), acc_db.end());
    std::vector<std::pair<double, double>> points;
    points.reserve(acc_db.size());
    for (std::size_t i = 0; i < acc_db.size(); ++i)
        points.emplace_back(acc_db[i], double(i + 1) / double(acc_db.size()));
    return points;
}

EvalReport make_eval_report(std::vector<double> nmse_linear, std::string env_name,
                            std::string config_digest) {
    if (nmse_linear.empty()) throw std::invalid_argument("make_eval_report: empty input");
    EvalReport r;
    r.env_name = std::move(env_name);
    r.config_digest = std::move(config_digest);
    const double mean =
        std::accumulate(nmse_linear.begin(), nmse_linear.end(), 0.0) / double(nmse_linear.size());
    r.mean_nmse_db = to_db(mean);
    r.p5_db = to_db(percentile(nmse_linear, 0.05));
    r.p50_db = to_db(percentile(nmse_linear, 0.50));
    r.p95_db = to_db(percentile(nmse_linear, 0.95));
    r.accuracy_cdf_points = accuracy_cdf(nmse_linear);
    r.nmse_linear = std::move(nmse_linear);
    return r;
}

double solve_assignment(const Eigen::MatrixXd& cost, std::vector<int>* row_to_col) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw std::invalid_argument("solve_assignment: cost must be square");
    if (n == 0) return 0.0;
    const double inf = std::numeric_limits<double>::infinity();

    // Shortest augmenting path with dual potentials; p[j] is the row
    // currently matched to column j (1-indexed, 0 = virtual).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    double total = 0.0;
    for (int j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
    if (row_to_col) {
        row_to_col->assign(n, -1);
        for (int j = 1; j <= n; ++j) (*row_to_col)[p[j] - 1] = j - 1;
    }
    return total;
}

namespace {

std::vector<int> subsample_indices(std::size_t total, std::size_t n, Rng& rng) {
    std::vector<int> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    if (n >= total) return idx;
    // Partial Fisher-Yates: the first n slots end up as the draw.
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(static_cast<long>(i), static_cast<long>(total) - 1));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    return idx;
}

double assignment_w1(const std::vector<CMat>& p, const std::vector<int>& pi,
                     const std::vector<CMat>& q, const std::vector<int>& qi) {
    const int n = static_cast<int>(pi.size());
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost(i, j) = (p[pi[i]] - q[qi[j]]).norm();
    return solve_assignment(cost) / double(n);
}

}  // namespace

W1Estimate wasserstein1_detail(const std::vector<CMat>& samples_p,
                               const std::vector<CMat>& samples_q, const W1Config& cfg) {
    if (samples_p.empty() || samples_q.empty())
        throw std::invalid_argument("wasserstein1: empty sample set");
    if (cfg.max_n < 1 || cfg.repeats < 1) throw ConfigError("W1Config: max_n/repeats must be >= 1");

    const std::size_t n = std::min<std::size_t>(
        {samples_p.size(), samples_q.size(), static_cast<std::size_t>(cfg.max_n)});
    const bool deterministic = n == samples_p.size() && n == samples_q.size();
    const int repeats = deterministic ? 1 : cfg.repeats;

    W1Estimate est;
    est.repeat_values.reserve(repeats);
    for (int r = 0; r < repeats; ++r) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
        const auto pi = subsample_indices(samples_p.size(), n, rng);
        const auto qi = subsample_indices(samples_q.size(), n, rng);
        est.repeat_values.push_back(assignment_w1(samples_p, pi, samples_q, qi));
    }
    est.mean = std::accumulate(est.repeat_values.begin(), est.repeat_values.end(), 0.0) /
               double(repeats);
    if (repeats > 1) {
        double var = 0.0;
        for (double v : est.repeat_values) var += (v - est.mean) * (v - est.mean);
        var /= double(repeats - 1);
        est.std_error = std::sqrt(var / double(repeats));
    }
    return est;
}

double wasserstein1(const std::vector<CMat>& samples_p, const std::vector<CMat>& samples_q,
                    const W1Config& cfg) {
    return wasserstein1_detail(samples_p, samples_q, cfg).mean;
}

double spectral_norm(const Eigen::MatrixXd& w, int iters, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x59ecULL));
    Eigen::VectorXd v(w.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    v.normalize();
    double sigma = 0.0;
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd wv = w * v;
        sigma = wv.norm();
        if (sigma <= 0.0) return 0.0;
        v = w.transpose() * wv;
        v.normalize();
    }
    return (w * v).norm();
}

double mean_pair_loss(const Network& net, const std::vector<MatrixPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("mean_pair_loss: empty pairs");
    double sum = 0.0;
    for (const auto& [input, label] : pairs) {
        const Eigen::VectorXd pred = mlp_forward(net, flatten_complex(input));
        sum += (pred - flatten_complex(label)).squaredNorm();
    }
    return sum / double(pairs.size());
}

BoundReport bound_report(const Network& net, double train_loss, double source_heldout_loss,
                         const std::vector<CMat>& source_aligned_inputs,
                         const std::vector<MatrixPair>& target_aligned_pairs,
                         const std::vector<int>& target_lhat_counts, const ArrayConfig& array,
                         const BandConfig& band_m, const W1Config& w1_cfg) {
    if (source_aligned_inputs.empty() || target_aligned_pairs.empty() ||
        target_lhat_counts.empty())
        throw std::invalid_argument("bound_report: missing inputs");

    BoundReport r;
    r.train_loss = train_loss;
    r.intra_gap_estimate = std::abs(source_heldout_loss - train_loss);

    std::vector<CMat> target_inputs;
    target_inputs.reserve(target_aligned_pairs.size());
    for (const auto& pr : target_aligned_pairs) target_inputs.push_back(pr.first);
    const W1Estimate w1 = wasserstein1_detail(source_aligned_inputs, target_inputs, w1_cfg);
    r.w1 = w1.mean;
    r.w1_std_error = w1.std_error;

    r.r1 = std::sqrt(double(array.total()) * double(band_m.n_subcarriers));
    r.r2_upper = 1.0;
    for (const auto& w : net.weights) r.r2_upper *= spectral_norm(w);
    r.lipschitz_c = 8.0 * r.r1 * r.r2_upper * r.r2_upper;

    double sum_sq = 0.0;
    for (int c : target_lhat_counts) sum_sq += double(c) * double(c);
    r.expected_lhat_sq = sum_sq / double(target_lhat_counts.size());

    r.assembled_bound =
        (r.train_loss + r.intra_gap_estimate + r.lipschitz_c * r.w1) * r.expected_lhat_sq;
    r.measured_target_path_loss = mean_pair_loss(net, target_aligned_pairs);
    return r;
}

}  // namespace chanex
