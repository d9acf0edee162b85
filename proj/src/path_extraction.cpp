#include "chanex/path_extraction.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace chanex {

void SageConfig::validate() const {
    if (max_subpaths < 1) throw ConfigError("SageConfig: max_subpaths must be >= 1");
    if (residual_stop_db >= 0.0) throw ConfigError("SageConfig: residual_stop_db must be < 0");
    if (grid_h < 0 || grid_v < 0 || grid_d < 0)
        throw ConfigError("SageConfig: grid sizes must be non-negative");
    if (refine_iters < 1 || refine_cycles < 1 || em_sweeps < 0)
        throw ConfigError("SageConfig: iteration counts out of range");
}

namespace {

constexpr double kGolden = 0.6180339887498949;

double wrap01(double x) { return x - std::floor(x); }
double wrap_half(double x) { return x - std::round(x); }

// Internal phase-domain estimate of one sub-path: response is
// (g / sqrt(N_T)) * x(u, v) * d(w)^H with x, d unnormalized phasor ramps.
// Stored estimates are always projected onto the physical region
// u^2 + v^2 <= spacing^2 so that the (azimuth, elevation) recovery is exact
// and parameter reconstruction reproduces the internal residual.
struct PhaseEstimate {
    cplx g;
    double u = 0.0, v = 0.0, w = 0.0;
};

PhaseEstimate project_physical(PhaseEstimate e, double spacing) {
    double u = wrap_half(e.u);
    double v = wrap_half(e.v);
    const double r = std::hypot(u, v);
    if (r > spacing) {
        const double scale = spacing / r;
        u *= scale;
        v *= scale;
    }
    return {e.g, u, v, wrap01(e.w)};
}

CVec ramp(double w, int n) { return phasor_ramp(w, n); }

CVec angular_phasor(double u, double v, const ArrayConfig& array) {
    const CVec xh = ramp(u, array.n_h);
    const CVec xv = ramp(v, array.n_v);
    CVec x(array.total());
    for (int p = 0; p < array.n_h; ++p)
        for (int q = 0; q < array.n_v; ++q) x(p * array.n_v + q) = xh(p) * xv(q);
    return x;
}

CMat component_response(const PhaseEstimate& e, const ArrayConfig& array, int k) {
    const CVec x = angular_phasor(e.u, e.v, array);
    const CVec d = ramp(e.w, k);
    return (e.g / std::sqrt(double(array.total()))) * x * d.adjoint();
}

cplx matched_gain(const CMat& x_mat, const PhaseEstimate& e, const ArrayConfig& array, int k) {
    const CVec x = angular_phasor(e.u, e.v, array);
    const CVec d = ramp(e.w, k);
    return (x.adjoint() * x_mat * d).value() / (std::sqrt(double(array.total())) * double(k));
}

double estimate_objective(const PhaseEstimate& e, const CMat& x_mat, const ArrayConfig& array,
                          int k) {
    const CVec x = angular_phasor(e.u, e.v, array);
    const CVec d = ramp(e.w, k);
    return std::norm((x.adjoint() * x_mat * d).value());
}

// Golden-section maximization on [lo, hi] seeded with x0; returns the best
// point ever evaluated, so the result is never worse than f(x0). A point
// displaces the incumbent only when it wins by more than rounding noise,
// otherwise an exact grid optimum would drift by fp-level jitter that the
// gain phase amplifies by f_start/delta_f.
template <class F>
double golden_max(F&& f, double lo, double hi, double x0, int iters) {
    double best_x = x0;
    double best_f = f(x0);
    auto eval = [&](double x) {
        const double y = f(x);
        if (y > best_f * (1.0 + 1e-12)) {
            best_f = y;
            best_x = x;
        }
        return y;
    };
    double a = lo, b = hi;
    double x1 = b - kGolden * (b - a);
    double x2 = a + kGolden * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    for (int it = 0; it < iters; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kGolden * (b - a);
            f2 = eval(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kGolden * (b - a);
            f1 = eval(x1);
        }
    }
    return best_x;
}

struct GridSizes {
    int gh, gv, gd;
};

GridSizes grid_sizes(const SageConfig& cfg, const ArrayConfig& array, int k) {
    GridSizes g;
    g.gh = cfg.grid_h > 0 ? cfg.grid_h : (array.n_h > 1 ? 2 * array.n_h : 1);
    g.gv = cfg.grid_v > 0 ? cfg.grid_v : (array.n_v > 1 ? 2 * array.n_v : 1);
    g.gd = cfg.grid_d > 0 ? cfg.grid_d : (k > 1 ? 2 * k : 1);
    return g;
}

// Coordinate-wise refinement of |x(u,v)^H X d(w)|^2. Each pass shrinks the
// golden-section bracket to the residual uncertainty of the previous pass.
void refine_params(PhaseEstimate& e, const CMat& x_mat, const ArrayConfig& array, int k,
                   const SageConfig& cfg, const GridSizes& grid) {
    const int n_h = array.n_h, n_v = array.n_v;
    double bu = 1.0 / grid.gh, bv = 1.0 / grid.gv, bw = 1.0 / grid.gd;
    const double shrink = std::max(std::pow(kGolden, cfg.refine_iters) * 8.0, 1e-12);
    for (int cycle = 0; cycle < cfg.refine_cycles; ++cycle) {
        if (n_h > 1) {
            const CVec y = x_mat * ramp(e.w, k);
            CVec z = CVec::Zero(n_h);
            const CVec xv = ramp(e.v, n_v);
            for (int p = 0; p < n_h; ++p)
                for (int q = 0; q < n_v; ++q) z(p) += std::conj(xv(q)) * y(p * n_v + q);
            auto f = [&](double u) { return std::norm((ramp(u, n_h).adjoint() * z).value()); };
            e.u = golden_max(f, e.u - bu, e.u + bu, e.u, cfg.refine_iters);
        }
        if (n_v > 1) {
            const CVec y = x_mat * ramp(e.w, k);
            CVec z = CVec::Zero(n_v);
            const CVec xh = ramp(e.u, n_h);
            for (int p = 0; p < n_h; ++p)
                for (int q = 0; q < n_v; ++q) z(q) += std::conj(xh(p)) * y(p * n_v + q);
            auto f = [&](double v) { return std::norm((ramp(v, n_v).adjoint() * z).value()); };
            e.v = golden_max(f, e.v - bv, e.v + bv, e.v, cfg.refine_iters);
        }
        if (k > 1) {
            const Eigen::RowVectorXcd r = angular_phasor(e.u, e.v, array).adjoint() * x_mat;
            auto f = [&](double w) { return std::norm((r * ramp(w, k)).value()); };
            e.w = golden_max(f, e.w - bw, e.w + bw, e.w, cfg.refine_iters);
        }
        bu *= shrink;
        bv *= shrink;
        bw *= shrink;
    }
}

SubPathEstimate to_subpath(const PhaseEstimate& e, const ArrayConfig& array,
                           const BandConfig& band, Band tag) {
    SubPathEstimate sp;
    sp.band = tag;
    const double w = wrap01(e.w);
    sp.delay = w / band.delta_f;
    const double v_s = wrap_half(e.v);
    const double cos_el = std::clamp(v_s / array.spacing_ratio, -1.0, 1.0);
    sp.elevation = std::acos(cos_el);
    const double sin_el = std::sqrt(std::max(0.0, 1.0 - cos_el * cos_el));
    const double u_s = wrap_half(e.u);
    sp.azimuth = sin_el > 1e-12
                     ? std::asin(std::clamp(u_s / (array.spacing_ratio * sin_el), -1.0, 1.0))
                     : 0.0;
    const double phase = kTwoPi * band.f_start * sp.delay;
    sp.gain = e.g * cplx(std::cos(phase), std::sin(phase));
    return sp;
}

}  // namespace

SageResult sage_estimate(const CMat& h, const ArrayConfig& array, const BandConfig& band,
                         const SageConfig& cfg) {
    cfg.validate();
    if (h.rows() != array.total() || h.cols() != band.n_subcarriers)
        throw std::invalid_argument("sage_estimate: dimension mismatch");
    const double total = h.squaredNorm();
    if (total <= 0.0) throw std::invalid_argument("sage_estimate: zero input");

    const int k = band.n_subcarriers;
    const int n_t = array.total();
    const GridSizes grid = grid_sizes(cfg, array, k);

    // Coarse detection dictionaries.
    CMat x_grid(n_t, grid.gh * grid.gv);
    for (int i = 0; i < grid.gh; ++i)
        for (int j = 0; j < grid.gv; ++j)
            x_grid.col(i * grid.gv + j) =
                angular_phasor(double(i) / grid.gh, double(j) / grid.gv, array);
    CMat d_grid(k, grid.gd);
    for (int c = 0; c < grid.gd; ++c) d_grid.col(c) = ramp(double(c) / grid.gd, k);

    const double stop_power = total * from_db(cfg.residual_stop_db);
    CMat residual = h;
    std::vector<PhaseEstimate> comps;

    SageResult result;
    result.total_power = total;

    auto em_update = [&](PhaseEstimate& e) {
        const CMat x_full = residual + component_response(e, array, k);
        PhaseEstimate cand = e;
        refine_params(cand, x_full, array, k, cfg, grid);
        cand = project_physical(cand, array.spacing_ratio);
        // The physical projection can undo a golden-section gain; keep the
        // previous parameters unless the projected ones match or beat them,
        // so the residual never grows.
        if (estimate_objective(cand, x_full, array, k) < estimate_objective(e, x_full, array, k))
            cand = e;
        cand.g = matched_gain(x_full, cand, array, k);
        e = cand;
        residual = x_full - component_response(e, array, k);
    };

    // Serial interference cancellation with interleaved EM polish: each new
    // component is followed by full sweeps before the stop rule re-checks,
    // so a run with a larger max_subpaths extends the smaller run's state.
    while (static_cast<int>(comps.size()) < cfg.max_subpaths &&
           residual.squaredNorm() > stop_power) {
        const CMat m = x_grid.adjoint() * residual * d_grid;
        Eigen::Index row = 0, col = 0;
        m.cwiseAbs2().maxCoeff(&row, &col);
        if (std::norm(m(row, col)) <= 0.0) break;
        PhaseEstimate e;
        e.u = double(row / grid.gv) / grid.gh;
        e.v = double(row % grid.gv) / grid.gv;
        e.w = double(col) / grid.gd;
        refine_params(e, residual, array, k, cfg, grid);
        e = project_physical(e, array.spacing_ratio);
        e.g = matched_gain(residual, e, array, k);
        if (std::abs(e.g) <= 0.0) break;
        residual -= component_response(e, array, k);
        comps.push_back(e);
        result.residual_trace.push_back(residual.squaredNorm());
        for (int sweep = 0; sweep < cfg.em_sweeps; ++sweep) {
            for (auto& comp : comps) em_update(comp);
            result.residual_trace.push_back(residual.squaredNorm());
        }
    }

    result.subpaths.reserve(comps.size());
    for (const auto& e : comps)
        result.subpaths.push_back(to_subpath(e, array, band, Band::measured));
    return result;
}

Eigen::Vector3d path_phase_vector(double azimuth, double elevation, double delay,
                                  double delta_f) {
    return {kPi * std::sin(azimuth) * std::sin(elevation), kPi * std::cos(elevation),
            kTwoPi * delta_f * delay};
}

Eigen::Vector3d subpath_omega(const SubPathEstimate& sp, double delta_f) {
    return path_phase_vector(sp.azimuth, sp.elevation, sp.delay, delta_f);
}

double path_distance(const Eigen::Vector3d& omega_k, const Eigen::Vector3d& omega_l) {
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        const cplx d = cplx(std::cos(omega_k(i)), std::sin(omega_k(i))) -
                       cplx(std::cos(omega_l(i)), std::sin(omega_l(i)));
        sum += std::norm(d);
    }
    return std::sqrt(sum);
}

std::vector<std::vector<int>> dbscan_cluster(const std::vector<Eigen::Vector3d>& points,
                                             double eps, int min_pts) {
    if (eps <= 0.0) throw std::invalid_argument("dbscan_cluster: eps must be positive");
    if (min_pts < 1) throw std::invalid_argument("dbscan_cluster: min_pts must be >= 1");
    const int n = static_cast<int>(points.size());
    std::vector<std::vector<int>> neighbors(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (path_distance(points[i], points[j]) <= eps) neighbors[i].push_back(j);

    constexpr int kUnvisited = -2, kNoise = -1;
    std::vector<int> label(n, kUnvisited);
    std::vector<std::vector<int>> clusters;

    for (int i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) continue;
        if (static_cast<int>(neighbors[i].size()) < min_pts) {
            label[i] = kNoise;
            continue;
        }
        const int cid = static_cast<int>(clusters.size());
        clusters.emplace_back();
        label[i] = cid;
        clusters[cid].push_back(i);
        std::deque<int> seeds(neighbors[i].begin(), neighbors[i].end());
        while (!seeds.empty()) {
            const int q = seeds.front();
            seeds.pop_front();
            if (label[q] == kNoise) {
                label[q] = cid;
                clusters[cid].push_back(q);
            }
            if (label[q] != kUnvisited) continue;
            label[q] = cid;
            clusters[cid].push_back(q);
            if (static_cast<int>(neighbors[q].size()) >= min_pts)
                seeds.insert(seeds.end(), neighbors[q].begin(), neighbors[q].end());
        }
    }
    // Keep unassigned noise points as singletons: clustering must partition.
    for (int i = 0; i < n; ++i)
        if (label[i] == kNoise) clusters.push_back({i});
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    return clusters;
}

std::vector<std::vector<int>> dbscan_subpaths(const std::vector<SubPathEstimate>& subpaths,
                                              double delta_f, double eps, int min_pts) {
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(subpaths.size());
    for (const auto& sp : subpaths) pts.push_back(subpath_omega(sp, delta_f));
    return dbscan_cluster(pts, eps, min_pts);
}

std::vector<JointCluster> joint_cluster(const std::vector<SubPathEstimate>& subpaths_m,
                                        const std::vector<SubPathEstimate>& subpaths_e,
                                        double delta_f, double eps, int min_pts) {
    if (subpaths_m.empty() || subpaths_e.empty())
        throw std::invalid_argument("joint_cluster: both bands must be non-empty");
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(subpaths_m.size() + subpaths_e.size());
    for (const auto& sp : subpaths_m) pts.push_back(subpath_omega(sp, delta_f));
    for (const auto& sp : subpaths_e) pts.push_back(subpath_omega(sp, delta_f));
    const auto raw = dbscan_cluster(pts, eps, min_pts);
    const int n_m = static_cast<int>(subpaths_m.size());
    std::vector<JointCluster> out;
    out.reserve(raw.size());
    for (const auto& c : raw) {
        JointCluster jc;
        for (int idx : c) {
            if (idx < n_m)
                jc.measured.push_back(idx);
            else
                jc.target.push_back(idx - n_m);
        }
        out.push_back(std::move(jc));
    }
    return out;
}

ExtractedPath aggregate_cluster(const std::vector<SubPathEstimate>& subpaths,
                                const std::vector<int>& indices, const ArrayConfig& array,
                                const BandConfig& band) {
    if (indices.empty()) throw std::invalid_argument("aggregate_cluster: empty cluster");
    ExtractedPath ep;
    ep.member_indices = indices;
    std::sort(ep.member_indices.begin(), ep.member_indices.end());
    ep.band = subpaths[indices[0]].band;
    ep.response = CMat::Zero(array.total(), band.n_subcarriers);
    for (int idx : ep.member_indices) {
        const auto& sp = subpaths.at(idx);
        PathParams p{sp.gain, sp.delay, sp.azimuth, sp.elevation};
        ep.response += path_response(p, array, band);
    }
    return ep;
}

namespace {

CMat sum_responses(const std::vector<ExtractedPath>& extracted, Eigen::Index rows,
                   Eigen::Index cols) {
    CMat sum = CMat::Zero(rows, cols);
    for (const auto& ep : extracted) sum += ep.response;
    return sum;
}

}  // namespace

double nmde(const CMat& h_m, const CMat& h_e, const std::vector<ExtractedPath>& extracted_m,
            const std::vector<ExtractedPath>& extracted_e) {
    const double pm = h_m.squaredNorm(), pe = h_e.squaredNorm();
    if (pm <= 0.0 || pe <= 0.0) throw std::invalid_argument("nmde: zero-norm channel");
    const CMat sm = sum_responses(extracted_m, h_m.rows(), h_m.cols());
    const CMat se = sum_responses(extracted_e, h_e.rows(), h_e.cols());
    return 0.5 * ((h_m - sm).squaredNorm() / pm + (h_e - se).squaredNorm() / pe);
}

double ub_npae(const std::vector<ExtractedPath>& extracted_m,
               const std::vector<ExtractedPath>& extracted_e,
               const std::vector<PeakPosition>& peaks, const std::vector<PathParams>& true_paths,
               const ArrayConfig& array, const BandConfig& band_m, const BandConfig& band_e,
               const OversamplingConfig& os, double scale_m, double scale_e) {
    const std::size_t n_clusters = extracted_m.size();
    if (extracted_e.size() != n_clusters)
        throw std::invalid_argument("ub_npae: band cluster count mismatch");
    if (peaks.size() != n_clusters)
        throw std::invalid_argument("ub_npae: missing peak positions");
    if (n_clusters == 0) throw std::invalid_argument("ub_npae: no extracted paths");
    if (true_paths.empty()) throw std::invalid_argument("ub_npae: no physical paths");

    std::vector<Eigen::Vector3d> omega_hat(n_clusters);
    for (std::size_t l = 0; l < n_clusters; ++l)
        omega_hat[l] = {kTwoPi * peaks[l].n1 / (os.o_h * array.n_h),
                        kTwoPi * peaks[l].n2 / (os.o_v * array.n_v),
                        kTwoPi * peaks[l].n3 / (os.o_d * band_m.n_subcarriers)};

    // Greedy weak partition: each physical path joins its closest cluster.
    std::vector<std::vector<int>> partition(n_clusters);
    for (std::size_t k = 0; k < true_paths.size(); ++k) {
        const auto& p = true_paths[k];
        const Eigen::Vector3d omega =
            path_phase_vector(p.azimuth, p.elevation, p.delay, band_m.delta_f);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < n_clusters; ++l) {
            const double d = path_distance(omega, omega_hat[l]);
            if (d < best_d) {
                best_d = d;
                best = l;
            }
        }
        partition[best].push_back(static_cast<int>(k));
    }

    std::vector<PathParams> paths_m = true_paths, paths_e = true_paths;
    for (auto& p : paths_m) p.gain *= scale_m;
    for (auto& p : paths_e) p.gain *= scale_e;
    const CMat h_m = synthesize_channel(paths_m, array, band_m);
    const CMat h_e = synthesize_channel(paths_e, array, band_e);
    const double pm = h_m.squaredNorm(), pe = h_e.squaredNorm();
    if (pm <= 0.0 || pe <= 0.0) throw std::invalid_argument("ub_npae: zero-power physical channel");

    double err_m = 0.0, err_e = 0.0;
    for (std::size_t l = 0; l < n_clusters; ++l) {
        CMat am = CMat::Zero(h_m.rows(), h_m.cols());
        CMat ae = CMat::Zero(h_e.rows(), h_e.cols());
        for (int k : partition[l]) {
            am += path_response(paths_m[k], array, band_m);
            ae += path_response(paths_e[k], array, band_e);
        }
        err_m += (extracted_m[l].response - am).squaredNorm();
        err_e += (extracted_e[l].response - ae).squaredNorm();
    }
    return 0.5 * (err_m / pm + err_e / pe);
}

SampleExtraction extract_paths(const CMat& h, const ArrayConfig& array, const BandConfig& band,
                               const ExtractionConfig& cfg) {
    SampleExtraction out;
    out.subpaths = sage_estimate(h, array, band, cfg.sage).subpaths;
    const auto clusters =
        dbscan_subpaths(out.subpaths, band.delta_f, cfg.dbscan_eps, cfg.dbscan_min_pts);
    out.clusters.reserve(clusters.size());
    for (const auto& c : clusters)
        out.clusters.push_back(aggregate_cluster(out.subpaths, c, array, band));
    return out;
}

JointExtraction extract_paths_joint(const CMat& h_m, const CMat& h_e, const ArrayConfig& array,
                                    const BandConfig& band_m, const BandConfig& band_e,
                                    const ExtractionConfig& cfg) {
    JointExtraction out;
    out.subpaths_m = sage_estimate(h_m, array, band_m, cfg.sage).subpaths;
    out.subpaths_e = sage_estimate(h_e, array, band_e, cfg.sage).subpaths;
    for (auto& sp : out.subpaths_e) sp.band = Band::target;
    out.clusters = joint_cluster(out.subpaths_m, out.subpaths_e, band_m.delta_f, cfg.dbscan_eps,
                                 cfg.dbscan_min_pts);
    for (const auto& jc : out.clusters) {
        if (jc.measured.empty()) {
            out.extracted_m.push_back(
                {{}, CMat::Zero(array.total(), band_m.n_subcarriers), Band::measured});
        } else {
            out.extracted_m.push_back(aggregate_cluster(out.subpaths_m, jc.measured, array, band_m));
        }
        if (jc.target.empty()) {
            out.extracted_e.push_back(
                {{}, CMat::Zero(array.total(), band_e.n_subcarriers), Band::target});
        } else {
            out.extracted_e.push_back(aggregate_cluster(out.subpaths_e, jc.target, array, band_e));
        }
    }
    return out;
}

}  // namespace chanex
