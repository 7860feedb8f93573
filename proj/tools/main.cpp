#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ifgf/config.hpp"
#include "ifgf/geometry.hpp"
#include "ifgf/postprocess.hpp"
#include "ifgf/solver.hpp"

namespace {

using namespace ifgf;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitNoConvergence = 4;
constexpr int kExitSelftest = 5;

struct Cli {
    RunConfig cfg;
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;

    void finalize() {
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        for (const auto& kv : overrides) apply_key_value(cfg, kv.first, kv.second);
        if (cfg.workers <= 0) {
            if (const char* env = std::getenv("IFGF_WORKERS")) cfg.workers = std::atoi(env);
        }
    }
};

void add_common_options(CLI::App* app, Cli& cli) {
    app->add_option("--config", cli.config_path, "key = value configuration file");
    auto opt = [&cli, app](const char* flag, const char* key, const char* help) {
        app->add_option_function<std::string>(
               flag,
               [&cli, key](const std::string& v) { cli.overrides.emplace_back(key, v); },
               help)
            ->take_all();
    };
    opt("--geometry", "geometry", "sphere | file");
    opt("--patch-file", "patch_file", "patch file path (geometry=file)");
    opt("--size-lambda", "size_lambda", "scatterer size in wavelengths");
    opt("--wavenumber", "wavenumber", "explicit wavenumber (overrides --size-lambda)");
    opt("--radius", "sphere_radius", "built-in sphere radius");
    opt("--splits", "splits", "4^k patch splits (-1: pick from size)");
    opt("--points-per-patch", "points_per_patch", "points per patch per direction");
    opt("--incident", "incident", "plane | points");
    opt("--inc-theta", "inc_theta", "plane-wave theta");
    opt("--inc-phi", "inc_phi", "plane-wave phi");
    opt("--tol", "tol", "GMRES relative residual tolerance");
    opt("--max-iter", "max_iter", "GMRES iteration cap");
    opt("--restart", "restart", "GMRES restart length (0 = none)");
    opt("--gamma", "gamma", "coupling parameter (<=0: max{3, A/lambda})");
    opt("--finest-box-lambda", "finest_box_lambda", "target finest box side in lambda");
    opt("--nc0", "n_c0", "base angular cone-interval count");
    opt("--ns0", "n_s0", "base radial cone-interval count");
    opt("--ps", "ps", "radial interpolation points");
    opt("--pang", "pang", "angular interpolation points");
    opt("--dl-strategy", "dl_strategy", "auto | w4 | w2w3 | hybrid");
    opt("--delta", "delta", "proximity distance in units of patch spacing");
    opt("--delta-abs", "delta_abs", "absolute proximity distance");
    opt("--nbeta", "nbeta", "graded-rule size per direction");
    opt("--cov-d", "cov_d", "grading exponent");
    opt("--out", "out", "output directory");
    opt("--workers", "workers", "worker threads (0: all, env IFGF_WORKERS)");
    opt("--seed", "seed", "RNG seed for test harnesses");
    opt("--far-nphi", "far_nphi", "far-field polar grid count");
    opt("--far-ntheta", "far_ntheta", "far-field azimuthal grid count");
    opt("--near-plane", "near_plane", "\"xy z0 min max min max nx ny\" (or xz / yz)");
}

SurfaceMesh make_geometry(const RunConfig& cfg) {
    if (cfg.geometry == "sphere")
        return build_sphere(cfg.sphere_radius, cfg.resolve_splits(), cfg.points_per_patch,
                            cfg.points_per_patch);
    if (cfg.geometry == "file") {
        if (cfg.patch_file.empty())
            throw InvalidArgument("geometry=file requires --patch-file");
        return load_patch_file(cfg.patch_file);
    }
    throw InvalidArgument("geometry must be 'sphere' or 'file'");
}

IncidentField make_incident(const RunConfig& cfg) {
    IncidentField inc;
    if (cfg.incident == "plane") {
        inc.kind = IncidentField::Kind::PlaneWave;
        inc.theta = cfg.inc_theta;
        inc.phi = cfg.inc_phi;
    } else if (cfg.incident == "points") {
        if (cfg.inc_sources.empty())
            throw InvalidArgument("incident=points requires inc_source entries");
        inc.kind = IncidentField::Kind::PointSources;
        inc.sources = cfg.inc_sources;
    } else {
        throw InvalidArgument("incident must be 'plane' or 'points'");
    }
    return inc;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot open " + path);
    f.write(text.data(), std::streamsize(text.size()));
}

void write_density_csv(const SurfaceMesh& mesh, const std::vector<cplx>& density,
                       const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw InvalidArgument("cannot open " + path);
    std::fprintf(f, "l,patch,u,v,x,y,z,re,im\n");
    for (std::size_t l = 0; l < mesh.size(); ++l)
        std::fprintf(f, "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", l,
                     mesh.patch_of[l], mesh.pu[l], mesh.pv[l], mesh.pos[l].x, mesh.pos[l].y,
                     mesh.pos[l].z, density[l].real(), density[l].imag());
    std::fclose(f);
}

NearFieldGrid make_near_grid(const RunConfig& cfg, const SurfaceMesh& mesh,
                             const std::vector<cplx>& density, double gamma, double k,
                             const IncidentField& inc) {
    std::istringstream ss(cfg.near_plane);
    std::string plane;
    double fixed, amin, amax, bmin, bmax;
    int na, nbp;
    if (!(ss >> plane >> fixed >> amin >> amax >> bmin >> bmax >> na >> nbp) || na < 2 ||
        nbp < 2)
        throw InvalidArgument("near_plane must be \"xy z0 amin amax bmin bmax na nb\"");
    std::vector<Vec3> pts;
    pts.reserve(std::size_t(na) * nbp);
    const double da = (amax - amin) / (na - 1), db = (bmax - bmin) / (nbp - 1);
    for (int j = 0; j < nbp; ++j)
        for (int i = 0; i < na; ++i) {
            const double a = amin + i * da, b = bmin + j * db;
            if (plane == "xy") pts.push_back({a, b, fixed});
            else if (plane == "xz") pts.push_back({a, fixed, b});
            else if (plane == "yz") pts.push_back({fixed, a, b});
            else throw InvalidArgument("near_plane axis must be xy, xz or yz");
        }
    const auto spacing = mesh.max_node_spacing();
    double flagd = cfg.delta_abs > 0 ? cfg.delta_abs : 0.0;
    if (flagd <= 0)
        for (double s : spacing) flagd = std::max(flagd, cfg.delta_rel * s);
    auto grid = near_field(mesh, density, gamma, k, inc, pts, flagd, cfg.workers);
    grid.nx = na;
    grid.ny = nbp;
    return grid;
}

int cmd_solve(Cli& cli, bool mie_validate) {
    RunConfig& cfg = cli.cfg;
    const auto mesh = make_geometry(cfg);
    const auto inc = make_incident(cfg);
    const double k = cfg.resolve_wavenumber(mesh.diameter());
    auto sc = cfg.solve_config(k);
    std::filesystem::create_directories(cfg.out_dir);
    if (cfg.use_beta_cache) sc.beta_cache_path = cfg.out_dir + "/rpbeta_cache.bin";

    SolveResult res;
    try {
        res = solve(mesh, inc, sc);
    } catch (ConvergenceFailure& e) {
        std::string hist = "converged = 0\nresidual_history =";
        char buf[64];
        for (double r : e.residual_history) {
            std::snprintf(buf, sizeof buf, " %.17g", r);
            hist += buf;
        }
        hist += "\n";
        write_text(cfg.out_dir + "/metadata.txt", hist);
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNoConvergence;
    }

    write_text(cfg.out_dir + "/metadata.txt", metadata_report(cfg, res, mesh.size()));
    {
        std::ostringstream os;
        os << "time_setup_seconds = " << res.time_setup << "\n";
        os << "time_precompute_seconds = " << res.time_precompute << "\n";
        os << "time_apply_mean_seconds = " << res.time_apply_mean << "\n";
        os << "time_total_seconds = " << res.time_total << "\n";
        write_text(cfg.out_dir + "/timings.txt", os.str());
    }
    write_density_csv(mesh, res.density, cfg.out_dir + "/density.csv");

    auto grid =
        far_field(mesh, res.density, res.gamma, k, cfg.far_nphi, cfg.far_ntheta, cfg.workers);
    write_far_field_csv(grid, cfg.out_dir + "/farfield.csv");

    if (!cfg.near_plane.empty()) {
        const auto nf = make_near_grid(cfg, mesh, res.density, res.gamma, k, inc);
        write_near_field_csv(nf, cfg.out_dir + "/nearfield.csv");
    }

    std::printf("solved: %zu unknowns, %d iterations, gamma %.6g\n", mesh.size(),
                res.iterations, res.gamma);
    std::printf("timings: setup %.2fs, apply %.3fs/iter, total %.2fs\n", res.time_setup,
                res.time_apply_mean, res.time_total);

    if (mie_validate) {
        if (cfg.geometry != "sphere")
            throw InvalidArgument("mie-validate requires the built-in sphere");
        const auto mie =
            mie_far_field(cfg.sphere_radius, k, inc.wave_direction(), grid.directions);
        int skipped = 0;
        const double ef = eps_far(mie, grid.values, &skipped);
        std::ostringstream os;
        os << "unknowns = " << mesh.size() << "\n"
           << "iterations = " << res.iterations << "\n";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", ef);
        os << "eps_far = " << buf << "\n"
           << "reference_zeros_skipped = " << skipped << "\n";
        write_text(cfg.out_dir + "/mie_report.txt", os.str());
        std::printf("eps_far = %.6e (vs Mie series, %dx%d grid)\n", ef, cfg.far_nphi,
                    cfg.far_ntheta);
    }
    return kExitOk;
}

int cmd_benchmark(Cli& cli, const std::vector<double>& sizes) {
    RunConfig& cfg = cli.cfg;
    if (cfg.geometry != "sphere")
        throw InvalidArgument("benchmark uses the built-in sphere");
    std::filesystem::create_directories(cfg.out_dir);
    std::FILE* f = std::fopen((cfg.out_dir + "/benchmark.csv").c_str(), "wb");
    if (!f) throw InvalidArgument("cannot open benchmark.csv");
    std::fprintf(f, "size_lambda,unknowns,apply_seconds,segments,interp_points\n");

    std::vector<double> times;
    std::vector<std::size_t> ns;
    for (double size : sizes) {
        RunConfig rc = cfg;
        rc.size_lambda = size;
        const auto mesh = make_geometry(rc);
        const double k = rc.resolve_wavenumber(mesh.diameter());
        const auto sc = rc.solve_config(k);
        CombinedOperator op(mesh, sc);

        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> u(-1, 1);
        std::vector<cplx> phi(mesh.size());
        for (auto& v : phi) v = cplx(u(rng), u(rng));

        op.apply(phi);  // warm up
        double best = 1e300;
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            op.apply(phi);
            best = std::min(
                best,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        std::size_t segs = 0, ipts = 0;
        for (int d = 3; d <= op.tree().depth; ++d) {
            segs += op.plan().level_segs[d - 1].segs.size();
            ipts += op.plan().level_segs[d - 1].segs.size() *
                    std::size_t(op.plan().level_cones[d - 1].points_per_seg());
        }
        std::printf("size %.3g lambda: N=%zu apply=%.3fs segments=%zu\n%s", size, mesh.size(),
                    best, segs, op.plan().diagnostics().c_str());
        std::fprintf(f, "%.17g,%zu,%.17g,%zu,%zu\n", size, mesh.size(), best, segs, ipts);
        times.push_back(best);
        ns.push_back(mesh.size());
    }
    std::fclose(f);
    if (times.size() >= 2) {
        double geo = 1.0;
        int count = 0;
        for (std::size_t i = 1; i < times.size(); ++i) {
            const double ratio = times[i] / times[i - 1];
            std::printf("growth %zu -> %zu unknowns: x%.2f per apply\n", ns[i - 1], ns[i],
                        ratio);
            geo *= ratio;
            ++count;
        }
        std::printf("geometric-mean growth per step: x%.2f\n", std::pow(geo, 1.0 / count));
    }
    return kExitOk;
}

struct SelftestReport {
    int failures = 0;
    void check(const char* name, bool ok, const std::string& detail = "") {
        std::printf("[%s] %s%s%s\n", ok ? "pass" : "FAIL", name, detail.empty() ? "" : ": ",
                    detail.c_str());
        if (!ok) ++failures;
    }
};

int cmd_selftest(Cli& cli) {
    RunConfig& cfg = cli.cfg;
    SelftestReport rep;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-1, 1);
    char detail[128];

    {  // Fejer exactness and Chebyshev round trip
        bool ok = true;
        for (int J : {1, 2, 5, 9}) {
            const auto r = cheb::fejer_rule(J);
            for (int m = 0; m < J; ++m) {
                double q = 0;
                for (int j = 0; j < J; ++j) q += r.weights[j] * std::pow(r.nodes[j], m);
                ok = ok && std::abs(q - (m % 2 ? 0.0 : 2.0 / (m + 1))) < 1e-12;
            }
        }
        const int n = 9;
        std::vector<cplx> samples(n);
        for (auto& s : samples) s = cplx(u(rng), u(rng));
        const auto a = cheb::coeffs_1d(samples);
        const auto xs = cheb::cheb_nodes(n);
        for (int i = 0; i < n; ++i)
            ok = ok && std::abs(cheb::eval_1d(a, xs[i]) - samples[i]) < 1e-12;
        rep.check("fejer exactness / chebyshev round trip", ok);
    }

    {  // factorization identities
        double worst = 0;
        for (int t = 0; t < 300; ++t) {
            const BoxFrame f{{u(rng), u(rng), u(rng)}, 0.4 + 0.6 * std::abs(u(rng))};
            const Vec3 y = f.center + Vec3{u(rng), u(rng), u(rng)} * (0.5 * f.side);
            Vec3 nu{u(rng), u(rng), u(rng)};
            nu = nu / norm(nu);
            const double k = 0.5 + 4.0 * std::abs(u(rng));
            Vec3 dir{u(rng), u(rng), u(rng)};
            dir = dir / norm(dir);
            const Vec3 x = f.center + dir * ((1.5 + 8.0 * std::abs(u(rng))) * f.side);
            const ConeCoords c = cartesian_to_cone(x, f);
            const cplx phi = green(x, y, k);
            const cplx fac = centered_factor(Factor::W1, c, f, k) *
                             analytic_factor(Factor::W1, c, y, nu, f, k);
            worst = std::max(worst, std::abs(fac - phi) / std::abs(phi));
            const double rxy = norm(x - y);
            const double scale = (1.0 + k * rxy) / (4 * std::numbers::pi * rxy * rxy);
            const cplx dl = dlayer_kernel(x, y, nu, k);
            const cplx dl4 = centered_factor(Factor::W4, c, f, k) *
                             analytic_factor(Factor::W4, c, y, nu, f, k);
            worst = std::max(worst, std::abs(dl4 - dl) / scale);
        }
        std::snprintf(detail, sizeof detail, "max rel %.2e", worst);
        rep.check("factorization identities", worst < 1e-13, detail);
    }

    const auto mesh = build_sphere(1.0, 1, 6, 6);

    {  // static Gauss identities through the beta tables, plus cache rejection
        const double k0 = 0.0;
        const auto tree = build_octree(mesh.pos, 2 * std::numbers::pi, 0.5);
        const auto rel = compute_relations(tree);
        RpConfig rp;
        rp.delta_rel = cfg.delta_rel;
        rp.delta_abs = cfg.delta_abs;
        rp.n_beta = cfg.n_beta;
        rp.cov_d = cfg.cov_d;
        const auto prox = classify_targets(mesh, tree, rel, rp, cfg.workers);
        auto prec = beta_precompute(mesh, prox, k0, cfg.workers);

        std::filesystem::create_directories(cfg.out_dir);
        const std::string cache = cfg.out_dir + "/selftest_beta.bin";
        save_beta_cache(cache, prec);
        {
            std::fstream fz(cache, std::ios::in | std::ios::out | std::ios::binary);
            fz.seekp(256);
            const char junk = 0x77;
            fz.write(&junk, 1);
        }
        const bool rejected = !load_beta_cache(cache, prec.fingerprint).has_value();
        if (rejected) prec = beta_precompute(mesh, prox, k0, cfg.workers);
        std::filesystem::remove(cache);

        std::vector<cplx> density(mesh.size(), cplx(1, 0));
        std::vector<cplx> outs(mesh.size(), cplx{}), outd(mesh.size(), cplx{});
        layer_potential_direct(mesh, prox, prec, density, outs, outd, cfg.workers);
        double es = 0, ed = 0;
        for (std::size_t l = 0; l < mesh.size(); ++l) {
            es = std::max(es, std::abs(outs[l] - cplx(1, 0)));
            ed = std::max(ed, std::abs(outd[l] + cplx(0.5, 0)));
        }
        std::snprintf(detail, sizeof detail, "S err %.2e, D err %.2e, cache rejected %d", es,
                      ed, int(rejected));
        rep.check("static potential identities (beta tables)",
                  es < 1e-4 && ed < 1e-4 && rejected, detail);
    }

    {  // IFGF against brute force with the configured interpolation orders
        SolveConfig sc;
        sc.k = 2 * std::numbers::pi;
        sc.cone.ps = cfg.ps;
        sc.cone.pang = cfg.pang;
        sc.cone.n_c0 = cfg.n_c0;
        sc.cone.n_s0 = cfg.n_s0;
        sc.rp.n_beta = cfg.n_beta;
        sc.rp.cov_d = cfg.cov_d;
        sc.workers = cfg.workers;
        CombinedOperator op(mesh, sc);
        std::vector<cplx> phi(mesh.size());
        for (auto& v : phi) v = cplx(u(rng), u(rng));
        const auto fast = op.apply(phi);
        const auto direct = op.apply_direct(phi);
        double scale = 0, worst = 0;
        for (const auto& v : direct) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < fast.size(); ++i)
            worst = std::max(worst, std::abs(fast[i] - direct[i]) / scale);
        std::snprintf(detail, sizeof detail, "max rel %.2e (ps=%d pang=%d)", worst, cfg.ps,
                      cfg.pang);
        rep.check("accelerated apply vs non-accelerated reference", worst < 1e-3, detail);

        SolveConfig sc1 = sc, sc2 = sc;
        sc1.workers = 1;
        sc2.workers = 2;
        CombinedOperator op1(mesh, sc1), op2(mesh, sc2);
        const auto a1 = op1.apply(phi);
        const auto a2 = op2.apply(phi);
        bool same = true;
        for (std::size_t i = 0; i < a1.size(); ++i) same = same && a1[i] == a2[i];
        rep.check("bitwise determinism across worker counts", same);
    }

    {  // cone tiling assignment
        LevelCones lc;
        lc.ns = 2;
        lc.nc = 4;
        lc.ps = 3;
        lc.pang = 5;
        lc.ds = kConeEta / lc.ns;
        lc.dth = std::numbers::pi / lc.nc;
        lc.dph = std::numbers::pi / lc.nc;
        bool ok = true;
        for (int t = 0; t < 2000; ++t) {
            const ConeCoords c{1e-6 + (kConeEta - 1e-6) * std::abs(u(rng)),
                               std::numbers::pi * std::abs(u(rng)),
                               2 * std::numbers::pi * 0.9999 * std::abs(u(rng))};
            int g1, g2, g3;
            lc.segment_of(c, g1, g2, g3);
            ok = ok && g1 >= 1 && g1 <= lc.ns && g2 >= 1 && g2 <= lc.nc && g3 >= 1 &&
                 g3 <= 2 * lc.nc;
            ok = ok && c.s >= (g1 - 1) * lc.ds - 1e-12 && c.s <= g1 * lc.ds + 1e-12;
            ok = ok && c.theta >= (g2 - 1) * lc.dth - 1e-12 &&
                 c.theta <= g2 * lc.dth + 1e-12;
            ok = ok && c.phi >= (g3 - 1) * lc.dph - 1e-12 && c.phi <= g3 * lc.dph + 1e-12;
        }
        int g1, g2, g3;
        lc.segment_of({0.3, std::numbers::pi, 0.0}, g1, g2, g3);
        ok = ok && g2 == lc.nc && g3 == 2 * lc.nc;
        rep.check("cone tiling assignment", ok);
    }

    {  // pair accounting, N <= 500
        std::vector<Vec3> pts;
        std::mt19937_64 prng(cfg.seed + 1);
        std::uniform_real_distribution<double> pu(-1, 1);
        while (pts.size() < 420) {
            Vec3 p{pu(prng), pu(prng), pu(prng)};
            const double r = norm(p);
            if (r > 0.2) pts.push_back(p / r);
        }
        const auto tree = build_octree(pts, 2 * std::numbers::pi / 0.5, 0.5);
        const auto rel = compute_relations(tree);
        const int n = int(pts.size());
        std::vector<int> count(std::size_t(n) * n, 0);
        const auto& leaves = tree.levels[tree.depth - 1];
        for (std::size_t b = 0; b < leaves.size(); ++b)
            for (auto nb : rel.neighbors[tree.depth - 1][b])
                for (auto t1 = leaves[b].begin; t1 < leaves[b].end; ++t1)
                    for (auto t2 = leaves[nb].begin; t2 < leaves[nb].end; ++t2)
                        count[std::size_t(tree.perm[t1]) * n + tree.perm[t2]]++;
        for (int d = 3; d <= tree.depth; ++d) {
            const auto& boxes = tree.levels[d - 1];
            for (std::size_t b = 0; b < boxes.size(); ++b)
                for (auto cb : rel.cousins[d - 1][b])
                    for (auto t1 = boxes[b].begin; t1 < boxes[b].end; ++t1)
                        for (auto t2 = boxes[cb].begin; t2 < boxes[cb].end; ++t2)
                            count[std::size_t(tree.perm[t1]) * n + tree.perm[t2]]++;
        }
        bool ok = true;
        for (std::size_t i = 0; i < count.size(); ++i) ok = ok && count[i] == 1;
        rep.check("pair accounting (each pair at exactly one level)", ok);
    }

    {  // GMRES residual monotonicity
        const std::size_t n = 36;
        std::vector<cplx> A(n * n);
        for (auto& v : A) v = cplx(u(rng), u(rng)) * 0.15;
        for (std::size_t i = 0; i < n; ++i) A[i * n + i] += 2.5;
        std::vector<cplx> rhs(n);
        for (auto& v : rhs) v = cplx(u(rng), u(rng));
        auto dense = [&](std::span<const cplx> x) {
            std::vector<cplx> y(n, cplx{});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) y[i] += A[i * n + j] * x[j];
            return y;
        };
        const auto res = gmres_solve(dense, rhs, 1e-12, 80);
        bool ok = res.converged;
        for (std::size_t i = 1; i < res.residual_history.size(); ++i)
            ok = ok && res.residual_history[i] <= res.residual_history[i - 1] + 1e-15;
        rep.check("gmres convergence and residual monotonicity", ok);
    }

    std::printf("%s\n", rep.failures == 0 ? "selftest: all checks passed"
                                          : "selftest: FAILURES present");
    return rep.failures == 0 ? kExitOk : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ifgf-solver: accelerated combined-field solver for sound-soft scattering"};
    app.require_subcommand(1);

    Cli cli;
    std::vector<double> bench_sizes{2.0, 4.0, 8.0};

    auto* solve_cmd = app.add_subcommand("solve", "solve and write artifacts");
    add_common_options(solve_cmd, cli);
    auto* mie_cmd = app.add_subcommand("mie-validate", "solve a sphere and compare to Mie");
    add_common_options(mie_cmd, cli);
    auto* bench_cmd = app.add_subcommand("benchmark", "per-apply scaling over sphere sizes");
    add_common_options(bench_cmd, cli);
    bench_cmd->add_option("--sizes", bench_sizes, "sphere sizes in lambda");
    auto* self_cmd = app.add_subcommand("selftest", "fixed-seed verification suite");
    add_common_options(self_cmd, cli);

    CLI11_PARSE(app, argc, argv);

    try {
        cli.finalize();
        if (solve_cmd->parsed()) return cmd_solve(cli, false);
        if (mie_cmd->parsed()) return cmd_solve(cli, true);
        if (bench_cmd->parsed()) return cmd_benchmark(cli, bench_sizes);
        if (self_cmd->parsed()) return cmd_selftest(cli);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return kExitParse;
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ConvergenceFailure& e) {
        std::fprintf(stderr, "convergence failure: %s\n", e.what());
        return kExitNoConvergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInternal;
    }
    return kExitInternal;
}
