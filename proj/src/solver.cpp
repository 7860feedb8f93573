#include "ifgf/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "ifgf/kernels.hpp"

namespace ifgf {

namespace {
using clock_t_ = std::chrono::steady_clock;
double seconds_since(clock_t_::time_point t0) {
    return std::chrono::duration<double>(clock_t_::now() - t0).count();
}
}  // namespace

double coupling_gamma(double diameter, double lambda) {
    if (diameter <= 0 || lambda <= 0)
        throw InvalidArgument("coupling_gamma: diameter and lambda must be positive");
    return std::max(3.0, diameter / lambda);
}

cplx incident_at(const IncidentField& field, const Vec3& x, double k) {
    if (field.kind == IncidentField::Kind::PlaneWave)
        return std::polar(1.0, k * dot(field.wave_direction(), x));
    cplx acc{};
    for (const Vec3& s : field.sources) {
        const double r = norm(x - s);
        if (r < 1e-12) throw InvalidArgument("incident_at: point source coincides with node");
        acc += std::polar(1.0 / r, k * r);
    }
    return acc;
}

std::vector<cplx> incident_trace(const IncidentField& field, const SurfaceMesh& mesh, double k) {
    std::vector<cplx> out(mesh.size());
    for (std::size_t l = 0; l < mesh.size(); ++l) out[l] = incident_at(field, mesh.pos[l], k);
    return out;
}

CombinedOperator::CombinedOperator(const SurfaceMesh& mesh, const SolveConfig& cfg)
    : mesh_(mesh), cfg_(cfg) {
    if (cfg.k <= 0) throw InvalidArgument("CombinedOperator: wavenumber must be positive");
    const double lambda = 2.0 * std::numbers::pi / cfg.k;
    gamma_ = cfg.gamma > 0 ? cfg.gamma : coupling_gamma(mesh.diameter(), lambda);

    const auto t0 = clock_t_::now();
    tree_ = build_octree(mesh.pos, cfg.k, cfg.finest_box_lambda);
    rel_ = compute_relations(tree_);
    plan_ = plan_cones(tree_, rel_, mesh.pos, mesh.normal, cfg.cone, cfg.workers);
    prox_ = classify_targets(mesh, tree_, rel_, cfg.rp, cfg.workers);

    strategy_ = cfg.dl_strategy;
    if (strategy_ == DlStrategy::Hybrid) {
        // W4 alone when no level is subwavelength
        bool any_sub = false;
        for (int d = 3; d <= tree_.depth; ++d)
            if (tree_.side(d) / lambda < 0.5 - 1e-12) any_sub = true;
        if (!any_sub) strategy_ = DlStrategy::W4;
    }

    const std::uint64_t key = beta_fingerprint(mesh, prox_, cfg.k);
    if (!cfg.beta_cache_path.empty()) {
        if (auto cached = load_beta_cache(cfg.beta_cache_path, key)) {
            prec_ = std::move(*cached);
            beta_cache_hit_ = true;
        }
    }
    if (!beta_cache_hit_) {
        prec_ = beta_precompute(mesh, prox_, cfg.k, cfg.workers);
        if (!cfg.beta_cache_path.empty()) save_beta_cache(cfg.beta_cache_path, prec_);
    }
    setup_seconds_ = seconds_since(t0);
}

void CombinedOperator::layer_potentials(std::span<const cplx> density,
                                        std::vector<cplx>& out_single,
                                        std::vector<cplx>& out_dbl) const {
    const std::size_t n = mesh_.size();
    if (density.size() != n) throw InvalidArgument("layer_potentials: density size mismatch");
    out_single.assign(n, cplx{});
    out_dbl.assign(n, cplx{});

    // quadrature-weighted sources so the far part is exactly the Fejer rule on far pairs
    std::vector<cplx> a(n);
    for (std::size_t m = 0; m < n; ++m) a[m] = density[m] * (mesh_.jac[m] * mesh_.weight[m]);

    IfgfRequest req;
    req.single_layer = true;
    req.double_layer = true;
    req.strategy = strategy_;
    IfgfOutputs far = ifgf_apply(plan_, a, req, cfg_.workers);
    for (std::size_t l = 0; l < n; ++l) {
        out_single[l] += far.single[l];
        out_dbl[l] += far.dbl[l];
    }

    // level-D neighbor pairs: direct regular sum unless the source patch is singular
    // for the target
    const auto& leaves = tree_.levels[tree_.depth - 1];
    const auto& nbs = rel_.neighbors[tree_.depth - 1];
    const int w = resolve_workers(cfg_.workers);
    const double k = cfg_.k;

    ParallelErrors perrs;
#pragma omp parallel for schedule(dynamic, 32) num_threads(w)
    for (std::int64_t l = 0; l < std::int64_t(n); ++l) {
        perrs.run([&, l] {
        std::vector<std::int32_t> sing;
        for (std::uint32_t pi = prox_.target_pair_begin[l]; pi < prox_.target_pair_begin[l + 1];
             ++pi)
            sing.push_back(prox_.pairs[pi].patch);
        const Vec3 x = mesh_.pos[l];
        cplx accs{}, accd{};
        const std::int32_t tb = tree_.leaf_of_point()[l];
        for (std::int32_t nb : nbs[tb]) {
            for (std::uint32_t t = leaves[nb].begin; t < leaves[nb].end; ++t) {
                const std::uint32_t m = tree_.perm[t];
                if (m == std::uint32_t(l)) continue;
                if (std::binary_search(sing.begin(), sing.end(),
                                       std::int32_t(mesh_.patch_of[m])))
                    continue;
                accs += green(x, mesh_.pos[m], k) * a[m];
                accd += dlayer_kernel(x, mesh_.pos[m], mesh_.normal[m], k) * a[m];
            }
        }
        // correction: singular patches integrate the whole patch, so their nodes outside
        // the neighbor scope (already counted by the IFGF far part) are subtracted
        for (std::uint32_t pi = prox_.target_pair_begin[l]; pi < prox_.target_pair_begin[l + 1];
             ++pi) {
            const SingularPair& sp = prox_.pairs[pi];
            for (std::uint32_t fi = sp.far_begin; fi < sp.far_end; ++fi) {
                const std::uint32_t m = prox_.far_nodes[fi];
                accs -= green(x, mesh_.pos[m], k) * a[m];
                accd -= dlayer_kernel(x, mesh_.pos[m], mesh_.normal[m], k) * a[m];
            }
        }
        out_single[l] += accs;
        out_dbl[l] += accd;
        });
    }
    perrs.rethrow();

    rp_singular_apply(mesh_, prox_, prec_, density, out_single, out_dbl, cfg_.workers);
}

std::vector<cplx> CombinedOperator::apply(std::span<const cplx> density) const {
    std::vector<cplx> s, d;
    layer_potentials(density, s, d);
    std::vector<cplx> out(mesh_.size());
    const cplx ig(0.0, gamma_);
    for (std::size_t l = 0; l < mesh_.size(); ++l)
        out[l] = 0.5 * density[l] + d[l] - ig * s[l];
    return out;
}

std::vector<cplx> CombinedOperator::apply_direct(std::span<const cplx> density) const {
    const std::size_t n = mesh_.size();
    std::vector<cplx> s(n, cplx{}), d(n, cplx{});
    layer_potential_direct(mesh_, prox_, prec_, density, s, d, cfg_.workers);
    std::vector<cplx> out(n);
    const cplx ig(0.0, gamma_);
    for (std::size_t l = 0; l < n; ++l) out[l] = 0.5 * density[l] + d[l] - ig * s[l];
    return out;
}

namespace {

double nrm2(std::span<const cplx> v) {
    double acc = 0;
    for (const cplx& x : v) acc += std::norm(x);
    return std::sqrt(acc);
}

GmresResult gmres_cycle(const std::function<std::vector<cplx>(std::span<const cplx>)>& apply,
                        std::span<const cplx> rhs, std::span<const cplx> x0, double tol,
                        int max_iter, double rhs_norm) {
    const std::size_t n = rhs.size();
    GmresResult res;

    std::vector<cplx> r(rhs.begin(), rhs.end());
    std::vector<cplx> x(x0.begin(), x0.end());
    bool have_x0 = false;
    for (const cplx& v : x)
        if (v != cplx{}) have_x0 = true;
    if (have_x0) {
        const auto ax = apply(x);
        for (std::size_t i = 0; i < n; ++i) r[i] -= ax[i];
    }

    const double beta = nrm2(r);
    if (beta / rhs_norm <= tol) {
        res.solution = std::move(x);
        res.converged = true;
        return res;
    }

    std::vector<std::vector<cplx>> V;
    V.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;

    const int m = max_iter;
    std::vector<std::vector<cplx>> H;  // H[j] has j+2 entries
    std::vector<cplx> cs(m), sn(m), g(m + 1, cplx{});
    g[0] = beta;

    int iters = 0;
    for (int j = 0; j < m; ++j) {
        auto wvec = apply(V[j]);
        H.emplace_back(j + 2, cplx{});
        for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
            cplx hij{};
            for (std::size_t t = 0; t < n; ++t) hij += std::conj(V[i][t]) * wvec[t];
            H[j][i] = hij;
            for (std::size_t t = 0; t < n; ++t) wvec[t] -= hij * V[i][t];
        }
        const double hnext = nrm2(wvec);
        H[j][j + 1] = hnext;
        ++iters;

        // apply accumulated rotations then form the new one
        for (int i = 0; i < j; ++i) {
            const cplx t = std::conj(cs[i]) * H[j][i] + std::conj(sn[i]) * H[j][i + 1];
            H[j][i + 1] = -sn[i] * H[j][i] + cs[i] * H[j][i + 1];
            H[j][i] = t;
        }
        const double denom = std::sqrt(std::norm(H[j][j]) + hnext * hnext);
        if (denom < 1e-300) {
            res.residual_history.push_back(std::abs(g[j]) / rhs_norm);
            throw ConvergenceFailure("gmres: Arnoldi breakdown", res.residual_history);
        }
        cs[j] = H[j][j] / denom;
        sn[j] = cplx(hnext / denom, 0.0);
        H[j][j] = std::conj(cs[j]) * H[j][j] + std::conj(sn[j]) * hnext;
        H[j][j + 1] = 0.0;
        g[j + 1] = -sn[j] * g[j];
        g[j] = std::conj(cs[j]) * g[j];

        const double rel = std::abs(g[j + 1]) / rhs_norm;
        res.residual_history.push_back(rel);

        const bool done = rel <= tol || j == m - 1 || hnext < 1e-14;
        if (done) {
            // back substitution for y, then x = x0 + V y
            std::vector<cplx> y(j + 1);
            for (int i = j; i >= 0; --i) {
                cplx acc = g[i];
                for (int t = i + 1; t <= j; ++t) acc -= H[t][i] * y[t];
                y[i] = acc / H[i][i];
            }
            for (int i = 0; i <= j; ++i)
                for (std::size_t t = 0; t < n; ++t) x[t] += y[i] * V[i][t];
            res.solution = std::move(x);
            res.iterations = iters;
            res.converged = rel <= tol;
            return res;
        }
        V.emplace_back(n);
        for (std::size_t t = 0; t < n; ++t) V[j + 1][t] = wvec[t] / hnext;
    }
    res.solution = std::move(x);
    res.iterations = iters;
    return res;
}

}  // namespace

GmresResult gmres_solve(const std::function<std::vector<cplx>(std::span<const cplx>)>& apply,
                        std::span<const cplx> rhs, double tol, int max_iter, int restart) {
    if (tol <= 0) throw InvalidArgument("gmres_solve: tolerance must be positive");
    const double rhs_norm = nrm2(rhs);
    if (rhs_norm == 0.0) {
        GmresResult res;
        res.solution.assign(rhs.size(), cplx{});
        res.converged = true;
        return res;
    }
    if (restart <= 0) {
        std::vector<cplx> x0(rhs.size(), cplx{});
        return gmres_cycle(apply, rhs, x0, tol, max_iter, rhs_norm);
    }
    GmresResult total;
    std::vector<cplx> x(rhs.size(), cplx{});
    while (total.iterations < max_iter) {
        const int cycle = std::min(restart, max_iter - total.iterations);
        auto res = gmres_cycle(apply, rhs, x, tol, cycle, rhs_norm);
        x = std::move(res.solution);
        total.iterations += res.iterations;
        total.residual_history.insert(total.residual_history.end(),
                                      res.residual_history.begin(), res.residual_history.end());
        if (res.converged) {
            total.converged = true;
            break;
        }
    }
    total.solution = std::move(x);
    return total;
}

SolveResult solve(const SurfaceMesh& mesh, const IncidentField& incident,
                  const SolveConfig& cfg) {
    SolveResult out;
    const auto t0 = clock_t_::now();

    CombinedOperator op(mesh, cfg);
    out.gamma = op.gamma();
    out.k = cfg.k;
    out.time_setup = op.setup_seconds();
    out.time_precompute = op.setup_seconds();  // beta tables dominate the setup

    const auto ui = incident_trace(incident, mesh, cfg.k);
    std::vector<cplx> rhs(ui.size());
    for (std::size_t i = 0; i < ui.size(); ++i) rhs[i] = -ui[i];

    int applies = 0;
    double apply_seconds = 0.0;
    auto apply = [&](std::span<const cplx> x) {
        const auto ta = clock_t_::now();
        auto y = op.apply(x);
        apply_seconds += seconds_since(ta);
        ++applies;
        return y;
    };

    auto res = gmres_solve(apply, rhs, cfg.tol, cfg.max_iter, cfg.restart);
    out.density = std::move(res.solution);
    out.residual_history = std::move(res.residual_history);
    out.iterations = res.iterations;
    out.converged = res.converged;
    out.time_apply_mean = applies > 0 ? apply_seconds / applies : 0.0;
    out.time_total = seconds_since(t0);
    if (!out.converged)
        throw ConvergenceFailure("solve: GMRES did not reach tolerance " +
                                     std::to_string(cfg.tol) + " in " +
                                     std::to_string(out.iterations) + " iterations",
                                 out.residual_history);
    return out;
}

}  // namespace ifgf
