#include "ifgf/rp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "ifgf/chebyshev.hpp"
#include "ifgf/kernels.hpp"

namespace ifgf {

namespace {

constexpr double kCoincident = 1e-14;
constexpr double kGoldenTol = 1e-12;
constexpr int kMaxSweeps = 50;
constexpr double kInvPhi = 0.6180339887498949;  // 1/phi

template <class F>
double golden_min(F&& f, double a, double b, double tol) {
    double c = b - (b - a) * kInvPhi;
    double d = a + (b - a) * kInvPhi;
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * kInvPhi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * kInvPhi;
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Tensor-grid patch evaluation: positions, unit normals and Jacobians at all (us x vs)
// points. Partial u-contraction makes the cost ~ du*dv per u-line instead of per point.
struct PatchGrid {
    std::vector<Vec3> pos, nrm;
    std::vector<double> jac;  // all sized nu_grid*nv_grid, u index fastest
};

void eval_series_grid(std::span<const double> coeff, int du, int dv,
                      std::span<const double> tu,  // precomputed T_i(us), nu_grid x du
                      std::span<const double> tv,  // T_j(vs), nv_grid x dv
                      int nus, int nvs, double* out) {
    // collapse u: partial[iu*dv + j] = sum_i coeff[i + du*j] T_i(us[iu])
    std::vector<double> partial(std::size_t(nus) * dv);
    for (int iu = 0; iu < nus; ++iu) {
        const double* t = tu.data() + std::size_t(iu) * du;
        for (int j = 0; j < dv; ++j) {
            const double* col = coeff.data() + std::size_t(du) * j;
            double acc = 0;
            for (int i = 0; i < du; ++i) acc += col[i] * t[i];
            partial[std::size_t(iu) * dv + j] = acc;
        }
    }
    for (int jv = 0; jv < nvs; ++jv) {
        const double* t = tv.data() + std::size_t(jv) * dv;
        for (int iu = 0; iu < nus; ++iu) {
            const double* p = partial.data() + std::size_t(iu) * dv;
            double acc = 0;
            for (int j = 0; j < dv; ++j) acc += p[j] * t[j];
            out[iu + std::size_t(nus) * jv] = acc;
        }
    }
}

PatchGrid patch_grid(const Patch& p, std::span<const double> us, std::span<const double> vs) {
    const int nus = int(us.size()), nvs = int(vs.size());
    std::vector<double> tu(std::size_t(nus) * p.du), tv(std::size_t(nvs) * p.dv);
    for (int i = 0; i < nus; ++i)
        cheb::eval_basis(p.du, std::clamp(us[i], -1.0, 1.0), tu.data() + std::size_t(i) * p.du);
    for (int j = 0; j < nvs; ++j)
        cheb::eval_basis(p.dv, std::clamp(vs[j], -1.0, 1.0), tv.data() + std::size_t(j) * p.dv);

    const std::size_t n = std::size_t(nus) * nvs;
    std::array<std::vector<double>, 3> x, xu, xv;
    for (int c = 0; c < 3; ++c) {
        x[c].resize(n);
        xu[c].resize(n);
        xv[c].resize(n);
        eval_series_grid(p.coeff[c], p.du, p.dv, tu, tv, nus, nvs, x[c].data());
        eval_series_grid(p.coeff_u[c], p.du, p.dv, tu, tv, nus, nvs, xu[c].data());
        eval_series_grid(p.coeff_v[c], p.du, p.dv, tu, tv, nus, nvs, xv[c].data());
    }
    PatchGrid g;
    g.pos.resize(n);
    g.nrm.resize(n);
    g.jac.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.pos[i] = {x[0][i], x[1][i], x[2][i]};
        const Vec3 cu{xu[0][i], xu[1][i], xu[2][i]};
        const Vec3 cv{xv[0][i], xv[1][i], xv[2][i]};
        const Vec3 cr = cross(cu, cv);
        g.jac[i] = norm(cr);
        g.nrm[i] = g.jac[i] > 0 ? cr * (p.orient / g.jac[i]) : Vec3{0, 0, 0};
    }
    return g;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

ClosestPointResult closest_point(const Patch& patch, const Vec3& x, double u0, double v0) {
    double u = std::clamp(u0, -1.0, 1.0);
    double v = std::clamp(v0, -1.0, 1.0);
    auto dist2_at = [&](double uu, double vv) { return norm2(x - eval_patch(patch, uu, vv)); };
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const double pu = u, pv = v;
        u = golden_min([&](double t) { return dist2_at(t, v); }, -1.0, 1.0, kGoldenTol);
        v = golden_min([&](double t) { return dist2_at(u, t); }, -1.0, 1.0, kGoldenTol);
        if (std::abs(u - pu) < kGoldenTol && std::abs(v - pv) < kGoldenTol) break;
    }
    ClosestPointResult r;
    r.u = u;
    r.v = v;
    r.dist = std::sqrt(dist2_at(u, v));
    return r;
}

double cov_w(double tau, int d) {
    if (tau < -1e-12 || tau > 2.0 * std::numbers::pi + 1e-12)
        throw InvalidArgument("cov_w: tau outside [0, 2pi]");
    tau = std::clamp(tau, 0.0, 2.0 * std::numbers::pi);
    auto nu = [&](double t) {
        const double a = (std::numbers::pi - t) / std::numbers::pi;
        const double b = (t - std::numbers::pi) / std::numbers::pi;
        return (1.0 / d - 0.5) * a * a * a + b / d + 0.5;
    };
    const double vd = std::pow(nu(tau), d);
    const double wd = std::pow(nu(2.0 * std::numbers::pi - tau), d);
    return 2.0 * std::numbers::pi * vd / (vd + wd);
}

double cov_w_deriv(double tau, int d) {
    tau = std::clamp(tau, 0.0, 2.0 * std::numbers::pi);
    auto nu = [&](double t) {
        const double a = (std::numbers::pi - t) / std::numbers::pi;
        const double b = (t - std::numbers::pi) / std::numbers::pi;
        return (1.0 / d - 0.5) * a * a * a + b / d + 0.5;
    };
    auto nu_d = [&](double t) {
        const double a = (std::numbers::pi - t) / std::numbers::pi;
        return -3.0 * (1.0 / d - 0.5) * a * a / std::numbers::pi + 1.0 / (d * std::numbers::pi);
    };
    const double n1 = nu(tau), n2 = nu(2.0 * std::numbers::pi - tau);
    const double p1 = std::pow(n1, d - 1), p2 = std::pow(n2, d - 1);
    const double f = p1 * n1, g = p2 * n2;  // nu^d
    const double fp = d * p1 * nu_d(tau);
    const double gp = -d * p2 * nu_d(2.0 * std::numbers::pi - tau);
    const double denom = (f + g) * (f + g);
    return 2.0 * std::numbers::pi * (fp * g - f * gp) / denom;
}

double cov_xi(double alpha, double tau, int d) {
    if (tau < -1.0 - 1e-12 || tau > 1.0 + 1e-12)
        throw InvalidArgument("cov_xi: tau outside [-1, 1]");
    tau = std::clamp(tau, -1.0, 1.0);
    if (alpha >= 1.0)
        return 1.0 - (2.0 / std::numbers::pi) * cov_w(std::numbers::pi * std::abs(tau - 1.0) / 2.0, d);
    if (alpha <= -1.0)
        return -1.0 + (2.0 / std::numbers::pi) * cov_w(std::numbers::pi * std::abs(tau + 1.0) / 2.0, d);
    const double sg = tau > 0 ? 1.0 : (tau < 0 ? -1.0 : 0.0);
    return alpha + (sg - alpha) / std::numbers::pi * cov_w(std::numbers::pi * std::abs(tau), d);
}

double cov_xi_deriv(double alpha, double tau, int d) {
    tau = std::clamp(tau, -1.0, 1.0);
    if (alpha >= 1.0) return cov_w_deriv(std::numbers::pi * (1.0 - tau) / 2.0, d);
    if (alpha <= -1.0) return cov_w_deriv(std::numbers::pi * (tau + 1.0) / 2.0, d);
    if (tau == 0.0) return 0.0;
    const double sg = tau > 0 ? 1.0 : -1.0;
    return (sg - alpha) * sg * cov_w_deriv(std::numbers::pi * std::abs(tau), d);
}

ProximityMap classify_targets(const SurfaceMesh& mesh, const Octree& tree,
                              const Relations& rel, const RpConfig& cfg, int workers) {
    if (cfg.n_beta < 2 || cfg.cov_d < 2)
        throw InvalidArgument("classify_targets: n_beta >= 2 and cov_d >= 2 required");
    const int n = int(mesh.size());
    const int q_count = int(mesh.patches.size());
    ProximityMap prox;
    prox.cfg = cfg;

    const auto spacing = mesh.max_node_spacing();
    prox.delta.resize(q_count);
    for (int q = 0; q < q_count; ++q)
        prox.delta[q] = cfg.delta_abs > 0 ? cfg.delta_abs : cfg.delta_rel * spacing[q];

    // patches present in each leaf box
    const auto& leaves = tree.levels[tree.depth - 1];
    std::vector<std::vector<std::int32_t>> box_patches(leaves.size());
    for (std::size_t b = 0; b < leaves.size(); ++b) {
        auto& v = box_patches[b];
        for (std::uint32_t t = leaves[b].begin; t < leaves[b].end; ++t)
            v.push_back(mesh.patch_of[tree.perm[t]]);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    struct LocalPair {
        std::int32_t patch;
        double ubar, vbar;
        std::vector<std::uint32_t> far;
    };
    std::vector<std::vector<LocalPair>> per_target(n);
    const int w = resolve_workers(workers);

#pragma omp parallel for schedule(dynamic, 64) num_threads(w)
    for (int l = 0; l < n; ++l) {
        const std::int32_t tb = tree.leaf_of_point()[l];
        const auto& nbs = rel.neighbors[tree.depth - 1][tb];
        std::vector<std::int32_t> candidates;
        for (std::int32_t nb : nbs)
            candidates.insert(candidates.end(), box_patches[nb].begin(), box_patches[nb].end());
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

        const Vec3 x = mesh.pos[l];
        for (std::int32_t q : candidates) {
            LocalPair lp;
            lp.patch = q;
            if (q == mesh.patch_of[l]) {
                lp.ubar = mesh.pu[l];
                lp.vbar = mesh.pv[l];
            } else {
                // nearest node of q as prune bound and search start
                double best = std::numeric_limits<double>::max();
                std::size_t bestn = mesh.patch_start[q];
                for (std::size_t m = mesh.patch_start[q]; m < mesh.patch_start[q + 1]; ++m) {
                    const double d2 = norm2(mesh.pos[m] - x);
                    if (d2 < best) {
                        best = d2;
                        bestn = m;
                    }
                }
                if (std::sqrt(best) > prox.delta[q] + spacing[q]) continue;
                const auto res =
                    closest_point(mesh.patches[q], x, mesh.pu[bestn], mesh.pv[bestn]);
                if (res.dist > prox.delta[q]) continue;
                lp.ubar = res.u;
                lp.vbar = res.v;
            }
            // patch nodes outside the target's neighbor scope (correction set)
            for (std::size_t m = mesh.patch_start[q]; m < mesh.patch_start[q + 1]; ++m) {
                const std::int32_t mb = tree.leaf_of_point()[m];
                if (!std::binary_search(nbs.begin(), nbs.end(), mb))
                    lp.far.push_back(std::uint32_t(m));
            }
            per_target[l].push_back(std::move(lp));
        }
    }

    prox.target_pair_begin.assign(n + 1, 0);
    for (int l = 0; l < n; ++l) {
        prox.target_pair_begin[l] = std::uint32_t(prox.pairs.size());
        for (auto& lp : per_target[l]) {
            SingularPair sp;
            sp.target = std::uint32_t(l);
            sp.patch = lp.patch;
            sp.ubar = lp.ubar;
            sp.vbar = lp.vbar;
            sp.far_begin = std::uint32_t(prox.far_nodes.size());
            prox.far_nodes.insert(prox.far_nodes.end(), lp.far.begin(), lp.far.end());
            sp.far_end = std::uint32_t(prox.far_nodes.size());
            prox.pairs.push_back(sp);
        }
    }
    prox.target_pair_begin[n] = std::uint32_t(prox.pairs.size());
    return prox;
}

std::uint64_t beta_fingerprint(const SurfaceMesh& mesh, const ProximityMap& prox, double k) {
    std::uint64_t h = 14695981039346656037ULL;
    h = fnv1a(&k, sizeof k, h);
    h = fnv1a(&prox.cfg.n_beta, sizeof prox.cfg.n_beta, h);
    h = fnv1a(&prox.cfg.cov_d, sizeof prox.cfg.cov_d, h);
    for (double d : prox.delta) h = fnv1a(&d, sizeof d, h);
    for (const auto& p : mesh.patches)
        for (int c = 0; c < 3; ++c)
            h = fnv1a(p.coeff[c].data(), p.coeff[c].size() * sizeof(double), h);
    for (const auto& sp : prox.pairs) {
        h = fnv1a(&sp.target, sizeof sp.target, h);
        h = fnv1a(&sp.patch, sizeof sp.patch, h);
        h = fnv1a(&sp.ubar, sizeof sp.ubar, h);
        h = fnv1a(&sp.vbar, sizeof sp.vbar, h);
    }
    return h;
}

SingularPrecompute beta_precompute(const SurfaceMesh& mesh, const ProximityMap& prox, double k,
                                   int workers) {
    SingularPrecompute prec;
    prec.n_beta = prox.cfg.n_beta;
    prec.cov_d = prox.cfg.cov_d;
    prec.k = k;
    prec.fingerprint = beta_fingerprint(mesh, prox, k);

    const int nb = prox.cfg.n_beta;
    const int covd = prox.cfg.cov_d;
    const auto rule = cheb::fejer_rule(nb);
    // Kernel zeroing radius. At distances of order 1e-14 the double-layer numerator
    // <x-y, nu> is rounding noise amplified by r^-3 into O(1) spurious contributions;
    // a patch-scale-relative radius keeps the omitted true mass below ~r0/4 per pair
    // while suppressing the noise entirely.
    const auto spacing = mesh.max_node_spacing();

    prec.offset.resize(prox.pairs.size() + 1);
    std::size_t total = 0;
    for (std::size_t i = 0; i < prox.pairs.size(); ++i) {
        prec.offset[i] = total;
        const auto& p = mesh.patches[prox.pairs[i].patch];
        total += std::size_t(p.nu) * p.nv;
    }
    prec.offset[prox.pairs.size()] = total;
    prec.beta_single.assign(total, cplx{});
    prec.beta_dbl.assign(total, cplx{});

    const int w = resolve_workers(workers);

#pragma omp parallel for schedule(dynamic, 8) num_threads(w)
    for (std::int64_t pi = 0; pi < std::int64_t(prox.pairs.size()); ++pi) {
        const SingularPair& sp = prox.pairs[pi];
        const Patch& p = mesh.patches[sp.patch];
        const Vec3 x = mesh.pos[sp.target];

        std::vector<double> us(nb), vs(nb), wu(nb), wv(nb);
        for (int i = 0; i < nb; ++i) {
            us[i] = cov_xi(sp.ubar, rule.nodes[i], covd);
            wu[i] = cov_xi_deriv(sp.ubar, rule.nodes[i], covd) * rule.weights[i];
            vs[i] = cov_xi(sp.vbar, rule.nodes[i], covd);
            wv[i] = cov_xi_deriv(sp.vbar, rule.nodes[i], covd) * rule.weights[i];
        }
        const PatchGrid grid = patch_grid(p, us, vs);

        // T_n(u_i), T_m(v_j) tables
        std::vector<double> tn(std::size_t(nb) * p.nu), tm(std::size_t(nb) * p.nv);
        for (int i = 0; i < nb; ++i)
            cheb::eval_basis(p.nu, std::clamp(us[i], -1.0, 1.0), tn.data() + std::size_t(i) * p.nu);
        for (int j = 0; j < nb; ++j)
            cheb::eval_basis(p.nv, std::clamp(vs[j], -1.0, 1.0), tm.data() + std::size_t(j) * p.nv);

        cplx* bs = prec.beta_single.data() + prec.offset[pi];
        cplx* bd = prec.beta_dbl.data() + prec.offset[pi];
        const double cutoff = std::max(kCoincident, 1e-8 * spacing[sp.patch]);
        std::vector<cplx> rows(std::size_t(p.nu));
        std::vector<cplx> rowd(std::size_t(p.nu));
        for (int j = 0; j < nb; ++j) {
            std::fill(rows.begin(), rows.end(), cplx{});
            std::fill(rowd.begin(), rowd.end(), cplx{});
            for (int i = 0; i < nb; ++i) {
                const std::size_t g = std::size_t(i) + std::size_t(nb) * j;
                const Vec3 y = grid.pos[g];
                const double r = norm(x - y);
                cplx ks{}, kd{};
                if (r >= cutoff) {  // kernel zeroed at (near-)coincident points
                    ks = green(x, y, k);
                    kd = dlayer_kernel(x, y, grid.nrm[g], k);
                }
                const double f = grid.jac[g] * wu[i] * wv[j];
                const cplx fs = ks * f, fd = kd * f;
                const double* t = tn.data() + std::size_t(i) * p.nu;
                for (int nidx = 0; nidx < p.nu; ++nidx) {
                    rows[nidx] += fs * t[nidx];
                    rowd[nidx] += fd * t[nidx];
                }
            }
            const double* t = tm.data() + std::size_t(j) * p.nv;
            for (int midx = 0; midx < p.nv; ++midx)
                for (int nidx = 0; nidx < p.nu; ++nidx) {
                    bs[nidx + std::size_t(p.nu) * midx] += rows[nidx] * t[midx];
                    bd[nidx + std::size_t(p.nu) * midx] += rowd[nidx] * t[midx];
                }
        }
    }
    return prec;
}

namespace {

// per-patch Chebyshev coefficients of the density
std::vector<cplx> density_coeffs(const SurfaceMesh& mesh, std::span<const cplx> density,
                                 std::vector<std::size_t>& starts, int workers) {
    starts.assign(mesh.patches.size() + 1, 0);
    for (std::size_t q = 0; q < mesh.patches.size(); ++q)
        starts[q + 1] = starts[q] + std::size_t(mesh.patches[q].nu) * mesh.patches[q].nv;
    std::vector<cplx> coeffs(starts.back());
    const int w = resolve_workers(workers);
#pragma omp parallel for schedule(static) num_threads(w)
    for (std::int64_t q = 0; q < std::int64_t(mesh.patches.size()); ++q) {
        const Patch& p = mesh.patches[q];
        const auto a = cheb::coeffs_2d(
            std::span<const cplx>(density.data() + mesh.patch_start[q],
                                  std::size_t(p.nu) * p.nv),
            p.nu, p.nv);
        std::copy(a.begin(), a.end(), coeffs.begin() + starts[q]);
    }
    return coeffs;
}

}  // namespace

void rp_singular_apply(const SurfaceMesh& mesh, const ProximityMap& prox,
                       const SingularPrecompute& prec, std::span<const cplx> density,
                       std::span<cplx> out_single, std::span<cplx> out_dbl, int workers) {
    if (density.size() != mesh.size() || out_single.size() != mesh.size() ||
        out_dbl.size() != mesh.size())
        throw InvalidArgument("rp_singular_apply: size mismatch");
    std::vector<std::size_t> starts;
    const auto coeffs = density_coeffs(mesh, density, starts, workers);
    const int n = int(mesh.size());
    const int w = resolve_workers(workers);

#pragma omp parallel for schedule(static) num_threads(w)
    for (int l = 0; l < n; ++l) {
        for (std::uint32_t pi = prox.target_pair_begin[l]; pi < prox.target_pair_begin[l + 1];
             ++pi) {
            const SingularPair& sp = prox.pairs[pi];
            const Patch& p = mesh.patches[sp.patch];
            const std::size_t nn = std::size_t(p.nu) * p.nv;
            const cplx* a = coeffs.data() + starts[sp.patch];
            const cplx* bs = prec.beta_single.data() + prec.offset[pi];
            const cplx* bd = prec.beta_dbl.data() + prec.offset[pi];
            cplx accs{}, accd{};
            for (std::size_t i = 0; i < nn; ++i) {
                accs += a[i] * bs[i];
                accd += a[i] * bd[i];
            }
            out_single[l] += accs;
            out_dbl[l] += accd;
        }
    }
}

void rp_regular_apply(const SurfaceMesh& mesh, std::span<const cplx> density,
                      std::span<const Vec3> targets, double k, std::span<cplx> out_single,
                      std::span<cplx> out_dbl, int workers) {
    if (density.size() != mesh.size())
        throw InvalidArgument("rp_regular_apply: density size mismatch");
    const int nt = int(targets.size());
    const int w = resolve_workers(workers);
    ParallelErrors errs;
#pragma omp parallel for schedule(static) num_threads(w)
    for (int t = 0; t < nt; ++t) {
        errs.run([&, t] {
            const Vec3 x = targets[t];
            cplx accs{}, accd{};
            for (std::size_t m = 0; m < mesh.size(); ++m) {
                const double r = norm(x - mesh.pos[m]);
                if (r < kCoincident)
                    throw InvalidArgument("rp_regular_apply: target coincides with a node");
                const cplx a = density[m] * (mesh.jac[m] * mesh.weight[m]);
                accs += green(x, mesh.pos[m], k) * a;
                accd += dlayer_kernel(x, mesh.pos[m], mesh.normal[m], k) * a;
            }
            out_single[t] += accs;
            out_dbl[t] += accd;
        });
    }
    errs.rethrow();
}

void layer_potential_direct(const SurfaceMesh& mesh, const ProximityMap& prox,
                            const SingularPrecompute& prec, std::span<const cplx> density,
                            std::span<cplx> out_single, std::span<cplx> out_dbl, int workers) {
    const int n = int(mesh.size());
    if (int(density.size()) != n) throw InvalidArgument("layer_potential_direct: size mismatch");
    rp_singular_apply(mesh, prox, prec, density, out_single, out_dbl, workers);
    const int w = resolve_workers(workers);

    ParallelErrors perrs;
#pragma omp parallel for schedule(dynamic, 32) num_threads(w)
    for (int l = 0; l < n; ++l) {
        perrs.run([&, l] {
        // patches handled by the singular path for this target
        std::vector<std::int32_t> sing;
        for (std::uint32_t pi = prox.target_pair_begin[l]; pi < prox.target_pair_begin[l + 1];
             ++pi)
            sing.push_back(prox.pairs[pi].patch);
        const Vec3 x = mesh.pos[l];
        cplx accs{}, accd{};
        for (std::size_t m = 0; m < mesh.size(); ++m) {
            if (std::size_t(l) == m) continue;
            if (std::binary_search(sing.begin(), sing.end(), std::int32_t(mesh.patch_of[m])))
                continue;
            const cplx a = density[m] * (mesh.jac[m] * mesh.weight[m]);
            accs += green(x, mesh.pos[m], prec.k) * a;
            accd += dlayer_kernel(x, mesh.pos[m], mesh.normal[m], prec.k) * a;
        }
        out_single[l] += accs;
        out_dbl[l] += accd;
        });
    }
    perrs.rethrow();
}

void save_beta_cache(const std::string& path, const SingularPrecompute& prec) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("save_beta_cache: cannot open " + path);
    f << "rpbeta v1\n";
    auto put = [&](const void* p, std::size_t n) { f.write(static_cast<const char*>(p), std::streamsize(n)); };
    const std::uint64_t npairs = prec.offset.size() - 1;
    const std::uint64_t ntab = prec.beta_single.size();
    put(&prec.fingerprint, 8);
    put(&prec.k, 8);
    put(&prec.n_beta, 4);
    put(&prec.cov_d, 4);
    put(&npairs, 8);
    put(&ntab, 8);
    put(prec.offset.data(), prec.offset.size() * sizeof(std::size_t));
    put(prec.beta_single.data(), ntab * sizeof(cplx));
    put(prec.beta_dbl.data(), ntab * sizeof(cplx));
    std::uint64_t check = 14695981039346656037ULL;
    check = fnv1a(prec.offset.data(), prec.offset.size() * sizeof(std::size_t), check);
    check = fnv1a(prec.beta_single.data(), ntab * sizeof(cplx), check);
    check = fnv1a(prec.beta_dbl.data(), ntab * sizeof(cplx), check);
    put(&check, 8);
}

std::optional<SingularPrecompute> load_beta_cache(const std::string& path,
                                                  std::uint64_t fingerprint) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    std::string header;
    if (!std::getline(f, header) || header != "rpbeta v1") return std::nullopt;
    SingularPrecompute prec;
    auto get = [&](void* p, std::size_t n) {
        f.read(static_cast<char*>(p), std::streamsize(n));
        return bool(f);
    };
    std::uint64_t npairs = 0, ntab = 0;
    if (!get(&prec.fingerprint, 8) || !get(&prec.k, 8) || !get(&prec.n_beta, 4) ||
        !get(&prec.cov_d, 4) || !get(&npairs, 8) || !get(&ntab, 8))
        return std::nullopt;
    if (prec.fingerprint != fingerprint) return std::nullopt;
    if (npairs > (1ULL << 40) || ntab > (1ULL << 40)) return std::nullopt;
    prec.offset.resize(npairs + 1);
    prec.beta_single.resize(ntab);
    prec.beta_dbl.resize(ntab);
    if (!get(prec.offset.data(), prec.offset.size() * sizeof(std::size_t)) ||
        !get(prec.beta_single.data(), ntab * sizeof(cplx)) ||
        !get(prec.beta_dbl.data(), ntab * sizeof(cplx)))
        return std::nullopt;
    std::uint64_t want = 0;
    if (!get(&want, 8)) return std::nullopt;
    std::uint64_t check = 14695981039346656037ULL;
    check = fnv1a(prec.offset.data(), prec.offset.size() * sizeof(std::size_t), check);
    check = fnv1a(prec.beta_single.data(), ntab * sizeof(cplx), check);
    check = fnv1a(prec.beta_dbl.data(), ntab * sizeof(cplx), check);
    if (check != want) return std::nullopt;
    return prec;
}

}  // namespace ifgf
