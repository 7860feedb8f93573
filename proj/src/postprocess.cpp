#include "ifgf/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "ifgf/chebyshev.hpp"
#include "ifgf/kernels.hpp"

namespace ifgf {

namespace {

// Oversampled surface quadrature for field evaluation. The per-patch Fejer rule is
// refined so the e^{ik x.y}-type oscillation across a patch is resolved even when the
// solve itself ran at the coarser nodal rule; the density rides along through its
// per-patch Chebyshev expansion.
struct FineQuad {
    std::vector<Vec3> pos, nrm;
    std::vector<double> jw;
    std::vector<cplx> density;
};

FineQuad oversample_for_fields(const SurfaceMesh& mesh, std::span<const cplx> density,
                               double k) {
    FineQuad out;
    for (std::size_t q = 0; q < mesh.patches.size(); ++q) {
        const Patch& p = mesh.patches[q];
        // patch extent from its nodes
        Vec3 lo = mesh.pos[mesh.patch_start[q]], hi = lo;
        for (std::size_t l = mesh.patch_start[q]; l < mesh.patch_start[q + 1]; ++l) {
            const Vec3 y = mesh.pos[l];
            lo = {std::min(lo.x, y.x), std::min(lo.y, y.y), std::min(lo.z, y.z)};
            hi = {std::max(hi.x, y.x), std::max(hi.y, y.y), std::max(hi.z, y.z)};
        }
        const double diam = norm(hi - lo);
        const int m = std::min(
            24, std::max({p.nu, p.nv, 8 + int(std::ceil(0.75 * k * diam))}));

        std::vector<cplx> samples(std::size_t(p.nu) * p.nv);
        for (std::size_t i = 0; i < samples.size(); ++i)
            samples[i] = density[mesh.patch_start[q] + i];
        const auto a = cheb::coeffs_2d(samples, p.nu, p.nv);

        const auto rule = cheb::fejer_rule(m);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                const double u = rule.nodes[i], v = rule.nodes[j];
                const PatchFrame f = patch_frame(p, u, v);
                out.pos.push_back(eval_patch(p, u, v));
                out.nrm.push_back(f.normal);
                out.jw.push_back(f.jac * rule.weights[i] * rule.weights[j]);
                out.density.push_back(cheb::eval_2d(a, p.nu, p.nv, u, v));
            }
    }
    return out;
}

}  // namespace

FarFieldGrid FarFieldGrid::make(int n_phi, int n_theta) {
    if (n_phi < 2 || n_theta < 2)
        throw InvalidArgument("FarFieldGrid: need at least 2 points per direction");
    FarFieldGrid g;
    g.n_phi = n_phi;
    g.n_theta = n_theta;
    const double dphi = std::numbers::pi / (n_phi - 1);
    const double dtheta = 2.0 * std::numbers::pi / (n_theta - 1);
    g.directions.resize(std::size_t(n_phi) * n_theta);
    for (int n = 0; n < n_theta; ++n)
        for (int m = 0; m < n_phi; ++m) {
            const double phi = m * dphi;      // polar angle in [0, pi]
            const double theta = n * dtheta;  // azimuth in [0, 2pi]
            g.directions[m + std::size_t(n_phi) * n] = {std::cos(theta) * std::sin(phi),
                                                        std::sin(theta) * std::sin(phi),
                                                        std::cos(phi)};
        }
    g.values.assign(g.directions.size(), cplx{});
    return g;
}

FarFieldGrid far_field(const SurfaceMesh& mesh, std::span<const cplx> density, double gamma,
                       double k, int n_phi, int n_theta, int workers) {
    if (density.size() != mesh.size()) throw InvalidArgument("far_field: density size mismatch");
    FarFieldGrid grid = FarFieldGrid::make(n_phi, n_theta);
    const int total = int(grid.directions.size());
    const int w = resolve_workers(workers);
    constexpr double inv4pi = 1.0 / (4.0 * std::numbers::pi);
    const FineQuad fq = oversample_for_fields(mesh, density, k);

#pragma omp parallel for schedule(static) num_threads(w)
    for (int g = 0; g < total; ++g) {
        const Vec3 xhat = grid.directions[g];
        cplx acc{};
        for (std::size_t m = 0; m < fq.pos.size(); ++m) {
            // d/dnu(y) e^{-ik xhat.y} = -ik <xhat,nu(y)> e^{-ik xhat.y}
            const cplx ph = std::polar(1.0, -k * dot(xhat, fq.pos[m]));
            const cplx factor(0.0, -k * dot(xhat, fq.nrm[m]) - gamma);
            acc += factor * ph * fq.density[m] * fq.jw[m];
        }
        grid.values[g] = inv4pi * acc;
    }
    return grid;
}

NearFieldGrid near_field(const SurfaceMesh& mesh, std::span<const cplx> density, double gamma,
                         double k, const IncidentField& incident,
                         std::span<const Vec3> points, double flag_distance, int workers) {
    if (density.size() != mesh.size())
        throw InvalidArgument("near_field: density size mismatch");
    NearFieldGrid g;
    g.points.assign(points.begin(), points.end());
    const int total = int(points.size());
    g.scattered.assign(total, cplx{});
    g.total.assign(total, cplx{});
    g.flagged.assign(total, 0);
    const int w = resolve_workers(workers);
    const cplx ig(0.0, gamma);
    const FineQuad fq = oversample_for_fields(mesh, density, k);

#pragma omp parallel for schedule(static) num_threads(w)
    for (int t = 0; t < total; ++t) {
        const Vec3 x = points[t];
        double dmin = std::numeric_limits<double>::max();
        double gauss = 0.0;  // static double layer of unit density: -1 inside, 0 outside
        cplx accs{}, accd{};
        for (std::size_t m = 0; m < fq.pos.size(); ++m) {
            const Vec3 d = x - fq.pos[m];
            const double r = norm(d);
            dmin = std::min(dmin, r);
            if (r < 1e-14) continue;
            const cplx a = fq.density[m] * fq.jw[m];
            accs += green(x, fq.pos[m], k) * a;
            accd += dlayer_kernel(x, fq.pos[m], fq.nrm[m], k) * a;
            gauss += dot(d, fq.nrm[m]) / (4 * std::numbers::pi * r * r * r) * fq.jw[m];
        }
        g.scattered[t] = accd - ig * accs;
        g.total[t] = g.scattered[t] + incident_at(incident, x, k);
        if (dmin <= flag_distance || gauss < -0.5) g.flagged[t] = 1;
    }
    return g;
}

namespace {

// spherical Bessel j_l by downward recurrence, y_l upward; stable for l up to ~200
void spherical_bessel(int lmax, double x, std::vector<double>& j, std::vector<double>& y) {
    j.assign(lmax + 1, 0.0);
    y.assign(lmax + 1, 0.0);
    if (x <= 0) throw InvalidArgument("spherical_bessel: x must be positive");
    const int start = lmax + 24 + int(std::ceil(std::sqrt(40.0 * (lmax + 1))));
    std::vector<double> tmp(start + 2, 0.0);
    tmp[start + 1] = 0.0;
    tmp[start] = 1e-280;
    for (int l = start; l >= 1; --l) {
        tmp[l - 1] = (2.0 * l + 1.0) / x * tmp[l] - tmp[l + 1];
        if (std::abs(tmp[l - 1]) > 1e250) {
            for (int t = l - 1; t <= start + 1; ++t) tmp[t] *= 1e-250;
        }
    }
    // normalize against the better-conditioned of j0, j1 (each vanishes near its
    // own zeros, e.g. sin(x)/x at multiples of pi)
    const double j0 = std::sin(x) / x;
    const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
    const double scale =
        std::abs(j0) >= std::abs(j1) ? j0 / tmp[0] : j1 / tmp[1];
    for (int l = 0; l <= lmax; ++l) j[l] = tmp[l] * scale;

    y[0] = -std::cos(x) / x;
    if (lmax >= 1) y[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
    for (int l = 2; l <= lmax; ++l) y[l] = (2.0 * l - 1.0) / x * y[l - 1] - y[l - 2];
}

}  // namespace

std::vector<cplx> mie_far_field(double radius, double k, const Vec3& direction,
                                std::span<const Vec3> eval_directions, int extra_terms) {
    if (radius <= 0 || k <= 0) throw InvalidArgument("mie_far_field: need kR > 0");
    const double x = k * radius;
    const int L = int(std::ceil(x + 6.0 * std::cbrt(x) + 20.0)) + extra_terms;

    std::vector<double> jl, yl;
    spherical_bessel(L, x, jl, yl);
    std::vector<cplx> ratio(L + 1);
    for (int l = 0; l <= L; ++l) ratio[l] = jl[l] / cplx(jl[l], yl[l]);

    const Vec3 dhat = direction / norm(direction);
    std::vector<cplx> out(eval_directions.size());
    for (std::size_t t = 0; t < eval_directions.size(); ++t) {
        const Vec3 e = eval_directions[t] / norm(eval_directions[t]);
        const double mu = std::clamp(dot(e, dhat), -1.0, 1.0);
        // Legendre recurrence
        double p0 = 1.0, p1 = mu;
        cplx acc = ratio[0] * p0;
        if (L >= 1) acc += 3.0 * ratio[1] * p1;
        for (int l = 2; l <= L; ++l) {
            const double p = ((2.0 * l - 1.0) * mu * p1 - (l - 1.0) * p0) / l;
            acc += (2.0 * l + 1.0) * ratio[l] * p;
            p0 = p1;
            p1 = p;
        }
        out[t] = cplx(0.0, 1.0) / k * acc;
    }
    return out;
}

namespace {

double eps_metric(std::span<const cplx> reference, std::span<const cplx> approx, int* skipped) {
    if (reference.size() != approx.size())
        throw InvalidArgument("eps metric: grid size mismatch");
    double worst = 0.0;
    int skip = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double r = std::abs(reference[i]);
        if (r == 0.0) {
            ++skip;
            continue;
        }
        worst = std::max(worst, std::abs(r - std::abs(approx[i])) / r);
    }
    if (skipped) *skipped = skip;
    return worst;
}

}  // namespace

double eps_far(std::span<const cplx> reference, std::span<const cplx> approx, int* skipped) {
    return eps_metric(reference, approx, skipped);
}
double eps_near(std::span<const cplx> reference, std::span<const cplx> approx, int* skipped) {
    return eps_metric(reference, approx, skipped);
}

namespace {
void print_real(std::FILE* f, double v, bool last = false) {
    std::fprintf(f, "%.17g%c", v, last ? '\n' : ',');
}
}  // namespace

void write_far_field_csv(const FarFieldGrid& grid, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw InvalidArgument("write_far_field_csv: cannot open " + path);
    std::fprintf(f, "m,n,dir_x,dir_y,dir_z,re,im,abs\n");
    for (int n = 0; n < grid.n_theta; ++n)
        for (int m = 0; m < grid.n_phi; ++m) {
            const std::size_t i = m + std::size_t(grid.n_phi) * n;
            std::fprintf(f, "%d,%d,", m, n);
            print_real(f, grid.directions[i].x);
            print_real(f, grid.directions[i].y);
            print_real(f, grid.directions[i].z);
            print_real(f, grid.values[i].real());
            print_real(f, grid.values[i].imag());
            print_real(f, std::abs(grid.values[i]), true);
        }
    std::fclose(f);
}

void write_near_field_csv(const NearFieldGrid& grid, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw InvalidArgument("write_near_field_csv: cannot open " + path);
    std::fprintf(f, "i,j,x,y,z,re_scat,im_scat,abs_total,interior_flag\n");
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const std::size_t t = i + std::size_t(grid.nx) * j;
            std::fprintf(f, "%d,%d,", i, j);
            print_real(f, grid.points[t].x);
            print_real(f, grid.points[t].y);
            print_real(f, grid.points[t].z);
            print_real(f, grid.scattered[t].real());
            print_real(f, grid.scattered[t].imag());
            print_real(f, std::abs(grid.total[t]));
            std::fprintf(f, "%d\n", int(grid.flagged[t]));
        }
    std::fclose(f);
}

}  // namespace ifgf
