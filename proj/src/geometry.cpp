#include "ifgf/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

namespace ifgf {

namespace {

constexpr double kDegenerateJac = 1e-14;

void finalize_patch_derivatives(Patch& p) {
    for (int c = 0; c < 3; ++c) {
        p.coeff_u[c] = cheb::derivative_u(p.coeff[c], p.du, p.dv);
        p.coeff_v[c] = cheb::derivative_v(p.coeff[c], p.du, p.dv);
    }
}

// Fit a smooth map on [-1,1]^2 with increasing tensor degree until the residual at a
// dense sample grid drops below tol.
Patch fit_patch(const std::function<Vec3(double, double)>& f, int nu, int nv, double tol) {
    Patch p;
    p.nu = nu;
    p.nv = nv;
    for (int deg = std::max({12, nu, nv}); deg <= 48; deg += 6) {
        const auto xs = cheb::cheb_nodes(deg);
        std::array<std::vector<double>, 3> samples;
        for (auto& s : samples) s.resize(std::size_t(deg) * deg);
        for (int j = 0; j < deg; ++j)
            for (int i = 0; i < deg; ++i) {
                const Vec3 y = f(xs[i], xs[j]);
                samples[0][i + std::size_t(deg) * j] = y.x;
                samples[1][i + std::size_t(deg) * j] = y.y;
                samples[2][i + std::size_t(deg) * j] = y.z;
            }
        p.du = p.dv = deg;
        for (int c = 0; c < 3; ++c) p.coeff[c] = cheb::coeffs_2d_real(samples[c], deg, deg);
        // residual check at offset points
        const auto probe = cheb::cheb_nodes(deg + 3);
        double res = 0.0;
        for (int j = 0; j < deg + 3; j += 2)
            for (int i = 0; i < deg + 3; i += 2) {
                const Vec3 want = f(probe[i], probe[j]);
                const Vec3 got{cheb::eval_2d_real(p.coeff[0], deg, deg, probe[i], probe[j]),
                               cheb::eval_2d_real(p.coeff[1], deg, deg, probe[i], probe[j]),
                               cheb::eval_2d_real(p.coeff[2], deg, deg, probe[i], probe[j])};
                res = std::max(res, norm(want - got));
            }
        if (res < tol) break;
    }
    finalize_patch_derivatives(p);
    return p;
}

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

}  // namespace

Vec3 eval_patch(const Patch& p, double u, double v) {
    return {cheb::eval_2d_real(p.coeff[0], p.du, p.dv, u, v),
            cheb::eval_2d_real(p.coeff[1], p.du, p.dv, u, v),
            cheb::eval_2d_real(p.coeff[2], p.du, p.dv, u, v)};
}

PatchFrame patch_frame(const Patch& p, double u, double v) {
    PatchFrame f;
    f.du = {cheb::eval_2d_real(p.coeff_u[0], p.du, p.dv, u, v),
            cheb::eval_2d_real(p.coeff_u[1], p.du, p.dv, u, v),
            cheb::eval_2d_real(p.coeff_u[2], p.du, p.dv, u, v)};
    f.dv = {cheb::eval_2d_real(p.coeff_v[0], p.du, p.dv, u, v),
            cheb::eval_2d_real(p.coeff_v[1], p.du, p.dv, u, v),
            cheb::eval_2d_real(p.coeff_v[2], p.du, p.dv, u, v)};
    const Vec3 cr = cross(f.du, f.dv);
    f.jac = norm(cr);
    if (f.jac < kDegenerateJac)
        throw DegenerateGeometry("patch_frame: vanishing Jacobian", -1);
    f.normal = cr * (p.orient / f.jac);
    return f;
}

std::vector<double> SurfaceMesh::max_node_spacing() const {
    std::vector<double> out(patches.size(), 0.0);
    for (std::size_t q = 0; q < patches.size(); ++q) {
        const int nu = patches[q].nu, nv = patches[q].nv;
        double m = 0.0;
        for (int j = 0; j < nv; ++j)
            for (int i = 0; i < nu; ++i) {
                const Vec3 a = pos[node_index(int(q), i, j)];
                if (i + 1 < nu) m = std::max(m, norm(a - pos[node_index(int(q), i + 1, j)]));
                if (j + 1 < nv) m = std::max(m, norm(a - pos[node_index(int(q), i, j + 1)]));
            }
        out[q] = m;
    }
    return out;
}

double SurfaceMesh::diameter() const {
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{-std::numeric_limits<double>::max(), -std::numeric_limits<double>::max(),
            -std::numeric_limits<double>::max()};
    for (const Vec3& p : pos) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    return std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
}

SurfaceMesh assemble_mesh(std::vector<Patch> patches, const Vec3& interior_point) {
    SurfaceMesh mesh;
    mesh.patches = std::move(patches);
    mesh.interior_point = interior_point;

    // orientation sign per patch from the center normal vs the interior reference point
    for (std::size_t q = 0; q < mesh.patches.size(); ++q) {
        Patch& p = mesh.patches[q];
        if (p.coeff_u[0].empty()) finalize_patch_derivatives(p);
        p.orient = 1.0;
        PatchFrame f;
        try {
            f = patch_frame(p, 0.0, 0.0);
        } catch (const DegenerateGeometry&) {
            throw DegenerateGeometry("degenerate Jacobian at patch center", int(q));
        }
        const Vec3 y = eval_patch(p, 0.0, 0.0);
        if (dot(f.normal, y - interior_point) < 0.0) p.orient = -1.0;
    }

    mesh.patch_start.assign(mesh.patches.size() + 1, 0);
    for (std::size_t q = 0; q < mesh.patches.size(); ++q)
        mesh.patch_start[q + 1] =
            mesh.patch_start[q] + std::size_t(mesh.patches[q].nu) * mesh.patches[q].nv;
    const std::size_t n = mesh.patch_start.back();
    mesh.pos.resize(n);
    mesh.normal.resize(n);
    mesh.jac.resize(n);
    mesh.weight.resize(n);
    mesh.pu.resize(n);
    mesh.pv.resize(n);
    mesh.patch_of.resize(n);

    for (std::size_t q = 0; q < mesh.patches.size(); ++q) {
        const Patch& p = mesh.patches[q];
        const auto ur = cheb::fejer_rule(p.nu);
        const auto vr = cheb::fejer_rule(p.nv);
        for (int j = 0; j < p.nv; ++j)
            for (int i = 0; i < p.nu; ++i) {
                const std::size_t l = mesh.node_index(int(q), i, j);
                const double u = ur.nodes[i], v = vr.nodes[j];
                mesh.pos[l] = eval_patch(p, u, v);
                PatchFrame f;
                try {
                    f = patch_frame(p, u, v);
                } catch (const DegenerateGeometry&) {
                    throw DegenerateGeometry("degenerate Jacobian at node", int(q));
                }
                mesh.normal[l] = f.normal;
                mesh.jac[l] = f.jac;
                mesh.weight[l] = ur.weights[i] * vr.weights[j];
                mesh.pu[l] = u;
                mesh.pv[l] = v;
                mesh.patch_of[l] = int(q);
            }
    }
    return mesh;
}

SurfaceMesh build_sphere(double radius, int splits, int nu, int nv) {
    if (radius <= 0.0) throw InvalidArgument("build_sphere: radius must be positive");
    if (splits < 0 || nu < 1 || nv < 1) throw InvalidArgument("build_sphere: bad counts");

    struct Face {
        int axis;
        double sign;
    };
    const Face faces[6] = {{0, 1}, {0, -1}, {1, 1}, {1, -1}, {2, 1}, {2, -1}};
    const int m = 1 << splits;

    std::vector<Patch> patches;
    patches.reserve(6 * std::size_t(m) * m);
    for (const Face& face : faces) {
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                const double alo = -1.0 + 2.0 * a / m, ahi = alo + 2.0 / m;
                const double blo = -1.0 + 2.0 * b / m, bhi = blo + 2.0 / m;
                auto f = [&, alo, ahi, blo, bhi](double u, double v) -> Vec3 {
                    const double s = alo + (u + 1.0) * 0.5 * (ahi - alo);
                    const double t = blo + (v + 1.0) * 0.5 * (bhi - blo);
                    Vec3 c;
                    if (face.axis == 0) c = {face.sign, s, t};
                    else if (face.axis == 1) c = {t, face.sign, s};
                    else c = {s, t, face.sign};
                    return c * (radius / norm(c));
                };
                patches.push_back(fit_patch(f, nu, nv, 1e-12));
            }
    }
    return assemble_mesh(std::move(patches), Vec3{0, 0, 0});
}

SurfaceMesh refine_split(const SurfaceMesh& mesh) {
    std::vector<Patch> out;
    out.reserve(mesh.patches.size() * 4);
    for (const Patch& p : mesh.patches) {
        for (int qa = 0; qa < 2; ++qa)
            for (int qb = 0; qb < 2; ++qb) {
                // parent series are polynomials; quadrant re-fit at same degree is exact
                Patch c;
                c.nu = p.nu;
                c.nv = p.nv;
                c.du = p.du;
                c.dv = p.dv;
                const auto xu = cheb::cheb_nodes(p.du);
                const auto xv = cheb::cheb_nodes(p.dv);
                std::vector<double> samples(std::size_t(p.du) * p.dv);
                for (int comp = 0; comp < 3; ++comp) {
                    for (int j = 0; j < p.dv; ++j)
                        for (int i = 0; i < p.du; ++i) {
                            const double u = -1.0 + qa + (xu[i] + 1.0) * 0.5;
                            const double v = -1.0 + qb + (xv[j] + 1.0) * 0.5;
                            samples[i + std::size_t(p.du) * j] =
                                cheb::eval_2d_real(p.coeff[comp], p.du, p.dv, u, v);
                        }
                    c.coeff[comp] = cheb::coeffs_2d_real(samples, p.du, p.dv);
                }
                out.push_back(std::move(c));
            }
    }
    return assemble_mesh(std::move(out), mesh.interior_point);
}

void save_patch_file(const SurfaceMesh& mesh, const std::string& path) {
    std::string out;
    out += "ifgf-patches v1 Q=" + std::to_string(mesh.patches.size()) + " interior=";
    append_double(out, mesh.interior_point.x);
    out += ' ';
    append_double(out, mesh.interior_point.y);
    out += ' ';
    append_double(out, mesh.interior_point.z);
    out += '\n';
    for (std::size_t q = 0; q < mesh.patches.size(); ++q) {
        const Patch& p = mesh.patches[q];
        out += "patch q=" + std::to_string(q) + " nu=" + std::to_string(p.nu) +
               " nv=" + std::to_string(p.nv) + " du=" + std::to_string(p.du) +
               " dv=" + std::to_string(p.dv) + "\n";
        for (std::size_t i = 0; i < std::size_t(p.du) * p.dv; ++i) {
            append_double(out, p.coeff[0][i]);
            out += ' ';
            append_double(out, p.coeff[1][i]);
            out += ' ';
            append_double(out, p.coeff[2][i]);
            out += '\n';
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("save_patch_file: cannot open " + path);
    f.write(out.data(), std::streamsize(out.size()));
}

namespace {

// Cursor-based tokenizer that tracks byte offsets for error reporting.
struct Cursor {
    const std::string& text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    std::string_view token() {
        skip_ws();
        if (pos >= text.size()) throw ParseError("unexpected end of patch file", pos);
        const std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        return std::string_view(text).substr(start, pos - start);
    }
    void expect(std::string_view want) {
        const std::size_t at = pos;
        if (token() != want)
            throw ParseError("expected '" + std::string(want) + "'", at);
    }
    long expect_kv_int(std::string_view key) {
        const std::size_t at = pos;
        auto t = token();
        if (t.substr(0, key.size()) != key || t.size() <= key.size() || t[key.size()] != '=')
            throw ParseError("expected '" + std::string(key) + "=<int>'", at);
        long v = 0;
        auto r = std::from_chars(t.data() + key.size() + 1, t.data() + t.size(), v);
        if (r.ec != std::errc{} || r.ptr != t.data() + t.size())
            throw ParseError("bad integer for '" + std::string(key) + "'", at);
        return v;
    }
    double number() {
        const std::size_t at = pos;
        auto t = token();
        char* end = nullptr;
        std::string s(t);
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size())
            throw ParseError("bad real number '" + s + "'", at);
        if (!std::isfinite(v)) throw InvalidArgument("patch file contains non-finite value");
        return v;
    }
};

}  // namespace

SurfaceMesh load_patch_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("load_patch_file: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();

    Cursor c{text};
    c.expect("ifgf-patches");
    c.expect("v1");
    const long q_count = c.expect_kv_int("Q");
    if (q_count < 1) throw ParseError("patch count must be positive", c.pos);
    // interior=<x> <y> <z>
    {
        const std::size_t at = c.pos;
        auto t = c.token();
        if (t.substr(0, 9) != "interior=") throw ParseError("expected 'interior=<x>'", at);
        std::string first(t.substr(9));
        char* end = nullptr;
        const double x = std::strtod(first.c_str(), &end);
        if (end != first.c_str() + first.size()) throw ParseError("bad interior point", at);
        const double y = c.number();
        const double z = c.number();
        c.skip_ws();
        Vec3 interior{x, y, z};

        std::vector<Patch> patches;
        patches.reserve(std::size_t(q_count));
        for (long q = 0; q < q_count; ++q) {
            c.expect("patch");
            const long qid = c.expect_kv_int("q");
            if (qid != q) throw ParseError("patch index out of order", c.pos);
            Patch p;
            p.nu = int(c.expect_kv_int("nu"));
            p.nv = int(c.expect_kv_int("nv"));
            p.du = int(c.expect_kv_int("du"));
            p.dv = int(c.expect_kv_int("dv"));
            if (p.nu < 1 || p.nv < 1 || p.du < 1 || p.dv < 1)
                throw ParseError("nonpositive patch dimensions", c.pos);
            const std::size_t n = std::size_t(p.du) * p.dv;
            for (int comp = 0; comp < 3; ++comp) p.coeff[comp].resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                p.coeff[0][i] = c.number();
                p.coeff[1][i] = c.number();
                p.coeff[2][i] = c.number();
            }
            patches.push_back(std::move(p));
        }
        return assemble_mesh(std::move(patches), interior);
    }
}

}  // namespace ifgf
