#include "ifgf/kernels.hpp"

#include <numbers>

namespace ifgf {

namespace {
constexpr double kInv4Pi = 1.0 / (4.0 * std::numbers::pi);
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

cplx green(const Vec3& x, const Vec3& y, double k) {
    const double r = norm(x - y);
    if (r < 1e-14) throw InvalidArgument("green: coincident points");
    return std::polar(kInv4Pi / r, k * r);
}

cplx dlayer_kernel(const Vec3& x, const Vec3& y, const Vec3& nu_y, double k) {
    const Vec3 d = x - y;
    const double r = norm(d);
    if (r < 1e-14) throw InvalidArgument("dlayer_kernel: coincident points");
    const double dn = dot(d, nu_y);
    const cplx phase = std::polar(1.0, k * r);
    return phase * (cplx(1.0, 0.0) - cplx(0.0, k * r)) * (dn * kInv4Pi / (r * r * r));
}

Vec3 cone_to_cartesian(const ConeCoords& c, const BoxFrame& frame) {
    if (c.s <= 0.0) throw InvalidArgument("cone_to_cartesian: s must be positive");
    const double r = frame.radius() / c.s;
    const double st = std::sin(c.theta), ct = std::cos(c.theta);
    return frame.center + Vec3{r * st * std::cos(c.phi), r * st * std::sin(c.phi), r * ct};
}

ConeCoords cartesian_to_cone(const Vec3& x, const BoxFrame& frame) {
    const Vec3 v = x - frame.center;
    const double r = norm(v);
    if (r < 1e-300) throw InvalidArgument("cartesian_to_cone: point at box center");
    ConeCoords c;
    c.s = frame.radius() / r;
    double ct = v.z / r;
    ct = std::min(1.0, std::max(-1.0, ct));
    c.theta = std::acos(ct);
    double phi = std::atan2(v.y, v.x);
    if (phi < 0.0) phi += kTwoPi;
    if (phi >= kTwoPi) phi = 0.0;
    c.phi = phi;
    return c;
}

cplx analytic_factor(Factor which, const ConeCoords& c, const Vec3& y, const Vec3& nu_y,
                     const BoxFrame& frame, double k) {
    if (c.s <= 0.0 || c.s >= 1.0)
        throw InvalidArgument("analytic_factor: s must lie in (0,1)");
    const double h = frame.radius();
    const Vec3 d = y - frame.center;
    if (std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)}) >
        0.5 * frame.side + 1e-12 * frame.side)
        throw InvalidArgument("analytic_factor: source outside box");

    const double st = std::sin(c.theta), ct = std::cos(c.theta);
    const Vec3 xhat{st * std::cos(c.phi), st * std::sin(c.phi), ct};
    const Vec3 v = xhat - d * (c.s / h);
    const double nv2 = norm2(v);
    const double nv = std::sqrt(nv2);
    // exponent k (h/s)(|v| - 1), with |v|-1 formed cancellation-free
    const double arg = k * (h / c.s) * ((nv2 - 1.0) / (nv + 1.0));
    const cplx phase = std::polar(1.0, arg);

    switch (which) {
        case Factor::W1:
            return phase / nv;
        case Factor::W2:
            return phase * (dot(v, nu_y) / (nv2 * nv));
        case Factor::W3:
            return phase * (dot(v, nu_y) / nv2);
        case Factor::W4: {
            const double dn = dot(v, nu_y);
            return phase * (cplx(c.s / h, 0.0) / nv - cplx(0.0, k)) * (dn / nv2);
        }
    }
    throw InvalidArgument("analytic_factor: bad selector");
}

cplx centered_factor(Factor which, const ConeCoords& c, const BoxFrame& frame, double k) {
    if (c.s <= 0.0) throw InvalidArgument("centered_factor: s must be positive");
    const double r = frame.radius() / c.s;
    const double rq = q_exponent(which) == 2 ? r * r : r;
    return std::polar(kInv4Pi / rq, k * r);
}

}  // namespace ifgf
