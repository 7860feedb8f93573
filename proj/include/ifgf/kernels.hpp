#pragma once

#include "ifgf/common.hpp"

namespace ifgf {

inline constexpr double kConeEta = 0.5773502691896258;  // sqrt(3)/3

// Axis-aligned cubic box of side H centered at `center`; h = (sqrt(3)/2) H is the
// max distance from the center to a point of the closed box.
struct BoxFrame {
    Vec3 center;
    double side = 0.0;
    double radius() const { return 0.8660254037844386 * side; }  // h
};

// Box-centered spherical coordinates with the radius replaced by s = h/r.
struct ConeCoords {
    double s = 0.0;      // in (0, sqrt(3)/3] for IFGF targets
    double theta = 0.0;  // [0, pi]
    double phi = 0.0;    // [0, 2 pi)
};

// Helmholtz Green function e^{ik|x-y|} / (4 pi |x-y|).
cplx green(const Vec3& x, const Vec3& y, double k);

// Source-normal derivative of the Green function,
//   e^{ik|x-y|} (1 - ik|x-y|) <x-y, nu_y> / (4 pi |x-y|^3).
cplx dlayer_kernel(const Vec3& x, const Vec3& y, const Vec3& nu_y, double k);

Vec3 cone_to_cartesian(const ConeCoords& c, const BoxFrame& frame);
ConeCoords cartesian_to_cone(const Vec3& x, const BoxFrame& frame);

enum class Factor : int { W1 = 1, W2 = 2, W3 = 3, W4 = 4 };

// centered-factor exponent: q_2 = 2, q_j = 1 otherwise
inline int q_exponent(Factor f) { return f == Factor::W2 ? 2 : 1; }

// Analytic factor W_j(s,theta,phi, y; center). The normal nu_y participates for
// j in {2,3,4} and is ignored for W1.
cplx analytic_factor(Factor which, const ConeCoords& c, const Vec3& y, const Vec3& nu_y,
                     const BoxFrame& frame, double k);

// Centered factor e^{ikr} / (4 pi r^{q_j}) with r = h/s.
cplx centered_factor(Factor which, const ConeCoords& c, const BoxFrame& frame, double k);

}  // namespace ifgf
