#pragma once

#include <span>
#include <string>
#include <vector>

#include "ifgf/geometry.hpp"
#include "ifgf/solver.hpp"

namespace ifgf {

// Uniformly-spaced unit-sphere grid: phi_m = (m-1) dphi in [0,pi],
// theta_n = (n-1) dtheta in [0,2pi].
struct FarFieldGrid {
    int n_phi = 0, n_theta = 0;
    std::vector<Vec3> directions;  // n_phi * n_theta, phi index fastest
    std::vector<cplx> values;

    static FarFieldGrid make(int n_phi, int n_theta);
    Vec3 direction(int m, int n) const { return directions[m + std::size_t(n_phi) * n]; }
};

// Planar near-field grid at fixed z (or analogous); points outside the scatterer are
// evaluated normally, interior/close points are flagged instead of suppressed.
struct NearFieldGrid {
    int nx = 0, ny = 0;
    std::vector<Vec3> points;
    std::vector<cplx> scattered;
    std::vector<cplx> total;
    std::vector<std::uint8_t> flagged;  // within delta of the surface (or inside)
};

// Far-field pattern of the combined-layer representation,
//   u_inf(xhat) = (1/4pi) Int { -ik <xhat,nu> - i gamma } e^{-ik xhat.y} phi dS.
FarFieldGrid far_field(const SurfaceMesh& mesh, std::span<const cplx> density, double gamma,
                       double k, int n_phi, int n_theta, int workers = 0);

NearFieldGrid near_field(const SurfaceMesh& mesh, std::span<const cplx> density, double gamma,
                         double k, const IncidentField& incident,
                         std::span<const Vec3> points, double flag_distance, int workers = 0);

// Sound-soft sphere Mie far field for plane-wave incidence along `direction`.
std::vector<cplx> mie_far_field(double radius, double k, const Vec3& direction,
                                std::span<const Vec3> eval_directions, int extra_terms = 0);

// max over the grid of | |ref| - |apx| | / |ref|; zero-reference points are skipped
// and counted.
double eps_far(std::span<const cplx> reference, std::span<const cplx> approx,
               int* skipped = nullptr);
double eps_near(std::span<const cplx> reference, std::span<const cplx> approx,
                int* skipped = nullptr);

void write_far_field_csv(const FarFieldGrid& grid, const std::string& path);
void write_near_field_csv(const NearFieldGrid& grid, const std::string& path);

}  // namespace ifgf
