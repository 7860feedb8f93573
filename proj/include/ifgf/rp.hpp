#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ifgf/geometry.hpp"
#include "ifgf/octree.hpp"

namespace ifgf {

struct RpConfig {
    double delta_rel = 1.0;   // delta_q = delta_rel * max node spacing of patch q
    double delta_abs = -1.0;  // if positive, overrides the relative rule
    int n_beta = 96;          // graded-rule size per direction
    int cov_d = 6;            // grading exponent (>= 2)
};

// One singular/near-singular (target, patch) interaction, plus the patch nodes that
// fall outside the target's level-D neighbor scope (their regular-rule terms are
// subtracted so the pair partition stays exact when the far field is accelerated).
struct SingularPair {
    std::uint32_t target = 0;
    std::int32_t patch = 0;
    double ubar = 0, vbar = 0;
    std::uint32_t far_begin = 0, far_end = 0;  // span into ProximityMap::far_nodes
};

struct ProximityMap {
    RpConfig cfg;
    std::vector<double> delta;                     // per patch
    std::vector<SingularPair> pairs;               // grouped by target, patch ascending
    std::vector<std::uint32_t> target_pair_begin;  // size N+1
    std::vector<std::uint32_t> far_nodes;
};

// Classification restricted to level-D neighbor scope; self-patch targets are always
// singular. Distances are closest-point search residuals.
ProximityMap classify_targets(const SurfaceMesh& mesh, const Octree& tree,
                              const Relations& rel, const RpConfig& cfg, int workers = 0);

struct ClosestPointResult {
    double u = 0, v = 0;
    double dist = 0;
};

// Alternating per-coordinate golden-section sweeps over [-1,1]^2, initialized at
// (u0, v0), parameter tolerance 1e-12, at most 50 sweeps.
ClosestPointResult closest_point(const Patch& patch, const Vec3& x, double u0, double v0);

// Graded change of variables (clustering points around alpha).
double cov_w(double tau, int d);
double cov_w_deriv(double tau, int d);
double cov_xi(double alpha, double tau, int d);
double cov_xi_deriv(double alpha, double tau, int d);

struct SingularPrecompute {
    int n_beta = 0, cov_d = 0;
    double k = 0;
    std::uint64_t fingerprint = 0;
    std::vector<std::size_t> offset;  // per pair, start into the beta tables
    std::vector<cplx> beta_single;    // pair tables, nu*nv entries each, u index fastest
    std::vector<cplx> beta_dbl;
};

// Density-independent beta tables for all classified pairs, both kernels.
SingularPrecompute beta_precompute(const SurfaceMesh& mesh, const ProximityMap& prox, double k,
                                   int workers = 0);

// Per-target singular contributions: out_* [target] += sum_{n,m} a^q_{n,m} beta_{n,m}.
// Density is the raw surface density (per node), expanded per patch in Chebyshev series.
void rp_singular_apply(const SurfaceMesh& mesh, const ProximityMap& prox,
                       const SingularPrecompute& prec, std::span<const cplx> density,
                       std::span<cplx> out_single, std::span<cplx> out_dbl, int workers = 0);

// Regular Fejer-rule evaluation at arbitrary targets (distance > delta from all used
// nodes; a target within 1e-14 of a node is an error).
void rp_regular_apply(const SurfaceMesh& mesh, std::span<const cplx> density,
                      std::span<const Vec3> targets, double k, std::span<cplx> out_single,
                      std::span<cplx> out_dbl, int workers = 0);

// Non-accelerated reference operator: singular pairs via beta tables, everything else
// by the regular rule, no neighbor-scope bookkeeping.
void layer_potential_direct(const SurfaceMesh& mesh, const ProximityMap& prox,
                            const SingularPrecompute& prec, std::span<const cplx> density,
                            std::span<cplx> out_single, std::span<cplx> out_dbl,
                            int workers = 0);

// Fingerprint of everything the beta tables depend on.
std::uint64_t beta_fingerprint(const SurfaceMesh& mesh, const ProximityMap& prox, double k);

// Versioned binary cache ("rpbeta v1"); load returns nothing on any mismatch or
// corruption, in which case callers recompute.
void save_beta_cache(const std::string& path, const SingularPrecompute& prec);
std::optional<SingularPrecompute> load_beta_cache(const std::string& path,
                                                  std::uint64_t fingerprint);

}  // namespace ifgf
