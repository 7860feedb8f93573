#pragma once

#include <span>
#include <string>
#include <vector>

#include "ifgf/kernels.hpp"
#include "ifgf/octree.hpp"

namespace ifgf {

struct ConeConfig {
    int n_c0 = 2;  // angular interval count at/below the half-wavelength box size
    int n_s0 = 1;  // radial interval count, same regime
    int ps = 3;    // interpolation points, radial
    int pang = 5;  // interpolation points, each angular direction
};

enum class DlStrategy { W4, W2W3, Hybrid };

// number of interval doublings for a box of the given side
int cone_interval_doublings(double side, double lambda);

// Per-level cone-segment geometry. The interval counts double with each box-size
// doubling past H = lambda/2, which keeps the per-segment interpolation error
// essentially level-independent.
struct LevelCones {
    int ns = 0, nc = 0;
    double ds = 0, dth = 0, dph = 0;
    int ps = 0, pang = 0;

    int segs_per_box() const { return ns * nc * 2 * nc; }
    int points_per_seg() const { return ps * pang * pang; }
    int gamma_index(int g1, int g2, int g3) const {
        return (g1 - 1) + ns * ((g2 - 1) + nc * (g3 - 1));
    }

    // node coordinate tables (interval-mapped Chebyshev-Gauss points)
    std::vector<double> s_nodes;             // ns x ps
    std::vector<double> th_nodes, ph_nodes;  // nc x pang, 2nc x pang

    // gamma triple containing (s,theta,phi); half-open intervals with the closed
    // s = eta, theta = pi and phi wrap cases
    void segment_of(const ConeCoords& c, int& g1, int& g2, int& g3) const;
    // local [-1,1]^3 coordinates of c inside segment gamma
    void local_coords(const ConeCoords& c, int g1, int g2, int g3, double& ls, double& lt,
                      double& lp) const;
};

struct SegmentSet {
    struct Seg {
        std::int32_t box = 0;
        std::int32_t gamma = 0;
    };
    std::vector<Seg> segs;                    // sorted by (box, gamma): Morton-then-gamma
    std::vector<std::int32_t> lookup;         // box*segs_per_box+gamma -> ordinal or -1
    std::vector<std::int32_t> box_seg_begin;  // per box, size nboxes+1
};

struct ConePlan {
    const Octree* tree = nullptr;
    const Relations* rel = nullptr;
    ConeConfig cfg;
    double k = 0;

    std::vector<LevelCones> level_cones;  // index d-1; valid for d in [3, depth]
    std::vector<SegmentSet> level_segs;   // index d-1

    // point data permuted into Morton order
    std::vector<Vec3> pts, nrm;

    std::string diagnostics() const;  // per-level counts (text)
};

ConePlan plan_cones(const Octree& tree, const Relations& rel, std::span<const Vec3> points,
                    std::span<const Vec3> normals, const ConeConfig& cfg, int workers = 0);

// Chebyshev coefficient blocks for one level and a list of factor pipelines.
// Block layout: seg-major, then pipeline, then ps*pang^2 coefficients (s fastest).
struct LevelData {
    int level = 0;
    std::vector<Factor> pipes;
    std::vector<cplx> blocks;

    std::span<cplx> block(std::size_t seg, std::size_t pipe, std::size_t pts);
    std::span<const cplx> block(std::size_t seg, std::size_t pipe, std::size_t pts) const;
};

// Direct evaluation of the per-segment factor sums F at the finest level's
// interpolation nodes (a is in Morton-permuted order), followed by the transform
// to Chebyshev coefficients.
LevelData level_d_fill(const ConePlan& plan, std::span<const cplx> a_perm,
                       std::span<const Factor> pipes, int workers = 0);

struct IfgfOutputs {
    std::vector<cplx> single;  // sum over non-neighbor pairs of a_m Phi(x_l, x_m)
    std::vector<cplx> dbl;     // same for the double-layer kernel
};

struct IfgfRequest {
    bool single_layer = true;
    bool double_layer = true;
    DlStrategy strategy = DlStrategy::W4;
};

// Downward pass over levels D..3: cousin-point evaluation plus parent-level fill.
// Consumes the level-D data produced by level_d_fill (the caller supplies sources
// again for re-fills under per-level pipeline changes).
IfgfOutputs propagate_and_evaluate(const ConePlan& plan, std::span<const cplx> a,
                                   const IfgfRequest& req, int workers = 0);

// Full accelerated evaluation of the discrete non-neighbor sums; `a` is indexed by
// original point index and so are the outputs.
IfgfOutputs ifgf_apply(const ConePlan& plan, std::span<const cplx> a, const IfgfRequest& req,
                       int workers = 0);

// Pipelines used at a given level for the double layer under a strategy.
std::vector<Factor> dl_pipes_for_level(const ConePlan& plan, int level, DlStrategy strategy);

}  // namespace ifgf
