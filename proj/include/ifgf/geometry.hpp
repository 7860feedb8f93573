#pragma once

#include <array>
#include <string>
#include <vector>

#include "ifgf/chebyshev.hpp"
#include "ifgf/common.hpp"

namespace ifgf {

// One logical-quadrilateral patch y^q : [-1,1]^2 -> R^3, stored as per-coordinate
// 2D Chebyshev coefficient tensors (u index fastest). Built-in and file-loaded
// geometries share this representation, so arbitrary-(u,v) evaluation, derivatives
// and the closest-point search are uniform.
struct Patch {
    int nu = 0, nv = 0;  // discretization grid sizes
    int du = 0, dv = 0;  // coefficient tensor extents
    std::array<std::vector<double>, 3> coeff;    // position series per coordinate
    std::array<std::vector<double>, 3> coeff_u;  // d/du series
    std::array<std::vector<double>, 3> coeff_v;  // d/dv series
    double orient = 1.0;  // sign making nu = orient*(y_u x y_v)/J outward
};

struct PatchFrame {
    Vec3 du, dv;     // tangents
    Vec3 normal;     // outward unit normal
    double jac = 0;  // |y_u x y_v|
};

Vec3 eval_patch(const Patch& p, double u, double v);
PatchFrame patch_frame(const Patch& p, double u, double v);

struct SurfaceMesh {
    std::vector<Patch> patches;
    Vec3 interior_point;  // reference point inside the closed surface

    // flat per-node arrays, global index l = patch_start[q] + i + nu*j
    std::vector<Vec3> pos;
    std::vector<Vec3> normal;
    std::vector<double> jac;     // J^q at the node
    std::vector<double> weight;  // w_i^u * w_j^v Fejer product
    std::vector<double> pu, pv;  // parameter coordinates of the node
    std::vector<int> patch_of;
    std::vector<std::size_t> patch_start;  // size Q+1

    std::size_t size() const { return pos.size(); }
    std::size_t node_index(int q, int i, int j) const {
        return patch_start[q] + std::size_t(i) + std::size_t(patches[q].nu) * j;
    }

    // max spacing between parameter-adjacent nodes, per patch
    std::vector<double> max_node_spacing() const;
    double diameter() const;  // max bounding-box extent
};

// 6-patch cube-to-sphere map (y = radius * c/|c| over cube faces), each face split
// 4^k-fold. Parametrizations are Chebyshev fits of the analytic map with fit
// residual below 1e-12.
SurfaceMesh build_sphere(double radius, int splits, int nu, int nv);

// Replace each patch by 4 sub-patches (parameter quadrants re-fit to [-1,1]^2).
SurfaceMesh refine_split(const SurfaceMesh& mesh);

// Patch file I/O. Text format:
//   ifgf-patches v1 Q=<int> interior=<x> <y> <z>
//   patch q=<int> nu=<int> nv=<int> du=<int> dv=<int>
//   <du*dv lines of "cx cy cz">  (u index fastest)
SurfaceMesh load_patch_file(const std::string& path);
void save_patch_file(const SurfaceMesh& mesh, const std::string& path);

// Build a mesh from prepared patches (finalizes nodes, normals, weights, orientation).
SurfaceMesh assemble_mesh(std::vector<Patch> patches, const Vec3& interior_point);

}  // namespace ifgf
