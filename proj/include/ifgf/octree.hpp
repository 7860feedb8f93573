#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ifgf/common.hpp"
#include "ifgf/kernels.hpp"

namespace ifgf {

// D-level hierarchy of half-open axis-aligned boxes over a point set. Level 1 is the
// single root box; level d has side H_d = H_1 / 2^{d-1}. Only relevant boxes (those
// containing at least one point) are stored. Points are permuted into Morton order at
// the finest level so every box at every level owns a contiguous index span.
struct Octree {
    int depth = 0;  // D >= 2
    Vec3 root_min;
    double root_side = 0.0;
    double wavenumber = 0.0;

    std::vector<std::uint32_t> perm;  // point permutation (finest-level Morton order)

    struct Box {
        std::uint64_t key = 0;  // Morton code of integer coords at this level
        std::array<std::int32_t, 3> coords{};
        std::uint32_t begin = 0, end = 0;  // span into perm
        std::int32_t parent = -1;          // index into the coarser level's box vector
        std::array<std::int32_t, 8> children{-1, -1, -1, -1, -1, -1, -1, -1};
    };
    // levels[d-1] holds level d, sorted by Morton key
    std::vector<std::vector<Box>> levels;

    double side(int level) const { return root_side / double(1u << (level - 1)); }
    Vec3 box_center(int level, const Box& b) const {
        const double H = side(level);
        return root_min + Vec3{(b.coords[0] + 0.5) * H, (b.coords[1] + 0.5) * H,
                               (b.coords[2] + 0.5) * H};
    }
    BoxFrame frame(int level, const Box& b) const { return {box_center(level, b), side(level)}; }

    int find_box(int level, std::uint64_t key) const;  // index or -1
    // level-D box index owning point (by original index)
    const std::vector<std::int32_t>& leaf_of_point() const { return leaf_of_point_; }
    std::vector<std::int32_t> leaf_of_point_;
};

std::uint64_t morton3(std::uint32_t x, std::uint32_t y, std::uint32_t z);

// Depth policy: D is the smallest depth with H_D <= target_side_lambda * lambda,
// additionally enforcing H_D < lambda; at least 2 levels.
Octree build_octree(std::span<const Vec3> points, double k, double target_side_lambda = 0.5);

struct Relations {
    // per level (index d-1), per box: same-level indices, each list ascending
    std::vector<std::vector<std::vector<std::int32_t>>> neighbors;
    std::vector<std::vector<std::vector<std::int32_t>>> cousins;
};

Relations compute_relations(const Octree& tree);

}  // namespace ifgf
