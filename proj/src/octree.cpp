#include "ifgf/octree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace ifgf {

namespace {

std::uint64_t spread_bits(std::uint32_t v) {
    std::uint64_t x = v & 0x1fffff;  // 21 bits
    x = (x | x << 32) & 0x1f00000000ffffULL;
    x = (x | x << 16) & 0x1f0000ff0000ffULL;
    x = (x | x << 8) & 0x100f00f00f00f00fULL;
    x = (x | x << 4) & 0x10c30c30c30c30c3ULL;
    x = (x | x << 2) & 0x1249249249249249ULL;
    return x;
}

}  // namespace

std::uint64_t morton3(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
    return spread_bits(x) | (spread_bits(y) << 1) | (spread_bits(z) << 2);
}

int Octree::find_box(int level, std::uint64_t key) const {
    const auto& v = levels[level - 1];
    auto it = std::lower_bound(v.begin(), v.end(), key,
                               [](const Box& b, std::uint64_t k) { return b.key < k; });
    if (it == v.end() || it->key != key) return -1;
    return int(it - v.begin());
}

Octree build_octree(std::span<const Vec3> points, double k, double target_side_lambda) {
    if (points.empty()) throw InvalidArgument("build_octree: empty point set");
    if (k <= 0.0) throw InvalidArgument("build_octree: wavenumber must be positive");
    const double lambda = 2.0 * std::numbers::pi / k;

    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{-std::numeric_limits<double>::max(), -std::numeric_limits<double>::max(),
            -std::numeric_limits<double>::max()};
    for (const Vec3& p : points) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
    double scale = std::max({std::abs(lo.x), std::abs(lo.y), std::abs(lo.z), std::abs(hi.x),
                             std::abs(hi.y), std::abs(hi.z), 1.0});
    if (extent <= 0.0) extent = 1e-9 * scale;
    const double side = extent * (1.0 + 1e-9);

    Octree tree;
    tree.root_side = side;
    tree.wavenumber = k;
    // center the root cube on the bounding box
    const Vec3 mid = (lo + hi) * 0.5;
    tree.root_min = mid - Vec3{side / 2, side / 2, side / 2};

    // Smallest depth with H_D <= target (slack absorbs the bounding pad), also H_D < lambda.
    int depth = 2;
    const double target = target_side_lambda * lambda;
    while (depth < 20 &&
           !(tree.side(depth) <= target * (1.0 + 1e-6) && tree.side(depth) < lambda))
        ++depth;
    tree.depth = depth;

    // finest-level integer coords and Morton keys
    const int n = int(points.size());
    const double hd = tree.side(depth);
    const std::int64_t cells = std::int64_t(1) << (depth - 1);
    std::vector<std::uint64_t> keys(n);
    for (int i = 0; i < n; ++i) {
        const Vec3 d = points[i] - tree.root_min;
        auto cell = [&](double t) {
            std::int64_t c = std::int64_t(std::floor(t / hd));
            return std::uint32_t(std::clamp<std::int64_t>(c, 0, cells - 1));
        };
        keys[i] = morton3(cell(d.x), cell(d.y), cell(d.z));
    }
    tree.perm.resize(n);
    std::iota(tree.perm.begin(), tree.perm.end(), 0u);
    std::sort(tree.perm.begin(), tree.perm.end(), [&](std::uint32_t a, std::uint32_t b) {
        return keys[a] != keys[b] ? keys[a] < keys[b] : a < b;
    });

    tree.levels.resize(depth);
    // leaves from runs of equal keys
    auto& leaves = tree.levels[depth - 1];
    for (int i = 0; i < n;) {
        int j = i;
        const std::uint64_t key = keys[tree.perm[i]];
        while (j < n && keys[tree.perm[j]] == key) ++j;
        Octree::Box b;
        b.key = key;
        b.begin = std::uint32_t(i);
        b.end = std::uint32_t(j);
        // reconstruct coords by decimating the key
        for (int axis = 0; axis < 3; ++axis) {
            std::uint32_t c = 0;
            for (int bit = 0; bit < 21; ++bit)
                c |= std::uint32_t((key >> (3 * bit + axis)) & 1u) << bit;
            b.coords[axis] = std::int32_t(c);
        }
        leaves.push_back(b);
        i = j;
    }

    // coarser levels by merging children (Morton order is hierarchical: spans stay contiguous)
    for (int level = depth - 1; level >= 1; --level) {
        auto& fine = tree.levels[level];
        auto& coarse = tree.levels[level - 1];
        for (int bi = 0; bi < int(fine.size());) {
            const std::uint64_t pkey = fine[bi].key >> 3;
            Octree::Box parent;
            parent.key = pkey;
            parent.coords = {fine[bi].coords[0] >> 1, fine[bi].coords[1] >> 1,
                             fine[bi].coords[2] >> 1};
            parent.begin = fine[bi].begin;
            int j = bi;
            while (j < int(fine.size()) && (fine[j].key >> 3) == pkey) {
                fine[j].parent = std::int32_t(coarse.size());
                parent.children[fine[j].key & 7u] = std::int32_t(j);
                parent.end = fine[j].end;
                ++j;
            }
            coarse.push_back(parent);
            bi = j;
        }
    }

    tree.leaf_of_point_.assign(n, -1);
    for (int bi = 0; bi < int(leaves.size()); ++bi)
        for (std::uint32_t t = leaves[bi].begin; t < leaves[bi].end; ++t)
            tree.leaf_of_point_[tree.perm[t]] = bi;
    return tree;
}

Relations compute_relations(const Octree& tree) {
    Relations rel;
    rel.neighbors.resize(tree.depth);
    rel.cousins.resize(tree.depth);
    for (int level = 1; level <= tree.depth; ++level) {
        const auto& boxes = tree.levels[level - 1];
        auto& nb = rel.neighbors[level - 1];
        auto& cz = rel.cousins[level - 1];
        nb.resize(boxes.size());
        cz.resize(boxes.size());
        const std::int64_t cells = std::int64_t(1) << (level - 1);
        for (int bi = 0; bi < int(boxes.size()); ++bi) {
            const auto& b = boxes[bi];
            for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const std::int64_t x = b.coords[0] + dx, y = b.coords[1] + dy,
                                           z = b.coords[2] + dz;
                        if (x < 0 || y < 0 || z < 0 || x >= cells || y >= cells || z >= cells)
                            continue;
                        const int idx = tree.find_box(
                            level, morton3(std::uint32_t(x), std::uint32_t(y), std::uint32_t(z)));
                        if (idx >= 0) nb[bi].push_back(idx);
                    }
            std::sort(nb[bi].begin(), nb[bi].end());
        }
        if (level >= 2) {
            // cousins: children of parent's neighbors that are not own neighbors
            const auto& parent_nb = rel.neighbors[level - 2];
            const auto& parents = tree.levels[level - 2];
            for (int bi = 0; bi < int(boxes.size()); ++bi) {
                const auto& b = boxes[bi];
                for (std::int32_t pn : parent_nb[b.parent]) {
                    for (std::int32_t ch : parents[pn].children) {
                        if (ch < 0) continue;
                        if (!std::binary_search(nb[bi].begin(), nb[bi].end(), ch))
                            cz[bi].push_back(ch);
                    }
                }
                std::sort(cz[bi].begin(), cz[bi].end());
            }
        }
    }
    return rel;
}

}  // namespace ifgf
