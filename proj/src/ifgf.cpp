#include "ifgf/ifgf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ifgf/chebyshev.hpp"

namespace ifgf {

namespace {

constexpr double kSTol = 1e-12;
constexpr int kMaxInterp = 12;

int doublings_for_side(double side, double lambda) {
    // Interval counts double with each box-size doubling. The octant partition is
    // kept only below 0.3 lambda so that the top of every size octave still meets the
    // per-segment accuracy of the P_s = 3, P_ang = 5 interpolation; boxes near the
    // customary 0.5 lambda finest size get the once-halved radial interval.
    const double ratio = side / (0.3 * lambda);
    return std::max(0, int(std::floor(std::log2(ratio * (1.0 + 1e-9)))) + 1);
}

LevelCones make_level_cones(double side, double lambda, const ConeConfig& cfg) {
    LevelCones lc;
    const int m = cone_interval_doublings(side, lambda);
    lc.ns = cfg.n_s0 << m;
    lc.nc = cfg.n_c0 << m;
    lc.ps = cfg.ps;
    lc.pang = cfg.pang;
    lc.ds = kConeEta / lc.ns;
    lc.dth = std::numbers::pi / lc.nc;
    lc.dph = std::numbers::pi / lc.nc;
    const auto xs = cheb::cheb_nodes(lc.ps);
    const auto xa = cheb::cheb_nodes(lc.pang);
    lc.s_nodes.resize(std::size_t(lc.ns) * lc.ps);
    for (int g = 0; g < lc.ns; ++g)
        for (int i = 0; i < lc.ps; ++i)
            lc.s_nodes[std::size_t(g) * lc.ps + i] =
                g * lc.ds + (xs[i] + 1.0) * 0.5 * lc.ds;
    lc.th_nodes.resize(std::size_t(lc.nc) * lc.pang);
    for (int g = 0; g < lc.nc; ++g)
        for (int i = 0; i < lc.pang; ++i)
            lc.th_nodes[std::size_t(g) * lc.pang + i] =
                g * lc.dth + (xa[i] + 1.0) * 0.5 * lc.dth;
    lc.ph_nodes.resize(std::size_t(2 * lc.nc) * lc.pang);
    for (int g = 0; g < 2 * lc.nc; ++g)
        for (int i = 0; i < lc.pang; ++i)
            lc.ph_nodes[std::size_t(g) * lc.pang + i] =
                g * lc.dph + (xa[i] + 1.0) * 0.5 * lc.dph;
    return lc;
}

struct GammaTriple {
    int g1, g2, g3;
};

GammaTriple gamma_decompose(const LevelCones& lc, int gamma) {
    GammaTriple g;
    g.g1 = gamma % lc.ns + 1;
    gamma /= lc.ns;
    g.g2 = gamma % lc.nc + 1;
    g.g3 = gamma / lc.nc + 1;
    return g;
}

// complex Clenshaw with real argument
cplx clenshaw_c(const cplx* a, int n, double x) {
    cplx b1{}, b2{};
    for (int i = n - 1; i >= 1; --i) {
        const cplx b0 = a[i] + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return a[0] + x * b1 - b2;
}

cplx eval3(const cplx* a, int ps, int pang, double xs, double xt, double xp) {
    std::array<cplx, kMaxInterp * kMaxInterp> tp;
    for (int p = 0; p < pang; ++p)
        for (int t = 0; t < pang; ++t)
            tp[std::size_t(p) * pang + t] = clenshaw_c(a + (std::size_t(p) * pang + t) * ps, ps, xs);
    std::array<cplx, kMaxInterp> pv;
    for (int p = 0; p < pang; ++p) pv[p] = clenshaw_c(tp.data() + std::size_t(p) * pang, pang, xt);
    return clenshaw_c(pv.data(), pang, xp);
}

// values -> Chebyshev coefficients in place, layout s fastest then theta then phi
void transform3(cplx* a, int ps, int pang, const std::vector<double>& ms,
                const std::vector<double>& ma) {
    std::array<cplx, kMaxInterp> tmp;
    // along s
    for (int p = 0; p < pang; ++p)
        for (int t = 0; t < pang; ++t) {
            cplx* line = a + (std::size_t(p) * pang + t) * ps;
            for (int i = 0; i < ps; ++i) {
                cplx acc{};
                for (int k = 0; k < ps; ++k) acc += ms[std::size_t(i) * ps + k] * line[k];
                tmp[i] = acc;
            }
            std::copy(tmp.begin(), tmp.begin() + ps, line);
        }
    // along theta
    for (int p = 0; p < pang; ++p)
        for (int i = 0; i < ps; ++i) {
            cplx* base = a + std::size_t(p) * pang * ps + i;
            for (int t = 0; t < pang; ++t) {
                cplx acc{};
                for (int k = 0; k < pang; ++k)
                    acc += ma[std::size_t(t) * pang + k] * base[std::size_t(k) * ps];
                tmp[t] = acc;
            }
            for (int t = 0; t < pang; ++t) base[std::size_t(t) * ps] = tmp[t];
        }
    // along phi
    const std::size_t stride = std::size_t(pang) * ps;
    for (int t = 0; t < pang; ++t)
        for (int i = 0; i < ps; ++i) {
            cplx* base = a + std::size_t(t) * ps + i;
            for (int p = 0; p < pang; ++p) {
                cplx acc{};
                for (int k = 0; k < pang; ++k) acc += ma[std::size_t(p) * pang + k] * base[k * stride];
                tmp[p] = acc;
            }
            for (int p = 0; p < pang; ++p) base[p * stride] = tmp[p];
        }
}

std::vector<Factor> pipes_at(const ConePlan& plan, int level, const IfgfRequest& req) {
    std::vector<Factor> pipes;
    if (req.single_layer) pipes.push_back(Factor::W1);
    if (req.double_layer) {
        auto dl = dl_pipes_for_level(plan, level, req.strategy);
        pipes.insert(pipes.end(), dl.begin(), dl.end());
    }
    return pipes;
}

int find_pipe(const LevelData& data, Factor f) {
    for (std::size_t i = 0; i < data.pipes.size(); ++i)
        if (data.pipes[i] == f) return int(i);
    return -1;
}

// stable r_child - r_parent for the re-centering phase
double radius_difference(const Vec3& x, const Vec3& cc, const Vec3& cp, double rc, double rp) {
    const Vec3 sum = cc + cp - 2.0 * x;
    const Vec3 dif = cc - cp;
    return dot(sum, dif) / (rc + rp);
}

}  // namespace

int cone_interval_doublings(double side, double lambda) {
    return doublings_for_side(side, lambda);
}

void LevelCones::segment_of(const ConeCoords& c, int& g1, int& g2, int& g3) const {
    if (c.s > kConeEta + kSTol)
        throw InternalError("cone segment query with s > sqrt(3)/3: s=" + std::to_string(c.s));
    g1 = int(std::floor(c.s / ds)) + 1;
    if (g1 > ns) g1 = ns;  // closed top s-interval
    if (g1 < 1) g1 = 1;
    if (c.theta >= std::numbers::pi) {  // closed theta = pi case
        g2 = nc;
        g3 = 2 * nc;
        return;
    }
    g2 = std::min(nc, int(std::floor(c.theta / dth)) + 1);
    if (g2 < 1) g2 = 1;
    g3 = std::min(2 * nc, int(std::floor(c.phi / dph)) + 1);
    if (g3 < 1) g3 = 1;
}

void LevelCones::local_coords(const ConeCoords& c, int g1, int g2, int g3, double& ls,
                              double& lt, double& lp) const {
    ls = 2.0 * (c.s - (g1 - 1) * ds) / ds - 1.0;
    lt = 2.0 * (c.theta - (g2 - 1) * dth) / dth - 1.0;
    lp = 2.0 * (c.phi - (g3 - 1) * dph) / dph - 1.0;
}

std::span<cplx> LevelData::block(std::size_t seg, std::size_t pipe, std::size_t pts) {
    return {blocks.data() + (seg * pipes.size() + pipe) * pts, pts};
}
std::span<const cplx> LevelData::block(std::size_t seg, std::size_t pipe,
                                       std::size_t pts) const {
    return {blocks.data() + (seg * pipes.size() + pipe) * pts, pts};
}

std::vector<Factor> dl_pipes_for_level(const ConePlan& plan, int level, DlStrategy strategy) {
    switch (strategy) {
        case DlStrategy::W4:
            return {Factor::W4};
        case DlStrategy::W2W3:
            return {Factor::W2, Factor::W3};
        case DlStrategy::Hybrid: {
            const double lambda = 2.0 * std::numbers::pi / plan.k;
            if (plan.tree->side(level) / lambda < 0.5 - 1e-12)
                return {Factor::W2, Factor::W3};
            return {Factor::W4};
        }
    }
    return {Factor::W4};
}

ConePlan plan_cones(const Octree& tree, const Relations& rel, std::span<const Vec3> points,
                    std::span<const Vec3> normals, const ConeConfig& cfg, int workers) {
    if (cfg.ps < 1 || cfg.ps > kMaxInterp || cfg.pang < 1 || cfg.pang > kMaxInterp)
        throw InvalidArgument("plan_cones: interpolation orders must lie in [1,12]");
    if (cfg.n_s0 < 1 || cfg.n_c0 < 1)
        throw InvalidArgument("plan_cones: interval counts must be positive");
    ConePlan plan;
    plan.tree = &tree;
    plan.rel = &rel;
    plan.cfg = cfg;
    plan.k = tree.wavenumber;
    const double lambda = 2.0 * std::numbers::pi / plan.k;

    const int n = int(points.size());
    plan.pts.resize(n);
    plan.nrm.resize(n);
    for (int t = 0; t < n; ++t) {
        plan.pts[t] = points[tree.perm[t]];
        plan.nrm[t] = normals.empty() ? Vec3{0, 0, 1} : normals[tree.perm[t]];
    }

    plan.level_cones.resize(tree.depth);
    plan.level_segs.resize(tree.depth);
    const int w = resolve_workers(workers);

    for (int d = 3; d <= tree.depth; ++d) {
        plan.level_cones[d - 1] = make_level_cones(tree.side(d), lambda, cfg);
        const LevelCones& lc = plan.level_cones[d - 1];
        const auto& boxes = tree.levels[d - 1];
        const int nb = int(boxes.size());
        const int spb = lc.segs_per_box();

        std::vector<std::uint8_t> marks(std::size_t(nb) * spb, 0);

        ParallelErrors errs;
#pragma omp parallel for schedule(static) num_threads(w)
        for (int b = 0; b < nb; ++b) {
            errs.run([&, b] {
            const BoxFrame frame = tree.frame(d, boxes[b]);
            int g1, g2, g3;
            for (std::int32_t cb : rel.cousins[d - 1][b]) {
                for (std::uint32_t t = boxes[cb].begin; t < boxes[cb].end; ++t) {
                    const ConeCoords c = cartesian_to_cone(plan.pts[t], frame);
                    lc.segment_of(c, g1, g2, g3);
                    marks[std::size_t(b) * spb + lc.gamma_index(g1, g2, g3)] = 1;
                }
            }
            if (d > 3) {
                const int pb = boxes[b].parent;
                const LevelCones& plc = plan.level_cones[d - 2];
                const SegmentSet& pset = plan.level_segs[d - 2];
                const BoxFrame pframe = tree.frame(d - 1, tree.levels[d - 2][pb]);
                for (std::int32_t so = pset.box_seg_begin[pb]; so < pset.box_seg_begin[pb + 1];
                     ++so) {
                    const GammaTriple g = gamma_decompose(plc, pset.segs[so].gamma);
                    for (int ip = 0; ip < plc.pang; ++ip)
                        for (int it = 0; it < plc.pang; ++it)
                            for (int is = 0; is < plc.ps; ++is) {
                                ConeCoords node;
                                node.s = plc.s_nodes[std::size_t(g.g1 - 1) * plc.ps + is];
                                node.theta = plc.th_nodes[std::size_t(g.g2 - 1) * plc.pang + it];
                                node.phi = plc.ph_nodes[std::size_t(g.g3 - 1) * plc.pang + ip];
                                const Vec3 x = cone_to_cartesian(node, pframe);
                                const ConeCoords c = cartesian_to_cone(x, frame);
                                lc.segment_of(c, g1, g2, g3);
                                marks[std::size_t(b) * spb + lc.gamma_index(g1, g2, g3)] = 1;
                            }
                }
            }
            });
        }
        errs.rethrow();

        SegmentSet& set = plan.level_segs[d - 1];
        set.lookup.assign(std::size_t(nb) * spb, -1);
        set.box_seg_begin.assign(nb + 1, 0);
        for (int b = 0; b < nb; ++b) {
            set.box_seg_begin[b] = std::int32_t(set.segs.size());
            for (int g = 0; g < spb; ++g)
                if (marks[std::size_t(b) * spb + g]) {
                    set.lookup[std::size_t(b) * spb + g] = std::int32_t(set.segs.size());
                    set.segs.push_back({std::int32_t(b), std::int32_t(g)});
                }
        }
        set.box_seg_begin[nb] = std::int32_t(set.segs.size());
    }
    return plan;
}

std::string ConePlan::diagnostics() const {
    std::ostringstream os;
    os << "levels " << tree->depth << "\n";
    for (int d = 3; d <= tree->depth; ++d) {
        const auto& lc = level_cones[d - 1];
        const auto& set = level_segs[d - 1];
        os << "level " << d << ": boxes=" << tree->levels[d - 1].size()
           << " segments=" << set.segs.size()
           << " interp_points=" << set.segs.size() * std::size_t(lc.points_per_seg())
           << " ns=" << lc.ns << " nc=" << lc.nc << "\n";
    }
    return os.str();
}

LevelData level_d_fill(const ConePlan& plan, std::span<const cplx> a_perm,
                       std::span<const Factor> pipes, int workers) {
    const Octree& tree = *plan.tree;
    const int d = tree.depth;
    LevelData data;
    data.level = d;
    data.pipes.assign(pipes.begin(), pipes.end());
    if (d < 3) return data;

    const LevelCones& lc = plan.level_cones[d - 1];
    const SegmentSet& set = plan.level_segs[d - 1];
    const auto& boxes = tree.levels[d - 1];
    const int P = lc.points_per_seg();
    const int npipe = int(pipes.size());
    data.blocks.assign(std::size_t(set.segs.size()) * P * npipe, cplx{});

    const double k = plan.k;
    const auto ms = cheb::transform_matrix(lc.ps);
    const auto ma = cheb::transform_matrix(lc.pang);
    const int w = resolve_workers(workers);

#pragma omp parallel for schedule(dynamic, 8) num_threads(w)
    for (std::int64_t so = 0; so < std::int64_t(set.segs.size()); ++so) {
        const auto seg = set.segs[so];
        const GammaTriple g = gamma_decompose(lc, seg.gamma);
        const auto& box = boxes[seg.box];
        const BoxFrame frame = tree.frame(d, box);
        const double h = frame.radius();

        for (int ip = 0; ip < lc.pang; ++ip) {
            const double ph = lc.ph_nodes[std::size_t(g.g3 - 1) * lc.pang + ip];
            const double cph = std::cos(ph), sph = std::sin(ph);
            for (int it = 0; it < lc.pang; ++it) {
                const double th = lc.th_nodes[std::size_t(g.g2 - 1) * lc.pang + it];
                const double cth = std::cos(th), sth = std::sin(th);
                const Vec3 xhat{sth * cph, sth * sph, cth};
                for (int is = 0; is < lc.ps; ++is) {
                    const double s = lc.s_nodes[std::size_t(g.g1 - 1) * lc.ps + is];
                    const double s_over_h = s / h;
                    const double kh_over_s = k * h / s;
                    std::array<cplx, 4> acc{};
                    for (std::uint32_t t = box.begin; t < box.end; ++t) {
                        const Vec3 dy = plan.pts[t] - frame.center;
                        const Vec3 v = xhat - dy * s_over_h;
                        const double nv2 = norm2(v);
                        const double nv = std::sqrt(nv2);
                        const double inv = 1.0 / nv;
                        const double arg = kh_over_s * ((nv2 - 1.0) / (nv + 1.0));
                        const cplx pa = a_perm[t] * std::polar(1.0, arg);
                        for (int pi = 0; pi < npipe; ++pi) {
                            switch (pipes[pi]) {
                                case Factor::W1:
                                    acc[pi] += pa * inv;
                                    break;
                                case Factor::W2:
                                    acc[pi] += pa * (dot(v, plan.nrm[t]) * inv * inv * inv);
                                    break;
                                case Factor::W3:
                                    acc[pi] += pa * (dot(v, plan.nrm[t]) * inv * inv);
                                    break;
                                case Factor::W4: {
                                    const double dn = dot(v, plan.nrm[t]) * inv * inv;
                                    acc[pi] += pa * (cplx(s_over_h * inv, 0.0) - cplx(0.0, k)) * dn;
                                    break;
                                }
                            }
                        }
                    }
                    const int node = is + lc.ps * (it + lc.pang * ip);
                    for (int pi = 0; pi < npipe; ++pi)
                        data.blocks[(std::size_t(so) * npipe + pi) * P + node] = acc[pi];
                }
            }
        }
        for (int pi = 0; pi < npipe; ++pi)
            transform3(data.blocks.data() + (std::size_t(so) * npipe + pi) * P, lc.ps, lc.pang,
                       ms, ma);
    }
    return data;
}

namespace {

// evaluate one level's cousin contributions into the (permuted-index) outputs
void cousin_evaluate(const ConePlan& plan, const LevelData& data, int d,
                     std::vector<cplx>& single, std::vector<cplx>& dbl, int workers) {
    const Octree& tree = *plan.tree;
    const LevelCones& lc = plan.level_cones[d - 1];
    const SegmentSet& set = plan.level_segs[d - 1];
    const auto& boxes = tree.levels[d - 1];
    const int P = lc.points_per_seg();
    const double k = plan.k;
    const int w = resolve_workers(workers);
    const int npipe = int(data.pipes.size());
    constexpr double kInv4Pi = 1.0 / (4.0 * std::numbers::pi);

    ParallelErrors errs;
#pragma omp parallel for schedule(dynamic, 4) num_threads(w)
    for (std::int64_t tb = 0; tb < std::int64_t(boxes.size()); ++tb) {
        errs.run([&, tb] {
        for (std::int32_t sb : plan.rel->cousins[d - 1][tb]) {
            const BoxFrame frame = tree.frame(d, boxes[sb]);
            const double h = frame.radius();
            for (std::uint32_t t = boxes[tb].begin; t < boxes[tb].end; ++t) {
                const ConeCoords c = cartesian_to_cone(plan.pts[t], frame);
                int g1, g2, g3;
                lc.segment_of(c, g1, g2, g3);
                const std::int32_t so =
                    set.lookup[std::size_t(sb) * lc.segs_per_box() + lc.gamma_index(g1, g2, g3)];
                if (so < 0)
                    throw InternalError("cousin point hit an unplanned cone segment");
                double ls, lt, lp;
                lc.local_coords(c, g1, g2, g3, ls, lt, lp);
                const double r = h / c.s;
                for (int pi = 0; pi < npipe; ++pi) {
                    const cplx val =
                        eval3(data.blocks.data() + (std::size_t(so) * npipe + pi) * P, lc.ps,
                              lc.pang, ls, lt, lp);
                    switch (data.pipes[pi]) {
                        case Factor::W1:
                            single[t] += std::polar(kInv4Pi / r, k * r) * val;
                            break;
                        case Factor::W4:
                            dbl[t] += std::polar(kInv4Pi / r, k * r) * val;
                            break;
                        case Factor::W2:
                            dbl[t] += std::polar(kInv4Pi / (r * r), k * r) * val;
                            break;
                        case Factor::W3:
                            dbl[t] += cplx(0.0, -k) * std::polar(kInv4Pi / r, k * r) * val;
                            break;
                    }
                }
            }
        }
        });
    }
    errs.rethrow();
}

LevelData parent_fill(const ConePlan& plan, const LevelData& child, int d,
                      const std::vector<Factor>& parent_pipes, int workers) {
    const Octree& tree = *plan.tree;
    const LevelCones& plc = plan.level_cones[d - 2];
    const LevelCones& clc = plan.level_cones[d - 1];
    const SegmentSet& pset = plan.level_segs[d - 2];
    const SegmentSet& cset = plan.level_segs[d - 1];
    const auto& pboxes = tree.levels[d - 2];
    const auto& cboxes = tree.levels[d - 1];

    LevelData out;
    out.level = d - 1;
    out.pipes = parent_pipes;
    const int P = plc.points_per_seg();
    const int cP = clc.points_per_seg();
    const int npipe = int(parent_pipes.size());
    const int cnpipe = int(child.pipes.size());
    out.blocks.assign(std::size_t(pset.segs.size()) * P * npipe, cplx{});

    const double k = plan.k;
    const auto ms = cheb::transform_matrix(plc.ps);
    const auto ma = cheb::transform_matrix(plc.pang);
    const int w = resolve_workers(workers);

    const int cw1 = find_pipe(child, Factor::W1);
    const int cw2 = find_pipe(child, Factor::W2);
    const int cw3 = find_pipe(child, Factor::W3);
    const int cw4 = find_pipe(child, Factor::W4);

    ParallelErrors errs;
#pragma omp parallel for schedule(dynamic, 4) num_threads(w)
    for (std::int64_t pb = 0; pb < std::int64_t(pboxes.size()); ++pb) {
        errs.run([&, pb] {
        const BoxFrame pframe = tree.frame(d - 1, pboxes[pb]);
        const double ph = pframe.radius();
        for (std::int32_t so = pset.box_seg_begin[pb]; so < pset.box_seg_begin[pb + 1]; ++so) {
            const GammaTriple g = gamma_decompose(plc, pset.segs[so].gamma);
            for (int ipp = 0; ipp < plc.pang; ++ipp)
                for (int itt = 0; itt < plc.pang; ++itt)
                    for (int iss = 0; iss < plc.ps; ++iss) {
                        ConeCoords node;
                        node.s = plc.s_nodes[std::size_t(g.g1 - 1) * plc.ps + iss];
                        node.theta = plc.th_nodes[std::size_t(g.g2 - 1) * plc.pang + itt];
                        node.phi = plc.ph_nodes[std::size_t(g.g3 - 1) * plc.pang + ipp];
                        const Vec3 x = cone_to_cartesian(node, pframe);
                        const double rp = ph / node.s;
                        const int nodeidx = iss + plc.ps * (itt + plc.pang * ipp);

                        for (std::int32_t ch : pboxes[pb].children) {
                            if (ch < 0) continue;
                            const BoxFrame cframe = tree.frame(d, cboxes[ch]);
                            const ConeCoords cc = cartesian_to_cone(x, cframe);
                            int g1, g2, g3;
                            clc.segment_of(cc, g1, g2, g3);
                            const std::int32_t cso =
                                cset.lookup[std::size_t(ch) * clc.segs_per_box() +
                                            clc.gamma_index(g1, g2, g3)];
                            if (cso < 0)
                                throw InternalError(
                                    "parent interpolation node missing child cone segment");
                            double ls, lt, lp;
                            clc.local_coords(cc, g1, g2, g3, ls, lt, lp);
                            const double rc = cframe.radius() / cc.s;
                            const double dr =
                                radius_difference(x, cframe.center, pframe.center, rc, rp);
                            const cplx ratio1 = std::polar(rp / rc, k * dr);

                            auto child_val = [&](int pipe) {
                                return eval3(
                                    child.blocks.data() + (std::size_t(cso) * cnpipe + pipe) * cP,
                                    clc.ps, clc.pang, ls, lt, lp);
                            };

                            for (int pi = 0; pi < npipe; ++pi) {
                                cplx add{};
                                switch (parent_pipes[pi]) {
                                    case Factor::W1:
                                        add = ratio1 * child_val(cw1);
                                        break;
                                    case Factor::W4:
                                        if (cw4 >= 0) {
                                            add = ratio1 * child_val(cw4);
                                        } else {
                                            // child ran the W2/W3 split; re-center into W4
                                            const cplx i2 = child_val(cw2);
                                            const cplx i3 = child_val(cw3);
                                            add = std::polar(rp / (rc * rc), k * dr) * i2 +
                                                  cplx(0.0, -k) * ratio1 * i3;
                                        }
                                        break;
                                    case Factor::W2:
                                        if (cw2 < 0)
                                            throw InternalError(
                                                "W2 parent pipeline without W2 child");
                                        add = std::polar((rp * rp) / (rc * rc), k * dr) *
                                              child_val(cw2);
                                        break;
                                    case Factor::W3:
                                        if (cw3 < 0)
                                            throw InternalError(
                                                "W3 parent pipeline without W3 child");
                                        add = ratio1 * child_val(cw3);
                                        break;
                                }
                                out.blocks[(std::size_t(so) * npipe + pi) * P + nodeidx] += add;
                            }
                        }
                    }
            for (int pi = 0; pi < npipe; ++pi)
                transform3(out.blocks.data() + (std::size_t(so) * npipe + pi) * P, plc.ps,
                           plc.pang, ms, ma);
        }
        });
    }
    errs.rethrow();
    return out;
}

}  // namespace

IfgfOutputs propagate_and_evaluate(const ConePlan& plan, std::span<const cplx> a,
                                   const IfgfRequest& req, int workers) {
    return ifgf_apply(plan, a, req, workers);
}

IfgfOutputs ifgf_apply(const ConePlan& plan, std::span<const cplx> a, const IfgfRequest& req,
                       int workers) {
    const Octree& tree = *plan.tree;
    const int n = int(plan.pts.size());
    if (int(a.size()) != n) throw InvalidArgument("ifgf_apply: source size mismatch");

    std::vector<cplx> single_p(n, cplx{}), dbl_p(n, cplx{});

    if (tree.depth >= 3) {
        std::vector<cplx> a_perm(n);
        for (int t = 0; t < n; ++t) a_perm[t] = a[tree.perm[t]];

        LevelData data = level_d_fill(plan, a_perm, pipes_at(plan, tree.depth, req), workers);
        for (int d = tree.depth; d >= 3; --d) {
            cousin_evaluate(plan, data, d, single_p, dbl_p, workers);
            if (d > 3) {
                LevelData parent =
                    parent_fill(plan, data, d, pipes_at(plan, d - 1, req), workers);
                data = std::move(parent);
            }
        }
    }

    IfgfOutputs out;
    out.single.assign(n, cplx{});
    out.dbl.assign(n, cplx{});
    for (int t = 0; t < n; ++t) {
        out.single[tree.perm[t]] = single_p[t];
        out.dbl[tree.perm[t]] = dbl_p[t];
    }
    return out;
}

}  // namespace ifgf
