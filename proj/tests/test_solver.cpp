#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ifgf/solver.hpp"

using namespace ifgf;

namespace {

std::vector<cplx> random_density(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<cplx> a(n);
    for (auto& v : a) v = cplx(u(rng), u(rng));
    return a;
}

double max_rel(const std::vector<cplx>& got, const std::vector<cplx>& want) {
    double scale = 0;
    for (const auto& w : want) scale = std::max(scale, std::abs(w));
    double worst = 0;
    for (std::size_t i = 0; i < got.size(); ++i)
        worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
    return worst;
}

}  // namespace

TEST_SUITE_BEGIN("solver");

TEST_CASE("coupling parameter") {
    CHECK(coupling_gamma(2.0, 2.0 / 86.8) == doctest::Approx(86.8).epsilon(1e-12));
    CHECK(coupling_gamma(1.0, 1.0) == doctest::Approx(3.0));
    CHECK(coupling_gamma(3.0, 1.0) == doctest::Approx(3.0));
    CHECK(coupling_gamma(3.5, 1.0) == doctest::Approx(3.5));
}

TEST_CASE("incident fields") {
    IncidentField f;  // plane wave, (theta, phi) = (0, pi): head-on along -z
    const Vec3 khat = f.wave_direction();
    CHECK(std::abs(khat.x) < 1e-15);
    CHECK(std::abs(khat.y) < 1e-15);
    CHECK(khat.z == doctest::Approx(-1.0));
    CHECK(std::abs(incident_at(f, Vec3{0, 0, 0}, 3.0) - cplx(1, 0)) < 1e-15);

    const auto mesh = build_sphere(1.0, 0, 4, 4);
    const auto tr = incident_trace(f, mesh, 2.7);
    for (const auto& v : tr) CHECK(std::abs(std::abs(v) - 1.0) < 1e-14);

    IncidentField ps;
    ps.kind = IncidentField::Kind::PointSources;
    ps.sources = {Vec3{0.2, 0.1, 3.0}};
    const Vec3 x{1, 1, 1};
    const double k = 1.9;
    const double r = norm(x - ps.sources[0]);
    CHECK(std::abs(incident_at(ps, x, k) - std::polar(1.0 / r, k * r)) < 1e-15);
    ps.sources = {x};
    CHECK_THROWS_AS(incident_at(ps, x, k), InvalidArgument);
}

TEST_CASE("gmres on simple operators") {
    const std::size_t n = 40;
    const auto rhs = random_density(n, 21);
    auto identity = [](std::span<const cplx> x) {
        return std::vector<cplx>(x.begin(), x.end());
    };
    auto res = gmres_solve(identity, rhs, 1e-10, 50);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(res.solution[i] - rhs[i]) < 1e-12);

    auto twice = [](std::span<const cplx> x) {
        std::vector<cplx> y(x.begin(), x.end());
        for (auto& v : y) v *= 2.0;
        return y;
    };
    res = gmres_solve(twice, rhs, 1e-10, 50);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(res.solution[i] - rhs[i] / 2.0) < 1e-12);

    // dense random well-conditioned system: converges, history non-increasing
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<cplx> A(n * n);
    for (auto& v : A) v = cplx(u(rng), u(rng)) * 0.1;
    for (std::size_t i = 0; i < n; ++i) A[i * n + i] += 3.0;
    auto dense = [&](std::span<const cplx> x) {
        std::vector<cplx> y(n, cplx{});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) y[i] += A[i * n + j] * x[j];
        return y;
    };
    res = gmres_solve(dense, rhs, 1e-12, 60);
    CHECK(res.converged);
    for (std::size_t i = 1; i < res.residual_history.size(); ++i)
        CHECK(res.residual_history[i] <= res.residual_history[i - 1] + 1e-15);
    const auto ax = dense(res.solution);
    CHECK(max_rel(ax, rhs) < 1e-10);

    // restart path agrees
    auto res_r = gmres_solve(dense, rhs, 1e-10, 60, 7);
    CHECK(res_r.converged);
    const auto axr = dense(res_r.solution);
    CHECK(max_rel(axr, rhs) < 1e-8);
}

TEST_CASE("combined operator structure") {
    const auto mesh = build_sphere(1.0, 1, 6, 6);  // 864 unknowns
    SolveConfig cfg;
    cfg.k = 2 * std::numbers::pi;  // 2 lambda sphere
    CombinedOperator op(mesh, cfg);
    CHECK(op.gamma() == doctest::Approx(3.0));  // max(3, 2)

    const std::size_t n = mesh.size();
    std::vector<cplx> zero(n, cplx{});
    const auto out0 = op.apply(zero);
    for (const auto& v : out0) CHECK(std::abs(v) == 0.0);

    // operator equals (1/2) I + D - i gamma S assembled from the layer potentials
    const auto phi = random_density(n, 31);
    std::vector<cplx> s, d;
    op.layer_potentials(phi, s, d);
    const auto combined = op.apply(phi);
    double scale = 0;
    for (auto& v : combined) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n; ++i) {
        const cplx want = 0.5 * phi[i] + d[i] - cplx(0, op.gamma()) * s[i];
        CHECK(std::abs(combined[i] - want) <= 1e-13 * scale);
    }

    // linearity
    const auto psi = random_density(n, 32);
    std::vector<cplx> mix(n);
    const cplx al(0.3, 0.8), be(-0.5, 0.1);
    for (std::size_t i = 0; i < n; ++i) mix[i] = al * phi[i] + be * psi[i];
    const auto om = op.apply(mix);
    const auto op1 = op.apply(phi);
    const auto op2 = op.apply(psi);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(om[i] - (al * op1[i] + be * op2[i])) <= 1e-12 * scale);
}

TEST_CASE("acceleration transparency on the 2-lambda sphere") {
    const auto mesh = build_sphere(1.0, 1, 6, 6);
    SolveConfig cfg;
    cfg.k = 2 * std::numbers::pi;
    CombinedOperator op(mesh, cfg);
    const auto phi = random_density(mesh.size(), 77);
    const auto fast = op.apply(phi);
    const auto direct = op.apply_direct(phi);
    CHECK(max_rel(fast, direct) < 1e-3);
}

TEST_CASE("determinism across runs and worker counts") {
    const auto mesh = build_sphere(1.0, 1, 6, 6);
    const auto phi = random_density(mesh.size(), 5);
    std::vector<cplx> out1, out2;
    for (int workers : {1, 2}) {
        SolveConfig cfg;
        cfg.k = 2 * std::numbers::pi;
        cfg.workers = workers;
        CombinedOperator op(mesh, cfg);
        const auto out = op.apply(phi);
        if (workers == 1) out1 = out;
        else out2 = out;
    }
    REQUIRE(out1.size() == out2.size());
    for (std::size_t i = 0; i < out1.size(); ++i) CHECK(out1[i] == out2[i]);

    // repeated construction and apply is bitwise stable
    SolveConfig cfg;
    cfg.k = 2 * std::numbers::pi;
    CombinedOperator opa(mesh, cfg), opb(mesh, cfg);
    const auto a = opa.apply(phi);
    const auto b = opb.apply(phi);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("solve on a small sphere") {
    const auto mesh = build_sphere(0.5, 1, 6, 6);  // unit diameter
    IncidentField inc;                             // head-on plane wave
    SolveConfig cfg;
    cfg.k = 2 * std::numbers::pi / 0.5;  // lambda = 0.5 -> diameter = 2 lambda
    const auto res = solve(mesh, inc, cfg);
    CHECK(res.converged);
    CHECK(res.gamma == doctest::Approx(3.0));  // max(3, 1/0.5) = 3 recorded
    CHECK(res.iterations > 2);
    CHECK(res.iterations < 40);
    for (std::size_t i = 1; i < res.residual_history.size(); ++i)
        CHECK(res.residual_history[i] <= res.residual_history[i - 1] + 1e-15);
    // the boundary condition is met: combined trace equals -u^i at the nodes
    CombinedOperator op(mesh, cfg);
    const auto lhs = op.apply(res.density);
    const auto ui = incident_trace(inc, mesh, cfg.k);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        num += std::norm(lhs[i] + ui[i]);
        den += std::norm(ui[i]);
    }
    CHECK(std::sqrt(num / den) < 2 * cfg.tol);
}

TEST_SUITE_END();
