#include "ifgf/chebyshev.hpp"

#include <numbers>

namespace ifgf::cheb {

namespace {

double clamp_to_range(double x, double tol) {
    if (x > 1.0 + tol || x < -1.0 - tol)
        throw InvalidArgument("chebyshev evaluation point out of [-1,1]: x=" + std::to_string(x));
    return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x);
}

template <class T>
T clenshaw(const T* a, int n, double x) {
    // backward recurrence, stable for high degrees
    T b1{}, b2{};
    for (int i = n - 1; i >= 1; --i) {
        T b0 = a[i] + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return a[0] + x * b1 - b2;
}

template <class T>
std::vector<T> coeffs_impl(std::span<const T> samples) {
    const int n = static_cast<int>(samples.size());
    if (n < 1) throw InvalidArgument("coeffs_1d: empty sample vector");
    const auto xs = cheb_nodes(n);
    std::vector<T> a(n, T{});
    std::vector<double> basis(n);
    for (int k = 0; k < n; ++k) {
        eval_basis(n, xs[k], basis.data());
        for (int i = 0; i < n; ++i) a[i] += samples[k] * basis[i];
    }
    for (int i = 0; i < n; ++i) a[i] *= (i == 0 ? 1.0 : 2.0) / n;
    return a;
}

template <class T>
std::vector<T> coeffs2_impl(std::span<const T> samples, int nu, int nv) {
    if (nu < 1 || nv < 1 || static_cast<int>(samples.size()) != nu * nv)
        throw InvalidArgument("coeffs_2d: sample grid size mismatch");
    // transform along u (fast index), then along v
    std::vector<T> tmp(nu * nv);
    std::vector<T> col(std::max(nu, nv));
    for (int j = 0; j < nv; ++j) {
        auto a = coeffs_impl(std::span<const T>(samples.data() + std::size_t(nu) * j, nu));
        std::copy(a.begin(), a.end(), tmp.begin() + std::size_t(nu) * j);
    }
    std::vector<T> out(nu * nv);
    std::vector<T> line(nv);
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) line[j] = tmp[i + std::size_t(nu) * j];
        auto a = coeffs_impl(std::span<const T>(line.data(), nv));
        for (int j = 0; j < nv; ++j) out[i + std::size_t(nu) * j] = a[j];
    }
    return out;
}

template <class T>
T eval2_impl(std::span<const T> coeffs, int nu, int nv, double u, double v, double tol) {
    if (static_cast<int>(coeffs.size()) != nu * nv)
        throw InvalidArgument("eval_2d: coefficient tensor size mismatch");
    const double uc = clamp_to_range(u, tol);
    const double vc = clamp_to_range(v, tol);
    // Clenshaw along u per v-row, then along v
    std::vector<T> row(nv);
    for (int j = 0; j < nv; ++j) row[j] = clenshaw(coeffs.data() + std::size_t(nu) * j, nu, uc);
    return clenshaw(row.data(), nv, vc);
}

}  // namespace

std::vector<double> cheb_nodes(int n) {
    if (n < 1) throw InvalidArgument("cheb_nodes: n must be >= 1");
    std::vector<double> x(n);
    for (int k = 0; k < n; ++k)
        x[k] = std::cos((2.0 * k + 1.0) * std::numbers::pi / (2.0 * n));
    return x;
}

void eval_basis(int n, double x, double* out) {
    out[0] = 1.0;
    if (n > 1) out[1] = x;
    for (int i = 2; i < n; ++i) out[i] = 2.0 * x * out[i - 1] - out[i - 2];
}

std::vector<cplx> coeffs_1d(std::span<const cplx> samples) { return coeffs_impl(samples); }
std::vector<double> coeffs_1d_real(std::span<const double> samples) { return coeffs_impl(samples); }

cplx eval_1d(std::span<const cplx> coeffs, double x, double tol) {
    if (coeffs.empty()) throw InvalidArgument("eval_1d: empty coefficients");
    return clenshaw(coeffs.data(), static_cast<int>(coeffs.size()), clamp_to_range(x, tol));
}

double eval_1d_real(std::span<const double> coeffs, double x, double tol) {
    if (coeffs.empty()) throw InvalidArgument("eval_1d: empty coefficients");
    return clenshaw(coeffs.data(), static_cast<int>(coeffs.size()), clamp_to_range(x, tol));
}

std::vector<cplx> coeffs_2d(std::span<const cplx> samples, int nu, int nv) {
    return coeffs2_impl(samples, nu, nv);
}
std::vector<double> coeffs_2d_real(std::span<const double> samples, int nu, int nv) {
    return coeffs2_impl(samples, nu, nv);
}

cplx eval_2d(std::span<const cplx> coeffs, int nu, int nv, double u, double v, double tol) {
    return eval2_impl(coeffs, nu, nv, u, v, tol);
}
double eval_2d_real(std::span<const double> coeffs, int nu, int nv, double u, double v,
                    double tol) {
    return eval2_impl(coeffs, nu, nv, u, v, tol);
}

std::vector<double> derivative_u(std::span<const double> coeffs, int nu, int nv) {
    if (static_cast<int>(coeffs.size()) != nu * nv)
        throw InvalidArgument("derivative_u: coefficient tensor size mismatch");
    std::vector<double> b(coeffs.size(), 0.0);
    for (int j = 0; j < nv; ++j) {
        const double* a = coeffs.data() + std::size_t(nu) * j;
        double* d = b.data() + std::size_t(nu) * j;
        if (nu == 1) continue;
        d[nu - 1] = 0.0;
        if (nu >= 2) d[nu - 2] = 2.0 * (nu - 1) * a[nu - 1];
        for (int i = nu - 3; i >= 0; --i) d[i] = d[i + 2] + 2.0 * (i + 1) * a[i + 1];
        d[0] *= 0.5;
    }
    return b;
}

std::vector<double> derivative_v(std::span<const double> coeffs, int nu, int nv) {
    if (static_cast<int>(coeffs.size()) != nu * nv)
        throw InvalidArgument("derivative_v: coefficient tensor size mismatch");
    std::vector<double> b(coeffs.size(), 0.0);
    std::vector<double> a(nv), d(nv);
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) a[j] = coeffs[i + std::size_t(nu) * j];
        if (nv == 1) {
            b[i] = 0.0;
            continue;
        }
        d[nv - 1] = 0.0;
        if (nv >= 2) d[nv - 2] = 2.0 * (nv - 1) * a[nv - 1];
        for (int j = nv - 3; j >= 0; --j) d[j] = d[j + 2] + 2.0 * (j + 1) * a[j + 1];
        d[0] *= 0.5;
        for (int j = 0; j < nv; ++j) b[i + std::size_t(nu) * j] = d[j];
    }
    return b;
}

FejerRule fejer_rule(int J) {
    if (J < 1) throw InvalidArgument("fejer_rule: J must be >= 1");
    FejerRule rule;
    rule.nodes = cheb_nodes(J);
    rule.weights.resize(J);
    for (int j = 0; j < J; ++j) {
        double s = 0.0;
        for (int l = 1; l <= J / 2; ++l)
            s += std::cos(l * std::numbers::pi * (2.0 * j + 1.0) / J) / (4.0 * l * l - 1.0);
        rule.weights[j] = (2.0 / J) * (1.0 - 2.0 * s);
    }
    return rule;
}

std::vector<double> transform_matrix(int n) {
    const auto xs = cheb_nodes(n);
    std::vector<double> M(std::size_t(n) * n);
    std::vector<double> basis(n);
    for (int k = 0; k < n; ++k) {
        eval_basis(n, xs[k], basis.data());
        for (int i = 0; i < n; ++i)
            M[std::size_t(i) * n + k] = (i == 0 ? 1.0 : 2.0) / n * basis[i];
    }
    return M;
}

}  // namespace ifgf::cheb
