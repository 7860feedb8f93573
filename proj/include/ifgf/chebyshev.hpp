#pragma once

#include <complex>
#include <span>
#include <vector>

#include "ifgf/common.hpp"

namespace ifgf::cheb {

// Chebyshev-Gauss nodes x_k = cos((2k+1)pi/(2n)), k = 0..n-1, strictly decreasing in (-1,1).
std::vector<double> cheb_nodes(int n);

// Evaluate T_0..T_{n-1} at x into out (out must hold n values).
void eval_basis(int n, double x, double* out);

// Interpolation coefficients from samples taken at cheb_nodes(n):
//   a_i = (alpha_i / n) * sum_k u(x_k) T_i(x_k),  alpha_0 = 1, alpha_{i>0} = 2.
// This is the Gauss-node discrete orthogonality transform; it reproduces the samples
// exactly at the nodes.
std::vector<cplx> coeffs_1d(std::span<const cplx> samples);
std::vector<double> coeffs_1d_real(std::span<const double> samples);

// Clamped Clenshaw evaluation of sum a_i T_i(x). Points may exceed [-1,1] by at most
// `tol` (default 1e-12); farther out is an error.
inline constexpr double kRangeTol = 1e-12;
cplx eval_1d(std::span<const cplx> coeffs, double x, double tol = kRangeTol);
double eval_1d_real(std::span<const double> coeffs, double x, double tol = kRangeTol);

// 2D tensor coefficients; samples and coefficients are stored u-fastest:
// samples[i + nu*j] = u(x_i, x_j). Result a[n + nu*m].
std::vector<cplx> coeffs_2d(std::span<const cplx> samples, int nu, int nv);
std::vector<double> coeffs_2d_real(std::span<const double> samples, int nu, int nv);

cplx eval_2d(std::span<const cplx> coeffs, int nu, int nv, double u, double v,
             double tol = kRangeTol);
double eval_2d_real(std::span<const double> coeffs, int nu, int nv, double u, double v,
                    double tol = kRangeTol);

// Coefficients of the derivative series along the first (u) index.
std::vector<double> derivative_u(std::span<const double> coeffs, int nu, int nv);
// Same along the second (v) index.
std::vector<double> derivative_v(std::span<const double> coeffs, int nu, int nv);

// Fejer's first quadrature rule: nodes = cheb_nodes(J),
//   w_j = (2/J) [1 - 2 sum_{l=1}^{floor(J/2)} cos(l pi (2j+1)/J) / (4 l^2 - 1)].
struct FejerRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
FejerRule fejer_rule(int J);

// Dense transform matrix M (row-major, n x n) with a = M u for samples u at cheb nodes.
std::vector<double> transform_matrix(int n);

}  // namespace ifgf::cheb
