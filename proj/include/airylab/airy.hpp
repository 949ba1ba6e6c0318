#pragma once

#include <cstddef>
#include <vector>

namespace airylab {

// Ai(x) to better than 1e-10 absolute accuracy on [-20, 20]:
// compensated Maclaurin series on the middle range, Poincare asymptotic
// expansions outside, with branch handover tested for consistency.
double airy_ai(double x);
double airy_ai_prime(double x);

// Extended kernel
//   s >= r: int_0^inf e^{-u(s-r)} Ai(x+u) Ai(y+u) du
//   s <  r: -int_0^inf e^{u(s-r)} Ai(x-u) Ai(y-u) du
// by adaptive quadrature, truncated where the integrand envelope < 1e-14.
double airy_kernel(double x, double s, double y, double r);

// Equal-time kernel via (Ai(x)Ai'(y) - Ai'(x)Ai(y))/(x - y), the closed form
// of the u-integral; used as an independent cross-check of airy_kernel.
double airy_kernel_equal_time(double x, double y);

// det K(m_i, m_j) over the equal-time kernel; upper-bounds the joint density
// of the top k lines at one time. Points must be strictly decreasing.
double det_density_bound(const std::vector<double>& m);

// The tail bounds leave constants unnamed; they enter as explicit inputs and
// experiments report fitted values only.
struct TailConstants {
    double c = 1.0;
    double d = 1.0;
    std::size_t k = 1;
    double t = 1.0;
};

// c * exp(-(4/3) sum m_i^{3/2}) for nonincreasing m_i >= 0 (joint upper tail).
double one_point_upper_rhs(const std::vector<double>& m, const TailConstants& tc);

// exp(-(4/3) m^{3/2} + c m^{5/4}) (single-level upper tail with correction).
double one_point_upper_rhs_refined(double m, const TailConstants& tc);

// 2 exp(-d m^3) (lower tail).
double one_point_lower_rhs(double m, const TailConstants& tc);

// exp(-m^2/(4t) - ((4k-2)/3) m^{3/2} + c m^{5/4}) (two-point increment tail).
double two_point_rhs(double m, const TailConstants& tc);

} // namespace airylab
