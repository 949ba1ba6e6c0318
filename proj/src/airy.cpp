#include "airylab/airy.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <iostream>

#include "airylab/errors.hpp"
#include "airylab/numerics.hpp"

namespace airylab {

namespace {

// Ai(0) and Ai'(0): 3^{-2/3}/Gamma(2/3) and -3^{-1/3}/Gamma(1/3).
constexpr double kAi0 = 0.35502805388781723926;
constexpr double kAip0 = -0.25881940379280679840;

// Series/asymptotics handover, tuned so both branches beat 1e-10 absolute:
// the Maclaurin series loses ~eps * exp((2/3)|x|^{3/2}) to cancellation on the
// negative side, the Poincare expansions err like exp(-(4/3)|x|^{3/2}) at
// optimal truncation.
constexpr double kPosSwitch = 6.0;
constexpr double kNegSwitch = -7.0;

struct AiryPair {
    double ai;
    double aip;
};

AiryPair airy_series(double x) {
    const double x3 = x * x * x;
    CompensatedSum f, g, fp, gp;
    // f = sum x^{3n} prod, g = sum x^{3n+1} prod, and their derivatives.
    double tf = 1.0, tg = x, tfp = 0.5 * x * x, tgp = 1.0;
    f.add(tf);
    g.add(tg);
    fp.add(tfp);
    gp.add(tgp);
    for (std::size_t n = 0; n < 400; ++n) {
        const double dn = static_cast<double>(n);
        tf *= x3 / ((3 * dn + 2) * (3 * dn + 3));
        tg *= x3 / ((3 * dn + 3) * (3 * dn + 4));
        // fp starts at its n=1 term, so its ratio is indexed one step behind
        tfp *= x3 * (dn + 2.0) / ((dn + 1.0) * (3 * dn + 5) * (3 * dn + 6));
        tgp *= x3 / ((3 * dn + 1) * (3 * dn + 3));
        f.add(tf);
        g.add(tg);
        fp.add(tfp);
        gp.add(tgp);
        const double scale = std::abs(f.value()) + std::abs(g.value()) + 1.0;
        if (std::abs(tf) < 1e-20 * scale && std::abs(tg) < 1e-20 * scale &&
            std::abs(tfp) < 1e-20 * scale && std::abs(tgp) < 1e-20 * scale)
            break;
    }
    return {kAi0 * f.value() + kAip0 * g.value(),
            kAi0 * fp.value() + kAip0 * gp.value()};
}

// u_k, v_k coefficient streams of the Poincare expansions.
double next_u(double u, std::size_t k) {
    const double dk = static_cast<double>(k);
    return u * (6 * dk + 1) * (6 * dk + 3) * (6 * dk + 5) /
           (216.0 * (2 * dk + 1) * (dk + 1));
}

double v_from_u(double u, std::size_t k) {
    const double dk = static_cast<double>(k);
    return u * (6 * dk + 1) / (1.0 - 6 * dk);
}

AiryPair airy_asymptotic_pos(double x) {
    const double xi = (2.0 / 3.0) * x * std::sqrt(x);
    double u = 1.0;
    double term_ai = 1.0, term_aip = 1.0;
    CompensatedSum sa, sp;
    sa.add(term_ai);
    sp.add(term_aip);
    double prev = std::abs(term_ai);
    for (std::size_t k = 0; k < 60; ++k) {
        u = next_u(u, k);
        const double sign = (k % 2 == 0) ? -1.0 : 1.0;   // (-1)^{k+1}
        const double pw = std::pow(xi, -static_cast<double>(k + 1));
        term_ai = sign * u * pw;
        term_aip = sign * v_from_u(u, k + 1) * pw;
        if (std::abs(term_ai) > prev)
            break;   // past optimal truncation
        prev = std::abs(term_ai);
        sa.add(term_ai);
        sp.add(term_aip);
        if (std::abs(term_ai) < 1e-20)
            break;
    }
    const double root4 = std::pow(x, 0.25);
    const double pref = std::exp(-xi) / (2.0 * std::sqrt(M_PI));
    return {pref * sa.value() / root4, -pref * root4 * sp.value()};
}

AiryPair airy_asymptotic_neg(double x) {
    const double z = -x;
    const double xi = (2.0 / 3.0) * z * std::sqrt(z);
    // Split u_k, v_k into even/odd sums of the oscillatory expansions.
    CompensatedSum even_u, odd_u, even_v, odd_v;
    double u = 1.0;
    double prev = 1.0;
    for (std::size_t k = 0; k < 60; ++k) {
        const double pw = std::pow(xi, -static_cast<double>(k));
        const double term = u * pw;
        if (std::abs(term) > prev)
            break;
        prev = std::abs(term);
        const double sign = (k / 2 % 2 == 0) ? 1.0 : -1.0;   // (-1)^{floor(k/2)}
        if (k % 2 == 0) {
            even_u.add(sign * term);
            even_v.add(sign * v_from_u(u, k) * pw);
        } else {
            odd_u.add(sign * term);
            odd_v.add(sign * v_from_u(u, k) * pw);
        }
        u = next_u(u, k);
        if (std::abs(term) < 1e-20)
            break;
    }
    const double ang = xi - 0.25 * M_PI;
    const double c = std::cos(ang), s = std::sin(ang);
    const double root4 = std::pow(z, 0.25);
    const double pref = 1.0 / (std::sqrt(M_PI) * root4);
    const double prefp = root4 / std::sqrt(M_PI);
    return {pref * (c * even_u.value() + s * odd_u.value()),
            prefp * (s * even_v.value() - c * odd_v.value())};
}

AiryPair airy_pair(double x) {
    if (!std::isfinite(x))
        throw InvalidInput("airy: argument must be finite");
    if (x >= kPosSwitch)
        return airy_asymptotic_pos(x);
    if (x <= kNegSwitch)
        return airy_asymptotic_neg(x);
    return airy_series(x);
}

// Crude envelope |Ai(z)| <= 0.6 e^{-(2/3) max(z,0)^{3/2}}, used only to pick
// quadrature truncation points.
double ai_envelope(double z) {
    if (z <= 0.0) return 0.6;
    return 0.6 * std::exp(-(2.0 / 3.0) * z * std::sqrt(z));
}

} // namespace

double airy_ai(double x) { return airy_pair(x).ai; }

double airy_ai_prime(double x) { return airy_pair(x).aip; }

double airy_kernel(double x, double s, double y, double r) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(s) || !std::isfinite(r))
        throw InvalidInput("airy_kernel: arguments must be finite");
    double dt = s - r;
    if (std::abs(dt) < 1e-6)
        dt = 0.0;
    constexpr double kEnvelopeCut = 1e-14;
    constexpr double kQuadTol = 1e-12;
    if (dt >= 0.0) {
        // int_0^inf e^{-u dt} Ai(x+u) Ai(y+u) du
        double upper = 5.0;
        while (std::exp(-upper * dt) * ai_envelope(x + upper) * ai_envelope(y + upper) >
                   kEnvelopeCut &&
               upper < 300.0)
            upper *= 1.4;
        auto f = [&](double u) {
            return std::exp(-u * dt) * airy_ai(x + u) * airy_ai(y + u);
        };
        return adaptive_simpson(f, 0.0, upper, kQuadTol);
    }
    // -int_0^inf e^{u(s-r)} Ai(x-u) Ai(y-u) du, decay only from the exponential
    const double upper = 35.0 / -dt;
    auto f = [&](double u) {
        return std::exp(u * dt) * airy_ai(x - u) * airy_ai(y - u);
    };
    return -adaptive_simpson(f, 0.0, upper, kQuadTol);
}

double airy_kernel_equal_time(double x, double y) {
    if (x == y)
        return airy_ai_prime(x) * airy_ai_prime(x) - x * airy_ai(x) * airy_ai(x);
    return (airy_ai(x) * airy_ai_prime(y) - airy_ai_prime(x) * airy_ai(y)) / (x - y);
}

double det_density_bound(const std::vector<double>& m) {
    const std::size_t k = m.size();
    if (k == 0)
        throw InvalidInput("det_density_bound: need k >= 1 points");
    for (std::size_t i = 1; i < k; ++i)
        if (!(m[i] < m[i - 1]))
            throw InvalidInput("det_density_bound: points must be strictly decreasing");
    Eigen::MatrixXd a(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < k; ++j) {
            const double v = airy_kernel(m[i], 0.0, m[j], 0.0);
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    // Conditioning probe on the row-normalized copy.
    Eigen::MatrixXd scaled = a;
    double factor = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double rmax = scaled.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff();
        if (rmax == 0.0)
            return 0.0;
        scaled.row(static_cast<Eigen::Index>(i)) /= rmax;
        factor *= rmax;
    }
    const double scaled_det = scaled.partialPivLu().determinant();
    if (k >= 2 && std::abs(scaled_det) < 1e-12)
        std::cerr << "det_density_bound: near-singular kernel matrix (scaled det "
                  << scaled_det << ")\n";
    return scaled_det * factor;
}

double one_point_upper_rhs(const std::vector<double>& m, const TailConstants& tc) {
    if (m.empty())
        throw InvalidInput("one_point_upper_rhs: need k >= 1 levels");
    CompensatedSum acc;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] < 0.0 || (i > 0 && m[i] > m[i - 1]))
            throw InvalidInput("one_point_upper_rhs: levels must be nonincreasing and >= 0");
        acc.add(m[i] * std::sqrt(m[i]));
    }
    return tc.c * std::exp(-(4.0 / 3.0) * acc.value());
}

double one_point_upper_rhs_refined(double m, const TailConstants& tc) {
    if (!(m > 0.0))
        throw InvalidInput("tail rhs: need m > 0");
    return std::exp(-(4.0 / 3.0) * m * std::sqrt(m) + tc.c * std::pow(m, 1.25));
}

double one_point_lower_rhs(double m, const TailConstants& tc) {
    if (!(m > 0.0))
        throw InvalidInput("tail rhs: need m > 0");
    return 2.0 * std::exp(-tc.d * m * m * m);
}

double two_point_rhs(double m, const TailConstants& tc) {
    if (!(m > 0.0))
        throw InvalidInput("tail rhs: need m > 0");
    const double coeff = (4.0 * static_cast<double>(tc.k) - 2.0) / 3.0;
    return std::exp(-m * m / (4.0 * tc.t) - coeff * m * std::sqrt(m) +
                    tc.c * std::pow(m, 1.25));
}

} // namespace airylab
