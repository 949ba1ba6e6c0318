#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace airylab {

// Neumaier compensated summation; robust when terms vary many orders in size.
class CompensatedSum {
public:
    void add(double term) {
        const double t = sum_ + term;
        if (std::abs(sum_) >= std::abs(term))
            comp_ += (sum_ - t) + term;
        else
            comp_ += (term - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Composite Simpson rule with n (even, >= 2) panels.
double simpson(const std::function<double(double)>& f, double a, double b, std::size_t n);

// Adaptive Simpson quadrature with absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol, int max_depth = 30);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;   // from residual variance (unweighted) or weights (weighted)
    double r = 0.0;          // Pearson correlation of (x, y)
};

// Ordinary least squares y = a + b x with residual-based slope standard error.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Weighted least squares with known per-point standard deviations sigma_i;
// slope_se comes from the weight matrix, not residuals.
LineFit fit_line_weighted(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& sigma);

inline double normal_pdf(double x, double variance) {
    return std::exp(-x * x / (2.0 * variance)) / std::sqrt(2.0 * M_PI * variance);
}

// P(N(0,1) > x)
inline double normal_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<double> linspace(double a, double b, std::size_t count);

// Nelder-Mead minimizer; returns best point found after at most max_evals
// objective evaluations. Good enough for the small smooth problems here.
std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> start, double scale,
                                std::size_t max_evals, double ftol);

} // namespace airylab
