#include "airylab/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "airylab/errors.hpp"

namespace airylab {

double simpson(const std::function<double(double)>& f, double a, double b, std::size_t n) {
    if (n < 2 || n % 2 != 0)
        throw InvalidInput("simpson: panel count must be even and >= 2");
    const double h = (b - a) / static_cast<double>(n);
    CompensatedSum acc;
    acc.add(f(a));
    acc.add(f(b));
    for (std::size_t j = 1; j < n; ++j)
        acc.add(f(a + h * static_cast<double>(j)) * (j % 2 ? 4.0 : 2.0));
    return acc.value() * h / 3.0;
}

namespace {

double adaptive_step(const std::function<double(double)>& f, double a, double b, double fa,
                     double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double h = b - a;
    const double left = h / 12.0 * (fa + 4.0 * flm + fm);
    const double right = h / 12.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol, int max_depth) {
    if (!(b > a)) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw InvalidInput("fit_line: need matching x, y with >= 2 points");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) { sx += x[i]; sy += y[i]; }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0)
        throw InvalidInput("fit_line: degenerate x values");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - fit.intercept - fit.slope * x[i];
        rss += e * e;
    }
    fit.slope_se = x.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
    fit.r = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
    return fit;
}

LineFit fit_line_weighted(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& sigma) {
    if (x.size() != y.size() || x.size() != sigma.size() || x.size() < 2)
        throw InvalidInput("fit_line_weighted: need matching x, y, sigma with >= 2 points");
    double sw = 0, swx = 0, swy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(sigma[i] > 0.0))
            throw InvalidInput("fit_line_weighted: sigmas must be positive");
        const double w = 1.0 / (sigma[i] * sigma[i]);
        sw += w; swx += w * x[i]; swy += w * y[i];
    }
    const double mx = swx / sw, my = swy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = 1.0 / (sigma[i] * sigma[i]);
        sxx += w * (x[i] - mx) * (x[i] - mx);
        sxy += w * (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0)
        throw InvalidInput("fit_line_weighted: degenerate x values");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.slope_se = std::sqrt(1.0 / sxx);
    // correlation reported on the unweighted pairs for comparability
    fit.r = fit_line(x, y).r;
    return fit;
}

std::vector<double> linspace(double a, double b, std::size_t count) {
    if (count < 2)
        return {a};
    std::vector<double> v(count);
    const double h = (b - a) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i)
        v[i] = a + h * static_cast<double>(i);
    v.back() = b;
    return v;
}

std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> start, double scale,
                                std::size_t max_evals, double ftol) {
    const std::size_t d = start.size();
    if (d == 0)
        return start;
    std::vector<std::vector<double>> pts(d + 1, start);
    for (std::size_t i = 0; i < d; ++i)
        pts[i + 1][i] += scale;
    std::vector<double> vals(d + 1);
    std::size_t evals = 0;
    for (std::size_t i = 0; i <= d; ++i) { vals[i] = f(pts[i]); ++evals; }

    auto order = [&] {
        std::vector<std::size_t> idx(d + 1);
        for (std::size_t i = 0; i <= d; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        std::vector<std::vector<double>> np(d + 1);
        std::vector<double> nv(d + 1);
        for (std::size_t i = 0; i <= d; ++i) { np[i] = pts[idx[i]]; nv[i] = vals[idx[i]]; }
        pts = std::move(np);
        vals = std::move(nv);
    };

    while (evals < max_evals) {
        order();
        if (std::abs(vals[d] - vals[0]) <= ftol * (std::abs(vals[0]) + ftol))
            break;
        std::vector<double> centroid(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                centroid[j] += pts[i][j] / static_cast<double>(d);
        auto blend = [&](double coef) {
            std::vector<double> p(d);
            for (std::size_t j = 0; j < d; ++j)
                p[j] = centroid[j] + coef * (pts[d][j] - centroid[j]);
            return p;
        };
        auto refl = blend(-1.0);
        double frefl = f(refl); ++evals;
        if (frefl < vals[0]) {
            auto exp_p = blend(-2.0);
            double fexp = f(exp_p); ++evals;
            if (fexp < frefl) { pts[d] = exp_p; vals[d] = fexp; }
            else { pts[d] = refl; vals[d] = frefl; }
        } else if (frefl < vals[d - 1]) {
            pts[d] = refl; vals[d] = frefl;
        } else {
            auto contr = blend(frefl < vals[d] ? -0.5 : 0.5);
            double fcontr = f(contr); ++evals;
            if (fcontr < std::min(frefl, vals[d])) {
                pts[d] = contr; vals[d] = fcontr;
            } else {
                for (std::size_t i = 1; i <= d; ++i) {
                    for (std::size_t j = 0; j < d; ++j)
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    vals[i] = f(pts[i]); ++evals;
                }
            }
        }
    }
    order();
    return pts[0];
}

} // namespace airylab
