#include "airylab/functionals.hpp"

#include <algorithm>
#include <cmath>

#include "airylab/errors.hpp"
#include "airylab/numerics.hpp"

namespace airylab {

namespace {

double pow32(double v) {
    // endpoint values can carry tiny negative rounding noise
    return v > 0.0 ? v * std::sqrt(v) : 0.0;
}

} // namespace

FunctionTuple tetris(const FunctionTuple& f) {
    require_common_mesh(f);
    const std::size_t k = f.size();
    const std::size_t nodes = f[0].nodes();
    FunctionTuple out(f);

    // Bottom layer: recenter and lift its minimum to the floor.
    {
        GridFunction& g = out[k - 1];
        const double base = f[k - 1][0];
        double shift = 0.0;
        for (std::size_t j = 0; j < nodes; ++j)
            shift = std::max(shift, base - f[k - 1][j]);
        for (std::size_t j = 0; j < nodes; ++j)
            g[j] = f[k - 1][j] - base + shift;
    }
    // Each layer above: least shift staying weakly above the stack below.
    for (std::size_t r = 1; r < k; ++r) {
        const std::size_t i = k - 1 - r;
        const GridFunction& below = out[i + 1];
        GridFunction& g = out[i];
        const double base = f[i][0];
        double shift = 0.0;  // at node 0 the constraint is below[0] - 0 >= 0
        for (std::size_t j = 0; j < nodes; ++j)
            shift = std::max(shift, below[j] - (f[i][j] - base));
        for (std::size_t j = 0; j < nodes; ++j)
            g[j] = f[i][j] - base + shift;
    }
    return out;
}

double s_functional(const FunctionTuple& f) {
    const FunctionTuple stacked = tetris(f);
    CompensatedSum acc;
    for (const GridFunction& g : stacked) {
        acc.add(pow32(g[0]));
        acc.add(pow32(g[g.nodes() - 1]));
    }
    return (2.0 / 3.0) * acc.value();
}

double theta(const std::vector<double>& x) {
    if (x.empty())
        throw InvalidInput("theta: need k >= 1");
    const std::size_t k = x.size();
    // suffix[j] = |x_j| + ... + |x_k| (1-based j)
    double suffix = 0.0;
    CompensatedSum tail;
    for (std::size_t j = k; j >= 2; --j) {
        suffix += std::abs(x[j - 1]);
        tail.add(pow32(suffix));
    }
    const double total = suffix + std::abs(x[0]);
    return (2.0 / 3.0) * pow32(total) + (4.0 / 3.0) * tail.value();
}

namespace {

// Gradient of theta on the open nonnegative orthant.
std::vector<double> theta_gradient(const std::vector<double>& x) {
    const std::size_t k = x.size();
    std::vector<double> suffix(k + 1, 0.0);
    for (std::size_t j = k; j >= 1; --j)
        suffix[j - 1] = suffix[j] + std::max(x[j - 1], 0.0);
    std::vector<double> grad(k);
    for (std::size_t i = 0; i < k; ++i) {
        double g = std::sqrt(std::max(suffix[0], 0.0));
        for (std::size_t j = 1; j <= i; ++j)
            g += 2.0 * std::sqrt(std::max(suffix[j], 0.0));
        grad[i] = g;
    }
    return grad;
}

void project_to_sphere(std::vector<double>& x) {
    double norm2 = 0.0;
    for (double& v : x) {
        v = std::max(v, 0.0);
        norm2 += v * v;
    }
    if (norm2 <= 0.0) {
        x.back() = 1.0;
        return;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : x) v *= inv;
}

// Dense scan over the nonnegative orthant of the sphere, recursive in angles,
// returning the best direction at the given angular resolution.
void grid_scan(std::size_t k, double step, std::vector<double>& point, std::size_t dim,
               double radius, double& best, std::vector<double>& best_point) {
    if (dim + 1 == k) {
        point[dim] = radius;
        const double v = theta(point);
        if (v > best) {
            best = v;
            best_point = point;
        }
        return;
    }
    const double half_pi = 0.5 * M_PI;
    for (double ang = 0.0; ang <= half_pi + 1e-12; ang += step) {
        point[dim] = radius * std::cos(std::min(ang, half_pi));
        grid_scan(k, step, point, dim + 1, radius * std::sin(std::min(ang, half_pi)),
                  best, best_point);
    }
}

} // namespace

SphereMaxResult alpha_k(std::size_t k, double tolerance) {
    if (k == 0 || !(tolerance > 0.0))
        throw InvalidInput("alpha_k: need k >= 1 and positive tolerance");
    SphereMaxResult res;
    res.direction.assign(k, 0.0);
    if (k == 1) {
        // Theta is constant on {+-1}.
        res.direction[0] = 1.0;
        res.alpha = theta(res.direction);
        res.iterations = 1;
        return res;
    }

    const std::size_t starts = 32;
    const std::size_t max_iter = 20000;
    double best = 0.0;
    std::vector<double> best_x;
    std::size_t iterations = 0;
    bool converged_once = false;

    for (std::size_t s = 0; s < starts; ++s) {
        std::vector<double> x(k);
        // Deterministic spread of starts: corners, uniform, and ramps.
        for (std::size_t i = 0; i < k; ++i) {
            const double phase =
                static_cast<double>((s + 1) * (i + 2 * s + 1) % (2 * k + 3)) + 0.5;
            x[i] = phase;
        }
        if (s < k) {
            std::fill(x.begin(), x.end(), 0.0);
            x[s] = 1.0;
        }
        project_to_sphere(x);

        double step = 0.5;
        double fx = theta(x);
        std::size_t it = 0;
        for (; it < max_iter; ++it) {
            const auto grad = theta_gradient(x);
            std::vector<double> cand(k);
            double improved_val = fx;
            bool improved = false;
            while (step > 1e-14) {
                for (std::size_t i = 0; i < k; ++i)
                    cand[i] = x[i] + step * grad[i];
                project_to_sphere(cand);
                const double fc = theta(cand);
                if (fc > fx + 1e-15) {
                    improved_val = fc;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!improved)
                break;
            x = cand;
            fx = improved_val;
            step *= 2.0;
        }
        iterations += it;
        if (it < max_iter)
            converged_once = true;
        if (fx > best) {
            best = fx;
            best_x = x;
        }
    }

    // Dense angular refinement certifies the value for small k.
    if (k <= 3) {
        const double coarse = 1e-3;
        std::vector<double> point(k, 0.0), grid_best_pt(k, 0.0);
        double grid_best = 0.0;
        grid_scan(k, coarse, point, 0, 1.0, grid_best, grid_best_pt);
        if (grid_best > best) {
            best = grid_best;
            best_x = grid_best_pt;
        }
        // Local polish around the winner at the requested tolerance scale.
        const double fine = std::min(coarse, std::max(tolerance, 1e-8));
        std::vector<double> x = best_x;
        for (double h = coarse; h >= fine; h *= 0.25) {
            bool moved = true;
            while (moved) {
                moved = false;
                for (std::size_t i = 0; i < k; ++i) {
                    for (double dir : {1.0, -1.0}) {
                        std::vector<double> cand = x;
                        cand[i] += dir * h;
                        project_to_sphere(cand);
                        const double fc = theta(cand);
                        if (fc > best + 1e-15) {
                            best = fc;
                            x = cand;
                            moved = true;
                        }
                    }
                }
                ++iterations;
            }
        }
        best_x = x;
    }

    if (!converged_once)
        throw ConvergenceFailure("alpha_k: ascent exhausted its iteration budget", best);

    res.alpha = best;
    res.direction = best_x;
    res.iterations = iterations;
    return res;
}

double schilder_rate(const FunctionTuple& f) {
    require_common_mesh(f);
    const double h = f[0].step();
    CompensatedSum acc;
    for (const GridFunction& g : f) {
        for (std::size_t j = 0; j + 1 < g.nodes(); ++j) {
            const double slope = (g[j + 1] - g[j]) / h;
            acc.add(slope * slope * h);
        }
    }
    return 0.25 * acc.value();
}

double opt_g(const std::vector<double>& a, const std::vector<double>& b,
             const std::vector<double>& x) {
    const std::size_t k = a.size();
    if (k == 0 || b.size() != k || x.size() != k)
        throw InvalidInput("opt_g: a, b, x must share length k >= 1");
    for (std::size_t i = 0; i < k; ++i) {
        if (a[i] < 0.0 || b[i] < 0.0 || x[i] < -b[i] || x[i] > a[i])
            throw InvalidInput("opt_g: point outside the admissible wedge");
    }
    // Y_i = sum_{j>i} a_j + sum_{j>=i} b_j, accumulated from the top index down.
    CompensatedSum acc;
    double tail_a = 0.0, tail_b = 0.0;
    for (std::size_t r = k; r >= 1; --r) {
        const std::size_t i = r - 1;
        tail_b += b[i];
        const double y = tail_a + tail_b;
        acc.add(pow32(y));
        acc.add(pow32(y + x[i]));
        tail_a += a[i];
    }
    return (2.0 / 3.0) * acc.value();
}

double max_g_over_dbeta(std::size_t k, double beta) {
    if (k == 0 || !(beta > 0.0))
        throw InvalidInput("max_g_over_dbeta: need k >= 1 and beta > 0");
    // On (x, 0, x) the ball constraint reads sum x_i^2 <= beta^2 and g(x,0,x)
    // grows along rays, so the maximum sits on the sphere |x| = beta. Points on
    // the first-orthant sphere are parametrized by k-1 angles so the simplex
    // search below has no flat direction; this routine deliberately shares no
    // code with the alpha_k ascent.
    auto point_at = [&](const std::vector<double>& angles) {
        std::vector<double> x(k);
        double radial = beta;
        for (std::size_t i = 0; i + 1 < k; ++i) {
            x[i] = radial * std::abs(std::cos(angles[i]));
            radial *= std::abs(std::sin(angles[i]));
        }
        x[k - 1] = radial;
        return x;
    };
    auto value_at = [&](const std::vector<double>& angles) {
        const auto x = point_at(angles);
        const std::vector<double> zero(k, 0.0);
        return opt_g(x, zero, x);
    };
    if (k == 1)
        return value_at({});

    double best = 0.0;
    const std::size_t starts = 2 * k + 2;
    for (std::size_t s = 0; s < starts; ++s) {
        std::vector<double> start(k - 1);
        for (std::size_t i = 0; i + 1 < k; ++i)
            start[i] = 0.5 * M_PI *
                       (static_cast<double>((s + 3 * i + 1) % (starts + 1)) + 0.5) /
                       static_cast<double>(starts + 1);
        auto neg = [&](const std::vector<double>& ang) { return -value_at(ang); };
        const auto opt = nelder_mead(neg, start, 0.3, 6000, 1e-14);
        best = std::max(best, value_at(opt));
    }
    return best;
}

} // namespace airylab
