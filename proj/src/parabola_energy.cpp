#include "airylab/parabola_energy.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "airylab/errors.hpp"
#include "airylab/numerics.hpp"

namespace airylab {

namespace {

void validate_params(const EnergyParams& p) {
    if (p.x < 0.0 || p.y < 0.0 || !(p.lambda > 0.0))
        throw InvalidInput("energy params: need x, y >= 0 and lambda > 0");
    if (std::sqrt(p.x) + std::sqrt(p.y) > p.lambda)
        throw InfeasibleGeometry("energy params: sqrt(x) + sqrt(y) exceeds lambda");
}

} // namespace

double ConcaveMajorant::operator()(double s) const {
    if (s <= a)
        return x + left_slope * s;
    if (s >= b)
        return (y - lambda * lambda) + right_slope * (s - lambda);
    return -s * s;
}

GridFunction ConcaveMajorant::sample(std::size_t mesh) const {
    return GridFunction::sampled(0.0, lambda, mesh, [this](double s) { return (*this)(s); });
}

ConcaveMajorant concave_majorant(const EnergyParams& p) {
    validate_params(p);
    const double sx = std::sqrt(p.x), sy = std::sqrt(p.y);
    ConcaveMajorant m;
    m.x = p.x;
    m.y = p.y;
    m.lambda = p.lambda;
    m.a = sx;
    m.b = p.lambda - sy;
    m.left_slope = -2.0 * sx;
    m.right_slope = 2.0 * sy - 2.0 * p.lambda;
    return m;
}

double dirichlet_energy(const GridFunction& g) {
    const double h = g.step();
    CompensatedSum acc;
    for (std::size_t j = 0; j + 1 < g.nodes(); ++j) {
        const double slope = (g[j + 1] - g[j]) / h;
        acc.add(slope * slope * h);
    }
    return 0.25 * acc.value();
}

double energy_E(const EnergyParams& p) {
    validate_params(p);
    const double sy = std::sqrt(p.y);
    const double w = p.lambda - sy;
    return (2.0 / 3.0) * p.x * std::sqrt(p.x) + w * w * sy + w * w * w / 3.0;
}

double energy_J(const EnergyParams& p) {
    const double d = p.x - p.y + p.lambda * p.lambda;
    return energy_E(p) - d * d / (4.0 * p.lambda);
}

GridFunction least_concave_majorant(const GridFunction& obstacle, double left, double right) {
    const std::size_t nodes = obstacle.nodes();
    std::vector<double> h(obstacle.values());
    h.front() = std::max(h.front(), left);
    h.back() = std::max(h.back(), right);

    // Upper hull by monotone chain over the x-sorted nodes: keep the slope
    // sequence nonincreasing.
    const double step = obstacle.step();
    std::vector<std::size_t> hull;
    hull.reserve(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
        while (hull.size() >= 2) {
            const std::size_t p1 = hull[hull.size() - 2], p2 = hull[hull.size() - 1];
            // p2 is below the chord p1 -> j  <=>  cross product <= 0
            const double dx1 = static_cast<double>(p2 - p1) * step;
            const double dy1 = h[p2] - h[p1];
            const double dx2 = static_cast<double>(j - p1) * step;
            const double dy2 = h[j] - h[p1];
            if (dy1 * dx2 - dy2 * dx1 <= 0.0)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(j);
    }

    std::vector<double> out(nodes);
    for (std::size_t seg = 0; seg + 1 < hull.size(); ++seg) {
        const std::size_t j0 = hull[seg], j1 = hull[seg + 1];
        for (std::size_t j = j0; j <= j1; ++j) {
            const double w = static_cast<double>(j - j0) / static_cast<double>(j1 - j0);
            out[j] = h[j0] * (1.0 - w) + h[j1] * w;
        }
    }
    if (hull.size() == 1)
        out = h;
    return GridFunction(obstacle.start(), obstacle.end(), std::move(out));
}

ObstacleResult min_energy_above_obstacle(const GridFunction& obstacle, double left,
                                         double right, std::size_t max_iterations) {
    // Scale-aware stopping threshold for the node updates.
    const double scale =
        std::max({std::abs(left), std::abs(right), std::abs(obstacle.min_value()),
                  std::abs(obstacle.max_value()), 1.0});
    const double omega = 1.85;   // projected SOR relaxation factor
    std::size_t iterations = 0;
    double residual = 0.0;

    // Coarse-to-fine continuation: solve on a ~127-node mesh, then repeatedly
    // double toward the target, prolonging linearly. Each level starts close
    // to its minimizer, so the diffusive SOR sweeps stay cheap.
    const std::size_t target_mesh = obstacle.mesh();
    std::vector<std::size_t> levels{target_mesh};
    while (levels.back() > 127 && levels.back() % 2 == 0)
        levels.push_back(levels.back() / 2);
    std::reverse(levels.begin(), levels.end());

    GridFunction current = GridFunction::sampled(
        obstacle.start(), obstacle.end(), levels.front(), [&](double s) {
            // chord between the endpoints, clamped above the obstacle
            const double w = (s - obstacle.start()) / (obstacle.end() - obstacle.start());
            return std::max(left * (1.0 - w) + right * w, obstacle(s));
        });
    current[0] = left;
    current[current.nodes() - 1] = right;

    bool converged = true;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const std::size_t mesh = levels[li];
        GridFunction obs = mesh == target_mesh
                               ? obstacle
                               : GridFunction::sampled(obstacle.start(), obstacle.end(), mesh,
                                                       [&](double s) { return obstacle(s); });
        if (li > 0) {
            GridFunction fine = GridFunction::sampled(
                obstacle.start(), obstacle.end(), mesh,
                [&](double s) { return std::max(current(s), obs(s)); });
            fine[0] = left;
            fine[fine.nodes() - 1] = right;
            current = std::move(fine);
        }
        // Warm starts leave mostly high-frequency error, which SOR damps in a
        // few sweeps; intermediate levels stop early, the target level gets
        // the remaining update budget and the tighter threshold.
        const bool final_level = mesh == target_mesh;
        const double tol = (final_level ? 1e-11 : 1e-9) * scale;
        const std::size_t done = std::min(iterations, max_iterations);
        const std::size_t sweep_cap =
            final_level ? std::max<std::size_t>(1, (max_iterations - done) / mesh) : 40000;
        converged = false;
        for (std::size_t sweep = 0; sweep < sweep_cap; ++sweep) {
            double max_change = 0.0;
            for (std::size_t j = 1; j + 1 < current.nodes(); ++j) {
                const double harmonic = 0.5 * (current[j - 1] + current[j + 1]);
                const double relaxed = current[j] + omega * (harmonic - current[j]);
                const double next = std::max(relaxed, obs[j]);
                max_change = std::max(max_change, std::abs(next - current[j]));
                current[j] = next;
            }
            iterations += current.nodes() - 2;
            residual = max_change;
            if (max_change <= tol) {
                converged = true;
                break;
            }
            if (iterations >= max_iterations)
                break;
        }
        if (iterations >= max_iterations && !converged)
            break;
    }

    ObstacleResult res;
    res.energy = dirichlet_energy(current);
    res.minimizer = std::move(current);
    res.iterations = iterations;
    res.converged = converged;
    res.residual = residual;
    return res;
}

} // namespace airylab
