#pragma once

#include <cstddef>

#include "airylab/grid_function.hpp"

namespace airylab {

struct EnergyParams {
    double x = 0.0;       // left height, >= 0
    double y = 0.0;       // right height above the parabola endpoint, >= 0
    double lambda = 1.0;  // horizon, > 0
};

// Minimal concave function from (0, x) to (lambda, y - lambda^2) dominating
// -s^2: a tangent line on [0, a], the parabola on [a, b], a tangent line on
// [b, lambda], with a = sqrt(x), b = lambda - sqrt(y).
struct ConcaveMajorant {
    double x = 0.0, y = 0.0, lambda = 1.0;
    double a = 0.0, b = 1.0;
    double left_slope = 0.0;    // -2 sqrt(x)
    double right_slope = 0.0;   // 2 sqrt(y) - 2 lambda

    double operator()(double s) const;
    GridFunction sample(std::size_t mesh) const;
};

// Throws InfeasibleGeometry when sqrt(x) + sqrt(y) > lambda.
ConcaveMajorant concave_majorant(const EnergyParams& p);

// (1/4) int |g'|^2 via forward differences.
double dirichlet_energy(const GridFunction& g);

// E(x,y,lambda) = (2/3) x^{3/2} + (lambda - sqrt(y))^2 sqrt(y)
//                 + (1/3)(lambda - sqrt(y))^3;
// equals the Dirichlet energy of the concave majorant.
double energy_E(const EnergyParams& p);

// J = E - (x - y + lambda^2)^2 / (4 lambda).
double energy_J(const EnergyParams& p);

// Upper concave envelope of the obstacle nodes together with prescribed
// endpoint values, evaluated back on the mesh. Single monotone-chain pass.
GridFunction least_concave_majorant(const GridFunction& obstacle, double left, double right);

struct ObstacleResult {
    GridFunction minimizer;
    double energy = 0.0;
    std::size_t iterations = 0;  // total node updates performed
    bool converged = true;
    double residual = 0.0;       // last max node change
};

// Approximate Dirichlet-energy minimizer above an obstacle with pinned
// endpoints: projected successive over-relaxation, warm-started by coarse-to-
// fine mesh continuation. Independent oracle for energy_E; exhaustion of the
// update budget degrades to a warning (converged=false), not an error.
ObstacleResult min_energy_above_obstacle(const GridFunction& obstacle, double left,
                                         double right, std::size_t max_iterations);

} // namespace airylab
