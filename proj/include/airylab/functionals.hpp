#pragma once

#include <cstddef>
#include <vector>

#include "airylab/grid_function.hpp"

namespace airylab {

// Minimal stacking of recentered lines above each other and the zero floor.
// Bottom-up: the lowest line is shifted so its mesh minimum is 0; each line
// above is shifted by the least constant keeping it >= the layer below, so
// every layer touches the one underneath (or the floor) at some node.
// Only f - f(0) matters; the output is ordered top-down and nonnegative.
FunctionTuple tetris(const FunctionTuple& f);

// (2/3) sum_i [Tf_i(start)]^{3/2} + [Tf_i(end)]^{3/2} over the stacked tuple.
double s_functional(const FunctionTuple& f);

// Theta(x) = (2/3)(sum |x_i|)^{3/2} + (4/3) sum_{j=2..k} (sum_{i>=j} |x_i|)^{3/2}.
double theta(const std::vector<double>& x);

struct SphereMaxResult {
    double alpha = 0.0;
    std::vector<double> direction;   // unit vector, nonnegative entries
    std::size_t iterations = 0;
};

// Maximum of Theta over the unit sphere. Theta depends on |x_i| only, so the
// search is restricted to the nonnegative orthant: multi-start projected
// gradient ascent, plus a dense angular grid refinement for k <= 3.
SphereMaxResult alpha_k(std::size_t k, double tolerance);

// Large-deviation rate (1/4) sum_i int |f_i'|^2 via forward differences.
double schilder_rate(const FunctionTuple& f);

// g(a,b,x) = (2/3) sum_i [Y_i^{3/2} + (Y_i + x_i)^{3/2}] with
// Y_i = sum_{j>i} a_j + sum_{j>=i} b_j, on the wedge a,b >= 0, -b_i <= x_i <= a_i.
double opt_g(const std::vector<double>& a, const std::vector<double>& b,
             const std::vector<double>& x);

// max of g over {u : sum (2a_i + 2b_i - |x_i|)^2 <= beta^2}. The maximum is
// attained at points of the form (x, 0, x), reducing to maximizing g(x,0,x)
// over the sphere |x| = beta; that reduced problem is solved here by its own
// simplex search so the identity with beta^{3/2} * alpha_k stays testable.
double max_g_over_dbeta(std::size_t k, double beta);

} // namespace airylab
