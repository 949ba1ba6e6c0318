#pragma once

#include <cstddef>
#include <vector>

#include "airylab/bridge.hpp"
#include "airylab/grid_function.hpp"
#include "airylab/mc.hpp"
#include "airylab/rng.hpp"

namespace airylab {

// Edge rescaling constants. With the defaults the centering curve
// 2 sqrt(n (M^2 - s^2) / M) at M = n^{1/3} expands to 2 n^{2/3} - s^2 + O(s^4),
// so subtracting it yields an order-one surrogate of the top lines with the
// unit parabola built in. The constants stay configurable because no finite-n
// choice is canonical; self-calibration against the Tracy-Widom proxy is an
// experiment, not a baked-in truth.
struct EdgeScaling {
    double time_scale = 1.0;    // window time unit, in bridge time
    double space_scale = 1.0;   // fluctuation unit
};

// n ordered nonintersecting bridge paths on [-M, M] (eigenvalue paths of a
// Hermitian-matrix bridge), all pinned to 0 at both ends.
struct Watermelon {
    std::size_t n = 1;
    double M = 1.0;
    FunctionTuple paths;        // paths[0] is the top line
    EdgeScaling scaling;        // constants used by the last edge_rescale
};

// Entry scaling makes each eigenvalue path a variance-2 bridge: diagonal
// increments have variance 2 dt, off-diagonal real/imaginary parts dt each.
Watermelon sample_watermelon(std::size_t n, double M, std::size_t mesh, RngState& rng);

// Eigenvalues at selected times only (ascending times in [-M, M]), evolved by
// the Gaussian bridge transition slice-to-slice; O(slices) eigensolves per
// draw instead of O(mesh). Returns one descending eigenvalue vector per time.
std::vector<std::vector<double>> sample_watermelon_slices(std::size_t n, double M,
                                                          const std::vector<double>& times,
                                                          RngState& rng);

// Top-k paths of the parabolic surrogate on the window [0, t] in rescaled
// coordinates. Window time tau maps to bridge time s = (tau - t/2)*time_scale
// (window centered on the bridge midpoint, where the centering curve is
// flattest); the value is
//   (path_i(s) - 2 sqrt(n (M^2 - s^2)/M)) / space_scale - tau^2,
// the stationary surrogate minus the parabola with vertex at the window start.
FunctionTuple edge_rescale(Watermelon& w, std::size_t k, double t,
                           const EdgeScaling& scaling = {});

// Same rescaling applied to raw slice eigenvalues at window times taus.
std::vector<std::vector<double>> edge_rescale_slices(std::size_t n, double M,
                                                     const std::vector<std::vector<double>>& eigs,
                                                     const std::vector<double>& taus, double t,
                                                     const EdgeScaling& scaling = {});

// Replace the top-k paths on [a, b] (snapped to mesh nodes) by fresh
// variance-2 bridges between the retained endpoint values, rejection-
// conditioned on nonintersection above path k+1; the ensemble law is
// invariant under this kernel.
Watermelon gibbs_resample(const Watermelon& w, std::size_t k, double a, double b,
                          RngState& rng, std::size_t max_tries);

struct WeightedSample {
    FunctionTuple lines;        // top-k on the rescaled window, patch replaced by free bridges
    GridFunction lower;         // line k+1 on the window (boundary data)
    std::size_t patch_lo = 0;   // node range [patch_lo, patch_hi] of the patch
    std::size_t patch_hi = 0;
    double weight = 1.0;        // 1 / P-hat, >= 1
    McEstimate p_hat;           // acceptance estimate the weight came from
    bool censored = false;      // P-hat floored at 1/(p_samples+1)
};

// Patch-freed ensemble draw: rescale the top k+1 lines, replace the top-k on
// the patch [0, patch_t] by free bridges between retained endpoints, and
// attach importance weight 1 / P-hat where P-hat is the Monte Carlo
// nonintersection probability of that endpoint/boundary data.
WeightedSample build_L_patch(Watermelon& w, std::size_t k, double window_t, double patch_t,
                             RngState& rng, std::size_t p_samples);

struct InverseAcceptanceReport {
    McEstimate estimate;        // E[1/P]
    double max_weight_share = 0.0;
    double ess = 0.0;
    std::size_t censored = 0;
    bool reliability_warning = false;   // censored fraction above 1%
};

// E[1/P] over fresh ensemble draws at (n, k, window t), with weight-tail
// diagnostics; finite and stable growth of ESS in the budget is the desk-scale
// finiteness check.
InverseAcceptanceReport inverse_acceptance_expectation(std::size_t n, std::size_t k, double t,
                                                       std::size_t samples, RngState& rng,
                                                       std::size_t p_samples = 512,
                                                       std::size_t mesh = 256,
                                                       std::size_t threads = 1);

} // namespace airylab
