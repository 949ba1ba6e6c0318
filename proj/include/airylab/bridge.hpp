#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "airylab/grid_function.hpp"
#include "airylab/mc.hpp"
#include "airylab/rng.hpp"

namespace airylab {

// k independent Brownian bridges with the variance-2 convention
// (quadratic variation 2 per unit time), pinned at both ends.
struct BridgeSpec {
    double s = 0.0;
    double t = 1.0;
    std::vector<double> x;   // start values, one per line
    std::vector<double> y;   // end values
    std::size_t mesh = 256;
};

// Sub-window of the time axis: a union of at most a few intervals, each with
// optional open endpoints. Open endpoints let callers exempt pinned mesh nodes
// (where paths coincide by construction) from strict-ordering checks.
struct WindowPart {
    double lo = 0.0, hi = 1.0;
    bool open_lo = false, open_hi = false;
    bool contains(double s) const {
        const bool above = open_lo ? s > lo : s >= lo;
        const bool below = open_hi ? s < hi : s <= hi;
        return above && below;
    }
};

struct Window {
    std::vector<WindowPart> parts;
    static Window closed(double lo, double hi) { return Window{{WindowPart{lo, hi, false, false}}}; }
    static Window open(double lo, double hi) { return Window{{WindowPart{lo, hi, true, true}}}; }
    bool contains(double s) const {
        for (const auto& p : parts)
            if (p.contains(s)) return true;
        return false;
    }
};

struct NiOptions {
    // Between-node crossing correction (Brownian bridge level-hitting
    // probability per mesh cell), applied as unbiased Bernoulli thinning.
    bool crossing_correction = false;
    std::size_t threads = 1;
};

// Draw k independent variance-2 bridges on the mesh (Gaussian increments plus
// endpoint correction); endpoints are exact.
FunctionTuple sample_bridge_tuple(const BridgeSpec& spec, RngState& rng);

// Strict ordering f_1 > ... > f_k and strict domination of `lower` at every
// mesh node inside J. lower == nullptr means no floor.
bool ni_indicator(const FunctionTuple& f, const GridFunction* lower, const Window& J);

// Monte Carlo nonintersection probability of free bridges; shards across
// substreams when opts.threads > 1 and pools counts (equal-probability shards
// make pooling the inverse-variance merge).
McEstimate acceptance_prob_mc(const BridgeSpec& spec, const GridFunction* lower,
                              const Window& J, std::size_t n, const RngState& rng,
                              const NiOptions& opts = {});

// Exact nonintersection probability of variance-2 bridges from x to y over
// time t via the heat-kernel determinant ratio det p_t(x_i,y_j) / prod p_t(x_i,y_i).
// Entries are mean-centered so the exponentials stay tame.
double km_nonintersect_prob(const std::vector<double>& x, const std::vector<double>& y,
                            double t);

struct ConditionedSample {
    FunctionTuple paths;
    std::size_t tries = 0;
};

// Rejection-sample free bridges until ni_indicator holds.
ConditionedSample sample_conditioned_bridges(const BridgeSpec& spec, const GridFunction* lower,
                                             const Window& J, RngState& rng,
                                             std::size_t max_tries, const NiOptions& opts = {});

struct DominanceReport {
    std::vector<double> probe_times;
    // worst (high CDF - low CDF) in pooled-SE units per probe, maxed over
    // coordinates and levels; positive values exceed dominance by that many SE.
    std::vector<double> violation_se;
    double max_violation_se = 0.0;
    std::size_t draws = 0;
};

// Empirical check of the monotone coupling: the conditioned law with higher
// endpoints/boundary should stochastically dominate coordinate-wise.
DominanceReport dominance_check(const BridgeSpec& low, const BridgeSpec& high,
                                const GridFunction* lower_low, const GridFunction* lower_high,
                                const Window& J, std::size_t n, RngState& rng,
                                std::size_t max_tries = 1u << 22);

// Exact joint density of (sup, -inf, endpoint) of a variance-2 Brownian
// motion on [0, t] at (a, b, x) with a, b >= 0, -b <= x <= a: the full
// two-barrier reflection (image) series, differentiated termwise in a and b.
double reflection_density(double a, double b, double x, double t);

// P(sup <= a, -inf <= b, B(t) in dx)/dx, the two-barrier survivor whose
// mixed a,b-derivative is reflection_density; exposed for cross-checks.
double two_barrier_survivor(double a, double b, double x, double t);

struct PathExtremes {
    double sup = 0.0;
    double neg_inf = 0.0;   // -inf of the path, >= 0
    double end = 0.0;
};

// Sample (sup, -inf, B(t)) of a variance-2 Brownian motion: Gaussian mesh
// skeleton plus exactly-sampled per-cell bridge extremes, so mesh bias is
// limited to cells achieving both running extremes at once.
PathExtremes sample_path_extremes(double t, std::size_t mesh, RngState& rng);

} // namespace airylab
