#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "airylab/airy.hpp"
#include "airylab/ensemble.hpp"
#include "airylab/mc.hpp"
#include "airylab/numerics.hpp"

namespace airylab {

enum class EventFamily { EndpointBox, MidpointBox, IncrementThreshold };

// Borel event measured from patch observables of the top-k lines.
struct EventSpec {
    EventFamily family = EventFamily::EndpointBox;
    std::vector<double> lo;     // per-coordinate bounds (boxes)
    std::vector<double> hi;
    double threshold = 0.0;     // increment events
    double probe = 1.0;         // probe time inside the window
};

struct ExperimentParams {
    std::size_t n = 8;
    std::size_t k = 1;
    double t = 1.0;
    double M = 0.0;             // 0 means the n^{1/3} default
    std::size_t mesh = 256;
    std::size_t budget = 100000;
    std::size_t control_budget = 0;  // free-measure draws; 0 means 4x budget
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    EdgeScaling scaling;
    TailConstants constants;
};

struct DensityRatioRow {
    EventSpec event;
    McEstimate nu;              // surrogate-ensemble probability
    McEstimate mu;              // free Brownian probability
    double log_ratio = 0.0;
    double log_ratio_se = 0.0;
    double s_of_representative = 0.0;   // S at the box-center representative
};

struct DensityRatioReport {
    std::vector<DensityRatioRow> rows;
    LineFit fit;                // log-ratio against -S(representative)
};

// For each event: nu from rescaled watermelon draws, mu from the free
// variance-2 Brownian measure, the log-ratio, and -S at the box-center
// representative function; plus the regression of one against the other.
DensityRatioReport density_ratio_experiment(const std::vector<EventSpec>& events,
                                            const ExperimentParams& p);

// Standard event battery for the density experiment: endpoint boxes at
// heights v = (1.5 s)^{2/3} for s on a grid in [s_lo, s_hi], width delta.
std::vector<EventSpec> endpoint_box_battery(double s_lo, double s_hi, std::size_t count,
                                            double delta);

enum class TailKind { OnePoint, TwoPoint };

struct TailRow {
    double m = 0.0;
    McEstimate surrogate;       // P(statistic >= m) for the ensemble surrogate
    McEstimate control;         // same for the free Brownian control
    double rhs_upper = 0.0;     // closed-form tail bound values at this m
    double rhs_lower = 0.0;
    double margin = 0.0;        // log control - log surrogate
    double margin_se = 0.0;
};

struct TailReport {
    TailKind kind = TailKind::TwoPoint;
    std::vector<TailRow> rows;
    LineFit lower_tail_fit;     // one-point: log-survival against m^3
};

// Survival curves of surrogate statistics against the closed-form tail
// right-hand sides and the free Brownian control. One-point: level of the top
// line at the window start (upper and lower tails). Two-point: decrement of
// line k across the window.
TailReport tail_experiment(TailKind kind, const std::vector<double>& m_grid,
                           const ExperimentParams& p);

struct CounterexampleRow {
    double m = 0.0;
    McEstimate stationary;      // P(recentered stationary top line in A_{m,2})
    McEstimate parabolic;       // parabolic analogue
    McEstimate mu;              // free Brownian probability of A_{m,2}
    double log_ratio_stationary = 0.0;
    double log_ratio_stationary_se = 0.0;
    double log_ratio_parabolic = 0.0;
    double log_ratio_parabolic_se = 0.0;
};

struct CounterexampleReport {
    std::vector<CounterexampleRow> rows;
    LineFit stationary_fit;     // log-ratio against m, weighted by SE
    LineFit parabolic_fit;
};

// A_{m,2} = {f(0)=0, f(1) in [-1,2], inf f >= -1, f(1/2) >= m} probed with the
// recentered stationary and parabolic top-line surrogates against the free
// Brownian measure; reports both log-ratio curves and their fitted slopes.
CounterexampleReport stationary_counterexample_experiment(const std::vector<double>& m_grid,
                                                          const ExperimentParams& p);

} // namespace airylab
