#include "airylab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "airylab/errors.hpp"
#include "airylab/functionals.hpp"
#include "airylab/rng.hpp"

namespace airylab {

namespace {

struct Resolved {
    double M;
    std::size_t control_budget;
};

Resolved resolve(const ExperimentParams& p) {
    if (p.n < 1 || p.k < 1 || p.k > p.n)
        throw InvalidInput("experiment: need 1 <= k <= n");
    if (!(p.t > 0.0) || p.budget < 1 || p.mesh < 2)
        throw InvalidInput("experiment: need t > 0, budget >= 1, mesh >= 2");
    Resolved r;
    r.M = p.M > 0.0 ? p.M : std::cbrt(static_cast<double>(p.n));
    r.control_budget = p.control_budget > 0 ? p.control_budget : 4 * p.budget;
    const double half_span = 0.5 * p.t * p.scaling.time_scale;
    if (!(half_span < r.M))
        throw InvalidInput("experiment: window exceeds the rescaled domain");
    return r;
}

// Shard a counting experiment: count[event] accumulated per shard with
// substreamed rngs, pooled in shard order so results are thread-count
// invariant.
std::vector<std::size_t> shard_counts(std::size_t budget, std::size_t events,
                                      const ExperimentParams& p,
                                      const std::function<void(RngState&, std::vector<std::size_t>&)>& one_draw) {
    const std::size_t shards = std::min<std::size_t>(budget, 64);
    std::vector<std::vector<std::size_t>> hits(shards, std::vector<std::size_t>(events, 0));
    RngState base(p.seed);
    parallel_shards(shards, std::max<std::size_t>(p.threads, 1), [&](std::size_t s) {
        const std::size_t ns = budget / shards + (s < budget % shards ? 1 : 0);
        RngState local = base.substream(s);
        for (std::size_t i = 0; i < ns; ++i)
            one_draw(local, hits[s]);
    });
    std::vector<std::size_t> total(events, 0);
    for (const auto& shard : hits)
        for (std::size_t e = 0; e < events; ++e)
            total[e] += shard[e];
    return total;
}

double log_ratio_se(const McEstimate& a, const McEstimate& b) {
    return std::sqrt(a.std_error * a.std_error / (a.value * a.value) +
                     b.std_error * b.std_error / (b.value * b.value));
}

// Weighted regression restricted to rows with enough hits on both routes.
LineFit fit_rows(const std::vector<double>& xs, const std::vector<double>& ys,
                 const std::vector<double>& ses, const std::vector<bool>& usable) {
    std::vector<double> x, y, s;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (usable[i]) {
            x.push_back(xs[i]);
            y.push_back(ys[i]);
            s.push_back(ses[i]);
        }
    if (x.size() < 2)
        throw ConvergenceFailure("experiment: fewer than two usable rows for the fit",
                                 static_cast<double>(x.size()));
    return fit_line_weighted(x, y, s);
}

// Box-center representative: per coordinate a piecewise-linear path through
// (0, 0), (probe, center), (t, center), sampled on a common mesh for S.
FunctionTuple representative_tuple(const EventSpec& ev, double t, std::size_t mesh,
                                   std::size_t k) {
    const double probe =
        ev.family == EventFamily::MidpointBox ? ev.probe : t;
    FunctionTuple tuple;
    for (std::size_t i = 0; i < k; ++i) {
        const double target = ev.family == EventFamily::IncrementThreshold
                                  ? ev.threshold
                                  : 0.5 * (ev.lo[i] + ev.hi[i]);
        tuple.push_back(GridFunction::sampled(0.0, t, mesh, [&](double tau) {
            return tau >= probe ? target : target * tau / probe;
        }));
    }
    return tuple;
}

double event_time(const EventSpec& ev, double t) {
    switch (ev.family) {
        case EventFamily::MidpointBox:
            return ev.probe;
        case EventFamily::EndpointBox:
        case EventFamily::IncrementThreshold:
            return t;
    }
    return t;
}

void validate_event(const EventSpec& ev, double t, std::size_t k) {
    if (ev.family == EventFamily::IncrementThreshold) {
        if (!std::isfinite(ev.threshold))
            throw InvalidInput("event: threshold must be finite");
        return;
    }
    if (ev.lo.size() != k || ev.hi.size() != k)
        throw InvalidInput("event: need one bound pair per line");
    for (std::size_t i = 0; i < k; ++i)
        if (!(ev.lo[i] < ev.hi[i]))
            throw InvalidInput("event: bounds must be well-ordered");
    const double probe = event_time(ev, t);
    if (!(probe > 0.0) || probe > t)
        throw InvalidInput("event: probe time must lie inside the window");
}

// Membership from the recentered top-k values at the event's probe slice.
bool event_hit(const EventSpec& ev, const std::vector<double>& recentered, std::size_t k) {
    if (ev.family == EventFamily::IncrementThreshold)
        return recentered[k - 1] >= ev.threshold;
    for (std::size_t i = 0; i < k; ++i)
        if (recentered[i] < ev.lo[i] || recentered[i] > ev.hi[i])
            return false;
    return true;
}

} // namespace

std::vector<EventSpec> endpoint_box_battery(double s_lo, double s_hi, std::size_t count,
                                            double delta) {
    if (!(s_lo > 0.0) || !(s_hi > s_lo) || count < 2 || !(delta > 0.0))
        throw InvalidInput("endpoint_box_battery: need 0 < s_lo < s_hi, count >= 2, delta > 0");
    std::vector<EventSpec> events;
    for (double s : linspace(s_lo, s_hi, count)) {
        const double v = std::pow(1.5 * s, 2.0 / 3.0);
        EventSpec ev;
        ev.family = EventFamily::EndpointBox;
        ev.lo = {v - delta};
        ev.hi = {v + delta};
        events.push_back(ev);
    }
    return events;
}

DensityRatioReport density_ratio_experiment(const std::vector<EventSpec>& events,
                                            const ExperimentParams& p) {
    const Resolved r = resolve(p);
    if (events.empty())
        throw InvalidInput("density_ratio_experiment: need at least one event");
    for (const auto& ev : events)
        validate_event(ev, p.t, p.k);

    // One slice at the recentering base tau = 0 plus one per distinct probe.
    std::vector<double> taus = {0.0};
    for (const auto& ev : events)
        taus.push_back(event_time(ev, p.t));
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    std::vector<std::size_t> slice_of(events.size());
    for (std::size_t e = 0; e < events.size(); ++e)
        slice_of[e] = static_cast<std::size_t>(
            std::lower_bound(taus.begin(), taus.end(), event_time(events[e], p.t)) -
            taus.begin());
    std::vector<double> bridge_times(taus.size());
    for (std::size_t j = 0; j < taus.size(); ++j)
        bridge_times[j] = (taus[j] - 0.5 * p.t) * p.scaling.time_scale;

    std::vector<double> recentered(p.k);
    const std::vector<std::size_t> nu_hits = shard_counts(
        p.budget, events.size(), p, [&](RngState& rng, std::vector<std::size_t>& hits) {
            const auto eigs = sample_watermelon_slices(p.n, r.M, bridge_times, rng);
            const auto resc = edge_rescale_slices(p.n, r.M, eigs, taus, p.t, p.scaling);
            for (std::size_t e = 0; e < events.size(); ++e) {
                std::vector<double> rec(p.k);
                for (std::size_t i = 0; i < p.k; ++i)
                    rec[i] = resc[slice_of[e]][i] - resc[0][i];
                hits[e] += event_hit(events[e], rec, p.k) ? 1 : 0;
            }
        });

    // Free measure: k independent variance-2 motions started at 0; box events
    // read one Gaussian marginal per coordinate.
    ExperimentParams ctrl = p;
    ctrl.seed = p.seed ^ 0x636f6e74726f6cULL;
    const std::vector<std::size_t> mu_hits = shard_counts(
        r.control_budget, events.size(), ctrl, [&](RngState& rng, std::vector<std::size_t>& hits) {
            std::vector<double> z(p.k);
            for (std::size_t i = 0; i < p.k; ++i)
                z[i] = rng.normal();
            for (std::size_t e = 0; e < events.size(); ++e) {
                const double sd = std::sqrt(2.0 * event_time(events[e], p.t));
                std::vector<double> rec(p.k);
                for (std::size_t i = 0; i < p.k; ++i)
                    rec[i] = sd * z[i];
                hits[e] += event_hit(events[e], rec, p.k) ? 1 : 0;
            }
        });

    DensityRatioReport report;
    std::vector<double> xs, ys, ses;
    std::vector<bool> usable;
    for (std::size_t e = 0; e < events.size(); ++e) {
        DensityRatioRow row;
        row.event = events[e];
        row.nu = binomial_estimate(nu_hits[e], p.budget, p.seed);
        row.mu = binomial_estimate(mu_hits[e], r.control_budget, ctrl.seed);
        row.s_of_representative =
            s_functional(representative_tuple(events[e], p.t, p.mesh, p.k));
        const bool ok = nu_hits[e] >= 5 && mu_hits[e] >= 5;
        if (row.nu.value > 0.0 && row.mu.value > 0.0) {
            row.log_ratio = std::log(row.nu.value / row.mu.value);
            row.log_ratio_se = log_ratio_se(row.nu, row.mu);
        } else {
            row.log_ratio = std::numeric_limits<double>::quiet_NaN();
            row.log_ratio_se = std::numeric_limits<double>::quiet_NaN();
        }
        xs.push_back(-row.s_of_representative);
        ys.push_back(row.log_ratio);
        ses.push_back(row.log_ratio_se);
        usable.push_back(ok);
        report.rows.push_back(std::move(row));
    }
    report.fit = fit_rows(xs, ys, ses, usable);
    return report;
}

TailReport tail_experiment(TailKind kind, const std::vector<double>& m_grid,
                           const ExperimentParams& p) {
    const Resolved r = resolve(p);
    if (m_grid.empty())
        throw InvalidInput("tail_experiment: need a nonempty m-grid");
    for (std::size_t i = 0; i < m_grid.size(); ++i)
        if (!(m_grid[i] > 0.0) || (i > 0 && !(m_grid[i] > m_grid[i - 1])))
            throw InvalidInput("tail_experiment: m-grid must be positive and ascending");

    const std::size_t nm = m_grid.size();
    TailConstants tc = p.constants;
    tc.k = p.k;
    tc.t = p.t;

    std::vector<std::size_t> upper_hits, lower_hits, control_hits;
    if (kind == TailKind::TwoPoint) {
        // Statistic: window increment of line k of the parabolic surrogate.
        const std::vector<double> bridge_times = {-0.5 * p.t * p.scaling.time_scale,
                                                  0.5 * p.t * p.scaling.time_scale};
        const std::vector<double> taus = {0.0, p.t};
        upper_hits = shard_counts(
            p.budget, nm, p, [&](RngState& rng, std::vector<std::size_t>& hits) {
                const auto eigs = sample_watermelon_slices(p.n, r.M, bridge_times, rng);
                const auto resc = edge_rescale_slices(p.n, r.M, eigs, taus, p.t, p.scaling);
                const double inc = resc[1][p.k - 1] - resc[0][p.k - 1];
                for (std::size_t i = 0; i < nm; ++i)
                    hits[i] += inc >= m_grid[i] ? 1 : 0;
            });
    } else {
        // Statistic: level of the top line at the window start.
        const std::vector<double> bridge_times = {-0.5 * p.t * p.scaling.time_scale};
        const std::vector<double> taus = {0.0};
        std::vector<std::size_t> both = shard_counts(
            p.budget, 2 * nm, p, [&](RngState& rng, std::vector<std::size_t>& hits) {
                const auto eigs = sample_watermelon_slices(p.n, r.M, bridge_times, rng);
                const auto resc = edge_rescale_slices(p.n, r.M, eigs, taus, p.t, p.scaling);
                const double level = resc[0][0];
                for (std::size_t i = 0; i < nm; ++i) {
                    hits[i] += level >= m_grid[i] ? 1 : 0;
                    hits[nm + i] += level <= -m_grid[i] ? 1 : 0;
                }
            });
        upper_hits.assign(both.begin(), both.begin() + static_cast<std::ptrdiff_t>(nm));
        lower_hits.assign(both.begin() + static_cast<std::ptrdiff_t>(nm), both.end());
    }

    // Control: the same threshold battery against a free variance-2 motion's
    // window increment.
    ExperimentParams ctrl = p;
    ctrl.seed = p.seed ^ 0x636f6e74726f6cULL;
    control_hits = shard_counts(
        r.control_budget, nm, ctrl, [&](RngState& rng, std::vector<std::size_t>& hits) {
            const double inc = std::sqrt(2.0 * p.t) * rng.normal();
            for (std::size_t i = 0; i < nm; ++i)
                hits[i] += inc >= m_grid[i] ? 1 : 0;
        });

    TailReport report;
    report.kind = kind;
    for (std::size_t i = 0; i < nm; ++i) {
        TailRow row;
        row.m = m_grid[i];
        row.surrogate = binomial_estimate(upper_hits[i], p.budget, p.seed);
        row.control = binomial_estimate(control_hits[i], r.control_budget, ctrl.seed);
        if (kind == TailKind::TwoPoint) {
            row.rhs_upper = two_point_rhs(row.m, tc);
            row.rhs_lower = 0.0;
        } else {
            row.rhs_upper = one_point_upper_rhs_refined(row.m, tc);
            row.rhs_lower = one_point_lower_rhs(row.m, tc);
        }
        if (row.surrogate.value > 0.0 && row.control.value > 0.0) {
            row.margin = std::log(row.control.value) - std::log(row.surrogate.value);
            row.margin_se = log_ratio_se(row.surrogate, row.control);
        } else {
            row.margin = std::numeric_limits<double>::quiet_NaN();
            row.margin_se = std::numeric_limits<double>::quiet_NaN();
        }
        report.rows.push_back(row);
    }

    if (kind == TailKind::OnePoint) {
        // Lower tail against m^3: log P(level <= -m) should fall off cubically.
        std::vector<double> xs, ys, ses;
        std::vector<bool> usable;
        for (std::size_t i = 0; i < nm; ++i) {
            const McEstimate est = binomial_estimate(lower_hits[i], p.budget, p.seed);
            xs.push_back(m_grid[i] * m_grid[i] * m_grid[i]);
            ys.push_back(est.value > 0.0 ? std::log(est.value)
                                         : std::numeric_limits<double>::quiet_NaN());
            ses.push_back(est.value > 0.0 ? est.std_error / est.value : 1.0);
            usable.push_back(lower_hits[i] >= 5);
        }
        report.lower_tail_fit = fit_rows(xs, ys, ses, usable);
    }
    return report;
}

CounterexampleReport stationary_counterexample_experiment(const std::vector<double>& m_grid,
                                                          const ExperimentParams& p) {
    const Resolved r = resolve(p);
    if (m_grid.empty())
        throw InvalidInput("stationary_counterexample_experiment: need a nonempty m-grid");
    const std::size_t nm = m_grid.size();
    const std::size_t mesh = p.mesh;
    const std::size_t mid = mesh / 2;

    std::vector<double> taus(mesh + 1);
    std::vector<double> bridge_times(mesh + 1);
    for (std::size_t j = 0; j <= mesh; ++j) {
        taus[j] = p.t * static_cast<double>(j) / static_cast<double>(mesh);
        bridge_times[j] = (taus[j] - 0.5 * p.t) * p.scaling.time_scale;
    }

    // Membership in A_{m,2} = {f(0)=0, f(end) in [-1,2], inf >= -1, f(mid) >= m}
    // for a recentered path given nodewise.
    auto count_hits = [&](const std::vector<double>& path, std::vector<std::size_t>& hits,
                          std::size_t offset) {
        if (path[mesh] < -1.0 || path[mesh] > 2.0)
            return;
        double min_v = 0.0;
        for (double v : path)
            min_v = std::min(min_v, v);
        if (min_v < -1.0)
            return;
        for (std::size_t i = 0; i < nm; ++i)
            if (path[mid] >= m_grid[i])
                ++hits[offset + i];
    };

    // Surrogate pass: one path draw scores both the stationary and parabolic
    // recentered versions.
    std::vector<std::size_t> both = shard_counts(
        p.budget, 2 * nm, p, [&](RngState& rng, std::vector<std::size_t>& hits) {
            const auto eigs = sample_watermelon_slices(p.n, r.M, bridge_times, rng);
            const auto resc = edge_rescale_slices(p.n, r.M, eigs, taus, p.t, p.scaling);
            std::vector<double> stationary(mesh + 1), parabolic(mesh + 1);
            for (std::size_t j = 0; j <= mesh; ++j) {
                parabolic[j] = resc[j][0] - resc[0][0];
                stationary[j] = parabolic[j] + taus[j] * taus[j];
            }
            count_hits(stationary, hits, 0);
            count_hits(parabolic, hits, nm);
        });

    // Free variance-2 Brownian motion on the same mesh.
    ExperimentParams ctrl = p;
    ctrl.seed = p.seed ^ 0x636f6e74726f6cULL;
    const double step_sd = std::sqrt(2.0 * p.t / static_cast<double>(mesh));
    std::vector<std::size_t> mu_hits = shard_counts(
        r.control_budget, nm, ctrl, [&](RngState& rng, std::vector<std::size_t>& hits) {
            std::vector<double> path(mesh + 1, 0.0);
            for (std::size_t j = 1; j <= mesh; ++j)
                path[j] = path[j - 1] + step_sd * rng.normal();
            count_hits(path, hits, 0);
        });

    CounterexampleReport report;
    std::vector<double> xs, ys_s, se_s, ys_p, se_p;
    std::vector<bool> ok_s, ok_p;
    for (std::size_t i = 0; i < nm; ++i) {
        CounterexampleRow row;
        row.m = m_grid[i];
        row.stationary = binomial_estimate(both[i], p.budget, p.seed);
        row.parabolic = binomial_estimate(both[nm + i], p.budget, p.seed);
        row.mu = binomial_estimate(mu_hits[i], r.control_budget, ctrl.seed);
        const bool mu_ok = mu_hits[i] >= 5;
        if (row.stationary.value > 0.0 && row.mu.value > 0.0) {
            row.log_ratio_stationary = std::log(row.stationary.value / row.mu.value);
            row.log_ratio_stationary_se = log_ratio_se(row.stationary, row.mu);
        } else {
            row.log_ratio_stationary = std::numeric_limits<double>::quiet_NaN();
            row.log_ratio_stationary_se = std::numeric_limits<double>::quiet_NaN();
        }
        if (row.parabolic.value > 0.0 && row.mu.value > 0.0) {
            row.log_ratio_parabolic = std::log(row.parabolic.value / row.mu.value);
            row.log_ratio_parabolic_se = log_ratio_se(row.parabolic, row.mu);
        } else {
            row.log_ratio_parabolic = std::numeric_limits<double>::quiet_NaN();
            row.log_ratio_parabolic_se = std::numeric_limits<double>::quiet_NaN();
        }
        xs.push_back(row.m);
        ys_s.push_back(row.log_ratio_stationary);
        se_s.push_back(row.log_ratio_stationary_se);
        ok_s.push_back(both[i] >= 5 && mu_ok);
        ys_p.push_back(row.log_ratio_parabolic);
        se_p.push_back(row.log_ratio_parabolic_se);
        ok_p.push_back(both[nm + i] >= 5 && mu_ok);
        report.rows.push_back(std::move(row));
    }
    report.stationary_fit = fit_rows(xs, ys_s, se_s, ok_s);
    report.parabolic_fit = fit_rows(xs, ys_p, se_p, ok_p);
    return report;
}

} // namespace airylab
