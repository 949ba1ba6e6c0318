#include "airylab/bridge.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>

#include "airylab/errors.hpp"
#include "airylab/numerics.hpp"

namespace airylab {

namespace {

// Variance-2 convention: quadratic variation per unit time. Everything in this
// module derives its scales from this one constant.
constexpr double kVarRate = 2.0;

void validate_spec(const BridgeSpec& spec) {
    if (!(spec.t > spec.s))
        throw InvalidInput("bridge: need t > s");
    if (spec.x.empty() || spec.x.size() != spec.y.size())
        throw InvalidInput("bridge: endpoint vectors must be nonempty and equal-length");
    if (spec.mesh < 1)
        throw InvalidInput("bridge: mesh must be >= 1");
    for (double v : spec.x)
        if (!std::isfinite(v)) throw InvalidInput("bridge: endpoints must be finite");
    for (double v : spec.y)
        if (!std::isfinite(v)) throw InvalidInput("bridge: endpoints must be finite");
}

// Probability that two nodewise-ordered paths cross between nodes, or that a
// path dips under a linearized floor: Brownian bridge level-hitting,
// exp(-2 d0 d1 / (sigma^2 h)) with sigma^2 the variance rate of the gap.
double cell_cross_prob(double d0, double d1, double gap_var_rate, double h) {
    if (d0 <= 0.0 || d1 <= 0.0)
        return 1.0;
    return std::exp(-2.0 * d0 * d1 / (gap_var_rate * h));
}

// Survival factor of the between-node crossing correction for a tuple that
// already passed the nodewise check. Counts cells whose closure lies in J.
double crossing_survival(const FunctionTuple& f, const GridFunction* lower, const Window& J) {
    const std::size_t m = f[0].mesh();
    const double h = f[0].step();
    double surv = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double u0 = f[0].node(j), u1 = f[0].node(j + 1);
        if (!J.contains(u0) || !J.contains(u1))
            continue;
        for (std::size_t i = 0; i + 1 < f.size(); ++i)
            surv *= 1.0 - cell_cross_prob(f[i][j] - f[i + 1][j], f[i][j + 1] - f[i + 1][j + 1],
                                          2.0 * kVarRate, h);
        if (lower != nullptr) {
            const std::size_t last = f.size() - 1;
            surv *= 1.0 - cell_cross_prob(f[last][j] - (*lower)(u0), f[last][j + 1] - (*lower)(u1),
                                          kVarRate, h);
        }
    }
    return surv;
}

// One NI trial: nodewise check, then optional crossing-correction thinning.
bool ni_trial(const BridgeSpec& spec, const GridFunction* lower, const Window& J,
              RngState& rng, const NiOptions& opts) {
    const FunctionTuple f = sample_bridge_tuple(spec, rng);
    if (!ni_indicator(f, lower, J))
        return false;
    if (!opts.crossing_correction)
        return true;
    return rng.uniform() < crossing_survival(f, lower, J);
}

double phi_gauss(double z, double t) {
    return std::exp(-z * z / (2.0 * kVarRate * t)) / std::sqrt(2.0 * M_PI * kVarRate * t);
}

double phi_gauss_dd(double z, double t) {
    const double v = kVarRate * t;
    return phi_gauss(z, t) * (z * z - v) / (v * v);
}

// Survivor P(S <= a, -inf(B) <= b, B(t) in dx)/dx via the two-sided image
// series; accurate when L^2 = (a+b)^2 is not small against t.
double survivor_images(double a, double b, double x, double t) {
    const double l = a + b;
    CompensatedSum acc;
    acc.add(phi_gauss(x, t) - phi_gauss(2.0 * a - x, t));
    for (int n = 1; n <= 200; ++n) {
        const double shift = 2.0 * n * l;
        const double term = phi_gauss(x + shift, t) + phi_gauss(x - shift, t) -
                            phi_gauss(2.0 * a - x + shift, t) - phi_gauss(2.0 * a - x - shift, t);
        acc.add(term);
        if (std::abs(term) < 1e-20 * (1.0 + std::abs(acc.value())) && n >= 3)
            break;
    }
    return acc.value();
}

// Same survivor in the Dirichlet eigenbasis of [-b, a]; converges fast
// exactly where the image series cancels badly (L^2 small against t).
double survivor_eigen(double a, double b, double x, double t) {
    const double l = a + b;
    if (l <= 0.0)
        return 0.0;
    CompensatedSum acc;
    const double diffusion_half = kVarRate / 2.0;   // e^{-(j pi / L)^2 t} rate
    for (int j = 1; j <= 200; ++j) {
        const double k = j * M_PI / l;
        const double factor = std::exp(-k * k * diffusion_half * t);
        acc.add((2.0 / l) * factor * std::sin(k * b) * std::sin(k * (x + b)));
        if (factor < 1e-40)
            break;
    }
    return acc.value();
}

double survivor_any(double a, double b, double x, double t) {
    if (a < 0.0 || b < 0.0)
        return 0.0;
    if (x > a || x < -b)
        return 0.0;
    const double l = a + b;
    if (l * l >= 0.45 * t)
        return survivor_images(a, b, x, t);
    return survivor_eigen(a, b, x, t);
}

} // namespace

FunctionTuple sample_bridge_tuple(const BridgeSpec& spec, RngState& rng) {
    validate_spec(spec);
    const std::size_t m = spec.mesh;
    const double h = (spec.t - spec.s) / static_cast<double>(m);
    const double sd = std::sqrt(kVarRate * h);
    FunctionTuple out;
    out.reserve(spec.x.size());
    std::vector<double> w(m + 1, 0.0);
    for (std::size_t i = 0; i < spec.x.size(); ++i) {
        for (std::size_t j = 1; j <= m; ++j)
            w[j] = w[j - 1] + sd * rng.normal();
        std::vector<double> vals(m + 1);
        const double drift = spec.y[i] - spec.x[i] - w[m];
        for (std::size_t j = 0; j <= m; ++j)
            vals[j] = spec.x[i] + w[j] +
                      drift * static_cast<double>(j) / static_cast<double>(m);
        vals[0] = spec.x[i];
        vals[m] = spec.y[i];
        out.emplace_back(spec.s, spec.t, std::move(vals));
    }
    return out;
}

bool ni_indicator(const FunctionTuple& f, const GridFunction* lower, const Window& J) {
    require_common_mesh(f);
    const std::size_t m = f[0].mesh();
    for (std::size_t j = 0; j <= m; ++j) {
        const double u = f[0].node(j);
        if (!J.contains(u))
            continue;
        for (std::size_t i = 0; i + 1 < f.size(); ++i)
            if (!(f[i][j] > f[i + 1][j]))
                return false;
        if (lower != nullptr && !(f[f.size() - 1][j] > (*lower)(u)))
            return false;
    }
    return true;
}

McEstimate acceptance_prob_mc(const BridgeSpec& spec, const GridFunction* lower,
                              const Window& J, std::size_t n, const RngState& rng,
                              const NiOptions& opts) {
    validate_spec(spec);
    if (n < 1)
        throw InvalidInput("acceptance_prob_mc: need n >= 1");
    // Fixed shard count keeps the estimate identical across thread counts.
    const std::size_t shards = std::min<std::size_t>(n, 64);
    std::vector<std::size_t> hits(shards, 0), draws(shards, 0);
    parallel_shards(shards, std::max<std::size_t>(opts.threads, 1), [&](std::size_t s) {
        std::size_t ns = n / shards + (s < n % shards ? 1 : 0);
        RngState local = rng.substream(s);
        std::size_t hit = 0;
        for (std::size_t i = 0; i < ns; ++i)
            hit += ni_trial(spec, lower, J, local, opts) ? 1 : 0;
        hits[s] = hit;
        draws[s] = ns;
    });
    return merge_binomial(hits, draws, rng.seed());
}

double km_nonintersect_prob(const std::vector<double>& x, const std::vector<double>& y,
                            double t) {
    const std::size_t k = x.size();
    if (k == 0 || y.size() != k)
        throw InvalidInput("km_nonintersect_prob: endpoint vectors must be nonempty and equal-length");
    if (!(t > 0.0))
        throw InvalidInput("km_nonintersect_prob: need t > 0");
    for (std::size_t i = 1; i < k; ++i)
        if (!(x[i] < x[i - 1]) || !(y[i] < y[i - 1]))
            throw InvalidInput("km_nonintersect_prob: endpoints must be strictly decreasing");
    // det p_t(x_i,y_j) / prod p_t(x_i,y_i) reduces to det(M)/prod(M_ii) with
    // M_ij = exp(x_i y_j / (2t)); mean-centering both vectors multiplies M by
    // rank-one row/column factors that cancel exactly in the ratio.
    double xbar = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        xbar += x[i] / static_cast<double>(k);
        ybar += y[i] / static_cast<double>(k);
    }
    Eigen::MatrixXd mat(k, k);
    double diag = 1.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const double e = std::exp((x[i] - xbar) * (y[j] - ybar) / (kVarRate * t));
            mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e;
            if (i == j)
                diag *= e;
        }
    Eigen::MatrixXd scaled = mat;
    double factor = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double rmax = scaled.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff();
        scaled.row(static_cast<Eigen::Index>(i)) /= rmax;
        factor *= rmax;
    }
    const double scaled_det = scaled.partialPivLu().determinant();
    if (k >= 2 && std::abs(scaled_det) < 1e-12)
        std::cerr << "km_nonintersect_prob: near-singular heat-kernel matrix (scaled det "
                  << scaled_det << ")\n";
    return scaled_det * factor / diag;
}

ConditionedSample sample_conditioned_bridges(const BridgeSpec& spec, const GridFunction* lower,
                                             const Window& J, RngState& rng,
                                             std::size_t max_tries, const NiOptions& opts) {
    validate_spec(spec);
    if (max_tries < 1)
        throw InvalidInput("sample_conditioned_bridges: need max_tries >= 1");
    for (std::size_t tries = 1; tries <= max_tries; ++tries) {
        FunctionTuple f = sample_bridge_tuple(spec, rng);
        if (!ni_indicator(f, lower, J))
            continue;
        if (opts.crossing_correction &&
            !(rng.uniform() < crossing_survival(f, lower, J)))
            continue;
        return {std::move(f), tries};
    }
    // 95% upper confidence bound on the acceptance rate after an all-miss run.
    const double bound = 1.0 - std::pow(0.05, 1.0 / static_cast<double>(max_tries));
    throw LowAcceptance("sample_conditioned_bridges: no acceptance in " +
                            std::to_string(max_tries) + " tries (rate < 95% bound)",
                        bound);
}

DominanceReport dominance_check(const BridgeSpec& low, const BridgeSpec& high,
                                const GridFunction* lower_low, const GridFunction* lower_high,
                                const Window& J, std::size_t n, RngState& rng,
                                std::size_t max_tries) {
    validate_spec(low);
    validate_spec(high);
    if (low.x.size() != high.x.size() || low.mesh != high.mesh || low.s != high.s ||
        low.t != high.t)
        throw InvalidInput("dominance_check: specs must share k, mesh and time window");
    for (std::size_t i = 0; i < low.x.size(); ++i)
        if (low.x[i] > high.x[i] || low.y[i] > high.y[i])
            throw InvalidInput("dominance_check: high endpoints must dominate low ones");
    if (lower_low != nullptr && lower_high == nullptr)
        throw InvalidInput("dominance_check: high floor must dominate low floor");
    if (n < 2)
        throw InvalidInput("dominance_check: need n >= 2");

    const std::size_t k = low.x.size();
    const std::size_t m = low.mesh;
    const std::vector<std::size_t> probes = {m / 4, m / 2, (3 * m) / 4};
    RngState rng_low = rng.substream(0);
    RngState rng_high = rng.substream(1);

    // values[law][probe][coord][sample]
    auto draw = [&](const BridgeSpec& spec, const GridFunction* floor, RngState& r) {
        std::vector<std::vector<std::vector<double>>> v(
            probes.size(), std::vector<std::vector<double>>(k));
        for (auto& per_probe : v)
            for (auto& per_coord : per_probe)
                per_coord.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            ConditionedSample cs = sample_conditioned_bridges(spec, floor, J, r, max_tries);
            for (std::size_t p = 0; p < probes.size(); ++p)
                for (std::size_t c = 0; c < k; ++c)
                    v[p][c].push_back(cs.paths[c][probes[p]]);
        }
        return v;
    };
    auto vals_low = draw(low, lower_low, rng_low);
    auto vals_high = draw(high, lower_high, rng_high);

    DominanceReport report;
    report.draws = n;
    const double dn = static_cast<double>(n);
    for (std::size_t p = 0; p < probes.size(); ++p) {
        report.probe_times.push_back(low.s + (low.t - low.s) * static_cast<double>(probes[p]) /
                                                 static_cast<double>(m));
        double worst = -1e300;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> lo = vals_low[p][c];
            std::vector<double> hi = vals_high[p][c];
            std::sort(lo.begin(), lo.end());
            std::sort(hi.begin(), hi.end());
            // Dominance means F_high <= F_low pointwise; scan pooled levels.
            std::vector<double> levels = lo;
            levels.insert(levels.end(), hi.begin(), hi.end());
            std::sort(levels.begin(), levels.end());
            const std::size_t stride = std::max<std::size_t>(1, levels.size() / 512);
            for (std::size_t q = 0; q < levels.size(); q += stride) {
                const double z = levels[q];
                const double fl = static_cast<double>(std::upper_bound(lo.begin(), lo.end(), z) -
                                                      lo.begin()) /
                                  dn;
                const double fh = static_cast<double>(std::upper_bound(hi.begin(), hi.end(), z) -
                                                      hi.begin()) /
                                  dn;
                const double se = std::max(std::sqrt((fl * (1.0 - fl) + fh * (1.0 - fh)) / dn),
                                           std::sqrt(0.5) / dn);
                worst = std::max(worst, (fh - fl) / se);
            }
        }
        report.violation_se.push_back(worst);
        report.max_violation_se = std::max(report.max_violation_se, worst);
    }
    return report;
}

double two_barrier_survivor(double a, double b, double x, double t) {
    if (!(t > 0.0))
        throw InvalidInput("two_barrier_survivor: need t > 0");
    return survivor_any(a, b, x, t);
}

double reflection_density(double a, double b, double x, double t) {
    if (!(t > 0.0))
        throw InvalidInput("reflection_density: need t > 0");
    if (a < 0.0 || b < 0.0 || x > a || x < -b)
        throw InvalidInput("reflection_density: need a, b >= 0 and -b <= x <= a");
    const double l = a + b;
    const double l2 = l * l;
    if (l2 < 0.02 * t)
        return 0.0;   // below e^{-pi^2 t / L^2} ~ e^{-490}: zero at double precision
    if (l2 >= 0.45 * t) {
        // Termwise mixed a,b-derivative of the image series.
        CompensatedSum acc;
        for (int n = 1; n <= 200; ++n) {
            const double dn = n;
            const double shift = 2.0 * dn * l;
            const double term =
                4.0 * dn * dn * (phi_gauss_dd(x + shift, t) + phi_gauss_dd(x - shift, t)) -
                4.0 * dn * (dn + 1.0) *
                    (phi_gauss_dd(2.0 * a - x + shift, t) +
                     phi_gauss_dd(2.0 * a - x - shift - 2.0 * l, t));
            acc.add(term);
            if (std::abs(term) < 1e-22 * (1.0 + std::abs(acc.value())) && n >= 3)
                break;
        }
        return acc.value();
    }
    // Narrow-range regime: Richardson-extrapolated finite differences of the
    // eigenbasis survivor. Step follows the survivor's log-derivative scale.
    const double h = l * l2 / (20.0 * M_PI * M_PI * t);
    auto mixed = [&](double step) {
        // One-sided stencils keep every evaluation inside {a' >= x, b' >= -x}.
        const bool central_a = a - step >= std::max(x, 0.0);
        const bool central_b = b - step >= std::max(-x, 0.0);
        std::vector<std::pair<double, double>> na, nb;   // (node, weight)
        if (central_a)
            na = {{a - step, -0.5 / step}, {a + step, 0.5 / step}};
        else
            na = {{a, -1.5 / step}, {a + step, 2.0 / step}, {a + 2.0 * step, -0.5 / step}};
        if (central_b)
            nb = {{b - step, -0.5 / step}, {b + step, 0.5 / step}};
        else
            nb = {{b, -1.5 / step}, {b + step, 2.0 / step}, {b + 2.0 * step, -0.5 / step}};
        double s = 0.0;
        for (const auto& [av, aw] : na)
            for (const auto& [bv, bw] : nb)
                s += aw * bw * survivor_eigen(av, bv, x, t);
        return s;
    };
    const double coarse = mixed(h);
    const double fine = mixed(0.5 * h);
    return (4.0 * fine - coarse) / 3.0;
}

PathExtremes sample_path_extremes(double t, std::size_t mesh, RngState& rng) {
    if (!(t > 0.0) || mesh < 1)
        throw InvalidInput("sample_path_extremes: need t > 0 and mesh >= 1");
    const double h = t / static_cast<double>(mesh);
    const double sd = std::sqrt(kVarRate * h);
    double prev = 0.0, sup = 0.0, inf = 0.0;
    for (std::size_t j = 0; j < mesh; ++j) {
        const double next = prev + sd * rng.normal();
        const double d2 = (next - prev) * (next - prev);
        // Exact per-cell bridge extremes; cell max and min drawn independently,
        // which biases only the joint law of cells carrying both extremes.
        const double lu = std::log(rng.uniform());
        const double lv = std::log(rng.uniform());
        const double cell_max = 0.5 * (prev + next + std::sqrt(d2 - 2.0 * kVarRate * h * lu));
        const double cell_min = 0.5 * (prev + next - std::sqrt(d2 - 2.0 * kVarRate * h * lv));
        sup = std::max(sup, cell_max);
        inf = std::min(inf, cell_min);
        prev = next;
    }
    return {sup, -inf, prev};
}

} // namespace airylab
