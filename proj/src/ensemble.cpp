#include "airylab/ensemble.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "airylab/errors.hpp"

namespace airylab {

namespace {

// Hermitian Gaussian increment scaled so eigenvalue paths follow the
// variance-2 convention: diagonal entries variance 2*var, off-diagonal real
// and imaginary parts variance var each.
void add_hermitian_noise(Eigen::MatrixXcd& h, double var, RngState& rng) {
    const Eigen::Index n = h.rows();
    const double diag_sd = std::sqrt(2.0 * var);
    const double off_sd = std::sqrt(var);
    for (Eigen::Index i = 0; i < n; ++i)
        h(i, i) += diag_sd * rng.normal();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const std::complex<double> z(off_sd * rng.normal(), off_sd * rng.normal());
            h(i, j) += z;
            h(j, i) += std::conj(z);
        }
}

// Descending spectrum of a Hermitian slice.
std::vector<double> descending_eigs(const Eigen::MatrixXcd& h, std::size_t slice) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericFailure("watermelon: eigensolver failed at slice " + std::to_string(slice));
    const auto& ev = solver.eigenvalues();
    std::vector<double> out(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        out[static_cast<std::size_t>(ev.size() - 1 - i)] = ev(i);
    return out;
}

double center_curve(double s, std::size_t n, double big_m) {
    return 2.0 * std::sqrt(static_cast<double>(n) * (big_m * big_m - s * s) / big_m);
}

void validate_scaling(const EdgeScaling& sc) {
    if (!(sc.time_scale > 0.0) || !(sc.space_scale > 0.0))
        throw InvalidInput("edge scaling: scales must be positive");
}

} // namespace

Watermelon sample_watermelon(std::size_t n, double M, std::size_t mesh, RngState& rng) {
    if (n < 1 || mesh < 2)
        throw InvalidInput("sample_watermelon: need n >= 1 and mesh >= 2");
    if (!(M > 0.0))
        throw InvalidInput("sample_watermelon: need M > 0");
    const Eigen::Index en = static_cast<Eigen::Index>(n);
    const double h = 2.0 * M / static_cast<double>(mesh);
    std::vector<Eigen::MatrixXcd> walk(mesh + 1, Eigen::MatrixXcd::Zero(en, en));
    for (std::size_t j = 1; j <= mesh; ++j) {
        walk[j] = walk[j - 1];
        add_hermitian_noise(walk[j], h, rng);
    }
    std::vector<std::vector<double>> vals(n, std::vector<double>(mesh + 1, 0.0));
    for (std::size_t j = 1; j < mesh; ++j) {
        const double frac = static_cast<double>(j) / static_cast<double>(mesh);
        const Eigen::MatrixXcd slice = walk[j] - frac * walk[mesh];
        const std::vector<double> eigs = descending_eigs(slice, j);
        for (std::size_t i = 0; i < n; ++i)
            vals[i][j] = eigs[i];
    }
    Watermelon w;
    w.n = n;
    w.M = M;
    w.paths.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        w.paths.emplace_back(-M, M, std::move(vals[i]));
    return w;
}

std::vector<std::vector<double>> sample_watermelon_slices(std::size_t n, double M,
                                                          const std::vector<double>& times,
                                                          RngState& rng) {
    if (n < 1 || !(M > 0.0))
        throw InvalidInput("sample_watermelon_slices: need n >= 1 and M > 0");
    if (times.empty())
        throw InvalidInput("sample_watermelon_slices: need at least one time");
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (times[j] < -M || times[j] >= M)
            throw InvalidInput("sample_watermelon_slices: times must lie in [-M, M)");
        if (j > 0 && !(times[j] > times[j - 1]))
            throw InvalidInput("sample_watermelon_slices: times must be strictly ascending");
    }
    const Eigen::Index en = static_cast<Eigen::Index>(n);
    Eigen::MatrixXcd cur = Eigen::MatrixXcd::Zero(en, en);
    std::vector<std::vector<double>> out;
    out.reserve(times.size());
    double s = -M;
    for (std::size_t j = 0; j < times.size(); ++j) {
        // Bridge transition toward the pin at +M: entrywise conditional
        // Gaussian with mean shrunk by (M - s_next)/(M - s_prev).
        const double rem0 = M - s;
        const double rem1 = M - times[j];
        const double dt = times[j] - s;
        cur *= rem1 / rem0;
        add_hermitian_noise(cur, dt * rem1 / rem0, rng);
        out.push_back(descending_eigs(cur, j));
        s = times[j];
    }
    return out;
}

FunctionTuple edge_rescale(Watermelon& w, std::size_t k, double t, const EdgeScaling& scaling) {
    validate_scaling(scaling);
    if (k < 1 || k > w.n)
        throw InvalidInput("edge_rescale: need 1 <= k <= n");
    if (!(t > 0.0))
        throw InvalidInput("edge_rescale: need t > 0");
    const double half_span = 0.5 * t * scaling.time_scale;
    if (!(half_span < w.M))
        throw InvalidInput("edge_rescale: window exceeds the rescaled domain");
    const std::size_t native = w.paths[0].mesh();
    const double native_span = w.paths[0].node(native) - w.paths[0].node(0);
    const std::size_t out_mesh = std::max<std::size_t>(
        8, static_cast<std::size_t>(std::llround(
               static_cast<double>(native) * t * scaling.time_scale / native_span)));
    FunctionTuple out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<double> vals(out_mesh + 1);
        for (std::size_t j = 0; j <= out_mesh; ++j) {
            const double tau = t * static_cast<double>(j) / static_cast<double>(out_mesh);
            const double s = (tau - 0.5 * t) * scaling.time_scale;
            vals[j] = (w.paths[i](s) - center_curve(s, w.n, w.M)) / scaling.space_scale -
                      tau * tau;
        }
        out.emplace_back(0.0, t, std::move(vals));
    }
    w.scaling = scaling;
    return out;
}

std::vector<std::vector<double>> edge_rescale_slices(std::size_t n, double M,
                                                     const std::vector<std::vector<double>>& eigs,
                                                     const std::vector<double>& taus, double t,
                                                     const EdgeScaling& scaling) {
    validate_scaling(scaling);
    if (eigs.size() != taus.size())
        throw InvalidInput("edge_rescale_slices: one eigenvalue vector per time");
    if (!(t > 0.0))
        throw InvalidInput("edge_rescale_slices: need t > 0");
    std::vector<std::vector<double>> out(eigs.size());
    for (std::size_t j = 0; j < eigs.size(); ++j) {
        const double s = (taus[j] - 0.5 * t) * scaling.time_scale;
        if (std::abs(s) >= M)
            throw InvalidInput("edge_rescale_slices: window exceeds the rescaled domain");
        const double c = center_curve(s, n, M);
        out[j].resize(eigs[j].size());
        for (std::size_t i = 0; i < eigs[j].size(); ++i)
            out[j][i] = (eigs[j][i] - c) / scaling.space_scale - taus[j] * taus[j];
    }
    return out;
}

Watermelon gibbs_resample(const Watermelon& w, std::size_t k, double a, double b,
                          RngState& rng, std::size_t max_tries) {
    if (k < 1 || k > w.n)
        throw InvalidInput("gibbs_resample: need 1 <= k <= n");
    if (w.paths.empty())
        throw InvalidInput("gibbs_resample: empty watermelon");
    const std::size_t mesh = w.paths[0].mesh();
    const double lo = w.paths[0].node(0), hi = w.paths[0].node(mesh);
    if (!(a < b) || a < lo || b > hi)
        throw InvalidInput("gibbs_resample: [a, b] must lie inside the domain");
    const double h = w.paths[0].step();
    std::size_t ja = static_cast<std::size_t>(std::llround((a - lo) / h));
    std::size_t jb = static_cast<std::size_t>(std::llround((b - lo) / h));
    jb = std::min(jb, mesh);
    if (jb <= ja + 0)
        throw InvalidInput("gibbs_resample: window shorter than one mesh cell");

    BridgeSpec spec;
    spec.s = w.paths[0].node(ja);
    spec.t = w.paths[0].node(jb);
    spec.mesh = jb - ja;
    for (std::size_t i = 0; i < k; ++i) {
        spec.x.push_back(w.paths[i][ja]);
        spec.y.push_back(w.paths[i][jb]);
    }
    std::optional<GridFunction> floor;
    if (k < w.n) {
        std::vector<double> fv(w.paths[k].values().begin() + static_cast<std::ptrdiff_t>(ja),
                               w.paths[k].values().begin() + static_cast<std::ptrdiff_t>(jb) + 1);
        floor.emplace(spec.s, spec.t, std::move(fv));
    }
    const Window win = Window::closed(spec.s, spec.t);
    ConditionedSample cs =
        sample_conditioned_bridges(spec, floor ? &*floor : nullptr, win, rng, max_tries);
    Watermelon out = w;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = ja; j <= jb; ++j)
            out.paths[i][j] = cs.paths[i][j - ja];
    return out;
}

WeightedSample build_L_patch(Watermelon& w, std::size_t k, double window_t, double patch_t,
                             RngState& rng, std::size_t p_samples) {
    if (k < 1 || k + 1 > w.n)
        throw InvalidInput("build_L_patch: need 1 <= k and k+1 lines available");
    if (!(patch_t > 0.0) || patch_t > window_t)
        throw InvalidInput("build_L_patch: need 0 < patch_t <= window_t");
    if (p_samples < 1)
        throw InvalidInput("build_L_patch: need p_samples >= 1");
    FunctionTuple rescaled = edge_rescale(w, k + 1, window_t, w.scaling);
    GridFunction lower = rescaled[k];
    rescaled.pop_back();

    const std::size_t mesh = rescaled[0].mesh();
    const double step = rescaled[0].step();
    std::size_t patch_hi = static_cast<std::size_t>(std::llround(patch_t / step));
    patch_hi = std::min(std::max<std::size_t>(patch_hi, 1), mesh);

    BridgeSpec patch;
    patch.s = 0.0;
    patch.t = rescaled[0].node(patch_hi);
    patch.mesh = patch_hi;
    for (std::size_t i = 0; i < k; ++i) {
        patch.x.push_back(rescaled[i][0]);
        patch.y.push_back(rescaled[i][patch_hi]);
    }
    std::vector<double> floor_vals(lower.values().begin(),
                                   lower.values().begin() + static_cast<std::ptrdiff_t>(patch_hi) + 1);
    const GridFunction patch_floor(patch.s, patch.t, std::move(floor_vals));
    const Window win = Window::closed(patch.s, patch.t);

    // Fresh stream for the sub-estimate so successive calls never reuse draws.
    const RngState pstream(rng.seed(), rng.bits());
    McEstimate p_hat = acceptance_prob_mc(patch, &patch_floor, win, p_samples, pstream);

    WeightedSample out;
    out.patch_lo = 0;
    out.patch_hi = patch_hi;
    out.p_hat = p_hat;
    if (p_hat.value <= 0.0) {
        out.censored = true;
        out.p_hat.censored = true;
        out.weight = static_cast<double>(p_samples + 1);
    } else {
        out.weight = 1.0 / p_hat.value;
    }

    const FunctionTuple free = sample_bridge_tuple(patch, rng);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j <= patch_hi; ++j)
            rescaled[i][j] = free[i][j];
    out.lines = std::move(rescaled);
    out.lower = std::move(lower);
    return out;
}

InverseAcceptanceReport inverse_acceptance_expectation(std::size_t n, std::size_t k, double t,
                                                       std::size_t samples, RngState& rng,
                                                       std::size_t p_samples, std::size_t mesh,
                                                       std::size_t threads) {
    if (samples < 1)
        throw InvalidInput("inverse_acceptance_expectation: need samples >= 1");
    if (k + 1 > n)
        throw InvalidInput("inverse_acceptance_expectation: need k + 1 <= n");
    const double M = std::cbrt(static_cast<double>(n));
    const std::size_t shards = std::min<std::size_t>(samples, 64);
    std::vector<std::vector<double>> shard_weights(shards);
    std::vector<std::size_t> shard_censored(shards, 0);
    parallel_shards(shards, std::max<std::size_t>(threads, 1), [&](std::size_t s) {
        const std::size_t ns = samples / shards + (s < samples % shards ? 1 : 0);
        RngState local = rng.substream(s);
        shard_weights[s].reserve(ns);
        for (std::size_t i = 0; i < ns; ++i) {
            Watermelon w = sample_watermelon(n, M, mesh, local);
            const WeightedSample ws = build_L_patch(w, k, t, t, local, p_samples);
            shard_weights[s].push_back(ws.weight);
            shard_censored[s] += ws.censored ? 1 : 0;
        }
    });
    std::vector<double> weights;
    weights.reserve(samples);
    std::size_t censored = 0;
    for (std::size_t s = 0; s < shards; ++s) {
        weights.insert(weights.end(), shard_weights[s].begin(), shard_weights[s].end());
        censored += shard_censored[s];
    }
    InverseAcceptanceReport report;
    report.estimate = mean_estimate(weights, rng.seed());
    double total = 0.0, max_w = 0.0;
    for (double wgt : weights) {
        total += wgt;
        max_w = std::max(max_w, wgt);
    }
    report.max_weight_share = total > 0.0 ? max_w / total : 0.0;
    report.ess = effective_sample_size(weights);
    report.censored = censored;
    report.reliability_warning =
        static_cast<double>(censored) > 0.01 * static_cast<double>(samples);
    return report;
}

} // namespace airylab
