#include "airylab/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "airylab/airy.hpp"
#include "airylab/bridge.hpp"
#include "airylab/ensemble.hpp"
#include "airylab/errors.hpp"
#include "airylab/experiments.hpp"
#include "airylab/functionals.hpp"
#include "airylab/io.hpp"
#include "airylab/mc.hpp"
#include "airylab/numerics.hpp"
#include "airylab/parabola_energy.hpp"
#include "airylab/rng.hpp"

namespace airylab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kUnsetReal = std::numeric_limits<double>::quiet_NaN();

// One bag of option storage shared by every subcommand. Sentinels (0 for
// counts, NaN for reals, empty strings) mean "not given"; per-subcommand
// defaults are resolved at dispatch so a config file and flags can each
// override only what they mention.
struct Opts {
    std::size_t k = 0;
    std::size_t n = 0;
    std::size_t mesh = 0;
    std::size_t samples = 0;
    std::size_t budget = 0;
    std::size_t control_budget = 0;   // 0 keeps the library's 4x default
    std::size_t threads = 0;
    double t = kUnsetReal;
    double M = kUnsetReal;            // resolves to 0 = the n^{1/3} default
    double beta = kUnsetReal;
    double delta = kUnsetReal;
    double c = kUnsetReal;
    double d = kUnsetReal;
    double time_scale = kUnsetReal;
    double space_scale = kUnsetReal;
    std::uint64_t seed = 1;
    std::string out;
    std::string input;
    std::string kind;
    std::string m_grid;               // comma-separated reals
    std::string config_path;
};

std::size_t or_count(std::size_t v, std::size_t fallback) { return v != 0 ? v : fallback; }
double or_real(double v, double fallback) { return std::isnan(v) ? fallback : v; }

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        const auto first = token.find_first_not_of(" \t");
        const auto last = token.find_last_not_of(" \t");
        if (first == std::string::npos)
            throw InvalidInput("m-grid: empty entry in '" + text + "'");
        token = token.substr(first, last - first + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            throw InvalidInput("m-grid: cannot parse '" + token + "'");
        }
        if (used != token.size() || !std::isfinite(v))
            throw InvalidInput("m-grid: cannot parse '" + token + "'");
        grid.push_back(v);
    }
    if (grid.empty())
        throw InvalidInput("m-grid: no values given");
    return grid;
}

std::string grid_to_text(const std::vector<double>& grid) {
    std::string out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i) out += ",";
        out += format_double(grid[i]);
    }
    return out;
}

void apply_count(const json& v, const std::string& key, std::size_t& field) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw InvalidInput("config: '" + key + "' must be an integer");
    const auto signed_v = v.get<long long>();
    if (signed_v < 0)
        throw InvalidInput("config: '" + key + "' must be nonnegative");
    field = static_cast<std::size_t>(signed_v);
}

void apply_real(const json& v, const std::string& key, double& field) {
    if (!v.is_number())
        throw InvalidInput("config: '" + key + "' must be a number");
    field = v.get<double>();
}

// Config file keys mirror the long flag names exactly; flags given on the
// command line override whatever the file set.
void apply_config_file(const fs::path& path, Opts& o) {
    std::ifstream in(path);
    if (!in)
        throw InvalidInput("config: cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw InvalidInput("config: " + path.string() + ": " + e.what());
    }
    if (!doc.is_object())
        throw InvalidInput("config: " + path.string() + " is not a JSON object");
    for (const auto& [key, v] : doc.items()) {
        if (key == "k") apply_count(v, key, o.k);
        else if (key == "n") apply_count(v, key, o.n);
        else if (key == "mesh") apply_count(v, key, o.mesh);
        else if (key == "samples") apply_count(v, key, o.samples);
        else if (key == "budget") apply_count(v, key, o.budget);
        else if (key == "control-budget") apply_count(v, key, o.control_budget);
        else if (key == "threads") apply_count(v, key, o.threads);
        else if (key == "t") apply_real(v, key, o.t);
        else if (key == "M") apply_real(v, key, o.M);
        else if (key == "beta") apply_real(v, key, o.beta);
        else if (key == "delta") apply_real(v, key, o.delta);
        else if (key == "c") apply_real(v, key, o.c);
        else if (key == "d") apply_real(v, key, o.d);
        else if (key == "time-scale") apply_real(v, key, o.time_scale);
        else if (key == "space-scale") apply_real(v, key, o.space_scale);
        else if (key == "seed") {
            if (!v.is_number_integer() && !v.is_number_unsigned())
                throw InvalidInput("config: 'seed' must be an integer");
            o.seed = v.get<std::uint64_t>();
        } else if (key == "out") o.out = v.get<std::string>();
        else if (key == "input") o.input = v.get<std::string>();
        else if (key == "kind") o.kind = v.get<std::string>();
        else if (key == "m-grid") {
            if (v.is_array()) {
                std::vector<double> grid;
                for (const auto& e : v) {
                    if (!e.is_number())
                        throw InvalidInput("config: 'm-grid' entries must be numbers");
                    grid.push_back(e.get<double>());
                }
                o.m_grid = grid_to_text(grid);
            } else if (v.is_string()) {
                o.m_grid = v.get<std::string>();
            } else {
                throw InvalidInput("config: 'm-grid' must be an array or string");
            }
        } else {
            throw InvalidInput("config: unknown key '" + key + "'");
        }
    }
}

// Artifact bookkeeping for one run: tables register themselves so the
// manifest can hash exactly what was written.
struct RunContext {
    fs::path dir;
    std::string tag;          // subcommand with '-' -> '_'
    std::string subcommand;
    std::vector<fs::path> artifacts;
    json config = json::object();
    std::uint64_t seed = 1;

    fs::path table(const std::string& suffix = "") {
        fs::path p = dir / (suffix.empty() ? tag + ".csv" : tag + "_" + suffix + ".csv");
        artifacts.push_back(p);
        return p;
    }
    void finish(double wall_seconds) const {
        write_manifest(dir / (tag + "_manifest.json"), subcommand, config.dump(), seed,
                       artifacts, wall_seconds);
    }
};

std::string fmt_flag(bool b) { return b ? "1" : "0"; }

std::string join_semicolon(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ";";
        out += format_double(v[i]);
    }
    return out;
}

// ---------------------------------------------------------------- alpha-k

void run_alpha_k(const Opts& o, RunContext& ctx) {
    const std::size_t k = or_count(o.k, 1);
    if (k > 6)
        throw InvalidInput("alpha-k: k must be in [1, 6]");
    ctx.config["k"] = k;
    ctx.config["out"] = ctx.dir.string();
    const SphereMaxResult r = alpha_k(k, 1e-10);
    CsvWriter w(ctx.table());
    w.row({"k", "alpha", "iterations"});
    w.row({std::to_string(k), format_double(r.alpha), std::to_string(r.iterations)});
}

// ------------------------------------------------------------ opt-identity

void run_opt_identity(const Opts& o, RunContext& ctx) {
    const std::size_t k = or_count(o.k, 1);
    const double beta = or_real(o.beta, 1.0);
    if (k > 6 || beta <= 0.0)
        throw InvalidInput("opt-identity: need k in [1,6] and beta > 0");
    ctx.config["k"] = k;
    ctx.config["beta"] = beta;
    ctx.config["out"] = ctx.dir.string();
    const double max_g = max_g_over_dbeta(k, beta);
    const double predicted = std::pow(beta, 1.5) * alpha_k(k, 1e-10).alpha;
    const double rel_err = std::abs(max_g - predicted) / predicted;
    CsvWriter w(ctx.table());
    w.row({"k", "beta", "max_g", "predicted", "rel_err"});
    w.row({std::to_string(k), format_double(beta), format_double(max_g),
           format_double(predicted), format_double(rel_err)});
}

// -------------------------------------------------------------- airy-table

void run_airy_table(const Opts& o, RunContext& ctx) {
    std::vector<double> grid =
        o.m_grid.empty() ? linspace(-10.0, 6.0, 81) : parse_grid(o.m_grid);
    ctx.config["m-grid"] = grid;
    ctx.config["out"] = ctx.dir.string();
    CsvWriter w(ctx.table());
    w.row({"x", "ai", "ai_prime", "kernel_diag"});
    for (double x : grid)
        w.row({format_double(x), format_double(airy_ai(x)), format_double(airy_ai_prime(x)),
               format_double(airy_kernel_equal_time(x, x))});
}

// ------------------------------------------------------------- tetris-eval

FunctionTuple read_tuple_csv(const fs::path& path, std::vector<std::string>& names) {
    std::ifstream in(path);
    if (!in)
        throw InvalidInput("tetris-eval: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw InvalidInput("tetris-eval: " + path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream header(line);
    std::string token;
    std::vector<std::string> cols;
    while (std::getline(header, token, ',')) cols.push_back(token);
    if (cols.size() < 2 || cols[0] != "s")
        throw InvalidInput("tetris-eval: header must be s,<name>,... (got '" + line + "')");
    names.assign(cols.begin() + 1, cols.end());
    const std::size_t k = names.size();

    std::vector<double> s;
    std::vector<std::vector<double>> values(k);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream row(line);
        std::vector<double> fields;
        while (std::getline(row, token, ',')) {
            try {
                fields.push_back(std::stod(token));
            } catch (const std::exception&) {
                throw InvalidInput("tetris-eval: bad number '" + token + "' at line " +
                                   std::to_string(lineno));
            }
        }
        if (fields.size() != k + 1)
            throw InvalidInput("tetris-eval: expected " + std::to_string(k + 1) +
                               " fields at line " + std::to_string(lineno));
        s.push_back(fields[0]);
        for (std::size_t i = 0; i < k; ++i) values[i].push_back(fields[i + 1]);
    }
    if (s.size() < 2)
        throw InvalidInput("tetris-eval: need at least two data rows");
    const std::size_t mesh = s.size() - 1;
    const double h = (s.back() - s.front()) / static_cast<double>(mesh);
    if (!(h > 0.0))
        throw InvalidInput("tetris-eval: s column must be strictly increasing");
    for (std::size_t j = 0; j + 1 < s.size(); ++j)
        if (std::abs((s[j + 1] - s[j]) - h) > 1e-6 * std::max(1.0, std::abs(h)))
            throw InvalidInput("tetris-eval: s column must be uniformly spaced");

    FunctionTuple f;
    for (std::size_t i = 0; i < k; ++i)
        f.emplace_back(s.front(), s.back(), std::move(values[i]));
    return f;
}

void run_tetris_eval(const Opts& o, RunContext& ctx) {
    const std::string input = o.input.empty() ? std::string("data/sample_tuple.csv") : o.input;
    ctx.config["input"] = input;
    ctx.config["out"] = ctx.dir.string();
    std::vector<std::string> names;
    const FunctionTuple f = read_tuple_csv(input, names);
    const FunctionTuple stacked = tetris(f);
    const double s_val = s_functional(f);

    CsvWriter tuple(ctx.table("tuple"));
    std::vector<std::string> header{"s"};
    for (std::size_t i = 0; i < stacked.size(); ++i)
        header.push_back("g" + std::to_string(i + 1));
    tuple.row(header);
    for (std::size_t j = 0; j < stacked[0].nodes(); ++j) {
        std::vector<std::string> row{format_double(stacked[0].node(j))};
        for (const auto& g : stacked)
            row.push_back(format_double(g[j]));
        tuple.row(row);
    }

    CsvWriter summary(ctx.table("summary"));
    summary.row({"quantity", "value"});
    for (std::size_t i = 0; i < stacked.size(); ++i)
        summary.row({"shift_" + std::to_string(i + 1), format_double(stacked[i][0])});
    summary.row({"s_functional", format_double(s_val)});
}

// ------------------------------------------------------------ energy-table

void run_energy_table(const Opts& o, RunContext& ctx) {
    const std::size_t mesh = or_count(o.mesh, 10000);
    const std::size_t configs = or_count(o.samples, 20);
    ctx.config["mesh"] = mesh;
    ctx.config["samples"] = configs;
    ctx.config["seed"] = o.seed;
    ctx.config["out"] = ctx.dir.string();

    RngState rng(o.seed);
    CsvWriter w(ctx.table());
    w.row({"x", "y", "lambda", "energy_e", "energy_j", "majorant_energy", "obstacle_energy",
           "rel_err", "iterations", "converged"});
    for (std::size_t i = 0; i < configs; ++i) {
        const double lambda = 1.0 + 7.0 * rng.uniform();
        const double a = rng.uniform() * lambda;
        const double b = rng.uniform() * (lambda - a);
        const EnergyParams p{a * a, b * b, lambda};
        const double e = energy_E(p);
        const double jv = energy_J(p);
        const GridFunction obstacle =
            GridFunction::sampled(0.0, lambda, mesh, [](double s) { return -s * s; });
        const double right = p.y - lambda * lambda;
        const GridFunction hull = least_concave_majorant(obstacle, p.x, right);
        const double hull_energy = dirichlet_energy(hull);
        const ObstacleResult sol =
            min_energy_above_obstacle(obstacle, p.x, right, 2000 * mesh);
        const double rel = std::abs(e - sol.energy) / e;
        w.row({format_double(p.x), format_double(p.y), format_double(lambda), format_double(e),
               format_double(jv), format_double(hull_energy), format_double(sol.energy),
               format_double(rel), std::to_string(sol.iterations), fmt_flag(sol.converged)});
    }
}

// ------------------------------------------------------------ bridge-check

void run_bridge_check(const Opts& o, RunContext& ctx) {
    const double t = or_real(o.t, 1.0);
    const std::size_t mesh = or_count(o.mesh, 256);
    const std::size_t n = or_count(o.samples, 100000);
    if (t <= 0.0 || mesh < 4)
        throw InvalidInput("bridge-check: need t > 0 and mesh >= 4");
    ctx.config["t"] = t;
    ctx.config["mesh"] = mesh;
    ctx.config["samples"] = n;
    ctx.config["seed"] = o.seed;
    ctx.config["threads"] = or_count(o.threads, 1);
    ctx.config["out"] = ctx.dir.string();

    const BridgeSpec spec{0.0, t, {0.0}, {0.0}, mesh};
    RngState rng(o.seed);
    const std::size_t jq = mesh / 4, jm = mesh / 2;
    std::vector<double> quarter(n), mid(n);
    double pin = 0.0;
    double tq = 0.0, tm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const FunctionTuple f = sample_bridge_tuple(spec, rng);
        quarter[i] = f[0][jq];
        mid[i] = f[0][jm];
        pin = std::max({pin, std::abs(f[0][0]), std::abs(f[0][mesh])});
        if (i == 0) { tq = f[0].node(jq); tm = f[0].node(jm); }
    }
    const double nn = static_cast<double>(n);
    double mq = 0.0, mm = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mq += quarter[i]; mm += mid[i]; }
    mq /= nn;
    mm /= nn;
    double var_m = 0.0, cov_qm = 0.0, m4 = 0.0;
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dq = quarter[i] - mq, dm = mid[i] - mm;
        var_m += dm * dm;
        cov_qm += dq * dm;
        prod[i] = dq * dm;
        m4 += dm * dm * dm * dm;
    }
    var_m /= nn - 1.0;
    cov_qm /= nn - 1.0;
    m4 /= nn;
    double prod_var = 0.0;
    for (double v : prod) prod_var += (v - cov_qm) * (v - cov_qm);
    prod_var /= nn - 1.0;

    // Variance-2 bridge covariance: Cov(f(u), f(v)) = 2 u (t - v) / t, u <= v.
    const double exp_var = 2.0 * tm * (t - tm) / t;
    const double exp_cov = 2.0 * tq * (t - tm) / t;
    const double se_mean = std::sqrt(var_m / nn);
    const double se_var = std::sqrt((m4 - var_m * var_m * (nn - 3.0) / (nn - 1.0)) / nn);
    const double se_cov = std::sqrt(prod_var / nn);

    CsvWriter w(ctx.table());
    w.row({"quantity", "empirical", "expected", "std_error", "z"});
    auto emit = [&](const std::string& q, double emp, double expv, double se) {
        const double z = se > 0.0 ? (emp - expv) / se : 0.0;
        w.row({q, format_double(emp), format_double(expv), format_double(se),
               format_double(z)});
    };
    emit("endpoint_pin_max_abs", pin, 0.0, 0.0);
    emit("midpoint_mean", mm, 0.0, se_mean);
    emit("midpoint_var", var_m, exp_var, se_var);
    emit("quarter_mid_cov", cov_qm, exp_cov, se_cov);
}

// --------------------------------------------------------------- km-vs-mc

std::vector<double> random_ordered_config(std::size_t k, RngState& rng) {
    std::vector<double> v(k);
    for (auto& x : v) x = -1.5 + 3.0 * rng.uniform();
    std::sort(v.begin(), v.end(), std::greater<>());
    for (std::size_t i = 1; i < k; ++i)
        v[i] = std::min(v[i], v[i - 1] - 0.25);
    return v;
}

void run_km_vs_mc(const Opts& o, RunContext& ctx) {
    const std::size_t k = or_count(o.k, 2);
    const double t = or_real(o.t, 1.0);
    const std::size_t mesh = or_count(o.mesh, 256);
    const std::size_t samples = or_count(o.samples, 100000);
    const std::size_t threads = or_count(o.threads, 1);
    if (k < 2 || k > 6)
        throw InvalidInput("km-vs-mc: k must be in [2, 6]");
    if (t <= 0.0)
        throw InvalidInput("km-vs-mc: t must be positive");
    ctx.config["k"] = k;
    ctx.config["t"] = t;
    ctx.config["mesh"] = mesh;
    ctx.config["samples"] = samples;
    ctx.config["seed"] = o.seed;
    ctx.config["threads"] = threads;
    ctx.config["out"] = ctx.dir.string();

    RngState gen(o.seed);
    const NiOptions opts{true, threads};
    const Window window = Window::closed(0.0, t);
    CsvWriter w(ctx.table());
    w.row({"kind", "x", "y", "km", "mc", "mc_se", "z", "bound", "bound_ok"});

    auto run_config = [&](const std::string& kind, const std::vector<double>& x,
                          const std::vector<double>& y, std::uint64_t stream, double bound) {
        const BridgeSpec spec{0.0, t, x, y, mesh};
        RngState mc_rng = gen.substream(stream);
        const McEstimate mc = acceptance_prob_mc(spec, nullptr, window, samples, mc_rng, opts);
        const double km = km_nonintersect_prob(x, y, t);
        const double z = mc.std_error > 0.0 ? std::abs(km - mc.value) / mc.std_error : 0.0;
        std::vector<std::string> row{kind, join_semicolon(x), join_semicolon(y),
                                     format_double(km), format_double(mc.value),
                                     format_double(mc.std_error), format_double(z)};
        if (bound >= 0.0) {
            row.push_back(format_double(bound));
            row.push_back(fmt_flag(km >= bound));
        } else {
            row.push_back("");
            row.push_back("");
        }
        w.row(row);
    };

    for (std::size_t cidx = 0; cidx < 10; ++cidx) {
        const std::vector<double> x = random_ordered_config(k, gen);
        const std::vector<double> y = random_ordered_config(k, gen);
        run_config("random", x, y, 100 + cidx, -1.0);
    }
    const double alphas[] = {0.6, 1.0, 1.6};
    for (std::size_t aidx = 0; aidx < 3; ++aidx) {
        const double alpha = alphas[aidx];
        std::vector<double> x(k);
        for (std::size_t i = 0; i < k; ++i)
            x[i] = alpha * static_cast<double>(k - i);
        const double eps = alpha * alpha / t;
        const double kk = static_cast<double>(k);
        const double bound = std::exp(-kk * kk * kk * eps / 6.0) *
                             std::pow(eps / 2.0, kk * (kk - 1.0) / 2.0);
        run_config("alpha_" + format_double(alpha), x, x, 200 + aidx, bound);
    }
}

// --------------------------------------------------------- reflection-check

struct SimpsonNodes {
    std::vector<double> x, w;
};

SimpsonNodes simpson_nodes(double lo, double hi, std::size_t panels) {
    SimpsonNodes nodes;
    const double h = (hi - lo) / static_cast<double>(panels);
    for (std::size_t j = 0; j <= panels; ++j) {
        // Pin the endpoints and clamp so rounding never leaves [lo, hi]
        // (the reflection density rejects points outside its wedge).
        const double xj = j == panels ? hi : lo + h * static_cast<double>(j);
        nodes.x.push_back(std::min(std::max(xj, lo), hi));
        double wj = (j == 0 || j == panels) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        nodes.w.push_back(wj * h / 3.0);
    }
    return nodes;
}

// Integral of the (sup, -inf, end) density over a box intersected with the
// admissible wedge -b <= x <= a; tracks the minimum density seen.
double box_mass(double t, double alo, double ahi, double blo, double bhi, double xlo,
                double xhi, std::size_t na, std::size_t nb, std::size_t nx,
                double& min_density) {
    const SimpsonNodes as = simpson_nodes(alo, ahi, na);
    const SimpsonNodes bs = simpson_nodes(blo, bhi, nb);
    CompensatedSum acc;
    for (std::size_t ia = 0; ia < as.x.size(); ++ia) {
        for (std::size_t ib = 0; ib < bs.x.size(); ++ib) {
            const double a = as.x[ia], b = bs.x[ib];
            const double clo = std::max(xlo, -b), chi = std::min(xhi, a);
            if (chi <= clo) continue;
            const SimpsonNodes xs = simpson_nodes(clo, chi, nx);
            double inner = 0.0;
            for (std::size_t ix = 0; ix < xs.x.size(); ++ix) {
                const double f = reflection_density(a, b, xs.x[ix], t);
                min_density = std::min(min_density, f);
                inner += xs.w[ix] * f;
            }
            acc.add(as.w[ia] * bs.w[ib] * inner);
        }
    }
    return acc.value();
}

void run_reflection_check(const Opts& o, RunContext& ctx) {
    const double t = or_real(o.t, 1.0);
    const std::size_t mesh = or_count(o.mesh, 256);
    const std::size_t samples = or_count(o.samples, 200000);
    const std::size_t threads = or_count(o.threads, 1);
    if (t <= 0.0)
        throw InvalidInput("reflection-check: t must be positive");
    ctx.config["t"] = t;
    ctx.config["mesh"] = mesh;
    ctx.config["samples"] = samples;
    ctx.config["seed"] = o.seed;
    ctx.config["threads"] = threads;
    ctx.config["out"] = ctx.dir.string();

    const double scale = std::sqrt(t);
    double min_density = std::numeric_limits<double>::infinity();
    const double hi = 9.0 * scale;
    const double total = box_mass(t, 0.0, hi, 0.0, hi, -hi, hi, 160, 160, 96, min_density);

    // Coarse histogram over [0, 4 sqrt(t)]^2 x [-4 sqrt(t), 4 sqrt(t)].
    constexpr std::size_t kBins = 8;
    const double amax = 4.0 * scale;
    const double astep = amax / kBins, xstep = 2.0 * amax / kBins;
    std::vector<double> expected(kBins * kBins * kBins, 0.0);
    for (std::size_t ia = 0; ia < kBins; ++ia)
        for (std::size_t ib = 0; ib < kBins; ++ib)
            for (std::size_t ix = 0; ix < kBins; ++ix)
                expected[(ia * kBins + ib) * kBins + ix] =
                    box_mass(t, ia * astep, (ia + 1) * astep, ib * astep, (ib + 1) * astep,
                             -amax + ix * xstep, -amax + (ix + 1) * xstep, 12, 12, 16,
                             min_density);

    const std::size_t shards = std::min<std::size_t>(samples, 64);
    std::vector<std::vector<std::size_t>> counts(shards,
                                                 std::vector<std::size_t>(expected.size(), 0));
    const RngState base(o.seed);
    parallel_shards(shards, threads, [&](std::size_t s) {
        RngState rng = base.substream(s);
        const std::size_t lo = samples * s / shards, hi_i = samples * (s + 1) / shards;
        for (std::size_t i = lo; i < hi_i; ++i) {
            const PathExtremes ex = sample_path_extremes(t, mesh, rng);
            if (ex.sup >= amax || ex.neg_inf >= amax) continue;
            if (ex.end <= -amax || ex.end >= amax) continue;
            const auto ia = static_cast<std::size_t>(ex.sup / astep);
            const auto ib = static_cast<std::size_t>(ex.neg_inf / astep);
            const auto ix = static_cast<std::size_t>((ex.end + amax) / xstep);
            counts[s][(ia * kBins + ib) * kBins + ix] += 1;
        }
    });
    std::vector<std::size_t> pooled(expected.size(), 0);
    for (const auto& shard : counts)
        for (std::size_t j = 0; j < pooled.size(); ++j) pooled[j] += shard[j];

    CsvWriter bins(ctx.table("bins"));
    bins.row({"a_lo", "a_hi", "b_lo", "b_hi", "x_lo", "x_hi", "expected", "observed", "z"});
    const double nn = static_cast<double>(samples);
    std::size_t within_all = 0, within_big = 0, big = 0;
    double max_z_big = 0.0;
    for (std::size_t ia = 0; ia < kBins; ++ia)
        for (std::size_t ib = 0; ib < kBins; ++ib)
            for (std::size_t ix = 0; ix < kBins; ++ix) {
                const std::size_t idx = (ia * kBins + ib) * kBins + ix;
                const double p = std::min(std::max(expected[idx], 0.0), 1.0);
                const double obs = static_cast<double>(pooled[idx]) / nn;
                const double se = std::sqrt(std::max(p * (1.0 - p), 1e-300) / nn);
                const double z = std::abs(obs - p) / se;
                if (z <= 3.0) ++within_all;
                if (p >= 10.0 / nn) {
                    ++big;
                    if (z <= 3.0) ++within_big;
                    max_z_big = std::max(max_z_big, z);
                }
                bins.row({format_double(ia * astep), format_double((ia + 1) * astep),
                          format_double(ib * astep), format_double((ib + 1) * astep),
                          format_double(-amax + ix * xstep),
                          format_double(-amax + (ix + 1) * xstep), format_double(expected[idx]),
                          format_double(obs), format_double(z)});
            }

    CsvWriter summary(ctx.table());
    summary.row({"quantity", "value"});
    summary.row({"total_integral", format_double(total)});
    summary.row({"min_density_seen", format_double(min_density)});
    summary.row({"samples", std::to_string(samples)});
    summary.row({"bins_total", std::to_string(expected.size())});
    summary.row({"bins_expected_ge_10_hits", std::to_string(big)});
    summary.row({"frac_within_3se_all",
                 format_double(static_cast<double>(within_all) /
                               static_cast<double>(expected.size()))});
    summary.row({"frac_within_3se_big",
                 format_double(big ? static_cast<double>(within_big) /
                                         static_cast<double>(big)
                                   : 1.0)});
    summary.row({"max_z_big", format_double(max_z_big)});
}

// --------------------------------------------------- ensemble experiments

ExperimentParams experiment_params(const Opts& o, std::size_t default_n,
                                   std::size_t default_k) {
    ExperimentParams p;
    p.n = or_count(o.n, default_n);
    p.k = or_count(o.k, default_k);
    p.t = or_real(o.t, 1.0);
    p.M = or_real(o.M, 0.0);
    p.mesh = or_count(o.mesh, 256);
    p.budget = or_count(o.budget, 100000);
    p.control_budget = o.control_budget;
    p.seed = o.seed;
    p.threads = or_count(o.threads, 1);
    p.scaling.time_scale = or_real(o.time_scale, 1.0);
    p.scaling.space_scale = or_real(o.space_scale, 1.0);
    p.constants.c = or_real(o.c, 1.0);
    p.constants.d = or_real(o.d, 1.0);
    p.constants.k = p.k;
    p.constants.t = p.t;
    return p;
}

void echo_experiment(const ExperimentParams& p, RunContext& ctx) {
    ctx.config["n"] = p.n;
    ctx.config["k"] = p.k;
    ctx.config["t"] = p.t;
    ctx.config["M"] = p.M;
    ctx.config["mesh"] = p.mesh;
    ctx.config["budget"] = p.budget;
    ctx.config["control-budget"] = p.control_budget;
    ctx.config["time-scale"] = p.scaling.time_scale;
    ctx.config["space-scale"] = p.scaling.space_scale;
    ctx.config["seed"] = p.seed;
    ctx.config["threads"] = p.threads;
    ctx.config["out"] = ctx.dir.string();
}

void run_ensemble_density(const Opts& o, RunContext& ctx) {
    ExperimentParams p = experiment_params(o, 16, 1);
    if (p.k != 1)
        throw InvalidInput("ensemble-density: the endpoint-box battery is defined for k = 1");
    const double delta = or_real(o.delta, 0.3);
    if (delta <= 0.0)
        throw InvalidInput("ensemble-density: delta must be positive");
    std::vector<double> targets =
        o.m_grid.empty() ? linspace(1.0, 6.0, 6) : parse_grid(o.m_grid);
    for (double s : targets)
        if (s <= 0.0)
            throw InvalidInput("ensemble-density: S targets must be positive");
    echo_experiment(p, ctx);
    ctx.config["delta"] = delta;
    ctx.config["m-grid"] = targets;

    std::vector<EventSpec> events;
    for (double s : targets) {
        EventSpec ev;
        ev.family = EventFamily::EndpointBox;
        const double v = std::pow(1.5 * s, 2.0 / 3.0);
        ev.lo = {v - delta};
        ev.hi = {v + delta};
        ev.probe = p.t;
        events.push_back(ev);
    }
    const DensityRatioReport report = density_ratio_experiment(events, p);

    CsvWriter w(ctx.table());
    w.row({"s_target", "box_lo", "box_hi", "nu", "nu_se", "nu_zero", "mu", "mu_se",
           "log_ratio", "log_ratio_se", "s_representative"});
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& r = report.rows[i];
        w.row({format_double(targets[i]), format_double(r.event.lo[0]),
               format_double(r.event.hi[0]), format_double(r.nu.value),
               format_double(r.nu.std_error), fmt_flag(r.nu.zero_success),
               format_double(r.mu.value), format_double(r.mu.std_error),
               format_double(r.log_ratio), format_double(r.log_ratio_se),
               format_double(r.s_of_representative)});
    }
    CsvWriter summary(ctx.table("fit"));
    summary.row({"quantity", "value"});
    summary.row({"slope", format_double(report.fit.slope)});
    summary.row({"slope_se", format_double(report.fit.slope_se)});
    summary.row({"intercept", format_double(report.fit.intercept)});
    summary.row({"r", format_double(report.fit.r)});
}

void run_ensemble_tails(const Opts& o, RunContext& ctx) {
    ExperimentParams p = experiment_params(o, 16, 1);
    const std::string kind_text = o.kind.empty() ? std::string("two-point") : o.kind;
    TailKind kind;
    if (kind_text == "one-point") kind = TailKind::OnePoint;
    else if (kind_text == "two-point") kind = TailKind::TwoPoint;
    else throw InvalidInput("ensemble-tails: kind must be one-point or two-point");
    std::vector<double> grid =
        o.m_grid.empty() ? parse_grid("0.5,1,1.5,2,2.5,3") : parse_grid(o.m_grid);
    for (double m : grid)
        if (m <= 0.0)
            throw InvalidInput("ensemble-tails: m-grid must be positive");
    echo_experiment(p, ctx);
    ctx.config["kind"] = kind_text;
    ctx.config["m-grid"] = grid;
    ctx.config["c"] = p.constants.c;
    ctx.config["d"] = p.constants.d;

    const TailReport report = tail_experiment(kind, grid, p);
    CsvWriter w(ctx.table());
    w.row({"m", "surrogate", "surrogate_se", "surrogate_zero", "control", "control_se",
           "rhs_upper", "rhs_lower", "margin", "margin_se"});
    for (const auto& r : report.rows)
        w.row({format_double(r.m), format_double(r.surrogate.value),
               format_double(r.surrogate.std_error), fmt_flag(r.surrogate.zero_success),
               format_double(r.control.value), format_double(r.control.std_error),
               format_double(r.rhs_upper), format_double(r.rhs_lower),
               format_double(r.margin), format_double(r.margin_se)});

    CsvWriter summary(ctx.table("fit"));
    summary.row({"quantity", "value"});
    summary.row({"kind", kind_text});
    if (kind == TailKind::OnePoint) {
        summary.row({"lower_tail_slope", format_double(report.lower_tail_fit.slope)});
        summary.row({"lower_tail_slope_se", format_double(report.lower_tail_fit.slope_se)});
        summary.row({"lower_tail_r", format_double(report.lower_tail_fit.r)});
    } else {
        std::vector<double> xs, ys, sig;
        for (const auto& r : report.rows)
            if (std::isfinite(r.margin) && r.margin_se > 0.0) {
                xs.push_back(r.m);
                ys.push_back(r.margin);
                sig.push_back(r.margin_se);
            }
        if (xs.size() >= 2) {
            const LineFit fit = fit_line_weighted(xs, ys, sig);
            summary.row({"margin_slope", format_double(fit.slope)});
            summary.row({"margin_slope_se", format_double(fit.slope_se)});
            summary.row({"margin_r", format_double(fit.r)});
        }
    }
}

void run_stationary_counterexample(const Opts& o, RunContext& ctx) {
    ExperimentParams p = experiment_params(o, 16, 1);
    std::vector<double> grid =
        o.m_grid.empty() ? parse_grid("0.5,1,1.5,2,2.5,3,3.5") : parse_grid(o.m_grid);
    for (double m : grid)
        if (m <= 0.0)
            throw InvalidInput("stationary-counterexample: m-grid must be positive");
    echo_experiment(p, ctx);
    ctx.config["m-grid"] = grid;

    const CounterexampleReport report = stationary_counterexample_experiment(grid, p);
    CsvWriter w(ctx.table());
    w.row({"m", "stationary", "stationary_se", "parabolic", "parabolic_se", "mu", "mu_se",
           "log_ratio_stationary", "log_ratio_stationary_se", "log_ratio_parabolic",
           "log_ratio_parabolic_se"});
    for (const auto& r : report.rows)
        w.row({format_double(r.m), format_double(r.stationary.value),
               format_double(r.stationary.std_error), format_double(r.parabolic.value),
               format_double(r.parabolic.std_error), format_double(r.mu.value),
               format_double(r.mu.std_error), format_double(r.log_ratio_stationary),
               format_double(r.log_ratio_stationary_se), format_double(r.log_ratio_parabolic),
               format_double(r.log_ratio_parabolic_se)});

    CsvWriter summary(ctx.table("fit"));
    summary.row({"quantity", "value"});
    auto z_of = [](const LineFit& f) {
        return f.slope_se > 0.0 ? f.slope / f.slope_se : 0.0;
    };
    summary.row({"stationary_slope", format_double(report.stationary_fit.slope)});
    summary.row({"stationary_slope_se", format_double(report.stationary_fit.slope_se)});
    summary.row({"stationary_slope_z", format_double(z_of(report.stationary_fit))});
    summary.row({"parabolic_slope", format_double(report.parabolic_fit.slope)});
    summary.row({"parabolic_slope_se", format_double(report.parabolic_fit.slope_se)});
    summary.row({"parabolic_slope_z", format_double(z_of(report.parabolic_fit))});
}

// ----------------------------------------------------------------- driver

int dispatch(const std::string& name, const Opts& o) {
    fs::path dir = o.out;
    if (dir.empty()) {
        const char* env = std::getenv("AIRYLAB_OUT");
        dir = (env && *env) ? fs::path(env) : fs::path(".");
    }
    fs::create_directories(dir);

    RunContext ctx;
    ctx.dir = dir;
    ctx.subcommand = name;
    ctx.tag = name;
    std::replace(ctx.tag.begin(), ctx.tag.end(), '-', '_');
    ctx.seed = o.seed;

    const auto t0 = std::chrono::steady_clock::now();
    if (name == "alpha-k") run_alpha_k(o, ctx);
    else if (name == "opt-identity") run_opt_identity(o, ctx);
    else if (name == "airy-table") run_airy_table(o, ctx);
    else if (name == "tetris-eval") run_tetris_eval(o, ctx);
    else if (name == "energy-table") run_energy_table(o, ctx);
    else if (name == "bridge-check") run_bridge_check(o, ctx);
    else if (name == "km-vs-mc") run_km_vs_mc(o, ctx);
    else if (name == "reflection-check") run_reflection_check(o, ctx);
    else if (name == "ensemble-density") run_ensemble_density(o, ctx);
    else if (name == "ensemble-tails") run_ensemble_tails(o, ctx);
    else if (name == "stationary-counterexample") run_stationary_counterexample(o, ctx);
    else throw InvalidInput("unknown subcommand '" + name + "'");
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - t0;

    // Wall time is manifest metadata only; nothing in the tables depends on it.
    ctx.finish(wall.count());
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    Opts o;

    CLI::App app{"numerical laboratory for nonintersecting bridge ensembles"};
    app.require_subcommand(1);

    auto add_opt = [&](CLI::App* sub, const std::string& key) {
        if (key == "k") sub->add_option("--k", o.k, "number of lines");
        else if (key == "n") sub->add_option("--n", o.n, "ensemble size");
        else if (key == "mesh") sub->add_option("--mesh", o.mesh, "mesh intervals");
        else if (key == "samples") sub->add_option("--samples", o.samples, "Monte Carlo draws");
        else if (key == "budget") sub->add_option("--budget", o.budget, "ensemble draws");
        else if (key == "control-budget")
            sub->add_option("--control-budget", o.control_budget,
                            "free-measure draws (0 = 4x budget)");
        else if (key == "threads") sub->add_option("--threads", o.threads, "worker threads");
        else if (key == "t") sub->add_option("--t", o.t, "time horizon");
        else if (key == "M") sub->add_option("--M", o.M, "bridge half-span (0 = n^{1/3})");
        else if (key == "beta") sub->add_option("--beta", o.beta, "constraint radius");
        else if (key == "delta") sub->add_option("--delta", o.delta, "event box half-width");
        else if (key == "c") sub->add_option("--c", o.c, "upper-tail constant");
        else if (key == "d") sub->add_option("--d", o.d, "lower-tail constant");
        else if (key == "time-scale")
            sub->add_option("--time-scale", o.time_scale, "window time unit");
        else if (key == "space-scale")
            sub->add_option("--space-scale", o.space_scale, "fluctuation unit");
        else if (key == "seed") sub->add_option("--seed", o.seed, "RNG seed");
        else if (key == "out") sub->add_option("--out", o.out, "output directory");
        else if (key == "input") sub->add_option("--input", o.input, "input CSV path");
        else if (key == "kind") sub->add_option("--kind", o.kind, "one-point or two-point");
        else if (key == "m-grid")
            sub->add_option("--m-grid", o.m_grid, "comma-separated grid values");
    };
    auto make_sub = [&](const std::string& name, const std::string& desc,
                        const std::vector<std::string>& keys) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", o.config_path, "JSON config (flags override)");
        for (const auto& key : keys) add_opt(sub, key);
        return sub;
    };

    make_sub("tetris-eval", "stack a tuple and report shifts and S", {"input", "out"});
    make_sub("energy-table", "closed-form vs variational parabola energies",
             {"mesh", "samples", "seed", "out"});
    make_sub("airy-table", "Ai, Ai', and the diagonal kernel on a grid", {"m-grid", "out"});
    make_sub("bridge-check", "bridge sampler moments vs exact covariance",
             {"t", "mesh", "samples", "seed", "threads", "out"});
    make_sub("km-vs-mc", "determinant vs Monte Carlo nonintersection probability",
             {"k", "t", "mesh", "samples", "seed", "threads", "out"});
    make_sub("reflection-check", "two-barrier density: integral and histogram test",
             {"t", "mesh", "samples", "seed", "threads", "out"});
    make_sub("alpha-k", "sphere maximum of Theta", {"k", "out"});
    make_sub("opt-identity", "max of g over the beta-ball vs beta^{3/2} alpha_k",
             {"k", "beta", "out"});
    make_sub("ensemble-density", "endpoint-box density ratios vs exp(-S)",
             {"n", "k", "t", "M", "mesh", "budget", "control-budget", "m-grid", "delta",
              "time-scale", "space-scale", "seed", "threads", "out"});
    make_sub("ensemble-tails", "surrogate tail curves vs closed-form bounds",
             {"kind", "n", "k", "t", "M", "mesh", "budget", "control-budget", "m-grid", "c",
              "d", "time-scale", "space-scale", "seed", "threads", "out"});
    make_sub("stationary-counterexample", "stationary vs parabolic log-ratio growth",
             {"n", "t", "M", "mesh", "budget", "control-budget", "m-grid", "seed", "threads",
              "out"});

    // Pre-scan for --config so file values load before flags override them.
    try {
        for (std::size_t i = 0; i < args.size(); ++i) {
            const std::string& a = args[i];
            if (a == "--config" && i + 1 < args.size())
                apply_config_file(args[i + 1], o);
            else if (a.rfind("--config=", 0) == 0)
                apply_config_file(a.substr(9), o);
        }
    } catch (const InvalidInput& e) {
        std::cerr << "error [usage] " << e.what() << "\n";
        return kExitUsage;
    }

    std::vector<const char*> argv;
    argv.push_back("airylab");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        return dispatch(app.get_subcommands().at(0)->get_name(), o);
    } catch (const InvalidInput& e) {
        std::cerr << "error [usage] " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error [numeric] " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error [numeric] " << e.what() << "\n";
        return kExitNumeric;
    }
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

} // namespace airylab
