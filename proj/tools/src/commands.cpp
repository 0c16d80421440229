#include "corrdef_cli/commands.hpp"

#include "corrdef/consistency.hpp"
#include "corrdef/ctmc.hpp"
#include "corrdef/default_model.hpp"
#include "corrdef/errors.hpp"
#include "corrdef/io.hpp"
#include "corrdef/reduced_models.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <functional>
#include <sstream>

namespace corrdef::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Configuration plumbing

struct Numerics {
    double rtol = 1e-9;
    double atol = 1e-12;
    double t_min_fraction = kTMinFraction;
    int grid_points = kGridPoints;
};

struct Context {
    json config = json::object();
    fs::path base = ".";
    fs::path out;
    Numerics numerics;
    std::vector<std::string> inputs;  // contents of every input file, in read order
    std::string hash;
};

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad field '") + key + "': " + e.what());
    }
}

const json& block(const json& j, const char* key) {
    static const json empty = json::object();
    if (!j.is_object() || !j.contains(key)) return empty;
    if (!j.at(key).is_object()) throw ConfigError(std::string("'") + key + "' must be an object");
    return j.at(key);
}

Context load_context(const Invocation& inv, bool config_required) {
    Context ctx;
    if (inv.config) {
        const std::string text = io::read_text_file(*inv.config);
        try {
            ctx.config = json::parse(text);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("malformed config: ") + e.what());
        }
        if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
        ctx.base = inv.config->parent_path();
    } else if (config_required) {
        throw ConfigError("--config is required");
    }
    if (inv.seed) ctx.config["seed"] = *inv.seed;

    const json& num = block(ctx.config, "numerics");
    ctx.numerics.rtol = get_or(num, "rtol", ctx.numerics.rtol);
    ctx.numerics.atol = get_or(num, "atol", ctx.numerics.atol);
    ctx.numerics.t_min_fraction = get_or(num, "t_min_fraction", ctx.numerics.t_min_fraction);
    ctx.numerics.grid_points = get_or(num, "grid_points", ctx.numerics.grid_points);
    if (!(ctx.numerics.rtol > 0.0) || !(ctx.numerics.atol > 0.0) || !(ctx.numerics.t_min_fraction > 0.0) ||
        ctx.numerics.t_min_fraction > 1.0 || ctx.numerics.grid_points < 1) {
        throw ConfigError("numerics: tolerances and t_min_fraction must be positive, grid_points >= 1");
    }

    if (inv.out_dir) {
        ctx.out = *inv.out_dir;
    } else {
        const std::string dir = get_or<std::string>(block(ctx.config, "io"), "output_dir", "");
        if (dir.empty()) throw ConfigError("no output directory (use --out or io.output_dir)");
        ctx.out = ctx.base / dir;
    }
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec || !fs::is_directory(ctx.out)) throw ConfigError("output directory not writable: " + ctx.out.string());
    return ctx;
}

fs::path resolve(const Context& ctx, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : ctx.base / path;
}

std::string read_input(Context& ctx, const fs::path& path) {
    std::string text = io::read_text_file(path);
    ctx.inputs.push_back(text);
    return text;
}

// The hash covers the effective configuration (minus the output location)
// and the bytes of every input file.
void finalize_hash(Context& ctx, const char* command) {
    json canonical = ctx.config;
    if (canonical.contains("io") && canonical["io"].is_object()) canonical["io"].erase("output_dir");
    std::string material = std::string(command) + "\n" + canonical.dump();
    for (const std::string& in : ctx.inputs) material += "\n" + in;
    ctx.hash = io::fnv1a_hex(material);
}

std::uint64_t require_seed(const Context& ctx, const json& section) {
    if (ctx.config.contains("seed")) return get_or<std::uint64_t>(ctx.config, "seed", 0);
    if (section.contains("seed")) return get_or<std::uint64_t>(section, "seed", 0);
    throw ConfigError("a seed is required (config 'seed' or --seed)");
}

json meta(const Context& ctx) {
    return {{"tool", "corrdef"}, {"version", std::string(io::version())}, {"config_hash", ctx.hash}};
}

void write_json(const Context& ctx, const char* name, json body) {
    body["meta"] = meta(ctx);
    io::write_text_file(ctx.out / name, body.dump(2) + "\n");
}

class Csv {
public:
    Csv(const Context& ctx, std::initializer_list<const char*> columns) {
        text_ = io::header_block(ctx.hash);
        bool first = true;
        for (const char* c : columns) {
            if (!first) text_ += ',';
            text_ += c;
            first = false;
        }
        text_ += '\n';
    }

    template <class... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((append(fields, first)), ...);
        text_ += '\n';
    }

    void save(const Context& ctx, const char* name) const { io::write_text_file(ctx.out / name, text_); }

private:
    void sep(bool& first) {
        if (!first) text_ += ',';
        first = false;
    }
    void append(double x, bool& first) {
        sep(first);
        text_ += io::format_number(x);
    }
    void append(int x, bool& first) {
        sep(first);
        text_ += std::to_string(x);
    }
    void append(std::uint32_t x, bool& first) {
        sep(first);
        text_ += std::to_string(x);
    }
    void append(std::uint64_t x, bool& first) {
        sep(first);
        text_ += std::to_string(x);
    }
    void append(const std::string& s, bool& first) {
        sep(first);
        text_ += s;
    }

    std::string text_;
};

Graph graph_from_json(const json& j) {
    const int n = get_or<int>(j, "n_vertices", 0);
    std::vector<std::pair<int, int>> edges;
    if (j.contains("edges")) {
        for (const json& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw ConfigError("edge must be a two-element array");
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
    }
    std::optional<Bipartition> parts;
    if (j.contains("bipartition") && !j.at("bipartition").is_null()) {
        const json& b = j.at("bipartition");
        parts = Bipartition{get_or<std::vector<int>>(b, "hat", {}), get_or<std::vector<int>>(b, "check", {})};
    }
    return Graph(n, edges, parts);
}

std::string edge_label(int u, int v) { return std::to_string(u) + "-" + std::to_string(v); }

// ---------------------------------------------------------------------------
// model

void write_model_outputs(const Context& ctx, const ModelParams& params, const json& section) {
    const SubsetDist dist = full_distribution(params);
    Csv d(ctx, {"subset_bitmask", "probability"});
    for (std::size_t a = 0; a < dist.probs.size(); ++a) d.row(static_cast<std::uint32_t>(a), dist.probs[a]);
    d.save(ctx, "distribution.csv");

    const IsingParams ising = to_ising(params);
    json edges = json::array();
    const auto graph_edges = params.graph.edges();
    for (std::size_t i = 0; i < graph_edges.size(); ++i) {
        edges.push_back({{"edge", {graph_edges[i].u, graph_edges[i].v}}, {"delta", ising.delta[i]}});
    }
    write_json(ctx, "ising.json", {{"gamma", ising.gamma}, {"delta", edges}, {"log_norm", ising.log_norm}});

    const InteractionCoeffs coeffs = extract_interactions(dist);
    Csv c(ctx, {"subset_bitmask", "order", "coefficient"});
    for (std::size_t a = 1; a < coeffs.coeffs.size(); ++a) {
        c.row(static_cast<std::uint32_t>(a), std::popcount(a), coeffs.coeffs[a]);
    }
    c.save(ctx, "interactions.csv");

    const Moments mom = moments(dist, params.graph);
    write_json(ctx, "model_summary.json",
               {{"n_vertices", params.n_vertices()},
                {"log_partition", dist.log_partition},
                {"family_membership_residual", family_membership_residual(coeffs, params.graph)},
                {"vertex_moments", mom.vertex},
                {"pair_moments", mom.pair}});

    const auto draws = get_or<std::uint64_t>(section, "samples", 0);
    if (draws > 0) {
        const std::uint64_t seed = require_seed(ctx, section);
        const auto sample = exact_sample(params, draws, seed);
        Csv s(ctx, {"draw", "subset_bitmask"});
        for (std::size_t i = 0; i < sample.size(); ++i) s.row(static_cast<std::uint64_t>(i), sample[i]);
        s.save(ctx, "samples.csv");
    }
}

int model_impl(const Invocation& inv, std::ostream& log) {
    Context ctx = load_context(inv, true);
    const json& section = block(ctx.config, "model");
    const json& iob = block(ctx.config, "io");
    if (section.contains("samples")) require_seed(ctx, section);

    if (inv.fit) {
        const std::string path = get_or<std::string>(iob, "targets", get_or<std::string>(section, "targets", ""));
        if (path.empty()) throw ConfigError("--fit needs io.targets");
        json targets;
        try {
            targets = json::parse(read_input(ctx, resolve(ctx, path)));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("malformed targets file: ") + e.what());
        }
        finalize_hash(ctx, "model --fit");
        Graph graph = graph_from_json(targets);
        const auto vertex = get_or<std::vector<double>>(targets, "vertex_targets", {});
        std::vector<double> pair(graph.n_edges(), std::numeric_limits<double>::quiet_NaN());
        if (targets.contains("pair_targets")) {
            for (const json& e : targets.at("pair_targets")) {
                const auto uv = get_or<std::vector<int>>(e, "edge", {});
                if (uv.size() != 2) throw ConfigError("pair target edge must have two vertices");
                const auto idx = graph.edge_index(uv[0], uv[1]);
                if (!idx) throw ConfigError("pair target for a non-edge");
                pair[*idx] = get_or<double>(e, "value", std::numeric_limits<double>::quiet_NaN());
            }
        }
        for (double p : pair) {
            if (std::isnan(p)) throw ConfigError("every edge needs a pair target");
        }
        FitOptions opts;
        opts.tolerance = get_or(section, "fit_tolerance", opts.tolerance);
        opts.damping = get_or(section, "damping", opts.damping);
        opts.max_iter = get_or(section, "max_iter", opts.max_iter);
        const ModelParams fitted = fit_moments(graph, vertex, pair, opts);
        json doc = json::parse(io::model_to_json(fitted));
        write_json(ctx, "fitted_model.json", doc);
        write_model_outputs(ctx, fitted, section);
        log << "fitted model written to " << (ctx.out / "fitted_model.json").string() << "\n";
        return kSuccess;
    }

    const std::string path = get_or<std::string>(iob, "model", get_or<std::string>(section, "model_file", ""));
    if (path.empty()) throw ConfigError("model command needs io.model");
    const ModelParams params = io::parse_model(read_input(ctx, resolve(ctx, path)));
    finalize_hash(ctx, "model");
    write_model_outputs(ctx, params, section);
    log << "model outputs written to " << ctx.out.string() << "\n";
    return kSuccess;
}

// ---------------------------------------------------------------------------
// dynamics

std::vector<double> parse_alpha_file(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed alpha file: ") + e.what());
    }
    if (j.is_object()) j = j.value("alpha", json::array());
    try {
        return j.get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("alpha file must hold an array of numbers: ") + e.what());
    }
}

int dynamics_impl(const Invocation& inv, std::ostream& log) {
    const bool independent_cli = inv.independent_alpha.has_value();
    Context ctx = load_context(inv, !independent_cli);
    const json& section = block(ctx.config, "dynamics");

    double horizon = get_or(section, "horizon", 1.0);
    std::optional<MonotoneGenerator> gen;
    if (independent_cli) {
        const auto alpha = parse_alpha_file(read_input(ctx, *inv.independent_alpha));
        horizon = inv.independent_horizon.value_or(horizon);
        ctx.config["dynamics"]["independent"] = {{"alpha", alpha}, {"horizon", horizon}};
        if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
        gen = independent_generator(alpha, horizon);
    } else if (section.contains("independent")) {
        const json& ind = section.at("independent");
        horizon = get_or(ind, "horizon", horizon);
        if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
        gen = independent_generator(get_or<std::vector<double>>(ind, "alpha", {}), horizon);
    } else {
        const std::string path =
            get_or<std::string>(block(ctx.config, "io"), "generator", get_or<std::string>(section, "generator", ""));
        if (path.empty()) throw ConfigError("dynamics needs io.generator, dynamics.independent or --independent");
        gen = io::parse_generator(read_input(ctx, resolve(ctx, path)));
    }
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    const int n = gen->n_vertices();
    const std::uint64_t paths = get_or<std::uint64_t>(section, "paths", 0);
    const std::uint64_t seed = paths > 0 ? require_seed(ctx, section) : 0;
    finalize_hash(ctx, "dynamics");

    const Graph graph = section.contains("graph") ? [&] {
        json g = section.at("graph");
        g["n_vertices"] = n;
        return graph_from_json(g);
    }()
                                                  : Graph::complete(n);
    const std::vector<double> grid = residual_grid(horizon, ctx.numerics.grid_points, ctx.numerics.t_min_fraction);
    ForwardOptions fopts;
    fopts.rtol = ctx.numerics.rtol;
    fopts.atol = ctx.numerics.atol;
    // Curves first: zero single rates are a config error, not a numeric one.
    CurveOptions copts;
    copts.rtol = ctx.numerics.rtol;
    copts.atol = ctx.numerics.atol;
    const ParamCurves curves = curves_from_rates(*gen, graph, horizon, copts);
    const Trajectory traj = forward_solve(*gen, grid, fopts);

    Csv t(ctx, {"t", "subset_bitmask", "probability"});
    double empty_gap = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& p = traj.distributions[i].probs;
        for (std::size_t a = 0; a < p.size(); ++a) t.row(grid[i], static_cast<std::uint32_t>(a), p[a]);
        empty_gap = std::max(empty_gap, std::abs(p[0] - std::exp(-gen->r_empty() * grid[i])));
    }
    t.save(ctx, "trajectory.csv");

    Csv m(ctx, {"t", "membership_residual"});
    double membership_max = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = family_membership_residual(traj.distributions[i], graph);
        membership_max = std::max(membership_max, r);
        m.row(grid[i], r);
    }
    m.save(ctx, "membership.csv");

    Csv c(ctx, {"t", "vertex_or_edge", "alpha_or_beta", "value", "derivative"});
    Csv r(ctx, {"t", "subset_bitmask", "residual"});
    std::vector<double> residual_by_order(static_cast<std::size_t>(n + 1), 0.0);
    for (double time : grid) {
        const ParamCurves::Snapshot s = curves.at(time);
        for (int u = 0; u < n; ++u) {
            const AlphaValue& a = s.alpha[static_cast<std::size_t>(u)];
            c.row(time, std::to_string(u), std::string("alpha"), a.alpha, a.alpha_prime);
        }
        for (const Edge& e : graph.edges()) {
            c.row(time, edge_label(e.u, e.v), std::string("beta"), s.beta_at(e.u, e.v), s.beta_prime_at(e.u, e.v));
        }
        const std::vector<double> res = master_residual(*gen, curves, time);
        for (std::size_t b = 1; b < res.size(); ++b) {
            r.row(time, static_cast<std::uint32_t>(b), res[b]);
            auto& slot = residual_by_order[static_cast<std::size_t>(std::popcount(b))];
            slot = std::max(slot, std::abs(res[b]));
        }
    }
    c.save(ctx, "curves.csv");
    r.save(ctx, "master_residual.csv");

    json summary = {{"n_vertices", n},
                    {"horizon", horizon},
                    {"grid_points", grid.size()},
                    {"max_membership_residual", membership_max},
                    {"max_master_residual_by_order", residual_by_order},
                    {"max_empty_set_gap", empty_gap},
                    {"renormalized_steps",
                     std::count(traj.renormalized.begin(), traj.renormalized.end(), true)}};

    if (paths > 0) {
        const PathEnsemble ens = sample_paths(*gen, horizon, paths, seed);
        Csv e(ctx, {"subset_bitmask", "empirical_probability", "exact_probability"});
        const auto& exact = traj.distributions.back().probs;
        for (std::size_t a = 0; a < exact.size(); ++a) {
            e.row(static_cast<std::uint32_t>(a), ens.terminal_distribution[a], exact[a]);
        }
        e.save(ctx, "terminal_empirical.csv");
        summary["paths"] = paths;
    }
    write_json(ctx, "dynamics_summary.json", summary);
    log << "max membership residual " << io::format_number(membership_max) << "\n";
    return kSuccess;
}

// ---------------------------------------------------------------------------
// search

ModelSpec parse_model_spec(const json& s) {
    const std::string kind = get_or<std::string>(s, "model", "");
    ModelSpec spec;
    if (kind == "I") {
        spec.kind = ReducedModel::I;
    } else if (kind == "II") {
        spec.kind = ReducedModel::II;
    } else if (kind == "III") {
        spec.kind = ReducedModel::III;
    } else {
        throw ConfigError("search.model must be \"I\", \"II\" or \"III\"");
    }
    spec.N = get_or(s, "N", 0);
    spec.M = get_or(s, "M", 0);
    if (spec.kind == ReducedModel::I && spec.N < 2) throw ConfigError("Model I needs N >= 2");
    if (spec.kind != ReducedModel::I && (spec.M < 1 || spec.N < 1)) throw ConfigError("Models II and III need M, N >= 1");
    return spec;
}

json rates_json(const std::variant<LumpedRatesI, LumpedRatesBi>& rates) {
    if (const auto* l = std::get_if<LumpedRatesI>(&rates)) return {{"lambda", l->lambda}};
    const auto& b = std::get<LumpedRatesBi>(rates);
    json hat = json::array();
    json check = json::array();
    for (int m = 0; m <= b.M(); ++m) {
        json hrow = json::array();
        json crow = json::array();
        for (int n = 0; n <= b.N(); ++n) {
            hrow.push_back(b.hat(m, n));
            crow.push_back(b.check(m, n));
        }
        hat.push_back(hrow);
        check.push_back(crow);
    }
    return {{"hat", hat}, {"check", check}, {"r", b.r()}};
}

json report_iii(const CoeffReportIII& rep) {
    return {{"conditions_hold", rep.conditions_hold},
            {"max_condition_violation", rep.max_condition_violation},
            {"A", rep.A},
            {"B", rep.B},
            {"C", rep.C},
            {"D", rep.D},
            {"diagonal_residuals", rep.diagonal_residuals},
            {"satisfied_points", rep.satisfied_points},
            {"demanded_points", rep.demanded_points},
            {"intersection_bound", rep.intersection_bound},
            {"inconsistent", rep.inconsistent}};
}

json coefficient_report(const ModelSpec& spec, const SearchTargets& targets, const SearchResult& result,
                        double beta_star, double horizon) {
    json rep = {{"beta_star", beta_star}};
    if (spec.kind == ReducedModel::I) {
        auto rows = [&](const LumpedRatesI& l) {
            json out = json::array();
            for (const CoeffRowI& r : coeff_check_I(l, beta_star)) {
                out.push_back({{"k", r.k}, {"actual", r.actual}, {"linear", r.linear},
                               {"exponential", r.exponential}, {"mismatch", r.mismatch}});
            }
            return out;
        };
        rep["best_rates"] = rows(std::get<LumpedRatesI>(result.best_rates));
        rep["independent_rates"] =
            rows(std::get<LumpedRatesI>(independent_lumped_rates(spec, targets, horizon)));
    } else if (spec.kind == ReducedModel::II) {
        const CoeffDetailII d = coeff_check_II_details(spec.M, spec.N, beta_star);
        const ForcedSolveII forced = solve_forced_system_II(spec.M, spec.N, beta_star);
        rep["coeff_check_II"] = d.scalar;
        rep["check10_from_11"] = d.check10_from_11;
        rep["check10_from_20"] = d.check10_from_20;
        rep["swapped_classes"] = d.swapped_classes;
        rep["forced_system_residual"] = forced.max_equation_residual;
    } else {
        const auto& best = std::get<LumpedRatesBi>(result.best_rates);
        const LumpedRatesBi forced = forced_table_III(spec.M, spec.N, beta_star, best.hat(0, 0), best.check(0, 0));
        rep["forced_table"] = report_iii(coeff_check_III(forced, beta_star));
        rep["best_rates"] = report_iii(coeff_check_III(best, beta_star));
    }
    return rep;
}

int search_impl(const Invocation& inv, std::ostream& log) {
    Context ctx = load_context(inv, true);
    const json& s = block(ctx.config, "search");
    const ModelSpec spec = parse_model_spec(s);
    const json& tj = block(s, "targets");
    SearchTargets targets;
    targets.alpha = get_or(tj, "alpha", 0.0);
    targets.alpha_hat = get_or(tj, "alpha_hat", 0.0);
    targets.alpha_check = get_or(tj, "alpha_check", 0.0);
    targets.beta = get_or(tj, "beta", 0.0);

    SearchConfig cfg;
    cfg.restarts = get_or(s, "restarts", cfg.restarts);
    cfg.max_iter = get_or(s, "max_iter", cfg.max_iter);
    cfg.lm_iter = get_or(s, "lm_iter", cfg.lm_iter);
    cfg.penalty_weight = get_or(s, "penalty_weight", cfg.penalty_weight);
    cfg.target_tolerance = get_or(s, "target_tolerance", cfg.target_tolerance);
    cfg.workers = get_or(s, "workers", cfg.workers);
    cfg.trace_every = get_or(s, "trace_every", cfg.trace_every);
    cfg.horizon = get_or(s, "horizon", cfg.horizon);
    cfg.grid_points = ctx.numerics.grid_points;
    cfg.t_min_fraction = ctx.numerics.t_min_fraction;
    cfg.curve.rtol = ctx.numerics.rtol;
    cfg.curve.atol = ctx.numerics.atol;
    cfg.seed = require_seed(ctx, s);
    const double beta_star = get_or(s, "beta_star", targets.beta);
    // Worker count never changes results, so it stays out of the hash.
    json hashed = ctx.config;
    if (hashed.contains("search")) hashed["search"].erase("workers");
    std::swap(ctx.config, hashed);
    finalize_hash(ctx, "search");
    std::swap(ctx.config, hashed);

    const SearchResult result = [&] {
        try {
            return feasibility_search(spec, targets, cfg);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }();

    json restarts = json::array();
    for (const RestartSummary& r : result.restarts) {
        restarts.push_back({{"restart", r.restart},
                            {"seed", r.seed},
                            {"objective", r.objective},
                            {"residual", r.residual},
                            {"terminal_mismatch", r.terminal_mismatch}});
    }
    const char* names[] = {"I", "II", "III"};
    json doc = {{"model", {{"kind", names[static_cast<int>(spec.kind)]}, {"M", spec.M}, {"N", spec.N}}},
                {"targets",
                 {{"alpha", targets.alpha},
                  {"alpha_hat", targets.alpha_hat},
                  {"alpha_check", targets.alpha_check},
                  {"beta", targets.beta}}},
                {"best_rates", rates_json(result.best_rates)},
                {"best_objective", result.best_objective},
                {"best_residual", result.best_residual},
                {"terminal_mismatch", result.terminal_mismatch},
                {"residual_floor", std::isfinite(result.residual_floor) ? json(result.residual_floor) : json(nullptr)},
                {"target_tolerance", cfg.target_tolerance},
                {"restarts_used", result.restarts_used},
                {"restarts", restarts}};
    write_json(ctx, "search_result.json", doc);

    Csv trace(ctx, {"restart", "iteration", "objective", "terminal_mismatch", "residual_floor"});
    for (const TraceRow& row : result.trace) {
        trace.row(row.restart, row.iteration, row.objective, row.terminal_mismatch, row.residual);
    }
    trace.save(ctx, "restarts.csv");

    write_json(ctx, "coefficient_report.json", coefficient_report(spec, targets, result, beta_star, cfg.horizon));
    log << "residual floor " << io::format_number(result.residual_floor) << "\n";
    return kSuccess;
}

int guarded(const std::function<int()>& body, std::ostream& log) {
    try {
        return body();
    } catch (const InfeasibleTargets& e) {
        log << "infeasible input: " << e.what() << "\n";
        return kInfeasibleInput;
    } catch (const ConvergenceFailure& e) {
        log << "numeric failure: " << e.what() << " (residual " << io::format_number(e.residual()) << ")\n";
        return kNumericFailure;
    } catch (const IntegrationFailure& e) {
        log << "numeric failure: " << e.what() << "\n";
        return kNumericFailure;
    } catch (const std::domain_error& e) {
        log << "numeric failure: " << e.what() << "\n";
        return kNumericFailure;
    } catch (const json::exception& e) {
        log << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::logic_error& e) {
        // ConfigError, invalid_argument, out_of_range, CapacityExceeded
        log << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        log << "numeric failure: " << e.what() << "\n";
        return kNumericFailure;
    }
}

}  // namespace

int run_model(const Invocation& inv, std::ostream& log) {
    return guarded([&] { return model_impl(inv, log); }, log);
}

int run_dynamics(const Invocation& inv, std::ostream& log) {
    return guarded([&] { return dynamics_impl(inv, log); }, log);
}

int run_search(const Invocation& inv, std::ostream& log) {
    return guarded([&] { return search_impl(inv, log); }, log);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Correlated-default models, monotone default dynamics and consistency checks", "corrdef"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(io::version()));

    Invocation inv;
    std::string config;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::vector<std::string> independent;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON experiment config");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed overriding the config");
    };
    CLI::App* model = app.add_subcommand("model", "distribution, Ising form and interactions of a model file");
    common(model);
    model->add_flag("--fit", inv.fit, "fit (alpha, beta) to moment targets first");
    CLI::App* dynamics = app.add_subcommand("dynamics", "transient law, curves and consistency residuals");
    common(dynamics);
    dynamics->add_option("--independent", independent, "alpha file and horizon T")->expected(2);
    CLI::App* search = app.add_subcommand("search", "feasibility search for the reduced models");
    common(search);

    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        std::ostringstream o;
        std::ostringstream ee;
        const int code = app.exit(e, o, ee);
        out << o.str();
        err << ee.str();
        return code == 0 ? kSuccess : kConfigError;
    }

    auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
    CLI::App* active = app.get_subcommands().front();
    if (given(active, "--config")) inv.config = config;
    if (given(active, "--out")) inv.out_dir = out_dir;
    if (given(active, "--seed")) inv.seed = seed;
    if (active == dynamics && !independent.empty()) {
        inv.independent_alpha = independent[0];
        try {
            std::size_t used = 0;
            inv.independent_horizon = std::stod(independent[1], &used);
            if (used != independent[1].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            err << "--independent: T must be a number\n";
            return kConfigError;
        }
    }

    if (active == model) return run_model(inv, err);
    if (active == dynamics) return run_dynamics(inv, err);
    return run_search(inv, err);
}

}  // namespace corrdef::cli
