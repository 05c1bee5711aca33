#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "config.hpp"
#include "envelope.hpp"
#include "game.hpp"
#include "martingale.hpp"
#include "strategy.hpp"
#include "value.hpp"

namespace vexgame {

struct RunOutcome {
    nlohmann::ordered_json report;
    int exit_code = 0;  // 0 all checks pass, 1 at least one check failed
};

namespace detail {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct CheckList {
    nlohmann::ordered_json items = nlohmann::ordered_json::array();
    bool all_pass = true;

    void add(const std::string& name, bool pass, nlohmann::ordered_json details) {
        nlohmann::ordered_json c;
        c["name"] = name;
        c["pass"] = pass;
        c["details"] = std::move(details);
        items.push_back(std::move(c));
        all_pass = all_pass && pass;
    }
};

inline nlohmann::ordered_json point_json(const SimplexPoint& p) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (int i = 0; i < p.dim; ++i) a.push_back(p[i]);
    return a;
}

inline double auto_dual_box(const RunConfig& cfg) {
    if (cfg.dual_box > 0.0) return cfg.dual_box;
    return hamiltonian_sup(cfg.spec) * (cfg.spec.horizon - cfg.t0) + 1.0;
}

inline double auto_h_tolerance(const RunConfig& cfg) {
    if (cfg.h_tolerance_c > 0.0) return cfg.h_tolerance_c;
    return 5.0 * hamiltonian_lipschitz(cfg.spec);
}

/// Slack of the backward step before convexification; nonnegative up to
/// roundoff everywhere by construction.
inline double min_time_slack(const ValueTable& vt) {
    double worst = 0.0;
    int nodes = vt.grid.node_count();
    double tau = vt.tg.tau();
    for (int k = 0; k < vt.tg.steps; ++k)
        for (int j = 0; j < nodes; ++j)
            worst = std::min(worst, vt.value(k + 1, j) +
                                        tau * vt.htab[std::size_t(k)][std::size_t(j)] -
                                        vt.value(k, j));
    return worst;
}

struct ConvexitySummary {
    double min_residual = 0.0;
    long skipped_boundary = 0;
    long evaluated = 0;
};

inline ConvexitySummary min_convexity_residual(const ValueTable& vt) {
    ConvexitySummary cs;
    int nodes = vt.grid.node_count();
    for (int k = 0; k <= vt.tg.steps; ++k) {
        for (int j = 0; j < nodes; ++j) {
            if (vt.grid.vertex_state(j) >= 0) continue;
            bool boundary = false;
            if (vt.grid.dim() == 3) {
                const auto& lat = vt.grid.lattice(j);
                boundary = lat[0] == 0 || lat[1] == 0 || lat[2] == 0;
            }
            if (boundary) {
                ++cs.skipped_boundary;
                continue;
            }
            ObstacleResidual r = obstacle_residual(vt, std::min(k, vt.tg.steps - 1), j);
            if (k == vt.tg.steps) {
                // terminal slice: recompute on the stored zeros directly
                double best = std::numeric_limits<double>::infinity();
                for (const auto& dir : tangent_directions(vt.grid.dim())) {
                    try {
                        best = std::min(best, tangent_second_difference(
                                                  vt.grid, vt.values.back(), j, dir));
                    } catch (const std::domain_error&) {
                    }
                }
                if (best == std::numeric_limits<double>::infinity()) {
                    ++cs.skipped_boundary;
                    continue;
                }
                cs.min_residual = std::min(cs.min_residual, best);
            } else {
                if (!r.has_convexity) continue;
                cs.min_residual = std::min(cs.min_residual, r.convexity_residual);
            }
            ++cs.evaluated;
        }
    }
    return cs;
}

inline double table_scale(const ValueTable& vt) {
    double s = 1.0;
    for (const auto& row : vt.values)
        for (double v : row) s = std::max(s, std::abs(v));
    return s;
}

inline void write_value_slices(const RunConfig& cfg, const ValueTable& vt,
                               const std::filesystem::path& path,
                               nlohmann::ordered_json& echo) {
    std::vector<int> knots;
    for (double t : cfg.slice_times) {
        double k = (t - cfg.t0) / vt.tg.tau();
        int kk = int(std::lround(k));
        kk = std::max(0, std::min(vt.tg.steps, kk));
        knots.push_back(kk);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write value slices to '" + path.string() + "'");
    out << "p1,p2";
    if (vt.grid.dim() == 3) out << ",p3";
    nlohmann::ordered_json snapped = nlohmann::ordered_json::array();
    for (int kk : knots) {
        double t = vt.tg.knot(kk);
        out << ",V@" << fmt17(t);
        snapped.push_back(t);
    }
    out << "\n";
    int nodes = vt.grid.node_count();
    for (int j = 0; j < nodes; ++j) {
        SimplexPoint p = vt.grid.point(j);
        out << fmt17(p[0]) << "," << fmt17(p[1]);
        if (vt.grid.dim() == 3) out << "," << fmt17(p[2]);
        for (int kk : knots) out << "," << fmt17(vt.value(kk, j));
        out << "\n";
    }
    echo["slice_knots"] = snapped;
}

inline void append_solver_checks(const ValueTable& vt, CheckList& checks) {
    double terminal_max = 0.0;
    for (double v : vt.values.back()) terminal_max = std::max(terminal_max, std::abs(v));
    checks.add("terminal_zero", terminal_max <= 1e-15,
               {{"max_abs", terminal_max}, {"tolerance", 1e-15}});
    double scale = table_scale(vt);
    double slack = min_time_slack(vt);
    checks.add("subsolution", slack >= -1e-10 * scale,
               {{"min_slack", slack}, {"tolerance", -1e-10 * scale}});
    ConvexitySummary cs = min_convexity_residual(vt);
    nlohmann::ordered_json det = {{"min_residual", cs.min_residual},
                                  {"tolerance", -1e-8 * scale}};
    if (cs.skipped_boundary > 0) det["skipped_boundary_nodes"] = cs.skipped_boundary;
    checks.add("convexity", cs.min_residual >= -1e-8 * scale, det);
}

}  // namespace detail

/// Dispatches one configured run and assembles its report.  Throws
/// std::invalid_argument with a validation-error message for command/spec
/// mismatches; lets internal errors propagate.
inline RunOutcome run(const RunConfig& cfg) {
    using nlohmann::ordered_json;
    auto t_start = std::chrono::steady_clock::now();
    const std::string& cmd = cfg.command;
    if (cmd != "solve" && cmd != "simulate" && cmd != "match" && cmd != "diagnose")
        throw std::invalid_argument("validation-error: unknown command '" + cmd + "'");
    bool band_only = cfg.spec.kind == GameSpec::Kind::band;
    if (band_only && cmd != "simulate")
        throw std::invalid_argument("validation-error: command '" + cmd +
                                    "' needs a Hamiltonian; fixture '" + cfg.spec.name +
                                    "' only provides band curves");
    if (cmd == "match" && cfg.spec.kind != GameSpec::Kind::payoff)
        throw std::invalid_argument("validation-error: match needs stage payoffs; '" +
                                    cfg.spec.name + "' provides none");

    ordered_json rep;
    rep["command"] = cmd;
    rep["config_hash"] = cfg.config_hash;
    rep["fixture"] = cfg.spec.name;
    rep["dimension"] = cfg.spec.dimension;
    rep["horizon"] = cfg.spec.horizon;
    rep["t0"] = cfg.t0;
    rep["p0"] = detail::point_json(cfg.p0);
    rep["n"] = cfg.n;
    rep["m"] = cfg.m;
    rep["paths"] = cfg.paths;
    rep["seed"] = cfg.seed;

    detail::CheckList checks;
    TimeGrid tg{cfg.t0, cfg.spec.horizon, cfg.n};

    if (band_only) {
        BandEnsemble ens =
            sample_band_paths(cfg.spec, tg, cfg.p0[0], int(cfg.paths), cfg.seed);
        ordered_json head;
        head["p0_coordinate"] = cfg.p0[0];

        // martingale marginals at three interior knots
        ordered_json marg = ordered_json::array();
        for (int frac = 1; frac <= 3; ++frac) {
            int k = cfg.n * frac / 4;
            std::vector<double> xs(ens.paths.size());
            for (std::size_t j = 0; j < ens.paths.size(); ++j)
                xs[j] = double(ens.paths[j].x[std::size_t(k)]);
            MeanSe ms = mean_se(xs);
            bool pass = std::abs(ms.mean - cfg.p0[0]) <= 3.0 * ms.se + 1e-12;
            marg.push_back({{"knot", k},
                            {"time", tg.knot(k)},
                            {"mean", ms.mean},
                            {"se", ms.se},
                            {"pass", pass}});
            checks.add("martingale_marginal_k" + std::to_string(k), pass,
                       {{"mean", ms.mean}, {"expected", cfg.p0[0]}, {"se", ms.se}});
        }
        head["marginals"] = marg;

        // one-hop edge transition against the closed formula
        double s_time = 0.01, t_time = 0.04;
        if (s_time <= cfg.t0 || t_time > cfg.spec.horizon) {
            s_time = cfg.t0 + (cfg.spec.horizon - cfg.t0) / 8.0;
            t_time = cfg.t0 + (cfg.spec.horizon - cfg.t0) / 2.0;
        }
        int k_from = int(std::lround((s_time - cfg.t0) / tg.tau()));
        int k_to = int(std::lround((t_time - cfg.t0) / tg.tau()));
        k_from = std::max(1, std::min(k_from, cfg.n - 1));
        k_to = std::max(k_from + 1, std::min(k_to, cfg.n));
        StayEstimate stay = band_stay_probability(ens, cfg.spec, k_from, k_to);
        double h1f = cfg.spec.band_low(tg.knot(k_from));
        double h1t = cfg.spec.band_low(tg.knot(k_to));
        double h2t = cfg.spec.band_high(tg.knot(k_to));
        double q_exact = h2t - h1t > 1e-14 ? (h2t - h1f) / (h2t - h1t) : 1.0;
        head["stay_probability"] = {{"from_knot", k_from},   {"to_knot", k_to},
                                    {"from_time", tg.knot(k_from)},
                                    {"to_time", tg.knot(k_to)},
                                    {"estimate", stay.p_hat}, {"se", stay.se},
                                    {"exact", q_exact},       {"samples", stay.conditioning}};
        checks.add("stay_probability_law",
                   stay.conditioning > 0 &&
                       std::abs(stay.p_hat - q_exact) <= 3.0 * stay.se + 1e-12,
                   {{"estimate", stay.p_hat}, {"exact", q_exact}, {"se", stay.se}});

        // structure identity, only defined for the square-root band from 1/2
        try {
            StructureResidual sr = azema_structure_residual(ens, cfg.spec);
            head["structure_residual"] = {{"mean", sr.residual.mean},
                                          {"se", sr.residual.se},
                                          {"max_abs", sr.max_abs_residual}};
            head["quadratic_variation"] = {{"mean", sr.quadratic_variation.mean},
                                           {"se", sr.quadratic_variation.se}};
            checks.add("structure_residual", std::abs(sr.residual.mean) <= 0.01,
                       {{"mean_abs", std::abs(sr.residual.mean)}, {"tolerance", 0.01}});
            double qv_target = cfg.spec.horizon - cfg.t0;
            checks.add("quadratic_variation",
                       std::abs(sr.quadratic_variation.mean - qv_target) <= 0.01,
                       {{"mean", sr.quadratic_variation.mean}, {"expected", qv_target}});
        } catch (const std::invalid_argument&) {
            head["structure_residual"] = "skipped: defined for the square-root band from 1/2";
        }
        rep["simulate"] = head;
    } else {
        SimplexGrid sg = make_grid(cfg.spec.dimension, cfg.m);
        ValueTable vt = solve_backward(cfg.spec, tg, sg);
        int start = sg.snap(cfg.p0);
        double v0 = vt.value(0, start);
        rep["start_node"] = start;
        rep["snapped_p0"] = detail::point_json(sg.point(start));
        rep["value_at_start"] = v0;

        if (cmd == "solve") {
            detail::append_solver_checks(vt, checks);
            if (!cfg.out.empty()) {
                std::filesystem::path dir(cfg.out);
                std::filesystem::create_directories(dir);
                ordered_json echo;
                detail::write_value_slices(cfg, vt, dir / "value_slices.csv", echo);
                rep["value_slices"] = echo;
                rep["value_slices"]["file"] = (dir / "value_slices.csv").string();
            }
        } else if (cmd == "simulate") {
            MartingaleKernel kern = build_kernel(vt);
            const std::string& perturb = cfg.perturb;
            PathEnsemble ens = sample_paths(kern, cfg.p0, int(cfg.paths), cfg.seed);
            MeanSe mc = estimate_value_mc(ens, cfg.spec);
            ordered_json head;
            head["mc_mean"] = mc.mean;
            head["mc_se"] = mc.se;
            head["snap_distance"] = ens.snap_distance;
            checks.add("mc_within_3se", std::abs(mc.mean - v0) <= 3.0 * mc.se + 1e-9,
                       {{"mc_mean", mc.mean}, {"value", v0}, {"se", mc.se}});
            PosteriorReport post = posterior_consistency(ens, cfg.min_visits);
            head["posterior_max_deviation"] = post.max_deviation;
            head["posterior_cells"] = post.cell_count;
            checks.add("posterior_consistency", post.max_deviation <= 0.02,
                       {{"max_deviation", post.max_deviation},
                        {"cells", post.cell_count},
                        {"min_visits", post.min_visits}});
            double c = detail::auto_h_tolerance(cfg);
            NonRevealingSet nrs = non_revealing_set(vt, c);
            PathDiagnostics diag = path_diagnostics(vt, nrs, ens);
            head["h_tolerance_c"] = c;
            head["in_h_fraction"] = diag.in_h_fraction;
            head["jump_count"] = diag.jump_count;
            head["max_jump_residual"] = diag.max_jump_residual;
            head["mean_abs_jump_residual"] = diag.mean_abs_jump_residual;
            if (perturb != "none") {
                PerturbMode mode = perturb == "delay"  ? PerturbMode::delay
                                   : perturb == "eager" ? PerturbMode::eager
                                                        : PerturbMode::mix;
                MartingaleKernel pk = perturb_kernel(kern, mode, cfg.theta);
                PathEnsemble pens = sample_paths(pk, cfg.p0, int(cfg.paths), cfg.seed);
                MeanSe pmc = estimate_value_mc(pens, cfg.spec);
                ordered_json pj;
                pj["mode"] = perturb;
                if (perturb == "mix") pj["theta"] = cfg.theta;
                pj["mc_mean"] = pmc.mean;
                pj["mc_se"] = pmc.se;
                pj["margin_over_value"] = pmc.mean - v0;
                head["perturbed"] = pj;
                checks.add("perturbed_not_below_value",
                           pmc.mean >= v0 - 3.0 * pmc.se - 0.01,
                           {{"mc_mean", pmc.mean}, {"value", v0}, {"se", pmc.se}});
            }
            rep["simulate"] = head;
        } else if (cmd == "match") {
            InformedStrategy strat = synthesize_informed(vt);
            std::vector<UninformedStrategy> duels;
            if (cfg.opponent == "all" || cfg.opponent == "posterior_best_response")
                duels.push_back(posterior_best_response());
            if (cfg.opponent == "all" || cfg.opponent == "constant")
                duels.push_back(constant_opponent(cfg.constant_v));
            if (cfg.opponent == "all" || cfg.opponent == "uniform_random")
                duels.push_back(uniform_random_opponent());
            if (cfg.opponent == "all" || cfg.opponent == "i_clairvoyant")
                duels.push_back(clairvoyant_opponent());
            ordered_json arr = ordered_json::array();
            for (const auto& opp : duels) {
                MatchResult mr = play_match(strat, opp, cfg.p0, cfg.paths, cfg.seed);
                ordered_json d;
                d["opponent"] = opp.label();
                d["mean"] = mr.mean;
                d["se"] = mr.se;
                d["episodes"] = mr.episodes;
                ordered_json sc = ordered_json::array(), sm = ordered_json::array();
                for (long c : mr.state_counts) sc.push_back(c);
                for (double v : mr.state_means) sm.push_back(v);
                d["state_counts"] = sc;
                d["state_means"] = sm;
                d["running_dot_mean"] = mr.running_dot.mean;
                d["martingale_gap_mean"] = mr.martingale_gap.mean;
                d["martingale_gap_se"] = mr.martingale_gap.se;
                arr.push_back(std::move(d));
                double tol = 3.0 * mr.se + 0.02;
                switch (opp.kind) {
                    case UninformedStrategy::Kind::posterior_best_response:
                        checks.add("match_best_response_attains_value",
                                   std::abs(mr.mean - v0) <= tol,
                                   {{"mean", mr.mean}, {"value", v0}, {"se", mr.se}});
                        break;
                    case UninformedStrategy::Kind::i_clairvoyant:
                        checks.add("match_clairvoyant_not_below_value",
                                   mr.mean >= v0 - tol,
                                   {{"mean", mr.mean}, {"value", v0}, {"se", mr.se}});
                        break;
                    default:
                        checks.add("match_" + opp.label() + "_capped_by_value",
                                   mr.mean <= v0 + tol,
                                   {{"mean", mr.mean}, {"value", v0}, {"se", mr.se}});
                }
                double decomp = 0.0;
                for (int i = 0; i < cfg.spec.dimension; ++i)
                    decomp += double(mr.state_counts[std::size_t(i)]) / double(mr.episodes) *
                              mr.state_means[std::size_t(i)];
                checks.add("payoff_decomposition_" + opp.label(),
                           std::abs(decomp - mr.mean) <= 1e-9 &&
                               mr.max_terminal_mismatch <= 1e-9,
                           {{"state_weighted_mean", decomp},
                            {"mean", mr.mean},
                            {"max_terminal_mismatch", mr.max_terminal_mismatch}});
            }
            rep["match"] = arr;
        } else {  // diagnose
            ordered_json head;
            detail::append_solver_checks(vt, checks);
            double c = detail::auto_h_tolerance(cfg);
            NonRevealingSet nrs = non_revealing_set(vt, c);
            head["h_tolerance_c"] = c;
            ordered_json sizes = ordered_json::array();
            for (int frac = 0; frac <= 4; ++frac) {
                int k = std::min(cfg.n - 1, cfg.n * frac / 4);
                sizes.push_back({{"knot", k},
                                 {"time", tg.knot(k)},
                                 {"nodes", nrs.ids[std::size_t(k)].size()}});
            }
            head["non_revealing_sizes"] = sizes;
            if (cfg.spec.dimension == 2) {
                double L = detail::auto_dual_box(cfg);
                int r = cfg.dual_resolution > 0 ? cfg.dual_resolution : std::max(cfg.m, 4);
                ConjugateSummary cj = conjugate_pde_residual(vt, L, r);
                ordered_json cjj;
                cjj["dual_box"] = L;
                cjj["dual_resolution"] = r;
                cjj["max_abs_unmasked"] = cj.max_abs_unmasked;
                cjj["masked_fraction"] = cj.masked_fraction;
                cjj["terminal_error"] = cj.terminal_error;
                head["conjugate"] = cjj;
                checks.add("conjugate_unmasked_residual", cj.max_abs_unmasked <= 0.05,
                           {{"max_abs", cj.max_abs_unmasked}, {"tolerance", 0.05}});
                checks.add("conjugate_terminal", cj.terminal_error <= 1e-12,
                           {{"error", cj.terminal_error}, {"tolerance", 1e-12}});
                checks.add("conjugate_masked_fraction", cj.masked_fraction < 0.2,
                           {{"fraction", cj.masked_fraction}, {"tolerance", 0.2}});
            } else {
                head["conjugate"] = "skipped: dual residual implemented for two states only";
            }
            rep["diagnose"] = head;
        }
    }

    rep["checks"] = checks.items;
    rep["all_checks_pass"] = checks.all_pass;
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t_start)
                  .count();
    rep["wall_clock_ms"] = ms;

    if (!cfg.out.empty()) {
        std::filesystem::path dir(cfg.out);
        std::filesystem::create_directories(dir);
        std::ofstream out(dir / "report.json", std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write report to '" +
                                     (dir / "report.json").string() + "'");
        out << rep.dump(2) << "\n";
    }
    return {std::move(rep), checks.all_pass ? 0 : 1};
}

}  // namespace vexgame
