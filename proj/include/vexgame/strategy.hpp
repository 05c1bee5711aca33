#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "game.hpp"
#include "martingale.hpp"
#include "rng.hpp"
#include "value.hpp"

namespace vexgame {

/// Everything the informed player needs at match time: the revelation
/// kernel from the solved table, its per-state conditional versions, and
/// the saddle control tabulated at every (knot, node).
struct InformedStrategy {
    GameSpec spec;
    TimeGrid tg;
    SimplexGrid grid{2, 1};
    MartingaleKernel kernel;
    std::vector<ConditionalKernel> cond;
    std::vector<std::vector<double>> u_star;  // [knot][node]
};

inline InformedStrategy synthesize_informed(const ValueTable& vt) {
    const GameSpec& spec = vt.spec;
    bool payoff_based = spec.kind == GameSpec::Kind::payoff;
    if (!payoff_based && !(spec.kind == GameSpec::Kind::direct && spec.control))
        throw std::invalid_argument(
            "missing-saddle: spec carries neither stage payoffs nor an optimal control");
    InformedStrategy s;
    s.spec = spec;
    s.tg = vt.tg;
    s.grid = vt.grid;
    s.kernel = build_kernel(vt);
    for (int i = 0; i < s.grid.dim(); ++i) s.cond.push_back(condition_kernel(s.kernel, i));
    int n = vt.tg.steps;
    int nodes = s.grid.node_count();
    s.u_star.assign(std::size_t(n), std::vector<double>(std::size_t(nodes)));
    for (int k = 0; k < n; ++k) {
        double t = vt.tg.knot(k);
        for (int id = 0; id < nodes; ++id) {
            SimplexPoint p = s.grid.point(id);
            if (payoff_based) {
                SaddleResult sr = eval_hamiltonian(spec, t, p);
                s.u_star[std::size_t(k)][std::size_t(id)] = *sr.u_star;
            } else {
                s.u_star[std::size_t(k)][std::size_t(id)] = spec.control(t, p);
            }
        }
    }
    return s;
}

/// Maximizing response of the uninformed player to a known u when the state
/// is only known through the belief p.  Lowest index wins ties.
inline double best_response_v(const GameSpec& spec, double t, const SimplexPoint& p,
                              double u) {
    if (spec.kind != GameSpec::Kind::payoff)
        throw std::invalid_argument("not-payoff-based: best response needs stage payoffs");
    validate_point(p);
    if (p.dim != spec.dimension)
        throw std::invalid_argument("dimension-mismatch: point vs spec");
    double best = -std::numeric_limits<double>::infinity();
    double arg = spec.actions.v.front();
    for (double v : spec.actions.v) {
        double s = 0.0;
        for (int i = 0; i < spec.dimension; ++i) s += p[i] * spec.payoff(i, t, u, v);
        if (s > best + 1e-15) {
            best = s;
            arg = v;
        }
    }
    return arg;
}

struct UninformedStrategy {
    enum class Kind { posterior_best_response, constant, uniform_random, i_clairvoyant };
    Kind kind = Kind::posterior_best_response;
    double constant_v = 0.0;

    std::string label() const {
        switch (kind) {
            case Kind::constant: {
                char buf[48];
                std::snprintf(buf, sizeof buf, "constant(%g)", constant_v);
                return buf;
            }
            case Kind::uniform_random: return "uniform_random";
            case Kind::i_clairvoyant: return "i_clairvoyant";
            default: return "posterior_best_response";
        }
    }
};

inline UninformedStrategy posterior_best_response() { return {}; }
inline UninformedStrategy constant_opponent(double v) {
    return {UninformedStrategy::Kind::constant, v};
}
inline UninformedStrategy uniform_random_opponent() {
    return {UninformedStrategy::Kind::uniform_random, 0.0};
}
inline UninformedStrategy clairvoyant_opponent() {
    return {UninformedStrategy::Kind::i_clairvoyant, 0.0};
}

struct GameTranscript {
    int realized_state = -1;
    std::vector<std::int32_t> nodes;
    std::vector<double> u, v, stage;
    double total = 0.0;
};

struct MatchResult {
    long episodes = 0;
    double mean = 0.0;
    double se = 0.0;
    std::vector<long> state_counts;
    std::vector<double> state_means;
    MeanSe running_dot;             // sum_r tau <p_{r+1}, l(t_r, u_r, v_r)>
    MeanSe martingale_gap;          // episode total minus running_dot
    double terminal_dot_mean = 0.0; // <e_i, sum_r tau l_r>
    double max_terminal_mismatch = 0.0;
    std::vector<GameTranscript> transcripts;
};

/// Repeated play: nature draws the state from the snapped start node, the
/// informed player runs the revelation kernel conditioned on that state and
/// plays the tabulated saddle control at the public posterior; the
/// uninformed player sees only the posterior and the current u.
inline MatchResult play_match(const InformedStrategy& strat,
                              const UninformedStrategy& opp, const SimplexPoint& p0,
                              long episodes, std::uint64_t seed) {
    const GameSpec& spec = strat.spec;
    if (spec.kind != GameSpec::Kind::payoff)
        throw std::invalid_argument("not-payoff-based: match play needs stage payoffs");
    if (episodes < 1)
        throw std::invalid_argument("invalid-count: need at least one episode");
    int start = strat.grid.snap(p0);
    int dim = strat.grid.dim();
    int n = strat.tg.steps;
    double tau = strat.tg.tau();
    const auto& lat0 = strat.grid.lattice(start);
    double w0[3] = {double(lat0[0]), double(lat0[1]), double(lat0[2])};
    int nv = int(spec.actions.v.size());

    std::vector<double> totals(static_cast<std::size_t>(episodes));
    std::vector<double> runnings(static_cast<std::size_t>(episodes));
    std::vector<double> terminal_dots(static_cast<std::size_t>(episodes));
    std::vector<std::int8_t> states(static_cast<std::size_t>(episodes));
    int keep = int(std::min<long>(episodes, 8));
    std::vector<GameTranscript> transcripts(static_cast<std::size_t>(keep));

    parallel_for(std::size_t(episodes), [&](std::size_t j) {
        CounterRng rng = CounterRng::for_path(seed, j);
        int i = rng.next_weighted(w0, dim);
        std::vector<std::int32_t> nodes;
        detail::walk_steps(strat.cond[std::size_t(i)].steps, start, rng, nodes);
        GameTranscript* tr = j < std::size_t(keep) ? &transcripts[j] : nullptr;
        if (tr) {
            tr->realized_state = i;
            tr->nodes = nodes;
        }
        double total = 0.0, running = 0.0;
        double lsum[3] = {0.0, 0.0, 0.0};
        for (int r = 0; r < n; ++r) {
            double t = strat.tg.knot(r);
            int pub = nodes[std::size_t(r) + 1];
            SimplexPoint p = strat.grid.point(pub);
            double u = strat.u_star[std::size_t(r)][std::size_t(pub)];
            double v;
            switch (opp.kind) {
                case UninformedStrategy::Kind::constant:
                    v = opp.constant_v;
                    break;
                case UninformedStrategy::Kind::uniform_random: {
                    int idx = int(rng.next_double() * nv);
                    if (idx >= nv) idx = nv - 1;
                    v = spec.actions.v[std::size_t(idx)];
                    break;
                }
                case UninformedStrategy::Kind::i_clairvoyant: {
                    double best = -std::numeric_limits<double>::infinity();
                    v = spec.actions.v.front();
                    for (double cand : spec.actions.v) {
                        double s = spec.payoff(i, t, u, cand);
                        if (s > best + 1e-15) {
                            best = s;
                            v = cand;
                        }
                    }
                    break;
                }
                default:
                    v = best_response_v(spec, t, p, u);
            }
            double dot = 0.0;
            for (int s2 = 0; s2 < dim; ++s2) {
                double l = spec.payoff(s2, t, u, v);
                dot += p[s2] * l;
                lsum[s2] += tau * l;
            }
            double stage = tau * spec.payoff(i, t, u, v);
            total += stage;
            running += tau * dot;
            if (tr) {
                tr->u.push_back(u);
                tr->v.push_back(v);
                tr->stage.push_back(stage);
            }
        }
        totals[j] = total;
        runnings[j] = running;
        terminal_dots[j] = lsum[i];
        states[j] = std::int8_t(i);
        if (tr) tr->total = total;
    });

    MatchResult out;
    out.episodes = episodes;
    MeanSe ms = mean_se(totals);
    out.mean = ms.mean;
    out.se = ms.se;
    out.running_dot = mean_se(runnings);
    std::vector<double> gaps(static_cast<std::size_t>(episodes));
    for (std::size_t j = 0; j < gaps.size(); ++j) gaps[j] = totals[j] - runnings[j];
    out.martingale_gap = mean_se(gaps);
    out.terminal_dot_mean = pairwise_sum(terminal_dots.data(), terminal_dots.size()) /
                            double(episodes);
    for (std::size_t j = 0; j < totals.size(); ++j)
        out.max_terminal_mismatch =
            std::max(out.max_terminal_mismatch, std::abs(terminal_dots[j] - totals[j]));
    out.state_counts.assign(std::size_t(dim), 0);
    out.state_means.assign(std::size_t(dim), 0.0);
    std::vector<std::vector<double>> by_state(static_cast<std::size_t>(dim));
    for (std::size_t j = 0; j < totals.size(); ++j)
        by_state[std::size_t(states[j])].push_back(totals[j]);
    for (int i = 0; i < dim; ++i) {
        out.state_counts[std::size_t(i)] = long(by_state[std::size_t(i)].size());
        if (!by_state[std::size_t(i)].empty())
            out.state_means[std::size_t(i)] =
                pairwise_sum(by_state[std::size_t(i)].data(), by_state[std::size_t(i)].size()) /
                double(by_state[std::size_t(i)].size());
    }
    out.transcripts = std::move(transcripts);
    return out;
}

}  // namespace vexgame
