#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "simplex.hpp"

namespace vexgame {

/// Finite action sets for both players; actions are real scalars.
struct ActionGrid {
    std::vector<double> u;
    std::vector<double> v;
};

/// One Hamiltonian evaluation.  `value` is the min-max; `isaacs_gap` is
/// minmax - maxmin and vanishes when the stage game has a saddle point.
struct SaddleResult {
    double value = 0.0;
    double minmax = 0.0;
    double maxmin = 0.0;
    double isaacs_gap = 0.0;
    std::optional<double> u_star;
    std::optional<double> v_star;
    int u_index = -1;
    int v_index = -1;
};

/// Game description.  Either payoff-based (stage payoffs per hidden state,
/// Hamiltonian computed by exhaustive min-max over the action grid), given
/// directly as a Hamiltonian formula, or a bare non-revealing band (h1, h2)
/// for the exact path sampler.
struct GameSpec {
    enum class Kind { payoff, direct, band };

    std::string name = "custom";
    int dimension = 2;
    double horizon = 1.0;
    Kind kind = Kind::payoff;

    ActionGrid actions;
    std::function<double(int state, double t, double u, double v)> payoff;

    std::function<double(double t, const SimplexPoint& p)> hamiltonian;
    std::function<double(double t, const SimplexPoint& p)> control;  // u*(t,p), optional

    std::function<double(double t)> band_low;   // h1
    std::function<double(double t)> band_high;  // h2

    bool has_payoff() const { return kind == Kind::payoff; }
    bool has_band() const { return bool(band_low) && bool(band_high); }
};

/// H(t,p) with saddle data.  Payoff-based: exhaustive min over u of max over
/// v of <p, l(t,u,v)>, argmin/argmax ties broken by the lowest action index.
inline SaddleResult eval_hamiltonian(const GameSpec& spec, double t, const SimplexPoint& p) {
    validate_point(p);
    if (p.dim != spec.dimension)
        throw std::invalid_argument("dimension-mismatch: point vs spec");
    SaddleResult r;
    if (spec.kind == GameSpec::Kind::band)
        throw std::invalid_argument("not-applicable: band-only spec has no Hamiltonian");
    if (spec.kind == GameSpec::Kind::direct) {
        r.value = r.minmax = r.maxmin = spec.hamiltonian(t, p);
        r.isaacs_gap = 0.0;
        if (spec.control) r.u_star = spec.control(t, p);
        return r;
    }
    const auto& U = spec.actions.u;
    const auto& V = spec.actions.v;
    if (U.empty() || V.empty())
        throw std::invalid_argument("empty-action-grid");
    auto bilinear = [&](double u, double v) {
        double s = 0.0;
        for (int i = 0; i < p.dim; ++i) s += p[i] * spec.payoff(i, t, u, v);
        return s;
    };
    double minmax = 0.0;
    int best_u = -1;
    for (int iu = 0; iu < int(U.size()); ++iu) {
        double inner = -1e300;
        for (double v : V) inner = std::max(inner, bilinear(U[std::size_t(iu)], v));
        if (best_u < 0 || inner < minmax) { minmax = inner; best_u = iu; }
    }
    double maxmin = 0.0;
    int best_v = -1;
    for (int iv = 0; iv < int(V.size()); ++iv) {
        double inner = 1e300;
        for (double u : U) inner = std::min(inner, bilinear(u, V[std::size_t(iv)]));
        if (best_v < 0 || inner > maxmin) { maxmin = inner; best_v = iv; }
    }
    r.minmax = minmax;
    r.maxmin = maxmin;
    r.value = minmax;
    r.isaacs_gap = minmax - maxmin;
    r.u_index = best_u;
    r.v_index = best_v;
    r.u_star = U[std::size_t(best_u)];
    r.v_star = V[std::size_t(best_v)];
    return r;
}

struct IsaacsScan {
    double max_gap = 0.0;
    double scale = 0.0;  // max |bilinear payoff| seen
    double worst_t = 0.0;
    SimplexPoint worst_p;
    bool flagged = false;  // gap above 1e-6 * scale
};

/// Scans the min-max vs max-min gap over sample times and simplex points.
inline IsaacsScan isaacs_gap_scan(const GameSpec& spec, const std::vector<double>& ts,
                                  const std::vector<SimplexPoint>& ps) {
    if (spec.kind != GameSpec::Kind::payoff)
        throw std::invalid_argument("not-applicable: isaacs scan needs a payoff-based spec");
    IsaacsScan out;
    out.worst_p = ps.empty() ? SimplexPoint(1.0, 0.0) : ps.front();
    for (double t : ts) {
        for (const auto& p : ps) {
            SaddleResult r = eval_hamiltonian(spec, t, p);
            out.scale = std::max({out.scale, std::abs(r.minmax), std::abs(r.maxmin)});
            if (r.isaacs_gap > out.max_gap) {
                out.max_gap = r.isaacs_gap;
                out.worst_t = t;
                out.worst_p = p;
            }
        }
    }
    out.flagged = out.max_gap > 1e-6 * std::max(out.scale, 1e-12);
    return out;
}

/// Numerical Lipschitz bound of H over (t, p), used for default tolerances.
inline double hamiltonian_lipschitz(const GameSpec& spec, int samples = 48) {
    if (spec.kind == GameSpec::Kind::band)
        throw std::invalid_argument("not-applicable: band-only spec has no Hamiltonian");
    double lip = 0.0;
    double dt = spec.horizon / samples;
    auto H = [&](double t, const SimplexPoint& p) {
        return eval_hamiltonian(spec, t, p).value;
    };
    auto probe = [&](const SimplexPoint& p, const SimplexPoint& q, double dp) {
        for (int k = 0; k <= samples; ++k) {
            double t = std::min(k * dt, spec.horizon);
            lip = std::max(lip, std::abs(H(t, p) - H(t, q)) / dp);
            if (k < samples)
                lip = std::max(lip, std::abs(H(t + dt, p) - H(t, p)) / dt);
        }
    };
    int np = 64;
    if (spec.dimension == 2) {
        double dp = 1.0 / np;
        for (int i = 0; i < np; ++i) {
            SimplexPoint p(i * dp, 1.0 - i * dp);
            SimplexPoint q((i + 1) * dp, 1.0 - (i + 1) * dp);
            probe(p, q, 2.0 * dp);  // step moves both coordinates
        }
    } else {
        int nc = 16;
        double dp = 1.0 / nc;
        for (int a = 0; a < nc; ++a) {
            for (int b = 0; a + b < nc; ++b) {
                SimplexPoint p(a * dp, b * dp, 1.0 - (a + b) * dp);
                SimplexPoint q((a + 1) * dp, b * dp, 1.0 - (a + b + 1) * dp);
                probe(p, q, 2.0 * dp);
            }
        }
    }
    return lip;
}

/// Max |H| over (t, p) samples, used to size the dual box.
inline double hamiltonian_sup(const GameSpec& spec, int samples = 48) {
    if (spec.kind == GameSpec::Kind::band)
        throw std::invalid_argument("not-applicable: band-only spec has no Hamiltonian");
    double sup = 0.0;
    int np = spec.dimension == 2 ? 128 : 24;
    for (int k = 0; k <= samples; ++k) {
        double t = spec.horizon * k / samples;
        if (spec.dimension == 2) {
            for (int i = 0; i <= np; ++i) {
                SimplexPoint p(double(i) / np, 1.0 - double(i) / np);
                sup = std::max(sup, std::abs(eval_hamiltonian(spec, t, p).value));
            }
        } else {
            for (int a = 0; a <= np; ++a)
                for (int b = 0; a + b <= np; ++b) {
                    SimplexPoint p(double(a) / np, double(b) / np,
                                   1.0 - double(a + b) / np);
                    sup = std::max(sup, std::abs(eval_hamiltonian(spec, t, p).value));
                }
        }
    }
    return sup;
}

namespace fixtures {

/// reveal: two states, stage payoffs l1 = u + v, l2 = -u + 2v on {-1,1}^2.
/// The convexified Hamiltonian is the chord 1 - p1, so the value is
/// (T - t)(1 - p1) and the optimal play reveals everything immediately.
inline GameSpec reveal() {
    GameSpec g;
    g.name = "reveal";
    g.dimension = 2;
    g.horizon = 1.0;
    g.kind = GameSpec::Kind::payoff;
    g.actions.u = {-1.0, 1.0};
    g.actions.v = {-1.0, 1.0};
    g.payoff = [](int state, double, double u, double v) {
        return state == 0 ? u + v : -u + 2.0 * v;
    };
    return g;
}

/// ex1: direct Hamiltonian -|2 p1 - 1| + alpha(t) sqrt(p1^2 + (1-p1)^2) with
/// alpha decreasing affinely from alpha_start to alpha_end over [0, T].
/// The non-revealing band is [h1(t), 1 - h1(t)], h1 = 1/2 - (2 alpha^2 - 4)^{-1/2}.
inline GameSpec ex1(double alpha_start = 4.0, double alpha_end = 3.0, double horizon = 1.0) {
    if (!(alpha_end > 2.0) || !(alpha_start > 2.0))
        throw std::invalid_argument(
            "invalid-parameters: ex1 requires alpha(t) > 2 on [0,T] (got alpha_end = " +
            std::to_string(alpha_end) + ")");
    if (alpha_end > alpha_start)
        throw std::invalid_argument("invalid-parameters: ex1 requires nonincreasing alpha");
    if (!(horizon > 0.0))
        throw std::invalid_argument("invalid-parameters: horizon must be positive");
    GameSpec g;
    g.name = "ex1";
    g.dimension = 2;
    g.horizon = horizon;
    g.kind = GameSpec::Kind::direct;
    auto alpha = [alpha_start, alpha_end, horizon](double t) {
        return alpha_start + (alpha_end - alpha_start) * (t / horizon);
    };
    g.hamiltonian = [alpha](double t, const SimplexPoint& p) {
        double x = p[0];
        return -std::abs(2.0 * x - 1.0) +
               alpha(t) * std::sqrt(x * x + (1.0 - x) * (1.0 - x));
    };
    g.control = [](double, const SimplexPoint& p) {
        // minimizes u (2 p1 - 1) over [-1, 1]
        if (p[0] < 0.5) return 1.0;
        if (p[0] > 0.5) return -1.0;
        return 0.0;
    };
    g.band_low = [alpha](double t) {
        double a = alpha(t);
        return 0.5 - 1.0 / std::sqrt(2.0 * a * a - 4.0);
    };
    g.band_high = [alpha](double t) {
        double a = alpha(t);
        return 0.5 + 1.0 / std::sqrt(2.0 * a * a - 4.0);
    };
    return g;
}

/// azema_h: band-only instance h1 = 1/2 - sqrt(t), h2 = 1/2 + sqrt(t) on
/// [0, 1/4].  Feeds the exact sampler; it has no Hamiltonian of its own.
inline GameSpec azema_h() {
    GameSpec g;
    g.name = "azema_h";
    g.dimension = 2;
    g.horizon = 0.25;
    g.kind = GameSpec::Kind::band;
    g.band_low = [](double t) { return 0.5 - std::sqrt(std::max(t, 0.0)); };
    g.band_high = [](double t) { return 0.5 + std::sqrt(std::max(t, 0.0)); };
    return g;
}

/// counterexample: H(t,p) = lambda(t) p1 (1 - p1), lambda(t) = 0.7 - t.
/// Lambda(t) = int_t^1 lambda = 0.2 - 0.7 t + 0.5 t^2 vanishes at a = 0.4;
/// the value is 0 on [0, a] and Lambda(t) p1 (1 - p1) on [b, 1], b = 0.7.
inline GameSpec counterexample() {
    GameSpec g;
    g.name = "counterexample";
    g.dimension = 2;
    g.horizon = 1.0;
    g.kind = GameSpec::Kind::direct;
    g.hamiltonian = [](double t, const SimplexPoint& p) {
        return (0.7 - t) * p[0] * (1.0 - p[0]);
    };
    return g;
}

/// autonomous3: three states, H(p) = -|p1 - p2| + 1, time independent.
/// The envelope is the affine function p3, so the value is (T - t) p3.
inline GameSpec autonomous3() {
    GameSpec g;
    g.name = "autonomous3";
    g.dimension = 3;
    g.horizon = 1.0;
    g.kind = GameSpec::Kind::direct;
    g.hamiltonian = [](double, const SimplexPoint& p) {
        return -std::abs(p[0] - p[1]) + 1.0;
    };
    return g;
}

}  // namespace fixtures

/// Fixture factory.  Unknown parameter keys are rejected, like config keys.
inline GameSpec load_builtin(const std::string& name,
                             const std::map<std::string, double>& params = {}) {
    auto reject_unknown = [&](std::initializer_list<const char*> known) {
        for (const auto& kv : params) {
            bool ok = false;
            for (const char* k : known)
                if (kv.first == k) { ok = true; break; }
            if (!ok)
                throw std::invalid_argument("invalid-parameters: unknown parameter '" +
                                            kv.first + "' for fixture " + name);
        }
    };
    auto get = [&](const char* key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    if (name == "reveal") {
        reject_unknown({});
        return fixtures::reveal();
    }
    if (name == "ex1") {
        reject_unknown({"alpha_start", "alpha_end", "horizon"});
        return fixtures::ex1(get("alpha_start", 4.0), get("alpha_end", 3.0),
                             get("horizon", 1.0));
    }
    if (name == "azema_h") {
        reject_unknown({});
        return fixtures::azema_h();
    }
    if (name == "counterexample") {
        reject_unknown({});
        return fixtures::counterexample();
    }
    if (name == "autonomous3") {
        reject_unknown({});
        return fixtures::autonomous3();
    }
    throw std::invalid_argument("unknown-name: no fixture named '" + name + "'");
}

}  // namespace vexgame
