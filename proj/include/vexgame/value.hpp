#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "envelope.hpp"
#include "game.hpp"

namespace vexgame {

/// Uniform time lattice t_k = t0 + k*tau on [t0, T].
struct TimeGrid {
    double t0 = 0.0;
    double horizon = 1.0;
    int steps = 1;

    TimeGrid() = default;
    TimeGrid(double start, double end, int n) : t0(start), horizon(end), steps(n) {
        if (n < 1) throw std::invalid_argument("invalid-time-grid: steps must be >= 1");
        if (!(end > start))
            throw std::invalid_argument("invalid-time-grid: horizon must exceed t0");
    }

    double tau() const { return (horizon - t0) / steps; }
    double knot(int k) const {
        if (k >= steps) return horizon;
        return t0 + (horizon - t0) * k / steps;
    }
};

/// Flattened per-step transition data: node id -> (targets, weights) slice.
struct KernelStep {
    std::vector<int> offsets;  // node_count + 1 entries
    std::vector<int> targets;
    std::vector<double> weights;

    int row_begin(int node) const { return offsets[std::size_t(node)]; }
    int row_end(int node) const { return offsets[std::size_t(node) + 1]; }
};

/// Output of the backward recursion: value slices per knot, the Hamiltonian
/// table, per-step splitting rules, and envelope-active flags.
class ValueTable {
public:
    GameSpec spec;
    TimeGrid tg;
    SimplexGrid grid{2, 1};
    std::vector<std::vector<double>> values;   // (n+1) x node_count
    std::vector<std::vector<double>> htab;     // n x node_count, H(t_k, node)
    std::vector<KernelStep> steps;             // n entries
    std::vector<std::vector<std::uint8_t>> active;  // n x node_count

    double value(int k, int node) const { return values[std::size_t(k)][std::size_t(node)]; }

    double value_at(int k, const SimplexPoint& p) const {
        return grid.interpolate(values[std::size_t(k)], p);
    }

    /// Linear interpolation in time between knot slices.
    double value_at(double t, const SimplexPoint& p) const {
        double lo = tg.t0, hi = tg.horizon;
        if (t < lo - 1e-9 || t > hi + 1e-9)
            throw std::invalid_argument("time-out-of-range: t outside [t0, T]");
        t = std::min(std::max(t, lo), hi);
        double tau = tg.tau();
        int k = std::min(int((t - lo) / tau), tg.steps - 1);
        double theta = (t - tg.knot(k)) / tau;
        theta = std::min(std::max(theta, 0.0), 1.0);
        double a = value_at(k, p);
        double b = value_at(k + 1, p);
        return (1.0 - theta) * a + theta * b;
    }

    SplittingRule split(int k, int node) const {
        const KernelStep& s = steps[std::size_t(k)];
        SplittingRule r;
        for (int j = s.row_begin(node); j < s.row_end(node); ++j) {
            r.targets.push_back(s.targets[std::size_t(j)]);
            r.weights.push_back(s.weights[std::size_t(j)]);
        }
        return r;
    }
};

/// Backward convexification: V(T,.) = 0 and
/// V(t_k,.) = lower envelope of V(t_{k+1},.) + tau*H(t_k,.).
inline ValueTable solve_backward(const GameSpec& spec, const TimeGrid& tg,
                                 const SimplexGrid& sg) {
    if (spec.kind == GameSpec::Kind::band)
        throw std::invalid_argument("not-applicable: band-only spec cannot be solved");
    if (sg.dim() != spec.dimension)
        throw std::invalid_argument("dimension-mismatch: grid vs spec");
    if (std::abs(tg.horizon - spec.horizon) > 1e-9)
        throw std::invalid_argument("horizon-mismatch: time grid must end at the spec horizon");

    ValueTable vt;
    vt.spec = spec;
    vt.tg = tg;
    vt.grid = sg;
    int n = tg.steps;
    int nodes = sg.node_count();
    double tau = tg.tau();

    vt.values.assign(std::size_t(n) + 1, std::vector<double>(std::size_t(nodes), 0.0));
    vt.htab.assign(std::size_t(n), std::vector<double>());
    vt.steps.resize(std::size_t(n));
    vt.active.assign(std::size_t(n), std::vector<std::uint8_t>());

    std::vector<double> w(static_cast<std::size_t>(nodes));
    for (int k = n - 1; k >= 0; --k) {
        double t = tg.knot(k);
        std::vector<double>& h = vt.htab[std::size_t(k)];
        h.resize(std::size_t(nodes));
        for (int id = 0; id < nodes; ++id)
            h[std::size_t(id)] = eval_hamiltonian(spec, t, sg.point(id)).value;
        const std::vector<double>& next = vt.values[std::size_t(k) + 1];
        for (int id = 0; id < nodes; ++id)
            w[std::size_t(id)] = next[std::size_t(id)] + tau * h[std::size_t(id)];

        LowerEnvelope env(sg, w);
        vt.values[std::size_t(k)] = env.values();

        KernelStep& ks = vt.steps[std::size_t(k)];
        ks.offsets.resize(std::size_t(nodes) + 1);
        ks.offsets[0] = 0;
        std::vector<std::uint8_t>& act = vt.active[std::size_t(k)];
        act.resize(std::size_t(nodes));
        for (int id = 0; id < nodes; ++id) {
            act[std::size_t(id)] = env.active(id) ? 1 : 0;
            SplittingRule r = env.split_at_node(id);
            for (std::size_t j = 0; j < r.targets.size(); ++j) {
                ks.targets.push_back(r.targets[j]);
                ks.weights.push_back(r.weights[j]);
            }
            ks.offsets[std::size_t(id) + 1] = int(ks.targets.size());
        }
    }
    return vt;
}

namespace detail {

// 32-point Gauss-Legendre rule on [-1,1], positive half; mirrored in use.
inline const std::array<std::array<double, 2>, 16>& gl32_half() {
    static const std::array<std::array<double, 2>, 16> tab = {{
        {0.0483076656877383162, 0.0965400885147278006},
        {0.1444719615827964934, 0.0956387200792748594},
        {0.2392873622521370745, 0.0938443990808045654},
        {0.3318686022821276497, 0.0911738786957638847},
        {0.4213512761306353454, 0.0876520930044038111},
        {0.5068999089322293900, 0.0833119242269467552},
        {0.5877157572407623290, 0.0781938957870703065},
        {0.6630442669302152010, 0.0723457941088485062},
        {0.7321821187402896804, 0.0658222227763618468},
        {0.7944837959679424070, 0.0586840934785355471},
        {0.8493676137325699701, 0.0509980592623761762},
        {0.8963211557660521240, 0.0428358980222266807},
        {0.9349060759377396892, 0.0342738629130214331},
        {0.9647622555875064308, 0.0253920653092620595},
        {0.9856115115452683354, 0.0162743947309056706},
        {0.9972638618494815635, 0.0070186100094700966},
    }};
    return tab;
}

template <typename F>
double gauss32(F&& f, double a, double b) {
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (const auto& nw : gl32_half())
        s += nw[1] * (f(c - h * nw[0]) + f(c + h * nw[0]));
    return s * h;
}

/// Composite rule: 4 panels of 32-point Gauss each.
template <typename F>
double integrate(F&& f, double a, double b) {
    if (!(b > a)) return 0.0;
    double s = 0.0;
    for (int j = 0; j < 4; ++j)
        s += gauss32(f, a + (b - a) * j / 4.0, a + (b - a) * (j + 1) / 4.0);
    return s;
}

}  // namespace detail

/// Integral of the convexified Hamiltonian: int_t^T VexH(s, p) ds, in closed
/// or quadrature form per fixture.
inline double vex_h_integral(const GameSpec& spec, double t, const SimplexPoint& p) {
    validate_point(p);
    double T = spec.horizon;
    if (t < -1e-12 || t > T + 1e-12)
        throw std::invalid_argument("time-out-of-range: t outside [0, T]");
    t = std::min(std::max(t, 0.0), T);
    if (spec.name == "reveal") return (T - t) * (1.0 - p[0]);
    if (spec.name == "autonomous3") {
        if (p.dim != 3) throw std::invalid_argument("dimension-mismatch: point vs spec");
        return (T - t) * p[2];
    }
    if (spec.name == "counterexample") {
        auto Lambda = [](double s) { return 0.2 - 0.7 * s + 0.5 * s * s; };
        return Lambda(std::max(t, 0.7)) * p[0] * (1.0 - p[0]);
    }
    if (spec.name == "ex1") {
        double x = std::min(p[0], 1.0 - p[0]);
        auto H = [&](double s, double q) {
            SimplexPoint pt(q, 1.0 - q);
            return spec.hamiltonian(s, pt);
        };
        auto chord = [&](double s) { return H(s, spec.band_low(s)); };
        if (x >= spec.band_low(t))
            return detail::integrate(chord, t, T);
        if (x < spec.band_low(T))
            return detail::integrate([&](double s) { return H(s, x); }, t, T);
        double lo = t, hi = T;  // band_low decreasing: band_low(lo) > x >= band_low(hi)
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            double mid = 0.5 * (lo + hi);
            (spec.band_low(mid) > x ? lo : hi) = mid;
        }
        double star = 0.5 * (lo + hi);
        return detail::integrate([&](double s) { return H(s, x); }, t, star) +
               detail::integrate(chord, star, T);
    }
    throw std::invalid_argument("unknown-name: no VexH integral for '" + spec.name + "'");
}

/// Closed-form reference values for the builtin fixtures.
inline double closed_form_value(const GameSpec& spec, double t, const SimplexPoint& p) {
    validate_point(p);
    if (spec.name == "reveal" || spec.name == "ex1" || spec.name == "autonomous3")
        return vex_h_integral(spec, t, p);
    if (spec.name == "counterexample") {
        const double a = 0.4, b = 0.7;
        if (t <= a + 1e-12) return 0.0;
        if (t >= b - 1e-12) {
            double lam = 0.2 - 0.7 * t + 0.5 * t * t;
            return lam * p[0] * (1.0 - p[0]);
        }
        throw std::invalid_argument(
            "outside-closed-form-domain: counterexample value known only for t in [0,0.4] or [0.7,1]");
    }
    throw std::invalid_argument("unknown-name: no closed form for '" + spec.name + "'");
}

struct ObstacleResidual {
    double time_residual = 0.0;
    bool has_convexity = false;
    double convexity_residual = 0.0;
};

/// Raw pointwise residuals of the obstacle formulation at (t_k, node):
/// forward time difference plus H, and the least tangent second difference.
/// Vertices report the time part only; other boundary nodes are rejected.
inline ObstacleResidual obstacle_residual(const ValueTable& vt, int k, int node) {
    if (k < 0 || k >= vt.tg.steps)
        throw std::invalid_argument("knot-out-of-range: need 0 <= k < steps");
    if (node < 0 || node >= vt.grid.node_count())
        throw std::invalid_argument("node-out-of-range");
    ObstacleResidual r;
    double tau = vt.tg.tau();
    r.time_residual = (vt.value(k + 1, node) - vt.value(k, node)) / tau +
                      vt.htab[std::size_t(k)][std::size_t(node)];
    if (vt.grid.vertex_state(node) >= 0) return r;
    const auto& lat = vt.grid.lattice(node);
    for (int i = 0; i < vt.grid.dim(); ++i)
        if (lat[std::size_t(i)] == 0)
            throw std::invalid_argument(
                "boundary-node: convexity stencil undefined on the simplex boundary");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& dir : tangent_directions(vt.grid.dim()))
        best = std::min(best, tangent_second_difference(vt.grid, vt.values[std::size_t(k)],
                                                        node, dir));
    r.has_convexity = true;
    r.convexity_residual = best;
    return r;
}

/// Per-knot classification of nodes where the value moves by the plain
/// transport rate, i.e. the envelope step did not cut at the node.
struct NonRevealingSet {
    double c = 0.0;
    double threshold = 0.0;  // c * (tau + 1/m)
    std::vector<std::vector<std::uint8_t>> mask;  // steps x node_count
    std::vector<std::vector<int>> ids;            // sorted per knot

    bool contains(int k, int node) const {
        return mask[std::size_t(k)][std::size_t(node)] != 0;
    }
};

inline NonRevealingSet non_revealing_set(const ValueTable& vt, double c) {
    NonRevealingSet out;
    out.c = c;
    double tau = vt.tg.tau();
    out.threshold = c * (tau + 1.0 / vt.grid.resolution());
    int n = vt.tg.steps, nodes = vt.grid.node_count();
    out.mask.assign(std::size_t(n), std::vector<std::uint8_t>(std::size_t(nodes), 0));
    out.ids.resize(std::size_t(n));
    for (int k = 0; k < n; ++k) {
        for (int id = 0; id < nodes; ++id) {
            double res = (vt.value(k + 1, id) - vt.value(k, id)) / tau +
                         vt.htab[std::size_t(k)][std::size_t(id)];
            bool in = res <= out.threshold || vt.grid.vertex_state(id) >= 0;
            if (in) {
                out.mask[std::size_t(k)][std::size_t(id)] = 1;
                out.ids[std::size_t(k)].push_back(id);
            }
        }
    }
    return out;
}

struct ConjugateSlice {
    int k = 0;
    double spacing = 0.0;            // dual lattice spacing 2L/r
    std::vector<double> s;           // distinct gradient abscissae (p1^ - p2^)
    std::vector<double> residual;    // dt V* - H(t_k, grad V*); 0 where masked
    std::vector<std::uint8_t> masked;
    std::vector<long> multiplicity;  // interior dual nodes sharing this s
};

struct ConjugateSummary {
    long interior_count = 0;   // interior dual nodes x knots, multiplicity-weighted
    long masked_count = 0;
    double masked_fraction = 0.0;
    double max_abs_unmasked = 0.0;
    double terminal_error = 0.0;  // max |V*(T,.) - max_i p_i^| over the dual lattice
};

namespace detail {

/// g(d) = max over grid nodes x of x*(d*h) - f(x), for d = -r..r.  Uses the
/// monotone argmax of the unimodal objective (f convex along the lattice).
inline std::vector<double> dual_profile(const std::vector<double>& f, int m, double h,
                                        int r) {
    std::vector<double> g(std::size_t(2 * r) + 1);
    int j = 0;
    for (int d = -r; d <= r; ++d) {
        double s = d * h;
        auto val = [&](int jj) { return (double(jj) / m) * s - f[std::size_t(jj)]; };
        while (j + 1 <= m && val(j + 1) >= val(j)) ++j;
        g[std::size_t(d + r)] = val(j);
    }
    return g;
}

}  // namespace detail

/// Residual of the dual-side transport identity on the interior of a dual
/// box lattice.  I=2 only: the conjugate depends on p^ through p1^ - p2^,
/// so fields are stored per distinct difference with node multiplicities.
inline ConjugateSlice conjugate_slice_residual(const ValueTable& vt, double L, int r,
                                               int k) {
    if (vt.grid.dim() != 2)
        throw std::invalid_argument("unsupported-dimension: conjugate residual needs I=2");
    if (!(L > 0.0) || r < 4)
        throw std::invalid_argument("invalid-dual-lattice: box > 0 and resolution >= 4 required");
    if (k < 0 || k >= vt.tg.steps)
        throw std::invalid_argument("knot-out-of-range: need 0 <= k < steps");
    int m = vt.grid.resolution();
    double h = 2.0 * L / r;
    double tau = vt.tg.tau();
    std::vector<double> g = detail::dual_profile(vt.values[std::size_t(k)], m, h, r);
    std::vector<double> gn = detail::dual_profile(vt.values[std::size_t(k) + 1], m, h, r);

    ConjugateSlice out;
    out.k = k;
    out.spacing = h;
    double t = vt.tg.knot(k);
    for (int d = -(r - 2); d <= r - 2; ++d) {
        std::size_t c = std::size_t(d + r);
        double kink = std::abs(g[c + 1] - 2.0 * g[c] + g[c - 1]) / (2.0 * h);
        bool mask = kink > 10.0 / m;
        double res = 0.0;
        if (!mask) {
            double grad = (g[c + 1] - g[c - 1]) / (2.0 * h);
            grad = std::min(std::max(grad, 0.0), 1.0);
            SimplexPoint pstar(grad, 1.0 - grad);
            double dt = (gn[c] - g[c]) / tau;
            res = dt - eval_hamiltonian(vt.spec, t, pstar).value;
        }
        out.s.push_back(d * h);
        out.residual.push_back(res);
        out.masked.push_back(mask ? 1 : 0);
        out.multiplicity.push_back(long(r - 1 - std::abs(d)));
    }
    return out;
}

inline ConjugateSummary conjugate_pde_residual(const ValueTable& vt, double L, int r) {
    ConjugateSummary out;
    for (int k = 0; k < vt.tg.steps; ++k) {
        ConjugateSlice sl = conjugate_slice_residual(vt, L, r, k);
        for (std::size_t j = 0; j < sl.s.size(); ++j) {
            out.interior_count += sl.multiplicity[j];
            if (sl.masked[j]) out.masked_count += sl.multiplicity[j];
            else out.max_abs_unmasked = std::max(out.max_abs_unmasked,
                                                 std::abs(sl.residual[j]));
        }
    }
    if (out.interior_count > 0)
        out.masked_fraction = double(out.masked_count) / double(out.interior_count);

    int m = vt.grid.resolution();
    double h = 2.0 * L / r;
    std::vector<double> gT =
        detail::dual_profile(vt.values[std::size_t(vt.tg.steps)], m, h, r);
    for (int i = 0; i <= r; ++i) {
        double p1 = -L + h * i;
        for (int j = 0; j <= r; ++j) {
            double p2 = -L + h * j;
            double vstar = p2 + gT[std::size_t(i - j + r)];
            out.terminal_error =
                std::max(out.terminal_error, std::abs(vstar - std::max(p1, p2)));
        }
    }
    return out;
}

}  // namespace vexgame
