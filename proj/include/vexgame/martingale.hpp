#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"
#include "value.hpp"

namespace vexgame {

/// Time-indexed transition kernels on the simplex lattice.  Row (k, node)
/// lists the splitting targets with their weights; the terminal rule (jump
/// to vertex e_i with probability p_i) is applied by the samplers.
struct MartingaleKernel {
    TimeGrid tg;
    SimplexGrid grid{2, 1};
    std::vector<KernelStep> steps;
};

inline MartingaleKernel build_kernel(const ValueTable& vt) {
    if (vt.steps.empty())
        throw std::invalid_argument("missing-splits: table carries no splitting rules");
    MartingaleKernel k;
    k.tg = vt.tg;
    k.grid = vt.grid;
    k.steps = vt.steps;
    return k;
}

/// Kernel reweighted by the realized state: weights become
/// lambda_l * (target)_i / (node)_i, frozen to identity when (node)_i = 0.
struct ConditionalKernel {
    int state = 0;
    TimeGrid tg;
    SimplexGrid grid{2, 1};
    std::vector<KernelStep> steps;
};

inline ConditionalKernel condition_kernel(const MartingaleKernel& kern, int state) {
    if (kern.steps.empty())
        throw std::invalid_argument("empty-kernel: no transition rows");
    if (state < 0 || state >= kern.grid.dim())
        throw std::invalid_argument("state-out-of-range");
    ConditionalKernel ck;
    ck.state = state;
    ck.tg = kern.tg;
    ck.grid = kern.grid;
    ck.steps.resize(kern.steps.size());
    int nodes = kern.grid.node_count();
    for (std::size_t k = 0; k < kern.steps.size(); ++k) {
        const KernelStep& src = kern.steps[k];
        KernelStep& dst = ck.steps[k];
        dst.offsets.resize(std::size_t(nodes) + 1);
        dst.offsets[0] = 0;
        for (int id = 0; id < nodes; ++id) {
            int pi = kern.grid.lattice(id)[std::size_t(state)];
            if (pi == 0) {
                dst.targets.push_back(id);
                dst.weights.push_back(1.0);
            } else {
                double total = 0.0;
                std::size_t first = dst.targets.size();
                for (int j = src.row_begin(id); j < src.row_end(id); ++j) {
                    int tgt = src.targets[std::size_t(j)];
                    int ti = kern.grid.lattice(tgt)[std::size_t(state)];
                    if (ti == 0) continue;
                    double w = src.weights[std::size_t(j)] * double(ti) / double(pi);
                    dst.targets.push_back(tgt);
                    dst.weights.push_back(w);
                    total += w;
                }
                for (std::size_t j = first; j < dst.weights.size(); ++j)
                    dst.weights[j] /= total;
            }
            dst.offsets[std::size_t(id) + 1] = int(dst.targets.size());
        }
    }
    return ck;
}

struct MartingalePath {
    std::int32_t realized_state = -1;  // -1 in unconditional ensembles
    std::int32_t terminal_state = -1;  // vertex reached after the last knot
    std::vector<std::int32_t> nodes;   // node ids at knots 0..n
};

enum class SampleMode { unconditional, joint };

struct PathEnsemble {
    enum class Kind { unconditional, joint, conditional };
    Kind kind = Kind::unconditional;
    TimeGrid tg;
    SimplexGrid grid{2, 1};
    SimplexPoint requested_p0;
    int start_node = 0;
    double snap_distance = 0.0;
    std::vector<MartingalePath> paths;
};

namespace detail {

inline int draw_row(const KernelStep& ks, int node, CounterRng& rng) {
    int lo = ks.row_begin(node), hi = ks.row_end(node);
    if (hi - lo == 1) return ks.targets[std::size_t(lo)];
    int pick = rng.next_weighted(ks.weights.data() + lo, hi - lo);
    return ks.targets[std::size_t(lo + pick)];
}

inline void walk_steps(const std::vector<KernelStep>& steps, int start, CounterRng& rng,
                       std::vector<std::int32_t>& out) {
    out.resize(steps.size() + 1);
    int cur = start;
    out[0] = cur;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        cur = draw_row(steps[k], cur, rng);
        out[k + 1] = cur;
    }
}

inline int draw_terminal(const SimplexGrid& grid, int node, CounterRng& rng) {
    const auto& lat = grid.lattice(node);
    double w[3];
    for (int i = 0; i < grid.dim(); ++i) w[i] = double(lat[std::size_t(i)]);
    return rng.next_weighted(w, grid.dim());
}

}  // namespace detail

/// N independent paths from p0 (snapped to the nearest node).  Joint mode
/// draws the state first with the node's coordinates, then walks the
/// matching conditional kernel; the terminal vertex is then that state.
inline PathEnsemble sample_paths(const MartingaleKernel& kern, const SimplexPoint& p0,
                                 int count, std::uint64_t seed,
                                 SampleMode mode = SampleMode::joint) {
    if (kern.steps.empty())
        throw std::invalid_argument("empty-kernel: no transition rows");
    if (count < 1) throw std::invalid_argument("invalid-count: need at least one path");
    PathEnsemble e;
    e.kind = mode == SampleMode::joint ? PathEnsemble::Kind::joint
                                       : PathEnsemble::Kind::unconditional;
    e.tg = kern.tg;
    e.grid = kern.grid;
    e.requested_p0 = p0;
    e.start_node = kern.grid.snap(p0);
    e.snap_distance = linf_distance(p0, kern.grid.point(e.start_node));
    e.paths.resize(std::size_t(count));

    if (mode == SampleMode::unconditional) {
        parallel_for(std::size_t(count), [&](std::size_t j) {
            CounterRng rng = CounterRng::for_path(seed, j);
            MartingalePath& mp = e.paths[j];
            detail::walk_steps(kern.steps, e.start_node, rng, mp.nodes);
            mp.terminal_state = detail::draw_terminal(kern.grid, mp.nodes.back(), rng);
        });
        return e;
    }

    std::vector<ConditionalKernel> cond;
    cond.reserve(std::size_t(kern.grid.dim()));
    for (int i = 0; i < kern.grid.dim(); ++i) cond.push_back(condition_kernel(kern, i));
    const auto& lat = kern.grid.lattice(e.start_node);
    double w[3] = {double(lat[0]), double(lat[1]), double(lat[2])};
    parallel_for(std::size_t(count), [&](std::size_t j) {
        CounterRng rng = CounterRng::for_path(seed, j);
        MartingalePath& mp = e.paths[j];
        int i = rng.next_weighted(w, kern.grid.dim());
        mp.realized_state = i;
        detail::walk_steps(cond[std::size_t(i)].steps, e.start_node, rng, mp.nodes);
        mp.terminal_state = i;
    });
    return e;
}

/// Paths conditioned on a fixed realized state.
inline PathEnsemble sample_paths(const ConditionalKernel& ck, const SimplexPoint& p0,
                                 int count, std::uint64_t seed) {
    if (ck.steps.empty())
        throw std::invalid_argument("empty-kernel: no transition rows");
    if (count < 1) throw std::invalid_argument("invalid-count: need at least one path");
    PathEnsemble e;
    e.kind = PathEnsemble::Kind::conditional;
    e.tg = ck.tg;
    e.grid = ck.grid;
    e.requested_p0 = p0;
    e.start_node = ck.grid.snap(p0);
    e.snap_distance = linf_distance(p0, ck.grid.point(e.start_node));
    e.paths.resize(std::size_t(count));
    parallel_for(std::size_t(count), [&](std::size_t j) {
        CounterRng rng = CounterRng::for_path(seed, j);
        MartingalePath& mp = e.paths[j];
        mp.realized_state = ck.state;
        detail::walk_steps(ck.steps, e.start_node, rng, mp.nodes);
        mp.terminal_state = ck.state;
    });
    return e;
}

/// Sample mean and standard error of tau * sum_r H(t_r, p_{r+1}).
inline MeanSe estimate_value_mc(const PathEnsemble& e, const GameSpec& spec) {
    if (e.paths.empty()) return MeanSe{};
    int n = e.tg.steps;
    int nodes = e.grid.node_count();
    double tau = e.tg.tau();
    std::vector<std::vector<double>> htab(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        htab[std::size_t(k)].resize(std::size_t(nodes));
        double t = e.tg.knot(k);
        for (int id = 0; id < nodes; ++id)
            htab[std::size_t(k)][std::size_t(id)] =
                eval_hamiltonian(spec, t, e.grid.point(id)).value;
    }
    std::vector<double> per_path(e.paths.size());
    parallel_for(e.paths.size(), [&](std::size_t j) {
        const auto& nodes_j = e.paths[j].nodes;
        double s = 0.0;
        for (int k = 0; k < n; ++k)
            s += htab[std::size_t(k)][std::size_t(nodes_j[std::size_t(k) + 1])];
        per_path[j] = tau * s;
    });
    return mean_se(per_path);
}

struct PosteriorCell {
    int k = 0;        // knot index; steps+1 denotes the terminal vertex step
    int node = 0;
    long visits = 0;
    double max_dev = 0.0;
};

struct PosteriorReport {
    long min_visits = 0;
    long cell_count = 0;
    double max_deviation = 0.0;
    std::vector<PosteriorCell> cells;
};

/// Empirical P[state | p_k = node] against the node coordinates, tabulated
/// over cells visited at least min_visits times.  Needs a joint ensemble.
inline PosteriorReport posterior_consistency(const PathEnsemble& e, long min_visits = 500) {
    if (e.kind != PathEnsemble::Kind::joint)
        throw std::invalid_argument(
            "missing-realized-state: posterior check needs jointly sampled paths");
    int n = e.tg.steps;
    int nodes = e.grid.node_count();
    int dim = e.grid.dim();
    std::vector<long> visits(std::size_t(n + 2) * std::size_t(nodes), 0);
    std::vector<long> hits(std::size_t(n + 2) * std::size_t(nodes) * std::size_t(dim), 0);
    auto vat = [&](int k, int id) -> long& {
        return visits[std::size_t(k) * std::size_t(nodes) + std::size_t(id)];
    };
    auto hat = [&](int k, int id, int i) -> long& {
        return hits[(std::size_t(k) * std::size_t(nodes) + std::size_t(id)) *
                        std::size_t(dim) +
                    std::size_t(i)];
    };
    for (const auto& mp : e.paths) {
        int i = mp.realized_state;
        for (int k = 0; k <= n; ++k) {
            int id = mp.nodes[std::size_t(k)];
            ++vat(k, id);
            ++hat(k, id, i);
        }
        int vid = e.grid.vertex_id(mp.terminal_state);
        ++vat(n + 1, vid);
        ++hat(n + 1, vid, i);
    }
    PosteriorReport rep;
    rep.min_visits = min_visits;
    for (int k = 0; k <= n + 1; ++k) {
        for (int id = 0; id < nodes; ++id) {
            long v = vat(k, id);
            if (v < min_visits) continue;
            SimplexPoint p = e.grid.point(id);
            double dev = 0.0;
            for (int i = 0; i < dim; ++i)
                dev = std::max(dev, std::abs(double(hat(k, id, i)) / double(v) - p[i]));
            rep.cells.push_back({k, id, v, dev});
            rep.max_deviation = std::max(rep.max_deviation, dev);
        }
    }
    rep.cell_count = long(rep.cells.size());
    return rep;
}

struct PathDiagnostics {
    double in_h_fraction = 1.0;
    long in_h_pairs = 0;
    long in_h_hits = 0;
    long jump_count = 0;
    double max_jump_residual = 0.0;
    double mean_abs_jump_residual = 0.0;
};

/// Occupation of the non-revealing set (knots 1..n-1) and flatness of the
/// value across each jump: V(t_k, p_k) - V(t_k, p_{k-1}) minus a
/// finite-difference tangent slope at p_{k-1} along the jump direction.
inline PathDiagnostics path_diagnostics(const ValueTable& vt, const NonRevealingSet& nrs,
                                        const PathEnsemble& e) {
    PathDiagnostics d;
    int n = e.tg.steps;
    double sum_abs = 0.0;
    for (const auto& mp : e.paths) {
        for (int k = 1; k < n; ++k)
            if (nrs.contains(k, mp.nodes[std::size_t(k)])) ++d.in_h_hits;
        d.in_h_pairs += n - 1;
        for (int k = 1; k <= n; ++k) {
            int from = mp.nodes[std::size_t(k) - 1];
            int to = mp.nodes[std::size_t(k)];
            if (from == to) continue;
            ++d.jump_count;
            const auto& la = vt.grid.lattice(from);
            const auto& lb = vt.grid.lattice(to);
            int da = lb[0] - la[0], db = lb[1] - la[1];
            int g = std::gcd(std::abs(da), std::abs(db));
            int ea = da / g, eb = db / g;
            const std::vector<double>& slice = vt.values[std::size_t(k)];
            double f0 = slice[std::size_t(from)];
            double f1 = slice[std::size_t(to)];
            int fwd = vt.grid.dim() == 2 ? vt.grid.id_of(la[0] + ea)
                                         : vt.grid.id_of(la[0] + ea, la[1] + eb);
            double slope = double(g) * (slice[std::size_t(fwd)] - f0);
            int bwd = vt.grid.dim() == 2 ? vt.grid.id_of(la[0] - ea)
                                         : vt.grid.id_of(la[0] - ea, la[1] - eb);
            if (bwd >= 0) {
                double back = double(g) * (f0 - slice[std::size_t(bwd)]);
                slope = 0.5 * (slope + back);
            }
            double res = std::abs(f1 - f0 - slope);
            sum_abs += res;
            d.max_jump_residual = std::max(d.max_jump_residual, res);
        }
    }
    if (d.in_h_pairs > 0) d.in_h_fraction = double(d.in_h_hits) / double(d.in_h_pairs);
    if (d.jump_count > 0) d.mean_abs_jump_residual = sum_abs / double(d.jump_count);
    return d;
}

enum class PerturbMode { delay, eager, mix };

/// Valid but suboptimal kernels: delay stays put through the first half of
/// the horizon, eager reveals everything immediately, mix blends each row
/// with the identity row.
inline MartingaleKernel perturb_kernel(const MartingaleKernel& kern, PerturbMode mode,
                                       double theta = 0.5) {
    if (mode == PerturbMode::mix && !(theta >= 0.0 && theta <= 1.0))
        throw std::invalid_argument("invalid-theta: mix weight must lie in [0,1]");
    MartingaleKernel out;
    out.tg = kern.tg;
    out.grid = kern.grid;
    out.steps.resize(kern.steps.size());
    int nodes = kern.grid.node_count();
    int half = int(kern.steps.size()) / 2;
    for (std::size_t k = 0; k < kern.steps.size(); ++k) {
        const KernelStep& src = kern.steps[k];
        KernelStep& dst = out.steps[k];
        dst.offsets.resize(std::size_t(nodes) + 1);
        dst.offsets[0] = 0;
        for (int id = 0; id < nodes; ++id) {
            if (mode == PerturbMode::delay) {
                if (int(k) < half) {
                    dst.targets.push_back(id);
                    dst.weights.push_back(1.0);
                } else {
                    for (int j = src.row_begin(id); j < src.row_end(id); ++j) {
                        dst.targets.push_back(src.targets[std::size_t(j)]);
                        dst.weights.push_back(src.weights[std::size_t(j)]);
                    }
                }
            } else if (mode == PerturbMode::eager) {
                const auto& lat = kern.grid.lattice(id);
                for (int i = 0; i < kern.grid.dim(); ++i) {
                    if (lat[std::size_t(i)] == 0) continue;
                    dst.targets.push_back(kern.grid.vertex_id(i));
                    dst.weights.push_back(double(lat[std::size_t(i)]) /
                                          kern.grid.resolution());
                }
            } else {
                bool merged = false;
                for (int j = src.row_begin(id); j < src.row_end(id); ++j) {
                    int tgt = src.targets[std::size_t(j)];
                    double w = theta * src.weights[std::size_t(j)];
                    if (tgt == id) {
                        w += 1.0 - theta;
                        merged = true;
                    }
                    if (w > 0.0) {
                        dst.targets.push_back(tgt);
                        dst.weights.push_back(w);
                    }
                }
                if (!merged && theta < 1.0) {
                    dst.targets.push_back(id);
                    dst.weights.push_back(1.0 - theta);
                }
            }
            dst.offsets[std::size_t(id) + 1] = int(dst.targets.size());
        }
    }
    return out;
}

/// One sampled trajectory of the band process: the p1 coordinate at knots
/// 0..n followed by the terminal vertex coordinate.
struct BandPath {
    std::vector<float> x;
    std::int8_t terminal_state = -1;
};

struct BandEnsemble {
    TimeGrid tg;
    double p0 = 0.5;
    std::string spec_name;
    std::vector<BandPath> paths;
};

/// Exact simulation of the optimal I=2 revelation process for band-shaped
/// non-revealing regions: hold p0 until the band reaches it, split to the
/// edges, then ride an edge, jumping across with the one-step residual
/// weight (h2(t) - h1(s)) / (h2(t) - h1(t)) from the lower edge and its
/// mirror image from the upper one.
inline BandEnsemble sample_band_paths(const GameSpec& spec, const TimeGrid& tg, double p0,
                                      int count, std::uint64_t seed) {
    if (!spec.has_band())
        throw std::invalid_argument("invalid-band: spec provides no band curves");
    if (std::abs(tg.horizon - spec.horizon) > 1e-9)
        throw std::invalid_argument("horizon-mismatch: time grid must end at the spec horizon");
    if (!(p0 >= 0.0 && p0 <= 1.0))
        throw std::invalid_argument("invalid-simplex-point: p0 must lie in [0,1]");
    if (count < 1) throw std::invalid_argument("invalid-count: need at least one path");
    int n = tg.steps;
    std::vector<double> h1(std::size_t(n) + 1), h2(std::size_t(n) + 1);
    for (int k = 0; k <= n; ++k) {
        double t = tg.knot(k);
        h1[std::size_t(k)] = spec.band_low(t);
        h2[std::size_t(k)] = spec.band_high(t);
        if (h1[std::size_t(k)] > h2[std::size_t(k)] + 1e-12)
            throw std::invalid_argument("invalid-band: h1 > h2 at t = " + std::to_string(t));
    }
    BandEnsemble e;
    e.tg = tg;
    e.p0 = p0;
    e.spec_name = spec.name;
    e.paths.resize(std::size_t(count));
    parallel_for(std::size_t(count), [&](std::size_t j) {
        CounterRng rng = CounterRng::for_path(seed, j);
        BandPath& bp = e.paths[j];
        bp.x.resize(std::size_t(n) + 2);
        int edge = -1;  // -1 holding at p0, 0 lower edge, 1 upper edge
        double x = p0;
        for (int k = 0; k <= n; ++k) {
            double lo = h1[std::size_t(k)], hi = h2[std::size_t(k)];
            if (edge < 0) {
                if (x >= lo && x <= hi) {
                    if (hi - lo <= 1e-14) {
                        edge = 0;
                        x = lo;
                    } else {
                        edge = rng.next_double() < (hi - x) / (hi - lo) ? 0 : 1;
                        x = edge == 0 ? lo : hi;
                    }
                }
            } else {
                double prev = x;
                double width = hi - lo;
                if (width <= 1e-14) {
                    x = lo;
                } else {
                    double stay = edge == 0 ? (hi - prev) / width : (prev - lo) / width;
                    stay = std::min(std::max(stay, 0.0), 1.0);
                    if (rng.next_double() < stay) {
                        x = edge == 0 ? lo : hi;
                    } else {
                        edge = 1 - edge;
                        x = edge == 0 ? lo : hi;
                    }
                }
            }
            bp.x[std::size_t(k)] = float(x);
        }
        bp.terminal_state = rng.next_double() < x ? 0 : 1;
        bp.x[std::size_t(n) + 1] = bp.terminal_state == 0 ? 1.0f : 0.0f;
    });
    return e;
}

struct StructureResidual {
    MeanSe residual;               // [X]_T - T + 2 int X(s-) dX(s), per path
    double max_abs_residual = 0.0;
    MeanSe quadratic_variation;    // sum of squared increments, per path
};

/// Pathwise residual of the centered band process structure identity.
/// Restricted to the square-root band started at 1/2 on [0, 1/4].
inline StructureResidual azema_structure_residual(const BandEnsemble& e,
                                                  const GameSpec& spec) {
    bool fits = spec.has_band() && std::abs(e.tg.t0) <= 1e-12 &&
                std::abs(e.tg.horizon - 0.25) <= 1e-12 && std::abs(e.p0 - 0.5) <= 1e-12;
    if (fits) {
        for (double t : {0.0, 0.0625, 0.125, 0.25}) {
            if (std::abs(spec.band_low(t) - (0.5 - std::sqrt(t))) > 1e-9 ||
                std::abs(spec.band_high(t) - (0.5 + std::sqrt(t))) > 1e-9) {
                fits = false;
                break;
            }
        }
    }
    if (!fits)
        throw std::invalid_argument(
            "wrong-fixture: structure residual needs the square-root band from p0 = 1/2");
    double T = e.tg.horizon - e.tg.t0;
    std::vector<double> res(e.paths.size()), qv(e.paths.size());
    parallel_for(e.paths.size(), [&](std::size_t j) {
        const auto& x = e.paths[j].x;
        double q = 0.0, integ = 0.0;
        double prev = double(x[0]) - 0.5;
        for (std::size_t k = 1; k < x.size(); ++k) {
            double cur = double(x[k]) - 0.5;
            double dx = cur - prev;
            q += dx * dx;
            integ += prev * dx;
            prev = cur;
        }
        qv[j] = q;
        res[j] = q - T + 2.0 * integ;
    });
    StructureResidual out;
    out.residual = mean_se(res);
    out.quadratic_variation = mean_se(qv);
    for (double r : res) out.max_abs_residual = std::max(out.max_abs_residual, std::abs(r));
    return out;
}

struct StayEstimate {
    long conditioning = 0;  // paths on the lower edge at the source knot
    long stayed = 0;        // of those, on the lower edge again at the target knot
    double p_hat = 0.0;
    double se = 0.0;
};

/// Empirical probability of finding a path on the lower band edge at knot
/// k_to given it sat on the lower edge at knot k_from.  Round trips count:
/// the martingale property pins this marginal to
/// (h2(t_to) - h1(t_from)) / (h2(t_to) - h1(t_to)) for any step count.
inline StayEstimate band_stay_probability(const BandEnsemble& e, const GameSpec& spec,
                                          int k_from, int k_to) {
    if (!spec.has_band())
        throw std::invalid_argument("invalid-band: spec provides no band curves");
    if (k_from < 0 || k_to <= k_from || k_to > e.tg.steps)
        throw std::invalid_argument("knot-out-of-range: need 0 <= k_from < k_to <= steps");
    auto on_lower = [&](const BandPath& bp, int k) {
        double t = e.tg.knot(k);
        double x = double(bp.x[std::size_t(k)]);
        return x <= 0.5 * (spec.band_low(t) + spec.band_high(t)) &&
               std::abs(x - spec.band_low(t)) <= 1e-6 + 1e-6 * std::abs(x);
    };
    StayEstimate out;
    for (const auto& bp : e.paths) {
        if (!on_lower(bp, k_from)) continue;
        ++out.conditioning;
        if (on_lower(bp, k_to)) ++out.stayed;
    }
    if (out.conditioning > 0) {
        out.p_hat = double(out.stayed) / double(out.conditioning);
        out.se = std::sqrt(std::max(out.p_hat * (1.0 - out.p_hat), 0.0) /
                           double(out.conditioning));
    }
    return out;
}

}  // namespace vexgame
