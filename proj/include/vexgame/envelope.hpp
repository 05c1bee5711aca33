#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "simplex.hpp"

namespace vexgame {

/// Jump decomposition of a point: p = sum_l weights[l] * node(targets[l]).
/// Targets are grid node ids on which the envelope touches the input.
struct SplittingRule {
    std::vector<int> targets;
    std::vector<double> weights;
};

namespace detail {

inline double field_scale(const std::vector<double>& f) {
    double s = 0.0;
    for (double v : f) {
        if (!std::isfinite(v))
            throw std::invalid_argument("non-finite-input: envelope values must be finite");
        s = std::max(s, std::abs(v));
    }
    return 1.0 + s;
}

// 2-d integer cross product of (b-a) x (c-a).
inline long long icross(int ax, int ay, int bx, int by, int cx, int cy) {
    return (long long)(bx - ax) * (cy - ay) - (long long)(by - ay) * (cx - ax);
}

}  // namespace detail

/// Lower convex envelope of nodal values on a simplex grid.  Stores the
/// envelope values, which nodes it touches, and the affine facets (hull cells)
/// it is linear on.  Facet vertex ids are sorted ascending and the facet list
/// is sorted lexicographically, so identical inputs always produce identical
/// structure; point queries resolve boundary ties to the lowest facet id.
class LowerEnvelope {
public:
    LowerEnvelope(const SimplexGrid& grid, std::vector<double> f)
        : grid_(grid), f_(std::move(f)) {
        scale_ = detail::field_scale(f_);
        if (int(f_.size()) != grid.node_count())
            throw std::invalid_argument("field-size-mismatch: f vs grid nodes");
        if (grid.dim() == 2)
            build_chain();
        else
            build_hull();
        env_.resize(f_.size());
        active_.resize(f_.size());
        for (int id = 0; id < grid_.node_count(); ++id) {
            env_[std::size_t(id)] = facet_value_at_node(assign_[std::size_t(id)], id);
            active_[std::size_t(id)] =
                (f_[std::size_t(id)] - env_[std::size_t(id)] <= 1e-9 * scale_) ? 1 : 0;
        }
    }

    const SimplexGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return env_; }
    double value(int node) const { return env_[std::size_t(node)]; }
    bool active(int node) const { return active_[std::size_t(node)] != 0; }
    int facet_count() const { return int(facets_.size()); }
    const std::array<int, 3>& facet(int j) const { return facets_[std::size_t(j)]; }
    int facet_of_node(int node) const { return assign_[std::size_t(node)]; }

    /// Envelope evaluated at an arbitrary simplex point (affine per facet).
    double value_at(const SimplexPoint& p) const {
        int j = locate(p);
        if (grid_.dim() == 2) {
            const auto& fc = facets_[std::size_t(j)];
            double x = p[0] * grid_.resolution();
            int ka = fc[0], kb = fc[1];
            double w = (x - ka) / double(kb - ka);
            return (1.0 - w) * env_[std::size_t(ka)] + w * env_[std::size_t(kb)];
        }
        double w0, w1, w2;
        real_barycentric(j, p, w0, w1, w2);
        const auto& fc = facets_[std::size_t(j)];
        return w0 * env_[std::size_t(fc[0])] + w1 * env_[std::size_t(fc[1])] +
               w2 * env_[std::size_t(fc[2])];
    }

    /// Splitting rule at an arbitrary point: barycentric coordinates of p on
    /// the containing facet, zero-weight vertices dropped.
    SplittingRule split_at(const SimplexPoint& p) const {
        if (p.dim != grid_.dim())
            throw std::invalid_argument("dimension-mismatch: point vs grid");
        try {
            validate_point(p);
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("point-outside-simplex");
        }
        int nearest = grid_.snap(p);
        if (linf_distance(p, grid_.point(nearest)) <= 1e-12 && active(nearest)) {
            SplittingRule r;
            r.targets = {nearest};
            r.weights = {1.0};
            return r;
        }
        int j = locate(p);
        SplittingRule r;
        const auto& fc = facets_[std::size_t(j)];
        if (grid_.dim() == 2) {
            double x = p[0] * grid_.resolution();
            double den = double(fc[1] - fc[0]);
            push_weight(r, fc[0], (fc[1] - x) / den);
            push_weight(r, fc[1], (x - fc[0]) / den);
        } else {
            double w0, w1, w2;
            real_barycentric(j, p, w0, w1, w2);
            push_weight(r, fc[0], w0);
            push_weight(r, fc[1], w1);
            push_weight(r, fc[2], w2);
        }
        normalize(r);
        return r;
    }

    /// Splitting rule at a grid node, using exact integer barycentrics on the
    /// node's assigned facet.  This is the hot path of the backward recursion.
    SplittingRule split_at_node(int node) const {
        SplittingRule r;
        if (active(node)) {
            r.targets = {node};
            r.weights = {1.0};
            return r;
        }
        int j = assign_[std::size_t(node)];
        const auto& fc = facets_[std::size_t(j)];
        if (grid_.dim() == 2) {
            int k = node, ka = fc[0], kb = fc[1];
            int den = kb - ka;
            if (k == ka) { r.targets = {ka}; r.weights = {1.0}; return r; }
            if (k == kb) { r.targets = {kb}; r.weights = {1.0}; return r; }
            push_weight(r, ka, double(kb - k) / den);
            push_weight(r, kb, double(k - ka) / den);
        } else {
            long long d0, d1, d2;
            integer_barycentric(j, node, d0, d1, d2);
            double den = double(d0 + d1 + d2);
            push_weight(r, fc[0], double(d0) / den);
            push_weight(r, fc[1], double(d1) / den);
            push_weight(r, fc[2], double(d2) / den);
        }
        normalize(r);
        return r;
    }

private:
    static void push_weight(SplittingRule& r, int node, double w) {
        if (w > 1e-12) {
            r.targets.push_back(node);
            r.weights.push_back(w);
        }
    }

    static void normalize(SplittingRule& r) {
        double s = 0.0;
        for (double w : r.weights) s += w;
        for (double& w : r.weights) w /= s;
    }

    // ---- I=2: monotone chain over integer abscissa ----

    void build_chain() {
        int n = grid_.node_count();
        std::vector<int> hull;
        hull.reserve(std::size_t(n));
        double eps = 1e-12 * scale_;
        for (int k = 0; k < n; ++k) {
            // pop while the middle point fails to dip below the chord by more
            // than eps per lattice unit (flat runs collapse to one facet)
            while (hull.size() >= 2) {
                int o = hull[hull.size() - 2], a = hull.back();
                double cross = double(a - o) * (f_[std::size_t(k)] - f_[std::size_t(o)]) -
                               (f_[std::size_t(a)] - f_[std::size_t(o)]) * double(k - o);
                if (cross <= eps * double(k - o))
                    hull.pop_back();
                else
                    break;
            }
            hull.push_back(k);
        }
        facets_.reserve(hull.size() - 1);
        for (std::size_t j = 0; j + 1 < hull.size(); ++j)
            facets_.push_back({hull[j], hull[j + 1], -1});
        assign_.resize(std::size_t(n));
        std::size_t j = 0;
        for (int k = 0; k < n; ++k) {
            while (k > facets_[j][1] && j + 1 < facets_.size()) ++j;
            assign_[std::size_t(k)] = int(j);
        }
    }

    // ---- I=3: incremental lower hull of lattice-lifted points ----

    struct Face {
        std::array<int, 3> v;  // node ids, CCW in (a,b)
        bool alive = true;
    };

    void build_hull() {
        const std::vector<double>& f = f_;
        const int m = grid_.resolution();
        std::vector<Face> faces;
        // corners e1=(m,0), e2=(0,m), e3=(0,0) in integer (a,b); CCW order
        int c1 = grid_.id_of(m, 0), c2 = grid_.id_of(0, m), c3 = grid_.id_of(0, 0);
        faces.push_back({{c3, c1, c2}, true});
        double eps = 1e-11 * scale_;

        auto ab = [this](int id) { return grid_.lattice(id); };
        auto plane_at = [&](const Face& fc, int qa, int qb) {
            const auto& p0 = ab(fc.v[0]);
            const auto& p1 = ab(fc.v[1]);
            const auto& p2 = ab(fc.v[2]);
            double z0 = f[std::size_t(fc.v[0])];
            double z1 = f[std::size_t(fc.v[1])];
            double z2 = f[std::size_t(fc.v[2])];
            double det = double(detail::icross(p0[0], p0[1], p1[0], p1[1], p2[0], p2[1]));
            double A = ((z1 - z0) * (p2[1] - p0[1]) - (z2 - z0) * (p1[1] - p0[1])) / det;
            double B = ((z2 - z0) * (p1[0] - p0[0]) - (z1 - z0) * (p2[0] - p0[0])) / det;
            return z0 + A * (qa - p0[0]) + B * (qb - p0[1]);
        };

        for (int q = 0; q < grid_.node_count(); ++q) {
            if (q == c1 || q == c2 || q == c3) continue;
            const auto& pq = ab(q);
            double zq = f[std::size_t(q)];
            // visible faces: plane strictly above the new point
            std::vector<int> visible;
            for (int j = 0; j < int(faces.size()); ++j) {
                if (!faces[std::size_t(j)].alive) continue;
                if (zq < plane_at(faces[std::size_t(j)], pq[0], pq[1]) - eps)
                    visible.push_back(j);
            }
            if (visible.empty()) continue;
            // horizon = directed edges of visible faces whose reverse is not
            // another visible face's edge
            std::map<std::pair<int, int>, int> edge_use;
            for (int j : visible) {
                const auto& v = faces[std::size_t(j)].v;
                for (int e = 0; e < 3; ++e) {
                    int u = v[std::size_t(e)], w = v[std::size_t((e + 1) % 3)];
                    edge_use[{u, w}] = 1;
                }
            }
            for (int j : visible) faces[std::size_t(j)].alive = false;
            for (int j : visible) {
                const auto& v = faces[std::size_t(j)].v;
                for (int e = 0; e < 3; ++e) {
                    int u = v[std::size_t(e)], w = v[std::size_t((e + 1) % 3)];
                    if (edge_use.count({w, u})) continue;  // interior edge
                    const auto& pu = ab(u);
                    const auto& pw = ab(w);
                    if (detail::icross(pu[0], pu[1], pw[0], pw[1], pq[0], pq[1]) == 0)
                        continue;  // degenerate sliver on the boundary line
                    faces.push_back({{u, w, q}, true});
                }
            }
        }

        for (const auto& fc : faces) {
            if (!fc.alive) continue;
            std::array<int, 3> ids{fc.v[0], fc.v[1], fc.v[2]};
            std::sort(ids.begin(), ids.end());
            facets_.push_back(ids);
        }
        std::sort(facets_.begin(), facets_.end());

        // canonical CCW orientation after the id sort
        for (auto& fc : facets_) {
            const auto& p0 = ab(fc[0]);
            const auto& p1 = ab(fc[1]);
            const auto& p2 = ab(fc[2]);
            if (detail::icross(p0[0], p0[1], p1[0], p1[1], p2[0], p2[1]) < 0)
                std::swap(fc[1], fc[2]);
        }

        // exact rasterized node -> facet assignment, lowest facet id wins
        assign_.assign(std::size_t(grid_.node_count()), -1);
        int unassigned = grid_.node_count();
        for (int j = 0; j < int(facets_.size()) && unassigned > 0; ++j) {
            const auto& fc = facets_[std::size_t(j)];
            const auto& p0 = ab(fc[0]);
            const auto& p1 = ab(fc[1]);
            const auto& p2 = ab(fc[2]);
            int alo = std::min({p0[0], p1[0], p2[0]}), ahi = std::max({p0[0], p1[0], p2[0]});
            int blo = std::min({p0[1], p1[1], p2[1]}), bhi = std::max({p0[1], p1[1], p2[1]});
            for (int a = alo; a <= ahi; ++a) {
                for (int b = blo; b <= bhi; ++b) {
                    int id = grid_.id_of(a, b);
                    if (id < 0 || assign_[std::size_t(id)] >= 0) continue;
                    long long d0 = detail::icross(p1[0], p1[1], p2[0], p2[1], a, b);
                    long long d1 = detail::icross(p2[0], p2[1], p0[0], p0[1], a, b);
                    long long d2 = detail::icross(p0[0], p0[1], p1[0], p1[1], a, b);
                    if (d0 >= 0 && d1 >= 0 && d2 >= 0) {
                        assign_[std::size_t(id)] = j;
                        --unassigned;
                    }
                }
            }
        }
        if (unassigned > 0) {
            // eps pathologies only; give leftovers the least-bad facet
            for (int id = 0; id < grid_.node_count(); ++id) {
                if (assign_[std::size_t(id)] >= 0) continue;
                const auto& pq = ab(id);
                long long best = std::numeric_limits<long long>::min();
                int best_j = 0;
                for (int j = 0; j < int(facets_.size()); ++j) {
                    const auto& fc = facets_[std::size_t(j)];
                    const auto& p0 = ab(fc[0]);
                    const auto& p1 = ab(fc[1]);
                    const auto& p2 = ab(fc[2]);
                    long long d0 = detail::icross(p1[0], p1[1], p2[0], p2[1], pq[0], pq[1]);
                    long long d1 = detail::icross(p2[0], p2[1], p0[0], p0[1], pq[0], pq[1]);
                    long long d2 = detail::icross(p0[0], p0[1], p1[0], p1[1], pq[0], pq[1]);
                    long long worst = std::min({d0, d1, d2});
                    if (worst > best) { best = worst; best_j = j; }
                }
                assign_[std::size_t(id)] = best_j;
            }
        }

    }

    /// Input values interpolated affinely on a facet, exact at its vertices.
    double facet_value_at_node(int facet, int node) const {
        const auto& fc = facets_[std::size_t(facet)];
        if (node == fc[0]) return f_[std::size_t(fc[0])];
        if (node == fc[1]) return f_[std::size_t(fc[1])];
        if (grid_.dim() == 2) {
            int ka = fc[0], kb = fc[1];
            double den = double(kb - ka);
            return (f_[std::size_t(ka)] * double(kb - node) +
                    f_[std::size_t(kb)] * double(node - ka)) / den;
        }
        if (node == fc[2]) return f_[std::size_t(fc[2])];
        long long d0, d1, d2;
        integer_barycentric(facet, node, d0, d1, d2);
        double den = double(d0 + d1 + d2);
        return (double(d0) * f_[std::size_t(fc[0])] + double(d1) * f_[std::size_t(fc[1])] +
                double(d2) * f_[std::size_t(fc[2])]) / den;
    }

    void integer_barycentric(int facet, int node, long long& d0, long long& d1,
                             long long& d2) const {
        const auto& fc = facets_[std::size_t(facet)];
        const auto& p0 = grid_.lattice(fc[0]);
        const auto& p1 = grid_.lattice(fc[1]);
        const auto& p2 = grid_.lattice(fc[2]);
        const auto& q = grid_.lattice(node);
        d0 = detail::icross(p1[0], p1[1], p2[0], p2[1], q[0], q[1]);
        d1 = detail::icross(p2[0], p2[1], p0[0], p0[1], q[0], q[1]);
        d2 = detail::icross(p0[0], p0[1], p1[0], p1[1], q[0], q[1]);
    }

    void real_barycentric(int facet, const SimplexPoint& p, double& w0, double& w1,
                          double& w2) const {
        const auto& fc = facets_[std::size_t(facet)];
        const auto& p0 = grid_.lattice(fc[0]);
        const auto& p1 = grid_.lattice(fc[1]);
        const auto& p2 = grid_.lattice(fc[2]);
        double qa = p[0] * grid_.resolution(), qb = p[1] * grid_.resolution();
        auto cr = [](double ax, double ay, double bx, double by, double cx, double cy) {
            return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
        };
        double det = cr(p0[0], p0[1], p1[0], p1[1], p2[0], p2[1]);
        w0 = cr(p1[0], p1[1], p2[0], p2[1], qa, qb) / det;
        w1 = cr(p2[0], p2[1], p0[0], p0[1], qa, qb) / det;
        w2 = cr(p0[0], p0[1], p1[0], p1[1], qa, qb) / det;
    }

    /// Containing facet of an arbitrary point, lowest facet id on ties.
    int locate(const SimplexPoint& p) const {
        if (grid_.dim() == 2) {
            double x = p[0] * grid_.resolution();
            for (int j = 0; j < int(facets_.size()); ++j)
                if (x <= facets_[std::size_t(j)][1] + 1e-12 * grid_.resolution())
                    return j;
            return int(facets_.size()) - 1;
        }
        int best_j = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < int(facets_.size()); ++j) {
            double w0, w1, w2;
            real_barycentric(j, p, w0, w1, w2);
            double worst = std::min({w0, w1, w2});
            if (worst >= -1e-10) return j;
            if (worst > best) { best = worst; best_j = j; }
        }
        return best_j;
    }

    SimplexGrid grid_;
    std::vector<double> f_;
    double scale_ = 1.0;
    std::vector<double> env_;
    std::vector<std::uint8_t> active_;
    std::vector<std::array<int, 3>> facets_;
    std::vector<int> assign_;
};

inline LowerEnvelope convex_envelope(const SimplexGrid& grid, const std::vector<double>& f) {
    return LowerEnvelope(grid, f);
}

inline SplittingRule splitting_at(const LowerEnvelope& env, const SimplexPoint& p) {
    return env.split_at(p);
}

/// Discrete Legendre transform restricted to a dual box: values of
/// max_p <p, phat> - f(p) on a regular lattice over [-L, L]^I.
struct DualField {
    int dim = 2;
    double box = 1.0;
    int resolution = 1;
    std::vector<double> values;  // row-major over (i_1, .., i_I)

    double coord(int idx) const { return -box + 2.0 * box * idx / resolution; }
    int index(int i0, int i1, int i2 = 0) const {
        int r = resolution + 1;
        return dim == 2 ? i0 * r + i1 : (i0 * r + i1) * r + i2;
    }
};

inline DualField fenchel_conjugate(const SimplexGrid& grid, const std::vector<double>& f,
                                   double box, int resolution) {
    if (int(f.size()) != grid.node_count())
        throw std::invalid_argument("field-size-mismatch: f vs grid nodes");
    if (!(box > 0.0) || resolution < 1)
        throw std::invalid_argument("invalid-dual-lattice: box > 0 and resolution >= 1 required");
    detail::field_scale(f);  // rejects non-finite input
    DualField out;
    out.dim = grid.dim();
    out.box = box;
    out.resolution = resolution;
    int r = resolution + 1;
    int dual_count = grid.dim() == 2 ? r * r : r * r * r;
    out.values.resize(std::size_t(dual_count));
    std::vector<SimplexPoint> pts;
    pts.reserve(std::size_t(grid.node_count()));
    for (int id = 0; id < grid.node_count(); ++id) pts.push_back(grid.point(id));
    for (int idx = 0; idx < dual_count; ++idx) {
        int i0, i1, i2 = 0;
        if (grid.dim() == 2) { i0 = idx / r; i1 = idx % r; }
        else { i0 = idx / (r * r); i1 = (idx / r) % r; i2 = idx % r; }
        double h0 = out.coord(i0), h1 = out.coord(i1), h2 = out.coord(i2);
        double best = -std::numeric_limits<double>::infinity();
        for (int id = 0; id < grid.node_count(); ++id) {
            const SimplexPoint& p = pts[std::size_t(id)];
            double v = p[0] * h0 + p[1] * h1 - f[std::size_t(id)];
            if (grid.dim() == 3) v += p[2] * h2;
            if (v > best) best = v;
        }
        out.values[std::size_t(idx)] = best;
    }
    return out;
}

/// Second difference of f at a node along a tangent lattice direction,
/// scaled by m^2.  Directions live in {z : sum z_i = 0} with entries in
/// {-1,0,1}; the stencil node +- direction must stay inside the simplex.
inline double tangent_second_difference(const SimplexGrid& grid, const std::vector<double>& f,
                                        int node, const std::array<int, 3>& dir) {
    if (int(f.size()) != grid.node_count())
        throw std::invalid_argument("field-size-mismatch: f vs grid nodes");
    int sum = dir[0] + dir[1] + (grid.dim() == 3 ? dir[2] : 0);
    if (sum != 0)
        throw std::invalid_argument("invalid-direction: components must sum to zero");
    const auto& a = grid.lattice(node);
    int fwd, bwd;
    if (grid.dim() == 2) {
        fwd = grid.id_of(a[0] + dir[0]);
        bwd = grid.id_of(a[0] - dir[0]);
    } else {
        fwd = grid.id_of(a[0] + dir[0], a[1] + dir[1]);
        bwd = grid.id_of(a[0] - dir[0], a[1] - dir[1]);
    }
    if (fwd < 0 || bwd < 0)
        throw std::domain_error("stencil-out-of-simplex");
    double m2 = double(grid.resolution()) * double(grid.resolution());
    return m2 * (f[std::size_t(fwd)] - 2.0 * f[std::size_t(node)] + f[std::size_t(bwd)]);
}

/// Tangent directions used for convexity checks.
inline std::vector<std::array<int, 3>> tangent_directions(int dim) {
    if (dim == 2) return {{1, -1, 0}};
    return {{1, -1, 0}, {1, 0, -1}, {0, 1, -1}};
}

}  // namespace vexgame
