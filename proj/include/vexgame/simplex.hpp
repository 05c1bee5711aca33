#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vexgame {

/// Probability vectors over 2 or 3 states.  Fixed capacity 3, logical size I.
struct SimplexPoint {
    int dim = 2;
    std::array<double, 3> c{0.0, 0.0, 0.0};

    SimplexPoint() = default;
    SimplexPoint(double a, double b) : dim(2), c{a, b, 0.0} {}
    SimplexPoint(double a, double b, double d) : dim(3), c{a, b, d} {}

    double operator[](int i) const { return c[std::size_t(i)]; }
    double& operator[](int i) { return c[std::size_t(i)]; }
};

inline void validate_point(const SimplexPoint& p, double tol = 1e-9) {
    if (p.dim != 2 && p.dim != 3)
        throw std::invalid_argument("unsupported-dimension: I must be 2 or 3");
    double sum = 0.0;
    for (int i = 0; i < p.dim; ++i) {
        if (p[i] < -tol)
            throw std::invalid_argument("invalid-simplex-point: negative coordinate");
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > tol)
        throw std::invalid_argument("invalid-simplex-point: coordinates sum to " +
                                    std::to_string(sum));
}

inline SimplexPoint vertex_point(int dim, int state) {
    SimplexPoint p;
    p.dim = dim;
    p[state] = 1.0;
    return p;
}

inline double linf_distance(const SimplexPoint& a, const SimplexPoint& b) {
    double d = 0.0;
    for (int i = 0; i < a.dim; ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/// Uniform lattice over the probability simplex: nodes are integer
/// compositions (a_1,..,a_I) of the resolution m, coordinates a_i/m, listed in
/// lexicographic order of the integer tuple.  For I=2 the node id equals a_1.
class SimplexGrid {
public:
    SimplexGrid(int dim, int resolution) : dim_(dim), m_(resolution) {
        if (dim != 2 && dim != 3)
            throw std::invalid_argument("unsupported-dimension: I must be 2 or 3");
        if (resolution < 1)
            throw std::invalid_argument("resolution-too-small: m must be >= 1");
        if (dim == 2) {
            lattice_.reserve(std::size_t(m_) + 1);
            for (int a = 0; a <= m_; ++a)
                lattice_.push_back({a, m_ - a, 0});
        } else {
            lattice_.reserve(std::size_t(m_ + 1) * std::size_t(m_ + 2) / 2);
            for (int a = 0; a <= m_; ++a)
                for (int b = 0; a + b <= m_; ++b)
                    lattice_.push_back({a, b, m_ - a - b});
        }
    }

    int dim() const { return dim_; }
    int resolution() const { return m_; }
    int node_count() const { return int(lattice_.size()); }

    const std::array<int, 3>& lattice(int id) const { return lattice_[std::size_t(id)]; }

    SimplexPoint point(int id) const {
        const auto& a = lattice_[std::size_t(id)];
        SimplexPoint p;
        p.dim = dim_;
        for (int i = 0; i < dim_; ++i) p[i] = double(a[std::size_t(i)]) / double(m_);
        return p;
    }

    /// Id of the node with integer coordinates (a, b, .) or -1 if outside.
    int id_of(int a, int b = -1) const {
        if (dim_ == 2) {
            if (a < 0 || a > m_) return -1;
            return a;
        }
        if (a < 0 || b < 0 || a + b > m_) return -1;
        // a fixed blocks have m+1-a entries each.
        return a * (m_ + 1) - a * (a - 1) / 2 + b;
    }

    /// State index if the node is a vertex e_i, else -1.
    int vertex_state(int id) const {
        const auto& a = lattice_[std::size_t(id)];
        for (int i = 0; i < dim_; ++i)
            if (a[std::size_t(i)] == m_) return i;
        return -1;
    }

    int vertex_id(int state) const {
        std::array<int, 3> a{0, 0, 0};
        a[std::size_t(state)] = m_;
        return dim_ == 2 ? id_of(a[0]) : id_of(a[0], a[1]);
    }

    /// Nearest grid node in L-inf; ties resolve to the lexicographically
    /// smallest integer tuple, i.e. the smallest id.
    int snap(const SimplexPoint& p) const {
        validate_point(p);
        if (p.dim != dim_)
            throw std::invalid_argument("dimension-mismatch: point vs grid");
        int best = 0;
        double best_d = 2.0;
        // Search the handful of lattice points near round(p*m).
        int ra = int(std::lround(p[0] * m_));
        int rb = dim_ == 3 ? int(std::lround(p[1] * m_)) : 0;
        for (int da = -1; da <= 1; ++da) {
            if (dim_ == 2) {
                int id = id_of(ra + da);
                if (id < 0) continue;
                double d = linf_distance(point(id), p);
                if (d < best_d - 1e-15) { best_d = d; best = id; }
                else if (d < best_d + 1e-15 && id < best) best = id;
            } else {
                for (int db = -1; db <= 1; ++db) {
                    int id = id_of(ra + da, rb + db);
                    if (id < 0) continue;
                    double d = linf_distance(point(id), p);
                    if (d < best_d - 1e-15) { best_d = d; best = id; }
                    else if (d < best_d + 1e-15 && id < best) best = id;
                }
            }
        }
        return best;
    }

    /// Piecewise-linear interpolation of nodal values at an arbitrary point:
    /// linear on segments for I=2, barycentric on the containing lattice
    /// triangle for I=3.
    double interpolate(const std::vector<double>& f, const SimplexPoint& p) const {
        if (int(f.size()) != node_count())
            throw std::invalid_argument("field-size-mismatch");
        validate_point(p);
        if (dim_ == 2) {
            double x = p[0] * m_;
            int a = std::min(int(std::floor(x)), m_ - 1);
            if (a < 0) a = 0;
            double w = x - a;
            return (1.0 - w) * f[std::size_t(id_of(a))] + w * f[std::size_t(id_of(a + 1))];
        }
        double xa = p[0] * m_, xb = p[1] * m_;
        int a = std::min(int(std::floor(xa)), m_ - 1);
        int b = std::min(int(std::floor(xb)), m_ - 1);
        if (a < 0) a = 0;
        if (b < 0) b = 0;
        if (a + b > m_ - 1) {  // clamp into the triangle
            int over = a + b - (m_ - 1);
            if (a >= b) a -= over; else b -= over;
            if (a < 0) { b += a; a = 0; }
            if (b < 0) { a += b; b = 0; }
        }
        double u = xa - a, v = xb - b;
        // Cell [(a,b),(a+1,b),(a,b+1)] splits into lower (u+v<=1) and upper
        // triangles; the upper one leans on (a+1,b+1).
        if (u + v <= 1.0) {
            return (1.0 - u - v) * f[std::size_t(id_of(a, b))] +
                   u * f[std::size_t(id_of(a + 1, b))] +
                   v * f[std::size_t(id_of(a, b + 1))];
        }
        int id_ab = id_of(a + 1, b + 1);
        if (id_ab < 0) {  // diagonal boundary: fall back to the lower face
            double s = u + v;
            u /= s; v /= s;
            return u * f[std::size_t(id_of(a + 1, b))] + v * f[std::size_t(id_of(a, b + 1))];
        }
        return (u + v - 1.0) * f[std::size_t(id_ab)] +
               (1.0 - v) * f[std::size_t(id_of(a + 1, b))] +
               (1.0 - u) * f[std::size_t(id_of(a, b + 1))];
    }

private:
    int dim_;
    int m_;
    std::vector<std::array<int, 3>> lattice_;
};

inline SimplexGrid make_grid(int dim, int resolution) {
    return SimplexGrid(dim, resolution);
}

}  // namespace vexgame
