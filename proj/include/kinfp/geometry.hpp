#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace kinfp {

// Fixed-capacity spatial vector; dimensions 1..3 cover every use here and
// keep cylinder scans allocation-free.
struct Vec {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    int d = 1;

    Vec() = default;
    explicit Vec(int dim) : d(dim) {
        if (dim < 1 || dim > 3) throw std::invalid_argument("Vec: dim must be 1..3");
    }
    Vec(std::initializer_list<double> vals) : d(static_cast<int>(vals.size())) {
        if (d < 1 || d > 3) throw std::invalid_argument("Vec: dim must be 1..3");
        int i = 0;
        for (double x : vals) c[static_cast<std::size_t>(i++)] = x;
    }
    static Vec scalar(double x) { return Vec{x}; }

    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    Vec operator+(const Vec& o) const {
        Vec r(d);
        for (int i = 0; i < d; ++i) r[i] = (*this)[i] + o[i];
        return r;
    }
    Vec operator-(const Vec& o) const {
        Vec r(d);
        for (int i = 0; i < d; ++i) r[i] = (*this)[i] - o[i];
        return r;
    }
    Vec operator-() const {
        Vec r(d);
        for (int i = 0; i < d; ++i) r[i] = -(*this)[i];
        return r;
    }
    Vec operator*(double s) const {
        Vec r(d);
        for (int i = 0; i < d; ++i) r[i] = (*this)[i] * s;
        return r;
    }
    double dot(const Vec& o) const {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += (*this)[i] * o[i];
        return s;
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    bool operator==(const Vec& o) const {
        if (d != o.d) return false;
        for (int i = 0; i < d; ++i)
            if ((*this)[i] != o[i]) return false;
        return true;
    }
};

inline Vec operator*(double s, const Vec& v) { return v * s; }

// z = (t, x, v) with the Galilean group structure.
struct KineticPoint {
    double t = 0.0;
    Vec x;
    Vec v;

    KineticPoint() = default;
    KineticPoint(double t_, Vec x_, Vec v_) : t(t_), x(x_), v(v_) {
        if (x.d != v.d) throw std::invalid_argument("KineticPoint: x and v dims differ");
    }
    static KineticPoint origin(int d) { return KineticPoint(0.0, Vec(d), Vec(d)); }
    int dim() const { return x.d; }
};

// (t1,x1,v1) o (t2,x2,v2) = (t1+t2, x1+x2+t2*v1, v1+v2)
inline KineticPoint galilean_compose(const KineticPoint& z1, const KineticPoint& z2) {
    if (z1.dim() != z2.dim())
        throw std::invalid_argument("galilean_compose: dimension mismatch");
    return KineticPoint(z1.t + z2.t, z1.x + z2.x + z1.v * z2.t, z1.v + z2.v);
}

// z^{-1} = (-t, -x+tv, -v)
inline KineticPoint galilean_inverse(const KineticPoint& z) {
    return KineticPoint(-z.t, -z.x + z.v * z.t, -z.v);
}

// S_r(z) = (r^2 t, r^3 x, r v)
inline KineticPoint scale(double r, const KineticPoint& z) {
    if (!(r > 0.0)) throw std::invalid_argument("scale: r must be positive");
    return KineticPoint(r * r * z.t, z.x * (r * r * r), z.v * r);
}

// |t|^{1/2} + |x|^{1/3} + |v|, homogeneous of degree 1 under S_r
inline double kinetic_norm(const KineticPoint& z) {
    return std::sqrt(std::fabs(z.t)) + std::cbrt(z.x.norm()) + z.v.norm();
}

struct Cylinder {
    KineticPoint center;
    double radius = 1.0;

    Cylinder() = default;
    Cylinder(KineticPoint c, double r) : center(c), radius(r) {
        if (!(r > 0.0)) throw std::invalid_argument("Cylinder: radius must be positive");
    }
    int dim() const { return center.dim(); }
};

// t0 - r^2 < t <= t0, |x - x0 - (t-t0) v0| < r^3, |v - v0| < r
inline bool cylinder_contains(const Cylinder& Q, const KineticPoint& z) {
    if (Q.dim() != z.dim())
        throw std::invalid_argument("cylinder_contains: dimension mismatch");
    const double r = Q.radius;
    const double dt = z.t - Q.center.t;
    if (!(dt > -r * r && dt <= 0.0)) return false;
    const Vec dx = z.x - Q.center.x - Q.center.v * dt;
    if (!(dx.norm() < r * r * r)) return false;
    const Vec dv = z.v - Q.center.v;
    return dv.norm() < r;
}

struct CylinderTranslate {
    KineticPoint z0;
    double r;
};

// Q_r(z0) = { z0 o S_r(w) : w in Q_1(0) }
inline CylinderTranslate cylinder_as_translate(const Cylinder& Q) {
    return CylinderTranslate{Q.center, Q.radius};
}

// w with z = z0 o S_r(w); membership in Q reduces to w in Q_1(0)
inline KineticPoint to_unit_frame(const Cylinder& Q, const KineticPoint& z) {
    return scale(1.0 / Q.radius, galilean_compose(galilean_inverse(Q.center), z));
}

inline KineticPoint from_unit_frame(const Cylinder& Q, const KineticPoint& w) {
    return galilean_compose(Q.center, scale(Q.radius, w));
}

// Sufficient (triangle-inequality) test for Q_rho(zp) inside Q_R(z0).
// Exact in t and v; conservative in x by the rho^2 |v_w| cross term.
inline bool cylinder_inside(const Cylinder& outer, const KineticPoint& zp, double rho) {
    const double R = outer.radius;
    const KineticPoint w = galilean_compose(galilean_inverse(outer.center), zp);
    if (!(w.t <= 0.0 && w.t - rho * rho >= -R * R)) return false;
    if (!(w.v.norm() + rho <= R)) return false;
    return w.x.norm() + rho * rho * w.v.norm() + rho * rho * rho <= R * R * R;
}

struct KineticMonomial {
    double coeff = 0.0;
    int k0 = 0;                      // exponent of t
    std::array<int, 3> k{0, 0, 0};   // exponents of x
    std::array<int, 3> l{0, 0, 0};   // exponents of v
    int d = 1;

    int kinetic_degree() const {
        int s = 2 * k0;
        for (int i = 0; i < d; ++i) s += 3 * k[static_cast<std::size_t>(i)] + l[static_cast<std::size_t>(i)];
        return s;
    }
    double evaluate(const KineticPoint& z) const {
        double r = coeff;
        for (int j = 0; j < k0; ++j) r *= z.t;
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < k[static_cast<std::size_t>(i)]; ++j) r *= z.x[i];
            for (int j = 0; j < l[static_cast<std::size_t>(i)]; ++j) r *= z.v[i];
        }
        return r;
    }
};

struct KineticPolynomial {
    int d = 1;
    std::vector<KineticMonomial> terms;

    double evaluate(const KineticPoint& z) const {
        double s = 0.0;
        for (const auto& m : terms) s += m.evaluate(z);
        return s;
    }
};

// Max term degree; constants and the zero polynomial have degree 0.
inline int kinetic_degree(const KineticPolynomial& p) {
    int deg = 0;
    for (const auto& m : p.terms)
        if (m.coeff != 0.0) deg = std::max(deg, m.kinetic_degree());
    return deg;
}

namespace detail {
inline void enumerate_multi(int d, int cap, std::array<int, 3>& e, int pos,
                            const std::function<void(const std::array<int, 3>&)>& fn) {
    if (pos == d) {
        fn(e);
        return;
    }
    int used = 0;
    for (int i = 0; i < pos; ++i) used += e[static_cast<std::size_t>(i)];
    for (int v = 0; v + used <= cap; ++v) {
        e[static_cast<std::size_t>(pos)] = v;
        enumerate_multi(d, cap, e, pos + 1, fn);
    }
    e[static_cast<std::size_t>(pos)] = 0;
}
}  // namespace detail

// All unit-coefficient monomials with deg_kin < beta, in a fixed
// deterministic order (by degree, then t/x/v exponent lexicographic).
inline std::vector<KineticMonomial> monomials_below(int d, double beta) {
    std::vector<KineticMonomial> out;
    if (!(beta > 0.0)) return out;
    const int cap = static_cast<int>(std::ceil(beta));
    std::array<int, 3> k{0, 0, 0}, l{0, 0, 0};
    for (int k0 = 0; 2 * k0 < beta; ++k0) {
        detail::enumerate_multi(d, cap / 3 + 1, k, 0, [&](const std::array<int, 3>& ke) {
            detail::enumerate_multi(d, cap, l, 0, [&](const std::array<int, 3>& le) {
                KineticMonomial m;
                m.coeff = 1.0;
                m.k0 = k0;
                m.k = ke;
                m.l = le;
                m.d = d;
                if (m.kinetic_degree() < beta) out.push_back(m);
            });
        });
        (void)k;
    }
    std::sort(out.begin(), out.end(), [](const KineticMonomial& a, const KineticMonomial& b) {
        if (a.kinetic_degree() != b.kinetic_degree()) return a.kinetic_degree() < b.kinetic_degree();
        if (a.k0 != b.k0) return a.k0 < b.k0;
        if (a.k != b.k) return a.k < b.k;
        return a.l < b.l;
    });
    return out;
}

}  // namespace kinfp
