#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinfp/geometry.hpp"
#include "kinfp/util.hpp"

namespace kinfp {

// Uniform grid on [t_min, t_max] x T^d x [-V, V]^d.
// x is periodic (endpoint excluded), v includes both endpoints.
struct Grid {
    int d = 1;
    int nt = 1, nx = 4, nv = 4;
    double t_min = 0.0, t_max = 0.0;
    double L = 2.0 * std::numbers::pi;
    double V = 8.0;

    Grid() = default;
    Grid(int d_, int nt_, int nx_, int nv_, double t_min_, double t_max_,
         double L_ = 2.0 * std::numbers::pi, double V_ = 8.0)
        : d(d_), nt(nt_), nx(nx_), nv(nv_), t_min(t_min_), t_max(t_max_), L(L_), V(V_) {
        validate();
    }

    void validate() const {
        if (d != 1 && d != 2) throw std::invalid_argument("Grid: d must be 1 or 2");
        if (nt < 1) throw std::invalid_argument("Grid: nt must be >= 1");
        if (nx < 4) throw std::invalid_argument("Grid: nx must be >= 4");
        if (nv < 4) throw std::invalid_argument("Grid: nv must be >= 4");
        if (!(t_max >= t_min)) throw std::invalid_argument("Grid: t_max < t_min");
        if (nt == 1 && t_max != t_min) throw std::invalid_argument("Grid: nt=1 needs t_max == t_min");
        if (!(L > 0.0) || !(V > 0.0)) throw std::invalid_argument("Grid: L and V must be positive");
    }

    double dt() const { return nt > 1 ? (t_max - t_min) / (nt - 1) : 0.0; }
    double dx() const { return L / nx; }
    double dv() const { return 2.0 * V / (nv - 1); }

    double t(int i) const { return t_min + i * dt(); }
    double x(int j) const { return j * dx(); }
    double v(int k) const { return -V + k * dv(); }

    std::int64_t nxd() const { return d == 1 ? nx : static_cast<std::int64_t>(nx) * nx; }
    std::int64_t nvd() const { return d == 1 ? nv : static_cast<std::int64_t>(nv) * nv; }
    std::int64_t points() const { return static_cast<std::int64_t>(nt) * nxd() * nvd(); }

    bool same_layout(const Grid& o) const {
        return d == o.d && nt == o.nt && nx == o.nx && nv == o.nv && t_min == o.t_min &&
               t_max == o.t_max && L == o.L && V == o.V;
    }
};

// Dense samples indexed [t][x...][v...] row-major; the per-(t,x) velocity
// slice is contiguous, which the diffusion sweeps and v-integrals rely on.
struct Field {
    Grid grid;
    std::vector<double> data;

    Field() = default;
    explicit Field(const Grid& g) : grid(g), data(static_cast<std::size_t>(g.points()), 0.0) {}

    std::int64_t index(int it, const int* ix, const int* iv) const {
        std::int64_t idx = it;
        for (int a = 0; a < grid.d; ++a) idx = idx * grid.nx + ix[a];
        for (int a = 0; a < grid.d; ++a) idx = idx * grid.nv + iv[a];
        return idx;
    }
    double& at(int it, const int* ix, const int* iv) {
        return data[static_cast<std::size_t>(index(it, ix, iv))];
    }
    double at(int it, const int* ix, const int* iv) const {
        return data[static_cast<std::size_t>(index(it, ix, iv))];
    }
    // d=1 convenience
    double& at1(int it, int ix, int iv) {
        return data[static_cast<std::size_t>((static_cast<std::int64_t>(it) * grid.nx + ix) * grid.nv + iv)];
    }
    double at1(int it, int ix, int iv) const {
        return data[static_cast<std::size_t>((static_cast<std::int64_t>(it) * grid.nx + ix) * grid.nv + iv)];
    }

    KineticPoint point(int it, const int* ix, const int* iv) const {
        Vec x(grid.d), v(grid.d);
        for (int a = 0; a < grid.d; ++a) x[a] = grid.x(ix[a]);
        for (int a = 0; a < grid.d; ++a) v[a] = grid.v(iv[a]);
        return KineticPoint(grid.t(it), x, v);
    }
};

// Samples over (t,x) only, the shape of rho[f] and of v-integrals.
struct FieldTX {
    Grid grid;
    std::vector<double> data;

    FieldTX() = default;
    explicit FieldTX(const Grid& g)
        : grid(g), data(static_cast<std::size_t>(static_cast<std::int64_t>(g.nt) * g.nxd()), 0.0) {}

    std::int64_t index(int it, const int* ix) const {
        std::int64_t idx = it;
        for (int a = 0; a < grid.d; ++a) idx = idx * grid.nx + ix[a];
        return idx;
    }
    double& at(int it, const int* ix) { return data[static_cast<std::size_t>(index(it, ix))]; }
    double at(int it, const int* ix) const { return data[static_cast<std::size_t>(index(it, ix))]; }
    double& at1(int it, int ix) {
        return data[static_cast<std::size_t>(static_cast<std::int64_t>(it) * grid.nx + ix)];
    }
    double at1(int it, int ix) const {
        return data[static_cast<std::size_t>(static_cast<std::int64_t>(it) * grid.nx + ix)];
    }
};

struct MaxwellianRef {
    int d = 1;
    explicit MaxwellianRef(int d_ = 1) : d(d_) {}
    double mu(const Vec& v) const {
        return std::pow(2.0 * std::numbers::pi, -0.5 * d) * std::exp(-0.5 * v.norm2());
    }
    double sqrt_mu(const Vec& v) const {
        return std::pow(2.0 * std::numbers::pi, -0.25 * d) * std::exp(-0.25 * v.norm2());
    }
};

inline void decode_xv(const Grid& g, std::int64_t flat_xv, int* ix, int* iv) {
    for (int a = g.d - 1; a >= 0; --a) {
        iv[a] = static_cast<int>(flat_xv % g.nv);
        flat_xv /= g.nv;
    }
    for (int a = g.d - 1; a >= 0; --a) {
        ix[a] = static_cast<int>(flat_xv % g.nx);
        flat_xv /= g.nx;
    }
}

template <class Fn>
Field sample(Fn&& fn, const Grid& grid) {
    Field out(grid);
    const std::int64_t per_t = grid.nxd() * grid.nvd();
    for (int it = 0; it < grid.nt; ++it) {
        const std::int64_t base = static_cast<std::int64_t>(it) * per_t;
        parallel_for(per_t, [&](std::int64_t s) {
            int ix[2] = {0, 0}, iv[2] = {0, 0};
            decode_xv(grid, s, ix, iv);
            const double val = fn(out.point(it, ix, iv));
            out.data[static_cast<std::size_t>(base + s)] = val;
        });
    }
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (!std::isfinite(out.data[i]))
            throw std::runtime_error("sample: non-finite value at flat index " + std::to_string(i));
    return out;
}

enum class Deriv { Dt, Dx, Dv, Dvv, Transport };

struct DerivSpec {
    Deriv which = Deriv::Dt;
    int i = 0;  // first axis (x_i or v_i)
    int j = 0;  // second v axis for Dvv
};

namespace detail {

// One-dimensional second-order stencils along a line of n samples with
// stride s. Periodic axes wrap; otherwise one-sided second order at the ends.
inline double d1_line(const double* p, int n, std::int64_t s, int i, double h, bool periodic) {
    if (periodic) {
        const int ip = (i + 1) % n, im = (i - 1 + n) % n;
        return (p[ip * s] - p[im * s]) / (2.0 * h);
    }
    if (i == 0) return (-3.0 * p[0] + 4.0 * p[s] - p[2 * s]) / (2.0 * h);
    if (i == n - 1)
        return (3.0 * p[static_cast<std::int64_t>(n - 1) * s] - 4.0 * p[static_cast<std::int64_t>(n - 2) * s] +
                p[static_cast<std::int64_t>(n - 3) * s]) /
               (2.0 * h);
    return (p[static_cast<std::int64_t>(i + 1) * s] - p[static_cast<std::int64_t>(i - 1) * s]) / (2.0 * h);
}

inline double d2_line(const double* p, int n, std::int64_t s, int i, double h) {
    auto v = [&](int k) { return p[static_cast<std::int64_t>(k) * s]; };
    if (i == 0) return (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / (h * h);
    if (i == n - 1) return (2.0 * v(n - 1) - 5.0 * v(n - 2) + 4.0 * v(n - 3) - v(n - 4)) / (h * h);
    return (v(i + 1) - 2.0 * v(i) + v(i - 1)) / (h * h);
}

}  // namespace detail

inline Field finite_difference(const Field& f, const DerivSpec& spec) {
    const Grid& g = f.grid;
    if (spec.which == Deriv::Dt || spec.which == Deriv::Transport) {
        if (g.nt < 4) throw std::invalid_argument("finite_difference: nt < 4");
    }
    if ((spec.which == Deriv::Dx || spec.which == Deriv::Dv || spec.which == Deriv::Dvv ||
         spec.which == Deriv::Transport) &&
        (spec.i < 0 || spec.i >= g.d || spec.j < 0 || spec.j >= g.d))
        throw std::invalid_argument("finite_difference: axis out of range");

    Field out(g);
    const std::int64_t n = g.points();

    // stride of one step along each axis in the flat layout
    const std::int64_t sv1 = 1;
    const std::int64_t sv0 = (g.d == 2) ? g.nv : 1;
    const std::int64_t sx1 = g.nvd();
    const std::int64_t sx0 = (g.d == 2) ? sx1 * g.nx : sx1;
    const std::int64_t st = g.nxd() * g.nvd();
    auto stride_x = [&](int a) { return a == 0 ? sx0 : sx1; };
    auto stride_v = [&](int a) { return (g.d == 2 && a == 0) ? sv0 : sv1; };

    parallel_for(n, [&](std::int64_t s) {
        std::int64_t rem = s;
        int iv[2] = {0, 0}, ix[2] = {0, 0};
        for (int a = g.d - 1; a >= 0; --a) {
            iv[a] = static_cast<int>(rem % g.nv);
            rem /= g.nv;
        }
        for (int a = g.d - 1; a >= 0; --a) {
            ix[a] = static_cast<int>(rem % g.nx);
            rem /= g.nx;
        }
        const int it = static_cast<int>(rem);

        const double* base = f.data.data();
        double val = 0.0;
        switch (spec.which) {
            case Deriv::Dt: {
                const double* line = base + (s - static_cast<std::int64_t>(it) * st);
                val = detail::d1_line(line, g.nt, st, it, g.dt(), false);
                break;
            }
            case Deriv::Dx: {
                const std::int64_t str = stride_x(spec.i);
                const double* line = base + (s - static_cast<std::int64_t>(ix[spec.i]) * str);
                val = detail::d1_line(line, g.nx, str, ix[spec.i], g.dx(), true);
                break;
            }
            case Deriv::Dv: {
                const std::int64_t str = stride_v(spec.i);
                const double* line = base + (s - static_cast<std::int64_t>(iv[spec.i]) * str);
                val = detail::d1_line(line, g.nv, str, iv[spec.i], g.dv(), false);
                break;
            }
            case Deriv::Dvv: {
                if (spec.i == spec.j) {
                    const std::int64_t str = stride_v(spec.i);
                    const double* line = base + (s - static_cast<std::int64_t>(iv[spec.i]) * str);
                    val = detail::d2_line(line, g.nv, str, iv[spec.i], g.dv());
                }
                break;
            }
            case Deriv::Transport: {
                const double* tline = base + (s - static_cast<std::int64_t>(it) * st);
                val = detail::d1_line(tline, g.nt, st, it, g.dt(), false);
                for (int a = 0; a < g.d; ++a) {
                    const std::int64_t str = stride_x(a);
                    const double* line = base + (s - static_cast<std::int64_t>(ix[a]) * str);
                    val += g.v(iv[a]) * detail::d1_line(line, g.nx, str, ix[a], g.dx(), true);
                }
                break;
            }
        }
        out.data[static_cast<std::size_t>(s)] = val;
    });

    // mixed second v-derivative as two first-derivative passes, second
    // order everywhere including edges
    if (spec.which == Deriv::Dvv && spec.i != spec.j)
        out = finite_difference(finite_difference(f, DerivSpec{Deriv::Dv, spec.i, 0}),
                                DerivSpec{Deriv::Dv, spec.j, 0});
    return out;
}

// Multilinear interpolation: linear in t (clamped to the time box),
// periodic wrap in x, zero extension outside the v box.
inline double interpolate(const Field& f, const KineticPoint& z) {
    const Grid& g = f.grid;
    if (z.dim() != g.d) throw std::invalid_argument("interpolate: dimension mismatch");

    int i0[5] = {0, 0, 0, 0, 0};
    double fr[5] = {0, 0, 0, 0, 0};
    int axes = 0;

    if (g.nt > 1) {
        double u = (z.t - g.t_min) / g.dt();
        u = std::min(std::max(u, 0.0), static_cast<double>(g.nt - 1));
        i0[axes] = std::min(static_cast<int>(u), g.nt - 2);
        fr[axes] = u - i0[axes];
        ++axes;
    }
    const int t_axes = axes;
    for (int a = 0; a < g.d; ++a) {
        double u = z.x[a] / g.dx();
        u -= std::floor(u / g.nx) * g.nx;
        i0[axes] = static_cast<int>(u) % g.nx;
        fr[axes] = u - std::floor(u);
        ++axes;
    }
    for (int a = 0; a < g.d; ++a) {
        const double u = (z.v[a] + g.V) / g.dv();
        if (u < 0.0 || u > static_cast<double>(g.nv - 1)) return 0.0;
        i0[axes] = std::min(static_cast<int>(u), g.nv - 2);
        fr[axes] = u - i0[axes];
        ++axes;
    }

    double acc = 0.0;
    for (int mask = 0; mask < (1 << axes); ++mask) {
        double w = 1.0;
        int it = 0, ix[2] = {0, 0}, iv[2] = {0, 0};
        int a = 0;
        if (g.nt > 1) {
            const int hi = (mask >> a) & 1;
            w *= hi ? fr[a] : 1.0 - fr[a];
            it = i0[a] + hi;
            ++a;
        }
        for (int b = 0; b < g.d; ++b, ++a) {
            const int hi = (mask >> a) & 1;
            w *= hi ? fr[a] : 1.0 - fr[a];
            ix[b] = (i0[a] + hi) % g.nx;
        }
        for (int b = 0; b < g.d; ++b, ++a) {
            const int hi = (mask >> a) & 1;
            w *= hi ? fr[a] : 1.0 - fr[a];
            iv[b] = i0[a] + hi;
        }
        if (w != 0.0) acc += w * f.at(it, ix, iv);
    }
    (void)t_axes;
    return acc;
}

// Trapezoid along every v axis. Reusing the solver grid beats a dedicated
// Gauss rule here: the integrand values are already in cache, and with
// V=8 the Gaussian tails put the truncation error below 1.3e-14.
template <class W>
FieldTX quadrature_v(const Field& f, W&& weight) {
    const Grid& g = f.grid;
    FieldTX out(g);
    const std::int64_t ntx = static_cast<std::int64_t>(g.nt) * g.nxd();
    const std::int64_t nvd = g.nvd();
    const double dv = g.dv();

    parallel_for(ntx, [&](std::int64_t row) {
        const double* slice = f.data.data() + row * nvd;
        std::vector<double> terms(static_cast<std::size_t>(nvd));
        int ivx[2] = {0, 0};
        for (std::int64_t q = 0; q < nvd; ++q) {
            std::int64_t remv = q;
            for (int a = g.d - 1; a >= 0; --a) {
                ivx[a] = static_cast<int>(remv % g.nv);
                remv /= g.nv;
            }
            double w = 1.0;
            Vec vv(g.d);
            for (int a = 0; a < g.d; ++a) {
                vv[a] = g.v(ivx[a]);
                w *= (ivx[a] == 0 || ivx[a] == g.nv - 1) ? 0.5 * dv : dv;
            }
            terms[static_cast<std::size_t>(q)] = slice[q] * weight(vv) * w;
        }
        out.data[static_cast<std::size_t>(row)] = pairwise_sum(terms);
    });
    return out;
}

}  // namespace kinfp
