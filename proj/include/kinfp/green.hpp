#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "kinfp/field.hpp"
#include "kinfp/geometry.hpp"
#include "kinfp/util.hpp"

namespace kinfp {

// Fundamental kernel of d_t + v.grad_x - lap_v. The x offset is -(t/2)v;
// with the opposite sign the semigroup identity fails, which
// chapman_kolmogorov_check guards.
inline double green_eval(const KineticPoint& z) {
    const double t = z.t;
    if (!(t > 0.0)) return 0.0;
    const int d = z.dim();
    double e = 0.0;
    for (int i = 0; i < d; ++i) {
        const double y = z.x[i] - 0.5 * t * z.v[i];
        e += 3.0 * y * y / (t * t * t) + z.v[i] * z.v[i] / (4.0 * t);
    }
    const double pref = std::pow(std::numbers::sqrt3 / (2.0 * std::numbers::pi * t * t), d);
    return pref * std::exp(-e);
}

struct ConvParams {
    int tau_levels = 24;      // graded subintervals, each half the previous
    int gl_tau = 8;           // GL nodes per tau subinterval
    int gl_box = 20;          // GL nodes per spatial axis over the sigma window
    double sigma_mult = 6.0;  // window half-width in standard deviations
    int lattice_per_axis = 9; // sup-lattice resolution per (t,x,v) axis
};

namespace detail {

// Integrate over (tau_lo, tau_hi) with subintervals accumulating
// geometrically at the lower end, where the kernel concentrates.
template <class F>
double integrate_graded_tau(double tau_lo, double tau_hi, const ConvParams& p, F&& fn) {
    if (!(tau_hi > tau_lo)) return 0.0;
    const double span = tau_hi - tau_lo;
    const auto& gr = gauss_legendre(p.gl_tau);
    std::vector<double> parts;
    parts.reserve(static_cast<std::size_t>(p.tau_levels));
    double hi = 1.0;
    for (int l = 0; l < p.tau_levels; ++l) {
        const double lo = (l == p.tau_levels - 1) ? 0.0 : hi * 0.5;
        const double a = tau_lo + span * lo;
        const double b = tau_lo + span * hi;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double s = 0.0;
        for (int i = 0; i < p.gl_tau; ++i)
            s += gr.weights[static_cast<std::size_t>(i)] *
                 fn(mid + half * gr.nodes[static_cast<std::size_t>(i)]);
        parts.push_back(half * s);
        hi = lo;
    }
    return pairwise_sum(parts);
}

inline double sigma_y(double tau) { return std::sqrt(tau * tau * tau / 6.0); }
inline double sigma_v(double tau) { return std::sqrt(2.0 * tau); }

}  // namespace detail

// Core of the kinetic convolution (G *kin S)(z) for a source given as a
// callable of (tau, ztilde) supported in t in [t_lo, t_hi]. Written in the
// kernel's own Gaussian coordinates y, V so one window rule covers all tau:
//   xt = x - tau v - y + (tau/2) V,   vt = v - V.
template <class F>
double kinetic_convolution_core(const F& integrand, double t_lo, double t_hi,
                                const KineticPoint& z, const ConvParams& p) {
    if (!std::isfinite(t_lo) || !std::isfinite(t_hi) || t_hi < t_lo)
        throw std::invalid_argument("kinetic_convolution: source must have compact time support");
    const int d = z.dim();
    const double tau_lo = std::max(0.0, z.t - t_hi);
    const double tau_hi = z.t - t_lo;
    const auto& gb = gauss_legendre(p.gl_box);
    const int nb = p.gl_box;

    return detail::integrate_graded_tau(tau_lo, tau_hi, p, [&](double tau) {
        const double sy = detail::sigma_y(tau), sv = detail::sigma_v(tau);
        const double wy = p.sigma_mult * sy, wv = p.sigma_mult * sv;
        const double cy = 3.0 / (tau * tau * tau), cv = 1.0 / (4.0 * tau);
        const double pref = std::pow(std::numbers::sqrt3 / (2.0 * std::numbers::pi * tau * tau), d);

        // tensor GL over (y, V) in [-w, w]^{2d}
        const int total = [&] {
            int n = 1;
            for (int a = 0; a < 2 * d; ++a) n *= nb;
            return n;
        }();
        std::vector<double> terms(static_cast<std::size_t>(total));
        for (int flat = 0; flat < total; ++flat) {
            int rem = flat;
            double weight = pref, expo = 0.0;
            Vec y(d), V(d);
            for (int a = 0; a < d; ++a) {
                const int i = rem % nb;
                rem /= nb;
                y[a] = wy * gb.nodes[static_cast<std::size_t>(i)];
                weight *= wy * gb.weights[static_cast<std::size_t>(i)];
                expo += cy * y[a] * y[a];
            }
            for (int a = 0; a < d; ++a) {
                const int i = rem % nb;
                rem /= nb;
                V[a] = wv * gb.nodes[static_cast<std::size_t>(i)];
                weight *= wv * gb.weights[static_cast<std::size_t>(i)];
                expo += cv * V[a] * V[a];
            }
            Vec xt(d), vt(d);
            for (int a = 0; a < d; ++a) {
                xt[a] = z.x[a] - tau * z.v[a] - y[a] + 0.5 * tau * V[a];
                vt[a] = z.v[a] - V[a];
            }
            terms[static_cast<std::size_t>(flat)] =
                weight * std::exp(-expo) * integrand(tau, KineticPoint(z.t - tau, xt, vt));
        }
        return pairwise_sum(terms);
    });
}

// (G *kin S)(z) for a plain source callable S(ztilde)
template <class S>
double kinetic_convolution(const S& source, double t_lo, double t_hi, const KineticPoint& z,
                           const ConvParams& p = {}) {
    return kinetic_convolution_core(
        [&](double, const KineticPoint& zt) { return source(zt); }, t_lo, t_hi, z, p);
}

// Unit mass of G(t,.,.) by the same windowed quadrature, per-axis separable.
inline double green_mass(int d, double t, const ConvParams& p = {}) {
    if (!(t > 0.0)) return 0.0;
    const auto& gb = gauss_legendre(p.gl_box);
    const double sy = detail::sigma_y(t), sv = detail::sigma_v(t);
    const double wy = p.sigma_mult * sy, wv = p.sigma_mult * sv;
    double iy = 0.0, iv = 0.0;
    for (int i = 0; i < p.gl_box; ++i) {
        const double ny = wy * gb.nodes[static_cast<std::size_t>(i)];
        const double nv = wv * gb.nodes[static_cast<std::size_t>(i)];
        iy += wy * gb.weights[static_cast<std::size_t>(i)] *
              std::exp(-3.0 * ny * ny / (t * t * t));
        iv += wv * gb.weights[static_cast<std::size_t>(i)] * std::exp(-nv * nv / (4.0 * t));
    }
    iy *= std::sqrt(3.0 / (std::numbers::pi * t * t * t));
    iv /= 2.0 * std::sqrt(std::numbers::pi * t);
    return std::pow(iy * iv, d);
}

namespace detail {

// (x,v) mass of the kernel at lag tau over the section of Q, d=1.
// The x integral is an erf bracket, only v needs nodes. The x window of
// the section rides the center's characteristic: |xt - x0 - (tt-t0)v0| < r^3.
inline double indicator_slice_mass_1d(double tau, const Cylinder& Q, const KineticPoint& z,
                                      const ConvParams& p) {
    const double r = Q.radius;
    const double sv = sigma_v(tau);
    const double vlo = std::max(Q.center.v[0] - r, z.v[0] - p.sigma_mult * sv);
    const double vhi = std::min(Q.center.v[0] + r, z.v[0] + p.sigma_mult * sv);
    if (!(vhi > vlo)) return 0.0;
    const double kappa = std::sqrt(3.0 / (tau * tau * tau));
    const double xc = Q.center.x[0] + (z.t - tau - Q.center.t) * Q.center.v[0];
    const double ax = xc - r * r * r, bx = xc + r * r * r;
    const auto& gb = gauss_legendre(p.gl_box);
    const double mid = 0.5 * (vlo + vhi), half = 0.5 * (vhi - vlo);
    std::vector<double> terms(static_cast<std::size_t>(p.gl_box));
    for (int i = 0; i < p.gl_box; ++i) {
        const double vt = mid + half * gb.nodes[static_cast<std::size_t>(i)];
        const double V = z.v[0] - vt;
        const double gv = std::exp(-V * V / (4.0 * tau)) / (2.0 * std::sqrt(std::numbers::pi * tau));
        const double c = z.x[0] - 0.5 * tau * (z.v[0] + vt);
        const double xint = 0.5 * (std::erf((bx - c) * kappa) - std::erf((ax - c) * kappa));
        terms[static_cast<std::size_t>(i)] = gb.weights[static_cast<std::size_t>(i)] * gv * xint;
    }
    return half * pairwise_sum(terms);
}

// d=2 section mass: GL chords across the v and x disks, erf along the
// innermost x axis.
inline double indicator_slice_mass_2d(double tau, const Cylinder& Q, const KineticPoint& z,
                                      const ConvParams& p) {
    const double r = Q.radius, r3 = r * r * r;
    const double sv = sigma_v(tau), sy = sigma_y(tau);
    const double kap2 = 3.0 / (tau * tau * tau);
    const double kappa = std::sqrt(kap2);
    const auto& gb = gauss_legendre(p.gl_box);
    const int nb = p.gl_box;

    const double v0lo = std::max(Q.center.v[0] - r, z.v[0] - p.sigma_mult * sv);
    const double v0hi = std::min(Q.center.v[0] + r, z.v[0] + p.sigma_mult * sv);
    if (!(v0hi > v0lo)) return 0.0;
    const double pref = std::pow(std::numbers::sqrt3 / (2.0 * std::numbers::pi * tau * tau), 2) *
                        std::sqrt(std::numbers::pi * tau * tau * tau / 3.0);

    std::vector<double> outer(static_cast<std::size_t>(nb), 0.0);
    for (int i0 = 0; i0 < nb; ++i0) {
        const double vt0 = 0.5 * (v0lo + v0hi) + 0.5 * (v0hi - v0lo) * gb.nodes[static_cast<std::size_t>(i0)];
        const double chord_v = std::sqrt(std::max(0.0, r * r - (vt0 - Q.center.v[0]) * (vt0 - Q.center.v[0])));
        const double v1lo = std::max(Q.center.v[1] - chord_v, z.v[1] - p.sigma_mult * sv);
        const double v1hi = std::min(Q.center.v[1] + chord_v, z.v[1] + p.sigma_mult * sv);
        if (!(v1hi > v1lo)) continue;
        double acc1 = 0.0;
        for (int i1 = 0; i1 < nb; ++i1) {
            const double vt1 = 0.5 * (v1lo + v1hi) + 0.5 * (v1hi - v1lo) * gb.nodes[static_cast<std::size_t>(i1)];
            const double V0 = z.v[0] - vt0, V1 = z.v[1] - vt1;
            const double gv = std::exp(-(V0 * V0 + V1 * V1) / (4.0 * tau));
            const double c0 = z.x[0] - 0.5 * tau * (z.v[0] + vt0);
            const double c1 = z.x[1] - 0.5 * tau * (z.v[1] + vt1);
            const double xc0 = Q.center.x[0] + (z.t - tau - Q.center.t) * Q.center.v[0];
            const double xc1 = Q.center.x[1] + (z.t - tau - Q.center.t) * Q.center.v[1];
            const double x0lo = std::max(xc0 - r3, c0 - p.sigma_mult * sy);
            const double x0hi = std::min(xc0 + r3, c0 + p.sigma_mult * sy);
            if (!(x0hi > x0lo)) continue;
            double accx = 0.0;
            for (int j0 = 0; j0 < nb; ++j0) {
                const double xt0 = 0.5 * (x0lo + x0hi) + 0.5 * (x0hi - x0lo) * gb.nodes[static_cast<std::size_t>(j0)];
                const double chord_x =
                    std::sqrt(std::max(0.0, r3 * r3 - (xt0 - xc0) * (xt0 - xc0)));
                const double x1lo = std::max(xc1 - chord_x, c1 - p.sigma_mult * sy);
                const double x1hi = std::min(xc1 + chord_x, c1 + p.sigma_mult * sy);
                if (!(x1hi > x1lo)) continue;
                const double xint = 0.5 * (std::erf((x1hi - c1) * kappa) - std::erf((x1lo - c1) * kappa));
                accx += 0.5 * (x0hi - x0lo) * gb.weights[static_cast<std::size_t>(j0)] *
                        std::exp(-kap2 * (c0 - xt0) * (c0 - xt0)) * xint;
            }
            acc1 += 0.5 * (v1hi - v1lo) * gb.weights[static_cast<std::size_t>(i1)] * gv * accx;
        }
        outer[static_cast<std::size_t>(i0)] = 0.5 * (v0hi - v0lo) * gb.weights[static_cast<std::size_t>(i0)] * acc1;
    }
    return pref * pairwise_sum(outer);
}

}  // namespace detail

// (G *kin 1_{Q})(z)
inline double convolve_indicator(const Cylinder& Q, const KineticPoint& z,
                                 const ConvParams& p = {}) {
    const double t0 = Q.center.t, r = Q.radius;
    const double tau_lo = std::max(0.0, z.t - t0);
    const double tau_hi = z.t - (t0 - r * r);
    return detail::integrate_graded_tau(tau_lo, tau_hi, p, [&](double tau) {
        return Q.dim() == 1 ? detail::indicator_slice_mass_1d(tau, Q, z, p)
                            : detail::indicator_slice_mass_2d(tau, Q, z, p);
    });
}

struct IndicatorReport {
    std::vector<double> radii;
    std::vector<double> sup_vals;
    std::vector<double> sup_over_r2;
    double slope = 0.0;
    double const_spread = 0.0;  // max/min of sup/r^2, minus 1
};

// Sup of the indicator convolution over the documented per-cylinder
// lattice, for each radius; fits log sup against log r.
inline IndicatorReport verify_indicator_bound(int d, const std::vector<double>& r_list,
                                              const KineticPoint& z0, const ConvParams& p = {}) {
    if (r_list.size() < 3)
        throw std::invalid_argument("verify_indicator_bound: need at least 3 radii");
    IndicatorReport rep;
    rep.radii = r_list;
    const int n = p.lattice_per_axis;
    for (double r : r_list) {
        Cylinder Q(z0, r);
        std::vector<KineticPoint> pts;
        pts.push_back(z0);
        const int axes = 1 + 2 * d;
        std::int64_t total = 1;
        for (int a = 0; a < axes; ++a) total *= n;
        for (std::int64_t flat = 0; flat < total; ++flat) {
            std::int64_t rem = flat;
            auto coord = [&](double lo, double hi) {
                const int i = static_cast<int>(rem % n);
                rem /= n;
                return lo + (hi - lo) * (n == 1 ? 0.5 : static_cast<double>(i) / (n - 1));
            };
            const double t = coord(z0.t - r * r, z0.t);
            Vec x(d), v(d);
            for (int a = 0; a < d; ++a) x[a] = coord(z0.x[a] - r * r * r, z0.x[a] + r * r * r);
            for (int a = 0; a < d; ++a) v[a] = coord(z0.v[a] - r, z0.v[a] + r);
            pts.emplace_back(t, x, v);
        }
        std::vector<double> vals(pts.size(), 0.0);
        parallel_for(static_cast<std::int64_t>(pts.size()), [&](std::int64_t i) {
            vals[static_cast<std::size_t>(i)] =
                convolve_indicator(Q, pts[static_cast<std::size_t>(i)], p);
        });
        double sup = 0.0;
        for (double val : vals) sup = std::max(sup, val);
        rep.sup_vals.push_back(sup);
        rep.sup_over_r2.push_back(sup / (r * r));
    }
    // least squares slope of log sup vs log r
    double sx = 0, sy2 = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(r_list.size());
    for (std::size_t i = 0; i < r_list.size(); ++i) {
        const double lx = std::log(r_list[i]), ly = std::log(rep.sup_vals[i]);
        sx += lx;
        sy2 += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    rep.slope = (m * sxy - sx * sy2) / (m * sxx - sx * sx);
    double cmin = rep.sup_over_r2[0], cmax = rep.sup_over_r2[0];
    for (double c : rep.sup_over_r2) {
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
    }
    rep.const_spread = cmax / cmin - 1.0;
    return rep;
}

// (G *kin S)(z) for a gridded source: trapezoid over the grid nodes away
// from the kernel's short-time layer, graded tau quadrature with
// interpolated S inside it. The split point keeps the kernel wider than
// one cell on every axis the trapezoid has to resolve.
inline double convolve_field(const Field& S, const KineticPoint& z, const ConvParams& p = {}) {
    const Grid& g = S.grid;
    if (z.dim() != g.d) throw std::invalid_argument("convolve_field: dimension mismatch");
    if (z.t <= g.t_min) return 0.0;

    const double dxs = g.dx(), dvs = g.dv();
    double delta = std::cbrt(6.0 * dxs * dxs) * 1.5;
    delta = std::max(delta, 4.5 * dvs * dvs);
    if (g.nt > 1) delta = std::max(delta, 2.0 * g.dt());

    int it_hi = -1;
    for (int it = 0; it < g.nt; ++it)
        if (g.t(it) <= z.t - delta) it_hi = it;

    std::vector<double> parts;

    if (it_hi >= 1) {
        // trapezoid in t over nodes 0..it_hi
        const std::int64_t per_t = g.nxd() * g.nvd();
        std::vector<double> tvals(static_cast<std::size_t>(it_hi) + 1, 0.0);
        for (int it = 0; it <= it_hi; ++it) {
            const double tau = z.t - g.t(it);
            const double sy = detail::sigma_y(tau);
            const int images = std::max(1, static_cast<int>(std::ceil(p.sigma_mult * sy / g.L)));
            const double pref =
                std::pow(std::numbers::sqrt3 / (2.0 * std::numbers::pi * tau * tau), g.d);
            std::vector<double> terms(static_cast<std::size_t>(per_t));
            parallel_for(per_t, [&](std::int64_t s) {
                int ix[2] = {0, 0}, iv[2] = {0, 0};
                decode_xv(g, s, ix, iv);
                double vol = 1.0;
                Vec xt(g.d), vt(g.d);
                for (int a = 0; a < g.d; ++a) {
                    xt[a] = g.x(ix[a]);
                    vol *= dxs;
                }
                for (int a = 0; a < g.d; ++a) {
                    vt[a] = g.v(iv[a]);
                    vol *= (iv[a] == 0 || iv[a] == g.nv - 1) ? 0.5 * dvs : dvs;
                }
                // periodic images of the kernel in x
                double kern = 0.0;
                int mi[2] = {0, 0};
                for (mi[0] = -images; mi[0] <= images; ++mi[0]) {
                    const int m1lo = g.d == 2 ? -images : 0, m1hi = g.d == 2 ? images : 0;
                    for (mi[1] = m1lo; mi[1] <= m1hi; ++mi[1]) {
                        double expo = 0.0;
                        for (int a = 0; a < g.d; ++a) {
                            const double X = z.x[a] - xt[a] - tau * vt[a] + mi[a] * g.L;
                            const double V = z.v[a] - vt[a];
                            const double y = X - 0.5 * tau * V;
                            expo += 3.0 * y * y / (tau * tau * tau) + V * V / (4.0 * tau);
                        }
                        kern += std::exp(-expo);
                    }
                }
                terms[static_cast<std::size_t>(s)] = vol * pref * kern * S.data[static_cast<std::size_t>(
                    static_cast<std::int64_t>(it) * per_t + s)];
            });
            tvals[static_cast<std::size_t>(it)] = pairwise_sum(terms);
        }
        const double dt = g.dt();
        std::vector<double> wsum(tvals.size());
        for (std::size_t i = 0; i < tvals.size(); ++i) {
            const double w = (i == 0 || i + 1 == tvals.size()) ? 0.5 * dt : dt;
            wsum[i] = w * tvals[i];
        }
        parts.push_back(pairwise_sum(wsum));
    }

    // short-time layer, S interpolated along the kernel's own coordinates
    const double layer_lo = it_hi >= 1 ? g.t(it_hi) : g.t_min;
    parts.push_back(kinetic_convolution_core(
        [&](double, const KineticPoint& zt) { return interpolate(S, zt); }, layer_lo,
        std::min(z.t, g.t_max), z, p));
    return pairwise_sum(parts);
}

// L_K g - S with the module's finite difference stencils
inline Field kolmogorov_residual(const Field& g, const Field& S) {
    if (!g.grid.same_layout(S.grid))
        throw std::invalid_argument("kolmogorov_residual: grid mismatch");
    Field res = finite_difference(g, DerivSpec{Deriv::Transport, 0, 0});
    for (int a = 0; a < g.grid.d; ++a) {
        Field lap = finite_difference(g, DerivSpec{Deriv::Dvv, a, a});
        for (std::size_t i = 0; i < res.data.size(); ++i) res.data[i] -= lap.data[i];
    }
    for (std::size_t i = 0; i < res.data.size(); ++i) res.data[i] -= S.data[i];
    return res;
}

namespace detail {

// Per-axis principal frame of the product of the two kernels, seen as a
// Gaussian in (xt_i, vt_i). Centering the quadrature box on it keeps the
// narrow factor resolved even for very unequal t and s.
struct AxisFrame {
    double cx, cv;          // stationary point
    double e0x, e0v, e1x, e1v;  // orthonormal eigenvectors
    double s0, s1;          // 1/sqrt(eigenvalue)
};

inline AxisFrame ck_axis_frame(double t, double s, double x_i, double v_i) {
    const double al = 3.0 / (s * s * s), be = 1.0 / (4.0 * s);
    const double ga = 3.0 / (t * t * t), de = 1.0 / (4.0 * t);
    const double a = x_i - 0.5 * t * v_i;

    const double mxx = al + ga;
    const double mxv = -0.5 * s * al + 0.5 * t * ga;
    const double mvv = 0.25 * s * s * al + be + 0.25 * t * t * ga + de;
    const double bx = ga * a;
    const double bv = 0.5 * t * ga * a + de * v_i;

    AxisFrame f;
    const double det = mxx * mvv - mxv * mxv;
    f.cx = (mvv * bx - mxv * bv) / det;
    f.cv = (mxx * bv - mxv * bx) / det;

    const double tr = mxx + mvv;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    const double l0 = 0.5 * tr + disc, l1 = 0.5 * tr - disc;
    double v0x = mxv, v0v = l0 - mxx;
    double n0 = std::hypot(v0x, v0v);
    if (n0 < 1e-300) {
        v0x = 1.0;
        v0v = 0.0;
        n0 = 1.0;
    }
    f.e0x = v0x / n0;
    f.e0v = v0v / n0;
    f.e1x = -f.e0v;
    f.e1v = f.e0x;
    f.s0 = 1.0 / std::sqrt(l0);
    f.s1 = 1.0 / std::sqrt(l1);
    return f;
}

}  // namespace detail

// max_z |G(t+s, z) - Int G(t, x-xt-t vt, v-vt) G(s, xt, vt) dxt dvt|
inline double chapman_kolmogorov_check(double t, double s,
                                       const std::vector<KineticPoint>& pts,
                                       const ConvParams& p = {}) {
    if (!(t > 0.0) || !(s > 0.0))
        throw std::invalid_argument("chapman_kolmogorov_check: need t, s > 0");
    const auto& gb = gauss_legendre(p.gl_box);
    const int nb = p.gl_box;

    double worst = 0.0;
    for (const auto& z : pts) {
        const int d = z.dim();
        std::vector<detail::AxisFrame> frames;
        for (int a = 0; a < d; ++a) frames.push_back(detail::ck_axis_frame(t, s, z.x[a], z.v[a]));

        std::int64_t total = 1;
        for (int a = 0; a < 2 * d; ++a) total *= nb;
        std::vector<double> terms(static_cast<std::size_t>(total));
        for (std::int64_t flat = 0; flat < total; ++flat) {
            std::int64_t rem = flat;
            double weight = 1.0;
            Vec xt(d), vt(d);
            for (int a = 0; a < d; ++a) {
                const auto& f = frames[static_cast<std::size_t>(a)];
                const int i0 = static_cast<int>(rem % nb);
                rem /= nb;
                const int i1 = static_cast<int>(rem % nb);
                rem /= nb;
                const double w0 = p.sigma_mult * f.s0, w1 = p.sigma_mult * f.s1;
                const double u0 = w0 * gb.nodes[static_cast<std::size_t>(i0)];
                const double u1 = w1 * gb.nodes[static_cast<std::size_t>(i1)];
                weight *= w0 * gb.weights[static_cast<std::size_t>(i0)] * w1 *
                          gb.weights[static_cast<std::size_t>(i1)];
                xt[a] = f.cx + u0 * f.e0x + u1 * f.e1x;
                vt[a] = f.cv + u0 * f.e0v + u1 * f.e1v;
            }
            Vec xa(d), va(d);
            for (int a = 0; a < d; ++a) {
                xa[a] = z.x[a] - xt[a] - t * vt[a];
                va[a] = z.v[a] - vt[a];
            }
            terms[static_cast<std::size_t>(flat)] =
                weight * green_eval(KineticPoint(t, xa, va)) *
                green_eval(KineticPoint(s, xt, vt));
        }
        const double conv = pairwise_sum(terms);
        const double direct = green_eval(KineticPoint(t + s, z.x, z.v));
        worst = std::max(worst, std::fabs(conv - direct));
    }
    return worst;
}

}  // namespace kinfp
