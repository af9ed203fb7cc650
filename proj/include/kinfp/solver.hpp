#pragma once

// Splitting solver for the linear kinetic equation on the x-torus with a
// bounded velocity box:
//   (d_t + v . grad_x) g = sum_ij a^ij d2_{v_i v_j} g + b . grad_v g + c g + S.
// Transport is an exact spectral characteristic shift; the velocity operator
// is advanced implicitly in flux form F_i = a^ii d_i g + b_i g with
// Chang-Cooper exponential fitting, plus the zero-order remainder
// (c - div_v b) g built from the same face values of b, so the discrete
// Maxwellian is an exact steady state of the pair a = Id, b = v, c = d and
// row sums reduce to c exactly (discrete maximum principle for c <= 0).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinfp/fft.hpp"
#include "kinfp/field.hpp"
#include "kinfp/util.hpp"

namespace kinfp {

enum class VBoundary { zero_flux, dirichlet_zero };
enum class Scheme { splitting_be, splitting_cn };
enum class Splitting { strang, lie };

inline const char* v_boundary_name(VBoundary b) {
    return b == VBoundary::zero_flux ? "zero-flux" : "dirichlet-zero";
}
inline const char* scheme_name(Scheme s) {
    return s == Scheme::splitting_be ? "splitting-BE" : "splitting-CN";
}
inline const char* splitting_name(Splitting s) { return s == Splitting::strang ? "strang" : "lie"; }

// scalar coefficient sampled at an absolute time and a phase-space point
using Coef = std::function<double(double t, const Vec& x, const Vec& v)>;

struct CoefficientField {
    Coef lambda;         // isotropic diffusion a = lambda Id, exclusive with a00/a11/a01
    Coef a00, a11, a01;  // symmetric matrix diffusion; a11 and a01 are d=2 only
    Coef b0, b1;         // drift components, empty means zero
    Coef c;              // zero-order coefficient, empty means zero
    Coef S;              // source, empty means zero

    bool isotropic() const { return static_cast<bool>(lambda); }

    static CoefficientField heat() {
        CoefficientField f;
        f.lambda = [](double, const Vec&, const Vec&) { return 1.0; };
        return f;
    }
    // expanded form of grad_v . (grad_v g + v g)
    static CoefficientField fokker_planck(int d) {
        CoefficientField f;
        f.lambda = [](double, const Vec&, const Vec&) { return 1.0; };
        f.b0 = [](double, const Vec&, const Vec& v) { return v[0]; };
        if (d == 2) f.b1 = [](double, const Vec&, const Vec& v) { return v[1]; };
        f.c = [d](double, const Vec&, const Vec&) { return static_cast<double>(d); };
        return f;
    }
};

struct SolverProblem {
    CoefficientField coefficients;
    Grid grid;  // output layout; t_min is the start time and t_max - t_min = t_final
    double dt = 1e-2;
    double t_final = 0.0;
    double dt_max = std::numeric_limits<double>::infinity();
    Field initial;  // single time slice at grid.t_min
    VBoundary v_boundary = VBoundary::zero_flux;
    Scheme scheme = Scheme::splitting_be;
    Splitting splitting = Splitting::strang;
    // optional per-step functional of the current slice, recorded in the trace
    std::function<double(const Grid&, const double*)> extra_diag;
};

struct TraceSample {
    double time = 0.0;
    double mass = 0.0;  // uniform-weight cell sum, the quantity the flux form conserves
    double l2_norm = 0.0;
    double min_ratio = 0.0;  // extrema of g / sqrt(mu) over the slice
    double max_ratio = 0.0;
};

struct SolverTrace {
    std::vector<TraceSample> samples;      // one per step, strictly increasing times
    std::vector<double> sobolev_norms;     // filled only when extra_diag is set
};

struct SolveResult {
    Field field;
    SolverTrace trace;
};

inline long long solver_steps(const SolverProblem& p) {
    return p.t_final > 0.0 ? std::llround(p.t_final / p.dt) : 0;
}

inline void validate_problem(const SolverProblem& p) {
    const Grid& g = p.grid;
    g.validate();
    if (!(p.dt > 0.0)) throw std::invalid_argument("solver: dt must be positive");
    if (!(p.t_final >= 0.0)) throw std::invalid_argument("solver: t_final must be nonnegative");
    if (p.dt > p.dt_max) throw std::invalid_argument("solver: dt exceeds dt_max");
    const long long steps = solver_steps(p);
    if (p.t_final > 0.0) {
        if (steps < 1 || std::abs(steps * p.dt - p.t_final) > 1e-9 * std::max(1.0, p.t_final))
            throw std::invalid_argument("solver: dt must divide t_final");
        if (g.nt < 2) throw std::invalid_argument("solver: output grid needs nt >= 2");
        if (steps % (g.nt - 1) != 0)
            throw std::invalid_argument("solver: nt - 1 must divide the step count");
    } else if (g.nt != 1) {
        throw std::invalid_argument("solver: t_final = 0 needs nt = 1");
    }
    if (std::abs((g.t_max - g.t_min) - p.t_final) > 1e-9 * std::max(1.0, p.t_final))
        throw std::invalid_argument("solver: grid time extent must equal t_final");

    const Grid& gi = p.initial.grid;
    if (gi.d != g.d || gi.nx != g.nx || gi.nv != g.nv || gi.L != g.L || gi.V != g.V)
        throw std::invalid_argument("solver: initial slice layout does not match the grid");
    if (gi.nt != 1) throw std::invalid_argument("solver: initial must be a single time slice");
    if (std::abs(gi.t_min - g.t_min) > 1e-12 * std::max(1.0, std::abs(g.t_min)))
        throw std::invalid_argument("solver: initial slice time must equal grid t_min");
    if (p.initial.data.size() != static_cast<std::size_t>(g.nxd() * g.nvd()))
        throw std::invalid_argument("solver: initial data size mismatch");
    for (double val : p.initial.data)
        if (!std::isfinite(val)) throw std::invalid_argument("solver: initial data not finite");

    const CoefficientField& cf = p.coefficients;
    const bool matrix_form = static_cast<bool>(cf.a00) || static_cast<bool>(cf.a11) ||
                             static_cast<bool>(cf.a01);
    if (cf.lambda && matrix_form) throw std::invalid_argument("solver: diffusion given twice");
    if (!cf.lambda && !cf.a00) throw std::invalid_argument("solver: no diffusion coefficient");
    if (g.d == 1 && (cf.a11 || cf.a01 || cf.b1))
        throw std::invalid_argument("solver: d=2 coefficient on a d=1 problem");
    if (g.d == 2 && matrix_form && !cf.a11)
        throw std::invalid_argument("solver: matrix form needs a11 when d=2");

    // uniform ellipticity spot check on the sampled lattice at both time endpoints
    const std::int64_t tot = g.nxd() * g.nvd();
    const std::int64_t estride = std::max<std::int64_t>(1, tot / 32768);
    int ix[2] = {0, 0}, iv[2] = {0, 0};
    Vec xx(g.d), vv(g.d);
    for (double tchk : {g.t_min, g.t_max}) {
        for (std::int64_t q = 0; q < tot; q += estride) {
            decode_xv(g, q, ix, iv);
            for (int a = 0; a < g.d; ++a) {
                xx[a] = g.x(ix[a]);
                vv[a] = g.v(iv[a]);
            }
            double emin;
            if (cf.lambda) {
                emin = cf.lambda(tchk, xx, vv);
            } else if (g.d == 1) {
                emin = cf.a00(tchk, xx, vv);
            } else {
                const double p00 = cf.a00(tchk, xx, vv);
                const double p11 = cf.a11(tchk, xx, vv);
                const double p01 = cf.a01 ? cf.a01(tchk, xx, vv) : 0.0;
                emin = 0.5 * (p00 + p11) - std::hypot(0.5 * (p00 - p11), p01);
            }
            if (!(emin > 0.0))
                throw std::invalid_argument("solver: diffusion not uniformly elliptic on the grid");
        }
        if (p.t_final == 0.0) break;
    }
}

namespace detail {

// Chang-Cooper factor phi_minus(w) = w / (e^w - 1); phi_plus = phi_minus + w.
// Both are positive for all w and equal 1 at w = 0 (centered scheme).
inline double cc_phi_minus(double w) {
    if (w == 0.0) return 1.0;
    return w / std::expm1(w);
}

struct VWork {
    std::vector<double> cp, cm, af, bf;         // per-face flux data
    std::vector<double> lo, di, up;             // tridiagonal operator rows
    std::vector<double> gl, ap, rhs, cw, dw;    // line scratch
    std::vector<double> plane, plane2, plane3;  // d=2 whole-plane scratch
};

inline VWork& vwork() {
    thread_local VWork w;
    return w;
}

inline void apply_tridiag(const std::vector<double>& lo, const std::vector<double>& di,
                          const std::vector<double>& up, const double* gin, double* out, int n) {
    for (int k = 0; k < n; ++k) {
        double s = di[k] * gin[k];
        if (k > 0) s += lo[k] * gin[k - 1];
        if (k + 1 < n) s += up[k] * gin[k + 1];
        out[k] = s;
    }
}

// solves (I - sigma M) out = rhs for the tridiagonal operator M = (lo, di, up)
inline void solve_shifted(const std::vector<double>& lo, const std::vector<double>& di,
                          const std::vector<double>& up, double sigma, const double* rhs,
                          double* out, int n, std::vector<double>& cw, std::vector<double>& dw) {
    cw.resize(static_cast<std::size_t>(n));
    dw.resize(static_cast<std::size_t>(n));
    double prev_c = 0.0, prev_d = 0.0;
    for (int k = 0; k < n; ++k) {
        const double td = 1.0 - sigma * di[k];
        const double tl = k > 0 ? -sigma * lo[k] : 0.0;
        const double tu = k + 1 < n ? -sigma * up[k] : 0.0;
        const double mag = std::abs(td) + std::abs(tl) + std::abs(tu);
        if (std::abs(td) < std::abs(tl) + std::abs(tu) - 1e-12 * mag)
            throw std::runtime_error("velocity solve: diagonal dominance lost, reduce dt");
        const double piv = td - tl * prev_c;
        if (!(std::abs(piv) > 0.0))
            throw std::runtime_error("velocity solve: diagonal dominance lost, reduce dt");
        prev_c = tu / piv;
        prev_d = (rhs[k] - tl * prev_d) / piv;
        cw[static_cast<std::size_t>(k)] = prev_c;
        dw[static_cast<std::size_t>(k)] = prev_d;
    }
    out[n - 1] = dw[static_cast<std::size_t>(n - 1)];
    for (int k = n - 2; k >= 0; --k)
        out[k] = dw[static_cast<std::size_t>(k)] - cw[static_cast<std::size_t>(k)] * out[k + 1];
}

}  // namespace detail

class SolverStepper {
public:
    explicit SolverStepper(const SolverProblem& p) : p_(p), spec_(p.grid) {
        validate_problem(p_);
        const Grid& g = p_.grid;
        const MaxwellianRef mref(g.d);
        smu_.resize(static_cast<std::size_t>(g.nvd()));
        Vec vv(g.d);
        for (std::int64_t q = 0; q < g.nvd(); ++q) {
            std::int64_t r = q;
            for (int a = g.d - 1; a >= 0; --a) {
                vv[a] = g.v(static_cast<int>(r % g.nv));
                r /= g.nv;
            }
            smu_[static_cast<std::size_t>(q)] = mref.sqrt_mu(vv);
        }
        sq_.resize(static_cast<std::size_t>(g.nxd() * g.nvd()));
    }

    const Grid& grid() const { return p_.grid; }
    const SolverProblem& problem() const { return p_; }

    // one full step from absolute time t to t + dt, in place
    void advance(double* slice, double t) {
        const double tau = p_.dt;
        if (p_.splitting == Splitting::strang) {
            transport(slice, 0.5 * tau);
            velocity_step(slice, t, tau);
            transport(slice, 0.5 * tau);
        } else {
            transport(slice, tau);
            velocity_step(slice, t, tau);
        }
    }

    // split sub-steps, exposed so nonlinear drivers can refresh frozen
    // coefficients between them
    void transport(double* slice, double dt) { spec_.shift_characteristic(slice, p_.grid, dt); }
    void velocity_step(double* slice, double t, double tau) { velocity_substep(slice, t, tau); }

    TraceSample sample(const double* slice, double t) {
        const Grid& g = p_.grid;
        const std::int64_t len = g.nxd() * g.nvd();
        const std::int64_t nvd = g.nvd();
        const double voln = std::pow(g.dx(), g.d) * std::pow(g.dv(), g.d);
        TraceSample s;
        s.time = t;
        s.mass = voln * pairwise_sum(slice, static_cast<std::size_t>(len));
        for (std::int64_t i = 0; i < len; ++i)
            sq_[static_cast<std::size_t>(i)] = slice[i] * slice[i];
        s.l2_norm = std::sqrt(voln * pairwise_sum(sq_.data(), static_cast<std::size_t>(len)));
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::int64_t i = 0; i < len; ++i) {
            const double r = slice[i] / smu_[static_cast<std::size_t>(i % nvd)];
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        s.min_ratio = lo;
        s.max_ratio = hi;
        return s;
    }

private:
    void velocity_substep(double* slice, double t, double tau) {
        const Grid& g = p_.grid;
        const bool cn = p_.scheme == Scheme::splitting_cn;
        const double tt = cn ? t + 0.5 * tau : t + tau;
        const double sigma = cn ? 0.5 * tau : tau;
        const std::int64_t nvd = g.nvd();
        parallel_for(g.nxd(), [&](std::int64_t jx) {
            double* gx = slice + jx * nvd;
            Vec x(g.d);
            if (g.d == 1) {
                x[0] = g.x(static_cast<int>(jx));
                vstep_1d(gx, x, tt, tau, sigma, cn);
            } else {
                x[0] = g.x(static_cast<int>(jx / g.nx));
                x[1] = g.x(static_cast<int>(jx % g.nx));
                vstep_2d(gx, x, tt, tau, sigma, cn);
            }
        });
    }

    // per-axis flux-form tridiagonal; row sums equal c/d exactly because the
    // zero-order remainder uses the same face values as the flux
    void assemble_axis(double tt, const Vec& x, Vec& v, int axis, detail::VWork& w) const {
        const Grid& g = p_.grid;
        const int n = g.nv;
        const double h = g.dv();
        const double inv_h2 = 1.0 / (h * h);
        const CoefficientField& cf = p_.coefficients;
        const Coef& aii = cf.lambda ? cf.lambda : (axis == 0 ? cf.a00 : cf.a11);
        const Coef& bi = axis == 0 ? cf.b0 : cf.b1;
        w.cp.assign(static_cast<std::size_t>(n - 1), 0.0);
        w.cm.assign(static_cast<std::size_t>(n - 1), 0.0);
        w.af.assign(static_cast<std::size_t>(n - 1), 0.0);
        w.bf.assign(static_cast<std::size_t>(n - 1), 0.0);
        w.lo.assign(static_cast<std::size_t>(n), 0.0);
        w.di.assign(static_cast<std::size_t>(n), 0.0);
        w.up.assign(static_cast<std::size_t>(n), 0.0);
        for (int f = 0; f + 1 < n; ++f) {
            v[axis] = -g.V + (f + 0.5) * h;
            const double A = aii(tt, x, v);
            if (!(A > 0.0))
                throw std::runtime_error("velocity solve: nonpositive diffusion at a face");
            const double B = bi ? bi(tt, x, v) : 0.0;
            const double pe = B * h / A;
            const double pm = detail::cc_phi_minus(pe);
            w.af[static_cast<std::size_t>(f)] = A;
            w.bf[static_cast<std::size_t>(f)] = B;
            w.cm[static_cast<std::size_t>(f)] = A * inv_h2 * pm;
            w.cp[static_cast<std::size_t>(f)] = A * inv_h2 * (pm + pe);
        }
        double b_lo = 0.0, b_hi = 0.0;
        if (bi) {
            v[axis] = -g.V - 0.5 * h;
            b_lo = bi(tt, x, v);
            v[axis] = g.V + 0.5 * h;
            b_hi = bi(tt, x, v);
        }
        const double cshare = 1.0 / g.d;
        for (int k = 0; k < n; ++k) {
            v[axis] = g.v(k);
            const double b_above = k + 1 < n ? w.bf[static_cast<std::size_t>(k)] : b_hi;
            const double b_below = k > 0 ? w.bf[static_cast<std::size_t>(k - 1)] : b_lo;
            double z = -(b_above - b_below) / h;
            if (cf.c) z += cshare * cf.c(tt, x, v);
            double diag = z, upk = 0.0, lok = 0.0;
            if (k + 1 < n) {
                upk = w.cp[static_cast<std::size_t>(k)];
                diag -= w.cm[static_cast<std::size_t>(k)];
            }
            if (k > 0) {
                lok = w.cm[static_cast<std::size_t>(k - 1)];
                diag -= w.cp[static_cast<std::size_t>(k - 1)];
            }
            if (k > 0 && k + 1 < n) {
                // nonconservative correction (d_v a) d_v g; zero when a is v-independent
                const double q =
                    (w.af[static_cast<std::size_t>(k)] - w.af[static_cast<std::size_t>(k - 1)]) / h;
                upk -= q / (2.0 * h);
                lok += q / (2.0 * h);
            }
            w.up[static_cast<std::size_t>(k)] = upk;
            w.lo[static_cast<std::size_t>(k)] = lok;
            w.di[static_cast<std::size_t>(k)] = diag;
        }
        if (p_.v_boundary == VBoundary::dirichlet_zero) {
            w.lo[0] = w.di[0] = w.up[0] = 0.0;
            const std::size_t e = static_cast<std::size_t>(n - 1);
            w.lo[e] = w.di[e] = w.up[e] = 0.0;
        }
    }

    void add_source(double* dst, double tt, const Vec& x, Vec& v) const {
        const Grid& g = p_.grid;
        const int n = g.nv;
        if (g.d == 1) {
            for (int k = 0; k < n; ++k) {
                v[0] = g.v(k);
                dst[k] += p_.coefficients.S(tt, x, v);
            }
            return;
        }
        for (int k0 = 0; k0 < n; ++k0) {
            v[0] = g.v(k0);
            for (int k1 = 0; k1 < n; ++k1) {
                v[1] = g.v(k1);
                dst[k0 * n + k1] += p_.coefficients.S(tt, x, v);
            }
        }
    }

    // explicit mixed derivative 2 a01 d2_{v0 v1} g on interior nodes
    void add_cross(const double* gin, double* dst, double tt, const Vec& x, Vec& v) const {
        const Grid& g = p_.grid;
        const int n = g.nv;
        const double h = g.dv();
        const double inv4h2 = 1.0 / (4.0 * h * h);
        for (int k0 = 1; k0 + 1 < n; ++k0) {
            v[0] = g.v(k0);
            for (int k1 = 1; k1 + 1 < n; ++k1) {
                v[1] = g.v(k1);
                const double mixed = gin[(k0 + 1) * n + k1 + 1] - gin[(k0 + 1) * n + k1 - 1] -
                                     gin[(k0 - 1) * n + k1 + 1] + gin[(k0 - 1) * n + k1 - 1];
                dst[k0 * n + k1] += 2.0 * p_.coefficients.a01(tt, x, v) * mixed * inv4h2;
            }
        }
    }

    void vstep_1d(double* gx, const Vec& x, double tt, double tau, double sigma, bool cn) const {
        const Grid& g = p_.grid;
        const int n = g.nv;
        auto& w = detail::vwork();
        Vec v(1);
        assemble_axis(tt, x, v, 0, w);
        w.rhs.resize(static_cast<std::size_t>(n));
        w.ap.resize(static_cast<std::size_t>(n));
        const bool dir = p_.v_boundary == VBoundary::dirichlet_zero;
        if (dir) gx[0] = gx[n - 1] = 0.0;
        if (cn) detail::apply_tridiag(w.lo, w.di, w.up, gx, w.ap.data(), n);
        for (int k = 0; k < n; ++k) {
            double r = gx[k];
            if (cn) r += sigma * w.ap[static_cast<std::size_t>(k)];
            w.rhs[static_cast<std::size_t>(k)] = r;
        }
        if (p_.coefficients.S) {
            w.ap.assign(static_cast<std::size_t>(n), 0.0);
            add_source(w.ap.data(), tt, x, v);
            for (int k = 0; k < n; ++k) w.rhs[static_cast<std::size_t>(k)] += tau * w.ap[static_cast<std::size_t>(k)];
        }
        if (dir) w.rhs[0] = w.rhs[static_cast<std::size_t>(n - 1)] = 0.0;
        detail::solve_shifted(w.lo, w.di, w.up, sigma, w.rhs.data(), gx, n, w.cw, w.dw);
    }

    void vstep_2d(double* gx, const Vec& x, double tt, double tau, double sigma, bool cn) const {
        const Grid& g = p_.grid;
        const int n = g.nv;
        const std::int64_t nn = static_cast<std::int64_t>(n) * n;
        auto& w = detail::vwork();
        const bool dir = p_.v_boundary == VBoundary::dirichlet_zero;
        if (dir) {
            for (int k0 = 0; k0 < n; ++k0)
                for (int k1 = 0; k1 < n; ++k1)
                    if (k0 == 0 || k0 == n - 1 || k1 == 0 || k1 == n - 1) gx[k0 * n + k1] = 0.0;
        }
        w.plane.resize(static_cast<std::size_t>(nn));
        w.plane2.resize(static_cast<std::size_t>(nn));
        w.rhs.resize(static_cast<std::size_t>(n));
        w.ap.resize(static_cast<std::size_t>(n));
        w.gl.resize(static_cast<std::size_t>(n));
        Vec v(2);
        const CoefficientField& cf = p_.coefficients;

        if (cn) {
            // Peaceman-Rachford sweeps: axis 1 implicit first, then axis 0
            w.plane3.resize(static_cast<std::size_t>(nn));
            for (int k1 = 0; k1 < n; ++k1) {
                v[1] = g.v(k1);
                assemble_axis(tt, x, v, 0, w);
                for (int k0 = 0; k0 < n; ++k0) w.gl[static_cast<std::size_t>(k0)] = gx[k0 * n + k1];
                detail::apply_tridiag(w.lo, w.di, w.up, w.gl.data(), w.ap.data(), n);
                for (int k0 = 0; k0 < n; ++k0)
                    w.plane[static_cast<std::size_t>(k0 * n + k1)] = w.ap[static_cast<std::size_t>(k0)];
            }
            if (cf.a01) add_cross(gx, w.plane.data(), tt, x, v);
            if (cf.S) add_source(w.plane.data(), tt, x, v);
            for (int k0 = 0; k0 < n; ++k0) {
                v[0] = g.v(k0);
                assemble_axis(tt, x, v, 1, w);
                const double* pl = w.plane.data() + k0 * n;
                const double* line = gx + k0 * n;
                for (int k = 0; k < n; ++k) w.rhs[static_cast<std::size_t>(k)] = line[k] + sigma * pl[k];
                if (dir) w.rhs[0] = w.rhs[static_cast<std::size_t>(n - 1)] = 0.0;
                detail::solve_shifted(w.lo, w.di, w.up, sigma, w.rhs.data(),
                                      w.plane2.data() + k0 * n, n, w.cw, w.dw);
            }
            for (int k0 = 0; k0 < n; ++k0) {
                v[0] = g.v(k0);
                assemble_axis(tt, x, v, 1, w);
                detail::apply_tridiag(w.lo, w.di, w.up, w.plane2.data() + k0 * n, w.ap.data(), n);
                std::copy(w.ap.begin(), w.ap.begin() + n, w.plane3.begin() + k0 * n);
            }
            if (cf.a01) add_cross(w.plane2.data(), w.plane3.data(), tt, x, v);
            if (cf.S) add_source(w.plane3.data(), tt, x, v);
            for (int k1 = 0; k1 < n; ++k1) {
                v[1] = g.v(k1);
                assemble_axis(tt, x, v, 0, w);
                for (int k0 = 0; k0 < n; ++k0)
                    w.rhs[static_cast<std::size_t>(k0)] =
                        w.plane2[static_cast<std::size_t>(k0 * n + k1)] +
                        sigma * w.plane3[static_cast<std::size_t>(k0 * n + k1)];
                if (dir) w.rhs[0] = w.rhs[static_cast<std::size_t>(n - 1)] = 0.0;
                detail::solve_shifted(w.lo, w.di, w.up, sigma, w.rhs.data(), w.ap.data(), n, w.cw,
                                      w.dw);
                for (int k0 = 0; k0 < n; ++k0) gx[k0 * n + k1] = w.ap[static_cast<std::size_t>(k0)];
            }
            return;
        }

        // backward Euler with alternating-direction factors
        w.plane2.assign(static_cast<std::size_t>(nn), 0.0);
        if (cf.a01) add_cross(gx, w.plane2.data(), tt, x, v);
        if (cf.S) add_source(w.plane2.data(), tt, x, v);
        for (std::int64_t i = 0; i < nn; ++i)
            w.plane[static_cast<std::size_t>(i)] = gx[i] + tau * w.plane2[static_cast<std::size_t>(i)];
        for (int k1 = 0; k1 < n; ++k1) {
            v[1] = g.v(k1);
            assemble_axis(tt, x, v, 0, w);
            for (int k0 = 0; k0 < n; ++k0)
                w.rhs[static_cast<std::size_t>(k0)] = w.plane[static_cast<std::size_t>(k0 * n + k1)];
            if (dir) w.rhs[0] = w.rhs[static_cast<std::size_t>(n - 1)] = 0.0;
            detail::solve_shifted(w.lo, w.di, w.up, sigma, w.rhs.data(), w.ap.data(), n, w.cw, w.dw);
            for (int k0 = 0; k0 < n; ++k0)
                w.plane2[static_cast<std::size_t>(k0 * n + k1)] = w.ap[static_cast<std::size_t>(k0)];
        }
        for (int k0 = 0; k0 < n; ++k0) {
            v[0] = g.v(k0);
            assemble_axis(tt, x, v, 1, w);
            const double* line = w.plane2.data() + k0 * n;
            for (int k = 0; k < n; ++k) w.rhs[static_cast<std::size_t>(k)] = line[k];
            if (dir) w.rhs[0] = w.rhs[static_cast<std::size_t>(n - 1)] = 0.0;
            detail::solve_shifted(w.lo, w.di, w.up, sigma, w.rhs.data(), gx + k0 * n, n, w.cw, w.dw);
        }
    }

    SolverProblem p_;
    XSpectral spec_;
    std::vector<double> smu_, sq_;
};

// single step of the split scheme; state carries its own absolute time
inline Field step(const SolverProblem& p, const Field& state) {
    SolverStepper st(p);
    const Grid& g = p.grid;
    const Grid& gs = state.grid;
    if (gs.d != g.d || gs.nx != g.nx || gs.nv != g.nv || gs.nt != 1 || gs.L != g.L || gs.V != g.V)
        throw std::invalid_argument("step: state layout does not match the problem grid");
    Field out(Grid(g.d, 1, g.nx, g.nv, gs.t_min + p.dt, gs.t_min + p.dt, g.L, g.V));
    out.data = state.data;
    st.advance(out.data.data(), gs.t_min);
    for (double val : out.data)
        if (!std::isfinite(val)) throw std::runtime_error("step: non-finite state after the step");
    return out;
}

inline SolveResult solve(const SolverProblem& p) {
    SolverStepper st(p);
    const Grid& g = p.grid;
    const long long steps = solver_steps(p);
    const long long stride = steps == 0 ? 1 : steps / (g.nt - 1);
    SolveResult res;
    res.field = Field(g);
    std::vector<double> cur = p.initial.data;
    const std::int64_t len = g.nxd() * g.nvd();
    std::copy(cur.begin(), cur.end(), res.field.data.begin());
    res.trace.samples.push_back(st.sample(cur.data(), g.t_min));
    if (p.extra_diag) res.trace.sobolev_norms.push_back(p.extra_diag(g, cur.data()));
    for (long long n = 0; n < steps; ++n) {
        st.advance(cur.data(), g.t_min + n * p.dt);
        for (double val : cur)
            if (!std::isfinite(val))
                throw std::runtime_error("solve: non-finite state after step " +
                                         std::to_string(n + 1));
        const double tnow = g.t_min + (n + 1) * p.dt;
        res.trace.samples.push_back(st.sample(cur.data(), tnow));
        if (p.extra_diag) res.trace.sobolev_norms.push_back(p.extra_diag(g, cur.data()));
        if ((n + 1) % stride == 0)
            std::copy(cur.begin(), cur.end(), res.field.data.begin() + ((n + 1) / stride) * len);
    }
    return res;
}

}  // namespace kinfp
