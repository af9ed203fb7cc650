#pragma once

// Nonlinear kinetic relaxation model on the x-torus:
//   d_t g + v . grad_x g = R[g] U[g],
//   R[g] = int g sqrt(mu) dv,  U[g] = Lap_v g + (d/2 - |v|^2/4) g.
// The march runs on f = sqrt(mu) g, whose velocity operator is the flux pair
// a = R Id, b = R v, c = R d. Scaling all three by the same R(t,x) > 0 leaves
// the face Peclet number unchanged, so the Maxwellian column stays an exact
// steady state and the cell sum of f is conserved for any R, which is what
// the mass and sandwich diagnostics rely on.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinfp/fft.hpp"
#include "kinfp/field.hpp"
#include "kinfp/holder.hpp"
#include "kinfp/solver.hpp"
#include "kinfp/util.hpp"

namespace kinfp {

// g = f mu^{-1/2} on a single time slice
struct ToyState {
    Field g;
    double time = 0.0;
};

struct EnvelopeConstants {
    double C1 = 0.7;
    double C2 = 1.3;
};

inline void validate_envelope(const EnvelopeConstants& e) {
    if (!(e.C1 > 0.0) || !(e.C1 <= e.C2))
        throw std::invalid_argument("envelope: need 0 < C1 <= C2");
}

struct SobolevOrder {
    int k = 2;
    int kbar = 2;
};

// run configurations demand the well-posedness range; the norm itself is
// defined for any positive orders
inline void validate_sobolev_order(const SobolevOrder& o) {
    if (!(o.kbar >= 2 && o.k >= o.kbar))
        throw std::invalid_argument("sobolev order: need 2 <= kbar <= k");
}

namespace detail {

inline void require_slice(const Field& g, const char* who) {
    if (g.grid.nt != 1) throw std::invalid_argument(std::string(who) + ": need a single time slice");
    for (double v : g.data)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": state not finite");
}

inline std::vector<double> sqrt_mu_table(const Grid& g) {
    const MaxwellianRef mref(g.d);
    std::vector<double> out(static_cast<std::size_t>(g.nvd()));
    Vec vv(g.d);
    for (std::int64_t q = 0; q < g.nvd(); ++q) {
        std::int64_t r = q;
        for (int a = g.d - 1; a >= 0; --a) {
            vv[a] = g.v(static_cast<int>(r % g.nv));
            r /= g.nv;
        }
        out[static_cast<std::size_t>(q)] = mref.sqrt_mu(vv);
    }
    return out;
}

// trapezoid cell weights along every v axis, flat over the v lattice
inline std::vector<double> trap_weights(const Grid& g) {
    std::vector<double> out(static_cast<std::size_t>(g.nvd()));
    const double dv = g.dv();
    for (std::int64_t q = 0; q < g.nvd(); ++q) {
        std::int64_t r = q;
        double w = 1.0;
        for (int a = g.d - 1; a >= 0; --a) {
            const int k = static_cast<int>(r % g.nv);
            r /= g.nv;
            w *= (k == 0 || k == g.nv - 1) ? 0.5 * dv : dv;
        }
        out[static_cast<std::size_t>(q)] = w;
    }
    return out;
}

}  // namespace detail

// R[g](x) = int g sqrt(mu) dv, trapezoid in v
inline FieldTX compute_rho(const ToyState& state) {
    detail::require_slice(state.g, "compute_rho");
    const MaxwellianRef mref(state.g.grid.d);
    return quadrature_v(state.g, [&](const Vec& v) { return mref.sqrt_mu(v); });
}

// U[g] = Lap_v g + (d/2 - |v|^2/4) g with a centered Laplacian, zero beyond
// the v box; the Gaussian envelope keeps the wall truncation negligible
inline Field apply_U(const ToyState& state) {
    detail::require_slice(state.g, "apply_U");
    const Grid& g = state.g.grid;
    Field out(g);
    const std::int64_t nvd = g.nvd();
    const double h2 = g.dv() * g.dv();

    std::vector<double> mult(static_cast<std::size_t>(nvd));
    Vec vv(g.d);
    for (std::int64_t q = 0; q < nvd; ++q) {
        std::int64_t r = q;
        double n2 = 0.0;
        for (int a = g.d - 1; a >= 0; --a) {
            const double va = g.v(static_cast<int>(r % g.nv));
            r /= g.nv;
            n2 += va * va;
        }
        mult[static_cast<std::size_t>(q)] = 0.5 * g.d - 0.25 * n2;
    }

    parallel_for(g.nxd(), [&](std::int64_t jx) {
        const double* in = state.g.data.data() + jx * nvd;
        double* o = out.data.data() + jx * nvd;
        for (std::int64_t q = 0; q < nvd; ++q) {
            double lap = 0.0;
            std::int64_t rem = q;
            for (int a = g.d - 1; a >= 0; --a) {
                const int k = static_cast<int>(rem % g.nv);
                rem /= g.nv;
                const std::int64_t str = (g.d == 2 && a == 0) ? g.nv : 1;
                const double up = k + 1 < g.nv ? in[q + str] : 0.0;
                const double dn = k > 0 ? in[q - str] : 0.0;
                lap += (up - 2.0 * in[q] + dn) / h2;
            }
            o[q] = lap + mult[static_cast<std::size_t>(q)] * in[q];
        }
    });
    return out;
}

struct EnvelopeReport {
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    bool pass = false;
};

// extrema of g / sqrt(mu) over the slice, pass iff inside [C1-tol, C2+tol]
inline EnvelopeReport gaussian_envelope_check(const ToyState& state, const EnvelopeConstants& env,
                                              double tol = 1e-6) {
    detail::require_slice(state.g, "gaussian_envelope_check");
    validate_envelope(env);
    const Grid& g = state.g.grid;
    const auto smu = detail::sqrt_mu_table(g);
    const std::int64_t nvd = g.nvd();
    EnvelopeReport rep;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    rep.max_ratio = -rep.min_ratio;
    for (std::int64_t i = 0; i < g.nxd() * nvd; ++i) {
        const double r = state.g.data[static_cast<std::size_t>(i)] /
                         smu[static_cast<std::size_t>(i % nvd)];
        rep.min_ratio = std::min(rep.min_ratio, r);
        rep.max_ratio = std::max(rep.max_ratio, r);
    }
    rep.pass = rep.min_ratio >= env.C1 - tol && rep.max_ratio <= env.C2 + tol;
    return rep;
}

namespace detail {

// L2(dx dv) of a slice, trapezoid in v, exact in x
inline double slice_l2sq(const Grid& g, const double* slice, const std::vector<double>& tw) {
    const std::int64_t nxd = g.nxd(), nvd = g.nvd();
    std::vector<double> cols(static_cast<std::size_t>(nxd));
    parallel_for(nxd, [&](std::int64_t jx) {
        const double* p = slice + jx * nvd;
        std::vector<double> terms(static_cast<std::size_t>(nvd));
        for (std::int64_t q = 0; q < nvd; ++q)
            terms[static_cast<std::size_t>(q)] = p[q] * p[q] * tw[static_cast<std::size_t>(q)];
        cols[static_cast<std::size_t>(jx)] = pairwise_sum(terms);
    });
    return std::pow(g.dx(), g.d) * pairwise_sum(cols);
}

}  // namespace detail

// anisotropic Sobolev norm: L2 plus pure k-th x-derivatives (spectral) plus
// pure kbar-th v-derivatives (repeated centered differences with one-sided
// closures at the v walls), square-summed over axes
inline double sobolev_norm(const ToyState& state, const SobolevOrder& order) {
    detail::require_slice(state.g, "sobolev_norm");
    const Grid& g = state.g.grid;
    if (order.k < 1 || order.kbar < 1)
        throw std::invalid_argument("sobolev_norm: orders must be positive");
    if (g.nx < 2 * order.k + 2)
        throw std::invalid_argument("sobolev_norm: nx does not resolve the x order");
    if (g.nv < order.kbar + 2)
        throw std::invalid_argument("sobolev_norm: nv does not resolve the v order");

    const auto tw = detail::trap_weights(g);
    const std::int64_t nxd = g.nxd(), nvd = g.nvd();
    const std::int64_t len = nxd * nvd;
    double total = detail::slice_l2sq(g, state.g.data.data(), tw);

    XSpectral spec(g);
    std::vector<std::complex<double>> modes(static_cast<std::size_t>(spec.n_complex()));
    std::vector<double> work(static_cast<std::size_t>(len));
    const int nxc = spec.half_modes();
    const std::int64_t nk = g.d == 1 ? nxc : static_cast<std::int64_t>(g.nx) * nxc;
    static const std::complex<double> ipow[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
    const std::complex<double> rot = ipow[order.k % 4];
    for (int a = 0; a < g.d; ++a) {
        spec.forward(state.g.data.data(), modes.data());
        for (std::int64_t kf = 0; kf < nk; ++kf) {
            const int k1 = static_cast<int>(kf % nxc);
            const int k0 = static_cast<int>(kf / nxc);
            const int kidx = (g.d == 2 && a == 0) ? k0 : k1;
            const double kap = spec.wavenumber(a, kidx);
            std::complex<double> factor = rot * std::pow(kap, order.k);
            // the unpaired half-integer mode carries no odd derivative
            if (order.k % 2 == 1 && kidx == g.nx / 2) factor = 0.0;
            for (std::int64_t q = 0; q < nvd; ++q)
                modes[static_cast<std::size_t>(kf * nvd + q)] *= factor;
        }
        spec.inverse(modes.data(), work.data());
        total += detail::slice_l2sq(g, work.data(), tw);
    }

    std::vector<double> buf(static_cast<std::size_t>(len));
    std::vector<double> next(static_cast<std::size_t>(len));
    const double two_h = 2.0 * g.dv();
    for (int a = 0; a < g.d; ++a) {
        buf = state.g.data;
        const std::int64_t str = (g.d == 2 && a == 0) ? g.nv : 1;
        for (int pass = 0; pass < order.kbar; ++pass) {
            parallel_for(len, [&](std::int64_t i) {
                std::int64_t rem = i;
                int kv[2] = {0, 0};
                for (int b = g.d - 1; b >= 0; --b) {
                    kv[b] = static_cast<int>(rem % g.nv);
                    rem /= g.nv;
                }
                const int k = kv[a];
                double val;
                if (k == 0)
                    val = (buf[static_cast<std::size_t>(i + str)] -
                           buf[static_cast<std::size_t>(i)]) /
                          g.dv();
                else if (k == g.nv - 1)
                    val = (buf[static_cast<std::size_t>(i)] -
                           buf[static_cast<std::size_t>(i - str)]) /
                          g.dv();
                else
                    val = (buf[static_cast<std::size_t>(i + str)] -
                           buf[static_cast<std::size_t>(i - str)]) /
                          two_h;
                next[static_cast<std::size_t>(i)] = val;
            });
            buf.swap(next);
        }
        total += detail::slice_l2sq(g, buf.data(), tw);
    }
    return std::sqrt(total);
}

// One nonlinear step driver. Holds the frozen-coefficient linear stepper and
// a per-step rho buffer that the coefficient callables read through.
class ToyStepper {
public:
    ToyStepper(const Field& f_initial, double dt, EnvelopeConstants env,
               Scheme scheme = Scheme::splitting_cn, Splitting splitting = Splitting::strang)
        : env_(env), dt_(dt), splitting_(splitting) {
        validate_envelope(env_);
        if (!(dt > 0.0)) throw std::invalid_argument("toy: dt must be positive");
        const Grid& gs = f_initial.grid;
        if (gs.nt != 1) throw std::invalid_argument("toy: initial must be a single time slice");
        tw_ = detail::trap_weights(gs);
        rho_.resize(static_cast<std::size_t>(gs.nxd()));
        refresh_rho(f_initial.data.data(), gs);

        SolverProblem p;
        p.grid = Grid(gs.d, 2, gs.nx, gs.nv, gs.t_min, gs.t_min + dt, gs.L, gs.V);
        p.dt = dt;
        p.t_final = dt;
        p.initial = f_initial;
        p.scheme = scheme;
        p.splitting = Splitting::strang;
        p.coefficients = make_coefficients(gs);
        step_.emplace(p);
    }
    ToyStepper(const ToyStepper&) = delete;
    ToyStepper& operator=(const ToyStepper&) = delete;

    const std::vector<double>& rho() const { return rho_; }
    double dt() const { return dt_; }

    // advance the f slice in place by dt; rho is frozen at the velocity
    // sub-step start, which for strang is the midpoint state
    void advance(double* f, double t) {
        const Grid& g = step_->grid();
        if (splitting_ == Splitting::strang) {
            step_->transport(f, 0.5 * dt_);
            refresh_rho(f, g);
            step_->velocity_step(f, t, dt_);
            step_->transport(f, 0.5 * dt_);
        } else {
            step_->transport(f, dt_);
            refresh_rho(f, g);
            step_->velocity_step(f, t, dt_);
        }
    }

private:
    void refresh_rho(const double* f, const Grid& g) {
        const std::int64_t nvd = g.nvd();
        parallel_for(g.nxd(), [&](std::int64_t jx) {
            const double* p = f + jx * nvd;
            std::vector<double> terms(static_cast<std::size_t>(nvd));
            for (std::int64_t q = 0; q < nvd; ++q)
                terms[static_cast<std::size_t>(q)] = p[q] * tw_[static_cast<std::size_t>(q)];
            rho_[static_cast<std::size_t>(jx)] = pairwise_sum(terms);
        });
        for (std::size_t j = 0; j < rho_.size(); ++j)
            if (!(rho_[j] > 0.0))
                throw std::runtime_error("toy step: rho lost positivity at x index " +
                                         std::to_string(j));
    }

    CoefficientField make_coefficients(const Grid& gs) const {
        const double dx = gs.dx();
        const int nx = gs.nx, d = gs.d;
        const std::vector<double>* rho = &rho_;
        auto at_x = [dx, nx, d, rho](const Vec& x) {
            std::int64_t j = std::llround(x[0] / dx) % nx;
            if (d == 2) j = j * nx + std::llround(x[1] / dx) % nx;
            return (*rho)[static_cast<std::size_t>(j)];
        };
        CoefficientField cf;
        cf.lambda = [at_x](double, const Vec& x, const Vec&) { return at_x(x); };
        cf.b0 = [at_x](double, const Vec& x, const Vec& v) { return at_x(x) * v[0]; };
        if (d == 2) cf.b1 = [at_x](double, const Vec& x, const Vec& v) { return at_x(x) * v[1]; };
        cf.c = [at_x, d](double, const Vec& x, const Vec&) {
            return at_x(x) * static_cast<double>(d);
        };
        return cf;
    }

    EnvelopeConstants env_;
    double dt_;
    Splitting splitting_;
    std::vector<double> tw_;
    std::vector<double> rho_;
    std::optional<SolverStepper> step_;
};

namespace detail {

inline Field g_to_f(const Field& g, const std::vector<double>& smu) {
    Field f = g;
    const std::int64_t nvd = g.grid.nvd();
    for (std::size_t i = 0; i < f.data.size(); ++i)
        f.data[i] = g.data[i] * smu[static_cast<std::size_t>(static_cast<std::int64_t>(i) % nvd)];
    return f;
}

}  // namespace detail

inline ToyState step_nonlinear(const ToyState& state, double dt, const EnvelopeConstants& env,
                               Scheme scheme = Scheme::splitting_cn,
                               Splitting splitting = Splitting::strang) {
    detail::require_slice(state.g, "step_nonlinear");
    const auto smu = detail::sqrt_mu_table(state.g.grid);
    Field f = detail::g_to_f(state.g, smu);
    ToyStepper ts(f, dt, env, scheme, splitting);
    ts.advance(f.data.data(), state.time);
    const std::int64_t nvd = f.grid.nvd();
    ToyState out;
    out.time = state.time + dt;
    out.g = f;
    out.g.grid.t_min = out.g.grid.t_max = out.time;
    for (std::size_t i = 0; i < out.g.data.size(); ++i) {
        out.g.data[i] = f.data[i] / smu[static_cast<std::size_t>(static_cast<std::int64_t>(i) % nvd)];
        if (!std::isfinite(out.g.data[i]))
            throw std::runtime_error("step_nonlinear: non-finite state");
    }
    return out;
}

struct ToyConfig {
    Grid grid;  // recorded layout over [0, t_final]
    double dt = 1e-3;
    double t_final = 5.0;
    EnvelopeConstants envelope;
    Scheme scheme = Scheme::splitting_cn;
    Splitting splitting = Splitting::strang;
    bool track_sobolev = false;
    SobolevOrder sobolev;
};

// desk-scale defaults; d=2 runs reduced in every direction
inline ToyConfig toy_default_config(int d = 1) {
    ToyConfig c;
    if (d == 1) {
        c.grid = Grid(1, 51, 64, 128, 0.0, 5.0);
        c.dt = 1e-3;
        c.t_final = 5.0;
    } else {
        c.grid = Grid(2, 26, 32, 48, 0.0, 1.0);
        c.dt = 2e-3;
        c.t_final = 1.0;
    }
    return c;
}

// standard perturbed initial data (1 + amp sin x0) sqrt(mu) at t = 0
inline Field toy_perturbed_initial(const Grid& run_grid, double amp = 0.3) {
    const Grid gs(run_grid.d, 1, run_grid.nx, run_grid.nv, 0.0, 0.0, run_grid.L, run_grid.V);
    const MaxwellianRef mref(gs.d);
    return sample(
        [&](const KineticPoint& z) { return (1.0 + amp * std::sin(z.x[0])) * mref.sqrt_mu(z.v); },
        gs);
}

struct ToyTraceSample {
    double time = 0.0;
    double mass = 0.0;      // int int g sqrt(mu) dx dv, trapezoid in v
    double l2_norm = 0.0;   // ||g||_{L2(dx dv)}
    double min_ratio = 0.0; // extrema of g / sqrt(mu)
    double max_ratio = 0.0;
    double distance = 0.0;  // ||g - rho_bar sqrt(mu)||_{L2(dx dv)}
};

struct ToyRunResult {
    Field g;  // recorded slices on config.grid
    std::vector<ToyTraceSample> trace;  // one sample per step including the initial state
    std::vector<double> sobolev_norms;  // per step when tracking is enabled
    double rho_bar = 0.0;               // conserved initial mass / |torus|
};

namespace detail {

struct ToyDiag {
    const Grid* g = nullptr;
    std::vector<double> smu, mu, tw;
    double rho_bar = 0.0;

    ToyDiag(const Grid& grid, double rb) : g(&grid), rho_bar(rb) {
        smu = sqrt_mu_table(grid);
        mu.resize(smu.size());
        for (std::size_t i = 0; i < smu.size(); ++i) mu[i] = smu[i] * smu[i];
        tw = trap_weights(grid);
    }

    ToyTraceSample sample(const double* f, double t) const {
        const std::int64_t nxd = g->nxd(), nvd = g->nvd();
        std::vector<double> cm(static_cast<std::size_t>(nxd)), cl(static_cast<std::size_t>(nxd)),
            cd(static_cast<std::size_t>(nxd));
        std::vector<double> lo(static_cast<std::size_t>(nxd)), hi(static_cast<std::size_t>(nxd));
        parallel_for(nxd, [&](std::int64_t jx) {
            const double* p = f + jx * nvd;
            std::vector<double> tm(static_cast<std::size_t>(nvd)), tl(static_cast<std::size_t>(nvd)),
                td(static_cast<std::size_t>(nvd));
            double rlo = std::numeric_limits<double>::infinity(), rhi = -rlo;
            for (std::int64_t q = 0; q < nvd; ++q) {
                const auto qq = static_cast<std::size_t>(q);
                const double gg = p[q] / smu[qq];
                const double dd = gg - rho_bar * smu[qq];
                tm[qq] = p[q] * tw[qq];
                tl[qq] = gg * gg * tw[qq];
                td[qq] = dd * dd * tw[qq];
                const double ratio = p[q] / mu[qq];
                rlo = std::min(rlo, ratio);
                rhi = std::max(rhi, ratio);
            }
            const auto jj = static_cast<std::size_t>(jx);
            cm[jj] = pairwise_sum(tm);
            cl[jj] = pairwise_sum(tl);
            cd[jj] = pairwise_sum(td);
            lo[jj] = rlo;
            hi[jj] = rhi;
        });
        const double voln = std::pow(g->dx(), g->d);
        ToyTraceSample s;
        s.time = t;
        s.mass = voln * pairwise_sum(cm);
        s.l2_norm = std::sqrt(voln * pairwise_sum(cl));
        s.distance = std::sqrt(voln * pairwise_sum(cd));
        s.min_ratio = *std::min_element(lo.begin(), lo.end());
        s.max_ratio = *std::max_element(hi.begin(), hi.end());
        return s;
    }
};

}  // namespace detail

inline ToyRunResult solve_toy(const ToyConfig& cfg, const Field& g_initial) {
    const Grid& g = cfg.grid;
    g.validate();
    if (g.t_min != 0.0) throw std::invalid_argument("toy: run starts at t = 0");
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("toy: dt must be positive");
    if (!(cfg.t_final > 0.0)) throw std::invalid_argument("toy: t_final must be positive");
    const long long steps = std::llround(cfg.t_final / cfg.dt);
    if (steps < 1 || std::abs(steps * cfg.dt - cfg.t_final) > 1e-9 * std::max(1.0, cfg.t_final))
        throw std::invalid_argument("toy: dt must divide t_final");
    if (g.nt < 2) throw std::invalid_argument("toy: output grid needs nt >= 2");
    if (steps % (g.nt - 1) != 0)
        throw std::invalid_argument("toy: nt - 1 must divide the step count");
    if (std::abs((g.t_max - g.t_min) - cfg.t_final) > 1e-9 * std::max(1.0, cfg.t_final))
        throw std::invalid_argument("toy: grid time extent must equal t_final");
    if (cfg.track_sobolev) validate_sobolev_order(cfg.sobolev);
    const Grid& gi = g_initial.grid;
    if (gi.d != g.d || gi.nx != g.nx || gi.nv != g.nv || gi.L != g.L || gi.V != g.V)
        throw std::invalid_argument("toy: initial slice layout does not match the grid");
    detail::require_slice(g_initial, "toy");
    if (gi.t_min != 0.0) throw std::invalid_argument("toy: initial slice time must be 0");
    validate_envelope(cfg.envelope);

    const auto smu = detail::sqrt_mu_table(g);
    Field f = detail::g_to_f(g_initial, smu);
    ToyStepper ts(f, cfg.dt, cfg.envelope, cfg.scheme, cfg.splitting);

    const double rho_bar =
        std::pow(g.dx(), g.d) * pairwise_sum(ts.rho()) / std::pow(g.L, g.d);
    detail::ToyDiag diag(g, rho_bar);

    ToyRunResult out;
    out.rho_bar = rho_bar;
    out.g = Field(g);
    out.trace.reserve(static_cast<std::size_t>(steps) + 1);
    if (cfg.track_sobolev) out.sobolev_norms.reserve(static_cast<std::size_t>(steps) + 1);

    const std::int64_t per_t = g.nxd() * g.nvd();
    const long long stride = steps / (g.nt - 1);
    ToyState scratch;
    scratch.g = Field(Grid(g.d, 1, g.nx, g.nv, 0.0, 0.0, g.L, g.V));
    auto note_state = [&](long long n) {
        const double t = n * cfg.dt;
        out.trace.push_back(diag.sample(f.data.data(), t));
        if (cfg.track_sobolev) {
            scratch.time = t;
            for (std::int64_t i = 0; i < per_t; ++i)
                scratch.g.data[static_cast<std::size_t>(i)] =
                    f.data[static_cast<std::size_t>(i)] /
                    smu[static_cast<std::size_t>(i % g.nvd())];
            out.sobolev_norms.push_back(sobolev_norm(scratch, cfg.sobolev));
        }
        if (n % stride == 0) {
            const auto it = static_cast<std::int64_t>(n / stride);
            for (std::int64_t i = 0; i < per_t; ++i)
                out.g.data[static_cast<std::size_t>(it * per_t + i)] =
                    f.data[static_cast<std::size_t>(i)] /
                    smu[static_cast<std::size_t>(i % g.nvd())];
        }
    };

    note_state(0);
    for (long long n = 0; n < steps; ++n) {
        ts.advance(f.data.data(), n * cfg.dt);
        for (double val : f.data)
            if (!std::isfinite(val))
                throw std::runtime_error("toy solve: non-finite state after step " +
                                         std::to_string(n + 1));
        note_state(n + 1);
    }
    return out;
}

struct RelaxationReport {
    double t_half = -1.0;  // first recorded time at or below half the initial distance
    double final_distance = 0.0;
    int monotonicity_violations = 0;  // steps where the distance grew beyond 1e-10
};

inline RelaxationReport relaxation_report(const std::vector<ToyTraceSample>& trace) {
    if (trace.empty()) throw std::invalid_argument("relaxation_report: empty trace");
    RelaxationReport rep;
    const double d0 = trace.front().distance;
    rep.final_distance = trace.back().distance;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (rep.t_half < 0.0 && trace[i].distance <= 0.5 * d0) rep.t_half = trace[i].time;
        if (i > 0 && trace[i].distance > trace[i - 1].distance + 1e-10)
            ++rep.monotonicity_violations;
    }
    return rep;
}

struct PicardResult {
    Field g;  // iterate over [0, T], one slice per step
    int iterations = 0;
    std::vector<double> distances;  // sup |g_{n+1} - g_n| per sweep
    std::vector<double> ratios;     // successive distance ratios
    bool converged = false;
    bool contraction_failed = false;  // stopped without converging, last ratio >= 1
};

// Fixed-point sweeps: each iterate solves the linear equation with diffusion
// level R frozen from the previous iterate, starting from the stationary
// extension of the initial data.
inline PicardResult picard_solve(const Field& g_in, double T, double dt, int n_max, double tol,
                                 Scheme scheme = Scheme::splitting_cn) {
    detail::require_slice(g_in, "picard_solve");
    const Grid& gs = g_in.grid;
    if (gs.t_min != 0.0) throw std::invalid_argument("picard: initial slice time must be 0");
    if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("picard: need T > 0 and dt > 0");
    const long long steps = std::llround(T / dt);
    if (steps < 1 || std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T))
        throw std::invalid_argument("picard: dt must divide T");
    if (n_max < 1 || !(tol > 0.0)) throw std::invalid_argument("picard: need n_max >= 1, tol > 0");

    const auto smu = detail::sqrt_mu_table(gs);
    const auto tw = detail::trap_weights(gs);
    const Field f_in = detail::g_to_f(g_in, smu);
    const int nt = static_cast<int>(steps) + 1;
    const Grid run(gs.d, nt, gs.nx, gs.nv, 0.0, T, gs.L, gs.V);
    const std::int64_t nxd = gs.nxd(), nvd = gs.nvd();
    const std::int64_t per_t = nxd * nvd;

    // per-slice R of the current iterate; the coefficient callables read it
    // back with linear interpolation in t
    std::vector<double> rho(static_cast<std::size_t>(nt * nxd));
    auto rho_of = [&](const Field& f) {
        parallel_for(static_cast<std::int64_t>(f.grid.nt) * nxd, [&](std::int64_t row) {
            const double* p = f.data.data() + row * nvd;
            std::vector<double> terms(static_cast<std::size_t>(nvd));
            for (std::int64_t q = 0; q < nvd; ++q)
                terms[static_cast<std::size_t>(q)] = p[q] * tw[static_cast<std::size_t>(q)];
            const double val = pairwise_sum(terms);
            for (int it = 0; it < (f.grid.nt == 1 ? nt : 1); ++it)
                rho[static_cast<std::size_t>((f.grid.nt == 1 ? it * nxd : 0) + row)] = val;
        });
    };
    rho_of(f_in);

    const double dx = gs.dx();
    const int nx = gs.nx, d = gs.d;
    auto rho_at = [&rho, dx, nx, d, dt, nt, nxd](double t, const Vec& x) {
        std::int64_t j = std::llround(x[0] / dx) % nx;
        if (d == 2) j = j * nx + std::llround(x[1] / dx) % nx;
        double u = t / dt;
        u = std::min(std::max(u, 0.0), static_cast<double>(nt - 1));
        const auto i0 = static_cast<std::int64_t>(std::min(static_cast<int>(u), nt - 2));
        const double fr = u - static_cast<double>(i0);
        const double lo = rho[static_cast<std::size_t>(i0 * nxd + j)];
        const double hi = rho[static_cast<std::size_t>((i0 + 1) * nxd + j)];
        return lo + fr * (hi - lo);
    };

    SolverProblem p;
    p.grid = run;
    p.dt = dt;
    p.t_final = T;
    p.initial = f_in;
    p.scheme = scheme;
    p.coefficients.lambda = [rho_at](double t, const Vec& x, const Vec&) { return rho_at(t, x); };
    p.coefficients.b0 = [rho_at](double t, const Vec& x, const Vec& v) {
        return rho_at(t, x) * v[0];
    };
    if (d == 2)
        p.coefficients.b1 = [rho_at](double t, const Vec& x, const Vec& v) {
            return rho_at(t, x) * v[1];
        };
    p.coefficients.c = [rho_at, d](double t, const Vec& x, const Vec&) {
        return rho_at(t, x) * static_cast<double>(d);
    };

    Field prev(run);
    for (int it = 0; it < nt; ++it)
        std::copy(f_in.data.begin(), f_in.data.end(),
                  prev.data.begin() + static_cast<std::int64_t>(it) * per_t);

    PicardResult out;
    for (int n = 0; n < n_max; ++n) {
        auto res = solve(p);
        ++out.iterations;
        double dist = 0.0;
        for (std::size_t i = 0; i < res.field.data.size(); ++i) {
            const double diff = std::abs(res.field.data[i] - prev.data[i]) /
                                smu[static_cast<std::size_t>(static_cast<std::int64_t>(i) % nvd)];
            dist = std::max(dist, diff);
        }
        out.distances.push_back(dist);
        if (out.distances.size() > 1) {
            const double prev_d = out.distances[out.distances.size() - 2];
            if (prev_d > 0.0) out.ratios.push_back(dist / prev_d);
        }
        prev = std::move(res.field);
        rho_of(prev);
        if (dist < tol) {
            out.converged = true;
            break;
        }
    }
    out.contraction_failed = !out.converged && !out.ratios.empty() && out.ratios.back() >= 1.0;
    out.g = std::move(prev);
    for (std::size_t i = 0; i < out.g.data.size(); ++i)
        out.g.data[i] /= smu[static_cast<std::size_t>(static_cast<std::int64_t>(i) % nvd)];
    return out;
}

struct NashReport {
    double lhs = 0.0;     // || d^mbar g1 . d^m g2 ||_{L2 of the circle}
    double a_term = 0.0;  // ||g1||_inf ||g2||_Hk
    double b_term = 0.0;  // ||g1||_Hk ||g2||_inf
    double constant = 0.0;  // smallest C with lhs <= C (a_term + b_term)
    double c_eps_half = 0.0, c_eps_tenth = 0.0;  // smallest C_eps at eps = 0.5, 0.1
    bool eps_applicable = false;                 // the eps form needs mbar != 0
};

// Product inequality check on the circle: both sides by Fourier
// differentiation, H^k through the (1 + kappa^2)^k multiplier.
inline NashReport nash_product_check(const std::function<double(double)>& g1,
                                     const std::function<double(double)>& g2, int k, int m,
                                     int mbar, int nx = 256) {
    if (k < 1 || m < 0 || mbar < 0 || m + mbar != k)
        throw std::invalid_argument("nash_product_check: need k >= 1 and |mbar| + |m| = k");
    if (nx < 2 * k + 4 || nx % 2 != 0)
        throw std::invalid_argument("nash_product_check: nx too small or odd");

    const double L = 2.0 * std::numbers::pi;
    const double dx = L / nx;
    std::vector<double> s1(static_cast<std::size_t>(nx)), s2(static_cast<std::size_t>(nx));
    for (int j = 0; j < nx; ++j) {
        s1[static_cast<std::size_t>(j)] = g1(j * dx);
        s2[static_cast<std::size_t>(j)] = g2(j * dx);
    }

    const int kmax = nx / 2 - 1;
    auto coeffs = [&](const std::vector<double>& s) {
        std::vector<std::complex<double>> c(static_cast<std::size_t>(2 * kmax + 1));
        for (int kk = -kmax; kk <= kmax; ++kk) {
            std::complex<double> acc = 0.0;
            for (int j = 0; j < nx; ++j)
                acc += s[static_cast<std::size_t>(j)] *
                       std::polar(1.0, -static_cast<double>(kk) * j * dx);
            c[static_cast<std::size_t>(kk + kmax)] = acc / static_cast<double>(nx);
        }
        return c;
    };
    const auto c1 = coeffs(s1), c2 = coeffs(s2);

    auto deriv = [&](const std::vector<std::complex<double>>& c, int p) {
        std::vector<double> out(static_cast<std::size_t>(nx), 0.0);
        for (int j = 0; j < nx; ++j) {
            std::complex<double> acc = 0.0;
            for (int kk = -kmax; kk <= kmax; ++kk) {
                const std::complex<double> ik(0.0, static_cast<double>(kk));
                acc += std::pow(ik, p) * c[static_cast<std::size_t>(kk + kmax)] *
                       std::polar(1.0, static_cast<double>(kk) * j * dx);
            }
            out[static_cast<std::size_t>(j)] = acc.real();
        }
        return out;
    };
    auto hk_norm = [&](const std::vector<std::complex<double>>& c) {
        std::vector<double> terms(c.size());
        for (int kk = -kmax; kk <= kmax; ++kk) {
            const double w = std::pow(1.0 + static_cast<double>(kk) * kk, k);
            terms[static_cast<std::size_t>(kk + kmax)] =
                w * std::norm(c[static_cast<std::size_t>(kk + kmax)]);
        }
        return std::sqrt(L * pairwise_sum(terms));
    };
    auto sup_norm = [](const std::vector<double>& s) {
        double m0 = 0.0;
        for (double v : s) m0 = std::max(m0, std::abs(v));
        return m0;
    };

    const auto d1 = deriv(c1, mbar);
    const auto d2 = deriv(c2, m);
    std::vector<double> prod(static_cast<std::size_t>(nx));
    for (int j = 0; j < nx; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        prod[jj] = d1[jj] * d2[jj] * d1[jj] * d2[jj];
    }

    NashReport rep;
    rep.lhs = std::sqrt(dx * pairwise_sum(prod));
    rep.a_term = sup_norm(s1) * hk_norm(c2);
    rep.b_term = hk_norm(c1) * sup_norm(s2);
    const double denom = rep.a_term + rep.b_term;
    rep.constant = denom > 0.0 ? rep.lhs / denom : 0.0;
    rep.eps_applicable = mbar != 0;
    if (rep.eps_applicable) {
        auto c_eps = [&](double eps) {
            const double rem = rep.lhs - eps * rep.a_term;
            if (rem <= 0.0) return 0.0;
            if (rep.b_term > 0.0) return rem / rep.b_term;
            return std::numeric_limits<double>::infinity();
        };
        rep.c_eps_half = c_eps(0.5);
        rep.c_eps_tenth = c_eps(0.1);
    }
    return rep;
}

struct DecayRow {
    double v0 = 0.0;
    double norm = 0.0;      // local kinetic Holder norm of the fluctuation
    double mu_delta = 0.0;  // mu(v0)^delta
    double ratio = 0.0;
};

struct DecayTable {
    std::vector<DecayRow> rows;
    double sup_ratio = 0.0;
    double r = 0.0;   // common scan radius
    double t0 = 0.0;  // common cylinder top time
};

// Table of local norm / mu^delta over cylinder centers at varying v0, all
// anchored at the latest time with clearance tau; the probed field is the
// run's fluctuation g - rho_bar sqrt(mu), which vanishes at equilibrium.
inline DecayTable holder_decay_probe(const Field& g_run, double alpha0, double delta, double tau) {
    const Grid& g = g_run.grid;
    if (!(alpha0 > 0.0 && alpha0 < 1.0))
        throw std::invalid_argument("decay probe: alpha0 must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("decay probe: delta must lie in (0,1)");
    if (g.nt < 4) throw std::invalid_argument("decay probe: need nt >= 4");
    if (!(tau >= g.t_min && tau < g.t_max))
        throw std::invalid_argument("decay probe: tau outside the run");

    const MaxwellianRef mref(g.d);
    const auto smu = detail::sqrt_mu_table(g);

    // rho_bar from the first recorded slice
    const auto tw = detail::trap_weights(g);
    const std::int64_t nxd = g.nxd(), nvd = g.nvd();
    std::vector<double> cols(static_cast<std::size_t>(nxd));
    for (std::int64_t jx = 0; jx < nxd; ++jx) {
        const double* p = g_run.data.data() + jx * nvd;
        std::vector<double> terms(static_cast<std::size_t>(nvd));
        for (std::int64_t q = 0; q < nvd; ++q)
            terms[static_cast<std::size_t>(q)] =
                p[q] * smu[static_cast<std::size_t>(q)] * tw[static_cast<std::size_t>(q)];
        cols[static_cast<std::size_t>(jx)] = pairwise_sum(terms);
    }
    const double rho_bar =
        std::pow(g.dx(), g.d) * pairwise_sum(cols) / std::pow(g.L, g.d);

    Field h = g_run;
    parallel_for(static_cast<std::int64_t>(h.data.size()), [&](std::int64_t i) {
        h.data[static_cast<std::size_t>(i)] -=
            rho_bar * smu[static_cast<std::size_t>(i % nvd)];
    });

    DecayTable table;
    table.t0 = g.t_max;
    table.r = std::min(1.0, std::sqrt(table.t0 - tau));
    const auto radii = detail::probe_radii(g, table.r);

    std::vector<int> ivs;
    for (int s = 0; s < 9; ++s) {
        const int iv = static_cast<int>(std::llround((g.nv - 1) * (s + 1) / 10.0));
        const double v0 = g.v(iv);
        if (std::abs(v0) * std::sqrt(static_cast<double>(g.d)) + table.r <= g.V - 1e-9)
            if (ivs.empty() || ivs.back() != iv) ivs.push_back(iv);
    }
    if (ivs.empty()) throw std::runtime_error("decay probe: velocity box too small for the radius");

    const double beta = 2.0 + alpha0;
    const auto basis = monomials_below(g.d, beta);
    const ScanParams sp{};
    table.rows.resize(ivs.size());
    parallel_for(static_cast<std::int64_t>(ivs.size()), [&](std::int64_t s) {
        const int iv = ivs[static_cast<std::size_t>(s)];
        Vec x0(g.d), v0(g.d);
        for (int a = 0; a < g.d; ++a) {
            x0[a] = 0.0;
            v0[a] = g.v(iv);
        }
        const KineticPoint z0(table.t0, x0, v0);
        DecayRow row;
        row.v0 = g.v(iv);
        const auto ln = detail::local_kinetic_norm(h, z0, table.r, beta, basis, radii, sp);
        row.norm = ln.sup + ln.semi;
        row.mu_delta = std::pow(mref.mu(v0), delta);
        row.ratio = row.norm / row.mu_delta;
        table.rows[static_cast<std::size_t>(s)] = row;
    });
    for (const auto& row : table.rows) table.sup_ratio = std::max(table.sup_ratio, row.ratio);
    return table;
}

}  // namespace kinfp
