#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinfp/field.hpp"
#include "kinfp/geometry.hpp"
#include "kinfp/util.hpp"

// Kinetic Holder seminorm estimation on sampled fields. Two estimators per
// cylinder: a least-squares polynomial fit over monomials of kinetic degree
// below beta, and the kinetic Taylor remainder. Cylinder sups are taken over
// a bounded per-axis lattice of grid nodes and are lower bounds of the true
// sup. The x window of every cylinder rides the center's characteristic.

namespace kinfp {

struct HolderOrder {
    double beta = 0.5;

    explicit HolderOrder(double b) : beta(b) {
        if (!((b > 0.0 && b < 1.0) || (b > 2.0 && b < 3.0)))
            throw std::invalid_argument("HolderOrder: beta must lie in (0,1) or (2,3)");
    }
    double alpha() const {
        if (!(beta > 2.0 && beta < 3.0))
            throw std::logic_error("HolderOrder: alpha is defined for beta in (2,3)");
        return beta - 2.0;
    }
};

enum class FitKind { best_polynomial, taylor_remainder };

inline const char* fit_kind_name(FitKind k) {
    return k == FitKind::best_polynomial ? "best-polynomial" : "taylor-remainder";
}

struct HolderEstimate {
    double seminorm = 0.0;
    Cylinder witness;
    FitKind fit_kind = FitKind::best_polynomial;
    std::int64_t cylinders_scanned = 0;
};

struct ScanParams {
    int center_stride = 2;     // every stride-th grid node per axis is a center
    int lattice_per_axis = 9;  // per-cylinder nodes per axis, extremes included
};

// Smallest scan radius: 16 time cells, 16 x cells and 8 v cells across the
// cylinder. The x rule keeps the same sample density as the t rule; a factor
// 4 on dx^{1/3} would demand 128 x cells per unit radius and rule out every
// desk-scale grid.
inline double scan_radius_floor(const Grid& g) {
    return std::max({4.0 * std::sqrt(g.dt()), 4.0 * g.dv(), std::cbrt(8.0 * g.dx())});
}

// Dyadic ladder anchored at 1, descending. Anchoring at the cap rather than
// at the floor lets the scan reach unit cylinders exactly, which the
// self-similar oracles require; halving keeps ladders of nested domains in
// exact correspondence.
inline std::vector<double> scan_radii(const Grid& g) {
    const double lo = scan_radius_floor(g);
    std::vector<double> out;
    for (double r = 1.0; r >= lo * (1.0 - 1e-12); r *= 0.5) out.push_back(r);
    return out;
}

namespace detail {

// Node index helpers with a spacing-relative tolerance so exact
// cylinder/node coincidences resolve deterministically.
inline int first_after(double bound, double lo, double h) {
    return static_cast<int>(std::floor((bound - lo) / h + 1e-9)) + 1;
}
inline int last_before(double bound, double lo, double h) {
    return static_cast<int>(std::ceil((bound - lo) / h - 1e-9)) - 1;
}
inline int last_upto(double bound, double lo, double h) {
    return static_cast<int>(std::floor((bound - lo) / h + 1e-9));
}

inline bool cylinder_fits(const Grid& g, const KineticPoint& z0, double r) {
    const double tol = 1e-9;
    if (z0.t > g.t_max + tol) return false;
    if (z0.t - r * r < g.t_min - tol) return false;
    if (2.0 * r * r * r > g.L + tol) return false;
    for (int a = 0; a < g.d; ++a)
        if (std::fabs(z0.v[a]) + r > g.V + tol) return false;
    return true;
}

// Subsample [lo, hi] to at most cap indices, extremes included.
inline void pick_indices(int lo, int hi, int cap, std::vector<int>& out) {
    out.clear();
    const int n = hi - lo + 1;
    if (n <= 0) return;
    if (n <= cap) {
        for (int i = lo; i <= hi; ++i) out.push_back(i);
        return;
    }
    for (int j = 0; j < cap; ++j)
        out.push_back(lo + static_cast<int>(std::llround(static_cast<double>(j) * (n - 1) / (cap - 1))));
}

// Derivative fields entering the kinetic Taylor polynomial, computed once
// per scan. dvv packs (0,0) then for d=2 (1,1), (0,1).
struct TaylorDerivs {
    Field dt;
    std::vector<Field> dx, dv, dvv;
};

inline TaylorDerivs taylor_derivs(const Field& f) {
    TaylorDerivs td;
    td.dt = finite_difference(f, {Deriv::Dt, 0, 0});
    for (int a = 0; a < f.grid.d; ++a) {
        td.dx.push_back(finite_difference(f, {Deriv::Dx, a, 0}));
        td.dv.push_back(finite_difference(f, {Deriv::Dv, a, 0}));
    }
    td.dvv.push_back(finite_difference(f, {Deriv::Dvv, 0, 0}));
    if (f.grid.d == 2) {
        td.dvv.push_back(finite_difference(f, {Deriv::Dvv, 1, 1}));
        td.dvv.push_back(finite_difference(f, {Deriv::Dvv, 0, 1}));
    }
    return td;
}

struct TaylorCoeffs {
    int d = 1;
    double g0 = 0.0, ct = 0.0;
    std::array<double, 2> cv{0.0, 0.0};
    std::array<double, 3> cvv{0.0, 0.0, 0.0};  // packed (0,0), (1,1), (0,1)

    double eval(double dt_, const double* dv_) const {
        double s = g0 + ct * dt_ + cv[0] * dv_[0] + 0.5 * cvv[0] * dv_[0] * dv_[0];
        if (d == 2)
            s += cv[1] * dv_[1] + 0.5 * cvv[1] * dv_[1] * dv_[1] + cvv[2] * dv_[0] * dv_[1];
        return s;
    }
};

inline TaylorCoeffs taylor_coeffs_at(const Field& f, const TaylorDerivs& td, std::int64_t flat,
                                     const KineticPoint& z0) {
    TaylorCoeffs c;
    c.d = f.grid.d;
    const auto k = static_cast<std::size_t>(flat);
    c.g0 = f.data[k];
    c.ct = td.dt.data[k];
    for (int a = 0; a < c.d; ++a) {
        c.ct += z0.v[a] * td.dx[static_cast<std::size_t>(a)].data[k];
        c.cv[static_cast<std::size_t>(a)] = td.dv[static_cast<std::size_t>(a)].data[k];
    }
    c.cvv[0] = td.dvv[0].data[k];
    if (c.d == 2) {
        c.cvv[1] = td.dvv[1].data[k];
        c.cvv[2] = td.dvv[2].data[k];
    }
    return c;
}

inline void eval_basis_row(const std::vector<KineticMonomial>& basis, double ut, const double* uv,
                           int d, double* out) {
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const auto& m = basis[j];
        double s = m.coeff;
        for (int p = 0; p < m.k0; ++p) s *= ut;
        for (int a = 0; a < d; ++a)
            for (int p = 0; p < m.l[static_cast<std::size_t>(a)]; ++p) s *= uv[a];
        out[j] = s;
    }
}

struct ScanScratch {
    std::vector<int> its;
    std::array<std::vector<int>, 2> ivs, jxs;
    std::vector<std::int64_t> xflats;
    std::vector<std::int64_t> vc_vflat;
    std::vector<double> vc_dv;  // d offsets per v-combo, interleaved
    std::vector<double> vals, bas, pv, tv, sum_vc;
    Eigen::MatrixXd ata;
    Eigen::VectorXd atb, coef;
};

struct CylEval {
    double taylor = 0.0, best = 0.0;
    int min_axis_nodes = 0;
    bool evaluated = false;
};

// Residual sups over the cylinder lattice of Q_r(z0). Computes the Taylor
// remainder when tc is given and the least-squares fit when basis is given;
// coef_out receives the fitted coefficients in the unit frame of Q.
inline CylEval cyl_eval(const Field& f, const KineticPoint& z0, double r, const TaylorCoeffs* tc,
                        const std::vector<KineticMonomial>* basis, Eigen::VectorXd* coef_out,
                        const ScanParams& sp, ScanScratch& ws) {
    const Grid& g = f.grid;
    const int d = g.d;
    CylEval out;

    const int it_hi = std::min(g.nt - 1, last_upto(z0.t, g.t_min, g.dt()));
    const int it_lo = std::max(0, first_after(z0.t - r * r, g.t_min, g.dt()));
    if (it_lo > it_hi) return out;
    pick_indices(it_lo, it_hi, sp.lattice_per_axis, ws.its);
    out.min_axis_nodes = static_cast<int>(ws.its.size());

    std::int64_t n_vc = 1;
    for (int a = 0; a < d; ++a) {
        const int lo = std::max(0, first_after(z0.v[a] - r, -g.V, g.dv()));
        const int hi = std::min(g.nv - 1, last_before(z0.v[a] + r, -g.V, g.dv()));
        if (lo > hi) return out;
        pick_indices(lo, hi, sp.lattice_per_axis, ws.ivs[static_cast<std::size_t>(a)]);
        const int n = static_cast<int>(ws.ivs[static_cast<std::size_t>(a)].size());
        out.min_axis_nodes = std::min(out.min_axis_nodes, n);
        n_vc *= n;
    }

    ws.vc_vflat.clear();
    ws.vc_dv.clear();
    if (d == 1) {
        for (int k : ws.ivs[0]) {
            ws.vc_vflat.push_back(k);
            ws.vc_dv.push_back(g.v(k) - z0.v[0]);
        }
    } else {
        for (int k0 : ws.ivs[0])
            for (int k1 : ws.ivs[1]) {
                ws.vc_vflat.push_back(static_cast<std::int64_t>(k0) * g.nv + k1);
                ws.vc_dv.push_back(g.v(k0) - z0.v[0]);
                ws.vc_dv.push_back(g.v(k1) - z0.v[1]);
            }
    }

    const bool want_best = basis != nullptr;
    const bool want_taylor = tc != nullptr;
    const int nb = want_best ? static_cast<int>(basis->size()) : 0;
    if (want_best) {
        ws.ata.setZero(nb, nb);
        ws.atb.setZero(nb);
        ws.bas.resize(static_cast<std::size_t>(n_vc) * static_cast<std::size_t>(nb));
        ws.vals.clear();
        ws.sum_vc.resize(static_cast<std::size_t>(n_vc));
    }
    if (want_taylor) ws.tv.resize(static_cast<std::size_t>(n_vc));

    const double r2 = r * r, r3 = r * r * r;
    const std::int64_t nvd = g.nvd(), nxd = g.nxd();
    double tay_max = 0.0;

    // Pass 1: lattice values; fit accumulation and, without a fit, the
    // Taylor residual directly.
    for (std::size_t s = 0; s < ws.its.size(); ++s) {
        const int it = ws.its[s];
        const double dt_ = g.t(it) - z0.t;

        ws.xflats.clear();
        for (int a = 0; a < d; ++a) {
            const double c = z0.x[a] + dt_ * z0.v[a];
            int j_lo = first_after(c - r3, 0.0, g.dx());
            int j_hi = last_before(c + r3, 0.0, g.dx());
            if (j_hi - j_lo + 1 > g.nx) j_hi = j_lo + g.nx - 1;
            if (j_lo > j_hi) return out;
            pick_indices(j_lo, j_hi, sp.lattice_per_axis, ws.jxs[static_cast<std::size_t>(a)]);
            out.min_axis_nodes =
                std::min(out.min_axis_nodes, static_cast<int>(ws.jxs[static_cast<std::size_t>(a)].size()));
        }
        auto wrap = [&](int j) { return ((j % g.nx) + g.nx) % g.nx; };
        if (d == 1) {
            for (int j : ws.jxs[0]) ws.xflats.push_back(wrap(j));
        } else {
            for (int j0 : ws.jxs[0])
                for (int j1 : ws.jxs[1])
                    ws.xflats.push_back(static_cast<std::int64_t>(wrap(j0)) * g.nx + wrap(j1));
        }

        for (std::int64_t c = 0; c < n_vc; ++c) {
            const double* dv_ = &ws.vc_dv[static_cast<std::size_t>(c) * static_cast<std::size_t>(d)];
            if (want_taylor) ws.tv[static_cast<std::size_t>(c)] = tc->eval(dt_, dv_);
            if (want_best) {
                double uv[2] = {dv_[0] / r, d == 2 ? dv_[1] / r : 0.0};
                eval_basis_row(*basis, dt_ / r2, uv, d,
                               &ws.bas[static_cast<std::size_t>(c) * static_cast<std::size_t>(nb)]);
                ws.sum_vc[static_cast<std::size_t>(c)] = 0.0;
            }
        }

        const std::int64_t row = static_cast<std::int64_t>(it) * nxd;
        for (std::int64_t xf : ws.xflats) {
            const std::int64_t base = (row + xf) * nvd;
            for (std::int64_t c = 0; c < n_vc; ++c) {
                const double val = f.data[static_cast<std::size_t>(base + ws.vc_vflat[static_cast<std::size_t>(c)])];
                if (want_best) {
                    ws.vals.push_back(val);
                    ws.sum_vc[static_cast<std::size_t>(c)] += val;
                } else {
                    tay_max = std::max(tay_max, std::fabs(val - ws.tv[static_cast<std::size_t>(c)]));
                }
            }
        }

        if (want_best) {
            const double w = static_cast<double>(ws.xflats.size());
            for (std::int64_t c = 0; c < n_vc; ++c) {
                const double* b = &ws.bas[static_cast<std::size_t>(c) * static_cast<std::size_t>(nb)];
                for (int i = 0; i < nb; ++i) {
                    ws.atb[i] += b[i] * ws.sum_vc[static_cast<std::size_t>(c)];
                    for (int j = i; j < nb; ++j) ws.ata(i, j) += w * b[i] * b[j];
                }
            }
        }
    }

    if (want_best) {
        ws.coef = ws.ata.selfadjointView<Eigen::Upper>().ldlt().solve(ws.atb);
        if (coef_out) *coef_out = ws.coef;

        // Pass 2: residuals against the fitted polynomial (and the Taylor
        // polynomial when both are requested). The basis rows depend only on
        // (t, v), so fitted values are cached per slot.
        std::size_t pos = 0;
        double best_max = 0.0;
        ws.pv.resize(static_cast<std::size_t>(n_vc));
        for (std::size_t s = 0; s < ws.its.size(); ++s) {
            const int it = ws.its[s];
            const double dt_ = g.t(it) - z0.t;
            std::size_t n_x = 0;
            {
                // per-slot x-count replay without rebuilding index lists
                int cnt = 1;
                for (int a = 0; a < d; ++a) {
                    const double c = z0.x[a] + dt_ * z0.v[a];
                    int j_lo = first_after(c - r3, 0.0, g.dx());
                    int j_hi = last_before(c + r3, 0.0, g.dx());
                    if (j_hi - j_lo + 1 > g.nx) j_hi = j_lo + g.nx - 1;
                    cnt *= std::min(j_hi - j_lo + 1, sp.lattice_per_axis);
                }
                n_x = static_cast<std::size_t>(cnt);
            }
            for (std::int64_t c = 0; c < n_vc; ++c) {
                const double* dv_ = &ws.vc_dv[static_cast<std::size_t>(c) * static_cast<std::size_t>(d)];
                double uv[2] = {dv_[0] / r, d == 2 ? dv_[1] / r : 0.0};
                double* b = &ws.bas[static_cast<std::size_t>(c) * static_cast<std::size_t>(nb)];
                eval_basis_row(*basis, dt_ / r2, uv, d, b);
                double p = 0.0;
                for (int i = 0; i < nb; ++i) p += b[i] * ws.coef[i];
                ws.pv[static_cast<std::size_t>(c)] = p;
                if (want_taylor) ws.tv[static_cast<std::size_t>(c)] = tc->eval(dt_, dv_);
            }
            for (std::size_t x = 0; x < n_x; ++x)
                for (std::int64_t c = 0; c < n_vc; ++c) {
                    const double val = ws.vals[pos++];
                    best_max = std::max(best_max, std::fabs(val - ws.pv[static_cast<std::size_t>(c)]));
                    if (want_taylor)
                        tay_max = std::max(tay_max, std::fabs(val - ws.tv[static_cast<std::size_t>(c)]));
                }
        }
        out.best = best_max;
    }

    out.taylor = tay_max;
    out.evaluated = true;
    return out;
}

inline double binom_small(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

inline void poly_add_term(KineticPolynomial& P, double coeff, int k0, const std::array<int, 3>& k,
                          const std::array<int, 3>& l) {
    if (coeff == 0.0) return;
    for (auto& m : P.terms)
        if (m.k0 == k0 && m.k == k && m.l == l) {
            m.coeff += coeff;
            return;
        }
    KineticMonomial m;
    m.coeff = coeff;
    m.k0 = k0;
    m.k = k;
    m.l = l;
    m.d = P.d;
    P.terms.push_back(m);
}

// c (t - t0)^a prod_i (v_i - v0_i)^{b_i}, expanded into absolute monomials.
inline void add_shifted_tv(KineticPolynomial& P, int d, double c, int a, double t0, const int* b,
                           const double* v0) {
    const std::array<int, 3> zk{0, 0, 0};
    const int b0 = b[0], b1 = d == 2 ? b[1] : 0;
    for (int jt = 0; jt <= a; ++jt)
        for (int j0 = 0; j0 <= b0; ++j0)
            for (int j1 = 0; j1 <= b1; ++j1) {
                double cc = c * binom_small(a, jt) * std::pow(-t0, a - jt) * binom_small(b0, j0) *
                            std::pow(-v0[0], b0 - j0);
                if (d == 2) cc *= binom_small(b1, j1) * std::pow(-v0[1], b1 - j1);
                poly_add_term(P, cc, jt, zk, {j0, j1, 0});
            }
}

inline void require_tv_basis(const std::vector<KineticMonomial>& basis) {
    for (const auto& m : basis)
        for (int a = 0; a < 3; ++a)
            if (m.k[static_cast<std::size_t>(a)] != 0)
                throw std::logic_error("holder: x monomials do not occur below order 3");
}

// Sub-radius ladder r/2, r/4, ... kept while the index windows still hold
// at least three nodes per axis; the t window is open at the bottom, so
// three nodes need a full 3 dt span. On grids too coarse for any interior
// sub-cylinder the local norm degrades to its sup part.
inline std::vector<double> probe_radii(const Grid& g, double r) {
    std::vector<double> out;
    for (double rr = 0.5 * r;; rr *= 0.5) {
        const bool ok = rr * rr * rr >= 1.5 * g.dx() && rr * rr >= 3.0 * g.dt() &&
                        rr >= 2.0 * g.dv();
        if (!ok) break;
        out.push_back(rr);
    }
    return out;
}

struct LocalNorm {
    double sup = 0.0;
    double semi = 0.0;
};

// sup plus seminorm of the slice family over Q_r(z0). Seminorm centers sit
// on a fixed physical lattice along the characteristic through z0, snapped
// to grid nodes, so the value is stable under grid refinement.
inline LocalNorm local_kinetic_norm(const Field& h, const KineticPoint& z0, double r, double beta,
                                    const std::vector<KineticMonomial>& basis,
                                    const std::vector<double>& radii, const ScanParams& sp) {
    const Grid& g = h.grid;
    const double r2 = r * r, r3 = r * r * r;
    const int it_hi = std::min(g.nt - 1, last_upto(z0.t, g.t_min, g.dt()));
    const int it_lo = std::max(0, first_after(z0.t - r2, g.t_min, g.dt()));
    if (it_lo > it_hi) return {};

    auto wrap_gap = [&](double u) { return u - g.L * std::round(u / g.L); };
    auto inside = [&](int it, const int* ix, const int* iv) {
        const double tshift = g.t(it) - z0.t;
        double dx2 = 0.0, dv2 = 0.0;
        for (int a = 0; a < g.d; ++a) {
            const double gap = wrap_gap(g.x(ix[a]) - z0.x[a] - tshift * z0.v[a]);
            dx2 += gap * gap;
            const double dv = g.v(iv[a]) - z0.v[a];
            dv2 += dv * dv;
        }
        return dx2 < r3 * r3 && dv2 < r2;
    };

    LocalNorm out;
    int ix[2] = {0, 0}, iv[2] = {0, 0};
    for (int it = it_lo; it <= it_hi; ++it) {
        const double tshift = g.t(it) - z0.t;
        std::array<std::vector<int>, 2> xw, vw;
        for (int a = 0; a < g.d; ++a) {
            const double xc = z0.x[a] + tshift * z0.v[a];
            const int lo = first_after(xc - r3, 0.0, g.dx()) - 1;
            const int hi = last_before(xc + r3, 0.0, g.dx()) + 1;
            for (int j = lo; j <= hi; ++j)
                xw[static_cast<std::size_t>(a)].push_back(((j % g.nx) + g.nx) % g.nx);
            const int vlo = std::max(0, first_after(z0.v[a] - r, -g.V, g.dv()));
            const int vhi = std::min(g.nv - 1, last_before(z0.v[a] + r, -g.V, g.dv()));
            for (int j = vlo; j <= vhi; ++j) vw[static_cast<std::size_t>(a)].push_back(j);
        }
        auto visit = [&](int jx0, int jx1, int jv0, int jv1) {
            ix[0] = jx0;
            ix[1] = jx1;
            iv[0] = jv0;
            iv[1] = jv1;
            if (inside(it, ix, iv)) out.sup = std::max(out.sup, std::abs(h.at(it, ix, iv)));
        };
        if (g.d == 1) {
            for (int jx : xw[0])
                for (int jv : vw[0]) visit(jx, 0, jv, 0);
        } else {
            for (int jx0 : xw[0])
                for (int jx1 : xw[1])
                    for (int jv0 : vw[0])
                        for (int jv1 : vw[1]) visit(jx0, jx1, jv0, jv1);
        }
    }

    ScanScratch ws;
    for (int jt = 0; jt < 8; ++jt) {
        const double tc = z0.t - r2 * (jt + 0.5) / 8.0;
        const int it = last_upto(tc, g.t_min, g.dt());
        if (it < it_lo || it > it_hi) continue;
        const double tshift = g.t(it) - z0.t;
        for (int m = -3; m <= 3; ++m) {
            const double vc = z0.v[0] + m * 0.25 * r;
            int jv = last_upto(vc, -g.V, g.dv());
            jv = std::max(0, std::min(g.nv - 1, jv));
            for (int a = 0; a < g.d; ++a) {
                const double xc = z0.x[a] + tshift * z0.v[a];
                int jx = last_upto(xc, 0.0, g.dx());
                ix[a] = ((jx % g.nx) + g.nx) % g.nx;
                iv[a] = a == 0 ? jv : std::max(0, std::min(g.nv - 1,
                                                           last_upto(z0.v[a], -g.V, g.dv())));
            }
            if (!inside(it, ix, iv)) continue;
            const KineticPoint z1 = h.point(it, ix, iv);
            for (double rr : radii) {
                if (!cylinder_fits(g, z1, rr)) continue;
                const auto ev = cyl_eval(h, z1, rr, nullptr, &basis, nullptr, sp, ws);
                if (!ev.evaluated || ev.min_axis_nodes < 3) continue;
                out.semi = std::max(out.semi, ev.best / std::pow(rr, beta));
            }
        }
    }
    return out;
}

}  // namespace detail

// Kinetic Taylor polynomial of degree 2 at a grid node: value, kinetic time
// derivative along the characteristic, velocity gradient and Hessian. No
// x-linear term (kinetic degree 3). Time endpoints use the one-sided
// second-order stencils so centers at the final time stay usable; velocity
// boundary nodes are rejected rather than extrapolated.
inline KineticPolynomial taylor_polynomial(const Field& f, const KineticPoint& z0in) {
    const Grid& g = f.grid;
    if (z0in.dim() != g.d) throw std::invalid_argument("taylor_polynomial: dimension mismatch");
    if (g.nt < 4) throw std::invalid_argument("taylor_polynomial: nt < 4");

    auto snap = [](double val, double lo, double h, const char* what) {
        const double a = (val - lo) / h;
        const long i = std::lround(a);
        if (std::fabs(a - static_cast<double>(i)) > 1e-6)
            throw std::invalid_argument(std::string("taylor_polynomial: z0 ") + what +
                                        " is not a grid node");
        return i;
    };
    const long itl = snap(z0in.t, g.t_min, g.dt(), "t");
    if (itl < 0 || itl >= g.nt) throw std::invalid_argument("taylor_polynomial: z0 outside the grid");
    const int it = static_cast<int>(itl);
    int ix[2] = {0, 0}, iv[2] = {0, 0};
    for (int a = 0; a < g.d; ++a) {
        const long j = snap(z0in.x[a], 0.0, g.dx(), "x");
        ix[a] = static_cast<int>(((j % g.nx) + g.nx) % g.nx);
        const long kv = snap(z0in.v[a], -g.V, g.dv(), "v");
        if (kv < 1 || kv > g.nv - 2)
            throw std::invalid_argument("taylor_polynomial: z0 too close to the velocity boundary");
        iv[a] = static_cast<int>(kv);
    }

    const std::int64_t nvd = g.nvd(), nxd = g.nxd();
    const std::int64_t vflat = g.d == 1 ? iv[0] : static_cast<std::int64_t>(iv[0]) * g.nv + iv[1];
    const std::int64_t xflat = g.d == 1 ? ix[0] : static_cast<std::int64_t>(ix[0]) * g.nx + ix[1];
    auto flat = [&](std::int64_t tt, std::int64_t xf, std::int64_t vf) {
        return (tt * nxd + xf) * nvd + vf;
    };
    const double* D = f.data.data();

    double ct = detail::d1_line(D + flat(0, xflat, vflat), g.nt, nxd * nvd, it, g.dt(), false);
    double cv[2] = {0.0, 0.0}, cvv[3] = {0.0, 0.0, 0.0};
    const double g0 = D[flat(it, xflat, vflat)];
    const KineticPoint z0 = f.point(it, ix, iv);
    if (g.d == 1) {
        ct += z0.v[0] * detail::d1_line(D + flat(it, 0, vflat), g.nx, nvd, ix[0], g.dx(), true);
        cv[0] = detail::d1_line(D + flat(it, xflat, 0), g.nv, 1, iv[0], g.dv(), false);
        cvv[0] = detail::d2_line(D + flat(it, xflat, 0), g.nv, 1, iv[0], g.dv());
    } else {
        ct += z0.v[0] * detail::d1_line(D + flat(it, ix[1], vflat), g.nx,
                                        static_cast<std::int64_t>(g.nx) * nvd, ix[0], g.dx(), true);
        ct += z0.v[1] * detail::d1_line(D + flat(it, static_cast<std::int64_t>(ix[0]) * g.nx, vflat),
                                        g.nx, nvd, ix[1], g.dx(), true);
        cv[0] = detail::d1_line(D + flat(it, xflat, iv[1]), g.nv, g.nv, iv[0], g.dv(), false);
        cv[1] = detail::d1_line(D + flat(it, xflat, static_cast<std::int64_t>(iv[0]) * g.nv), g.nv, 1,
                                iv[1], g.dv(), false);
        cvv[0] = detail::d2_line(D + flat(it, xflat, iv[1]), g.nv, g.nv, iv[0], g.dv());
        cvv[1] = detail::d2_line(D + flat(it, xflat, static_cast<std::int64_t>(iv[0]) * g.nv), g.nv, 1,
                                 iv[1], g.dv());
        const std::int64_t base = flat(it, xflat, 0);
        auto F = [&](int i0, int i1) {
            return D[base + static_cast<std::int64_t>(i0) * g.nv + i1];
        };
        cvv[2] = (F(iv[0] + 1, iv[1] + 1) - F(iv[0] + 1, iv[1] - 1) - F(iv[0] - 1, iv[1] + 1) +
                  F(iv[0] - 1, iv[1] - 1)) /
                 (4.0 * g.dv() * g.dv());
    }

    KineticPolynomial P;
    P.d = g.d;
    const double t0 = g.t(it);
    const double v0[2] = {z0.v[0], g.d == 2 ? z0.v[1] : 0.0};
    int b[2] = {0, 0};
    detail::add_shifted_tv(P, g.d, g0, 0, t0, b, v0);
    detail::add_shifted_tv(P, g.d, ct, 1, t0, b, v0);
    for (int a = 0; a < g.d; ++a) {
        b[0] = a == 0 ? 1 : 0;
        b[1] = a == 1 ? 1 : 0;
        detail::add_shifted_tv(P, g.d, cv[a], 0, t0, b, v0);
        b[a] = 2;
        detail::add_shifted_tv(P, g.d, 0.5 * cvv[a], 0, t0, b, v0);
        b[0] = b[1] = 0;
    }
    if (g.d == 2) {
        b[0] = b[1] = 1;
        detail::add_shifted_tv(P, g.d, cvv[2], 0, t0, b, v0);
    }
    return P;
}

struct PolyFit {
    KineticPolynomial poly;
    double residual_sup = 0.0;
};

// Least-squares fit over the cylinder lattice restricted to monomials of
// kinetic degree below beta, residual in sup norm over the same lattice.
inline PolyFit fit_best_polynomial(const Field& f, const Cylinder& Q, const HolderOrder& order,
                                   const ScanParams& sp = {}) {
    const Grid& g = f.grid;
    if (Q.dim() != g.d) throw std::invalid_argument("fit_best_polynomial: dimension mismatch");
    if (!detail::cylinder_fits(g, Q.center, Q.radius))
        throw std::invalid_argument("fit_best_polynomial: cylinder not inside the field domain");
    const auto basis = monomials_below(g.d, order.beta);
    detail::require_tv_basis(basis);

    detail::ScanScratch ws;
    Eigen::VectorXd coef;
    const auto ev = detail::cyl_eval(f, Q.center, Q.radius, nullptr, &basis, &coef, sp, ws);
    if (!ev.evaluated || ev.min_axis_nodes < 3)
        throw std::invalid_argument("fit_best_polynomial: too few sample points in the cylinder");

    KineticPolynomial P;
    P.d = g.d;
    const double v0[2] = {Q.center.v[0], g.d == 2 ? Q.center.v[1] : 0.0};
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const auto& m = basis[j];
        int lsum = 0;
        for (int a = 0; a < g.d; ++a) lsum += m.l[static_cast<std::size_t>(a)];
        const double c = coef[static_cast<Eigen::Index>(j)] * m.coeff /
                         std::pow(Q.radius, 2 * m.k0 + lsum);
        const int b[2] = {m.l[0], m.l[1]};
        detail::add_shifted_tv(P, g.d, c, m.k0, Q.center.t, b, v0);
    }
    return {P, ev.best};
}

// Sup over scanned centers and dyadic radii of residual / r^beta. Centers
// walk the stride lattice in flat index order, radii descend; ties keep the
// first witness. Deterministic at any thread count: per-center maxima are
// reduced in center order.
inline HolderEstimate estimate_seminorm(const Field& f, const HolderOrder& order, FitKind kind,
                                        const ScanParams& sp = {}) {
    const Grid& g = f.grid;
    if (sp.center_stride < 1 || sp.lattice_per_axis < 3)
        throw std::invalid_argument("estimate_seminorm: bad scan parameters");
    if (g.nt < 2) throw std::invalid_argument("estimate_seminorm: need nt >= 2");
    const auto radii = scan_radii(g);
    if (radii.empty())
        throw std::runtime_error("estimate_seminorm: no admissible radius for this grid");

    std::vector<int> cts, cxs, cvs;
    for (int i = 0; i < g.nt; i += sp.center_stride) cts.push_back(i);
    for (int i = 0; i < g.nx; i += sp.center_stride) cxs.push_back(i);
    for (int i = 0; i < g.nv; i += sp.center_stride) cvs.push_back(i);
    const std::int64_t nx_c = static_cast<std::int64_t>(cxs.size());
    const std::int64_t nv_c = static_cast<std::int64_t>(cvs.size());
    const std::int64_t per_x = g.d == 1 ? nx_c : nx_c * nx_c;
    const std::int64_t per_v = g.d == 1 ? nv_c : nv_c * nv_c;
    const std::int64_t n_centers = static_cast<std::int64_t>(cts.size()) * per_x * per_v;

    const bool taylor = kind == FitKind::taylor_remainder;
    std::optional<detail::TaylorDerivs> td;
    if (taylor && order.beta > 2.0) td = detail::taylor_derivs(f);
    const auto basis = taylor ? std::vector<KineticMonomial>{} : monomials_below(g.d, order.beta);
    if (!taylor) detail::require_tv_basis(basis);

    std::vector<double> best_val(static_cast<std::size_t>(n_centers), -1.0);
    std::vector<double> best_r(static_cast<std::size_t>(n_centers), 0.0);
    std::vector<std::int64_t> scanned(static_cast<std::size_t>(n_centers), 0);

    parallel_for(n_centers, [&](std::int64_t c) {
        thread_local detail::ScanScratch ws;
        std::int64_t rem = c;
        const std::int64_t v_part = rem % per_v;
        rem /= per_v;
        const std::int64_t x_part = rem % per_x;
        const int it = cts[static_cast<std::size_t>(rem / per_x)];
        int ix[2] = {0, 0}, iv[2] = {0, 0};
        if (g.d == 1) {
            ix[0] = cxs[static_cast<std::size_t>(x_part)];
            iv[0] = cvs[static_cast<std::size_t>(v_part)];
        } else {
            ix[0] = cxs[static_cast<std::size_t>(x_part / nx_c)];
            ix[1] = cxs[static_cast<std::size_t>(x_part % nx_c)];
            iv[0] = cvs[static_cast<std::size_t>(v_part / nv_c)];
            iv[1] = cvs[static_cast<std::size_t>(v_part % nv_c)];
        }
        const KineticPoint z0 = f.point(it, ix, iv);
        detail::TaylorCoeffs tc;
        if (taylor) {
            if (td)
                tc = detail::taylor_coeffs_at(f, *td, f.index(it, ix, iv), z0);
            else {
                tc.d = g.d;
                tc.g0 = f.at(it, ix, iv);
            }
        }
        for (double r : radii) {
            if (!detail::cylinder_fits(g, z0, r)) continue;
            const auto ev = detail::cyl_eval(f, z0, r, taylor ? &tc : nullptr,
                                             taylor ? nullptr : &basis, nullptr, sp, ws);
            if (!ev.evaluated || ev.min_axis_nodes < 3) continue;
            ++scanned[static_cast<std::size_t>(c)];
            const double ratio = (taylor ? ev.taylor : ev.best) / std::pow(r, order.beta);
            if (ratio > best_val[static_cast<std::size_t>(c)]) {
                best_val[static_cast<std::size_t>(c)] = ratio;
                best_r[static_cast<std::size_t>(c)] = r;
            }
        }
    });

    HolderEstimate est;
    est.fit_kind = kind;
    double top = -1.0;
    std::int64_t top_c = -1;
    for (std::int64_t c = 0; c < n_centers; ++c) {
        est.cylinders_scanned += scanned[static_cast<std::size_t>(c)];
        if (best_val[static_cast<std::size_t>(c)] > top) {
            top = best_val[static_cast<std::size_t>(c)];
            top_c = c;
        }
    }
    if (top_c < 0) throw std::runtime_error("estimate_seminorm: no admissible cylinder");
    est.seminorm = std::max(0.0, top);
    {
        std::int64_t rem = top_c;
        const std::int64_t v_part = rem % per_v;
        rem /= per_v;
        const std::int64_t x_part = rem % per_x;
        const int it = cts[static_cast<std::size_t>(rem / per_x)];
        int ix[2] = {0, 0}, iv[2] = {0, 0};
        if (g.d == 1) {
            ix[0] = cxs[static_cast<std::size_t>(x_part)];
            iv[0] = cvs[static_cast<std::size_t>(v_part)];
        } else {
            ix[0] = cxs[static_cast<std::size_t>(x_part / nx_c)];
            ix[1] = cxs[static_cast<std::size_t>(x_part % nx_c)];
            iv[0] = cvs[static_cast<std::size_t>(v_part / nv_c)];
            iv[1] = cvs[static_cast<std::size_t>(v_part % nv_c)];
        }
        est.witness = Cylinder(f.point(it, ix, iv), best_r[static_cast<std::size_t>(top_c)]);
    }
    return est;
}

struct EquivalenceReport {
    HolderEstimate taylor, best;
    double ratio = 0.0;     // best.seminorm / taylor.seminorm, the asserted quantity
    double ratio_lo = 0.0;  // observed range of per-cylinder best/taylor ratios
    double ratio_hi = 0.0;
    std::int64_t cylinders_compared = 0;
    bool both_zero = false;
    bool within_tolerance = true;  // ratio <= 1.05
};

// Dual-estimator scan at order 2+alpha. The Taylor polynomial is itself an
// admissible fit candidate, so at the seminorm level best/taylor stays
// below 1 with 5% discretization slack. Individual cylinders can exceed 1
// by the least-squares/sup-norm gap; the per-cylinder range is reported,
// not asserted. Cylinders with negligible Taylor residual are skipped.
inline EquivalenceReport check_norm_equivalence(const Field& f, double alpha,
                                                const ScanParams& sp = {}) {
    const Grid& g = f.grid;
    const HolderOrder order(2.0 + alpha);
    if (g.nt < 2) throw std::invalid_argument("check_norm_equivalence: need nt >= 2");
    const auto radii = scan_radii(g);
    if (radii.empty())
        throw std::runtime_error("check_norm_equivalence: no admissible radius for this grid");

    double supf = 0.0;
    for (double v : f.data) supf = std::max(supf, std::fabs(v));
    const double zero_tol = 1e-10 * std::max(1.0, supf);

    const auto td = detail::taylor_derivs(f);
    const auto basis = monomials_below(g.d, order.beta);
    detail::require_tv_basis(basis);

    std::vector<int> cts, cxs, cvs;
    for (int i = 0; i < g.nt; i += sp.center_stride) cts.push_back(i);
    for (int i = 0; i < g.nx; i += sp.center_stride) cxs.push_back(i);
    for (int i = 0; i < g.nv; i += sp.center_stride) cvs.push_back(i);
    const std::int64_t nx_c = static_cast<std::int64_t>(cxs.size());
    const std::int64_t nv_c = static_cast<std::int64_t>(cvs.size());
    const std::int64_t per_x = g.d == 1 ? nx_c : nx_c * nx_c;
    const std::int64_t per_v = g.d == 1 ? nv_c : nv_c * nv_c;
    const std::int64_t n_centers = static_cast<std::int64_t>(cts.size()) * per_x * per_v;

    struct PerCenter {
        double tay = -1.0, tay_r = 0.0, bst = -1.0, bst_r = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        std::int64_t scanned = 0, compared = 0;
    };
    std::vector<PerCenter> pc(static_cast<std::size_t>(n_centers));

    parallel_for(n_centers, [&](std::int64_t c) {
        thread_local detail::ScanScratch ws;
        std::int64_t rem = c;
        const std::int64_t v_part = rem % per_v;
        rem /= per_v;
        const std::int64_t x_part = rem % per_x;
        const int it = cts[static_cast<std::size_t>(rem / per_x)];
        int ix[2] = {0, 0}, iv[2] = {0, 0};
        if (g.d == 1) {
            ix[0] = cxs[static_cast<std::size_t>(x_part)];
            iv[0] = cvs[static_cast<std::size_t>(v_part)];
        } else {
            ix[0] = cxs[static_cast<std::size_t>(x_part / nx_c)];
            ix[1] = cxs[static_cast<std::size_t>(x_part % nx_c)];
            iv[0] = cvs[static_cast<std::size_t>(v_part / nv_c)];
            iv[1] = cvs[static_cast<std::size_t>(v_part % nv_c)];
        }
        const KineticPoint z0 = f.point(it, ix, iv);
        const auto tc = detail::taylor_coeffs_at(f, td, f.index(it, ix, iv), z0);
        auto& out = pc[static_cast<std::size_t>(c)];
        for (double r : radii) {
            if (!detail::cylinder_fits(g, z0, r)) continue;
            const auto ev = detail::cyl_eval(f, z0, r, &tc, &basis, nullptr, sp, ws);
            if (!ev.evaluated || ev.min_axis_nodes < 3) continue;
            ++out.scanned;
            const double rb = std::pow(r, order.beta);
            if (ev.taylor / rb > out.tay) {
                out.tay = ev.taylor / rb;
                out.tay_r = r;
            }
            if (ev.best / rb > out.bst) {
                out.bst = ev.best / rb;
                out.bst_r = r;
            }
            if (ev.taylor > zero_tol) {
                const double q = ev.best / ev.taylor;
                out.lo = std::min(out.lo, q);
                out.hi = std::max(out.hi, q);
                ++out.compared;
            }
        }
    });

    EquivalenceReport rep;
    rep.taylor.fit_kind = FitKind::taylor_remainder;
    rep.best.fit_kind = FitKind::best_polynomial;
    double tay_top = -1.0, bst_top = -1.0;
    std::int64_t tay_c = -1, bst_c = -1;
    rep.ratio_lo = std::numeric_limits<double>::infinity();
    for (std::int64_t c = 0; c < n_centers; ++c) {
        const auto& p = pc[static_cast<std::size_t>(c)];
        rep.taylor.cylinders_scanned += p.scanned;
        rep.best.cylinders_scanned += p.scanned;
        rep.cylinders_compared += p.compared;
        if (p.tay > tay_top) {
            tay_top = p.tay;
            tay_c = c;
        }
        if (p.bst > bst_top) {
            bst_top = p.bst;
            bst_c = c;
        }
        if (p.compared > 0) {
            rep.ratio_lo = std::min(rep.ratio_lo, p.lo);
            rep.ratio_hi = std::max(rep.ratio_hi, p.hi);
        }
    }
    if (tay_c < 0) throw std::runtime_error("check_norm_equivalence: no admissible cylinder");
    auto witness_at = [&](std::int64_t c, double r) {
        std::int64_t rem = c;
        const std::int64_t v_part = rem % per_v;
        rem /= per_v;
        const std::int64_t x_part = rem % per_x;
        const int it = cts[static_cast<std::size_t>(rem / per_x)];
        int ix[2] = {0, 0}, iv[2] = {0, 0};
        if (g.d == 1) {
            ix[0] = cxs[static_cast<std::size_t>(x_part)];
            iv[0] = cvs[static_cast<std::size_t>(v_part)];
        } else {
            ix[0] = cxs[static_cast<std::size_t>(x_part / nx_c)];
            ix[1] = cxs[static_cast<std::size_t>(x_part % nx_c)];
            iv[0] = cvs[static_cast<std::size_t>(v_part / nv_c)];
            iv[1] = cvs[static_cast<std::size_t>(v_part % nv_c)];
        }
        return Cylinder(f.point(it, ix, iv), r);
    };
    rep.taylor.seminorm = std::max(0.0, tay_top);
    rep.taylor.witness = witness_at(tay_c, pc[static_cast<std::size_t>(tay_c)].tay_r);
    rep.best.seminorm = std::max(0.0, bst_top);
    rep.best.witness = witness_at(bst_c, pc[static_cast<std::size_t>(bst_c)].bst_r);

    if (rep.cylinders_compared == 0) {
        rep.both_zero = true;
        rep.ratio_lo = rep.ratio_hi = 0.0;
        return rep;
    }
    rep.ratio = rep.best.seminorm / rep.taylor.seminorm;
    rep.within_tolerance = rep.ratio <= 1.05;
    return rep;
}

// Kinetic difference quotients: s1 differences along the characteristic in
// time, s2/s3 second and first differences in velocity direction u. Shifted
// points are evaluated by multilinear interpolation; nodes whose shifts
// leave the domain hold 0 and are reported invalid by the predicates.
struct DifferenceQuotients {
    Field s1, s2, s3;
    double r = 0.0;
    Vec u;

    bool s1_valid(int it) const { return s1.grid.t(it) - r * r >= s1.grid.t_min - 1e-9; }
    bool s2_valid(const int* iv) const {
        const Grid& g = s2.grid;
        for (int a = 0; a < g.d; ++a) {
            const double va = g.v(iv[a]);
            if (std::fabs(va + r * u[a]) > g.V + 1e-9) return false;
            if (std::fabs(va - r * u[a]) > g.V + 1e-9) return false;
        }
        return true;
    }
    bool s3_valid(const int* iv) const {
        const Grid& g = s3.grid;
        for (int a = 0; a < g.d; ++a)
            if (std::fabs(g.v(iv[a]) + r * u[a]) > g.V + 1e-9) return false;
        return true;
    }
};

inline DifferenceQuotients difference_quotients(const Field& f, double r, const Vec& u) {
    const Grid& g = f.grid;
    if (u.d != g.d) throw std::invalid_argument("difference_quotients: dimension mismatch");
    if (!(r > 0.0)) throw std::invalid_argument("difference_quotients: r must be positive");
    if (std::fabs(u.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("difference_quotients: u must be a unit vector");
    if (g.nt > 1 && r * r > g.t_max - g.t_min + 1e-12)
        throw std::invalid_argument("difference_quotients: r too large for the time extent");
    for (int a = 0; a < g.d; ++a)
        if (std::fabs(r * u[a]) > g.V)
            throw std::invalid_argument("difference_quotients: r too large for the velocity box");

    DifferenceQuotients q{Field(g), Field(g), Field(g), r, u};
    const std::int64_t per_t = g.nxd() * g.nvd();
    for (int it = 0; it < g.nt; ++it) {
        parallel_for(per_t, [&](std::int64_t s) {
            int ix[2] = {0, 0}, iv[2] = {0, 0};
            decode_xv(g, s, ix, iv);
            const KineticPoint z = q.s1.point(it, ix, iv);
            const std::size_t k = static_cast<std::size_t>(static_cast<std::int64_t>(it) * per_t + s);
            const double val = f.data[k];
            if (q.s1_valid(it)) {
                const KineticPoint zs(z.t - r * r, z.x - z.v * (r * r), z.v);
                q.s1.data[k] = (val - interpolate(f, zs)) / (r * r);
            }
            const KineticPoint zp(z.t, z.x, z.v + u * r);
            const KineticPoint zm(z.t, z.x, z.v - u * r);
            if (q.s2_valid(iv))
                q.s2.data[k] = (interpolate(f, zp) + interpolate(f, zm) - 2.0 * val) / (r * r);
            if (q.s3_valid(iv)) q.s3.data[k] = (interpolate(f, zp) - val) / r;
        });
    }
    return q;
}

struct InterpRow {
    std::string quantity;
    double k_plus_beta = 0.0, gamma = 0.0, epsilon = 0.0, C = 0.0;
};

struct InterpolationReport {
    double alpha = 0.0;
    double seminorm_2alpha = 0.0;  // [g] at order 2+alpha, best-polynomial fit
    double sup_norm = 0.0;
    std::array<double, 5> lhs{};  // measured left-hand quantities
    std::vector<InterpRow> rows;
    bool monotone_ok = true;
};

// Smallest constants C making each interpolation inequality hold at the
// given epsilons, with the exponent gamma = (k+b) / ((2+alpha) - (k+b)) of
// the differential operator's kinetic order. The kinetic time derivative is
// the transport derivative d_t + v . grad_x. C(eps) should rise to a single
// peak and fall back to zero; re-rises after a fall are flagged.
inline InterpolationReport check_interpolation(const Field& f, double alpha,
                                               const std::vector<double>& epsilons,
                                               const ScanParams& sp = {}) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("check_interpolation: alpha must be in (0,1)");
    if (epsilons.empty()) throw std::invalid_argument("check_interpolation: empty epsilon list");
    for (double e : epsilons)
        if (!(e > 0.0)) throw std::invalid_argument("check_interpolation: epsilons must be positive");
    const Grid& g = f.grid;

    InterpolationReport rep;
    rep.alpha = alpha;
    rep.seminorm_2alpha =
        estimate_seminorm(f, HolderOrder(2.0 + alpha), FitKind::best_polynomial, sp).seminorm;
    for (double v : f.data) rep.sup_norm = std::max(rep.sup_norm, std::fabs(v));

    std::vector<Field> dv;
    for (int a = 0; a < g.d; ++a) dv.push_back(finite_difference(f, {Deriv::Dv, a, 0}));

    rep.lhs[0] = estimate_seminorm(f, HolderOrder(alpha), FitKind::best_polynomial, sp).seminorm;
    {
        double s = 0.0;
        for (std::int64_t i = 0; i < g.points(); ++i) {
            double n2 = 0.0;
            for (int a = 0; a < g.d; ++a) {
                const double x = dv[static_cast<std::size_t>(a)].data[static_cast<std::size_t>(i)];
                n2 += x * x;
            }
            s = std::max(s, n2);
        }
        rep.lhs[1] = std::sqrt(s);
    }
    {
        double s = 0.0;
        for (int a = 0; a < g.d; ++a)
            s = std::max(s, estimate_seminorm(dv[static_cast<std::size_t>(a)], HolderOrder(alpha),
                                              FitKind::best_polynomial, sp)
                                .seminorm);
        rep.lhs[2] = s;
    }
    {
        double s = 0.0;
        for (int a = 0; a < g.d; ++a)
            for (int b = a; b < g.d; ++b) {
                const Field h = finite_difference(f, {Deriv::Dvv, a, b});
                for (double v : h.data) s = std::max(s, std::fabs(v));
            }
        rep.lhs[3] = s;
    }
    {
        const Field h = finite_difference(f, {Deriv::Transport, 0, 0});
        double s = 0.0;
        for (double v : h.data) s = std::max(s, std::fabs(v));
        rep.lhs[4] = s;
    }

    static const char* names[5] = {"holder-seminorm", "grad-v-sup", "grad-v-holder-seminorm",
                                   "hessian-v-sup", "transport-sup"};
    const double kb[5] = {alpha, 1.0, 1.0 + alpha, 2.0, 2.0};
    std::vector<double> eps_sorted = epsilons;
    std::sort(eps_sorted.begin(), eps_sorted.end());
    for (int q = 0; q < 5; ++q) {
        const double gamma = kb[q] / ((2.0 + alpha) - kb[q]);
        double prev = -1.0;
        bool fell = false;
        for (double e : eps_sorted) {
            const double slack = rep.lhs[static_cast<std::size_t>(q)] - e * rep.seminorm_2alpha;
            const double C =
                rep.sup_norm > 0.0 ? std::max(0.0, slack) * std::pow(e, gamma) / rep.sup_norm : 0.0;
            rep.rows.push_back({names[q], kb[q], gamma, e, C});
            if (prev >= 0.0) {
                if (C < prev * (1.0 - 1e-9)) fell = true;
                else if (fell && C > prev * (1.0 + 1e-9))
                    rep.monotone_ok = false;
            }
            prev = C;
        }
    }
    return rep;
}

inline void write_interpolation_csv(const InterpolationReport& rep, std::ostream& os) {
    os << "quantity,epsilon,C\n";
    for (const auto& row : rep.rows)
        os << row.quantity << "," << format_double(row.epsilon) << "," << format_double(row.C)
           << "\n";
}

struct TwoPointResult {
    double sup = 0.0;
    KineticPoint z0, z1;
};

// Direct two-point Holder quotient sup |g(z1) - g(z0)| / ||z0^{-1} o z1||^beta
// over ordered pairs of a deterministic subsampled node set. x displacements
// are reduced modulo the torus.
inline TwoPointResult two_point_quotient(const Field& f, const HolderOrder& order,
                                         int per_axis = 0) {
    if (!(order.beta < 1.0))
        throw std::invalid_argument("two_point_quotient: beta must be in (0,1)");
    const Grid& g = f.grid;
    if (per_axis <= 0) per_axis = g.d == 1 ? 13 : 5;

    std::vector<int> ts, xs, vs;
    detail::pick_indices(0, g.nt - 1, per_axis, ts);
    detail::pick_indices(0, g.nx - 1, per_axis, xs);
    detail::pick_indices(0, g.nv - 1, per_axis, vs);

    struct Node {
        KineticPoint z;
        double val;
    };
    std::vector<Node> nodes;
    int ix[2] = {0, 0}, iv[2] = {0, 0};
    for (int it : ts)
        for (std::size_t a = 0; a < xs.size(); ++a)
            for (std::size_t b = 0; b < (g.d == 2 ? xs.size() : 1); ++b)
                for (std::size_t c = 0; c < vs.size(); ++c)
                    for (std::size_t e = 0; e < (g.d == 2 ? vs.size() : 1); ++e) {
                        ix[0] = xs[a];
                        ix[1] = g.d == 2 ? xs[b] : 0;
                        iv[0] = vs[c];
                        iv[1] = g.d == 2 ? vs[e] : 0;
                        nodes.push_back({f.point(it, ix, iv), f.at(it, ix, iv)});
                    }

    TwoPointResult res;
    res.z0 = res.z1 = KineticPoint::origin(g.d);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            if (i == j) continue;
            KineticPoint w = galilean_compose(galilean_inverse(nodes[i].z), nodes[j].z);
            for (int a = 0; a < g.d; ++a) {
                double xa = std::fmod(w.x[a], g.L);
                if (xa > 0.5 * g.L) xa -= g.L;
                if (xa < -0.5 * g.L) xa += g.L;
                w.x[a] = xa;
            }
            const double nrm = kinetic_norm(w);
            if (nrm < 1e-14) continue;
            const double q = std::fabs(nodes[j].val - nodes[i].val) / std::pow(nrm, order.beta);
            if (q > res.sup) {
                res.sup = q;
                res.z0 = nodes[i].z;
                res.z1 = nodes[j].z;
            }
        }
    return res;
}

}  // namespace kinfp
