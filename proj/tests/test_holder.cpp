#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kinfp/field.hpp"
#include "kinfp/geometry.hpp"
#include "kinfp/holder.hpp"

using namespace kinfp;

namespace {

Field cubic_v_field(const Grid& g) {
    return sample([](const KineticPoint& z) { return z.v[0] * z.v[0] * z.v[0]; }, g);
}

}  // namespace

TEST_CASE("holder order accepts (0,1) and (2,3) only") {
    CHECK(HolderOrder(0.5).beta == 0.5);
    CHECK(HolderOrder(2.5).alpha() == Catch::Approx(0.5));
    CHECK(HolderOrder(2.25).alpha() == Catch::Approx(0.25));
    CHECK_THROWS_AS(HolderOrder(0.0), std::invalid_argument);
    CHECK_THROWS_AS(HolderOrder(1.0), std::invalid_argument);
    CHECK_THROWS_AS(HolderOrder(1.5), std::invalid_argument);
    CHECK_THROWS_AS(HolderOrder(2.0), std::invalid_argument);
    CHECK_THROWS_AS(HolderOrder(3.0), std::invalid_argument);
    CHECK_THROWS_AS(HolderOrder(-0.5), std::invalid_argument);
    CHECK_THROWS_AS(HolderOrder(0.5).alpha(), std::logic_error);
}

TEST_CASE("taylor polynomial reproduces fields of low kinetic degree") {
    Grid g(1, 17, 16, 65, -0.25, 0.0, 2.0, 1.0);
    const auto f = sample([](const KineticPoint& z) { return z.t + z.v[0] + z.v[0] * z.v[0]; }, g);
    const auto P = taylor_polynomial(f, KineticPoint::origin(1));
    CHECK(kinetic_degree(P) == 2);
    for (double t : {-0.2, -0.05, 0.0})
        for (double v : {-0.43, 0.0, 0.31}) {
            const KineticPoint z(t, Vec{0.77}, Vec{v});
            CHECK(P.evaluate(z) == Catch::Approx(t + v + v * v).epsilon(0.0).margin(1e-10));
        }

    const auto c = sample([](const KineticPoint&) { return 0.6; }, g);
    const auto Pc = taylor_polynomial(c, KineticPoint(-0.125, Vec{0.5}, Vec{0.25}));
    CHECK(kinetic_degree(Pc) == 0);
    CHECK(Pc.evaluate(KineticPoint(-0.2, Vec{1.3}, Vec{-0.7})) == Catch::Approx(0.6).epsilon(0.0).margin(1e-12));
}

TEST_CASE("taylor polynomial has no linear x term") {
    Grid g(1, 17, 16, 65, -0.25, 0.0, 2.0, 1.0);
    const auto f = sample([](const KineticPoint& z) { return z.x[0]; }, g);
    const auto P = taylor_polynomial(f, KineticPoint::origin(1));
    CHECK(kinetic_degree(P) == 0);
    for (double v : {-0.5, 0.0, 0.8})
        CHECK(P.evaluate(KineticPoint(-0.1, Vec{0.4}, Vec{v})) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("taylor polynomial rejects off grid and boundary centers") {
    Grid g(1, 17, 16, 65, -0.25, 0.0, 2.0, 1.0);
    const auto f = sample([](const KineticPoint& z) { return z.v[0]; }, g);
    CHECK_THROWS_AS(taylor_polynomial(f, KineticPoint(-0.013, Vec{0.0}, Vec{0.0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(taylor_polynomial(f, KineticPoint(0.0, Vec{0.07}, Vec{0.0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(taylor_polynomial(f, KineticPoint(0.0, Vec{0.0}, Vec{0.017})),
                    std::invalid_argument);
    CHECK_THROWS_AS(taylor_polynomial(f, KineticPoint(0.0, Vec{0.0}, Vec{-1.0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(taylor_polynomial(f, KineticPoint(0.5, Vec{0.0}, Vec{0.0})),
                    std::invalid_argument);
}

TEST_CASE("least squares fit reproduces polynomials below the order") {
    Grid g(1, 65, 128, 129, -1.0, 0.0, 2.0, 1.0);
    auto gfun = [](const KineticPoint& z) {
        return 0.3 - 0.7 * z.t + 0.4 * z.v[0] - 0.2 * z.v[0] * z.v[0];
    };
    const auto f = sample(gfun, g);
    const Cylinder Q(KineticPoint(0.0, Vec{0.763}, Vec{0.2}), 0.5);
    const auto fit = fit_best_polynomial(f, Q, HolderOrder(2.5));
    CHECK(fit.residual_sup < 1e-10);
    for (double t : {-0.1, 0.0})
        for (double v : {-0.1, 0.35}) {
            const KineticPoint z(t, Vec{0.8}, Vec{v});
            CHECK(fit.poly.evaluate(z) == Catch::Approx(gfun(z)).epsilon(0.0).margin(1e-9));
        }

    const Field zero(g);
    const auto zf = fit_best_polynomial(zero, Q, HolderOrder(2.5));
    CHECK(zf.residual_sup == 0.0);
    CHECK(std::fabs(zf.poly.evaluate(KineticPoint(-0.1, Vec{0.5}, Vec{0.1}))) < 1e-12);
}

TEST_CASE("least squares residual of a cubic tracks the optimal rate") {
    Grid g(1, 65, 128, 129, -1.0, 0.0, 2.0, 1.0);
    const auto f = cubic_v_field(g);
    const double r = 0.5;
    const auto fit = fit_best_polynomial(f, Cylinder(KineticPoint::origin(1), r), HolderOrder(2.5));
    const double cheb = r * r * r / 4.0;
    CHECK(fit.residual_sup > cheb / 4.0);
    CHECK(fit.residual_sup < cheb * 4.0);
}

TEST_CASE("fit rejects cylinders outside the domain or too thin") {
    Grid g(1, 65, 128, 129, -1.0, 0.0, 2.0, 1.0);
    const auto f = cubic_v_field(g);
    CHECK_THROWS_AS(fit_best_polynomial(f, Cylinder(KineticPoint::origin(1), 1.5), HolderOrder(2.5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_best_polynomial(f, Cylinder(KineticPoint(-0.9, Vec{0.0}, Vec{0.0}), 0.5),
                                        HolderOrder(2.5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_best_polynomial(f, Cylinder(KineticPoint::origin(1), 0.05), HolderOrder(2.5)),
                    std::invalid_argument);
}

TEST_CASE("seminorm of a polynomial below the order vanishes") {
    Grid g(1, 65, 128, 65, -1.0, 0.0, 2.0, 1.0);
    const auto f = sample(
        [](const KineticPoint& z) {
            return 0.2 + 0.5 * z.t - 0.3 * z.v[0] + 0.1 * z.v[0] * z.v[0];
        },
        g);
    const auto et = estimate_seminorm(f, HolderOrder(2.5), FitKind::taylor_remainder);
    const auto eb = estimate_seminorm(f, HolderOrder(2.5), FitKind::best_polynomial);
    CHECK(et.seminorm < 1e-8);
    CHECK(eb.seminorm < 1e-8);
    CHECK(et.cylinders_scanned > 0);
    CHECK(eb.cylinders_scanned == et.cylinders_scanned);
}

TEST_CASE("cubic velocity seminorm matches the self similar value") {
    Grid g(1, 65, 128, 129, -1.0, 0.0, 2.0, 1.0);
    const auto f = cubic_v_field(g);
    const auto est = estimate_seminorm(f, HolderOrder(2.5), FitKind::taylor_remainder);
    // Unit cylinder at the final time: residual sup (63/64)^3 at the lattice
    // edge, less the dv^2 slope error of the centered gradient.
    CHECK(est.seminorm > 0.9);
    CHECK(est.seminorm < 1.1);
    CHECK(est.seminorm == Catch::Approx(0.9536).margin(0.01));
    CHECK(est.witness.radius == 1.0);
    CHECK(est.witness.center.t == Catch::Approx(0.0).margin(1e-12));
    CHECK(est.witness.center.x[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(est.witness.center.v[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(est.cylinders_scanned > 1000);

    const auto eb = estimate_seminorm(f, HolderOrder(2.5), FitKind::best_polynomial);
    CHECK(eb.seminorm <= est.seminorm * 1.05);
}

TEST_CASE("seminorm scales covariantly under the kinetic dilation") {
    Grid g(1, 65, 128, 129, -1.0, 0.0, 2.0, 1.0);
    const auto f = cubic_v_field(g);
    const auto est = estimate_seminorm(f, HolderOrder(2.5), FitKind::taylor_remainder);

    // h = g(S_2 z) sampled on S_{1/2} of the domain; every spacing scales by
    // a power of two, so the scans correspond cylinder for cylinder.
    Grid gs(1, 65, 128, 129, -0.25, 0.0, 0.25, 0.5);
    const auto h = sample(
        [](const KineticPoint& z) {
            const double w = 2.0 * z.v[0];
            return w * w * w;
        },
        gs);
    const auto ests = estimate_seminorm(h, HolderOrder(2.5), FitKind::taylor_remainder);
    CHECK(ests.seminorm == Catch::Approx(est.seminorm * std::pow(2.0, 2.5)).epsilon(1e-10));
    CHECK(ests.witness.radius == Catch::Approx(est.witness.radius / 2.0));
    CHECK(ests.witness.center.v[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(ests.cylinders_scanned == est.cylinders_scanned);
}

TEST_CASE("seminorm is monotone under time restriction") {
    Grid g(1, 65, 128, 129, -1.0, 0.0, 2.0, 1.0);
    Grid gsub(1, 33, 128, 129, -0.5, 0.0, 2.0, 1.0);
    const auto f = cubic_v_field(g);
    const auto fsub = cubic_v_field(gsub);
    const auto est = estimate_seminorm(f, HolderOrder(2.5), FitKind::taylor_remainder);
    const auto esub = estimate_seminorm(fsub, HolderOrder(2.5), FitKind::taylor_remainder);
    CHECK(esub.seminorm <= est.seminorm + 1e-12);
    CHECK(esub.seminorm > 0.55);
    CHECK(esub.seminorm < 0.7);
}

TEST_CASE("scan reports when no cylinder is admissible") {
    Grid narrow(1, 65, 128, 33, -1.0, 0.0, 2.0, 0.1);
    const auto f = sample([](const KineticPoint& z) { return z.v[0]; }, narrow);
    CHECK_THROWS_AS(estimate_seminorm(f, HolderOrder(2.5), FitKind::best_polynomial),
                    std::runtime_error);

    Grid coarse(1, 5, 4, 33, -1.0, 0.0);
    const auto fc = sample([](const KineticPoint& z) { return z.v[0]; }, coarse);
    CHECK_THROWS_AS(estimate_seminorm(fc, HolderOrder(2.5), FitKind::best_polynomial),
                    std::runtime_error);
}

TEST_CASE("norm equivalence holds on a smooth field") {
    Grid g(1, 17, 128, 65, -0.25, 0.0, 2.0, 1.0);
    const auto f = sample(
        [](const KineticPoint& z) {
            return std::sin(z.v[0] + 0.4 * z.t) * (1.0 + 0.2 * std::cos(std::numbers::pi * z.x[0]));
        },
        g);
    const auto rep = check_norm_equivalence(f, 0.5);
    CHECK_FALSE(rep.both_zero);
    CHECK(rep.cylinders_compared == 1088);
    CHECK(rep.taylor.seminorm > 0.0);
    CHECK(rep.best.seminorm > 0.0);
    CHECK(rep.ratio > 0.0);
    CHECK(rep.ratio <= 1.05);
    CHECK(rep.ratio_lo > 0.0);
    CHECK(rep.ratio_lo <= rep.ratio);
    CHECK(rep.ratio <= rep.ratio_hi);
    CHECK(rep.within_tolerance);
}

TEST_CASE("norm equivalence ratio stays below one for the cubic") {
    Grid g(1, 33, 64, 65, -1.0, 0.0, 2.0, 1.0);
    const auto rep = check_norm_equivalence(cubic_v_field(g), 0.5);
    CHECK_FALSE(rep.both_zero);
    CHECK(rep.ratio <= 1.05);
    CHECK(rep.within_tolerance);
}

TEST_CASE("norm equivalence flags polynomial fields as both zero") {
    Grid g(1, 17, 128, 65, -0.25, 0.0, 2.0, 1.0);
    const auto f = sample(
        [](const KineticPoint& z) { return 0.3 + z.t - 0.5 * z.v[0] + 0.25 * z.v[0] * z.v[0]; }, g);
    const auto rep = check_norm_equivalence(f, 0.5);
    CHECK(rep.both_zero);
    CHECK(rep.cylinders_compared == 0);
    CHECK(rep.ratio_lo == 0.0);
    CHECK(rep.ratio_hi == 0.0);
    CHECK(rep.within_tolerance);
    CHECK(rep.taylor.seminorm < 1e-8);
}

TEST_CASE("two point quotient agrees with the scanned seminorm for small order") {
    Grid g(1, 65, 128, 129, -1.0, 0.0, 2.0, 1.0);
    const auto f = sample([](const KineticPoint& z) { return std::sqrt(std::fabs(z.v[0])); }, g);
    const auto tp = two_point_quotient(f, HolderOrder(0.5));
    CHECK(tp.sup == Catch::Approx(1.0).epsilon(0.0).margin(1e-9));
    const auto est = estimate_seminorm(f, HolderOrder(0.5), FitKind::taylor_remainder);
    CHECK(std::fabs(est.seminorm - tp.sup) <= 0.15 * tp.sup);
    CHECK(est.seminorm > 0.9);
    CHECK(est.seminorm <= 1.0 + 1e-9);
    CHECK_THROWS_AS(two_point_quotient(f, HolderOrder(2.5)), std::invalid_argument);
}

TEST_CASE("difference quotients are exact on model fields") {
    Grid g(1, 65, 16, 65, 0.0, 1.0, 2.0 * std::numbers::pi, 1.0);

    const auto ft = sample([](const KineticPoint& z) { return z.t; }, g);
    const auto qt = difference_quotients(ft, 0.25, Vec{1.0});
    int ix0[1] = {3}, iv0[1] = {32}, iv1[1] = {10};
    CHECK(qt.s1_valid(4));
    CHECK_FALSE(qt.s1_valid(3));
    CHECK(qt.s1.at(32, ix0, iv0) == Catch::Approx(1.0).epsilon(0.0).margin(1e-10));
    CHECK(qt.s1.at(32, ix0, iv1) == Catch::Approx(1.0).epsilon(0.0).margin(1e-10));
    CHECK(qt.s1.at(3, ix0, iv0) == 0.0);

    const auto fq = sample([](const KineticPoint& z) { return z.v[0] * z.v[0]; }, g);
    const auto qq = difference_quotients(fq, 0.125, Vec{1.0});
    CHECK(qq.s2_valid(iv0));
    CHECK(qq.s2.at(10, ix0, iv0) == Catch::Approx(2.0).epsilon(0.0).margin(1e-9));
    int edge[1] = {62};
    CHECK_FALSE(qq.s2_valid(edge));
    CHECK(qq.s2.at(10, ix0, edge) == 0.0);

    const auto fa = sample([](const KineticPoint& z) { return 0.3 + 0.7 * z.v[0]; }, g);
    const auto qa = difference_quotients(fa, 0.125, Vec{1.0});
    CHECK(qa.s2.at(10, ix0, iv0) == Catch::Approx(0.0).margin(1e-9));
    CHECK(qa.s3.at(10, ix0, iv0) == Catch::Approx(0.7).epsilon(0.0).margin(1e-9));

    const auto fl = sample([](const KineticPoint& z) { return z.v[0]; }, g);
    const auto ql = difference_quotients(fl, 0.125, Vec{1.0});
    CHECK(ql.s3.at(20, ix0, iv0) == Catch::Approx(1.0).epsilon(0.0).margin(1e-9));

    CHECK_THROWS_AS(difference_quotients(ft, 0.0, Vec{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(difference_quotients(ft, -0.1, Vec{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(difference_quotients(ft, 0.25, Vec{2.0}), std::invalid_argument);
    CHECK_THROWS_AS(difference_quotients(ft, 3.0, Vec{1.0}), std::invalid_argument);
    Grid gv(1, 65, 16, 65, 0.0, 1.0, 2.0 * std::numbers::pi, 0.5);
    const auto fv = sample([](const KineticPoint& z) { return z.v[0]; }, gv);
    CHECK_THROWS_AS(difference_quotients(fv, 0.8, Vec{1.0}), std::invalid_argument);
}

TEST_CASE("second difference is exact along diagonal directions in d2") {
    Grid g(2, 5, 4, 33, 0.0, 0.25, 2.0 * std::numbers::pi, 1.0);
    const Vec u{std::sqrt(0.5), std::sqrt(0.5)};
    const auto f = sample(
        [&](const KineticPoint& z) {
            const double s = z.v.dot(u);
            return s * s;
        },
        g);
    const double r = 4.0 * std::sqrt(2.0) * g.dv();
    const auto q = difference_quotients(f, r, u);
    int ix[2] = {1, 2}, iv[2] = {16, 16};
    CHECK(q.s2_valid(iv));
    CHECK(q.s2.at(2, ix, iv) == Catch::Approx(2.0).epsilon(0.0).margin(1e-7));
    int bad[2] = {31, 16};
    CHECK_FALSE(q.s2_valid(bad));
}

TEST_CASE("interpolation constants are finite and scale invariant") {
    Grid g(1, 33, 64, 65, -1.0, 0.0, 2.0, 1.0);
    const auto f = cubic_v_field(g);
    const std::vector<double> eps{0.25, 0.5, 1.0, 2.0, 4.0};
    const auto rep = check_interpolation(f, 0.5, eps);
    CHECK(rep.rows.size() == 25);
    CHECK(rep.sup_norm == Catch::Approx(1.0));
    CHECK(rep.lhs[1] == Catch::Approx(3.0).margin(0.01));
    CHECK(rep.lhs[3] == Catch::Approx(6.0).epsilon(0.0).margin(1e-6));
    CHECK(rep.monotone_ok);
    for (const auto& row : rep.rows) {
        CHECK(std::isfinite(row.C));
        CHECK(row.C >= 0.0);
        if (row.quantity == "transport-sup") CHECK(row.C < 1e-8);
    }

    const auto f3 = sample([](const KineticPoint& z) { return 3.0 * z.v[0] * z.v[0] * z.v[0]; }, g);
    const auto rep3 = check_interpolation(f3, 0.5, eps);
    CHECK(rep3.sup_norm == Catch::Approx(3.0));
    REQUIRE(rep3.rows.size() == rep.rows.size());
    for (std::size_t i = 0; i < rep.rows.size(); ++i)
        CHECK(rep3.rows[i].C == Catch::Approx(rep.rows[i].C).epsilon(1e-10).margin(1e-14));

    const auto fc = sample([](const KineticPoint&) { return 0.7; }, g);
    const auto repc = check_interpolation(fc, 0.5, eps);
    for (const auto& row : repc.rows) CHECK(row.C < 1e-9);

    std::ostringstream os;
    write_interpolation_csv(rep, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "quantity,epsilon,C");
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 25);

    CHECK_THROWS_AS(check_interpolation(f, 1.5, eps), std::invalid_argument);
    CHECK_THROWS_AS(check_interpolation(f, 0.5, {}), std::invalid_argument);
    CHECK_THROWS_AS(check_interpolation(f, 0.5, {-1.0}), std::invalid_argument);
}

TEST_CASE("interpolation constants are stable under refinement") {
    const std::vector<double> eps{0.25, 0.5, 1.0, 2.0, 4.0};
    Grid gc(1, 65, 128, 129, -1.0, 0.0, 2.0, 1.0);
    Grid gf(1, 97, 192, 193, -1.0, 0.0, 2.0, 1.0);
    const auto rc = check_interpolation(cubic_v_field(gc), 0.5, eps);
    const auto rf = check_interpolation(cubic_v_field(gf), 0.5, eps);
    REQUIRE(rc.rows.size() == rf.rows.size());
    double cmax = 0.0;
    for (const auto& row : rc.rows) cmax = std::max(cmax, row.C);
    for (std::size_t i = 0; i < rc.rows.size(); ++i)
        CHECK(std::fabs(rf.rows[i].C - rc.rows[i].C) <= 0.2 * rc.rows[i].C + 1e-3 * cmax);
}

TEST_CASE("seminorm scan is deterministic across repeated runs") {
    Grid g(1, 33, 64, 65, -1.0, 0.0, 2.0, 1.0);
    const auto f = sample(
        [](const KineticPoint& z) {
            return std::sin(z.v[0] + 0.3 * z.t) + 0.1 * std::cos(std::numbers::pi * z.x[0]);
        },
        g);
    const auto a = estimate_seminorm(f, HolderOrder(2.5), FitKind::best_polynomial);
    const auto b = estimate_seminorm(f, HolderOrder(2.5), FitKind::best_polynomial);
    CHECK(a.seminorm == b.seminorm);
    CHECK(a.witness.radius == b.witness.radius);
    CHECK(a.witness.center.t == b.witness.center.t);
    CHECK(a.witness.center.x[0] == b.witness.center.x[0]);
    CHECK(a.witness.center.v[0] == b.witness.center.v[0]);
    CHECK(a.cylinders_scanned == b.cylinders_scanned);
}
