#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "kinfp/geometry.hpp"

using namespace kinfp;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// |a-b| within n ulp measured at the magnitude of the contributing terms;
// plain result-relative ulp is meaningless after cancellation.
bool close_ulp(double a, double b, double term_scale, int n = 8) {
    if (a == b) return true;
    return std::fabs(a - b) <= n * kEps * term_scale;
}

KineticPoint random_point(std::mt19937_64& rng, int d, double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec x(d), v(d);
    double t = u(rng);
    for (int i = 0; i < d; ++i) x[i] = u(rng);
    for (int i = 0; i < d; ++i) v[i] = u(rng);
    return KineticPoint(t, x, v);
}

}  // namespace

TEST_CASE("galilean compose: pinned values") {
    const KineticPoint z(1.5, Vec{0.25}, Vec{-0.75});
    const KineticPoint id = KineticPoint::origin(1);

    auto a = galilean_compose(id, z);
    CHECK(a.t == z.t);
    CHECK(a.x == z.x);
    CHECK(a.v == z.v);

    auto b = galilean_compose(KineticPoint(1, Vec{2}, Vec{3}), KineticPoint(4, Vec{5}, Vec{6}));
    CHECK(b.t == 5.0);
    CHECK(b.x[0] == 19.0);
    CHECK(b.v[0] == 9.0);

    auto c = galilean_compose(z, galilean_inverse(z));
    CHECK(close_ulp(c.t, 0.0, std::fabs(z.t)));
    CHECK(close_ulp(c.x[0], 0.0, std::fabs(z.x[0]) + std::fabs(z.t * z.v[0])));
    CHECK(close_ulp(c.v[0], 0.0, std::fabs(z.v[0])));
}

TEST_CASE("galilean inverse: pinned values") {
    auto z = galilean_inverse(KineticPoint(2, Vec{1}, Vec{3}));
    CHECK(z.t == -2.0);
    CHECK(z.x[0] == 5.0);
    CHECK(z.v[0] == -3.0);

    auto id = galilean_inverse(KineticPoint::origin(2));
    CHECK(id.t == 0.0);
    CHECK(id.x == Vec(2));

    const KineticPoint w(0.3, Vec{-1.0, 0.5}, Vec{2.0, -0.25});
    auto ww = galilean_inverse(galilean_inverse(w));
    CHECK(close_ulp(ww.t, w.t, std::fabs(w.t)));
    for (int i = 0; i < 2; ++i) {
        CHECK(close_ulp(ww.x[i], w.x[i], std::fabs(w.x[i]) + std::fabs(w.t * w.v[i])));
        CHECK(close_ulp(ww.v[i], w.v[i], std::fabs(w.v[i])));
    }
}

TEST_CASE("scale: pinned values and dilation group law") {
    auto z = scale(2.0, KineticPoint(1, Vec{1}, Vec{1}));
    CHECK(z.t == 4.0);
    CHECK(z.x[0] == 8.0);
    CHECK(z.v[0] == 2.0);

    const KineticPoint w(0.7, Vec{-0.2}, Vec{1.1});
    auto s1 = scale(1.0, w);
    CHECK(s1.t == w.t);
    CHECK(s1.x == w.x);

    auto rt = scale(3.0, scale(1.0 / 3.0, w));
    CHECK(close_ulp(rt.t, w.t, std::fabs(w.t)));
    CHECK(close_ulp(rt.x[0], w.x[0], std::fabs(w.x[0])));
    CHECK(close_ulp(rt.v[0], w.v[0], std::fabs(w.v[0])));

    CHECK_THROWS_AS(scale(0.0, w), std::invalid_argument);
    CHECK_THROWS_AS(scale(-1.0, w), std::invalid_argument);
}

TEST_CASE("cylinder membership: pinned values") {
    Cylinder q1(KineticPoint::origin(1), 1.0);
    CHECK(cylinder_contains(q1, KineticPoint::origin(1)));
    CHECK_FALSE(cylinder_contains(q1, KineticPoint(-1, Vec{0}, Vec{0})));
    CHECK_FALSE(cylinder_contains(q1, KineticPoint(0.5, Vec{0}, Vec{0})));

    Cylinder q2(KineticPoint(0, Vec{0}, Vec{1}), 2.0);
    CHECK(cylinder_contains(q2, KineticPoint(-1, Vec{-0.9}, Vec{2.5})));
    CHECK_FALSE(cylinder_contains(q2, KineticPoint(-4, Vec{0}, Vec{1})));
    CHECK_FALSE(cylinder_contains(q2, KineticPoint(-1, Vec{0}, Vec{3.5})));
}

TEST_CASE("kinetic degree: pinned values") {
    KineticPolynomial constant{1, {KineticMonomial{7.0, 0, {0, 0, 0}, {0, 0, 0}, 1}}};
    CHECK(kinetic_degree(constant) == 0);

    KineticPolynomial zero{1, {}};
    CHECK(kinetic_degree(zero) == 0);

    KineticPolynomial txv{1, {KineticMonomial{1.0, 1, {1, 0, 0}, {1, 0, 0}, 1}}};
    CHECK(kinetic_degree(txv) == 6);

    KineticPolynomial v2{1, {KineticMonomial{1.0, 0, {0, 0, 0}, {2, 0, 0}, 1}}};
    CHECK(kinetic_degree(v2) == 2);
}

TEST_CASE("monomial basis below a kinetic degree") {
    auto b1 = monomials_below(1, 2.5);
    REQUIRE(b1.size() == 4);  // 1, t, v, v^2
    CHECK(b1[0].kinetic_degree() == 0);
    CHECK(b1[1].kinetic_degree() == 1);  // v
    CHECK(b1[2].kinetic_degree() == 2);
    CHECK(b1[3].kinetic_degree() == 2);

    auto b2 = monomials_below(2, 2.5);
    CHECK(b2.size() == 7);  // 1, v1, v2, t, v1^2, v1 v2, v2^2

    auto b3 = monomials_below(1, 0.5);
    REQUIRE(b3.size() == 1);
    CHECK(b3[0].kinetic_degree() == 0);
}

TEST_CASE("group laws: property tests, 1e4 seeded samples, <= 8 ulp") {
    for (int d : {1, 2}) {
        std::mt19937_64 rng(0x5eed0001u + static_cast<unsigned>(d));
        for (int it = 0; it < 10000; ++it) {
            auto z1 = random_point(rng, d);
            auto z2 = random_point(rng, d);
            auto z3 = random_point(rng, d);

            auto a = galilean_compose(galilean_compose(z1, z2), z3);
            auto b = galilean_compose(z1, galilean_compose(z2, z3));
            REQUIRE(close_ulp(a.t, b.t, std::fabs(z1.t) + std::fabs(z2.t) + std::fabs(z3.t)));
            for (int i = 0; i < d; ++i) {
                double sx = std::fabs(z1.x[i]) + std::fabs(z2.x[i]) + std::fabs(z3.x[i]) +
                            std::fabs(z2.t * z1.v[i]) + std::fabs(z3.t * z1.v[i]) +
                            std::fabs(z3.t * z2.v[i]);
                REQUIRE(close_ulp(a.x[i], b.x[i], sx));
                REQUIRE(close_ulp(a.v[i], b.v[i],
                                  std::fabs(z1.v[i]) + std::fabs(z2.v[i]) + std::fabs(z3.v[i])));
            }

            auto inv = galilean_compose(z1, galilean_inverse(z1));
            REQUIRE(close_ulp(inv.t, 0.0, std::fabs(z1.t)));
            for (int i = 0; i < d; ++i)
                REQUIRE(close_ulp(inv.x[i], 0.0,
                                  std::fabs(z1.x[i]) + std::fabs(z1.t * z1.v[i])));
        }
    }
}

TEST_CASE("S_r is a compose homomorphism: 1e4 seeded samples, <= 8 ulp") {
    for (int d : {1, 2}) {
        std::mt19937_64 rng(0x5eed0002u + static_cast<unsigned>(d));
        std::uniform_real_distribution<double> ur(0.1, 3.0);
        for (int it = 0; it < 10000; ++it) {
            auto z1 = random_point(rng, d);
            auto z2 = random_point(rng, d);
            double r = ur(rng);

            auto a = scale(r, galilean_compose(z1, z2));
            auto b = galilean_compose(scale(r, z1), scale(r, z2));
            double r3 = r * r * r;
            REQUIRE(close_ulp(a.t, b.t, r * r * (std::fabs(z1.t) + std::fabs(z2.t))));
            for (int i = 0; i < d; ++i) {
                double sx = r3 * (std::fabs(z1.x[i]) + std::fabs(z2.x[i]) +
                                  std::fabs(z2.t * z1.v[i]));
                REQUIRE(close_ulp(a.x[i], b.x[i], sx));
                REQUIRE(close_ulp(a.v[i], b.v[i], r * (std::fabs(z1.v[i]) + std::fabs(z2.v[i]))));
            }
        }
    }
}

TEST_CASE("monomial scaling: m(S_r z) = r^deg m(z), sampled") {
    std::mt19937_64 rng(0x5eed0003u);
    std::uniform_real_distribution<double> ur(0.2, 2.5);
    for (int d : {1, 2}) {
        auto basis = monomials_below(d, 4.0);
        for (int it = 0; it < 2000; ++it) {
            auto z = random_point(rng, d, 0.1, 1.5);
            double r = ur(rng);
            auto sz = scale(r, z);
            for (const auto& m : basis) {
                double lhs = m.evaluate(sz);
                double rhs = std::pow(r, m.kinetic_degree()) * m.evaluate(z);
                REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("cylinder as group translate of the scaled unit cylinder") {
    for (int d : {1, 2}) {
        std::mt19937_64 rng(0x5eed0004u + static_cast<unsigned>(d));
        std::uniform_real_distribution<double> ur(0.3, 2.0);
        Cylinder unit(KineticPoint::origin(d), 1.0);
        for (int it = 0; it < 10000; ++it) {
            auto z0 = random_point(rng, d);
            double r = ur(rng);
            Cylinder q(z0, r);
            auto tr = cylinder_as_translate(q);
            CHECK(tr.r == r);

            auto z = random_point(rng, d, -2.5, 2.5);
            bool direct = cylinder_contains(q, z);
            bool via_unit = cylinder_contains(unit, to_unit_frame(q, z));
            REQUIRE(direct == via_unit);

            // z0 o S_r(w) with w drawn inside Q_1 lands in Q_r(z0)
            auto w = random_point(rng, d, -0.4, 0.4);
            w.t = -0.5 * std::fabs(w.t);
            REQUIRE(cylinder_contains(q, from_unit_frame(q, w)));
        }
    }
}

TEST_CASE("nested cylinder test is sound") {
    std::mt19937_64 rng(0x5eed0005u);
    Cylinder outer(KineticPoint::origin(1), 1.0);
    std::uniform_real_distribution<double> ur(0.05, 0.45);
    int accepted = 0;
    for (int it = 0; it < 3000; ++it) {
        auto zp = random_point(rng, 1, -0.5, 0.5);
        zp.t = -std::fabs(zp.t) * 0.5;
        double rho = ur(rng);
        if (!cylinder_inside(outer, zp, rho)) continue;
        ++accepted;
        // every sampled point of the inner cylinder is in the outer one
        for (int k = 0; k < 50; ++k) {
            auto w = random_point(rng, 1, -0.9, 0.9);
            w.t = -std::fabs(w.t);
            Cylinder inner(zp, rho);
            if (cylinder_contains(Cylinder(KineticPoint::origin(1), 1.0), w))
                REQUIRE(cylinder_contains(outer, from_unit_frame(inner, w)));
        }
    }
    CHECK(accepted > 100);
}

TEST_CASE("kinetic norm homogeneity") {
    std::mt19937_64 rng(0x5eed0006u);
    for (int it = 0; it < 1000; ++it) {
        auto z = random_point(rng, 2);
        double r = 1.7;
        CHECK(kinetic_norm(scale(r, z)) == Catch::Approx(r * kinetic_norm(z)).epsilon(1e-12));
    }
}

TEST_CASE("dimension mismatch rejected") {
    CHECK_THROWS_AS(galilean_compose(KineticPoint::origin(1), KineticPoint::origin(2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(cylinder_contains(Cylinder(KineticPoint::origin(2), 1.0),
                                      KineticPoint::origin(1)),
                    std::invalid_argument);
}
