#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "kinfp/field.hpp"
#include "kinfp/field_io.hpp"

using namespace kinfp;

namespace {

Grid grid1(int nt, int nx, int nv, double T = 1.0, double V = 8.0) {
    return Grid(1, nt, nx, nv, 0.0, nt > 1 ? T : 0.0, 2.0 * std::numbers::pi, V);
}

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("grid spacing and invariants") {
    Grid g = grid1(5, 8, 9, 1.0, 2.0);
    CHECK(g.dt() == Catch::Approx(0.25));
    CHECK(g.dx() == Catch::Approx(2.0 * std::numbers::pi / 8));
    CHECK(g.dv() == Catch::Approx(0.5));
    CHECK(g.v(0) == -2.0);
    CHECK(g.v(8) == 2.0);
    CHECK(g.x(0) == 0.0);

    CHECK_THROWS_AS(Grid(3, 1, 8, 8, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(Grid(1, 1, 2, 8, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(Grid(1, 1, 8, 3, 0, 0), std::invalid_argument);
}

TEST_CASE("sample: zero, Maxwellian point value, mass") {
    Grid g = grid1(1, 4, 64, 0.0);
    auto zero = sample([](const KineticPoint&) { return 0.0; }, g);
    for (double v : zero.data) REQUIRE(v == 0.0);

    MaxwellianRef mx(1);
    Grid gm = grid1(1, 4, 257, 0.0);
    auto f = sample([&](const KineticPoint& z) { return mx.sqrt_mu(z.v); }, gm);
    // v = 0 sits at the middle node of an odd-count symmetric axis
    const int mid = (gm.nv - 1) / 2;
    CHECK(gm.v(mid) == 0.0);
    CHECK(f.at1(0, 0, mid) == Catch::Approx(0.6316187777460647).epsilon(1e-14));

    auto fmu = sample([&](const KineticPoint& z) { return mx.mu(z.v); }, grid1(1, 4, 256, 0.0));
    auto mass = quadrature_v(fmu, [](const Vec&) { return 1.0; });
    CHECK(mass.at1(0, 0) == Catch::Approx(1.0).epsilon(0.0).margin(1e-10));
}

TEST_CASE("sample rejects non-finite values") {
    Grid g = grid1(1, 4, 8, 0.0);
    CHECK_THROWS_WITH(sample([](const KineticPoint& z) { return 1.0 / (z.v[0] + 8.0); }, g),
                      Catch::Matchers::ContainsSubstring("non-finite"));
}

TEST_CASE("finite differences: pinned polynomial exactness") {
    Grid g = grid1(5, 16, 33);
    auto c = sample([](const KineticPoint&) { return 3.5; }, g);
    for (auto which : {Deriv::Dt, Deriv::Dx, Deriv::Dv}) {
        auto d = finite_difference(c, DerivSpec{which, 0, 0});
        for (double v : d.data) REQUIRE(std::fabs(v) < 1e-12);
    }

    auto v2 = sample([](const KineticPoint& z) { return z.v[0] * z.v[0]; }, g);
    auto dvv = finite_difference(v2, DerivSpec{Deriv::Dvv, 0, 0});
    for (double v : dvv.data) REQUIRE(v == Catch::Approx(2.0).epsilon(0.0).margin(1e-9));

    // second order in x: halving dx divides the sin error by about 4
    double err_prev = -1.0;
    for (int nx : {16, 32, 64}) {
        Grid gg = grid1(1, nx, 8, 0.0);
        auto s = sample([&](const KineticPoint& z) { return std::sin(2.0 * std::numbers::pi * z.x[0] / gg.L); }, gg);
        auto ds = finite_difference(s, DerivSpec{Deriv::Dx, 0, 0});
        double expect = 2.0 * std::numbers::pi / gg.L;
        double err = std::fabs(ds.at1(0, 0, 0) - expect);
        if (err_prev > 0.0) CHECK(err < err_prev / 3.2);
        err_prev = err;
    }
}

TEST_CASE("finite differences: quadratic t and v polynomials exact at boundaries") {
    Grid g = grid1(6, 8, 12, 1.0, 2.0);
    auto f = sample([](const KineticPoint& z) { return z.t * z.t - 0.5 * z.t; }, g);
    auto dt = finite_difference(f, DerivSpec{Deriv::Dt, 0, 0});
    for (int it = 0; it < g.nt; ++it)
        REQUIRE(dt.at1(it, 2, 3) == Catch::Approx(2.0 * g.t(it) - 0.5).epsilon(0.0).margin(1e-10));

    auto h = sample([](const KineticPoint& z) { return 1.0 + z.v[0] + 0.25 * z.v[0] * z.v[0]; }, g);
    auto dv = finite_difference(h, DerivSpec{Deriv::Dv, 0, 0});
    for (int iv = 0; iv < g.nv; ++iv)
        REQUIRE(dv.at1(0, 0, iv) == Catch::Approx(1.0 + 0.5 * g.v(iv)).epsilon(0.0).margin(1e-10));
}

TEST_CASE("transport derivative matches Dt + v Dx") {
    Grid g = grid1(6, 16, 9, 1.0, 2.0);
    auto f = sample([](const KineticPoint& z) { return std::sin(z.x[0] - z.t) * (1.0 + 0.3 * z.v[0]); }, g);
    auto tr = finite_difference(f, DerivSpec{Deriv::Transport, 0, 0});
    auto dt = finite_difference(f, DerivSpec{Deriv::Dt, 0, 0});
    auto dx = finite_difference(f, DerivSpec{Deriv::Dx, 0, 0});
    for (int it = 0; it < g.nt; ++it)
        for (int ix = 0; ix < g.nx; ++ix)
            for (int iv = 0; iv < g.nv; ++iv)
                REQUIRE(tr.at1(it, ix, iv) ==
                        Catch::Approx(dt.at1(it, ix, iv) + g.v(iv) * dx.at1(it, ix, iv)).epsilon(0.0).margin(1e-12));
}

TEST_CASE("mixed second v derivative in d=2") {
    Grid g(2, 2, 4, 12, 0.0, 1.0, 2.0 * std::numbers::pi, 2.0);
    auto f = sample([](const KineticPoint& z) { return z.v[0] * z.v[1]; }, g);
    auto dxy = finite_difference(f, DerivSpec{Deriv::Dvv, 0, 1});
    for (double v : dxy.data) REQUIRE(v == Catch::Approx(1.0).epsilon(0.0).margin(1e-9));
}

TEST_CASE("quadrature: Gaussian moments at d=1 and d=2") {
    MaxwellianRef m1(1);
    Grid g = grid1(1, 4, 129, 0.0);
    auto root = sample([&](const KineticPoint& z) { return m1.sqrt_mu(z.v); }, g);
    auto one = quadrature_v(root, [&](const Vec& v) { return m1.sqrt_mu(v); });
    CHECK(one.at1(0, 0) == Catch::Approx(1.0).epsilon(0.0).margin(1e-8));

    auto second = sample([&](const KineticPoint& z) { return z.v[0] * z.v[0] * m1.sqrt_mu(z.v); }, g);
    auto mom2 = quadrature_v(second, [&](const Vec& v) { return m1.sqrt_mu(v); });
    CHECK(mom2.at1(0, 0) == Catch::Approx(1.0).epsilon(0.0).margin(1e-8));

    MaxwellianRef m2(2);
    Grid g2(2, 1, 4, 96, 0.0, 0.0);
    auto mu2 = sample([&](const KineticPoint& z) { return m2.mu(z.v); }, g2);
    auto mass2 = quadrature_v(mu2, [](const Vec&) { return 1.0; });
    int ix[2] = {0, 0};
    CHECK(mass2.at(0, ix) == Catch::Approx(1.0).epsilon(0.0).margin(1e-8));
}

TEST_CASE("quadrature refinement slope >= 1.9 with active endpoints") {
    // [-1,1] keeps the integrand's endpoint slopes nonzero, otherwise
    // the trapezoid rule would converge faster than its formal order
    double exact = 2.0 * std::sin(1.0);
    double errs[3];
    int idx = 0;
    for (int nv : {17, 33, 65}) {
        Grid g = grid1(1, 4, nv, 0.0, 1.0);
        auto f = sample([](const KineticPoint& z) { return std::cos(z.v[0]); }, g);
        auto q = quadrature_v(f, [](const Vec&) { return 1.0; });
        errs[idx++] = std::fabs(q.at1(0, 0) - exact);
    }
    double s1 = std::log2(errs[0] / errs[1]);
    double s2 = std::log2(errs[1] / errs[2]);
    CHECK(s1 >= 1.9);
    CHECK(s2 >= 1.9);
}

TEST_CASE("x derivative commutes with integer periodic shift") {
    Grid g = grid1(1, 16, 8, 0.0);
    auto f = sample([](const KineticPoint& z) { return std::sin(z.x[0]) + 0.2 * std::cos(2.0 * z.x[0] + z.v[0]); }, g);

    const int shift = 5;
    Field fs(g);
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iv = 0; iv < g.nv; ++iv) fs.at1(0, (ix + shift) % g.nx, iv) = f.at1(0, ix, iv);

    auto df = finite_difference(f, DerivSpec{Deriv::Dx, 0, 0});
    auto dfs = finite_difference(fs, DerivSpec{Deriv::Dx, 0, 0});
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iv = 0; iv < g.nv; ++iv)
            REQUIRE(dfs.at1(0, (ix + shift) % g.nx, iv) == df.at1(0, ix, iv));
}

TEST_CASE("field file round trip is bit identical") {
    Grid g(2, 3, 4, 5, -0.5, 0.0, 1.5, 2.5);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Field f(g);
    for (auto& v : f.data) v = u(rng);

    auto p = tmp_path("kinfp_roundtrip.kfp");
    write_field(f, p.string());
    Field r = read_field(p.string());
    CHECK(r.grid.same_layout(g));
    REQUIRE(r.data.size() == f.data.size());
    for (std::size_t i = 0; i < f.data.size(); ++i) REQUIRE(r.data[i] == f.data[i]);
    std::filesystem::remove(p);
}

TEST_CASE("field file error paths") {
    auto p = tmp_path("kinfp_badmagic.kfp");
    {
        std::ofstream os(p, std::ios::binary);
        os << "NOPE" << std::string(60, '\0');
    }
    CHECK_THROWS_WITH(read_field(p.string()), Catch::Matchers::ContainsSubstring("bad magic"));

    Grid g = grid1(1, 4, 8, 0.0);
    Field f(g);
    auto q = tmp_path("kinfp_trunc.kfp");
    write_field(f, q.string());
    std::filesystem::resize_file(q, std::filesystem::file_size(q) - 16);
    CHECK_THROWS_WITH(read_field(q.string()), Catch::Matchers::ContainsSubstring("expected"));
    std::filesystem::remove(p);
    std::filesystem::remove(q);
}

TEST_CASE("csv slice export") {
    Grid g = grid1(3, 4, 5, 1.0, 2.0);
    auto f = sample([](const KineticPoint& z) { return z.v[0]; }, g);
    std::ostringstream os;
    int ix[2] = {1, 0}, iv[2] = {2, 0};
    write_csv_slice(f, os, 2, 0, ix, iv);  // vary v, fix t=0 x index 1
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,x,v,value");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == g.nv);
    CHECK(os.str().find("-2") != std::string::npos);
}
