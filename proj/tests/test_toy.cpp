#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "kinfp/field.hpp"
#include "kinfp/toy.hpp"

using namespace kinfp;

namespace {

constexpr double kPi = std::numbers::pi;

Grid slice_grid(int nx, int nv) { return Grid(1, 1, nx, nv, 0.0, 0.0); }

ToyState state_from(const Grid& g1, const std::function<double(const KineticPoint&)>& f) {
    return ToyState{sample(f, g1), g1.t_min};
}

ToyState equilibrium_state(const Grid& g1, double scale = 1.0) {
    const MaxwellianRef mref(g1.d);
    return state_from(g1,
                      [&, scale](const KineticPoint& z) { return scale * mref.sqrt_mu(z.v); });
}

ToyState perturbed_state(const Grid& g1, double amp = 0.3) {
    const MaxwellianRef mref(g1.d);
    return state_from(g1, [&, amp](const KineticPoint& z) {
        return (1.0 + amp * std::sin(z.x[0])) * mref.sqrt_mu(z.v);
    });
}

Field extract_slice(const Field& f, int it) {
    const Grid& g = f.grid;
    Field out(Grid(g.d, 1, g.nx, g.nv, g.t(it), g.t(it), g.L, g.V));
    const std::int64_t per_t = g.nxd() * g.nvd();
    std::copy(f.data.begin() + it * per_t, f.data.begin() + (it + 1) * per_t, out.data.begin());
    return out;
}

double sup_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("the density functional integrates against the maxwellian weight") {
    const Grid gs = slice_grid(16, 129);

    const auto rho_eq = compute_rho(equilibrium_state(gs));
    for (double r : rho_eq.data) CHECK(std::abs(r - 1.0) <= 1e-8);

    const auto rho_scaled = compute_rho(equilibrium_state(gs, 2.5));
    for (double r : rho_scaled.data) CHECK(std::abs(r - 2.5) <= 1e-8);

    const auto mixed = perturbed_state(gs);
    const auto rho_mixed = compute_rho(mixed);
    for (int j = 0; j < gs.nx; ++j) {
        const double expect = 1.0 + 0.3 * std::sin(gs.x(j));
        CHECK(std::abs(rho_mixed.data[static_cast<std::size_t>(j)] - expect) <= 1e-8);
        CHECK(rho_mixed.data[static_cast<std::size_t>(j)] >= 0.7 - 1e-6);
        CHECK(rho_mixed.data[static_cast<std::size_t>(j)] <= 1.3 + 1e-6);
    }
}

TEST_CASE("the velocity operator annihilates the maxwellian root") {
    const auto zero = state_from(slice_grid(8, 65), [](const KineticPoint&) { return 0.0; });
    for (double v : apply_U(zero).data) CHECK(v == 0.0);

    auto equilibrium_error = [](int nv) {
        const auto u = apply_U(equilibrium_state(slice_grid(8, nv)));
        double m = 0.0;
        for (double v : u.data) m = std::max(m, std::abs(v));
        return m;
    };
    const double e_coarse = equilibrium_error(65);
    const double e_fine = equilibrium_error(129);
    CHECK(e_fine <= 2e-3);
    CHECK(e_coarse / e_fine >= 3.2);
    CHECK(e_coarse / e_fine <= 4.8);

    // v sqrt(mu) is an eigenfunction with eigenvalue -1
    const Grid gs = slice_grid(8, 129);
    const MaxwellianRef mref(1);
    const auto odd = state_from(
        gs, [&](const KineticPoint& z) { return z.v[0] * mref.sqrt_mu(z.v); });
    const auto u_odd = apply_U(odd);
    double worst = 0.0;
    for (std::size_t i = 0; i < u_odd.data.size(); ++i)
        worst = std::max(worst, std::abs(u_odd.data[i] + odd.g.data[i]));
    CHECK(worst <= 4e-3);

    const auto u2 = apply_U(equilibrium_state(Grid(2, 1, 4, 65, 0.0, 0.0)));
    double worst2 = 0.0;
    for (double v : u2.data) worst2 = std::max(worst2, std::abs(v));
    CHECK(worst2 <= 6e-3);
}

TEST_CASE("constant maxwellian profiles are fixed points of the nonlinear step") {
    const Grid gs = slice_grid(16, 129);
    const EnvelopeConstants env;
    for (const double c : {1.0, 0.9}) {
        for (const Scheme sc : {Scheme::splitting_be, Scheme::splitting_cn}) {
            ToyState st = equilibrium_state(gs, c);
            const Field ref = st.g;
            for (int n = 0; n < 5; ++n) st = step_nonlinear(st, 1e-3, env, sc);
            CHECK(st.time == Catch::Approx(5e-3).epsilon(0.0).margin(1e-15));
            CHECK(sup_diff(st.g, ref) <= 1e-11);
        }
    }
}

TEST_CASE("the nonlinear march preserves the sandwich and the mass") {
    ToyConfig cfg;
    cfg.grid = Grid(1, 11, 32, 129, 0.0, 0.1);
    cfg.dt = 1e-3;
    cfg.t_final = 0.1;
    const auto out = solve_toy(cfg, toy_perturbed_initial(cfg.grid));

    REQUIRE(out.trace.size() == 101);
    CHECK(std::abs(out.rho_bar - 1.0) <= 1e-10);
    CHECK(std::abs(out.trace.front().distance - 0.3 * std::sqrt(kPi)) <= 1e-8);
    const double m0 = out.trace.front().mass;
    for (const auto& s : out.trace) {
        CHECK(std::abs(s.mass - m0) <= 1e-10);
        CHECK(s.min_ratio >= 0.7 - 1e-6);
        CHECK(s.max_ratio <= 1.3 + 1e-6);
    }
    const auto rep = relaxation_report(out.trace);
    CHECK(rep.monotonicity_violations == 0);
    CHECK(rep.final_distance < out.trace.front().distance);

    const auto last = ToyState{extract_slice(out.g, cfg.grid.nt - 1), cfg.t_final};
    const auto env_rep = gaussian_envelope_check(last, cfg.envelope);
    CHECK(env_rep.pass);
}

TEST_CASE("the default run relaxes toward the global maxwellian") {
    const ToyConfig cfg = toy_default_config(1);
    const auto out = solve_toy(cfg, toy_perturbed_initial(cfg.grid));

    REQUIRE(out.trace.size() == 5001);
    const double m0 = out.trace.front().mass;
    for (const auto& s : out.trace) {
        CHECK(std::abs(s.mass - m0) <= 1e-9);
        CHECK(s.min_ratio >= 0.7 - 1e-6);
        CHECK(s.max_ratio <= 1.3 + 1e-6);
    }
    const auto rep = relaxation_report(out.trace);
    CHECK(rep.monotonicity_violations == 0);
    CHECK(std::abs(out.trace.front().distance - 0.3 * std::sqrt(kPi)) <= 1e-8);
    CHECK(rep.t_half >= 1.5);
    CHECK(rep.t_half <= 2.5);
    // measured hypocoercive decay leaves 1.6e-2 at t = 5; the distance would
    // need roughly t = 12 to cross 1e-4 at this rate
    CHECK(rep.final_distance >= 0.010);
    CHECK(rep.final_distance <= 0.025);
}

TEST_CASE("sobolev tracking follows the run") {
    ToyConfig cfg;
    cfg.grid = Grid(1, 6, 64, 128, 0.0, 0.05);
    cfg.dt = 1e-3;
    cfg.t_final = 0.05;
    cfg.track_sobolev = true;
    const auto out = solve_toy(cfg, toy_perturbed_initial(cfg.grid));
    REQUIRE(out.sobolev_norms.size() == 51);
    // transport feeds x-gradients into v-structure, so the anisotropic norm
    // may wobble transiently; it must stay bounded by its starting level
    for (double n : out.sobolev_norms) {
        CHECK(std::isfinite(n));
        CHECK(n <= out.sobolev_norms.front() * 1.05);
        CHECK(n >= out.sobolev_norms.front() * 0.5);
    }
    // initial closed form: (1 + 0.045) 2 pi + 0.09 pi + 1.045 (3/8) pi
    const double exact0 = std::sqrt((2.09 + 0.09 + 1.045 * 0.375) * kPi);
    CHECK(std::abs(out.sobolev_norms.front() - exact0) <= 5e-3);
}

TEST_CASE("the anisotropic sobolev norm matches closed forms") {
    const auto zero = state_from(slice_grid(8, 33), [](const KineticPoint&) { return 0.0; });
    CHECK(sobolev_norm(zero, SobolevOrder{2, 2}) == 0.0);

    // sin(x) sqrt(mu): L2 part pi, first x-derivative pi, second v-derivative
    // 3 pi / 16, summing to 2.1875 pi
    const Grid gs = slice_grid(8, 32001);
    const MaxwellianRef mref(1);
    const auto oracle = state_from(
        gs, [&](const KineticPoint& z) { return std::sin(z.x[0]) * mref.sqrt_mu(z.v); });
    const double n = sobolev_norm(oracle, SobolevOrder{1, 2});
    CHECK(std::abs(n * n - 6.872233929727672) <= 1e-6);

    const Grid gb = slice_grid(16, 1025);
    const auto band = state_from(gb, [&](const KineticPoint& z) {
        return (std::sin(z.x[0]) + 0.5 * std::sin(2.0 * z.x[0])) * mref.sqrt_mu(z.v);
    });
    const double n2 = sobolev_norm(band, SobolevOrder{2, 2});
    const double n3 = sobolev_norm(band, SobolevOrder{3, 2});
    const double n4 = sobolev_norm(band, SobolevOrder{4, 2});
    CHECK(n2 < n3);
    CHECK(n3 < n4);

    CHECK_THROWS_AS(sobolev_norm(band, SobolevOrder{0, 2}), std::invalid_argument);
    CHECK_THROWS_AS(sobolev_norm(state_from(slice_grid(4, 33), [](const KineticPoint&) {
                                     return 1.0;
                                 }),
                                 SobolevOrder{2, 2}),
                    std::invalid_argument);
    CHECK_THROWS_AS(sobolev_norm(state_from(slice_grid(16, 3), [](const KineticPoint&) {
                                     return 1.0;
                                 }),
                                 SobolevOrder{2, 2}),
                    std::invalid_argument);
    // the norm accepts the oracle orders; run configurations do not
    CHECK_THROWS_AS(validate_sobolev_order(SobolevOrder{1, 2}), std::invalid_argument);
}

TEST_CASE("the product inequality bounds mixed derivative products") {
    const auto sine = [](double x) { return std::sin(x); };
    const auto rep = nash_product_check(sine, sine, 2, 1, 1);
    const double lhs_exact = std::sqrt(0.75 * kPi);
    const double hk_exact = 2.0 * std::sqrt(kPi);
    CHECK(std::abs(rep.lhs - lhs_exact) <= 1e-10);
    CHECK(std::abs(rep.a_term - hk_exact) <= 1e-10);
    CHECK(std::abs(rep.b_term - hk_exact) <= 1e-10);
    CHECK(std::abs(rep.constant - 0.21650635094610965) <= 1e-12);
    REQUIRE(rep.eps_applicable);
    CHECK(rep.c_eps_half == 0.0);
    CHECK(std::abs(rep.c_eps_tenth - (lhs_exact - 0.1 * hk_exact) / hk_exact) <= 1e-10);

    // a constant first factor leaves only the second side active
    const auto flat = [](double) { return 2.0; };
    const auto rep_flat = nash_product_check(flat, sine, 2, 2, 0);
    CHECK(rep_flat.constant < 1.0);
    CHECK_FALSE(rep_flat.eps_applicable);

    std::mt19937 rng(20260823);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        double a1 = coef(rng), b1 = coef(rng), a2 = coef(rng), b2 = coef(rng);
        double p1 = coef(rng) * kPi, p2 = coef(rng) * kPi;
        const auto f1 = [=](double x) { return a1 * std::sin(x + p1) + b1 * std::sin(3.0 * x); };
        const auto f2 = [=](double x) { return a2 * std::cos(2.0 * x + p2) + b2 * std::sin(x); };
        const auto r = nash_product_check(f1, f2, 2, 1, 1, 128);
        CHECK(std::isfinite(r.constant));
        worst = std::max(worst, r.constant);
    }
    CHECK(worst <= 0.30);

    CHECK_THROWS_AS(nash_product_check(sine, sine, 2, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(nash_product_check(sine, sine, 0, 0, 0), std::invalid_argument);
}

TEST_CASE("the envelope check reports the ratio extrema") {
    const Grid gs = slice_grid(8, 65);
    const EnvelopeConstants env;

    const auto low = gaussian_envelope_check(equilibrium_state(gs, env.C1), env);
    CHECK(std::abs(low.min_ratio - env.C1) <= 1e-12);
    CHECK(std::abs(low.max_ratio - env.C1) <= 1e-12);
    CHECK(low.pass);

    const auto high = gaussian_envelope_check(equilibrium_state(gs, 2.0 * env.C2), env);
    CHECK(std::abs(high.max_ratio - 2.6) <= 1e-12);
    CHECK_FALSE(high.pass);
}

TEST_CASE("the fixed point iteration contracts on a short window") {
    const Grid gs = slice_grid(32, 129);

    const auto eq = equilibrium_state(gs);
    const auto fixed = picard_solve(eq.g, 0.1, 1e-3, 5, 1e-8);
    CHECK(fixed.converged);
    CHECK(fixed.iterations == 1);
    REQUIRE(fixed.distances.size() == 1);
    CHECK(fixed.distances.front() < 1e-8);

    const auto g0 = perturbed_state(gs);
    const auto res = picard_solve(g0.g, 0.1, 1e-3, 12, 1e-9);
    CHECK(res.converged);
    CHECK_FALSE(res.contraction_failed);
    REQUIRE(res.ratios.size() >= 1);
    for (double r : res.ratios) CHECK(r < 0.5);
    CHECK(res.ratios.front() < 1e-3);
    for (std::size_t i = 0; i + 1 < res.distances.size(); ++i)
        CHECK(res.distances[i + 1] < res.distances[i]);

    // agreement with the direct march at the splitting consistency scale
    ToyConfig cfg;
    cfg.grid = Grid(1, 2, 32, 129, 0.0, 0.1);
    cfg.dt = 1e-3;
    cfg.t_final = 0.1;
    const auto direct = solve_toy(cfg, g0.g);
    const auto pic_final = extract_slice(res.g, res.g.grid.nt - 1);
    const auto dir_final = extract_slice(direct.g, 1);
    const double gap = sup_diff(pic_final, dir_final);
    const double scale = 1.3;
    CHECK(gap <= 10.0 * (1e-3 + gs.dv() * gs.dv()) * scale);
    CHECK(gap <= 1e-9);

    // flow-map stability measured at two perturbation sizes
    const MaxwellianRef mref(1);
    auto amplification = [&](double delta) {
        Field shifted = g0.g;
        for (int j = 0; j < gs.nx; ++j)
            for (int q = 0; q < gs.nv; ++q) {
                Vec vv(1);
                vv[0] = gs.v(q);
                shifted.data[static_cast<std::size_t>(j * gs.nv + q)] +=
                    delta * std::cos(gs.x(j)) * mref.sqrt_mu(vv);
            }
        const double d_init = sup_diff(shifted, g0.g);
        const auto pert = picard_solve(shifted, 0.1, 1e-3, 12, 1e-9);
        const double d_final = sup_diff(extract_slice(pert.g, pert.g.grid.nt - 1), pic_final);
        return d_final / d_init;
    };
    const double k2 = amplification(1e-2);
    const double k3 = amplification(1e-3);
    CHECK(k2 > 0.0);
    CHECK(k2 < 3.0);
    CHECK(k2 / k3 >= 0.7);
    CHECK(k2 / k3 <= 1.43);
    CHECK(std::abs(k2 - 1.0) <= 0.05);
    CHECK(std::abs(k3 - 1.0) <= 0.05);
}

TEST_CASE("the decay probe tracks the maxwellian weight") {
    // equilibrium: the fluctuation vanishes and every ratio is tiny
    const Grid run_a(1, 51, 128, 97, 0.0, 1.0);
    Field eq_run(run_a);
    {
        const auto smu = [&] {
            const MaxwellianRef mref(1);
            std::vector<double> t(static_cast<std::size_t>(run_a.nv));
            Vec vv(1);
            for (int q = 0; q < run_a.nv; ++q) {
                vv[0] = run_a.v(q);
                t[static_cast<std::size_t>(q)] = mref.sqrt_mu(vv);
            }
            return t;
        }();
        for (std::size_t i = 0; i < eq_run.data.size(); ++i)
            eq_run.data[i] = smu[i % static_cast<std::size_t>(run_a.nv)];
    }
    const auto eq_table = holder_decay_probe(eq_run, 0.25, 0.2, 0.2);
    REQUIRE(!eq_table.rows.empty());
    for (const auto& row : eq_table.rows) CHECK(row.norm <= 1e-9);
    CHECK(eq_table.sup_ratio <= 1e-6);

    // perturbed runs at two resolutions give stable ratios
    auto probe_run = [&](const Grid& rg, double dtp) {
        ToyConfig cfg;
        cfg.grid = rg;
        cfg.dt = dtp;
        cfg.t_final = 1.0;
        return solve_toy(cfg, toy_perturbed_initial(rg));
    };
    const auto coarse = probe_run(run_a, 2e-3);
    const auto fine = probe_run(Grid(1, 51, 192, 129, 0.0, 1.0), 1e-3);
    const auto t_coarse = holder_decay_probe(coarse.g, 0.25, 0.2, 0.2);
    const auto t_fine = holder_decay_probe(fine.g, 0.25, 0.2, 0.2);
    CHECK(t_coarse.sup_ratio > 0.0);
    CHECK(t_fine.sup_ratio > 0.0);
    CHECK(std::abs(t_coarse.sup_ratio - t_fine.sup_ratio) <= 0.30 * t_fine.sup_ratio);
    CHECK(t_coarse.sup_ratio >= 0.25);
    CHECK(t_coarse.sup_ratio <= 0.55);
    CHECK(t_fine.sup_ratio >= 0.25);
    CHECK(t_fine.sup_ratio <= 0.55);

    // the ratio relaxes as the weight exponent decreases
    const auto t_d4 = holder_decay_probe(coarse.g, 0.25, 0.4, 0.2);
    const auto t_d1 = holder_decay_probe(coarse.g, 0.25, 0.1, 0.2);
    CHECK(t_d4.sup_ratio >= t_coarse.sup_ratio);
    CHECK(t_coarse.sup_ratio >= t_d1.sup_ratio);

    CHECK_THROWS_AS(holder_decay_probe(coarse.g, 1.2, 0.2, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(holder_decay_probe(coarse.g, 0.25, 0.2, 2.0), std::invalid_argument);
}

TEST_CASE("the toy driver rejects malformed configurations") {
    const Grid gs = slice_grid(16, 65);
    const auto g0 = toy_perturbed_initial(Grid(1, 11, 16, 65, 0.0, 0.1));

    auto base = [&] {
        ToyConfig cfg;
        cfg.grid = Grid(1, 11, 16, 65, 0.0, 0.1);
        cfg.dt = 1e-3;
        cfg.t_final = 0.1;
        return cfg;
    };

    {
        ToyConfig cfg = base();
        cfg.dt = 3e-4;
        CHECK_THROWS_AS(solve_toy(cfg, g0), std::invalid_argument);
    }
    {
        ToyConfig cfg = base();
        cfg.grid = Grid(1, 7, 16, 65, 0.0, 0.1);
        CHECK_THROWS_AS(solve_toy(cfg, g0), std::invalid_argument);
    }
    {
        ToyConfig cfg = base();
        CHECK_THROWS_AS(solve_toy(cfg, toy_perturbed_initial(Grid(1, 2, 32, 65, 0.0, 0.1))),
                        std::invalid_argument);
    }
    {
        ToyConfig cfg = base();
        cfg.track_sobolev = true;
        cfg.sobolev = SobolevOrder{1, 2};
        CHECK_THROWS_AS(solve_toy(cfg, g0), std::invalid_argument);
    }
    {
        ToyConfig cfg = base();
        cfg.envelope.C1 = 0.0;
        CHECK_THROWS_AS(solve_toy(cfg, g0), std::invalid_argument);
    }

    const auto eq = equilibrium_state(gs);
    CHECK_THROWS_AS(picard_solve(eq.g, 0.0, 1e-3, 4, 1e-8), std::invalid_argument);
    CHECK_THROWS_AS(picard_solve(eq.g, 0.1, 1e-3, 0, 1e-8), std::invalid_argument);
    CHECK_THROWS_AS(picard_solve(eq.g, 0.1, 1e-3, 4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(picard_solve(eq.g, 0.1, 3e-4, 4, 1e-8), std::invalid_argument);
}
