// Command line front end for the kinetic toolkit. Each subcommand resolves
// a run config (built-in defaults, then an optional JSON file, then explicit
// flags), validates it against a fixed key schema, runs one library routine,
// and emits a JSON report to stdout and <out_dir>/<subcommand>-report.json.
// Reports embed the full resolved config; identical configs produce byte
// identical reports under --no-timestamp. Exit codes: 0 success, 2 config or
// usage error, 1 numerical failure. Errors print a JSON object on stderr.
#include <CLI11.hpp>
#include <json.hpp>

#include <kinfp/field.hpp>
#include <kinfp/field_io.hpp>
#include <kinfp/geometry.hpp>
#include <kinfp/green.hpp>
#include <kinfp/holder.hpp>
#include <kinfp/probes.hpp>
#include <kinfp/solver.hpp>
#include <kinfp/toy.hpp>
#include <kinfp/util.hpp>

#include <array>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace kinfp;

namespace {

int g_log_rank = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& m) {
    if (g_log_rank >= 1) std::cerr << "[kinfp] " << m << "\n";
}

void log_debug(const std::string& m) {
    if (g_log_rank >= 2) std::cerr << "[kinfp] " << m << "\n";
}

std::string iso_utc_now() {
    const std::time_t tt = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json vec_json(const Vec& v, int d) {
    json a = json::array();
    for (int i = 0; i < d; ++i) a.push_back(v[i]);
    return a;
}

json point_json(const KineticPoint& z) {
    json j;
    j["t"] = z.t;
    j["x"] = vec_json(z.x, z.dim());
    j["v"] = vec_json(z.v, z.dim());
    return j;
}

json cylinder_json(const Cylinder& q) {
    json j = point_json(q.center);
    j["radius"] = q.radius;
    return j;
}

Scheme parse_scheme(const std::string& s) {
    if (s == "be") return Scheme::splitting_be;
    if (s == "cn") return Scheme::splitting_cn;
    throw std::invalid_argument("scheme must be \"be\" or \"cn\", got \"" + s + "\"");
}

Splitting parse_splitting(const std::string& s) {
    if (s == "strang") return Splitting::strang;
    if (s == "lie") return Splitting::lie;
    throw std::invalid_argument("splitting must be \"strang\" or \"lie\", got \"" + s + "\"");
}

// User config files may only set keys that exist in the defaults, with
// matching types; integers promote to doubles where the default is a double.
void merge_config(json& base, const json& user, const std::string& prefix) {
    for (const auto& item : user.items()) {
        const std::string where = prefix.empty() ? item.key() : prefix + "." + item.key();
        if (!base.contains(item.key()))
            throw std::invalid_argument("unknown config key: " + where);
        json& slot = base[item.key()];
        const json& v = item.value();
        if (slot.is_object()) {
            if (!v.is_object())
                throw std::invalid_argument("config key " + where + " must be an object");
            merge_config(slot, v, where);
        } else if (slot.is_array()) {
            if (!v.is_array())
                throw std::invalid_argument("config key " + where + " must be an array");
            slot = v;
        } else if (slot.is_string()) {
            if (!v.is_string())
                throw std::invalid_argument("config key " + where + " must be a string");
            slot = v;
        } else if (slot.is_boolean()) {
            if (!v.is_boolean())
                throw std::invalid_argument("config key " + where + " must be a boolean");
            slot = v;
        } else if (slot.is_number_integer()) {
            if (!v.is_number_integer())
                throw std::invalid_argument("config key " + where + " must be an integer");
            slot = v;
        } else {
            if (!v.is_number())
                throw std::invalid_argument("config key " + where + " must be a number");
            slot = json(v.get<double>());
        }
    }
}

json load_user_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config not found: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config parse error in " + path + ": " + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object: " + path);
    return j;
}

void validate_common(const json& cfg) {
    const int dim = cfg.at("dim").get<int>();
    if (dim != 1 && dim != 2) throw std::invalid_argument("dim must be 1 or 2");
    if (cfg.at("seed").get<long long>() < 0)
        throw std::invalid_argument("seed must be nonnegative");
    const std::string lvl = cfg.at("log_level").get<std::string>();
    if (lvl != "quiet" && lvl != "info" && lvl != "debug")
        throw std::invalid_argument("log_level must be \"quiet\", \"info\", or \"debug\"");
    if (cfg.at("out_dir").get<std::string>().empty())
        throw std::invalid_argument("out_dir must be nonempty");
    if (cfg.at("threads").get<int>() < 0) throw std::invalid_argument("threads must be nonnegative");
}

json common_defaults() {
    json d;
    d["dim"] = 1;
    d["seed"] = 0;
    d["out_dir"] = "out";
    d["log_level"] = "info";
    d["threads"] = 0;
    return d;
}

fs::path ensure_out_dir(const json& cfg) {
    const fs::path dir = cfg.at("out_dir").get<std::string>();
    fs::create_directories(dir);
    return dir;
}

void emit_report(const std::string& sub, const json& cfg, const json& results, bool stamp) {
    json rep;
    rep["tool"] = "kinfp";
    rep["subcommand"] = sub;
    if (stamp) rep["timestamp"] = iso_utc_now();
    rep["config"] = cfg;
    rep["results"] = results;
    rep["status"] = "ok";
    const std::string text = rep.dump(2) + "\n";
    std::cout << text;
    const fs::path path = ensure_out_dir(cfg) / (sub + "-report.json");
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("failed to write report: " + path.string());
    log_info("report written to " + path.string());
}

int emit_error(const std::string& sub, const std::string& type, const std::string& msg, int code) {
    json err;
    err["error"] = json{{"type", type}, {"subcommand", sub}, {"message", msg}};
    std::cerr << err.dump(2) << "\n";
    return code;
}

// Deterministic smooth sample on the compact scan domain (L = 2, V = 1):
// seeded trig modes in (t, x) carried by a Gaussian envelope with a linear
// tilt in v. Wavenumbers are multiples of pi so x stays periodic.
Field seeded_field(int dim, unsigned seed, int nt, int nx, int nv, double t_extent) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    struct Mode {
        double a, ph, bt, cv;
    };
    std::array<Mode, 3> modes;
    for (auto& m : modes) m = {0.6 * u(rng), std::numbers::pi * u(rng), 0.5 * u(rng), 0.8 * u(rng)};
    const double cross = dim == 2 ? 0.4 : 0.0;
    const Grid g(dim, nt, nx, nv, -t_extent, 0.0, 2.0, 1.0);
    return sample(
        [modes, cross](const KineticPoint& z) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) {
                const Mode& m = modes[static_cast<std::size_t>(k)];
                double wave = std::sin((k + 1) * std::numbers::pi * z.x[0] + m.ph);
                if (cross != 0.0) wave += cross * std::cos((k + 1) * std::numbers::pi * z.x[1] - m.ph);
                s += m.a * (1.0 + m.bt * z.t) * wave * (1.0 + m.cv * z.v[0]);
            }
            return s * std::exp(-0.25 * z.v.norm2());
        },
        g);
}

// nt/nx/nv of 0 pick a per-dimension default that admits scan radii.
void scan_grid_dims(int dim, int& nt, int& nx, int& nv, double& t_extent, int nt1, int nx1,
                    int nv1) {
    if (dim == 1) {
        if (nt == 0) nt = nt1;
        if (nx == 0) nx = nx1;
        if (nv == 0) nv = nv1;
        t_extent = 1.0;
    } else {
        if (nt == 0) nt = 5;
        if (nx == 0) nx = 16;
        if (nv == 0) nv = 17;
        t_extent = 0.25;
    }
    const double nodes = static_cast<double>(nt) * nx * nv *
                         (dim == 2 ? static_cast<double>(nx) * nv : 1.0);
    if (nodes > 8e6) throw std::invalid_argument("grid too large; reduce nt, nx, or nv");
}

void write_solver_trace_csv(const std::vector<TraceSample>& samples, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    os << "time,mass,l2_norm,min_ratio,max_ratio\n";
    for (const auto& s : samples)
        os << format_double(s.time) << ',' << format_double(s.mass) << ','
           << format_double(s.l2_norm) << ',' << format_double(s.min_ratio) << ','
           << format_double(s.max_ratio) << "\n";
    if (!os) throw std::runtime_error("failed to write " + path.string());
}

void write_toy_trace_csv(const std::vector<ToyTraceSample>& samples, const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    os << "time,mass,l2_norm,min_ratio,max_ratio,distance\n";
    for (const auto& s : samples)
        os << format_double(s.time) << ',' << format_double(s.mass) << ','
           << format_double(s.l2_norm) << ',' << format_double(s.min_ratio) << ','
           << format_double(s.max_ratio) << ',' << format_double(s.distance) << "\n";
    if (!os) throw std::runtime_error("failed to write " + path.string());
}

// ---------------------------------------------------------------- green-check

json green_check_defaults() {
    json d = common_defaults();
    d["times"] = json::array({0.1, 0.5, 1.0, 2.0});
    d["mass_gl_box"] = 40;
    d["mass_sigma_mult"] = 8.5;
    d["ck_t"] = 0.8;
    d["ck_s"] = 0.5;
    d["ck_points"] = 5;
    d["radii"] = json::array();  // empty = per-dimension default ladder
    return d;
}

json run_green_check(const json& cfg) {
    const int dim = cfg.at("dim").get<int>();
    const unsigned seed = cfg.at("seed").get<unsigned>();

    json results;
    json mass_rows = json::array();
    json mass_errors = json::array();
    double worst = 0.0;
    ConvParams mp;
    mp.gl_box = cfg.at("mass_gl_box").get<int>();
    mp.sigma_mult = cfg.at("mass_sigma_mult").get<double>();
    for (double t : cfg.at("times").get<std::vector<double>>()) {
        const double m = green_mass(dim, t, mp);
        const double err = std::fabs(m - 1.0);
        worst = std::max(worst, err);
        mass_rows.push_back(json{{"t", t}, {"value", m}, {"error", err}});
        mass_errors.push_back(err);
    }
    results["mass"] = mass_rows;
    results["mass_errors"] = mass_errors;
    results["max_mass_error"] = worst;
    log_info("mass checked at " + std::to_string(mass_rows.size()) + " times, max error " +
             format_double(worst));

    const double ck_t = cfg.at("ck_t").get<double>();
    const double ck_s = cfg.at("ck_s").get<double>();
    const int npts = cfg.at("ck_points").get<int>();
    if (npts < 1) throw std::invalid_argument("ck_points must be positive");
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ux(-0.8, 0.8), uv(-1.1, 1.1);
    std::vector<KineticPoint> pts;
    for (int i = 0; i < npts; ++i) {
        Vec x(dim), v(dim);
        for (int a = 0; a < dim; ++a) {
            x[a] = ux(rng);
            v[a] = uv(rng);
        }
        pts.emplace_back(0.0, x, v);
    }
    ConvParams ckp;
    if (dim == 1) ckp.gl_box = 32;
    const double dev = chapman_kolmogorov_check(ck_t, ck_s, pts, ckp);
    results["chapman_kolmogorov"] =
        json{{"t", ck_t}, {"s", ck_s}, {"points", npts}, {"deviation", dev}};
    log_info("chapman-kolmogorov deviation " + format_double(dev));

    std::vector<double> radii = cfg.at("radii").get<std::vector<double>>();
    if (radii.empty())
        radii = dim == 1 ? std::vector<double>{0.25, 0.35, 0.5, 0.7, 1.0}
                         : std::vector<double>{0.4, 0.6, 0.9};
    ConvParams ip;
    if (dim == 2) {
        ip.lattice_per_axis = 3;
        ip.gl_box = 10;
        ip.tau_levels = 16;
        ip.gl_tau = 4;
    }
    const IndicatorReport rep = verify_indicator_bound(dim, radii, KineticPoint::origin(dim), ip);
    results["indicator"] = json{{"radii", rep.radii},
                                {"sup_vals", rep.sup_vals},
                                {"sup_over_r2", rep.sup_over_r2},
                                {"slope", rep.slope},
                                {"const_spread", rep.const_spread}};
    log_info("indicator slope " + format_double(rep.slope));
    return results;
}

// --------------------------------------------------------------------- holder

json holder_defaults() {
    json d = common_defaults();
    d["beta"] = 2.5;
    d["nt"] = 0;  // 0 = per-dimension default
    d["nx"] = 0;
    d["nv"] = 0;
    return d;
}

json run_holder(const json& cfg) {
    const int dim = cfg.at("dim").get<int>();
    const unsigned seed = cfg.at("seed").get<unsigned>();
    const double beta = cfg.at("beta").get<double>();
    int nt = cfg.at("nt").get<int>(), nx = cfg.at("nx").get<int>(), nv = cfg.at("nv").get<int>();
    double t_extent = 0.0;
    scan_grid_dims(dim, nt, nx, nv, t_extent, 65, 128, 129);
    const HolderOrder order(beta);
    const Field f = seeded_field(dim, seed, nt, nx, nv, t_extent);

    json results;
    results["beta"] = beta;
    results["grid"] = json{{"nt", nt}, {"nx", nx}, {"nv", nv}};
    if (beta < 1.0) {
        const HolderEstimate est = estimate_seminorm(f, order, FitKind::best_polynomial);
        const TwoPointResult tp = two_point_quotient(f, order);
        results["seminorm"] = est.seminorm;
        results["two_point_sup"] = tp.sup;
        results["agreement_ratio"] = tp.sup > 0.0 ? est.seminorm / tp.sup : 0.0;
        results["cylinders_scanned"] = est.cylinders_scanned;
        results["witness"] = cylinder_json(est.witness);
        log_info("seminorm " + format_double(est.seminorm) + ", two-point sup " +
                 format_double(tp.sup));
    } else {
        const EquivalenceReport eq = check_norm_equivalence(f, beta - 2.0);
        results["seminorm_best"] = eq.best.seminorm;
        results["seminorm_taylor"] = eq.taylor.seminorm;
        results["equivalence"] = json{{"ratio", eq.ratio},
                                      {"ratio_lo", eq.ratio_lo},
                                      {"ratio_hi", eq.ratio_hi},
                                      {"cylinders_compared", eq.cylinders_compared},
                                      {"both_zero", eq.both_zero},
                                      {"within_tolerance", eq.within_tolerance}};
        results["cylinders_scanned"] = eq.best.cylinders_scanned;
        results["witness"] = cylinder_json(eq.best.witness);
        log_info("best " + format_double(eq.best.seminorm) + ", taylor " +
                 format_double(eq.taylor.seminorm) + ", ratio " + format_double(eq.ratio));
    }
    return results;
}

// --------------------------------------------------------------- solve-linear

json solve_linear_defaults() {
    json d = common_defaults();
    d["preset"] = "fokker_planck";  // heat | fokker_planck | mms
    d["initial"] = "perturbed";     // maxwellian | perturbed | gaussian
    d["scheme"] = "cn";
    d["splitting"] = "strang";
    d["dt"] = 0.01;
    d["t_final"] = 0.5;
    d["nt"] = 6;
    d["nx"] = 16;
    d["nv"] = 65;
    d["amp"] = 0.3;
    d["refinements"] = 2;  // mms preset only
    return d;
}

double mms_error(int dim, double dtp, int nv, Scheme sc, Splitting sp) {
    if (dim == 1) {
        const double T = 0.5;
        auto gstar = [](double t, double x, double v) {
            return std::exp(-0.5 * t) * (1.0 + 0.5 * std::sin(x)) * std::exp(-0.25 * v * v);
        };
        SolverProblem p;
        p.grid = Grid(1, 2, 16, nv, 0.0, T);
        p.dt = dtp;
        p.t_final = T;
        p.scheme = sc;
        p.splitting = sp;
        p.initial = sample([&](const KineticPoint& z) { return gstar(0.0, z.x[0], z.v[0]); },
                           Grid(1, 1, 16, nv, 0.0, 0.0));
        CoefficientField cf;
        cf.lambda = [](double, const Vec&, const Vec&) { return 1.0; };
        cf.b0 = [](double, const Vec&, const Vec& v) { return v[0]; };
        cf.c = [](double, const Vec&, const Vec&) { return -0.5; };
        cf.S = [](double t, const Vec& x, const Vec& v) {
            const double X = 1.0 + 0.5 * std::sin(x[0]);
            const double hv = std::exp(-0.25 * v[0] * v[0]);
            return std::exp(-0.5 * t) * hv *
                   ((0.25 * v[0] * v[0] + 0.5) * X + 0.5 * v[0] * std::cos(x[0]));
        };
        p.coefficients = cf;
        const SolveResult res = solve(p);
        const Grid& g = res.field.grid;
        double err = 0.0;
        for (int j = 0; j < g.nx; ++j)
            for (int k = 0; k < g.nv; ++k)
                err = std::max(err, std::fabs(res.field.at1(1, j, k) - gstar(T, g.x(j), g.v(k))));
        return err;
    }
    const double T = 0.4;
    auto gstar = [](double t, const Vec& x, const Vec& v) {
        return std::exp(-0.5 * t) * (1.0 + 0.5 * std::sin(x[0])) * (1.0 + 0.25 * std::cos(x[1])) *
               std::exp(-0.25 * (v[0] * v[0] + v[1] * v[1]));
    };
    SolverProblem p;
    p.grid = Grid(2, 2, 8, nv, 0.0, T);
    p.dt = dtp;
    p.t_final = T;
    p.scheme = Scheme::splitting_cn;
    p.initial =
        sample([&](const KineticPoint& z) { return gstar(0.0, z.x, z.v); }, Grid(2, 1, 8, nv, 0.0, 0.0));
    CoefficientField cf;
    cf.lambda = [](double, const Vec&, const Vec&) { return 1.0; };
    cf.S = [&](double t, const Vec& x, const Vec& v) {
        const double X0 = 1.0 + 0.5 * std::sin(x[0]);
        const double X1 = 1.0 + 0.25 * std::cos(x[1]);
        const double hv = std::exp(-0.25 * (v[0] * v[0] + v[1] * v[1]));
        const double vsq = v[0] * v[0] + v[1] * v[1];
        return std::exp(-0.5 * t) * hv *
               ((0.5 - 0.25 * vsq) * X0 * X1 + 0.5 * v[0] * std::cos(x[0]) * X1 -
                0.25 * v[1] * std::sin(x[1]) * X0);
    };
    p.coefficients = cf;
    const SolveResult res = solve(p);
    const Grid& g = res.field.grid;
    double err = 0.0;
    int ix[2], iv[2];
    for (ix[0] = 0; ix[0] < g.nx; ++ix[0])
        for (ix[1] = 0; ix[1] < g.nx; ++ix[1])
            for (iv[0] = 0; iv[0] < g.nv; ++iv[0])
                for (iv[1] = 0; iv[1] < g.nv; ++iv[1]) {
                    Vec x(2), v(2);
                    x[0] = g.x(ix[0]);
                    x[1] = g.x(ix[1]);
                    v[0] = g.v(iv[0]);
                    v[1] = g.v(iv[1]);
                    err = std::max(err, std::fabs(res.field.at(1, ix, iv) - gstar(T, x, v)));
                }
    return err;
}

json run_solve_linear(const json& cfg) {
    const int dim = cfg.at("dim").get<int>();
    const std::string preset = cfg.at("preset").get<std::string>();
    const Scheme scheme = parse_scheme(cfg.at("scheme").get<std::string>());
    const Splitting splitting = parse_splitting(cfg.at("splitting").get<std::string>());
    const double dt = cfg.at("dt").get<double>();
    const int nv = cfg.at("nv").get<int>();

    json results;
    results["preset"] = preset;

    if (preset == "mms") {
        const int refinements = cfg.at("refinements").get<int>();
        if (refinements < 1 || refinements > 4)
            throw std::invalid_argument("refinements must lie in 1..4");
        std::vector<double> dts, errors;
        for (int i = 0; i <= refinements; ++i) {
            const double dti = dt / (1 << i);
            const int nvi = (nv - 1) * (1 << i) + 1;
            const double err = mms_error(dim, dti, nvi, scheme, splitting);
            dts.push_back(dti);
            errors.push_back(err);
            log_info("dt " + format_double(dti) + " error " + format_double(err));
        }
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        const double n = static_cast<double>(dts.size());
        for (std::size_t i = 0; i < dts.size(); ++i) {
            const double lx = std::log(dts[i]), ly = std::log(errors[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        results["dts"] = dts;
        results["errors"] = errors;
        results["order"] = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        return results;
    }

    SolverProblem p;
    p.grid = Grid(dim, cfg.at("nt").get<int>(), cfg.at("nx").get<int>(), nv, 0.0,
                  cfg.at("t_final").get<double>());
    p.dt = dt;
    p.t_final = cfg.at("t_final").get<double>();
    p.scheme = scheme;
    p.splitting = splitting;
    if (preset == "heat")
        p.coefficients = CoefficientField::heat();
    else if (preset == "fokker_planck")
        p.coefficients = CoefficientField::fokker_planck(dim);
    else
        throw std::invalid_argument("preset must be \"heat\", \"fokker_planck\", or \"mms\"");

    const std::string init = cfg.at("initial").get<std::string>();
    const double amp = cfg.at("amp").get<double>();
    const Grid gs(dim, 1, p.grid.nx, p.grid.nv, 0.0, 0.0, p.grid.L, p.grid.V);
    const MaxwellianRef mref(dim);
    if (init == "maxwellian")
        p.initial = sample([&](const KineticPoint& z) { return mref.mu(z.v); }, gs);
    else if (init == "perturbed")
        p.initial = sample(
            [&](const KineticPoint& z) { return (1.0 + amp * std::sin(z.x[0])) * mref.mu(z.v); },
            gs);
    else if (init == "gaussian")
        p.initial = sample([](const KineticPoint& z) { return std::exp(-0.25 * z.v.norm2()); }, gs);
    else
        throw std::invalid_argument("initial must be \"maxwellian\", \"perturbed\", or \"gaussian\"");

    const SolveResult res = solve(p);
    const auto& tr = res.trace.samples;
    if (tr.empty()) throw std::runtime_error("solver produced an empty trace");
    double mass_drift = 0.0, min_ratio = tr.front().min_ratio, max_ratio = tr.front().max_ratio;
    for (const auto& s : tr) {
        mass_drift = std::max(mass_drift, std::fabs(s.mass - tr.front().mass));
        min_ratio = std::min(min_ratio, s.min_ratio);
        max_ratio = std::max(max_ratio, s.max_ratio);
    }
    results["steps"] = tr.size() - 1;
    results["mass_initial"] = tr.front().mass;
    results["mass_final"] = tr.back().mass;
    results["mass_drift"] = mass_drift;
    results["l2_initial"] = tr.front().l2_norm;
    results["l2_final"] = tr.back().l2_norm;
    results["min_ratio"] = min_ratio;
    results["max_ratio"] = max_ratio;

    const fs::path dir = ensure_out_dir(cfg);
    write_solver_trace_csv(tr, dir / "solve-linear-trace.csv");
    write_field(res.field, (dir / "solve-linear-run.kfp1").string());
    results["artifacts"] = json{{"trace_csv", (dir / "solve-linear-trace.csv").string()},
                                {"field", (dir / "solve-linear-run.kfp1").string()}};
    log_info("ran " + std::to_string(tr.size() - 1) + " steps, mass drift " +
             format_double(mass_drift));
    return results;
}

// ------------------------------------------------------------------ solve-toy

json solve_toy_defaults() {
    json d = common_defaults();
    d["dt"] = 1e-3;
    d["t_final"] = 1.0;
    d["nt"] = 11;
    d["nx"] = 64;
    d["nv"] = 128;
    d["amp"] = 0.3;
    d["scheme"] = "cn";
    d["splitting"] = "strang";
    d["envelope"] = json{{"C1", 0.7}, {"C2", 1.3}};
    d["track_sobolev"] = false;
    d["sobolev"] = json{{"k", 2}, {"kbar", 2}};
    return d;
}

json run_solve_toy(const json& cfg) {
    const int dim = cfg.at("dim").get<int>();
    ToyConfig tc;
    tc.grid = Grid(dim, cfg.at("nt").get<int>(), cfg.at("nx").get<int>(), cfg.at("nv").get<int>(),
                   0.0, cfg.at("t_final").get<double>());
    tc.dt = cfg.at("dt").get<double>();
    tc.t_final = cfg.at("t_final").get<double>();
    tc.scheme = parse_scheme(cfg.at("scheme").get<std::string>());
    tc.splitting = parse_splitting(cfg.at("splitting").get<std::string>());
    tc.envelope.C1 = cfg.at("envelope").at("C1").get<double>();
    tc.envelope.C2 = cfg.at("envelope").at("C2").get<double>();
    tc.track_sobolev = cfg.at("track_sobolev").get<bool>();
    tc.sobolev.k = cfg.at("sobolev").at("k").get<int>();
    tc.sobolev.kbar = cfg.at("sobolev").at("kbar").get<int>();

    const Field g0 = toy_perturbed_initial(tc.grid, cfg.at("amp").get<double>());
    const ToyRunResult res = solve_toy(tc, g0);
    const RelaxationReport rr = relaxation_report(res.trace);

    const auto& tr = res.trace;
    double mass_drift = 0.0, min_ratio = tr.front().min_ratio, max_ratio = tr.front().max_ratio;
    for (const auto& s : tr) {
        mass_drift = std::max(mass_drift, std::fabs(s.mass - tr.front().mass));
        min_ratio = std::min(min_ratio, s.min_ratio);
        max_ratio = std::max(max_ratio, s.max_ratio);
    }

    json results;
    results["steps"] = tr.size() - 1;
    results["rho_bar"] = res.rho_bar;
    results["mass_initial"] = tr.front().mass;
    results["mass_drift"] = mass_drift;
    results["distance_initial"] = tr.front().distance;
    results["distance_final"] = rr.final_distance;
    results["t_half"] = rr.t_half;
    results["monotonicity_violations"] = rr.monotonicity_violations;
    results["min_ratio"] = min_ratio;
    results["max_ratio"] = max_ratio;
    if (tc.track_sobolev && !res.sobolev_norms.empty())
        results["sobolev"] =
            json{{"initial", res.sobolev_norms.front()}, {"final", res.sobolev_norms.back()}};

    const fs::path dir = ensure_out_dir(cfg);
    write_toy_trace_csv(tr, dir / "solve-toy-trace.csv");
    write_field(res.g, (dir / "solve-toy-run.kfp1").string());
    results["artifacts"] = json{{"trace_csv", (dir / "solve-toy-trace.csv").string()},
                                {"field", (dir / "solve-toy-run.kfp1").string()}};
    log_info("final distance " + format_double(rr.final_distance) + " after " +
             std::to_string(tr.size() - 1) + " steps");
    return results;
}

// --------------------------------------------------------------------- picard

json picard_defaults() {
    json d = common_defaults();
    d["T"] = 0.5;
    d["dt"] = 0.01;
    d["n_max"] = 12;
    d["tol"] = 1e-10;
    d["nx"] = 32;
    d["nv"] = 64;
    d["amp"] = 0.3;
    d["scheme"] = "cn";
    return d;
}

json run_picard(const json& cfg) {
    const int dim = cfg.at("dim").get<int>();
    const double T = cfg.at("T").get<double>();
    const Grid run(dim, 2, cfg.at("nx").get<int>(), cfg.at("nv").get<int>(), 0.0, T);
    const Field g0 = toy_perturbed_initial(run, cfg.at("amp").get<double>());
    const PicardResult pr =
        picard_solve(g0, T, cfg.at("dt").get<double>(), cfg.at("n_max").get<int>(),
                     cfg.at("tol").get<double>(), parse_scheme(cfg.at("scheme").get<std::string>()));

    json results;
    results["iterations"] = pr.iterations;
    results["converged"] = pr.converged;
    results["contraction_failed"] = pr.contraction_failed;
    results["distances"] = pr.distances;
    results["ratios"] = pr.ratios;
    double max_ratio = 0.0;
    for (double r : pr.ratios) max_ratio = std::max(max_ratio, r);
    results["max_ratio"] = max_ratio;
    results["final_distance"] = pr.distances.empty() ? 0.0 : pr.distances.back();
    log_info(std::to_string(pr.iterations) + " sweeps, max contraction ratio " +
             format_double(max_ratio));
    return results;
}

// ------------------------------------------------------------- schauder-probe

json schauder_probe_defaults() {
    json d = common_defaults();
    d["alpha"] = 0.5;
    d["cases"] = 3;
    d["levels"] = 1;
    return d;
}

json run_schauder_probe(const json& cfg) {
    const int seed = cfg.at("seed").get<int>();
    const double alpha = cfg.at("alpha").get<double>();
    const int cases = cfg.at("cases").get<int>();
    const int levels = cfg.at("levels").get<int>();
    if (cases < 1) throw std::invalid_argument("cases must be positive");
    if (levels < 1 || levels > 3) throw std::invalid_argument("levels must lie in 1..3");
    if (cfg.at("dim").get<int>() != 1)
        throw std::invalid_argument("schauder-probe supports dim 1 only");

    json rows = json::array();
    double max_ratio = 0.0, spread_max = 0.0;
    for (int s = seed; s < seed + cases; ++s) {
        const ManufacturedCase mc = make_manufactured_case(s);
        double lo = 0.0, hi = 0.0;
        for (int lvl = 0; lvl < levels; ++lvl) {
            const ProbeReport rep = schauder_probe(mc, alpha, lvl);
            rows.push_back(json{{"case", rep.case_id},
                                {"level", rep.level},
                                {"lhs", rep.lhs},
                                {"rhs", rep.rhs},
                                {"ratio", rep.ratio}});
            max_ratio = std::max(max_ratio, rep.ratio);
            lo = lvl == 0 ? rep.ratio : std::min(lo, rep.ratio);
            hi = lvl == 0 ? rep.ratio : std::max(hi, rep.ratio);
            log_info("case " + std::to_string(s) + " level " + std::to_string(lvl) + " ratio " +
                     format_double(rep.ratio));
        }
        if (levels > 1 && lo > 0.0) spread_max = std::max(spread_max, hi / lo);
    }
    json results;
    results["alpha"] = alpha;
    results["rows"] = rows;
    results["max_ratio"] = max_ratio;
    if (levels > 1) results["spread_max"] = spread_max;
    return results;
}

// ------------------------------------------------------------- gradient-probe

json gradient_probe_defaults() {
    json d = common_defaults();
    d["count"] = 16;
    d["refine"] = 0;
    return d;
}

json run_gradient_probe(const json& cfg) {
    const int seed = cfg.at("seed").get<int>();
    const int count = cfg.at("count").get<int>();
    const int refine = cfg.at("refine").get<int>();
    if (cfg.at("dim").get<int>() != 1)
        throw std::invalid_argument("gradient-probe supports dim 1 only");
    const GradientBatch batch = gradient_batch(seed, count, gradient_quadrature(refine));

    json rows = json::array();
    for (const auto& rep : batch.reports)
        rows.push_back(json{{"case", rep.case_id},
                            {"lhs", rep.lhs},
                            {"rhs", rep.rhs},
                            {"ratio", rep.ratio}});
    json results;
    results["count"] = count;
    results["refine"] = refine;
    results["skipped"] = batch.skipped;
    results["max_ratio"] = batch.max_ratio;
    results["rows"] = rows;
    log_info(std::to_string(batch.reports.size()) + " cases, max ratio " +
             format_double(batch.max_ratio));
    return results;
}

// ---------------------------------------------------------------- decay-probe

json decay_probe_defaults() {
    json d = common_defaults();
    d["radii"] = json::array({1.0, 0.5, 0.25});
    d["orders"] =
        json::array({json::array({0, 0, 1}), json::array({0, 0, 2}), json::array({1, 0, 0}),
                     json::array({0, 1, 0})});
    return d;
}

json run_decay_probe(const json& cfg) {
    if (cfg.at("dim").get<int>() != 1)
        throw std::invalid_argument("decay-probe supports dim 1 only");
    std::vector<DecayOrder> orders;
    for (const auto& o : cfg.at("orders")) {
        if (!o.is_array() || o.size() != 3 || !o[0].is_number_integer() ||
            !o[1].is_number_integer() || !o[2].is_number_integer())
            throw std::invalid_argument("orders entries must be integer triples [n,a,b]");
        orders.push_back({o[0].get<int>(), o[1].get<int>(), o[2].get<int>()});
    }
    const std::vector<double> radii = cfg.at("radii").get<std::vector<double>>();
    const DecaySlopeTable table = derivative_decay_probe(orders, radii);

    json rows = json::array();
    double max_weight_error = 0.0;
    for (const auto& row : table.rows) {
        rows.push_back(json{{"order", json::array({row.order.n, row.order.a, row.order.b})},
                            {"weight", row.weight},
                            {"slope", row.slope},
                            {"sup", row.sup},
                            {"deriv", row.deriv}});
        max_weight_error = std::max(max_weight_error, std::fabs(row.slope - row.weight));
        log_info("order (" + std::to_string(row.order.n) + "," + std::to_string(row.order.a) +
                 "," + std::to_string(row.order.b) + ") slope " + format_double(row.slope));
    }
    json results;
    results["radii"] = table.r_list;
    results["rows"] = rows;
    results["max_weight_error"] = max_weight_error;
    return results;
}

// --------------------------------------------------------------- interp-check

json interp_check_defaults() {
    json d = common_defaults();
    d["alpha"] = 0.5;
    d["epsilons"] = json::array({0.5, 0.35, 0.25, 0.18, 0.12, 0.08, 0.05});
    d["nt"] = 9;
    d["nx"] = 24;
    d["nv"] = 25;
    return d;
}

json run_interp_check(const json& cfg) {
    const int dim = cfg.at("dim").get<int>();
    const unsigned seed = cfg.at("seed").get<unsigned>();
    const Field f = seeded_field(dim, seed, cfg.at("nt").get<int>(), cfg.at("nx").get<int>(),
                                 cfg.at("nv").get<int>());
    const InterpolationReport rep =
        check_interpolation(f, cfg.at("alpha").get<double>(), cfg.at("epsilons").get<std::vector<double>>());

    json peaks = json::array();
    std::string current;
    double peak_c = 0.0, peak_eps = 0.0;
    auto flush = [&]() {
        if (!current.empty())
            peaks.push_back(json{{"quantity", current}, {"epsilon_at_peak", peak_eps}, {"C_max", peak_c}});
    };
    for (const auto& row : rep.rows) {
        if (row.quantity != current) {
            flush();
            current = row.quantity;
            peak_c = row.C;
            peak_eps = row.epsilon;
        } else if (row.C > peak_c) {
            peak_c = row.C;
            peak_eps = row.epsilon;
        }
    }
    flush();

    json results;
    results["alpha"] = rep.alpha;
    results["seminorm_2alpha"] = rep.seminorm_2alpha;
    results["sup_norm"] = rep.sup_norm;
    results["lhs"] = std::vector<double>(rep.lhs.begin(), rep.lhs.end());
    results["peaks"] = peaks;
    results["monotone_ok"] = rep.monotone_ok;

    const fs::path dir = ensure_out_dir(cfg);
    const fs::path csv = dir / "interp-check.csv";
    {
        std::ofstream os(csv, std::ios::binary);
        write_interpolation_csv(rep, os);
        if (!os) throw std::runtime_error("failed to write " + csv.string());
    }
    results["artifacts"] = json{{"csv", csv.string()}};
    log_info("monotone envelope " + std::string(rep.monotone_ok ? "ok" : "violated"));
    return results;
}

// ----------------------------------------------------------------------- main

struct SubSpec {
    CLI::App* app = nullptr;
    std::string name;
    json defaults;
    std::function<json(const json&)> run;
    std::string config_path;
    bool no_timestamp = false;
    std::vector<std::function<void(json&)>> flag_appliers;
};

template <class T>
void add_override(SubSpec& s, const std::string& flag, const std::string& key,
                  const std::string& desc) {
    auto store = std::make_shared<T>();
    CLI::Option* opt = s.app->add_option(flag, *store, desc);
    s.flag_appliers.push_back([opt, store, key](json& cfg) {
        if (opt->count() > 0) cfg[key] = *store;
    });
}

void add_common_flags(SubSpec& s) {
    s.app->add_option("--config", s.config_path, "JSON config file merged over the defaults");
    s.app->add_flag("--no-timestamp", s.no_timestamp, "omit the timestamp from the report");
    add_override<int>(s, "--dim", "dim", "spatial dimension (1 or 2)");
    add_override<int>(s, "--seed", "seed", "seed for all randomized choices");
    add_override<std::string>(s, "--out-dir", "out_dir", "directory for reports and artifacts");
    add_override<std::string>(s, "--log-level", "log_level", "quiet, info, or debug");
    add_override<int>(s, "--threads", "threads", "cap worker threads (0 = hardware)");
}

int dispatch(SubSpec& s) {
    try {
        json cfg = s.defaults;
        merge_config(cfg, load_user_config(s.config_path), "");
        if (const char* env = std::getenv("KINFP_OUT"); env != nullptr && *env != '\0')
            cfg["out_dir"] = std::string(env);
        for (const auto& apply : s.flag_appliers) apply(cfg);
        validate_common(cfg);
        const std::string lvl = cfg.at("log_level").get<std::string>();
        g_log_rank = lvl == "quiet" ? 0 : lvl == "info" ? 1 : 2;
        set_thread_cap(cfg.at("threads").get<int>());
        log_debug("resolved config: " + cfg.dump());
        const json results = s.run(cfg);
        emit_report(s.name, cfg, results, !s.no_timestamp);
        return 0;
    } catch (const std::invalid_argument& e) {
        return emit_error(s.name, "validation", e.what(), 2);
    } catch (const json::exception& e) {
        return emit_error(s.name, "validation", e.what(), 2);
    } catch (const std::exception& e) {
        return emit_error(s.name, "numerical", e.what(), 1);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical experiments for kinetic Fokker-Planck regularity"};
    app.set_version_flag("--version", "kinfp 1.0.0");
    app.require_subcommand(1);

    std::deque<SubSpec> subs;
    auto make = [&](const std::string& name, const std::string& desc, json defaults,
                    std::function<json(const json&)> run) -> SubSpec& {
        SubSpec& s = subs.emplace_back();
        s.app = app.add_subcommand(name, desc);
        s.name = name;
        s.defaults = std::move(defaults);
        s.run = std::move(run);
        add_common_flags(s);
        return s;
    };

    make("green-check",
         "verify kernel mass, the two-time composition identity, and the indicator growth rate",
         green_check_defaults(), run_green_check);
    {
        SubSpec& s = make("holder", "estimate kinetic Holder seminorms of a seeded smooth field",
                          holder_defaults(), run_holder);
        add_override<double>(s, "--beta", "beta", "Holder exponent, in (0,1) or (2,3)");
    }
    {
        SubSpec& s = make("solve-linear",
                          "run the linear solver on a named coefficient preset, or a manufactured "
                          "convergence study with preset mms",
                          solve_linear_defaults(), run_solve_linear);
        add_override<std::string>(s, "--preset", "preset", "heat, fokker_planck, or mms");
    }
    make("solve-toy", "run the nonlinear relaxation model and record its trace",
         solve_toy_defaults(), run_solve_toy);
    make("picard", "iterate the frozen-coefficient fixed point map and report contraction",
         picard_defaults(), run_picard);
    {
        SubSpec& s = make("schauder-probe",
                          "measure the interior estimate ratio on manufactured cases",
                          schauder_probe_defaults(), run_schauder_probe);
        add_override<double>(s, "--alpha", "alpha", "Holder exponent in (0,1)");
        add_override<int>(s, "--cases", "cases", "number of seeded cases");
        add_override<int>(s, "--levels", "levels", "refinement levels per case (1..3)");
    }
    {
        SubSpec& s = make("gradient-probe",
                          "measure the pointwise gradient bound on kernel-built solutions",
                          gradient_probe_defaults(), run_gradient_probe);
        add_override<int>(s, "--count", "count", "number of seeded sources");
        add_override<int>(s, "--refine", "refine", "quadrature refinement level (0..2)");
    }
    make("decay-probe", "fit derivative decay slopes of source-free kernel solutions",
         decay_probe_defaults(), run_decay_probe);
    {
        SubSpec& s = make("interp-check",
                          "tabulate interpolation constants across epsilon for a seeded field",
                          interp_check_defaults(), run_interp_check);
        add_override<double>(s, "--alpha", "alpha", "Holder exponent in (0,1)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        json err;
        err["error"] = json{{"type", "validation"}, {"subcommand", ""}, {"message", e.what()}};
        std::cerr << err.dump(2) << "\n";
        return 2;
    }

    for (SubSpec& s : subs)
        if (s.app->parsed()) return dispatch(s);
    return 2;
}
