#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <fstream>

#include "carlab/analysis.hpp"
#include "carlab/solvers.hpp"

using namespace carlab;

namespace {

SourceSpec unit_R_sine(const DomainSpec& dom) {
    SourceSpec src;
    src.R = [](Point, double) { return 1.0; };
    src.dRdt = [](Point, double) { return 0.0; };
    src.f = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
    src.r0 = 0.5;
    return src;
}

double max_err_vs(const SpaceTimeField& u, const std::function<double(Point, double)>& exact) {
    double m = 0.0;
    for (int it = 0; it < u.nt; ++it) {
        for (int ix = 0; ix < u.nspace(); ++ix) {
            m = std::max(m, std::abs(u.at(it, ix) - exact(u.domain.node(ix), u.time(it))));
        }
    }
    return m;
}

}  // namespace

TEST_CASE("zero source gives the zero wave solution exactly") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 51);
    SourceSpec src = unit_R_sine(dom);
    src.f.assign(dom.node_count(), 0.0);
    SpaceTimeField u = solve_wave_ibvp(dom, Coefficients{}, src, 1.0, 0.9 * dom.dx(0));
    REQUIRE(u.max_abs() == 0.0);
}

TEST_CASE("wave solver matches the separated solution at second order") {
    // f = sin(pi x), R = 1: u = sin(pi x)(1 - cos(pi t))/pi^2.
    auto exact = [](Point p, double t) {
        return std::sin(M_PI * p.x1) * (1.0 - std::cos(M_PI * t)) / sq(M_PI);
    };
    std::vector<double> errs, hs;
    for (int nx : {51, 101, 201}) {
        DomainSpec dom = DomainSpec::interval(0.0, 1.0, nx);
        SpaceTimeField u = solve_wave_ibvp(dom, Coefficients{}, unit_R_sine(dom), 1.0, 0.5 * dom.dx(0));
        errs.push_back(max_err_vs(u, exact));
        hs.push_back(dom.dx(0));
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < errs.size(); ++i) {
        lx.push_back(std::log(hs[i]));
        ly.push_back(std::log(errs[i]));
    }
    LineFit fit = fit_line(lx, ly);
    REQUIRE(fit.slope >= 1.9);
    REQUIRE(errs.back() < 1e-3);
}

TEST_CASE("wave solve is linear in the source") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 81);
    double dt = 0.9 * dom.dx(0);
    SourceSpec s1 = unit_R_sine(dom);
    SourceSpec s2 = s1;
    s2.f = sample_on_grid(dom, [](Point p) { return p.x1 * (1.0 - p.x1); });
    SourceSpec s3 = s1;
    for (int i = 0; i < dom.node_count(); ++i) s3.f[i] = 2.5 * s1.f[i] + s2.f[i];
    SpaceTimeField u1 = solve_wave_ibvp(dom, Coefficients{}, s1, 1.0, dt);
    SpaceTimeField u2 = solve_wave_ibvp(dom, Coefficients{}, s2, 1.0, dt);
    SpaceTimeField u3 = solve_wave_ibvp(dom, Coefficients{}, s3, 1.0, dt);
    double scale = u3.max_abs();
    for (std::size_t k = 0; k < u3.data.size(); ++k) {
        REQUIRE(std::abs(u3.data[k] - (2.5 * u1.data[k] + u2.data[k])) <= 1e-12 * scale);
    }
}

TEST_CASE("CFL violations and non-matching sources are rejected") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 51);
    SourceSpec src = unit_R_sine(dom);
    REQUIRE_THROWS_AS(solve_wave_ibvp(dom, Coefficients{}, src, 1.0, 2.0 * dom.dx(0)), CFLViolation);
    src.f.pop_back();
    REQUIRE_THROWS_AS(solve_wave_ibvp(dom, Coefficients{}, src, 1.0, 0.5 * dom.dx(0)), GridMismatch);
}

TEST_CASE("free wave reproduces the eigenmode and conserves energy") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 201);
    auto u0 = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
    std::vector<double> v0(dom.node_count(), 0.0);
    SpaceTimeField u = solve_wave_free(dom, Coefficients{}, u0, v0, 2.0, 0.5 * dom.dx(0));
    auto exact = [](Point p, double t) { return std::sin(M_PI * p.x1) * std::cos(M_PI * t); };
    REQUIRE(max_err_vs(u, exact) < 2e-3);
    double e0 = energy(u, 0.0);
    REQUIRE(e0 == Catch::Approx(sq(M_PI) / 2.0).epsilon(1e-3));
    for (double t : {0.5, 1.0, 1.5, 2.0}) {
        REQUIRE(energy(u, t) == Catch::Approx(e0).epsilon(1e-3));
    }
}

TEST_CASE("free wave with zero data stays zero and validates the boundary") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 31);
    std::vector<double> z(dom.node_count(), 0.0);
    SpaceTimeField u = solve_wave_free(dom, Coefficients{}, z, z, 0.5, 0.5 * dom.dx(0));
    REQUIRE(u.max_abs() == 0.0);
    auto bad = z;
    bad[0] = 0.5;
    REQUIRE_THROWS_AS(solve_wave_free(dom, Coefficients{}, bad, z, 0.5, 0.5 * dom.dx(0)),
                      BoundaryViolation);
}

TEST_CASE("free wave is time reversible up to scheme accuracy") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 201);
    auto u0 = sample_on_grid(dom, [](Point p) { return std::sin(2.0 * M_PI * p.x1); });
    std::vector<double> v0(dom.node_count(), 0.0);
    double T = 1.0, dt = 0.5 * dom.dx(0);
    SpaceTimeField fwd = solve_wave_free(dom, Coefficients{}, u0, v0, T, dt);
    FieldEval ev(fwd);
    std::vector<double> uT(dom.node_count()), vT(dom.node_count());
    for (int i = 0; i < dom.node_count(); ++i) {
        uT[i] = fwd.at(fwd.nt - 1, i);
        vT[i] = -ev.dt(fwd.nt - 1, i);  // negated velocity runs the dynamics backward
    }
    for (int i = 0; i < dom.node_count(); ++i) {
        if (dom.is_boundary_index(i)) uT[i] = 0.0;
    }
    SpaceTimeField back = solve_wave_free(dom, Coefficients{}, uT, vT, T, dt);
    double err = 0.0;
    for (int i = 0; i < dom.node_count(); ++i) {
        err = std::max(err, std::abs(back.at(back.nt - 1, i) - u0[i]));
    }
    REQUIRE(err < 50.0 * sq(dom.dx(0)));
}

TEST_CASE("heat solver matches the eigenmode decay at first order in dt") {
    // f = sin(pi x), R = 1, u0 = 0: u = sin(pi x)(1 - e^{-pi^2 t})/pi^2.
    auto exact = [](Point p, double t) {
        return std::sin(M_PI * p.x1) * (1.0 - std::exp(-sq(M_PI) * t)) / sq(M_PI);
    };
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 401);
    std::vector<double> errs, hs;
    for (double dt : {1.0 / 25, 1.0 / 50, 1.0 / 100}) {
        HeatSolution sol = solve_heat(dom, Coefficients{}, unit_R_sine(dom), {}, 1.0, dt);
        errs.push_back(max_err_vs(sol.u, exact));
        hs.push_back(dt);
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < errs.size(); ++i) {
        lx.push_back(std::log(hs[i]));
        ly.push_back(std::log(errs[i]));
    }
    LineFit fit = fit_line(lx, ly);
    REQUIRE(fit.slope >= 0.9);
}

TEST_CASE("heat solution approaches the steady profile") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 101);
    HeatSolution sol = solve_heat(dom, Coefficients{}, unit_R_sine(dom), {}, 3.0, 0.01);
    // Steady state of -u'' = sin(pi x) is sin(pi x)/pi^2.
    double err = 0.0;
    for (int i = 0; i < dom.node_count(); ++i) {
        double steady = std::sin(M_PI * dom.node(i).x1) / sq(M_PI);
        err = std::max(err, std::abs(sol.u.at(sol.u.nt - 1, i) - steady));
    }
    REQUIRE(err < 1e-3);
}

TEST_CASE("heat discrete maximum principle sanity") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 101);
    Coefficients co;
    co.c = sample_on_grid(dom, [](Point) { return -1.0; });
    SourceSpec src;
    src.R = [](Point, double t) { return 1.0 + 0.5 * t; };
    src.f = sample_on_grid(dom, [](Point p) { return p.x1 * (1.0 - p.x1); });
    src.r0 = 0.5;
    HeatSolution sol = solve_heat(dom, co, src, {}, 1.0, 0.01);
    for (double v : sol.u.data) REQUIRE(v >= -1e-10);
}

TEST_CASE("heat zero data stays zero; 2D solver agrees with a product mode") {
    DomainSpec dom2 = DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0, 41);
    SourceSpec src;
    src.R = [](Point, double) { return 1.0; };
    src.f = sample_on_grid(dom2, [](Point p) { return std::sin(M_PI * p.x1) * std::sin(M_PI * p.x2); });
    src.r0 = 0.5;
    HeatSolution sol = solve_heat(dom2, Coefficients{}, src, {}, 0.25, 1.0 / 400);
    // u = f (1 - e^{-2 pi^2 t})/(2 pi^2).
    double err = 0.0;
    for (int i = 0; i < dom2.node_count(); ++i) {
        Point p = dom2.node(i);
        double exact = std::sin(M_PI * p.x1) * std::sin(M_PI * p.x2) *
                       (1.0 - std::exp(-2.0 * sq(M_PI) * 0.25)) / (2.0 * sq(M_PI));
        err = std::max(err, std::abs(sol.u.at(sol.u.nt - 1, i) - exact));
    }
    REQUIRE(err < 5e-3);

    SourceSpec zero = src;
    zero.f.assign(dom2.node_count(), 0.0);
    HeatSolution zsol = solve_heat(dom2, Coefficients{}, zero, {}, 0.25, 1.0 / 100);
    REQUIRE(zsol.u.max_abs() == 0.0);
}

TEST_CASE("2D wave solver reproduces the first product eigenmode") {
    DomainSpec dom = DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0, 41);
    auto u0 = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1) * std::sin(M_PI * p.x2); });
    std::vector<double> v0(dom.node_count(), 0.0);
    double dt = 0.5 * cfl_limit(dom) / 0.9;
    SpaceTimeField u = solve_wave_free(dom, Coefficients{}, u0, v0, 0.5, dt);
    double omega = std::sqrt(2.0) * M_PI;
    double err = 0.0;
    for (int i = 0; i < dom.node_count(); ++i) {
        Point p = dom.node(i);
        double exact = std::sin(M_PI * p.x1) * std::sin(M_PI * p.x2) * std::cos(omega * 0.5);
        err = std::max(err, std::abs(u.at(u.nt - 1, i) - exact));
    }
    REQUIRE(err < 5e-3);
}

TEST_CASE("odd extension reflects exactly and validates the trace") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 21);
    SpaceTimeField f = SpaceTimeField::sample(dom, 0.0, 0.05, 21, [](Point p, double t) {
        return std::sin(M_PI * p.x1) * std::sin(t);
    });
    SpaceTimeField ext = extend_odd(f);
    REQUIRE(ext.nt == 2 * f.nt - 1);
    REQUIRE(ext.t_start == Catch::Approx(-f.t_end()));
    for (int it = 0; it < f.nt; ++it) {
        for (int ix = 0; ix < f.nspace(); ++ix) {
            REQUIRE(ext.at(f.nt - 1 + it, ix) == -ext.at(f.nt - 1 - it, ix));  // bit-exact negation
        }
    }
    // sin(pi x) sin(t) is already odd: the extension equals the formula.
    for (int it = 0; it < ext.nt; ++it) {
        for (int ix = 0; ix < ext.nspace(); ++ix) {
            double expect = std::sin(M_PI * dom.node(ix).x1) * std::sin(ext.time(it));
            REQUIRE(ext.at(it, ix) == Catch::Approx(expect).margin(1e-12));
        }
    }

    SpaceTimeField bad = SpaceTimeField::sample(dom, 0.0, 0.05, 21, [](Point, double) { return 1e-3; });
    REQUIRE_THROWS_AS(extend_odd(bad), NonzeroTrace);
    REQUIRE_NOTHROW(extend_odd_rhs(bad));
}

TEST_CASE("field binary serialization round trips") {
    DomainSpec dom = DomainSpec::rectangle(0.0, 2.0, -1.0, 1.0, 9);
    SpaceTimeField f = SpaceTimeField::sample(dom, 0.25, 0.125, 6, [](Point p, double t) {
        return p.x1 * p.x2 + t;
    });
    field_io::write_binary(f, "roundtrip_field.bin");
    SpaceTimeField g = field_io::read_binary("roundtrip_field.bin");
    REQUIRE(g.domain.kind == f.domain.kind);
    REQUIRE(g.domain.nx == f.domain.nx);
    REQUIRE(g.nt == f.nt);
    REQUIRE(g.dt == f.dt);
    REQUIRE(g.t_start == f.t_start);
    REQUIRE(g.data == f.data);  // bit identical
    field_io::write_csv(f, "roundtrip_field.csv");
    std::ifstream is("roundtrip_field.csv");
    std::string header;
    std::getline(is, header);
    REQUIRE(header == "t,x1,x2,v0");
}

TEST_CASE("y = dt u satisfies the differentiated equation") {
    // Discrete L^2 residual of dtt y - Lap y - (dR/dt) f over interior nodes.
    auto residual_at = [](int nx, auto Rfun, auto dRfun) {
        DomainSpec dom = DomainSpec::interval(0.0, 1.0, nx);
        SourceSpec src;
        src.R = Rfun;
        src.dRdt = dRfun;
        src.f = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
        src.r0 = 0.5;
        double dt = 0.5 * dom.dx(0);
        SpaceTimeField u = solve_wave_ibvp(dom, Coefficients{}, src, 1.0, dt);
        SpaceTimeField y = time_derivative(u);
        FieldEval ev(y);
        std::vector<double> Ly(dom.node_count());
        CompensatedSum acc;
        for (int it = 2; it < y.nt - 2; ++it) {
            apply_spatial_operator(dom, Coefficients{}, y.slice(it), Ly.data());
            for (int ix = 1; ix < dom.nx - 1; ++ix) {
                double r = ev.dtt(it, ix) - Ly[ix] - src.dRdt_at(dom.node(ix), y.time(it)) * src.f[ix];
                acc.add(y.dt * dom.node_weight(ix) * sq(r));
            }
        }
        return std::sqrt(acc.value());
    };
    // R linear in t: centered differencing commutes with the scheme exactly,
    // so the residual sits at rounding level.
    auto Rlin = [](Point, double t) { return 1.0 + t; };
    auto dRlin = [](Point, double) { return 1.0; };
    REQUIRE(residual_at(101, Rlin, dRlin) < 1e-9);
    // R = e^t: the residual is pure time-discretization error, second order.
    auto Rexp = [](Point, double t) { return std::exp(t); };
    auto dRexp = [](Point, double t) { return std::exp(t); };
    double r1 = residual_at(51, Rexp, dRexp);
    double r2 = residual_at(101, Rexp, dRexp);
    double r3 = residual_at(201, Rexp, dRexp);
    REQUIRE(r2 < 0.35 * r1);
    REQUIRE(r3 < 0.35 * r2);
}
