#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "carlab/reconstruction.hpp"

using namespace carlab;

namespace {

ScenarioFunctions ramp() {
    ScenarioFunctions fns;
    fns.R = [](Point, double t) { return 1.0 + t; };
    fns.dRdt = [](Point, double) { return 1.0; };
    fns.r0 = 0.5;
    return fns;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

void dot_product_gate(const ForwardOperator& op, std::uint64_t seed, int pairs = 20) {
    Rng rng(seed);
    for (int k = 0; k < pairs; ++k) {
        std::vector<double> f(op.source_dim()), g(op.data_dim());
        for (double& v : f) v = rng.normal();
        for (double& v : g) v = rng.normal();
        std::vector<double> Af = op.apply(f);
        std::vector<double> Atg = op.apply_adjoint(g);
        double lhs = dot(Af, g);
        double rhs = dot(f, Atg);
        double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        REQUIRE(std::abs(lhs - rhs) / scale < 1e-10);
    }
}

ForwardOperator op_1d_hyper(bool assemble, int nx = 101) {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, nx);
    ObservationGeometry geom = compute_gamma(dom, {-1.0, 0.0});
    return ForwardOperator::hyperbolic(dom, Coefficients{}, ramp(), geom.gamma_faces(), 2.0,
                                       0.5 * dom.dx(0), assemble);
}

ForwardOperator op_1d_para(bool assemble, int nx = 81) {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, nx);
    return ForwardOperator::parabolic(dom, Coefficients{}, ramp(), {dom.face_by_name("right")}, 1.0,
                                      0.5, 0.01, assemble);
}

}  // namespace

TEST_CASE("adjoint passes the dot-product test on every scenario build") {
    SECTION("hyperbolic 1D, assembled") { dot_product_gate(op_1d_hyper(true), 101); }
    SECTION("hyperbolic 1D, matrix-free") { dot_product_gate(op_1d_hyper(false), 102); }
    SECTION("parabolic 1D, assembled") { dot_product_gate(op_1d_para(true), 103); }
    SECTION("parabolic 1D, matrix-free") { dot_product_gate(op_1d_para(false), 104); }
    SECTION("hyperbolic 2D, matrix-free") {
        DomainSpec dom = DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0, 17);
        ObservationGeometry geom = compute_gamma(dom, {-1.0, 0.5});
        ForwardOperator op = ForwardOperator::hyperbolic(dom, Coefficients{}, ramp(),
                                                         geom.gamma_faces(), 0.6,
                                                         0.5 * cfl_limit(dom) / 0.9, false);
        dot_product_gate(op, 105, 10);
    }
    SECTION("parabolic 2D, matrix-free") {
        DomainSpec dom = DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0, 13);
        ForwardOperator op = ForwardOperator::parabolic(dom, Coefficients{}, ramp(),
                                                        {dom.face_by_name("right")}, 0.5, 0.25, 0.025,
                                                        false);
        dot_product_gate(op, 106, 10);
    }
    SECTION("with lower-order coefficients") {
        DomainSpec dom = DomainSpec::interval(0.0, 1.0, 61);
        Coefficients co;
        co.b1 = sample_on_grid(dom, [](Point p) { return 0.5 * p.x1; });
        co.c = sample_on_grid(dom, [](Point) { return -0.75; });
        ObservationGeometry geom = compute_gamma(dom, {-1.0, 0.0});
        ForwardOperator oph = ForwardOperator::hyperbolic(dom, co, ramp(), geom.gamma_faces(), 1.5,
                                                          0.5 * dom.dx(0), false);
        dot_product_gate(oph, 107, 10);
        ForwardOperator opp = ForwardOperator::parabolic(dom, co, ramp(), geom.gamma_faces(), 1.0,
                                                         0.5, 0.0125, false);
        dot_product_gate(opp, 108, 10);
    }
}

TEST_CASE("assembled and matrix-free paths agree") {
    ForwardOperator a = op_1d_hyper(true, 61);
    ForwardOperator m = op_1d_hyper(false, 61);
    Rng rng(9);
    std::vector<double> f(a.source_dim());
    for (double& v : f) v = rng.normal();
    std::vector<double> ya = a.apply(f), ym = m.apply(f);
    for (std::size_t i = 0; i < ya.size(); ++i) {
        REQUIRE(ya[i] == Catch::Approx(ym[i]).margin(1e-13));
    }
}

TEST_CASE("forward map is linear and matches the trace-norm pipeline") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 101);
    ObservationGeometry geom = compute_gamma(dom, {-1.0, 0.0});
    ScenarioFunctions fns = ramp();
    double T = 2.0, dt = 0.5 * dom.dx(0);
    ForwardOperator op = ForwardOperator::hyperbolic(dom, Coefficients{}, fns, geom.gamma_faces(), T, dt);

    std::vector<double> zero(op.source_dim(), 0.0);
    std::vector<double> y0 = op.apply(zero);
    for (double v : y0) REQUIRE(v == 0.0);

    auto f1_full = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
    auto f2_full = sample_on_grid(dom, [](Point p) { return p.x1 * (1.0 - p.x1); });
    std::vector<double> f1 = op.restrict_interior(f1_full);
    std::vector<double> f2 = op.restrict_interior(f2_full);
    std::vector<double> f3(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) f3[i] = 1.75 * f1[i] + f2[i];
    std::vector<double> y1 = op.apply(f1), y2 = op.apply(f2), y3 = op.apply(f3);
    double ymax = 0.0;
    for (double v : y3) ymax = std::max(ymax, std::abs(v));
    for (std::size_t i = 0; i < y3.size(); ++i) {
        REQUIRE(std::abs(y3[i] - (1.75 * y1[i] + y2[i])) <= 1e-12 * std::max(1.0, ymax));
    }

    // ||A f||_2 equals the weighted trace norm of the solved field.
    SourceSpec src = fns.source(dom, f1_full);
    SpaceTimeField u = solve_wave_ibvp(dom, Coefficients{}, src, T, dt);
    double norm_direct = boundary_flux_norm(u, geom.gamma_faces(), 0.0, T, true);
    REQUIRE(std::sqrt(dot(y1, y1)) == Catch::Approx(norm_direct).epsilon(1e-10));
}

TEST_CASE("forward trace matches the separated-solution oracle") {
    // R = 1, f = sin(pi x): u = sin(pi x)(1 - cos(pi t))/pi^2, so the data
    // trace dt dnu u at x = 1 is -sin(pi t).
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 201);
    ObservationGeometry geom = compute_gamma(dom, {-1.0, 0.0});
    ScenarioFunctions fns;
    fns.R = [](Point, double) { return 1.0; };
    fns.dRdt = [](Point, double) { return 0.0; };
    fns.r0 = 0.5;
    ForwardOperator op = ForwardOperator::hyperbolic(dom, Coefficients{}, fns, geom.gamma_faces(),
                                                     2.0, 0.5 * dom.dx(0));
    auto f_full = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
    std::vector<double> y = op.apply(op.restrict_interior(f_full));
    const std::vector<double>& sw = op.data_sqrt_weights();
    double dt = op.dt();
    double err = 0.0;
    for (int it = 0; it < op.nt(); ++it) {
        double z = y[it] / sw[it];
        err = std::max(err, std::abs(z - (-std::sin(M_PI * it * dt))));
    }
    REQUIRE(err < 60.0 * sq(dom.dx(0)));
}

TEST_CASE("reconstruction returns zero for zero data and scales linearly") {
    ForwardOperator op = op_1d_hyper(true, 81);
    InverseProblemSpec spec;
    spec.alpha = 1e-8;
    std::vector<double> zero(op.data_dim(), 0.0);
    ReconstructionResult r0 = reconstruct(op, zero, spec);
    for (double v : r0.f_full) REQUIRE(v == 0.0);

    DomainSpec dom = op.domain();
    auto f_true = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
    std::vector<double> d = op.apply(op.restrict_interior(f_true));
    ReconstructionResult r1 = reconstruct(op, d, spec);
    std::vector<double> d2 = d;
    for (double& v : d2) v *= 2.0;
    ReconstructionResult r2 = reconstruct(op, d2, spec);
    double scale = 0.0;
    for (double v : r2.f_full) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < r1.f_full.size(); ++i) {
        REQUIRE(std::abs(r2.f_full[i] - 2.0 * r1.f_full[i]) <= 1e-8 * std::max(1.0, scale));
    }
}

TEST_CASE("noiseless reconstruction recovers the source, CG energy monotone") {
    ForwardOperator op = op_1d_hyper(true, 101);
    DomainSpec dom = op.domain();
    auto f_true = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
    std::vector<double> d = op.apply(op.restrict_interior(f_true));
    InverseProblemSpec spec;
    spec.alpha = 1e-8;
    spec.max_iterations = 400;
    ReconstructionResult rec = reconstruct(op, d, spec);
    double err = relative_error(op, rec.f_full, f_true, l2_norm_spatial(dom, f_true), std::nullopt);
    REQUIRE(err <= 1e-2);
    for (std::size_t k = 1; k < rec.energy_history.size(); ++k) {
        REQUIRE(rec.energy_history[k] <= rec.energy_history[k - 1] +
                                             1e-12 * std::abs(rec.energy_history[k - 1]));
    }
}

TEST_CASE("parabolic-local reconstruction recovers the source") {
    ForwardOperator op = op_1d_para(true, 101);
    DomainSpec dom = op.domain();
    auto f_true = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
    std::vector<double> d = op.apply(op.restrict_interior(f_true));
    InverseProblemSpec spec;
    spec.scenario = InverseScenario::ParabolicLocal;
    spec.alpha = 1e-10;
    spec.max_iterations = 600;
    ReconstructionResult rec = reconstruct(op, d, spec);
    double err = relative_error(op, rec.f_full, f_true, l2_norm_spatial(dom, f_true), std::nullopt);
    REQUIRE(err <= 1e-2);
}

TEST_CASE("error at fixed noise decreases or stalls under refinement") {
    double level = 1e-2;
    std::vector<double> errs;
    for (int nx : {61, 101, 151}) {
        ForwardOperator op = op_1d_hyper(true, nx);
        DomainSpec dom = op.domain();
        auto f_true = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
        std::vector<double> clean = op.apply(op.restrict_interior(f_true));
        const std::vector<double>& sw = op.data_sqrt_weights();
        double meas = 0.0, l2 = 0.0;
        for (std::size_t i = 0; i < clean.size(); ++i) {
            meas += sq(sw[i]);
            l2 += sq(clean[i]);
        }
        double sigma = level * std::sqrt(l2 / meas);
        // Average three noise realizations for a stable estimate.
        double avg = 0.0;
        for (int rep = 0; rep < 3; ++rep) {
            Rng rng(900 + rep);
            std::vector<double> noisy = clean;
            CompensatedSum n2;
            for (std::size_t i = 0; i < noisy.size(); ++i) {
                double xi = sigma * rng.normal();
                noisy[i] += sw[i] * xi;
                n2.add(sq(sw[i] * xi));
            }
            InverseProblemSpec spec;
            spec.max_iterations = 300;
            spec.alpha = discrepancy_alpha(op, noisy, std::sqrt(n2.value()), spec);
            ReconstructionResult r = reconstruct(op, noisy, spec);
            avg += relative_error(op, r.f_full, f_true, l2_norm_spatial(dom, f_true), std::nullopt);
        }
        errs.push_back(avg / 3.0);
    }
    REQUIRE(errs[1] <= 1.05 * errs[0]);
    REQUIRE(errs[2] <= 1.05 * errs[1]);
}

TEST_CASE("noise study: slope near one for the hyperbolic scenario, small grid") {
    ForwardOperator op = op_1d_hyper(true, 61);
    DomainSpec dom = op.domain();
    auto f_true = sample_on_grid(dom, [](Point p) { return std::sin(M_PI * p.x1); });
    InverseProblemSpec spec;
    spec.scenario = InverseScenario::HyperbolicBoundary;
    spec.alpha = 1e-8;
    spec.max_iterations = 300;
    spec.noise_levels = {1e-4, 1e-3, 1e-2, 1e-1};
    NoiseStudyReport rep = noise_scaling_study(op, f_true, spec, std::nullopt, 2222);
    REQUIRE(rep.rows.size() == 5);       // floor row + 4 levels
    REQUIRE(rep.rows[0].level == 0.0);   // noiseless floor reference
    REQUIRE(rep.slope > 0.5);
    REQUIRE(rep.slope <= 1.2);
    // Error grows with the level across the fitted range (one inversion allowed).
    int inversions = 0;
    for (std::size_t i = 2; i < rep.rows.size(); ++i) {
        if (rep.rows[i].error < rep.rows[i - 1].error) ++inversions;
    }
    REQUIRE(inversions <= 1);
    InverseProblemSpec bad = spec;
    bad.noise_levels = {1e-2, 1e-1};
    REQUIRE_THROWS_AS(noise_scaling_study(op, f_true, bad, std::nullopt, 1), FitUnderdetermined);
}
