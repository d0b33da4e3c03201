#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "carlab/geometry.hpp"
#include "carlab/numerics.hpp"
#include "carlab/weights.hpp"

using namespace carlab;

namespace {

std::shared_ptr<const ParabolicGeometry> reference_pgeom(int nx = 101) {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, nx);
    return std::make_shared<const ParabolicGeometry>(construct_d(dom, dom.face_by_name("right"), 0.5));
}

}  // namespace

TEST_CASE("hyperbolic phase psi") {
    WeightParams w = WeightParams::hyperbolic({-1.0, 0.0}, 0.5, 0.875, 0.0);
    REQUIRE(eval_psi_hyperbolic({0.0, 0.0}, 0.0, w) == Catch::Approx(1.0));
    REQUIRE(eval_psi_hyperbolic({0.0, 0.0}, 1.0, w) == Catch::Approx(0.125));
    WeightParams w0 = WeightParams::hyperbolic({-1.0, 0.0}, 0.5, 0.0, 0.0);
    for (double t : {0.0, 0.3, 2.0}) {
        REQUIRE(eval_psi_hyperbolic({0.25, 0.0}, t, w0) == Catch::Approx(sq(1.25)));
    }
}

TEST_CASE("phi is the exponential of the phase") {
    WeightParams w = WeightParams::hyperbolic({-1.0, 0.0}, 0.5, 0.875, 0.0);
    REQUIRE(eval_phi({0.0, 0.0}, 0.0, w) == Catch::Approx(1.6487212707001282).epsilon(1e-14));
    WeightParams wp = WeightParams::parabolic(reference_pgeom(), 1.0, 1.0, 0.5);
    // psi = 0 gives phi = 1: at the left endpoint d = 0 and t = t0.
    REQUIRE(eval_phi({0.0, 0.0}, 0.5, wp) == Catch::Approx(1.0));
    // phi is maximal in t at t0 for beta > 0.
    REQUIRE(eval_phi({0.5, 0.0}, 0.2, wp) < eval_phi({0.5, 0.0}, 0.5, wp));
    REQUIRE(eval_phi({0.5, 0.0}, 0.9, wp) < eval_phi({0.5, 0.0}, 0.5, wp));
}

TEST_CASE("phi shift identity: psi + a multiplies phi by e^{lambda a}") {
    WeightParams w = WeightParams::hyperbolic({-1.0, 0.0}, 0.7, 0.4, 0.25);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        Point x{rng.uniform(0.0, 1.0), 0.0};
        double t = rng.uniform(0.0, 2.0);
        double a = rng.uniform(-2.0, 2.0);
        double lhs = std::exp(w.lambda * (eval_psi(x, t, w) + a));
        double rhs = std::exp(w.lambda * a) * eval_phi(x, t, w);
        REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-14));
    }
}

TEST_CASE("argmax over t of the hyperbolic weight is t0 on a grid") {
    WeightParams w = WeightParams::hyperbolic({-1.0, 0.0}, 0.5, 0.875, 0.75);
    for (int ix = 0; ix <= 10; ++ix) {
        Point x{ix / 10.0, 0.0};
        double best = -1.0;
        double best_t = -1.0;
        for (int it = 0; it <= 60; ++it) {
            double t = it * 0.025;
            double v = eval_phi(x, t, w);
            if (v > best) {
                best = v;
                best_t = t;
            }
        }
        REQUIRE(best_t == Catch::Approx(0.75).margin(1e-12));
    }
}

TEST_CASE("blow-up weight values and range errors") {
    auto pg = reference_pgeom();
    // Profile with d(x)=0.5 at some x and ||d|| = 1 is synthesized by scaling:
    // evaluate the formula directly instead through a weight whose geometry
    // yields those numbers exactly is unwieldy; check the formula that the
    // implementation must reproduce at its own d(x) and ||d||.
    WeightParams w = WeightParams::blowup(pg, 1.0, 1.0);
    double dnorm = pg->d_max_domain();
    Point x{0.5, 0.0};
    double expected = std::exp((std::exp(w.lambda * pg->d(x)) - std::exp(2.0 * w.lambda * dnorm)) /
                               (0.5 * (1.0 - 0.5)));
    REQUIRE(eval_blowup_weight(x, 0.5, w) == Catch::Approx(expected).epsilon(1e-14));
    REQUIRE(eval_blowup_weight(x, 0.5, w) < 1.0);
    // Monotone decay toward t = 0.
    double prev = eval_blowup_weight(x, 0.5, w);
    for (double t : {0.25, 0.1, 0.05, 0.02}) {
        double v = eval_blowup_weight(x, t, w);
        REQUIRE(v <= prev);
        prev = v;
    }
    REQUIRE_THROWS_AS(eval_blowup_weight(x, 0.0, w), TimeOutOfRange);
    REQUIRE_THROWS_AS(eval_blowup_weight(x, 1.0, w), TimeOutOfRange);
}

TEST_CASE("blow-up weight reference value") {
    // exp((e^{0.5} - e^2)/0.25) for lambda=1, d=0.5, ||d||=1, T=1, t=0.5.
    double v = std::exp((std::exp(0.5) - std::exp(2.0)) / 0.25);
    REQUIRE(v == Catch::Approx(1.0666379693255567e-10).epsilon(1e-12));
}

TEST_CASE("kind mismatches are rejected") {
    WeightParams hyp = WeightParams::hyperbolic({-1.0, 0.0}, 0.5, 0.5, 0.0);
    WeightParams blow = WeightParams::blowup(reference_pgeom(), 1.0, 1.0);
    REQUIRE_THROWS_AS(eval_psi_hyperbolic({0, 0}, 0.0, blow), KindMismatch);
    REQUIRE_THROWS_AS(eval_blowup_weight({0, 0}, 0.5, hyp), KindMismatch);
    REQUIRE_THROWS_AS(eval_phi({0, 0}, 0.5, blow), KindMismatch);
}

TEST_CASE("c0 matches the closed form") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 5);
    ObservationGeometry g = compute_gamma(dom, {-1.0, 0.0});
    WeightParams w = WeightParams::hyperbolic({-1.0, 0.0}, 0.5, 0.875, 0.0);
    CarlemanConstants c = hyperbolic_constants(g, w, 2.0);
    REQUIRE(c.c0.has_value());
    REQUIRE(*c.c0 == Catch::Approx(0.7293917080247736).epsilon(1e-14));
    REQUIRE(*c.c0 > 0.0);
}

TEST_CASE("c0 fails loudly when (3.3) is violated") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 5);
    ObservationGeometry g = compute_gamma(dom, {-1.0, 0.0});
    WeightParams w = WeightParams::hyperbolic({-1.0, 0.0}, 0.5, 0.5, 0.0);
    try {
        hyperbolic_constants(g, w, 2.0);  // 2 sqrt(0.5) < sqrt(3)
        FAIL("expected ParameterConflict");
    } catch (const ParameterConflict& e) {
        REQUIRE(e.condition() == "(3.3)");
    }
}

TEST_CASE("sigma_0 exceeds sigma_1 once beta clears the (4.5) threshold") {
    auto pg = reference_pgeom();
    double delta = 0.25;
    double beta = select_beta_parabolic(*pg, delta);
    WeightParams w = WeightParams::parabolic(pg, 0.5, beta, 0.5);
    CarlemanConstants c = parabolic_constants(*pg, w, delta);
    REQUIRE(*c.sigma0 > *c.sigma1);
    REQUIRE(*c.mu == Catch::Approx(*c.sigma0 - *c.sigma1).epsilon(1e-14));
    // sigma_0 is e^{lambda * min d over Omega_0}: the time term vanishes at t0.
    REQUIRE(*c.sigma0 == Catch::Approx(std::exp(0.5 * pg->d_min_omega0())).epsilon(1e-14));

    WeightParams bad = WeightParams::parabolic(pg, 0.5, 1e-4, 0.5);
    try {
        parabolic_constants(*pg, bad, delta);
        FAIL("expected ParameterConflict");
    } catch (const ParameterConflict& e) {
        REQUIRE(e.condition() == "(4.5)");
    }
}

TEST_CASE("constants stay positive over random admissible draws") {
    Rng rng(31);
    auto pg = reference_pgeom();
    for (int trial = 0; trial < 100; ++trial) {
        DomainSpec dom = DomainSpec::interval(0.0, rng.uniform(0.5, 2.0), 7);
        Point x0{dom.a1 - rng.uniform(0.2, 2.0), 0.0};
        ObservationGeometry g = compute_gamma(dom, x0);
        double lambda = rng.uniform(0.2, 2.0);

        // Lipschitz-stability regime.
        double T1 = critical_time_hyperbolic(g) * rng.uniform(1.05, 3.0);
        double beta1 = select_beta_hyperbolic(g, T1);
        CarlemanConstants c1 =
            hyperbolic_constants(g, WeightParams::hyperbolic(x0, lambda, beta1, 0.0), T1);
        REQUIRE(*c1.c0 > 0.0);

        // Observability regime: kappa_2 > kappa_1 under (5.6).
        double T2 = critical_time_observability(g) * rng.uniform(1.05, 3.0);
        double beta2 = select_beta_observability(g, T2);
        double delta2 = select_delta_observability(g, beta2, T2);
        CarlemanConstants c2 = observability_constants(
            g, WeightParams::hyperbolic(x0, lambda, beta2, T2 / 2.0), T2, delta2);
        REQUIRE(*c2.kappa0 > *c2.kappa1);
        REQUIRE(*c2.kappa2 > *c2.kappa1);

        // Hoelder-stability regime: mu > 0 under (4.5).
        double delta3 = rng.uniform(0.1, 0.4);
        double beta3 = select_beta_parabolic(*pg, delta3);
        CarlemanConstants c3 =
            parabolic_constants(*pg, WeightParams::parabolic(pg, lambda, beta3, 0.5), delta3);
        REQUIRE(*c3.mu > 0.0);

        // Cauchy regime: mu_0 > 0 under the 5-2 selection.
        double eps = rng.uniform(0.05, 0.2);
        CauchySelection sel = select_cauchy_parameters(*pg, eps);
        CarlemanConstants c4 = cauchy_constants(
            *pg, WeightParams::parabolic(pg, lambda, sel.beta, 0.5), sel.delta_tilde, sel.eps_tilde);
        REQUIRE(*c4.mu0 > 0.0);
        REQUIRE(*c4.mu1 > *c4.mu2);
    }
}

TEST_CASE("the N selection reproduces the reference case") {
    // d0~ = 0.3, d1~ = 1.0: N - 1 > (1 - 0.09)/0.09, minimal N = 12.
    REQUIRE(select_cauchy_N(0.3, 1.0) == 12);
    // The beta interval for the selected parameters is nonempty and ordered.
    auto pg = reference_pgeom();
    CauchySelection sel = select_cauchy_parameters(*pg, 0.125);
    REQUIRE(sel.beta_lo < sel.beta);
    REQUIRE(sel.beta < sel.beta_hi);
    REQUIRE(sel.delta_tilde == Catch::Approx(sel.N * sel.eps_tilde));
}

TEST_CASE("umbrella compute_constants fills only the applicable groups") {
    DomainSpec dom = DomainSpec::interval(0.0, 1.0, 5);
    ObservationGeometry g = compute_gamma(dom, {-1.0, 0.0});
    WeightParams w = WeightParams::hyperbolic({-1.0, 0.0}, 0.5, 0.875, 0.0);
    CarlemanConstants c = compute_constants(w, g, 2.0, std::nullopt, std::nullopt);
    REQUIRE(c.c0.has_value());
    REQUIRE_FALSE(c.kappa0.has_value());
    REQUIRE_FALSE(c.sigma0.has_value());
    REQUIRE_FALSE(c.mu0.has_value());

    auto pg = reference_pgeom();
    double delta = 0.25;
    WeightParams wp = WeightParams::parabolic(pg, 0.5, select_beta_parabolic(*pg, delta), 0.5);
    CarlemanConstants cp = compute_constants(wp, std::nullopt, std::nullopt, delta, std::nullopt);
    REQUIRE(cp.sigma0.has_value());
    REQUIRE_FALSE(cp.c0.has_value());
    REQUIRE_FALSE(cp.mu1.has_value());
}

TEST_CASE("weight parameter validation") {
    WeightParams w = WeightParams::hyperbolic({0.0, 0.0}, 0.5, 0.5, 0.0);
    w.s_sweep = {1.0, 0.5};
    REQUIRE_THROWS_AS(w.validate(), ConfigError);
    w.s_sweep = default_s_sweep();
    w.lambda = 0.0;
    REQUIRE_THROWS_AS(w.validate(), ConfigError);
}
