#pragma once

// Weight families driving every estimate: the shifted hyperbolic phase
// psi = |x-x0|^2 - beta (t-t0)^2, the parabolic pseudoconvex phase
// psi~ = d(x) - beta (t-t0)^2 (both exponentiated as phi = e^{lambda psi}),
// the boundary blow-up weight, and the named scalar constants c0, kappa_i,
// sigma_i, mu_i that control the absorption arguments.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "carlab/errors.hpp"
#include "carlab/geometry.hpp"
#include "carlab/numerics.hpp"

namespace carlab {

enum class WeightKind { HyperbolicShifted, ParabolicPseudoconvex, BlowupBoundary };

inline std::vector<double> default_s_sweep() { return geometric_spaced(1.0, 64.0, 16); }

struct WeightParams {
    double lambda = 0.5;
    double beta = 0.0;
    double t0 = 0.0;
    WeightKind kind = WeightKind::HyperbolicShifted;
    Point x0;                                          // HyperbolicShifted
    std::shared_ptr<const ParabolicGeometry> pgeom;    // ParabolicPseudoconvex
    double T_blowup = 0.0;                             // BlowupBoundary
    std::vector<double> s_sweep = default_s_sweep();

    void validate() const {
        if (!(lambda > 0.0)) throw ConfigError("weight requires lambda > 0");
        if (beta < 0.0) throw ConfigError("weight requires beta >= 0");
        double prev = 0.0;
        for (double s : s_sweep) {
            if (!(s > prev)) throw ConfigError("s_sweep must be strictly increasing and positive");
            prev = s;
        }
        if (kind == WeightKind::ParabolicPseudoconvex && !pgeom) {
            throw ConfigError("parabolic weight requires a pseudoconvex geometry");
        }
        if (kind == WeightKind::BlowupBoundary && !(T_blowup > 0.0)) {
            throw ConfigError("blow-up weight requires T > 0");
        }
    }

    static WeightParams hyperbolic(Point x0, double lambda, double beta, double t0 = 0.0) {
        WeightParams w;
        w.kind = WeightKind::HyperbolicShifted;
        w.x0 = x0;
        w.lambda = lambda;
        w.beta = beta;
        w.t0 = t0;
        return w;
    }

    static WeightParams parabolic(std::shared_ptr<const ParabolicGeometry> pg, double lambda, double beta,
                                  double t0) {
        WeightParams w;
        w.kind = WeightKind::ParabolicPseudoconvex;
        w.pgeom = std::move(pg);
        w.lambda = lambda;
        w.beta = beta;
        w.t0 = t0;
        return w;
    }

    static WeightParams blowup(std::shared_ptr<const ParabolicGeometry> pg, double lambda, double T) {
        WeightParams w;
        w.kind = WeightKind::BlowupBoundary;
        w.pgeom = std::move(pg);
        w.lambda = lambda;
        w.T_blowup = T;
        return w;
    }
};

inline double eval_psi_hyperbolic(const Point& x, double t, const WeightParams& w) {
    if (w.kind != WeightKind::HyperbolicShifted) {
        throw KindMismatch("eval_psi_hyperbolic requires the hyperbolic shifted weight");
    }
    // x2 defaults to 0 on both points, so the same formula serves 1D and 2D.
    double r2 = sq(x.x1 - w.x0.x1) + sq(x.x2 - w.x0.x2);
    return r2 - w.beta * sq(t - w.t0);
}

// Phase of the exponential weight for either pseudoconvex family.
inline double eval_psi(const Point& x, double t, const WeightParams& w) {
    switch (w.kind) {
        case WeightKind::HyperbolicShifted:
            return eval_psi_hyperbolic(x, t, w);
        case WeightKind::ParabolicPseudoconvex:
            return w.pgeom->d(x) - w.beta * sq(t - w.t0);
        default:
            throw KindMismatch("phi is defined for the shifted and pseudoconvex weights only");
    }
}

inline double eval_log_phi(const Point& x, double t, const WeightParams& w) {
    return w.lambda * eval_psi(x, t, w);
}

inline double eval_phi(const Point& x, double t, const WeightParams& w) {
    return std::exp(eval_log_phi(x, t, w));
}

// Boundary blow-up weight exp((e^{lambda d} - e^{2 lambda ||d||}) / (t(T-t))).
// Evaluated only; no inequality check in this laboratory uses it.
inline double eval_blowup_weight(const Point& x, double t, const WeightParams& w) {
    if (w.kind != WeightKind::BlowupBoundary) {
        throw KindMismatch("eval_blowup_weight requires the blow-up weight kind");
    }
    double T = w.T_blowup;
    if (!(t > 0.0 && t < T)) {
        throw TimeOutOfRange("blow-up weight is defined for 0 < t < T, got t=" + std::to_string(t));
    }
    double dnorm = w.pgeom->d_max_domain();
    double numer = std::exp(w.lambda * w.pgeom->d(x)) - std::exp(2.0 * w.lambda * dnorm);
    return std::exp(numer / (t * (T - t)));
}

// Every named constant of the stability proofs; constants that do not apply
// to a scenario stay absent rather than zero-filled.
struct CarlemanConstants {
    std::optional<double> c0;
    std::optional<double> kappa0, kappa1, kappa2;
    std::optional<double> sigma0, sigma1, mu;
    std::optional<double> mu0, mu1, mu2;
};

// c0 = 2(e^{lambda d0^2} - e^{lambda d1^2 - lambda beta T^2}), positive
// exactly when T sqrt(beta) > sqrt(d1^2 - d0^2).
inline CarlemanConstants hyperbolic_constants(const ObservationGeometry& geom, const WeightParams& w,
                                              double T) {
    if (!(sq(T) * w.beta > sq(geom.d1) - sq(geom.d0))) {
        throw ParameterConflict("(3.3)", "T sqrt(beta) = " + std::to_string(T * std::sqrt(w.beta)) +
                                             " <= sqrt(d1^2-d0^2) = " +
                                             std::to_string(critical_time_hyperbolic(geom)) +
                                             ": condition (3.3) fails, c0 would not be positive");
    }
    CarlemanConstants c;
    c.c0 = 2.0 * (std::exp(w.lambda * sq(geom.d0)) - std::exp(w.lambda * (sq(geom.d1) - w.beta * sq(T))));
    return c;
}

// kappa_0 = e^{lambda d0^2}, kappa_1 = e^{lambda(d1^2 - beta T^2/4)},
// kappa_2 = e^{lambda(d0^2 - beta delta^2)}, with the orderings required by
// (5.4) and (5.6) checked.
inline CarlemanConstants observability_constants(const ObservationGeometry& geom, const WeightParams& w,
                                                 double T, double delta) {
    CarlemanConstants c;
    double la = w.lambda;
    if (!(sq(T) * w.beta > 4.0 * (sq(geom.d1) - sq(geom.d0)))) {
        throw ParameterConflict("(5.4)", "T sqrt(beta) = " + std::to_string(T * std::sqrt(w.beta)) +
                                             " <= 2 sqrt(d1^2-d0^2) = " +
                                             std::to_string(critical_time_observability(geom)) +
                                             ": condition (5.4) fails");
    }
    c.kappa0 = std::exp(la * sq(geom.d0));
    c.kappa1 = std::exp(la * (sq(geom.d1) - sq(T) / 4.0 * w.beta));
    double k2_exponent = la * (sq(geom.d0) - w.beta * sq(delta));
    c.kappa2 = std::exp(k2_exponent);
    if (!(*c.kappa2 > *c.kappa1)) {
        throw ParameterConflict("(5.6)", "delta=" + std::to_string(delta) +
                                             " too large: kappa_2 <= kappa_1, condition (5.6) fails");
    }
    return c;
}

// sigma_0 = min over closure(Omega_0) of phi~(.,t0) and sigma_1 the larger of
// the excluded-boundary and off-center slice maxima; their gap mu must be
// positive, which is condition (4.5).
inline CarlemanConstants parabolic_constants(const ParabolicGeometry& pg, const WeightParams& w,
                                             double delta) {
    CarlemanConstants c;
    double la = w.lambda;
    double d_min0 = pg.d_min_omega0();
    double d_max = pg.d_max_domain();
    // d = 0 on dOmega \ Gamma by construction, so the boundary part of
    // sigma_1 is e^{lambda * 0} = 1 at t = t0.
    double sigma1 = std::max(1.0, std::exp(la * (d_max - w.beta * sq(delta))));
    double sigma0 = std::exp(la * d_min0);
    if (!(std::max(0.0, d_max - w.beta * sq(delta)) < d_min0)) {
        throw ParameterConflict("(4.5)", "beta=" + std::to_string(w.beta) +
                                             " too small: max{max d on dOmega\\Gamma, max d - beta delta^2} = " +
                                             std::to_string(std::max(0.0, d_max - w.beta * sq(delta))) +
                                             " >= min d on Omega_0 = " + std::to_string(d_min0) +
                                             ", condition (4.5) fails");
    }
    c.sigma0 = sigma0;
    c.sigma1 = sigma1;
    c.mu = sigma0 - sigma1;
    return c;
}

// Smallest beta that satisfies (4.5) with a 1.5x margin; the estimates only
// require "sufficiently large" beta.
inline double select_beta_parabolic(const ParabolicGeometry& pg, double delta) {
    double need = (pg.d_max_domain() - pg.d_min_omega0()) / sq(delta);
    return std::max(1.5 * need, 1e-2);
}

// Cauchy-problem parameter block: mu_1 = e^{lambda(d0~^2 - beta eps~^2)},
// mu_2 = max{1, e^{lambda(d1~^2 - beta delta~^2)}}, mu_0 = mu_1 - mu_2 with
// d0~ = min d over Omega_0 and d1~ = max d over Omega.
inline CarlemanConstants cauchy_constants(const ParabolicGeometry& pg, const WeightParams& w,
                                          double delta_tilde, double eps_tilde) {
    CarlemanConstants c;
    double la = w.lambda;
    double d0t = pg.d_min_omega0();
    double d1t = pg.d_max_domain();
    double mu1 = std::exp(la * (sq(d0t) - w.beta * sq(eps_tilde)));
    double mu2 = std::max(1.0, std::exp(la * (sq(d1t) - w.beta * sq(delta_tilde))));
    if (!(mu1 > mu2)) {
        throw ParameterConflict("(5-2)", "mu_1 <= mu_2 for beta=" + std::to_string(w.beta) +
                                             ", delta~=" + std::to_string(delta_tilde) +
                                             ", eps~=" + std::to_string(eps_tilde) +
                                             ": the Cauchy-problem parameter selection is inconsistent");
    }
    c.mu1 = mu1;
    c.mu2 = mu2;
    c.mu0 = mu1 - mu2;
    return c;
}

// Parameter selection for the Cauchy stability estimate: the smallest integer
// N with N - 1 > (d1~^2 - d0~^2)/d0~^2, then eps~ = eps/(N-1), delta~ = N eps~
// and beta the midpoint of the printed admissible interval.
struct CauchySelection {
    int N = 0;
    double eps_tilde = 0.0;
    double delta_tilde = 0.0;
    double beta_lo = 0.0;
    double beta_hi = 0.0;
    double beta = 0.0;
};

inline int select_cauchy_N(double d0_tilde, double d1_tilde) {
    if (!(d0_tilde > 0.0)) throw NoAdmissibleBeta("d0~ must be positive for the N selection");
    double bound = (sq(d1_tilde) - sq(d0_tilde)) / sq(d0_tilde);
    int N = static_cast<int>(std::floor(bound)) + 2;  // minimal integer with N - 1 > bound
    while (!(N - 1 > bound)) ++N;
    return N;
}

inline CauchySelection select_cauchy_parameters(const ParabolicGeometry& pg, double eps) {
    double d0t = pg.d_min_omega0();
    double d1t = pg.d_max_domain();
    CauchySelection sel;
    sel.N = select_cauchy_N(d0t, d1t);
    sel.eps_tilde = eps / (sel.N - 1);
    sel.delta_tilde = sel.N * sel.eps_tilde;
    sel.beta_lo = (sq(d1t) - sq(d0t)) / (sq(sel.delta_tilde) - sq(sel.eps_tilde));
    sel.beta_hi = sq(d0t) / sq(sel.eps_tilde);
    if (!(sel.beta_lo < sel.beta_hi)) {
        throw NoAdmissibleBeta("empty beta interval (" + std::to_string(sel.beta_lo) + ", " +
                               std::to_string(sel.beta_hi) + ") in the Cauchy parameter selection");
    }
    sel.beta = 0.5 * (sel.beta_lo + sel.beta_hi);
    return sel;
}

// Umbrella: fills every constant group whose inputs are supplied, leaving the
// others absent. Hyperbolic groups need `geom` and T (kappas also delta);
// parabolic groups need the pseudoconvex weight (sigmas need delta, mus also
// epsilon_t).
inline CarlemanConstants compute_constants(const WeightParams& params,
                                           const std::optional<ObservationGeometry>& geom,
                                           std::optional<double> T, std::optional<double> delta,
                                           std::optional<double> epsilon_t) {
    CarlemanConstants out;
    if (params.kind == WeightKind::HyperbolicShifted && geom && T) {
        out.c0 = hyperbolic_constants(*geom, params, *T).c0;
        if (delta) {
            CarlemanConstants k = observability_constants(*geom, params, *T, *delta);
            out.kappa0 = k.kappa0;
            out.kappa1 = k.kappa1;
            out.kappa2 = k.kappa2;
        }
    }
    if (params.kind == WeightKind::ParabolicPseudoconvex && params.pgeom && delta) {
        CarlemanConstants s = parabolic_constants(*params.pgeom, params, *delta);
        out.sigma0 = s.sigma0;
        out.sigma1 = s.sigma1;
        out.mu = s.mu;
        if (epsilon_t) {
            CarlemanConstants m = cauchy_constants(*params.pgeom, params, *delta, *epsilon_t);
            out.mu0 = m.mu0;
            out.mu1 = m.mu1;
            out.mu2 = m.mu2;
        }
    }
    return out;
}

}  // namespace carlab
