#pragma once

// Numerical evaluation of both sides of the two Carleman estimates across an
// s-sweep, plus the absorption diagnostics J and J~ from the stability
// proofs. Every integral term is sampled once per field (quadrature weight,
// integrand, and weight phase per node) and then swept over s in log space.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "carlab/analysis.hpp"
#include "carlab/errors.hpp"
#include "carlab/field.hpp"
#include "carlab/geometry.hpp"
#include "carlab/numerics.hpp"
#include "carlab/solvers.hpp"
#include "carlab/weights.hpp"

namespace carlab {

namespace detail {

// Node samples of one integral term: log(quadrature weight * integrand) and
// the weight phase phi, so that the term at parameter s is
// s^power * sum exp(log_qg + 2 s phi).
struct TermSamples {
    std::vector<double> log_qg;
    std::vector<double> phi;
    int s_power = 0;

    LogScalar eval(double s) const {
        LogSumExpAccumulator acc;
        for (std::size_t i = 0; i < log_qg.size(); ++i) {
            acc.add_log(log_qg[i] + 2.0 * s * phi[i]);
        }
        if (acc.empty()) return LogScalar();
        return LogScalar::from_log(acc.log_value() + s_power * std::log(s));
    }
};

inline TermSamples collect_term(const SpaceTimeField& v, IntegrandKind integrand, int s_power,
                                const WeightParams& weight, const Region& region,
                                std::optional<double> weight_time = std::nullopt) {
    TermSamples term;
    term.s_power = s_power;
    FieldEval ev(v);
    for_each_region_node(v, region, [&](int it, int ix, double qw, const Point& x, double t,
                                        const BoundaryFace* face, int) {
        double g = 0.0;
        switch (integrand) {
            case IntegrandKind::AbsSq: g = sq(ev.value(it, ix)); break;
            case IntegrandKind::GradXT: g = ev.grad_xt_sq(it, ix); break;
            case IntegrandKind::GradX: g = ev.grad_x_sq(it, ix); break;
            case IntegrandKind::DtSq: g = sq(ev.dt(it, ix)); break;
            case IntegrandKind::HessianSq: g = ev.hessian_sq(it, ix); break;
            case IntegrandKind::NormalDerivSq:
                if (!face) throw GridMismatch("normal-derivative integrand needs a boundary region");
                g = sq(ev.normal_deriv(*face, it, ix));
                break;
        }
        if (g == 0.0 || qw == 0.0) return;
        term.log_qg.push_back(std::log(qw * g));
        term.phi.push_back(eval_phi(x, weight_time.value_or(t), weight));
    });
    return term;
}

inline void require_same_grid(const SpaceTimeField& v, const SpaceTimeField& F) {
    bool same = v.domain.kind == F.domain.kind && v.domain.nx == F.domain.nx &&
                v.domain.a1 == F.domain.a1 && v.domain.b1 == F.domain.b1 && v.nt == F.nt &&
                std::abs(v.dt - F.dt) < 1e-12 * std::max(v.dt, 1e-30) &&
                std::abs(v.t_start - F.t_start) < 1e-9 * std::max(1.0, std::abs(v.t_start));
    if (!same) throw GridMismatch("field and right-hand side live on different grids");
}

}  // namespace detail

struct CheckOptions {
    Coefficients coeffs;          // operator coefficients used by the residual check
    double residual_tol = 1e-2;   // relative to the discrete operator scale
    double boundary_tol = 1e-9;   // relative Dirichlet tolerance (hyperbolic check)
    bool skip_residual_check = false;
};

struct CheckRow {
    double s = 0.0;
    LogScalar lhs;
    std::vector<std::pair<std::string, LogScalar>> rhs;
    double ratio = 0.0;

    LogScalar rhs_total() const {
        LogScalar sum;
        for (const auto& [name, v] : rhs) sum = sum + v;
        return sum;
    }
};

struct CarlemanCheckReport {
    std::string lemma;
    double lambda = 0.0;
    double beta = 0.0;
    double t0 = 0.0;
    std::string field_id;
    std::vector<CheckRow> rows;
};

namespace detail {

// Discrete residual of the evolution equation against F over the interior of
// the given time window; `order` is 1 for parabolic, 2 for hyperbolic. The
// two layers beside the window ends are excluded: differencing a field that
// was itself produced by one-sided stencils is O(1) wrong exactly there.
inline void check_residual(const SpaceTimeField& v, const SpaceTimeField& F, const Coefficients& co,
                           int order, int it_lo, int it_hi, double tol) {
    FieldEval ev(v);
    const DomainSpec& dom = v.domain;
    std::vector<double> Lv(dom.node_count());
    CompensatedSum res2, scale2;
    for (int it = std::max(it_lo, 2); it <= std::min(it_hi, v.nt - 3); ++it) {
        apply_spatial_operator(dom, co, v.slice(it), Lv.data());
        for (int ix = 0; ix < dom.node_count(); ++ix) {
            if (dom.is_boundary_index(ix)) continue;
            double qw = dom.node_weight(ix) * v.dt;
            double dts = order == 2 ? ev.dtt(it, ix) : ev.dt(it, ix);
            double r = dts - Lv[ix] - F.at(it, ix);
            res2.add(qw * sq(r));
            scale2.add(qw * (sq(F.at(it, ix)) + sq(dts) + sq(Lv[ix])));
        }
    }
    double res = std::sqrt(std::max(0.0, res2.value()));
    double scale = std::sqrt(std::max(0.0, scale2.value()));
    if (scale == 0.0) return;  // identically zero data
    if (res > tol * scale) {
        throw ResidualTooLarge("field does not satisfy the equation: discrete residual " +
                               std::to_string(res) + " exceeds " + std::to_string(tol) +
                               " x operator scale " + std::to_string(scale));
    }
}

inline void check_dirichlet(const SpaceTimeField& v, double rel_tol) {
    double vmax = v.max_abs();
    if (vmax == 0.0) return;
    double worst = 0.0;
    for (int it = 0; it < v.nt; ++it) {
        for (int ix = 0; ix < v.nspace(); ++ix) {
            if (v.domain.is_boundary_index(ix)) worst = std::max(worst, std::abs(v.at(it, ix)));
        }
    }
    if (worst > rel_tol * vmax) {
        throw BoundaryViolation("field must vanish on the lateral boundary; max boundary value " +
                                std::to_string(worst));
    }
}

}  // namespace detail

// Both sides of the hyperbolic Carleman estimate for a field v solving the
// wave equation with right-hand side F on its (symmetric) time window. The
// right-hand side groups are the source integral, the Gamma flux, and the two
// time caps; the cap at the window's low end carries the weight evaluated at
// the center time t0, matching the estimate as stated.
inline CarlemanCheckReport check_lemma1(const SpaceTimeField& v, const SpaceTimeField& F,
                                        const ObservationGeometry& geom, const WeightParams& params,
                                        const CheckOptions& opts = {}) {
    params.validate();
    if (params.kind != WeightKind::HyperbolicShifted) {
        throw KindMismatch("lemma-1 check requires the hyperbolic shifted weight");
    }
    detail::require_same_grid(v, F);
    if (geom.gamma.empty()) throw EmptyGamma("observation boundary Gamma is empty");
    detail::check_dirichlet(v, opts.boundary_tol);
    if (!opts.skip_residual_check) {
        detail::check_residual(v, F, opts.coeffs, 2, 0, v.nt - 1, opts.residual_tol);
    }

    CarlemanCheckReport rep;
    rep.lemma = "lemma1";
    rep.lambda = params.lambda;
    rep.beta = params.beta;
    rep.t0 = params.t0;

    double t_lo = v.t_start, t_hi = v.t_end();
    Region full = Region::space_time();
    Region gamma_strip = Region::boundary(geom.gamma_faces());
    Region cap_hi = Region::time_slice(t_hi);
    Region cap_lo = Region::time_slice(t_lo);

    using detail::collect_term;
    auto lhs_grad = collect_term(v, IntegrandKind::GradXT, 1, params, full);
    auto lhs_abs = collect_term(v, IntegrandKind::AbsSq, 3, params, full);
    auto rhs_src = collect_term(F, IntegrandKind::AbsSq, 0, params, full);
    auto rhs_bnd = collect_term(v, IntegrandKind::NormalDerivSq, 1, params, gamma_strip);
    auto cap_hi_grad = collect_term(v, IntegrandKind::GradXT, 1, params, cap_hi);
    auto cap_hi_abs = collect_term(v, IntegrandKind::AbsSq, 3, params, cap_hi);
    auto cap_lo_grad = collect_term(v, IntegrandKind::GradXT, 1, params, cap_lo, params.t0);
    auto cap_lo_abs = collect_term(v, IntegrandKind::AbsSq, 3, params, cap_lo, params.t0);

    for (double s : params.s_sweep) {
        CheckRow row;
        row.s = s;
        row.lhs = lhs_grad.eval(s) + lhs_abs.eval(s);
        row.rhs.emplace_back("source", rhs_src.eval(s));
        row.rhs.emplace_back("boundary", rhs_bnd.eval(s));
        row.rhs.emplace_back("cap_high", cap_hi_grad.eval(s) + cap_hi_abs.eval(s));
        row.rhs.emplace_back("cap_low", cap_lo_grad.eval(s) + cap_lo_abs.eval(s));
        LogScalar total = row.rhs_total();
        row.ratio = (row.lhs.is_zero() && total.is_zero()) ? 0.0 : row.lhs.ratio_to(total);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

// Parabolic analogue on the interval I = (t0 - delta, t0 + delta): the
// left-hand side carries the 1/s second-derivative block, the right-hand
// side the source, the full lateral boundary with s^3, and the two slice
// terms at t0 +- delta weighted at t0 + delta.
inline CarlemanCheckReport check_lemma2(const SpaceTimeField& v, const SpaceTimeField& F,
                                        const ParabolicGeometry& pgeom, const WeightParams& params,
                                        double delta, const CheckOptions& opts = {}) {
    params.validate();
    if (params.kind != WeightKind::ParabolicPseudoconvex) {
        throw KindMismatch("lemma-2 check requires the parabolic pseudoconvex weight");
    }
    detail::require_same_grid(v, F);
    if (pgeom.domain.kind != v.domain.kind || pgeom.domain.a1 != v.domain.a1 ||
        pgeom.domain.b1 != v.domain.b1) {
        throw GridMismatch("pseudoconvex geometry and field live on different domains");
    }
    double t0 = params.t0;
    int it_lo = v.time_index(t0 - delta);
    int it_hi = v.time_index(t0 + delta);
    if (!opts.skip_residual_check) {
        detail::check_residual(v, F, opts.coeffs, 1, it_lo, it_hi, opts.residual_tol);
    }

    CarlemanCheckReport rep;
    rep.lemma = "lemma2";
    rep.lambda = params.lambda;
    rep.beta = params.beta;
    rep.t0 = t0;

    Region window = Region::space_time().windowed(t0 - delta, t0 + delta);
    Region all_faces = Region::boundary(v.domain.faces()).windowed(t0 - delta, t0 + delta);
    Region slice_hi = Region::time_slice(t0 + delta);
    Region slice_lo = Region::time_slice(t0 - delta);

    using detail::collect_term;
    auto lhs_dt = collect_term(v, IntegrandKind::DtSq, -1, params, window);
    auto lhs_hess = collect_term(v, IntegrandKind::HessianSq, -1, params, window);
    auto lhs_grad = collect_term(v, IntegrandKind::GradX, 1, params, window);
    auto lhs_abs = collect_term(v, IntegrandKind::AbsSq, 3, params, window);
    auto rhs_src = collect_term(F, IntegrandKind::AbsSq, 0, params, window);
    auto bnd_grad = collect_term(v, IntegrandKind::GradXT, 3, params, all_faces);
    auto bnd_abs = collect_term(v, IntegrandKind::AbsSq, 3, params, all_faces);
    auto sl_hi_grad = collect_term(v, IntegrandKind::GradX, 3, params, slice_hi);
    auto sl_hi_abs = collect_term(v, IntegrandKind::AbsSq, 3, params, slice_hi);
    auto sl_lo_grad = collect_term(v, IntegrandKind::GradX, 3, params, slice_lo, t0 + delta);
    auto sl_lo_abs = collect_term(v, IntegrandKind::AbsSq, 3, params, slice_lo, t0 + delta);

    for (double s : params.s_sweep) {
        CheckRow row;
        row.s = s;
        row.lhs = lhs_dt.eval(s) + lhs_hess.eval(s) + lhs_grad.eval(s) + lhs_abs.eval(s);
        row.rhs.emplace_back("source", rhs_src.eval(s));
        row.rhs.emplace_back("boundary", bnd_grad.eval(s) + bnd_abs.eval(s));
        row.rhs.emplace_back("slices", sl_hi_grad.eval(s) + sl_hi_abs.eval(s) + sl_lo_grad.eval(s) +
                                           sl_lo_abs.eval(s));
        LogScalar total = row.rhs_total();
        row.ratio = (row.lhs.is_zero() && total.is_zero()) ? 0.0 : row.lhs.ratio_to(total);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

struct AbsorptionRow {
    double s = 0.0;
    LogScalar J;
    LogScalar denominator;
    double ratio = 0.0;
    double decay = 0.0;  // s^3 e^{-c0 s} (hyperbolic) or s^2 e^{-2 s mu} (parabolic)
};

struct AbsorptionDiagnostics {
    std::string scenario;  // "hyperbolic" or "parabolic"
    std::optional<double> c0;
    std::optional<double> mu;
    std::vector<AbsorptionRow> rows;
};

// J(s) = integral over Omega x (0,T) of |dR/dt|^2 |f|^2 e^{2 s phi} against
// the denominator integral of |f|^2 e^{2 s phi(.,t0)}; the ratio is the
// absorption factor that must vanish for large s.
inline AbsorptionDiagnostics absorption_diagnostics_hyperbolic(const SourceSpec& source,
                                                               const ObservationGeometry& geom,
                                                               const WeightParams& params, double T,
                                                               int nt_quad = 401) {
    params.validate();
    if (params.kind != WeightKind::HyperbolicShifted) {
        throw KindMismatch("hyperbolic absorption requires the shifted weight");
    }
    const DomainSpec& dom = geom.domain;
    source.require_floor_hyperbolic(dom);
    if (static_cast<int>(source.f.size()) != dom.node_count()) {
        throw GridMismatch("source f sample count does not match the grid");
    }
    AbsorptionDiagnostics diag;
    diag.scenario = "hyperbolic";
    try {
        diag.c0 = hyperbolic_constants(geom, params, T).c0;
    } catch (const ParameterConflict& e) {
        throw ConditionViolation(e.condition(), e.what());
    }

    detail::TermSamples J, den;
    double dtq = T / (nt_quad - 1);
    for (int it = 0; it < nt_quad; ++it) {
        double t = it * dtq;
        double wt = trapezoid_weight(it, nt_quad, dtq);
        for (int ix = 0; ix < dom.node_count(); ++ix) {
            Point x = dom.node(ix);
            double g = sq(source.dRdt_at(x, t)) * sq(source.f[ix]);
            if (g == 0.0) continue;
            J.log_qg.push_back(std::log(wt * dom.node_weight(ix) * g));
            J.phi.push_back(eval_phi(x, t, params));
        }
    }
    for (int ix = 0; ix < dom.node_count(); ++ix) {
        Point x = dom.node(ix);
        double g = sq(source.f[ix]);
        if (g == 0.0) continue;
        den.log_qg.push_back(std::log(dom.node_weight(ix) * g));
        den.phi.push_back(eval_phi(x, params.t0, params));
    }

    for (double s : params.s_sweep) {
        AbsorptionRow row;
        row.s = s;
        row.J = J.eval(s);
        row.denominator = den.eval(s);
        row.ratio = row.J.ratio_to(row.denominator);
        row.decay = std::exp(3.0 * std::log(s) - *diag.c0 * s);
        diag.rows.push_back(row);
    }
    return diag;
}

// Parabolic analogue centered at t0 over I = (t0 - delta, t0 + delta) with
// the pseudoconvex weight.
inline AbsorptionDiagnostics absorption_diagnostics_parabolic(const SourceSpec& source,
                                                              const ParabolicGeometry& pgeom,
                                                              const WeightParams& params, double delta,
                                                              int nt_quad = 401) {
    params.validate();
    if (params.kind != WeightKind::ParabolicPseudoconvex) {
        throw KindMismatch("parabolic absorption requires the pseudoconvex weight");
    }
    const DomainSpec& dom = pgeom.domain;
    source.require_floor_parabolic(dom, params.t0);
    if (static_cast<int>(source.f.size()) != dom.node_count()) {
        throw GridMismatch("source f sample count does not match the grid");
    }
    AbsorptionDiagnostics diag;
    diag.scenario = "parabolic";
    try {
        diag.mu = parabolic_constants(pgeom, params, delta).mu;
    } catch (const ParameterConflict& e) {
        throw ConditionViolation(e.condition(), e.what());
    }

    detail::TermSamples J, den;
    double t_lo = params.t0 - delta;
    double dtq = 2.0 * delta / (nt_quad - 1);
    for (int it = 0; it < nt_quad; ++it) {
        double t = t_lo + it * dtq;
        double wt = trapezoid_weight(it, nt_quad, dtq);
        for (int ix = 0; ix < dom.node_count(); ++ix) {
            Point x = dom.node(ix);
            double g = sq(source.dRdt_at(x, t)) * sq(source.f[ix]);
            if (g == 0.0) continue;
            J.log_qg.push_back(std::log(wt * dom.node_weight(ix) * g));
            J.phi.push_back(eval_phi(x, t, params));
        }
    }
    for (int ix = 0; ix < dom.node_count(); ++ix) {
        Point x = dom.node(ix);
        double g = sq(source.f[ix]);
        if (g == 0.0) continue;
        den.log_qg.push_back(std::log(dom.node_weight(ix) * g));
        den.phi.push_back(eval_phi(x, params.t0, params));
    }

    for (double s : params.s_sweep) {
        AbsorptionRow row;
        row.s = s;
        row.J = J.eval(s);
        row.denominator = den.eval(s);
        row.ratio = row.J.ratio_to(row.denominator);
        row.decay = std::exp(2.0 * std::log(s) - 2.0 * *diag.mu * s);
        diag.rows.push_back(row);
    }
    return diag;
}

struct CheckFields {
    SpaceTimeField v;
    SpaceTimeField F;
};

// The objects the hyperbolic stability proof feeds into the estimate:
// y = dt u for the zero-data wave solve, extended oddly to (-T,T), together
// with its right-hand side dR/dt f. The zero Cauchy data make u extend
// evenly in time; differencing that even extension with centered stencils
// yields a y that is odd to the bit and free of one-sided artifacts at t=0.
inline CheckFields make_hyperbolic_check_fields(const DomainSpec& dom, const Coefficients& co,
                                              const SourceSpec& src, double T, double dt) {
    SpaceTimeField u = solve_wave_ibvp(dom, co, src, T, dt);
    SpaceTimeField u_even(dom, -u.t_end(), u.dt, 2 * u.nt - 1);
    for (int it = 0; it < u.nt; ++it) {
        const double* s = u.slice(it);
        double* pos = u_even.slice(u.nt - 1 + it);
        double* neg = u_even.slice(u.nt - 1 - it);
        for (int i = 0; i < u.nspace(); ++i) {
            pos[i] = s[i];
            neg[i] = s[i];
        }
    }
    SpaceTimeField F0(dom, 0.0, u.dt, u.nt);
    for (int it = 0; it < u.nt; ++it) {
        double t = F0.time(it);
        for (int i = 0; i < F0.nspace(); ++i) {
            F0.at(it, i) = src.dRdt_at(dom.node(i), t) * src.f[i];
        }
    }
    CheckFields out;
    out.v = time_derivative(u_even);
    out.F = extend_odd_rhs(F0);
    return out;
}

// The parabolic analogue: z = dt u for the heat solve on (0,T) with its
// right-hand side dR/dt f.
inline CheckFields make_parabolic_check_fields(const DomainSpec& dom, const Coefficients& co,
                                              const SourceSpec& src, const std::vector<double>& u0,
                                              double T, double dt) {
    HeatSolution sol = solve_heat(dom, co, src, u0, T, dt);
    CheckFields out;
    out.v = sol.dudt;
    out.F = SpaceTimeField(dom, 0.0, sol.u.dt, sol.u.nt);
    for (int it = 0; it < out.F.nt; ++it) {
        double t = out.F.time(it);
        for (int i = 0; i < out.F.nspace(); ++i) {
            out.F.at(it, i) = src.dRdt_at(dom.node(i), t) * src.f[i];
        }
    }
    return out;
}

}  // namespace carlab
