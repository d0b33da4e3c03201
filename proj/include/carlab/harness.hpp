#pragma once

// Estimate-level experiments over ensembles of random sources and initial
// data: the Lipschitz stability ratio for the wave source problem, the local
// Hoelder ratio for the heat source problem, the observability ratio for the
// free wave, and the interior Cauchy stability ratio for the free heat
// equation. Samples are independent and run in parallel with per-sample
// seeds; reports merge deterministically by sample index.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carlab/analysis.hpp"
#include "carlab/errors.hpp"
#include "carlab/geometry.hpp"
#include "carlab/numerics.hpp"
#include "carlab/solvers.hpp"
#include "carlab/weights.hpp"

namespace carlab {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class SourceFamily { FourierSine, NamedProfile };

struct EnsembleSpec {
    int n_samples = 50;
    int n_modes = 8;
    std::uint64_t seed = 42;
    std::vector<double> noise_levels;
    bool include_zero_sample = true;
    SourceFamily family = SourceFamily::FourierSine;
    std::function<double(Point)> profile;  // the named analytic profile

    void validate() const {
        if (n_samples < 1) throw ConfigError("ensemble requires n_samples >= 1");
        if (n_modes < 1) throw ConfigError("ensemble requires n_modes >= 1");
        if (family == SourceFamily::NamedProfile && !profile) {
            throw ConfigError("named-profile ensembles need a profile function");
        }
    }
};

// Truncated Fourier sine series with coefficients ~ N(0, k^{-2}); the draw is
// a closed form over the domain extents, so one draw can be sampled on every
// grid of a refinement ladder.
class FourierSource {
public:
    static FourierSource draw(const DomainSpec& dom, int modes, Rng& rng) {
        FourierSource f;
        f.dim_ = dom.dim();
        f.a1_ = dom.a1;
        f.l1_ = dom.length(0);
        f.a2_ = dom.a2;
        f.l2_ = dom.dim() == 2 ? dom.length(1) : 1.0;
        f.modes_ = modes;
        if (f.dim_ == 1) {
            f.coeff_.resize(modes);
            for (int k = 1; k <= modes; ++k) f.coeff_[k - 1] = rng.normal() / k;
        } else {
            f.coeff_.resize(static_cast<std::size_t>(modes) * modes);
            for (int k = 1; k <= modes; ++k) {
                for (int l = 1; l <= modes; ++l) {
                    f.coeff_[(k - 1) * modes + (l - 1)] = rng.normal() / std::sqrt(double(k) * k + double(l) * l);
                }
            }
        }
        return f;
    }

    double operator()(const Point& p) const {
        double s1 = M_PI * (p.x1 - a1_) / l1_;
        if (dim_ == 1) {
            double v = 0.0;
            for (int k = 1; k <= modes_; ++k) v += coeff_[k - 1] * std::sin(k * s1);
            return v;
        }
        double s2 = M_PI * (p.x2 - a2_) / l2_;
        double v = 0.0;
        for (int k = 1; k <= modes_; ++k) {
            for (int l = 1; l <= modes_; ++l) {
                v += coeff_[(k - 1) * modes_ + (l - 1)] * std::sin(k * s1) * std::sin(l * s2);
            }
        }
        return v;
    }

    std::vector<double> sample(const DomainSpec& dom) const {
        std::vector<double> v(dom.node_count());
        for (int i = 0; i < dom.node_count(); ++i) v[i] = (*this)(dom.node(i));
        return v;
    }

private:
    int dim_ = 1;
    int modes_ = 8;
    double a1_ = 0, l1_ = 1, a2_ = 0, l2_ = 1;
    std::vector<double> coeff_;
};

// Continuum sample i of an ensemble as a closed form, usable on every grid
// of a refinement ladder.
inline std::function<double(Point)> ensemble_sample(const EnsembleSpec& ens, const DomainSpec& dom,
                                                    int i) {
    if (ens.family == SourceFamily::NamedProfile) return ens.profile;
    Rng rng(mix_seed(ens.seed, i));
    auto fs = std::make_shared<FourierSource>(FourierSource::draw(dom, ens.n_modes, rng));
    return [fs](Point p) { return (*fs)(p); };
}

// Coefficient and source functions of a scenario as closed forms, so a
// refinement ladder can resample them on every grid.
struct ScenarioFunctions {
    std::function<double(Point)> b1, b2, c;
    std::function<double(Point, double)> R, dRdt;
    double r0 = 0.5;

    Coefficients coefficients(const DomainSpec& dom) const {
        return Coefficients::sampled(dom, b1, b2, c);
    }

    SourceSpec source(const DomainSpec& dom, std::vector<double> f) const {
        if (static_cast<int>(f.size()) != dom.node_count()) {
            throw GridMismatch("source sample count does not match the grid");
        }
        SourceSpec s;
        s.R = R;
        s.dRdt = dRdt;
        s.f = std::move(f);
        s.r0 = r0;
        return s;
    }
};

struct SampleRow {
    int grid = 0;
    int index = 0;  // -1: zero consistency row, -2: named profile (eigenmode)
    double sample_norm = 0.0;
    double data_norm = 0.0;
    double ratio = 0.0;
    bool consistency = false;
    std::string tag;
};

struct StabilityReport {
    std::string experiment;
    bool exploratory = false;
    std::vector<SampleRow> rows;
    std::map<int, double> max_ratio_by_grid;
    double max_ratio = 0.0;
    double median_ratio = 0.0;
    std::optional<double> theta_fit, fit_r2, theta_lower, c_emp;
    CarlemanConstants constants;
    std::optional<CauchySelection> cauchy_selection;
    std::map<std::string, double> extra;

    void finalize_ratio_stats() {
        std::vector<double> ratios;
        for (const auto& r : rows) {
            if (!r.consistency && std::isfinite(r.ratio)) ratios.push_back(r.ratio);
        }
        if (ratios.empty()) return;
        max_ratio = *std::max_element(ratios.begin(), ratios.end());
        std::sort(ratios.begin(), ratios.end());
        median_ratio = ratios[ratios.size() / 2];
        std::map<int, double> by_grid;
        for (const auto& r : rows) {
            if (!r.consistency && std::isfinite(r.ratio)) {
                by_grid[r.grid] = std::max(by_grid[r.grid], r.ratio);
            }
        }
        max_ratio_by_grid = std::move(by_grid);
    }
};

// Lipschitz stability surrogate: for each random source f solve the zero-data wave
// problem, measure D = ||dt dnu u|| on Gamma x (0,T), and record ||f||/D
// across a refinement ladder.
inline StabilityReport lipschitz_experiment(const EnsembleSpec& ensemble, const DomainSpec& base_domain,
                                            const Point& x0, const ScenarioFunctions& fns, double T,
                                            const std::vector<int>& grids, double dt_factor = 0.9,
                                            bool exploratory = false) {
    ensemble.validate();
    ObservationGeometry geom0 = compute_gamma(base_domain, x0);
    double crit = critical_time_hyperbolic(geom0);
    if (!exploratory && !(T > crit)) {
        throw ConditionViolation("(1.9)", "T=" + std::to_string(T) + " <= critical " + std::to_string(crit) +
                                              ": Theorem 1 hypothesis (1.9) fails");
    }

    StabilityReport rep;
    rep.experiment = "lipschitz";
    rep.exploratory = exploratory;

    // Draw the continuum sources once; they are grid-independent.
    std::vector<std::function<double(Point)>> sources;
    sources.reserve(ensemble.n_samples);
    for (int i = 0; i < ensemble.n_samples; ++i) {
        sources.push_back(ensemble_sample(ensemble, base_domain, i));
    }

    for (int nx : grids) {
        DomainSpec dom = base_domain;
        dom.nx = nx;
        ObservationGeometry geom = compute_gamma(dom, x0);
        Coefficients co = fns.coefficients(dom);
        double dt = dt_factor * cfl_limit(dom) / 0.9;
        SourceSpec probe = fns.source(dom, std::vector<double>(dom.node_count(), 0.0));
        probe.require_floor_hyperbolic(dom);

        std::vector<SampleRow> rows(ensemble.n_samples);
        parallel_for(ensemble.n_samples, [&](int i) {
            SourceSpec src = fns.source(dom, sample_on_grid(dom, sources[i]));
            SpaceTimeField u = solve_wave_ibvp(dom, co, src, T, dt);
            SampleRow row;
            row.grid = nx;
            row.index = i;
            row.sample_norm = l2_norm_spatial(dom, src.f);
            row.data_norm = boundary_flux_norm(u, geom.gamma_faces(), 0.0, T, /*differentiate_t=*/true);
            row.ratio = row.sample_norm / row.data_norm;
            rows[i] = row;
        });
        for (auto& r : rows) rep.rows.push_back(std::move(r));

        if (ensemble.include_zero_sample) {
            SourceSpec zero = fns.source(dom, std::vector<double>(dom.node_count(), 0.0));
            SpaceTimeField u = solve_wave_ibvp(dom, co, zero, T, dt);
            SampleRow row;
            row.grid = nx;
            row.index = -1;
            row.sample_norm = 0.0;
            row.data_norm = boundary_flux_norm(u, geom.gamma_faces(), 0.0, T, true);
            row.ratio = 0.0;
            row.consistency = true;
            row.tag = "zero";
            rep.rows.push_back(row);
        }
    }
    rep.finalize_ratio_stats();
    return rep;
}

// Data combination of the parabolic stability estimate:
// ||grad_{x,t} dt u|| + ||dt u|| on Gamma x (0,T) plus ||u(.,t0)||_{H^2}.
inline double holder_data_norm(const HeatSolution& sol, const std::vector<BoundaryFace>& gamma,
                               double t0) {
    WeightedIntegralSpec spec;
    spec.unit_weight = true;
    spec.s = 1.0;
    spec.s_power = 0;
    spec.region = Region::boundary(gamma);
    spec.integrand = IntegrandKind::GradXT;
    double grad_part = std::sqrt(weighted_integral(sol.dudt, spec));
    spec.integrand = IntegrandKind::AbsSq;
    double l2_part = std::sqrt(weighted_integral(sol.dudt, spec));
    double h2_part = sobolev_norm(sol.u, SobolevKind::H2, Region::time_slice(t0));
    return grad_part + l2_part + h2_part;
}

// (1.13) norm: ||u||_{H^2(0,T;H^1)} + ||u||_{H^1(0,T;H^2)}.
inline double apriori_norm_parabolic(const SpaceTimeField& u) {
    return sobolev_norm(u, SobolevKind::H2t_H1x) + sobolev_norm(u, SobolevKind::H1t_H2x);
}

// (5.8) norm: ||u||_{H^1(0,T;L^2)} + ||u||_{L^2(0,T;H^2)}.
inline double apriori_norm_cauchy(const SpaceTimeField& u) {
    return sobolev_norm(u, SobolevKind::H1t_L2x) + sobolev_norm(u, SobolevKind::L2t_H2x);
}

// Local Hoelder stability surrogate: per-sample ratio ||f||_{L^2(Omega_0)} / D~ plus an
// empirical Hoelder exponent from a geometric scaling family of one source.
inline StabilityReport holder_experiment(const EnsembleSpec& ensemble,
                                         const std::shared_ptr<const ParabolicGeometry>& pgeom,
                                         const ScenarioFunctions& fns, double T, double t0, double delta,
                                         double M_cap, int nx, double dt, double lambda = 0.5,
                                         int n_scaling = 5) {
    ensemble.validate();
    DomainSpec dom = pgeom->domain;
    dom.nx = nx;
    ParabolicGeometry pg_grid = *pgeom;
    pg_grid.domain = dom;
    auto pg = std::make_shared<const ParabolicGeometry>(pg_grid);
    Coefficients co = fns.coefficients(dom);
    SourceSpec probe = fns.source(dom, std::vector<double>(dom.node_count(), 0.0));
    probe.require_floor_parabolic(dom, t0);
    if (!(t0 - delta >= 0.0 && t0 + delta <= T)) {
        throw ConfigError("the interval (t0 - delta, t0 + delta) must lie inside (0, T)");
    }

    StabilityReport rep;
    rep.experiment = "holder";
    std::vector<BoundaryFace> gamma = {pg->gamma_face};

    double beta = select_beta_parabolic(*pg, delta);
    WeightParams wp = WeightParams::parabolic(pg, lambda, beta, t0);
    rep.constants = compute_constants(wp, std::nullopt, std::nullopt, delta, std::nullopt);
    rep.extra["beta"] = beta;

    std::vector<SampleRow> rows(ensemble.n_samples);
    parallel_for(ensemble.n_samples, [&](int i) {
        std::vector<double> f = sample_on_grid(dom, ensemble_sample(ensemble, dom, i));
        SourceSpec src = fns.source(dom, f);
        HeatSolution sol = solve_heat(dom, co, src, {}, T, dt);
        double M = apriori_norm_parabolic(sol.u);
        if (M > M_cap) {
            // The forward map is linear in f for zero initial data, so the
            // rescaled sample's solution is the rescaled solution.
            double scale = M_cap / M;
            for (double& v : sol.u.data) v *= scale;
            for (double& v : sol.dudt.data) v *= scale;
            for (double& v : src.f) v *= scale;
            M = M_cap;
        }
        SampleRow row;
        row.grid = nx;
        row.index = i;
        row.sample_norm = l2_norm_spatial(dom, src.f, pg->omega0);
        row.data_norm = holder_data_norm(sol, gamma, t0);
        if (row.sample_norm == 0.0) {
            // Sample supported outside Omega_0: its restricted norm carries
            // no information, so the row is a consistency record.
            row.consistency = true;
            row.tag = "outside_omega0";
        } else {
            row.ratio = row.sample_norm / row.data_norm;
            row.tag = sq(M) > sq(row.data_norm) ? "case1" : "case2";
        }
        rows[i] = row;
    });
    for (auto& r : rows) rep.rows.push_back(std::move(r));

    if (ensemble.include_zero_sample) {
        SourceSpec zero = fns.source(dom, std::vector<double>(dom.node_count(), 0.0));
        HeatSolution sol = solve_heat(dom, co, zero, {}, T, dt);
        SampleRow row;
        row.grid = nx;
        row.index = -1;
        row.data_norm = holder_data_norm(sol, gamma, t0);
        row.consistency = true;
        row.tag = "zero";
        rep.rows.push_back(row);
    }

    // Scaling family for the empirical exponent: the first sample scaled so
    // the cap never binds, levels geometric over two decades. The exponent
    // stays absent when too few levels give usable norms (a sample supported
    // outside Omega_0 has none).
    if (n_scaling < 4) {
        throw FitUnderdetermined("Hoelder exponent fit needs at least 4 scaling levels");
    }
    {
        std::vector<double> f_base = sample_on_grid(dom, ensemble_sample(ensemble, dom, 0));
        SourceSpec src0 = fns.source(dom, f_base);
        HeatSolution sol0 = solve_heat(dom, co, src0, {}, T, dt);
        double M0 = apriori_norm_parabolic(sol0.u);
        double top = (M0 > M_cap) ? M_cap / M0 : 1.0;
        std::vector<double> lx, ly;
        for (double eps : geometric_spaced(1e-2 * top, top, n_scaling)) {
            std::vector<double> f = f_base;
            for (double& v : f) v *= eps;
            SourceSpec src = fns.source(dom, f);
            HeatSolution sol = solve_heat(dom, co, src, {}, T, dt);
            double fn = l2_norm_spatial(dom, f, pg->omega0);
            double dn = holder_data_norm(sol, gamma, t0);
            if (fn > 0.0 && dn > 0.0) {
                lx.push_back(std::log(dn));
                ly.push_back(std::log(fn));
            }
        }
        if (static_cast<int>(lx.size()) >= 4) {
            LineFit fit = fit_line(lx, ly);
            rep.theta_fit = fit.slope;
            rep.fit_r2 = fit.r2;
        }
    }

    double c_emp = 0.0;
    for (const auto& r : rep.rows) {
        if (!r.consistency && std::isfinite(r.ratio)) c_emp = std::max(c_emp, r.ratio);
    }
    rep.c_emp = c_emp;
    if (rep.constants.mu) rep.theta_lower = *rep.constants.mu / (c_emp + *rep.constants.mu);

    rep.finalize_ratio_stats();
    return rep;
}

// Observability surrogate: free-wave runs from (u0, v0), ratio of the initial
// energy norms to the Gamma flux norm, with the kappa constants attached.
inline StabilityReport observability_experiment(const EnsembleSpec& ensemble,
                                                const DomainSpec& base_domain, const Point& x0,
                                                const ScenarioFunctions& fns, double T,
                                                const std::vector<int>& grids, double dt_factor = 0.9,
                                                double lambda = 0.5, bool exploratory = false) {
    ensemble.validate();
    ObservationGeometry geom0 = compute_gamma(base_domain, x0);
    double crit = critical_time_observability(geom0);
    if (!exploratory && !(T > crit)) {
        throw ConditionViolation("(5.1)", "T=" + std::to_string(T) + " <= critical " + std::to_string(crit) +
                                              ": the observability hypothesis (5.1) fails");
    }

    StabilityReport rep;
    rep.experiment = "observability";
    rep.exploratory = exploratory;

    if (!exploratory) {
        double beta = select_beta_observability(geom0, T);
        double delta = select_delta_observability(geom0, beta, T);
        WeightParams wp = WeightParams::hyperbolic(x0, lambda, beta, T / 2.0);
        rep.constants = compute_constants(wp, geom0, T, delta, std::nullopt);
        rep.extra["beta"] = beta;
        rep.extra["delta"] = delta;
    }

    struct Draw {
        std::function<double(Point)> u0, v0;
    };
    std::vector<Draw> draws;
    for (int i = 0; i < ensemble.n_samples; ++i) {
        if (ensemble.family == SourceFamily::NamedProfile) {
            draws.push_back({ensemble.profile, [](Point) { return 0.0; }});
            continue;
        }
        Rng rng(mix_seed(ensemble.seed, i));
        auto u0 = std::make_shared<FourierSource>(FourierSource::draw(base_domain, ensemble.n_modes, rng));
        auto v0 = std::make_shared<FourierSource>(FourierSource::draw(base_domain, ensemble.n_modes, rng));
        draws.push_back({[u0](Point p) { return (*u0)(p); }, [v0](Point p) { return (*v0)(p); }});
    }

    for (int nx : grids) {
        DomainSpec dom = base_domain;
        dom.nx = nx;
        ObservationGeometry geom = compute_gamma(dom, x0);
        Coefficients co = fns.coefficients(dom);
        double dt = dt_factor * cfl_limit(dom) / 0.9;

        // Named profile: the first eigenmode with zero velocity.
        {
            std::vector<double> u0(dom.node_count()), v0(dom.node_count(), 0.0);
            for (int i = 0; i < dom.node_count(); ++i) {
                Point p = dom.node(i);
                double v = std::sin(M_PI * (p.x1 - dom.a1) / dom.length(0));
                if (dom.dim() == 2) v *= std::sin(M_PI * (p.x2 - dom.a2) / dom.length(1));
                u0[i] = v;
            }
            SpaceTimeField u = solve_wave_free(dom, co, u0, v0, T, dt);
            SampleRow row;
            row.grid = nx;
            row.index = -2;
            row.sample_norm = h1_seminorm_spatial(dom, u0) + l2_norm_spatial(dom, v0);
            row.data_norm = boundary_flux_norm(u, geom.gamma_faces(), 0.0, T, false);
            row.ratio = row.sample_norm / row.data_norm;
            row.tag = "eigenmode";
            rep.rows.push_back(row);
        }

        std::vector<SampleRow> rows(ensemble.n_samples);
        parallel_for(ensemble.n_samples, [&](int i) {
            std::vector<double> u0 = sample_on_grid(dom, draws[i].u0);
            std::vector<double> v0 = sample_on_grid(dom, draws[i].v0);
            for (int k = 0; k < dom.node_count(); ++k) {
                if (dom.is_boundary_index(k)) u0[k] = 0.0;
            }
            SpaceTimeField u = solve_wave_free(dom, co, u0, v0, T, dt);
            SampleRow row;
            row.grid = nx;
            row.index = i;
            row.sample_norm = h1_seminorm_spatial(dom, u0) + l2_norm_spatial(dom, v0);
            row.data_norm = boundary_flux_norm(u, geom.gamma_faces(), 0.0, T, false);
            row.ratio = row.sample_norm / row.data_norm;
            rows[i] = row;
        });
        for (auto& r : rows) rep.rows.push_back(std::move(r));

        if (ensemble.include_zero_sample) {
            std::vector<double> z(dom.node_count(), 0.0);
            SpaceTimeField u = solve_wave_free(dom, co, z, z, T, dt);
            SampleRow row;
            row.grid = nx;
            row.index = -1;
            row.data_norm = boundary_flux_norm(u, geom.gamma_faces(), 0.0, T, false);
            row.consistency = true;
            row.tag = "zero";
            rep.rows.push_back(row);
        }
    }
    rep.finalize_ratio_stats();
    return rep;
}

// Interior Cauchy stability surrogate for the free heat equation: interior
// norm over Omega_0 x (eps, T - eps) against the Gamma Cauchy data norm, with
// the section 5-2 parameter selection and the mu constants attached.
inline StabilityReport cauchy_stability_experiment(const EnsembleSpec& ensemble,
                                                   const std::shared_ptr<const ParabolicGeometry>& pgeom,
                                                   const ScenarioFunctions& fns, double T, double epsilon,
                                                   double M_cap, int nx, double dt, double lambda = 0.5,
                                                   int n_scaling = 5) {
    ensemble.validate();
    if (!(epsilon > 0.0 && epsilon < 0.5 * T)) {
        throw ConfigError("epsilon must lie in (0, T/2) for the interior window (eps, T-eps)");
    }
    DomainSpec dom = pgeom->domain;
    dom.nx = nx;
    ParabolicGeometry pg_grid = *pgeom;
    pg_grid.domain = dom;
    auto pg = std::make_shared<const ParabolicGeometry>(pg_grid);
    Coefficients co = fns.coefficients(dom);

    StabilityReport rep;
    rep.experiment = "cauchy";
    std::vector<BoundaryFace> gamma = {pg->gamma_face};

    CauchySelection sel = select_cauchy_parameters(*pg, epsilon);
    rep.cauchy_selection = sel;
    WeightParams wp = WeightParams::parabolic(pg, lambda, sel.beta, 0.5 * T);
    CarlemanConstants mus = cauchy_constants(*pg, wp, sel.delta_tilde, sel.eps_tilde);
    rep.constants.mu0 = mus.mu0;
    rep.constants.mu1 = mus.mu1;
    rep.constants.mu2 = mus.mu2;
    rep.extra["beta"] = sel.beta;
    rep.extra["N"] = sel.N;

    // Snap the interior window to the time grid.
    int nt_probe = static_cast<int>(std::llround(T / dt)) + 1;
    double dt_actual = T / (nt_probe - 1);
    double eps_snapped = std::round(epsilon / dt_actual) * dt_actual;
    if (eps_snapped <= 0.0) eps_snapped = dt_actual;
    Region interior = Region::space_time().windowed(eps_snapped, T - eps_snapped).boxed(pg->omega0);
    rep.extra["epsilon"] = eps_snapped;

    auto interior_norm = [&](const SpaceTimeField& u) {
        return sobolev_norm(u, SobolevKind::H1t_L2x, interior) +
               sobolev_norm(u, SobolevKind::L2t_H2x, interior);
    };
    auto data_norm = [&](const SpaceTimeField& u) {
        WeightedIntegralSpec spec;
        spec.unit_weight = true;
        spec.region = Region::boundary(gamma);
        spec.integrand = IntegrandKind::GradXT;
        double g = std::sqrt(weighted_integral(u, spec));
        spec.integrand = IntegrandKind::AbsSq;
        double a = std::sqrt(weighted_integral(u, spec));
        return g + a;
    };

    auto run_sample = [&](const std::vector<double>& u0) {
        SourceSpec nosrc;
        nosrc.f.assign(dom.node_count(), 0.0);
        HeatSolution sol = solve_heat(dom, co, nosrc, u0, T, dt);
        return sol.u;
    };

    std::vector<SampleRow> rows(ensemble.n_samples);
    parallel_for(ensemble.n_samples, [&](int i) {
        std::vector<double> u0 = sample_on_grid(dom, ensemble_sample(ensemble, dom, i));
        SpaceTimeField u = run_sample(u0);
        double M = apriori_norm_cauchy(u);
        if (M > M_cap) {
            double scale = M_cap / M;
            for (double& v : u.data) v *= scale;
        }
        SampleRow row;
        row.grid = nx;
        row.index = i;
        row.sample_norm = interior_norm(u);
        row.data_norm = data_norm(u);
        if (row.sample_norm == 0.0) {
            row.consistency = true;
            row.tag = "outside_omega0";
        } else {
            row.ratio = row.sample_norm / row.data_norm;
        }
        rows[i] = row;
    });
    for (auto& r : rows) rep.rows.push_back(std::move(r));

    if (ensemble.include_zero_sample) {
        std::vector<double> z(dom.node_count(), 0.0);
        SpaceTimeField u = run_sample(z);
        SampleRow row;
        row.grid = nx;
        row.index = -1;
        row.sample_norm = interior_norm(u);
        row.data_norm = data_norm(u);
        row.consistency = true;
        row.tag = "zero";
        rep.rows.push_back(row);
    }

    // Scaling family from sample 0 for the empirical exponent.
    if (n_scaling < 4) {
        throw FitUnderdetermined("Cauchy exponent fit needs at least 4 scaling levels");
    }
    {
        std::vector<double> base = sample_on_grid(dom, ensemble_sample(ensemble, dom, 0));
        SpaceTimeField u_base = run_sample(base);
        double M0 = apriori_norm_cauchy(u_base);
        double top = (M0 > M_cap) ? M_cap / M0 : 1.0;
        std::vector<double> lx, ly;
        for (double eps : geometric_spaced(1e-2 * top, top, n_scaling)) {
            std::vector<double> u0 = base;
            for (double& v : u0) v *= eps;
            SpaceTimeField u = run_sample(u0);
            double in = interior_norm(u);
            double dn = data_norm(u);
            if (in > 0.0 && dn > 0.0) {
                lx.push_back(std::log(dn));
                ly.push_back(std::log(in));
            }
        }
        if (static_cast<int>(lx.size()) >= 4) {
            LineFit fit = fit_line(lx, ly);
            rep.theta_fit = fit.slope;
            rep.fit_r2 = fit.r2;
        }
    }

    rep.finalize_ratio_stats();
    return rep;
}

}  // namespace carlab
