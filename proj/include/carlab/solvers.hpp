#pragma once

// Finite-difference forward solvers: a leapfrog scheme for the hyperbolic
// problems (zero-data source problem and the free wave system) and backward
// Euler for the parabolic equation, all with homogeneous Dirichlet data,
// plus the odd time extension used to pass from (0,T) to (-T,T).

#include <functional>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "carlab/errors.hpp"
#include "carlab/field.hpp"
#include "carlab/geometry.hpp"
#include "carlab/numerics.hpp"

namespace carlab {

struct Coefficients {
    std::vector<double> b1;  // advection along x1, one value per node; empty = 0
    std::vector<double> b2;  // advection along x2 (2D only)
    std::vector<double> c;   // zeroth-order coefficient; empty = 0

    static Coefficients zero(const DomainSpec&) { return {}; }

    static Coefficients sampled(const DomainSpec& dom, const std::function<double(Point)>& b1f,
                                const std::function<double(Point)>& b2f,
                                const std::function<double(Point)>& cf) {
        Coefficients co;
        int n = dom.node_count();
        if (b1f) {
            co.b1.resize(n);
            for (int i = 0; i < n; ++i) co.b1[i] = b1f(dom.node(i));
        }
        if (b2f && dom.dim() == 2) {
            co.b2.resize(n);
            for (int i = 0; i < n; ++i) co.b2[i] = b2f(dom.node(i));
        }
        if (cf) {
            co.c.resize(n);
            for (int i = 0; i < n; ++i) co.c[i] = cf(dom.node(i));
        }
        co.validate(dom);
        return co;
    }

    void validate(const DomainSpec& dom) const {
        auto check = [&](const std::vector<double>& v, const char* name) {
            if (v.empty()) return;
            if (static_cast<int>(v.size()) != dom.node_count()) {
                throw GridMismatch(std::string(name) + " sample count does not match the grid");
            }
            for (double x : v) {
                if (!std::isfinite(x)) throw ConfigError(std::string(name) + " contains a non-finite entry");
            }
        };
        check(b1, "b1");
        check(b2, "b2");
        check(c, "c");
    }

    double b1_at(int i) const { return b1.empty() ? 0.0 : b1[i]; }
    double b2_at(int i) const { return b2.empty() ? 0.0 : b2[i]; }
    double c_at(int i) const { return c.empty() ? 0.0 : c[i]; }
};

struct SourceSpec {
    std::function<double(Point, double)> R;     // time factor R(x,t)
    std::function<double(Point, double)> dRdt;  // optional analytic derivative
    std::vector<double> f;                      // spatial source on the grid
    double r0 = 0.0;                            // positivity floor for |R|

    double R_at(const Point& x, double t) const { return R ? R(x, t) : 1.0; }

    double dRdt_at(const Point& x, double t) const {
        if (dRdt) return dRdt(x, t);
        if (!R) return 0.0;
        double h = 1e-6 * std::max(1.0, std::abs(t));
        return (R(x, t + h) - R(x, t - h)) / (2.0 * h);
    }

    // |R(x,0)| >= r0 > 0 over the closed domain, nodewise.
    void require_floor_hyperbolic(const DomainSpec& dom) const { require_floor(dom, 0.0, "(1.8)"); }

    // |R(x,t0)| >= r0 > 0, the parabolic analogue.
    void require_floor_parabolic(const DomainSpec& dom, double t0) const { require_floor(dom, t0, "(1.12)"); }

private:
    void require_floor(const DomainSpec& dom, double t, const char* cond) const {
        if (!(r0 > 0.0)) {
            throw ConditionViolation(cond, std::string("positivity floor r0 must be positive; condition ") +
                                               cond + " fails");
        }
        for (int i = 0; i < dom.node_count(); ++i) {
            double v = std::abs(R_at(dom.node(i), t));
            if (v < r0) {
                throw ConditionViolation(
                    cond, "|R(x," + std::to_string(t) + ")| = " + std::to_string(v) + " < r0 = " +
                              std::to_string(r0) + " at a grid node: condition " + std::string(cond) + " fails");
            }
        }
    }
};

// Applies L u = Laplacian u + b . grad u + c u (or its transpose) to one
// spatial slice; entries at boundary nodes are set to zero, matching the
// homogeneous Dirichlet convention used everywhere.
inline void apply_spatial_operator(const DomainSpec& dom, const Coefficients& co, const double* u,
                                   double* out, bool transpose = false) {
    int n = dom.nx;
    if (dom.dim() == 1) {
        double dx = dom.dx(0);
        out[0] = out[n - 1] = 0.0;
        for (int i = 1; i < n - 1; ++i) {
            double lap = (u[i - 1] - 2.0 * u[i] + u[i + 1]) / sq(dx);
            double adv;
            if (!transpose) {
                adv = co.b1_at(i) * (u[i + 1] - u[i - 1]) / (2.0 * dx);
            } else {
                double lo = (i - 1 >= 1) ? co.b1_at(i - 1) * u[i - 1] : 0.0;
                double hi = (i + 1 <= n - 2) ? co.b1_at(i + 1) * u[i + 1] : 0.0;
                adv = (lo - hi) / (2.0 * dx);
            }
            out[i] = lap + adv + co.c_at(i) * u[i];
        }
        return;
    }
    double dx1 = dom.dx(0), dx2 = dom.dx(1);
    for (int i = 0; i < dom.node_count(); ++i) out[i] = 0.0;
    for (int i1 = 1; i1 < n - 1; ++i1) {
        for (int i2 = 1; i2 < n - 1; ++i2) {
            int id = dom.flat_index(i1, i2);
            int xm = dom.flat_index(i1 - 1, i2), xp = dom.flat_index(i1 + 1, i2);
            int ym = dom.flat_index(i1, i2 - 1), yp = dom.flat_index(i1, i2 + 1);
            double lap = (u[xm] - 2.0 * u[id] + u[xp]) / sq(dx1) + (u[ym] - 2.0 * u[id] + u[yp]) / sq(dx2);
            double adv;
            if (!transpose) {
                adv = co.b1_at(id) * (u[xp] - u[xm]) / (2.0 * dx1) +
                      co.b2_at(id) * (u[yp] - u[ym]) / (2.0 * dx2);
            } else {
                double a1 = ((i1 - 1 >= 1) ? co.b1_at(xm) * u[xm] : 0.0) -
                            ((i1 + 1 <= n - 2) ? co.b1_at(xp) * u[xp] : 0.0);
                double a2 = ((i2 - 1 >= 1) ? co.b2_at(ym) * u[ym] : 0.0) -
                            ((i2 + 1 <= n - 2) ? co.b2_at(yp) * u[yp] : 0.0);
                adv = a1 / (2.0 * dx1) + a2 / (2.0 * dx2);
            }
            out[id] = lap + adv + co.c_at(id) * u[id];
        }
    }
}

inline double cfl_limit(const DomainSpec& dom) {
    if (dom.dim() == 1) return 0.9 * dom.dx(0);
    return 0.9 / std::sqrt(1.0 / sq(dom.dx(0)) + 1.0 / sq(dom.dx(1)));
}

namespace detail {

// Snap dt so T is an exact multiple; rounding up the step count keeps the
// actual dt at or below the requested one (the CFL bound stays satisfied).
inline int time_steps(double T, double& dt) {
    if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("solver requires T > 0 and dt > 0");
    int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
    steps = std::max(steps, 2);
    dt = T / steps;
    return steps + 1;
}

inline void enforce_cfl(const DomainSpec& dom, double dt) {
    double lim = cfl_limit(dom);
    if (dt > lim * (1.0 + 1e-12)) {
        throw CFLViolation("dt=" + std::to_string(dt) + " exceeds the leapfrog stability limit " +
                           std::to_string(lim) + " (0.9 dx for the standard scheme)");
    }
}

inline void check_stable(const SpaceTimeField& u, int it) {
    const double* s = u.slice(it);
    for (int i = 0; i < u.nspace(); ++i) {
        if (!std::isfinite(s[i])) {
            throw UnstableSolution("non-finite value at t=" + std::to_string(u.time(it)));
        }
    }
}

}  // namespace detail

// Leapfrog for dtt u - Lu = R(x,t) f(x) with u(.,0) = dt u(.,0) = 0 and u = 0
// on the boundary. First step from the Taylor expansion consistent with zero
// data: u^1 = dt^2/2 R(x,0) f(x).
inline SpaceTimeField solve_wave_ibvp(const DomainSpec& dom, const Coefficients& co,
                                      const SourceSpec& src, double T, double dt) {
    int nt = detail::time_steps(T, dt);
    detail::enforce_cfl(dom, dt);
    co.validate(dom);
    if (static_cast<int>(src.f.size()) != dom.node_count()) {
        throw GridMismatch("source f sample count does not match the grid");
    }
    SpaceTimeField u(dom, 0.0, dt, nt);
    int ns = dom.node_count();
    std::vector<double> Lu(ns);
    for (int i = 0; i < ns; ++i) {
        if (!dom.is_boundary_index(i)) {
            u.at(1, i) = 0.5 * sq(dt) * src.R_at(dom.node(i), 0.0) * src.f[i];
        }
    }
    for (int it = 1; it + 1 < nt; ++it) {
        double t = u.time(it);
        apply_spatial_operator(dom, co, u.slice(it), Lu.data());
        for (int i = 0; i < ns; ++i) {
            if (dom.is_boundary_index(i)) continue;
            u.at(it + 1, i) = 2.0 * u.at(it, i) - u.at(it - 1, i) +
                              sq(dt) * (Lu[i] + src.R_at(dom.node(i), t) * src.f[i]);
        }
        if (it % 64 == 0) detail::check_stable(u, it + 1);
    }
    detail::check_stable(u, nt - 1);
    return u;
}

// Homogeneous wave system with initial data (u0, v0); u0 must vanish on the
// boundary nodes.
inline SpaceTimeField solve_wave_free(const DomainSpec& dom, const Coefficients& co,
                                      const std::vector<double>& u0, const std::vector<double>& v0,
                                      double T, double dt) {
    int nt = detail::time_steps(T, dt);
    detail::enforce_cfl(dom, dt);
    co.validate(dom);
    int ns = dom.node_count();
    if (static_cast<int>(u0.size()) != ns || static_cast<int>(v0.size()) != ns) {
        throw GridMismatch("initial data sample count does not match the grid");
    }
    double scale = 0.0;
    for (double v : u0) scale = std::max(scale, std::abs(v));
    for (int i = 0; i < ns; ++i) {
        if (dom.is_boundary_index(i) && std::abs(u0[i]) > 1e-12 * std::max(1.0, scale)) {
            throw BoundaryViolation("free-wave initial state must vanish at boundary nodes");
        }
    }
    SpaceTimeField u(dom, 0.0, dt, nt);
    std::vector<double> Lu(ns);
    apply_spatial_operator(dom, co, u0.data(), Lu.data());
    for (int i = 0; i < ns; ++i) {
        if (dom.is_boundary_index(i)) continue;
        u.at(0, i) = u0[i];
        u.at(1, i) = u0[i] + dt * v0[i] + 0.5 * sq(dt) * Lu[i];
    }
    for (int it = 1; it + 1 < nt; ++it) {
        apply_spatial_operator(dom, co, u.slice(it), Lu.data());
        for (int i = 0; i < ns; ++i) {
            if (dom.is_boundary_index(i)) continue;
            u.at(it + 1, i) = 2.0 * u.at(it, i) - u.at(it - 1, i) + sq(dt) * Lu[i];
        }
        if (it % 64 == 0) detail::check_stable(u, it + 1);
    }
    detail::check_stable(u, nt - 1);
    return u;
}

struct HeatSolution {
    SpaceTimeField u;
    SpaceTimeField dudt;  // centered in time, one-sided second order at the ends
};

// Backward Euler for dt u - Lu = R(x,t) f(x), homogeneous Dirichlet data; no
// stability restriction on dt. The linear solve is tridiagonal in 1D and a
// sparse LU factorization in 2D.
inline HeatSolution solve_heat(const DomainSpec& dom, const Coefficients& co, const SourceSpec& src,
                               const std::vector<double>& u0, double T, double dt) {
    int nt = detail::time_steps(T, dt);
    co.validate(dom);
    int ns = dom.node_count();
    if (!src.f.empty() && static_cast<int>(src.f.size()) != ns) {
        throw GridMismatch("source f sample count does not match the grid");
    }
    if (!u0.empty() && static_cast<int>(u0.size()) != ns) {
        throw GridMismatch("initial state sample count does not match the grid");
    }
    SpaceTimeField u(dom, 0.0, dt, nt);
    if (!u0.empty()) {
        for (int i = 0; i < ns; ++i) {
            if (!dom.is_boundary_index(i)) u.at(0, i) = u0[i];
        }
    }

    auto f_at = [&](int i) { return src.f.empty() ? 0.0 : src.f[i]; };

    if (dom.dim() == 1) {
        int n = dom.nx;
        int m = n - 2;  // interior unknowns
        double dx = dom.dx(0);
        std::vector<double> lower(m), diag(m), upper(m), rhs(m);
        for (int k = 0; k < m; ++k) {
            int i = k + 1;
            diag[k] = 1.0 + 2.0 * dt / sq(dx) - dt * co.c_at(i);
            lower[k] = -dt * (1.0 / sq(dx) - co.b1_at(i) / (2.0 * dx));
            upper[k] = -dt * (1.0 / sq(dx) + co.b1_at(i) / (2.0 * dx));
        }
        for (int it = 0; it + 1 < nt; ++it) {
            double tn = u.time(it + 1);
            for (int k = 0; k < m; ++k) {
                int i = k + 1;
                rhs[k] = u.at(it, i) + dt * src.R_at(dom.node(i), tn) * f_at(i);
            }
            std::vector<double> sol = solve_tridiagonal(lower, diag, upper, rhs);
            for (int k = 0; k < m; ++k) u.at(it + 1, k + 1) = sol[k];
        }
    } else {
        int n = dom.nx;
        std::vector<int> id(ns, -1);
        int m = 0;
        for (int i = 0; i < ns; ++i) {
            if (!dom.is_boundary_index(i)) id[i] = m++;
        }
        double dx1 = dom.dx(0), dx2 = dom.dx(1);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(5) * m);
        for (int i1 = 1; i1 < n - 1; ++i1) {
            for (int i2 = 1; i2 < n - 1; ++i2) {
                int flat = dom.flat_index(i1, i2);
                int row = id[flat];
                trip.emplace_back(row, row,
                                  1.0 + 2.0 * dt / sq(dx1) + 2.0 * dt / sq(dx2) - dt * co.c_at(flat));
                auto couple = [&](int f2, double coeff) {
                    if (id[f2] >= 0) trip.emplace_back(row, id[f2], coeff);
                };
                couple(dom.flat_index(i1 - 1, i2), -dt * (1.0 / sq(dx1) - co.b1_at(flat) / (2.0 * dx1)));
                couple(dom.flat_index(i1 + 1, i2), -dt * (1.0 / sq(dx1) + co.b1_at(flat) / (2.0 * dx1)));
                couple(dom.flat_index(i1, i2 - 1), -dt * (1.0 / sq(dx2) - co.b2_at(flat) / (2.0 * dx2)));
                couple(dom.flat_index(i1, i2 + 1), -dt * (1.0 / sq(dx2) + co.b2_at(flat) / (2.0 * dx2)));
            }
        }
        Eigen::SparseMatrix<double> A(m, m);
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success) {
            throw LinearSolveFailure("sparse LU factorization of the implicit heat operator failed");
        }
        Eigen::VectorXd rhs(m), sol(m);
        for (int it = 0; it + 1 < nt; ++it) {
            double tn = u.time(it + 1);
            for (int i = 0; i < ns; ++i) {
                if (id[i] >= 0) rhs[id[i]] = u.at(it, i) + dt * src.R_at(dom.node(i), tn) * f_at(i);
            }
            sol = lu.solve(rhs);
            if (lu.info() != Eigen::Success) throw LinearSolveFailure("implicit heat solve failed");
            for (int i = 0; i < ns; ++i) {
                if (id[i] >= 0) u.at(it + 1, i) = sol[id[i]];
            }
        }
    }
    detail::check_stable(u, nt - 1);

    HeatSolution out;
    out.dudt = SpaceTimeField(dom, 0.0, dt, nt);
    for (int it = 0; it < nt; ++it) {
        for (int i = 0; i < ns; ++i) {
            double v;
            if (it == 0) {
                v = (-3.0 * u.at(0, i) + 4.0 * u.at(1, i) - u.at(2, i)) / (2.0 * dt);
            } else if (it == nt - 1) {
                v = (3.0 * u.at(it, i) - 4.0 * u.at(it - 1, i) + u.at(it - 2, i)) / (2.0 * dt);
            } else {
                v = (u.at(it + 1, i) - u.at(it - 1, i)) / (2.0 * dt);
            }
            out.dudt.at(it, i) = v;
        }
    }
    out.u = std::move(u);
    return out;
}

// Odd extension from (0,T) to (-T,T): y(.,-t) = -y(.,t), exact by
// construction; the center slice is the fixed point of the symmetry and is
// set to zero. Requires a vanishing trace at t=0.
inline SpaceTimeField extend_odd(const SpaceTimeField& f, double trace_tol = 1e-10) {
    if (std::abs(f.t_start) > 1e-12 * std::max(1.0, std::abs(f.t_end()))) {
        throw GridMismatch("extend_odd expects a field starting at t=0");
    }
    double trace = 0.0;
    for (int c = 0; c < f.ncomp; ++c) {
        const double* s = f.slice(0, c);
        for (int i = 0; i < f.nspace(); ++i) trace = std::max(trace, std::abs(s[i]));
    }
    if (trace > trace_tol) {
        throw NonzeroTrace("field trace at t=0 has max-norm " + std::to_string(trace) +
                           " > " + std::to_string(trace_tol) + "; the odd extension would lose regularity");
    }
    SpaceTimeField out(f.domain, -f.t_end(), f.dt, 2 * f.nt - 1, f.ncomp);
    for (int it = 1; it < f.nt; ++it) {
        for (int c = 0; c < f.ncomp; ++c) {
            const double* src = f.slice(it, c);
            double* pos = out.slice(f.nt - 1 + it, c);
            double* neg = out.slice(f.nt - 1 - it, c);
            for (int i = 0; i < f.nspace(); ++i) {
                pos[i] = src[i];
                neg[i] = -src[i];
            }
        }
    }
    return out;
}

// Odd extension for an attached right-hand side: same reflection, but the
// trace at t=0 need not vanish (the equation only holds almost everywhere in
// time); the center slice takes the mean of the two one-sided limits, zero.
inline SpaceTimeField extend_odd_rhs(const SpaceTimeField& f) {
    return extend_odd(f, std::numeric_limits<double>::infinity());
}

inline std::vector<double> sample_on_grid(const DomainSpec& dom, const std::function<double(Point)>& f) {
    std::vector<double> v(dom.node_count());
    for (int i = 0; i < dom.node_count(); ++i) v[i] = f(dom.node(i));
    return v;
}

}  // namespace carlab
