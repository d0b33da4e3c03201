#pragma once

// Spatial domains (1D intervals, 2D rectangles), the observation boundary
// Gamma seen from an exterior point x0, the distance extremes d0/d1 with the
// critical observation times they induce, and the pseudoconvex profile d(x)
// on an extended domain Omega_1 used by the parabolic weight.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "carlab/errors.hpp"
#include "carlab/numerics.hpp"

namespace carlab {

struct Point {
    double x1 = 0.0;
    double x2 = 0.0;
};

enum class DomainKind { Interval, Rectangle };

// One face of the boundary: `axis` is the normal direction, `side` picks the
// low (-1) or high (+1) end, `coord` is the face's coordinate on that axis.
// The outward unit normal is side * e_axis, exact for these domains.
struct BoundaryFace {
    int axis = 0;
    int side = +1;
    double coord = 0.0;

    std::string name() const {
        if (axis == 0) return side < 0 ? "left" : "right";
        return side < 0 ? "bottom" : "top";
    }

    bool operator==(const BoundaryFace& o) const {
        return axis == o.axis && side == o.side;
    }
};

struct DomainSpec {
    DomainKind kind = DomainKind::Interval;
    double a1 = 0.0, b1 = 1.0;
    double a2 = 0.0, b2 = 1.0;
    int nx = 3;  // grid points per axis

    static DomainSpec interval(double a, double b, int nx) {
        if (!(b > a)) throw ConfigError("interval requires b > a");
        if (nx < 3) throw ConfigError("interval requires nx >= 3");
        DomainSpec d;
        d.kind = DomainKind::Interval;
        d.a1 = a;
        d.b1 = b;
        d.nx = nx;
        return d;
    }

    static DomainSpec rectangle(double a1, double b1, double a2, double b2, int nx) {
        if (!(b1 > a1 && b2 > a2)) throw ConfigError("rectangle requires b > a on both axes");
        if (nx < 3) throw ConfigError("rectangle requires nx >= 3");
        DomainSpec d;
        d.kind = DomainKind::Rectangle;
        d.a1 = a1;
        d.b1 = b1;
        d.a2 = a2;
        d.b2 = b2;
        d.nx = nx;
        return d;
    }

    int dim() const { return kind == DomainKind::Interval ? 1 : 2; }

    double lo(int axis) const { return axis == 0 ? a1 : a2; }
    double hi(int axis) const { return axis == 0 ? b1 : b2; }
    double length(int axis) const { return hi(axis) - lo(axis); }
    double dx(int axis = 0) const { return length(axis) / (nx - 1); }

    double diameter() const {
        if (dim() == 1) return length(0);
        return std::sqrt(sq(length(0)) + sq(length(1)));
    }

    int node_count() const { return dim() == 1 ? nx : nx * nx; }

    // 2D flat layout: index = i1 * nx + i2 (x2 fastest).
    Point node(int flat) const {
        if (dim() == 1) return {a1 + flat * dx(0), 0.0};
        int i1 = flat / nx;
        int i2 = flat % nx;
        return {a1 + i1 * dx(0), a2 + i2 * dx(1)};
    }

    int flat_index(int i1, int i2 = 0) const { return dim() == 1 ? i1 : i1 * nx + i2; }

    bool is_boundary_index(int flat) const {
        if (dim() == 1) return flat == 0 || flat == nx - 1;
        int i1 = flat / nx;
        int i2 = flat % nx;
        return i1 == 0 || i1 == nx - 1 || i2 == 0 || i2 == nx - 1;
    }

    // Product trapezoid weight of a node.
    double node_weight(int flat) const {
        if (dim() == 1) return trapezoid_weight(flat, nx, dx(0));
        int i1 = flat / nx;
        int i2 = flat % nx;
        return trapezoid_weight(i1, nx, dx(0)) * trapezoid_weight(i2, nx, dx(1));
    }

    bool contains_closure(const Point& p, double tol = 0.0) const {
        bool in1 = p.x1 >= a1 - tol && p.x1 <= b1 + tol;
        if (dim() == 1) return in1;
        return in1 && p.x2 >= a2 - tol && p.x2 <= b2 + tol;
    }

    std::vector<BoundaryFace> faces() const {
        std::vector<BoundaryFace> f;
        f.push_back({0, -1, a1});
        f.push_back({0, +1, b1});
        if (dim() == 2) {
            f.push_back({1, -1, a2});
            f.push_back({1, +1, b2});
        }
        return f;
    }

    BoundaryFace face_by_name(const std::string& name) const {
        for (const auto& f : faces()) {
            if (f.name() == name) return f;
        }
        throw ConfigError("unknown boundary face '" + name + "' for this domain");
    }
};

inline double distance(const Point& a, const Point& b, int dim) {
    double d2 = sq(a.x1 - b.x1);
    if (dim > 1) d2 += sq(a.x2 - b.x2);
    return std::sqrt(d2);
}

// Nodes lying on a boundary face, in tangential order (a single node in 1D).
inline std::vector<int> face_node_indices(const DomainSpec& domain, const BoundaryFace& face) {
    std::vector<int> idx;
    if (domain.dim() == 1) {
        idx.push_back(face.side < 0 ? 0 : domain.nx - 1);
        return idx;
    }
    int fixed = face.side < 0 ? 0 : domain.nx - 1;
    for (int k = 0; k < domain.nx; ++k) {
        idx.push_back(face.axis == 0 ? domain.flat_index(fixed, k) : domain.flat_index(k, fixed));
    }
    return idx;
}

// Quadrature weight of a face node in the surface measure (counting measure
// on endpoints in 1D, trapezoid along the face in 2D).
inline double face_node_weight(const DomainSpec& domain, const BoundaryFace& face, int k) {
    if (domain.dim() == 1) return 1.0;
    int tangent = 1 - face.axis;
    return trapezoid_weight(k, domain.nx, domain.dx(tangent));
}

// A (possibly partial) face together with its tangential parameter interval.
// For interval/rectangle domains the dot product (x-x0).nu is constant along
// each face, so the segments produced by compute_gamma are always full faces.
struct FaceSegment {
    BoundaryFace face;
    double t_lo = 0.0;
    double t_hi = 0.0;
};

struct ObservationGeometry {
    DomainSpec domain;
    Point x0;
    std::vector<FaceSegment> gamma;
    double d0 = 0.0;
    double d1 = 0.0;

    bool face_in_gamma(const BoundaryFace& f) const {
        for (const auto& seg : gamma) {
            if (seg.face == f) return true;
        }
        return false;
    }

    std::vector<BoundaryFace> gamma_faces() const {
        std::vector<BoundaryFace> out;
        for (const auto& seg : gamma) out.push_back(seg.face);
        return out;
    }
};

// Gamma = { x on the boundary : (x - x0) . nu(x) >= 0 }, resolved per face;
// d0/d1 are the exact distance extremes over the closed domain.
inline ObservationGeometry compute_gamma(const DomainSpec& domain, const Point& x0) {
    if (domain.contains_closure(x0)) {
        throw X0InsideDomain("x0 = (" + std::to_string(x0.x1) + ", " + std::to_string(x0.x2) +
                             ") lies in the closure of the domain; Gamma via (1.7) requires an exterior point");
    }
    ObservationGeometry g;
    g.domain = domain;
    g.x0 = x0;
    for (const auto& f : domain.faces()) {
        double x0n = f.axis == 0 ? x0.x1 : x0.x2;
        double dot = f.side * (f.coord - x0n);  // (x - x0) . nu, constant on the face
        if (dot >= 0.0) {
            int tangent = 1 - f.axis;
            FaceSegment seg;
            seg.face = f;
            if (domain.dim() == 2) {
                seg.t_lo = domain.lo(tangent);
                seg.t_hi = domain.hi(tangent);
            }
            g.gamma.push_back(seg);
        }
    }
    // Nearest point of the closed box, then the farthest corner.
    Point nearest{std::clamp(x0.x1, domain.a1, domain.b1), 0.0};
    double far2 = std::max(sq(domain.a1 - x0.x1), sq(domain.b1 - x0.x1));
    if (domain.dim() == 2) {
        nearest.x2 = std::clamp(x0.x2, domain.a2, domain.b2);
        far2 += std::max(sq(domain.a2 - x0.x2), sq(domain.b2 - x0.x2));
    }
    g.d0 = distance(nearest, x0, domain.dim());
    g.d1 = std::sqrt(far2);
    return g;
}

inline double critical_time_hyperbolic(const ObservationGeometry& geom) {
    return std::sqrt(sq(geom.d1) - sq(geom.d0));
}

inline double critical_time_observability(const ObservationGeometry& geom) {
    return 2.0 * critical_time_hyperbolic(geom);
}

// beta in (0,1) with T sqrt(beta) > sqrt(d1^2 - d0^2), midpoint of the
// admissible interval ((d1^2-d0^2)/T^2, 1).
inline double select_beta_hyperbolic(const ObservationGeometry& geom, double T) {
    if (T <= 0.0) throw TimeBelowCritical("select_beta_hyperbolic: T must be positive");
    double lo = (sq(geom.d1) - sq(geom.d0)) / sq(T);
    if (lo >= 1.0) {
        throw TimeBelowCritical("T=" + std::to_string(T) + " <= critical time " +
                                std::to_string(critical_time_hyperbolic(geom)) +
                                ": no beta in (0,1) satisfies (3.3)");
    }
    return 0.5 * (lo + 1.0);
}

// Observability analogue: T sqrt(beta) > 2 sqrt(d1^2 - d0^2), admissible
// interval (4(d1^2-d0^2)/T^2, 1), midpoint.
inline double select_beta_observability(const ObservationGeometry& geom, double T) {
    if (T <= 0.0) throw TimeBelowCritical("select_beta_observability: T must be positive");
    double lo = 4.0 * (sq(geom.d1) - sq(geom.d0)) / sq(T);
    if (lo >= 1.0) {
        throw TimeBelowCritical("T=" + std::to_string(T) + " <= critical time " +
                                std::to_string(critical_time_observability(geom)) +
                                ": no beta in (0,1) satisfies (5.4)");
    }
    return 0.5 * (lo + 1.0);
}

// Half the largest delta with T > 2 sqrt(d1^2 - d0^2 + beta delta^2)/sqrt(beta),
// which makes kappa_2 > kappa_1 per (5.6).
inline double select_delta_observability(const ObservationGeometry& geom, double beta, double T) {
    double dmax2 = sq(T) / 4.0 - (sq(geom.d1) - sq(geom.d0)) / beta;
    if (dmax2 <= 0.0) {
        throw ParameterConflict("(5.4)", "no delta > 0 satisfies (5.6) for beta=" + std::to_string(beta) +
                                             ", T=" + std::to_string(T));
    }
    return 0.5 * std::sqrt(dmax2);
}

struct Box {
    double lo1 = 0.0, hi1 = 0.0;
    double lo2 = 0.0, hi2 = 0.0;

    double lo(int axis) const { return axis == 0 ? lo1 : lo2; }
    double hi(int axis) const { return axis == 0 ? hi1 : hi2; }

    bool contains(const Point& p, int dim, double tol = 0.0) const {
        bool in1 = p.x1 >= lo1 - tol && p.x1 <= hi1 + tol;
        if (dim == 1) return in1;
        return in1 && p.x2 >= lo2 - tol && p.x2 <= hi2 + tol;
    }

    bool contains_strict(const Point& p, int dim, double tol = 0.0) const {
        bool in1 = p.x1 > lo1 + tol && p.x1 < hi1 - tol;
        if (dim == 1) return in1;
        return in1 && p.x2 > lo2 + tol && p.x2 < hi2 - tol;
    }
};

// Pseudoconvex geometry for the parabolic weight. The profile is a closed
// form: along the axis normal to Gamma, g rises like a power from the far
// side of Omega_1 and drops to zero at the extended end, with its unique
// maximizer inside the control region omega; tangentially (2D) it is scaled
// by a parabola vanishing on the tangential boundary of Omega_1.
struct ParabolicGeometry {
    DomainSpec domain;
    BoundaryFace gamma_face;
    double eta = 0.0;  // extension width beyond the Gamma face
    int p = 0;         // profile exponent
    Box omega;         // control region, closure inside Omega_1 \ closure(Omega)
    Box omega0;        // interior subdomain, closure inside Omega united with Gamma
    Box omega1;        // extended domain

    double critical_point = 0.0;  // maximizer of g on the normal axis

    std::vector<FaceSegment> gamma_segments() const {
        FaceSegment seg;
        seg.face = gamma_face;
        if (domain.dim() == 2) {
            int tangent = 1 - gamma_face.axis;
            seg.t_lo = domain.lo(tangent);
            seg.t_hi = domain.hi(tangent);
        }
        return {seg};
    }

    // Normal-axis profile and derivative.
    double g(double xi) const {
        int n = gamma_face.axis;
        if (gamma_face.side > 0) {
            double u = xi - domain.lo(n);
            double B = gamma_face.coord + eta;
            return std::pow(u, p) * (B - xi);
        }
        double u = domain.hi(n) - xi;
        double A = gamma_face.coord - eta;
        return std::pow(u, p) * (xi - A);
    }

    double g_prime(double xi) const {
        int n = gamma_face.axis;
        if (gamma_face.side > 0) {
            double u = xi - domain.lo(n);
            double B = gamma_face.coord + eta;
            return std::pow(u, p - 1) * (p * (B - xi) - u);
        }
        double u = domain.hi(n) - xi;
        double A = gamma_face.coord - eta;
        return -std::pow(u, p - 1) * (p * (xi - A) - u);
    }

    // Tangential profile, normalized to peak value 1.
    double h(double tau) const {
        if (domain.dim() == 1) return 1.0;
        int tangent = 1 - gamma_face.axis;
        double a = domain.lo(tangent), b = domain.hi(tangent);
        return 4.0 * (tau - a) * (b - tau) / sq(b - a);
    }

    double h_prime(double tau) const {
        if (domain.dim() == 1) return 0.0;
        int tangent = 1 - gamma_face.axis;
        double a = domain.lo(tangent), b = domain.hi(tangent);
        return 4.0 * (a + b - 2.0 * tau) / sq(b - a);
    }

    double d(const Point& pt) const {
        double xi = gamma_face.axis == 0 ? pt.x1 : pt.x2;
        if (domain.dim() == 1) return g(xi);
        double tau = gamma_face.axis == 0 ? pt.x2 : pt.x1;
        return g(xi) * h(tau);
    }

    std::array<double, 2> grad_d(const Point& pt) const {
        double xi = gamma_face.axis == 0 ? pt.x1 : pt.x2;
        if (domain.dim() == 1) return {g_prime(xi), 0.0};
        double tau = gamma_face.axis == 0 ? pt.x2 : pt.x1;
        double dn = g_prime(xi) * h(tau);
        double dt = g(xi) * h_prime(tau);
        if (gamma_face.axis == 0) return {dn, dt};
        return {dt, dn};
    }

    // Extremes of d over an axis-aligned box, exact by unimodality of g and h
    // and nonnegativity of both factors.
    double d_min_on(const Box& box) const {
        int n = gamma_face.axis;
        double gmin = std::min(g(box.lo(n)), g(box.hi(n)));
        if (domain.dim() == 1) return gmin;
        int tangent = 1 - n;
        double hmin = std::min(h(box.lo(tangent)), h(box.hi(tangent)));
        return gmin * hmin;
    }

    double d_max_on(const Box& box) const {
        int n = gamma_face.axis;
        double gmax = std::max(g(box.lo(n)), g(box.hi(n)));
        if (critical_point > box.lo(n) && critical_point < box.hi(n)) {
            gmax = std::max(gmax, g(critical_point));
        }
        if (domain.dim() == 1) return gmax;
        int tangent = 1 - n;
        double a = domain.lo(tangent), b = domain.hi(tangent);
        double mid = 0.5 * (a + b);
        double hmax = std::max(h(box.lo(tangent)), h(box.hi(tangent)));
        if (mid > box.lo(tangent) && mid < box.hi(tangent)) hmax = 1.0;
        return gmax * hmax;
    }

    Box domain_box() const {
        Box b;
        b.lo1 = domain.a1;
        b.hi1 = domain.b1;
        b.lo2 = domain.a2;
        b.hi2 = domain.b2;
        return b;
    }

    double d_min_omega0() const { return d_min_on(omega0); }
    double d_max_domain() const { return d_max_on(domain_box()); }
};

namespace detail {

// Admissible real interval for the exponent p so that the maximizer of g
// lies inside the normal-axis window (w_lo, w_hi) of omega.
inline std::pair<double, double> exponent_interval(double a, double B, double w_lo, double w_hi) {
    auto p_for = [&](double w) {
        double r = (w - a) / (B - a);
        return r / (1.0 - r);
    };
    return {p_for(w_lo), p_for(w_hi)};
}

}  // namespace detail

// Builds Omega_1 = Omega extended by eta beyond the Gamma face, the control
// region omega (default: middle third of the extension), the subdomain
// Omega_0 (default: a box hugging the Gamma side), and the profile exponent.
// The exponent defaults to max(2, ceil(2 L / eta)) whenever that places the
// maximizer inside omega, otherwise the smallest admissible integer is used.
inline ParabolicGeometry construct_d(const DomainSpec& domain, const BoundaryFace& gamma, double eta,
                                     std::optional<Box> omega_bounds = std::nullopt,
                                     std::optional<Box> omega0_bounds = std::nullopt) {
    if (eta <= 0.0) throw ConfigError("construct_d requires eta > 0");
    ParabolicGeometry pg;
    pg.domain = domain;
    pg.gamma_face = gamma;
    pg.eta = eta;

    int n = gamma.axis;
    double a = domain.lo(n), b = domain.hi(n);
    double L = b - a;

    // Work in mirrored coordinates when Gamma is the low face: the profile
    // formulas above already handle the mirror, so only the extension
    // interval differs below.
    double ext_lo = gamma.side > 0 ? b : a - eta;     // extension region on the normal axis
    double ext_hi = gamma.side > 0 ? b + eta : a;

    Box omega;
    if (omega_bounds) {
        omega = *omega_bounds;
    } else {
        double third = eta / 3.0;
        if (n == 0) {
            omega.lo1 = ext_lo + third;
            omega.hi1 = ext_hi - third;
        } else {
            omega.lo2 = ext_lo + third;
            omega.hi2 = ext_hi - third;
        }
        if (domain.dim() == 2) {
            int tangent = 1 - n;
            double ta = domain.lo(tangent), tb = domain.hi(tangent);
            double inset = 0.25 * (tb - ta);
            if (tangent == 0) {
                omega.lo1 = ta + inset;
                omega.hi1 = tb - inset;
            } else {
                omega.lo2 = ta + inset;
                omega.hi2 = tb - inset;
            }
        }
    }
    const double tol = 1e-12 * std::max(1.0, domain.diameter());
    if (!(omega.lo(n) > ext_lo + tol && omega.hi(n) < ext_hi - tol && omega.lo(n) < omega.hi(n))) {
        throw OmegaOutsideExtension("omega normal-axis range [" + std::to_string(omega.lo(n)) + ", " +
                                    std::to_string(omega.hi(n)) + "] must lie strictly inside the extension (" +
                                    std::to_string(ext_lo) + ", " + std::to_string(ext_hi) + ")");
    }
    if (domain.dim() == 2) {
        int tangent = 1 - n;
        double mid = 0.5 * (domain.lo(tangent) + domain.hi(tangent));
        if (!(omega.lo(tangent) < mid && omega.hi(tangent) > mid)) {
            throw NoValidExponent("omega tangential range must contain the tangential midpoint " +
                                  std::to_string(mid) + " where the profile's critical line sits");
        }
    }

    // Exponent selection in a mirrored frame starting at 0, where the
    // maximizer of u^p (B - u) sits at p B/(p+1).
    double B_m = L + eta;
    double wlo = gamma.side > 0 ? omega.lo(n) - a : b - omega.hi(n);
    double whi = gamma.side > 0 ? omega.hi(n) - a : b - omega.lo(n);
    auto [p_lo, p_hi] = detail::exponent_interval(0.0, B_m, wlo, whi);
    double p_floor = std::max(2.0, L / eta);
    int p_default = std::max(2, static_cast<int>(std::ceil(2.0 * L / eta)));

    auto maximizer_m = [&](int p) { return p * B_m / (p + 1.0); };
    int chosen = 0;
    if (p_default > p_floor - 1e-12 && maximizer_m(p_default) > wlo && maximizer_m(p_default) < whi) {
        chosen = p_default;
    } else {
        int lo_int = static_cast<int>(std::floor(std::max(p_lo, p_floor))) + 1;
        lo_int = std::max(lo_int, 2);
        for (int cand = lo_int; cand < lo_int + 4096; ++cand) {
            if (cand > p_lo && static_cast<double>(cand) < p_hi && cand > p_floor - 1e-12 &&
                maximizer_m(cand) > wlo && maximizer_m(cand) < whi) {
                chosen = cand;
                break;
            }
            if (static_cast<double>(cand) >= p_hi) break;
        }
    }
    if (chosen == 0) {
        throw NoValidExponent("no integer exponent p > " + std::to_string(p_floor) +
                              " places the profile maximizer inside omega = (" + std::to_string(omega.lo(n)) +
                              ", " + std::to_string(omega.hi(n)) + ")");
    }
    pg.p = chosen;
    double xstar_m = maximizer_m(chosen);
    pg.critical_point = gamma.side > 0 ? a + xstar_m : b - xstar_m;
    pg.omega = omega;

    Box omega1;
    omega1.lo1 = domain.a1;
    omega1.hi1 = domain.b1;
    omega1.lo2 = domain.a2;
    omega1.hi2 = domain.b2;
    if (n == 0) {
        if (gamma.side > 0) omega1.hi1 = b + eta;
        else omega1.lo1 = a - eta;
    } else {
        if (gamma.side > 0) omega1.hi2 = b + eta;
        else omega1.lo2 = a - eta;
    }
    pg.omega1 = omega1;

    Box omega0;
    if (omega0_bounds) {
        omega0 = *omega0_bounds;
    } else {
        if (gamma.side > 0) {
            double lo = a + 0.5 * L, hi = a + 0.9 * L;
            if (n == 0) {
                omega0.lo1 = lo;
                omega0.hi1 = hi;
            } else {
                omega0.lo2 = lo;
                omega0.hi2 = hi;
            }
        } else {
            double lo = a + 0.1 * L, hi = a + 0.5 * L;
            if (n == 0) {
                omega0.lo1 = lo;
                omega0.hi1 = hi;
            } else {
                omega0.lo2 = lo;
                omega0.hi2 = hi;
            }
        }
        if (domain.dim() == 2) {
            int tangent = 1 - n;
            double ta = domain.lo(tangent), tb = domain.hi(tangent);
            double inset = 0.25 * (tb - ta);
            if (tangent == 0) {
                omega0.lo1 = ta + inset;
                omega0.hi1 = tb - inset;
            } else {
                omega0.lo2 = ta + inset;
                omega0.hi2 = tb - inset;
            }
        }
    }
    // closure(Omega_0) must stay inside Omega united with the open Gamma face.
    double o0_lo = omega0.lo(n), o0_hi = omega0.hi(n);
    bool normal_ok = gamma.side > 0 ? (o0_lo > a + tol && o0_hi <= b + tol)
                                    : (o0_lo >= a - tol && o0_hi < b - tol);
    bool tangent_ok = true;
    if (domain.dim() == 2) {
        int tangent = 1 - n;
        tangent_ok = omega0.lo(tangent) > domain.lo(tangent) + tol &&
                     omega0.hi(tangent) < domain.hi(tangent) - tol;
    }
    if (!normal_ok || !tangent_ok || !(o0_lo < o0_hi)) {
        throw ConfigError("omega0 must be a nonempty box with closure inside Omega united with Gamma");
    }
    pg.omega0 = omega0;
    return pg;
}

struct PseudoconvexityCheck {
    bool ok = true;
    double min_d_interior = 0.0;          // over interior Omega_1 nodes
    double max_d_boundary = 0.0;          // over boundary Omega_1 nodes (want ~0)
    double min_grad_outside_omega = 0.0;  // over closure(Omega_1 \ omega) nodes
    double min_d_omega0 = 0.0;
    double max_d_on_excluded_boundary = 0.0;  // over nodes of dOmega \ Gamma
    std::string failure;
};

// Nodewise verification of the pseudoconvexity requirements on a check grid
// covering closure(Omega_1): d > 0 inside, d = 0 on the outer boundary and on
// dOmega \ Gamma, |grad d| > grad_tol (finite differences) away from omega,
// and d > 0 on closure(Omega_0). The corner nodes of Omega_1 in 2D are
// excluded from the gradient test: any profile vanishing on the whole outer
// boundary has a critical point there, and the corner set carries no measure
// in the weighted integrals.
inline PseudoconvexityCheck verify_pseudoconvexity(const ParabolicGeometry& pg, double grad_tol = 1e-10) {
    PseudoconvexityCheck out;
    const DomainSpec& dom = pg.domain;
    int n = pg.gamma_face.axis;
    int dim = dom.dim();

    // Check grid along the normal axis: the domain nodes plus an extension
    // grid with comparable spacing; tangential axis uses the domain nodes.
    std::vector<double> normal_nodes;
    for (int i = 0; i < dom.nx; ++i) normal_nodes.push_back(dom.lo(n) + i * dom.dx(n));
    int m = std::max(2, static_cast<int>(std::llround(pg.eta / dom.dx(n))));
    double he = pg.eta / m;
    if (pg.gamma_face.side > 0) {
        for (int k = 1; k <= m; ++k) normal_nodes.push_back(dom.hi(n) + k * he);
    } else {
        std::vector<double> ext;
        for (int k = m; k >= 1; --k) ext.push_back(dom.lo(n) - k * he);
        normal_nodes.insert(normal_nodes.begin(), ext.begin(), ext.end());
    }
    std::vector<double> tangent_nodes;
    if (dim == 2) {
        int tangent = 1 - n;
        for (int i = 0; i < dom.nx; ++i) tangent_nodes.push_back(dom.lo(tangent) + i * dom.dx(tangent));
    } else {
        tangent_nodes.push_back(0.0);
    }

    auto point_at = [&](double xi, double tau) {
        Point p;
        if (n == 0) {
            p.x1 = xi;
            p.x2 = tau;
        } else {
            p.x1 = tau;
            p.x2 = xi;
        }
        return p;
    };

    int N = static_cast<int>(normal_nodes.size());
    int Tn = static_cast<int>(tangent_nodes.size());
    auto dval = [&](int i, int j) { return pg.d(point_at(normal_nodes[i], tangent_nodes[j])); };

    // Second-order finite-difference gradient with one-sided stencils at the
    // ends of the (possibly nonuniform at the splice) normal grid.
    auto fd_deriv = [](const std::vector<double>& xs, int i, auto&& f) {
        int N = static_cast<int>(xs.size());
        if (i > 0 && i < N - 1) {
            return (f(i + 1) - f(i - 1)) / (xs[i + 1] - xs[i - 1]);
        }
        if (i == 0) {
            double h1 = xs[1] - xs[0], h2 = xs[2] - xs[1];
            // Standard 3-point one-sided formula on a possibly graded grid.
            double c0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
            double c1 = (h1 + h2) / (h1 * h2);
            double c2 = -h1 / (h2 * (h1 + h2));
            return c0 * f(0) + c1 * f(1) + c2 * f(2);
        }
        double h1 = xs[N - 1] - xs[N - 2], h2 = xs[N - 2] - xs[N - 3];
        double c0 = (2.0 * h1 + h2) / (h1 * (h1 + h2));
        double c1 = -(h1 + h2) / (h1 * h2);
        double c2 = h1 / (h2 * (h1 + h2));
        return c0 * f(N - 1) + c1 * f(N - 2) + c2 * f(N - 3);
    };

    double scale = std::max(1.0, pg.d_max_on(pg.omega1));
    out.min_d_interior = std::numeric_limits<double>::infinity();
    out.min_grad_outside_omega = std::numeric_limits<double>::infinity();
    out.min_d_omega0 = std::numeric_limits<double>::infinity();

    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < Tn; ++j) {
            Point pt = point_at(normal_nodes[i], tangent_nodes[j]);
            double v = dval(i, j);
            bool on_normal_end = (i == 0 || i == N - 1);
            bool on_tangent_end = dim == 2 && (j == 0 || j == Tn - 1);
            bool on_omega1_boundary = on_normal_end || on_tangent_end;
            if (on_omega1_boundary) {
                out.max_d_boundary = std::max(out.max_d_boundary, std::abs(v));
            } else {
                out.min_d_interior = std::min(out.min_d_interior, v);
            }
            bool corner = on_normal_end && on_tangent_end;
            bool inside_omega = pg.omega.contains_strict(pt, dim);
            if (!inside_omega && !corner) {
                double gn = fd_deriv(normal_nodes, i, [&](int k) { return dval(k, j); });
                double gt = 0.0;
                if (dim == 2) {
                    gt = fd_deriv(tangent_nodes, j, [&](int k) { return dval(i, k); });
                }
                double mag = std::sqrt(gn * gn + gt * gt);
                out.min_grad_outside_omega = std::min(out.min_grad_outside_omega, mag);
            }
            if (pg.omega0.contains(pt, dim)) {
                out.min_d_omega0 = std::min(out.min_d_omega0, v);
            }
            // dOmega \ Gamma: boundary nodes of Omega that are not on Gamma.
            bool on_domain_boundary = false;
            for (const auto& f : dom.faces()) {
                double coord = f.axis == 0 ? pt.x1 : pt.x2;
                if (std::abs(coord - f.coord) < 1e-12 && dom.contains_closure(pt, 1e-12) &&
                    !(f == pg.gamma_face)) {
                    on_domain_boundary = true;
                }
            }
            if (on_domain_boundary) {
                out.max_d_on_excluded_boundary = std::max(out.max_d_on_excluded_boundary, std::abs(v));
            }
        }
    }

    double zero_tol = 1e-12 * scale;
    if (!(out.min_d_interior > 0.0)) {
        out.ok = false;
        out.failure = "d must be positive inside Omega_1";
    } else if (out.max_d_boundary > zero_tol) {
        out.ok = false;
        out.failure = "d must vanish on the boundary of Omega_1";
    } else if (out.min_grad_outside_omega <= grad_tol) {
        out.ok = false;
        out.failure = "|grad d| must exceed " + std::to_string(grad_tol) + " away from omega";
    } else if (!(out.min_d_omega0 > 0.0)) {
        out.ok = false;
        out.failure = "d must be positive on closure(Omega_0)";
    } else if (out.max_d_on_excluded_boundary > zero_tol) {
        out.ok = false;
        out.failure = "d must vanish on dOmega \\ Gamma";
    }
    return out;
}

}  // namespace carlab
