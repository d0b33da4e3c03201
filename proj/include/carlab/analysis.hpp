#pragma once

// Discrete norms, traces, and the weighted space-time integrals behind every
// inequality check. Quadrature is composite trapezoidal; the weight e^{2 s
// phi} spans hundreds of orders of magnitude, so all weighted sums accumulate
// in log space with compensated summation.

#include <functional>
#include <optional>
#include <vector>

#include "carlab/errors.hpp"
#include "carlab/field.hpp"
#include "carlab/geometry.hpp"
#include "carlab/numerics.hpp"
#include "carlab/weights.hpp"

namespace carlab {

// Pointwise derivative evaluation on a field: centered differences in the
// interior, one-sided second-order stencils on the space and time boundaries.
class FieldEval {
public:
    explicit FieldEval(const SpaceTimeField& f, int comp = 0) : f_(f), comp_(comp) {
        if (f.nt < 4) throw GridMismatch("derivative stencils require at least 4 time levels");
        if (f.domain.nx < 4) throw GridMismatch("derivative stencils require at least 4 nodes per axis");
    }

    double value(int it, int ix) const { return f_.at(it, ix, comp_); }

    double dt(int it, int ix) const {
        double h = f_.dt;
        if (it == 0) return (-3.0 * v(0, ix) + 4.0 * v(1, ix) - v(2, ix)) / (2.0 * h);
        if (it == f_.nt - 1)
            return (3.0 * v(it, ix) - 4.0 * v(it - 1, ix) + v(it - 2, ix)) / (2.0 * h);
        return (v(it + 1, ix) - v(it - 1, ix)) / (2.0 * h);
    }

    double dtt(int it, int ix) const {
        double h2 = sq(f_.dt);
        if (it == 0) return (2.0 * v(0, ix) - 5.0 * v(1, ix) + 4.0 * v(2, ix) - v(3, ix)) / h2;
        if (it == f_.nt - 1)
            return (2.0 * v(it, ix) - 5.0 * v(it - 1, ix) + 4.0 * v(it - 2, ix) - v(it - 3, ix)) / h2;
        return (v(it + 1, ix) - 2.0 * v(it, ix) + v(it - 1, ix)) / h2;
    }

    double dx(int axis, int it, int ix) const {
        auto [i, n, stride] = axis_info(axis, ix);
        double h = f_.domain.dx(axis);
        if (i == 0) return (-3.0 * v(it, ix) + 4.0 * v(it, ix + stride) - v(it, ix + 2 * stride)) / (2.0 * h);
        if (i == n - 1)
            return (3.0 * v(it, ix) - 4.0 * v(it, ix - stride) + v(it, ix - 2 * stride)) / (2.0 * h);
        return (v(it, ix + stride) - v(it, ix - stride)) / (2.0 * h);
    }

    double dxx(int axis, int it, int ix) const {
        auto [i, n, stride] = axis_info(axis, ix);
        double h2 = sq(f_.domain.dx(axis));
        if (i == 0)
            return (2.0 * v(it, ix) - 5.0 * v(it, ix + stride) + 4.0 * v(it, ix + 2 * stride) -
                    v(it, ix + 3 * stride)) / h2;
        if (i == n - 1)
            return (2.0 * v(it, ix) - 5.0 * v(it, ix - stride) + 4.0 * v(it, ix - 2 * stride) -
                    v(it, ix - 3 * stride)) / h2;
        return (v(it, ix + stride) - 2.0 * v(it, ix) + v(it, ix - stride)) / h2;
    }

    // Mixed second derivative (2D): the axis-0 first-derivative stencil
    // applied to axis-1 first derivatives.
    double dxy(int it, int ix) const {
        auto [i, n, stride] = axis_info(0, ix);
        double h = f_.domain.dx(0);
        auto dy = [&](int off) { return dx(1, it, ix + off * stride); };
        if (i == 0) return (-3.0 * dy(0) + 4.0 * dy(1) - dy(2)) / (2.0 * h);
        if (i == n - 1) return (3.0 * dy(0) - 4.0 * dy(-1) + dy(-2)) / (2.0 * h);
        return (dy(1) - dy(-1)) / (2.0 * h);
    }

    double grad_x_sq(int it, int ix) const {
        double g = sq(dx(0, it, ix));
        if (f_.domain.dim() == 2) g += sq(dx(1, it, ix));
        return g;
    }

    double grad_xt_sq(int it, int ix) const { return grad_x_sq(it, ix) + sq(dt(it, ix)); }

    // sum over i,j of |d2 v / dx_i dx_j|^2; the mixed term counts twice.
    double hessian_sq(int it, int ix) const {
        double h = sq(dxx(0, it, ix));
        if (f_.domain.dim() == 2) {
            h += sq(dxx(1, it, ix)) + 2.0 * sq(dxy(it, ix));
        }
        return h;
    }

    // Outward normal derivative at a boundary node of `face`.
    double normal_deriv(const BoundaryFace& face, int it, int ix) const {
        double d = dx(face.axis, it, ix);
        return face.side * d;
    }

private:
    double v(int it, int ix) const { return f_.at(it, ix, comp_); }

    struct AxisInfo {
        int i;
        int n;
        int stride;
    };

    AxisInfo axis_info(int axis, int ix) const {
        int n = f_.domain.nx;
        if (f_.domain.dim() == 1) return {ix, n, 1};
        int i1 = ix / n, i2 = ix % n;
        if (axis == 0) return {i1, n, n};
        return {i2, n, 1};
    }

    const SpaceTimeField& f_;
    int comp_;
};

inline SpaceTimeField time_derivative(const SpaceTimeField& f, int comp = 0) {
    FieldEval ev(f, comp);
    SpaceTimeField out(f.domain, f.t_start, f.dt, f.nt);
    for (int it = 0; it < f.nt; ++it) {
        for (int ix = 0; ix < f.nspace(); ++ix) out.at(it, ix) = ev.dt(it, ix);
    }
    return out;
}

enum class IntegrandKind { AbsSq, GradXT, GradX, DtSq, HessianSq, NormalDerivSq };
enum class RegionKind { SpaceTime, TimeSlice, BoundaryStrip };

struct Region {
    RegionKind kind = RegionKind::SpaceTime;
    double t_slice = 0.0;                      // TimeSlice
    std::vector<BoundaryFace> faces;           // BoundaryStrip
    std::optional<double> t_lo, t_hi;          // time window (SpaceTime / BoundaryStrip)
    std::optional<Box> box;                    // spatial restriction (volume regions)

    static Region space_time() { return {}; }

    static Region time_slice(double t) {
        Region r;
        r.kind = RegionKind::TimeSlice;
        r.t_slice = t;
        return r;
    }

    static Region boundary(std::vector<BoundaryFace> faces) {
        Region r;
        r.kind = RegionKind::BoundaryStrip;
        r.faces = std::move(faces);
        return r;
    }

    Region windowed(double lo, double hi) const {
        Region r = *this;
        r.t_lo = lo;
        r.t_hi = hi;
        return r;
    }

    Region boxed(const Box& b) const {
        Region r = *this;
        r.box = b;
        return r;
    }
};

namespace detail {

struct AxisRange {
    int lo = 0;
    int hi = 0;  // inclusive
    int count() const { return hi - lo + 1; }
};

inline AxisRange axis_range(const DomainSpec& dom, int axis, const std::optional<Box>& box) {
    AxisRange r{0, dom.nx - 1};
    if (!box) return r;
    double tol = 1e-9 * std::max(1.0, dom.length(axis));
    double h = dom.dx(axis);
    int lo = static_cast<int>(std::ceil((box->lo(axis) - dom.lo(axis) - tol) / h));
    int hi = static_cast<int>(std::floor((box->hi(axis) - dom.lo(axis) + tol) / h));
    lo = std::max(lo, 0);
    hi = std::min(hi, dom.nx - 1);
    if (hi - lo < 1) throw GridMismatch("spatial box restriction leaves fewer than 2 nodes on an axis");
    return {lo, hi};
}

struct TimeRange {
    int lo = 0;
    int hi = 0;
};

inline TimeRange time_range(const SpaceTimeField& f, const std::optional<double>& t_lo,
                            const std::optional<double>& t_hi) {
    TimeRange r{0, f.nt - 1};
    double tol = 1e-6;
    if (t_lo) r.lo = f.time_index(*t_lo, tol);
    if (t_hi) r.hi = f.time_index(*t_hi, tol);
    if (r.hi - r.lo < 1) throw GridMismatch("time window leaves fewer than 2 time levels");
    return r;
}

}  // namespace detail

// Visits every quadrature node of a region. fn(it, ix, qw, x, t, face, k):
// `qw` is the full product quadrature weight; `face` is non-null only for
// boundary strips.
template <typename Fn>
void for_each_region_node(const SpaceTimeField& f, const Region& region, Fn&& fn) {
    const DomainSpec& dom = f.domain;
    switch (region.kind) {
        case RegionKind::SpaceTime: {
            auto tr = detail::time_range(f, region.t_lo, region.t_hi);
            auto r1 = detail::axis_range(dom, 0, region.box);
            auto r2 = dom.dim() == 2 ? detail::axis_range(dom, 1, region.box) : detail::AxisRange{0, 0};
            for (int it = tr.lo; it <= tr.hi; ++it) {
                double wt = trapezoid_weight(it - tr.lo, tr.hi - tr.lo + 1, f.dt);
                double t = f.time(it);
                for (int i1 = r1.lo; i1 <= r1.hi; ++i1) {
                    double w1 = trapezoid_weight(i1 - r1.lo, r1.count(), dom.dx(0));
                    if (dom.dim() == 1) {
                        fn(it, i1, wt * w1, dom.node(i1), t, nullptr, 0);
                    } else {
                        for (int i2 = r2.lo; i2 <= r2.hi; ++i2) {
                            double w2 = trapezoid_weight(i2 - r2.lo, r2.count(), dom.dx(1));
                            int ix = dom.flat_index(i1, i2);
                            fn(it, ix, wt * w1 * w2, dom.node(ix), t, nullptr, 0);
                        }
                    }
                }
            }
            break;
        }
        case RegionKind::TimeSlice: {
            int it = f.time_index(region.t_slice);
            double t = f.time(it);
            auto r1 = detail::axis_range(dom, 0, region.box);
            auto r2 = dom.dim() == 2 ? detail::axis_range(dom, 1, region.box) : detail::AxisRange{0, 0};
            for (int i1 = r1.lo; i1 <= r1.hi; ++i1) {
                double w1 = trapezoid_weight(i1 - r1.lo, r1.count(), dom.dx(0));
                if (dom.dim() == 1) {
                    fn(it, i1, w1, dom.node(i1), t, nullptr, 0);
                } else {
                    for (int i2 = r2.lo; i2 <= r2.hi; ++i2) {
                        double w2 = trapezoid_weight(i2 - r2.lo, r2.count(), dom.dx(1));
                        int ix = dom.flat_index(i1, i2);
                        fn(it, ix, w1 * w2, dom.node(ix), t, nullptr, 0);
                    }
                }
            }
            break;
        }
        case RegionKind::BoundaryStrip: {
            if (region.faces.empty()) throw EmptyGamma("boundary strip with no faces");
            auto tr = detail::time_range(f, region.t_lo, region.t_hi);
            for (const auto& face : region.faces) {
                auto nodes = face_node_indices(dom, face);
                for (int it = tr.lo; it <= tr.hi; ++it) {
                    double wt = trapezoid_weight(it - tr.lo, tr.hi - tr.lo + 1, f.dt);
                    double t = f.time(it);
                    for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
                        double wtan = face_node_weight(dom, face, k);
                        fn(it, nodes[k], wt * wtan, dom.node(nodes[k]), t, &face, k);
                    }
                }
            }
            break;
        }
    }
}

struct WeightedIntegralSpec {
    IntegrandKind integrand = IntegrandKind::AbsSq;
    double s = 1.0;
    int s_power = 0;
    WeightParams weight;
    Region region;
    bool unit_weight = false;            // phi == 0: weight e^{2 s phi} == 1
    std::optional<double> weight_time;   // evaluate the weight at this time instead of the node time
};

// s^power * integral of integrand * e^{2 s phi} over the region, returned in
// log space (raw values overflow double for moderate s).
inline LogScalar weighted_integral_log(const SpaceTimeField& v, const WeightedIntegralSpec& spec) {
    if (!(spec.s > 0.0)) throw ConfigError("weighted integral requires s > 0");
    FieldEval ev(v);
    LogSumExpAccumulator acc;
    double log_s_pref = spec.s_power * std::log(spec.s);
    for_each_region_node(v, spec.region, [&](int it, int ix, double qw, const Point& x, double t,
                                             const BoundaryFace* face, int) {
        double g = 0.0;
        switch (spec.integrand) {
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
        double phi = spec.unit_weight ? 0.0 : eval_phi(x, spec.weight_time.value_or(t), spec.weight);
        acc.add_log(std::log(qw * g) + log_s_pref + 2.0 * spec.s * phi);
    });
    return LogScalar::from_log(acc.log_value());
}

inline double weighted_integral(const SpaceTimeField& v, const WeightedIntegralSpec& spec) {
    return weighted_integral_log(v, spec).value();
}

// Discrete L^2(Gamma x window) norm of the normal derivative, or of its time
// derivative when `differentiate_t` is set.
inline double boundary_flux_norm(const SpaceTimeField& u, const std::vector<BoundaryFace>& gamma,
                                 std::optional<double> t_lo = std::nullopt,
                                 std::optional<double> t_hi = std::nullopt, bool differentiate_t = false) {
    if (gamma.empty()) throw EmptyGamma("boundary_flux_norm: Gamma is empty");
    FieldEval ev(u);
    auto tr = detail::time_range(u, t_lo, t_hi);
    int ntw = tr.hi - tr.lo + 1;
    CompensatedSum total;
    for (const auto& face : gamma) {
        auto nodes = face_node_indices(u.domain, face);
        for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
            double wtan = face_node_weight(u.domain, face, k);
            // Trace in time at this face node, then optionally d/dt.
            std::vector<double> trace(ntw);
            for (int j = 0; j < ntw; ++j) trace[j] = ev.normal_deriv(face, tr.lo + j, nodes[k]);
            if (differentiate_t) {
                std::vector<double> der(ntw);
                for (int j = 0; j < ntw; ++j) {
                    if (j == 0) {
                        der[j] = (-3.0 * trace[0] + 4.0 * trace[1] - trace[2]) / (2.0 * u.dt);
                    } else if (j == ntw - 1) {
                        der[j] = (3.0 * trace[j] - 4.0 * trace[j - 1] + trace[j - 2]) / (2.0 * u.dt);
                    } else {
                        der[j] = (trace[j + 1] - trace[j - 1]) / (2.0 * u.dt);
                    }
                }
                trace.swap(der);
            }
            for (int j = 0; j < ntw; ++j) {
                double wt = trapezoid_weight(j, ntw, u.dt);
                total.add(wt * wtan * sq(trace[j]));
            }
        }
    }
    return std::sqrt(total.value());
}

// E(t) = integral over Omega of |grad_{x,t} u(x,t)|^2.
inline double energy(const SpaceTimeField& u, double t) {
    FieldEval ev(u);
    int it = u.time_index(t);
    CompensatedSum sum;
    for (int ix = 0; ix < u.nspace(); ++ix) {
        sum.add(u.domain.node_weight(ix) * ev.grad_xt_sq(it, ix));
    }
    return sum.value();
}

enum class SobolevKind { L2, H1, H2, H1t_L2x, L2t_H2x, L2t_H1x, H2t_H1x, H1t_H2x };

// Finite-difference realization of the named Sobolev norms over a volume
// region (space-time window or a single time slice for L2/H1/H2).
inline double sobolev_norm(const SpaceTimeField& u, SobolevKind kind, const Region& region = {}) {
    auto integral = [&](auto&& integrand) {
        FieldEval ev(u);
        CompensatedSum sum;
        for_each_region_node(u, region, [&](int it, int ix, double qw, const Point&, double,
                                            const BoundaryFace*, int) {
            sum.add(qw * integrand(ev, it, ix));
        });
        return sum.value();
    };
    bool slice = region.kind == RegionKind::TimeSlice;
    switch (kind) {
        case SobolevKind::L2:
            return std::sqrt(integral([](FieldEval& e, int it, int ix) { return sq(e.value(it, ix)); }));
        case SobolevKind::H1:
            if (slice) {
                return std::sqrt(integral([](FieldEval& e, int it, int ix) {
                    return sq(e.value(it, ix)) + e.grad_x_sq(it, ix);
                }));
            }
            return std::sqrt(integral([](FieldEval& e, int it, int ix) {
                return sq(e.value(it, ix)) + e.grad_xt_sq(it, ix);
            }));
        case SobolevKind::H2:
            if (slice) {
                return std::sqrt(integral([](FieldEval& e, int it, int ix) {
                    return sq(e.value(it, ix)) + e.grad_x_sq(it, ix) + e.hessian_sq(it, ix);
                }));
            }
            return std::sqrt(integral([](FieldEval& e, int it, int ix) {
                return sq(e.value(it, ix)) + e.grad_xt_sq(it, ix) + e.hessian_sq(it, ix) +
                       sq(e.dtt(it, ix));
            }));
        case SobolevKind::H1t_L2x:
            return std::sqrt(integral([](FieldEval& e, int it, int ix) {
                return sq(e.value(it, ix)) + sq(e.dt(it, ix));
            }));
        case SobolevKind::L2t_H2x:
            return std::sqrt(integral([](FieldEval& e, int it, int ix) {
                return sq(e.value(it, ix)) + e.grad_x_sq(it, ix) + e.hessian_sq(it, ix);
            }));
        case SobolevKind::L2t_H1x:
            return std::sqrt(integral([](FieldEval& e, int it, int ix) {
                return sq(e.value(it, ix)) + e.grad_x_sq(it, ix);
            }));
        case SobolevKind::H2t_H1x: {
            SpaceTimeField ut = time_derivative(u);
            SpaceTimeField utt = time_derivative(ut);
            double a = sobolev_norm(u, SobolevKind::L2t_H1x, region);
            double b = sobolev_norm(ut, SobolevKind::L2t_H1x, region);
            double c = sobolev_norm(utt, SobolevKind::L2t_H1x, region);
            return std::sqrt(sq(a) + sq(b) + sq(c));
        }
        case SobolevKind::H1t_H2x: {
            SpaceTimeField ut = time_derivative(u);
            double a = sobolev_norm(u, SobolevKind::L2t_H2x, region);
            double b = sobolev_norm(ut, SobolevKind::L2t_H2x, region);
            return std::sqrt(sq(a) + sq(b));
        }
    }
    return 0.0;
}

// Discrete L^2 norm of a spatial sample vector over the domain (optionally a
// box restriction).
inline double l2_norm_spatial(const DomainSpec& dom, const std::vector<double>& values,
                              const std::optional<Box>& box = std::nullopt) {
    if (static_cast<int>(values.size()) != dom.node_count()) {
        throw GridMismatch("l2_norm_spatial: sample count does not match the grid");
    }
    auto r1 = detail::axis_range(dom, 0, box);
    CompensatedSum sum;
    if (dom.dim() == 1) {
        for (int i = r1.lo; i <= r1.hi; ++i) {
            sum.add(trapezoid_weight(i - r1.lo, r1.count(), dom.dx(0)) * sq(values[i]));
        }
    } else {
        auto r2 = detail::axis_range(dom, 1, box);
        for (int i1 = r1.lo; i1 <= r1.hi; ++i1) {
            double w1 = trapezoid_weight(i1 - r1.lo, r1.count(), dom.dx(0));
            for (int i2 = r2.lo; i2 <= r2.hi; ++i2) {
                double w2 = trapezoid_weight(i2 - r2.lo, r2.count(), dom.dx(1));
                sum.add(w1 * w2 * sq(values[dom.flat_index(i1, i2)]));
            }
        }
    }
    return std::sqrt(sum.value());
}

// H^1_0 seminorm of a spatial sample (the standard norm on that space).
inline double h1_seminorm_spatial(const DomainSpec& dom, const std::vector<double>& values) {
    SpaceTimeField tmp(dom, 0.0, 1.0, 4);
    for (int it = 0; it < 4; ++it) {
        for (int i = 0; i < dom.node_count(); ++i) tmp.at(it, i) = values[i];
    }
    FieldEval ev(tmp);
    CompensatedSum sum;
    for (int i = 0; i < dom.node_count(); ++i) {
        sum.add(dom.node_weight(i) * ev.grad_x_sq(0, i));
    }
    return std::sqrt(sum.value());
}

}  // namespace carlab
