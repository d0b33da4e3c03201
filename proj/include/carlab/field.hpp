#pragma once

// SpaceTimeField: the grid function u(x,t) used for solutions, right-hand
// sides, traces, and weights. Values live on (time grid) x (space grid) with
// an optional component stack, plus flat-binary and CSV serialization.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "carlab/errors.hpp"
#include "carlab/geometry.hpp"

namespace carlab {

struct SpaceTimeField {
    DomainSpec domain;
    double t_start = 0.0;
    double dt = 0.0;
    int nt = 0;
    int ncomp = 1;
    std::vector<double> data;  // layout [time][component][space]

    SpaceTimeField() = default;

    SpaceTimeField(const DomainSpec& dom, double t0, double dt_, int nt_, int ncomp_ = 1)
        : domain(dom), t_start(t0), dt(dt_), nt(nt_), ncomp(ncomp_) {
        data.assign(static_cast<std::size_t>(nt) * ncomp * domain.node_count(), 0.0);
    }

    int nspace() const { return domain.node_count(); }
    double time(int it) const { return t_start + it * dt; }
    double t_end() const { return time(nt - 1); }

    double& at(int it, int ix, int comp = 0) {
        return data[(static_cast<std::size_t>(it) * ncomp + comp) * nspace() + ix];
    }
    double at(int it, int ix, int comp = 0) const {
        return data[(static_cast<std::size_t>(it) * ncomp + comp) * nspace() + ix];
    }

    double* slice(int it, int comp = 0) {
        return data.data() + (static_cast<std::size_t>(it) * ncomp + comp) * nspace();
    }
    const double* slice(int it, int comp = 0) const {
        return data.data() + (static_cast<std::size_t>(it) * ncomp + comp) * nspace();
    }

    // Nearest time index; GridMismatch when `t` is not a grid time.
    int time_index(double t, double tol_factor = 1e-6) const {
        double k = (t - t_start) / dt;
        int it = static_cast<int>(std::llround(k));
        if (it < 0 || it >= nt || std::abs(k - it) > tol_factor) {
            throw GridMismatch("time " + std::to_string(t) + " is not on the field's time grid");
        }
        return it;
    }

    bool finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, std::abs(v));
        return m;
    }

    static SpaceTimeField sample(const DomainSpec& dom, double t0, double dt, int nt,
                                 const std::function<double(Point, double)>& f) {
        SpaceTimeField out(dom, t0, dt, nt);
        for (int it = 0; it < nt; ++it) {
            double t = out.time(it);
            for (int ix = 0; ix < out.nspace(); ++ix) {
                out.at(it, ix) = f(dom.node(ix), t);
            }
        }
        return out;
    }
};

namespace field_io {

constexpr std::uint32_t kMagic = 0x434C4631;  // "CLF1"

inline void write_binary(const SpaceTimeField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    auto put_u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_f64 = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    put_u32(kMagic);
    put_u32(static_cast<std::uint32_t>(f.domain.dim()));
    put_u32(static_cast<std::uint32_t>(f.domain.nx));
    put_u32(static_cast<std::uint32_t>(f.nt));
    put_u32(static_cast<std::uint32_t>(f.ncomp));
    put_f64(f.domain.a1);
    put_f64(f.domain.b1);
    put_f64(f.domain.a2);
    put_f64(f.domain.b2);
    put_f64(f.t_start);
    put_f64(f.dt);
    os.write(reinterpret_cast<const char*>(f.data.data()),
             static_cast<std::streamsize>(f.data.size() * sizeof(double)));
}

inline SpaceTimeField read_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open '" + path + "' for reading");
    auto get_u32 = [&] {
        std::uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_f64 = [&] {
        double v = 0;
        is.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    if (get_u32() != kMagic) throw ConfigError("'" + path + "' is not a field file");
    std::uint32_t dim = get_u32();
    std::uint32_t nx = get_u32();
    std::uint32_t nt = get_u32();
    std::uint32_t ncomp = get_u32();
    double a1 = get_f64(), b1 = get_f64(), a2 = get_f64(), b2 = get_f64();
    double t0 = get_f64(), dt = get_f64();
    DomainSpec dom = dim == 1 ? DomainSpec::interval(a1, b1, static_cast<int>(nx))
                              : DomainSpec::rectangle(a1, b1, a2, b2, static_cast<int>(nx));
    SpaceTimeField f(dom, t0, dt, static_cast<int>(nt), static_cast<int>(ncomp));
    is.read(reinterpret_cast<char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size() * sizeof(double)));
    if (!is) throw ConfigError("'" + path + "': truncated field file");
    return f;
}

inline void write_csv(const SpaceTimeField& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    os << "t,x1";
    if (f.domain.dim() == 2) os << ",x2";
    for (int c = 0; c < f.ncomp; ++c) os << ",v" << c;
    os << "\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (int it = 0; it < f.nt; ++it) {
        for (int ix = 0; ix < f.nspace(); ++ix) {
            Point p = f.domain.node(ix);
            put(f.time(it));
            os << ',';
            put(p.x1);
            if (f.domain.dim() == 2) {
                os << ',';
                put(p.x2);
            }
            for (int c = 0; c < f.ncomp; ++c) {
                os << ',';
                put(f.at(it, ix, c));
            }
            os << "\n";
        }
    }
}

}  // namespace field_io

}  // namespace carlab
