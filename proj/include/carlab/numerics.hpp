#pragma once

// Small numeric building blocks shared across the library: compensated
// summation, log-space accumulation of huge weighted sums, a deterministic
// RNG, least-squares line fits, and a tridiagonal solve.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "carlab/errors.hpp"

namespace carlab {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double sq(double x) { return x * x; }

// Neumaier variant of Kahan summation.
class CompensatedSum {
public:
    CompensatedSum() = default;
    explicit CompensatedSum(double initial) : sum_(initial) {}

    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Streaming log-sum-exp: accumulates terms given by their natural logs and
// returns the log of the sum. Terms spanning hundreds of orders of magnitude
// are handled by rescaling the running sum whenever a new maximum arrives.
class LogSumExpAccumulator {
public:
    void add_log(double log_term) {
        if (log_term == kNegInf) return;  // zero term
        if (empty_) {
            max_ = log_term;
            sum_ = CompensatedSum(1.0);
            empty_ = false;
            return;
        }
        if (log_term <= max_) {
            sum_.add(std::exp(log_term - max_));
        } else {
            double rescaled = sum_.value() * std::exp(max_ - log_term);
            sum_ = CompensatedSum(rescaled);
            sum_.add(1.0);
            max_ = log_term;
        }
    }

    bool empty() const { return empty_; }

    double log_value() const {
        if (empty_) return kNegInf;
        return max_ + std::log(sum_.value());
    }

private:
    bool empty_ = true;
    double max_ = kNegInf;
    CompensatedSum sum_;
};

// Nonnegative scalar stored as its natural log; exact zero is representable.
// Used for weighted integrals whose raw values overflow double.
class LogScalar {
public:
    LogScalar() : log_(kNegInf) {}

    static LogScalar from_value(double v) {
        if (v < 0.0) throw NumericalFailure("LogScalar::from_value: negative input");
        LogScalar r;
        r.log_ = (v == 0.0) ? kNegInf : std::log(v);
        return r;
    }

    static LogScalar from_log(double log_v) {
        LogScalar r;
        r.log_ = log_v;
        return r;
    }

    double log() const { return log_; }
    double log10() const { return log_ / std::log(10.0); }
    double value() const { return is_zero() ? 0.0 : std::exp(log_); }
    bool is_zero() const { return log_ == kNegInf; }

    friend LogScalar operator+(const LogScalar& a, const LogScalar& b) {
        if (a.is_zero()) return b;
        if (b.is_zero()) return a;
        double hi = std::max(a.log_, b.log_);
        double lo = std::min(a.log_, b.log_);
        return from_log(hi + std::log1p(std::exp(lo - hi)));
    }

    friend LogScalar operator*(const LogScalar& a, const LogScalar& b) {
        if (a.is_zero() || b.is_zero()) return LogScalar();
        return from_log(a.log_ + b.log_);
    }

    LogScalar scaled(double factor) const {  // factor > 0
        if (is_zero()) return *this;
        return from_log(log_ + std::log(factor));
    }

    // Ratio with the conventions used by the check reports: 0/anything = 0,
    // positive/0 = +inf.
    double ratio_to(const LogScalar& denom) const {
        if (is_zero()) return 0.0;
        if (denom.is_zero()) return std::numeric_limits<double>::infinity();
        return std::exp(log_ - denom.log_);
    }

private:
    double log_;
};

// Deterministic RNG: the mt19937_64 stream is fixed by the standard and the
// transformations below avoid implementation-defined distributions, so runs
// reproduce bit-identically for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; one spare value is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int n = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw FitUnderdetermined("fit_line needs at least 2 matching points, got " +
                                 std::to_string(x.size()));
    }
    int n = static_cast<int>(x.size());
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw FitUnderdetermined("fit_line: all abscissae equal");
    LineFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (int i = 0; i < n; ++i) {
        double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r2 = (syy == 0.0) ? 1.0 : 1.0 - ss_res / syy;
    return f;
}

// Thomas algorithm. `lower[i]` multiplies x[i-1] in row i; `upper[i]`
// multiplies x[i+1]. lower[0] and upper[n-1] are ignored.
inline std::vector<double> solve_tridiagonal(const std::vector<double>& lower,
                                             const std::vector<double>& diag,
                                             const std::vector<double>& upper,
                                             const std::vector<double>& rhs) {
    std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n || n == 0) {
        throw LinearSolveFailure("solve_tridiagonal: inconsistent band sizes");
    }
    std::vector<double> c(n), d(n);
    double denom = diag[0];
    if (std::abs(denom) < 1e-300) throw LinearSolveFailure("solve_tridiagonal: zero pivot at row 0");
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - lower[i] * c[i - 1];
        if (std::abs(denom) < 1e-300) {
            throw LinearSolveFailure("solve_tridiagonal: zero pivot at row " + std::to_string(i));
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    return x;
}

inline double trapezoid_weight(int i, int n, double h) {
    return (i == 0 || i == n - 1) ? 0.5 * h : h;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

inline std::vector<double> geometric_spaced(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    return v;
}

// Index-parallel map; each fn(i) must only write state owned by index i, so
// the merged result is deterministic regardless of scheduling.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(n));
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace carlab
