#pragma once

// The regularized inverse source map: a discrete linear forward operator
// from interior source values to the quadrature-weighted data trace, its
// exact discrete adjoint (assembled transpose in 1D, reverse-recurrence
// matrix-free otherwise), conjugate gradients on the regularized normal
// equations, and the noise-scaling study against the predicted stability
// exponents.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "carlab/analysis.hpp"
#include "carlab/errors.hpp"
#include "carlab/geometry.hpp"
#include "carlab/harness.hpp"
#include "carlab/numerics.hpp"
#include "carlab/solvers.hpp"

namespace carlab {

enum class InverseScenario { HyperbolicBoundary, ParabolicLocal };

struct InverseProblemSpec {
    InverseScenario scenario = InverseScenario::HyperbolicBoundary;
    double alpha = 1e-8;
    int max_iterations = 500;
    double tolerance = 1e-12;  // relative CG residual tolerance
    std::vector<double> noise_levels;
    double discrepancy_safety = 1.1;
};

namespace detail {

// One data row as a sparse functional of a spatial slice (interior DOFs).
struct StencilRow {
    std::vector<std::pair<int, double>> terms;  // (interior index, coefficient)
};

}  // namespace detail

// Discrete linear map f -> data for one inverse scenario. Data entries are
// scaled by the square roots of the quadrature weights, so the Euclidean norm
// of a data vector equals the discrete L^2 norm the stability estimates use.
class ForwardOperator {
public:
    static ForwardOperator hyperbolic(const DomainSpec& dom, const Coefficients& co,
                                      const ScenarioFunctions& fns, const std::vector<BoundaryFace>& gamma,
                                      double T, double dt, std::optional<bool> assemble = std::nullopt) {
        ForwardOperator op;
        op.scenario_ = InverseScenario::HyperbolicBoundary;
        op.init_common(dom, co, fns, gamma, T, dt);
        op.data_dim_ = static_cast<int>(op.trace_rows_.size()) * op.nt_;
        op.build_weights();
        op.maybe_assemble(assemble);
        return op;
    }

    static ForwardOperator parabolic(const DomainSpec& dom, const Coefficients& co,
                                     const ScenarioFunctions& fns, const std::vector<BoundaryFace>& gamma,
                                     double T, double t0, double dt,
                                     std::optional<bool> assemble = std::nullopt) {
        ForwardOperator op;
        op.scenario_ = InverseScenario::ParabolicLocal;
        op.init_common(dom, co, fns, gamma, T, dt);
        op.it0_ = static_cast<int>(std::llround(t0 / op.dt_));
        if (op.it0_ < 0 || op.it0_ >= op.nt_ || std::abs(op.it0_ * op.dt_ - t0) > 1e-6 * op.dt_) {
            throw GridMismatch("t0 must be a grid time of the parabolic scenario");
        }
        op.build_slice_rows();
        op.build_heat_factorizations();
        op.data_dim_ = static_cast<int>(op.trace_rows_.size()) * op.nt_ +
                       static_cast<int>(op.slice_rows_.size());
        op.build_weights();
        op.maybe_assemble(assemble);
        return op;
    }

    int source_dim() const { return static_cast<int>(interior_.size()); }
    int data_dim() const { return data_dim_; }
    const DomainSpec& domain() const { return dom_; }
    double dt() const { return dt_; }
    int nt() const { return nt_; }
    const std::vector<double>& data_sqrt_weights() const { return sqrtw_; }

    std::vector<double> restrict_interior(const std::vector<double>& full) const {
        std::vector<double> f(interior_.size());
        for (std::size_t k = 0; k < interior_.size(); ++k) f[k] = full[interior_[k]];
        return f;
    }

    std::vector<double> extend_full(const std::vector<double>& f_int) const {
        std::vector<double> full(dom_.node_count(), 0.0);
        for (std::size_t k = 0; k < interior_.size(); ++k) full[interior_[k]] = f_int[k];
        return full;
    }

    std::vector<double> apply(const std::vector<double>& f_int) const {
        if (static_cast<int>(f_int.size()) != source_dim()) {
            throw GridMismatch("forward map: source vector has the wrong dimension");
        }
        if (!A_.empty()) {
            std::vector<double> y(data_dim_, 0.0);
            for (int j = 0; j < source_dim(); ++j) {
                double fj = f_int[j];
                if (fj == 0.0) continue;
                const double* col = A_.data() + static_cast<std::size_t>(j) * data_dim_;
                for (int i = 0; i < data_dim_; ++i) y[i] += fj * col[i];
            }
            return y;
        }
        return apply_matrix_free(f_int);
    }

    std::vector<double> apply_adjoint(const std::vector<double>& y) const {
        if (static_cast<int>(y.size()) != data_dim_) {
            throw GridMismatch("adjoint map: data vector has the wrong dimension");
        }
        if (!A_.empty()) {
            std::vector<double> f(source_dim(), 0.0);
            for (int j = 0; j < source_dim(); ++j) {
                const double* col = A_.data() + static_cast<std::size_t>(j) * data_dim_;
                double acc = 0.0;
                for (int i = 0; i < data_dim_; ++i) acc += col[i] * y[i];
                f[j] = acc;
            }
            return f;
        }
        return apply_adjoint_matrix_free(y);
    }

private:
    void init_common(const DomainSpec& dom, const Coefficients& co, const ScenarioFunctions& fns,
                     const std::vector<BoundaryFace>& gamma, double T, double dt) {
        if (gamma.empty()) throw EmptyGamma("forward operator needs a nonempty Gamma");
        dom_ = dom;
        co_ = co;
        dt_ = dt;
        nt_ = carlab::detail::time_steps(T, dt_);
        if (scenario_ == InverseScenario::HyperbolicBoundary) carlab::detail::enforce_cfl(dom, dt_);
        for (int i = 0; i < dom.node_count(); ++i) {
            if (!dom.is_boundary_index(i)) {
                interior_id_.push_back(static_cast<int>(interior_.size()));
                interior_.push_back(i);
            } else {
                interior_id_.push_back(-1);
            }
        }
        // R(x, t_n) at interior nodes for every time level.
        R_.assign(static_cast<std::size_t>(nt_) * interior_.size(), 1.0);
        for (int n = 0; n < nt_; ++n) {
            double t = n * dt_;
            for (std::size_t k = 0; k < interior_.size(); ++k) {
                R_[n * interior_.size() + k] = fns.R ? fns.R(dom.node(interior_[k]), t) : 1.0;
            }
        }
        build_trace_rows(gamma);
    }

    // Outward normal derivative stencils at the Gamma nodes. The boundary
    // value itself is a Dirichlet zero, so only the two interior neighbors
    // along the normal axis contribute: (-4 u_1 + u_2) / (2h) inward.
    void build_trace_rows(const std::vector<BoundaryFace>& gamma) {
        int n = dom_.nx;
        for (const auto& face : gamma) {
            double h = dom_.dx(face.axis);
            int stride = dom_.dim() == 1 ? 1 : (face.axis == 0 ? n : 1);
            int inward = -face.side * stride;
            auto nodes = face_node_indices(dom_, face);
            for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
                TraceRow row;
                row.wtan = face_node_weight(dom_, face, k);
                int n1 = nodes[k] + inward;
                int n2 = nodes[k] + 2 * inward;
                if (interior_id_[n1] >= 0) row.stencil.terms.push_back({interior_id_[n1], -4.0 / (2.0 * h)});
                if (interior_id_[n2] >= 0) row.stencil.terms.push_back({interior_id_[n2], 1.0 / (2.0 * h)});
                trace_rows_.push_back(std::move(row));
            }
        }
    }

    // H^2 slice rows at t0: value, first and second derivatives at every node
    // of the domain, restricted to interior columns.
    void build_slice_rows() {
        auto add_row = [&](const std::vector<std::pair<int, double>>& full_terms, double w) {
            detail::StencilRow r;
            for (auto [node, c] : full_terms) {
                if (interior_id_[node] >= 0) r.terms.push_back({interior_id_[node], c});
            }
            slice_rows_.push_back(std::move(r));
            slice_w_.push_back(w);
        };
        int n = dom_.nx;
        auto axis_terms = [&](int flat, int axis, int order) {
            std::vector<std::pair<int, double>> t;
            int stride = dom_.dim() == 1 ? 1 : (axis == 0 ? n : 1);
            int i = dom_.dim() == 1 ? flat : (axis == 0 ? flat / n : flat % n);
            double h = dom_.dx(axis);
            if (order == 1) {
                if (i == 0) {
                    t = {{flat, -3.0 / (2 * h)}, {flat + stride, 4.0 / (2 * h)}, {flat + 2 * stride, -1.0 / (2 * h)}};
                } else if (i == n - 1) {
                    t = {{flat, 3.0 / (2 * h)}, {flat - stride, -4.0 / (2 * h)}, {flat - 2 * stride, 1.0 / (2 * h)}};
                } else {
                    t = {{flat + stride, 1.0 / (2 * h)}, {flat - stride, -1.0 / (2 * h)}};
                }
            } else {
                double h2 = h * h;
                if (i == 0) {
                    t = {{flat, 2.0 / h2}, {flat + stride, -5.0 / h2}, {flat + 2 * stride, 4.0 / h2},
                         {flat + 3 * stride, -1.0 / h2}};
                } else if (i == n - 1) {
                    t = {{flat, 2.0 / h2}, {flat - stride, -5.0 / h2}, {flat - 2 * stride, 4.0 / h2},
                         {flat - 3 * stride, -1.0 / h2}};
                } else {
                    t = {{flat - stride, 1.0 / h2}, {flat, -2.0 / h2}, {flat + stride, 1.0 / h2}};
                }
            }
            return t;
        };
        for (int flat = 0; flat < dom_.node_count(); ++flat) {
            double w = dom_.node_weight(flat);
            add_row({{flat, 1.0}}, w);
            add_row(axis_terms(flat, 0, 1), w);
            add_row(axis_terms(flat, 0, 2), w);
            if (dom_.dim() == 2) {
                add_row(axis_terms(flat, 1, 1), w);
                add_row(axis_terms(flat, 1, 2), w);
                // Mixed derivative: compose the two first-derivative stencils;
                // counted twice in the Hessian sum, hence the sqrt(2) factor.
                std::vector<std::pair<int, double>> mixed;
                for (auto [f1, c1] : axis_terms(flat, 0, 1)) {
                    for (auto [f2, c2] : axis_terms(f1, 1, 1)) {
                        mixed.push_back({f2, std::sqrt(2.0) * c1 * c2});
                    }
                }
                add_row(mixed, w);
            }
        }
    }

    void build_heat_factorizations() {
        int m = source_dim();
        std::vector<Eigen::Triplet<double>> trip;
        double dx1 = dom_.dx(0);
        if (dom_.dim() == 1) {
            for (int k = 0; k < m; ++k) {
                int i = interior_[k];
                trip.emplace_back(k, k, 1.0 + 2.0 * dt_ / sq(dx1) - dt_ * co_.c_at(i));
                if (k > 0) trip.emplace_back(k, k - 1, -dt_ * (1.0 / sq(dx1) - co_.b1_at(i) / (2.0 * dx1)));
                if (k + 1 < m) trip.emplace_back(k, k + 1, -dt_ * (1.0 / sq(dx1) + co_.b1_at(i) / (2.0 * dx1)));
            }
        } else {
            int n = dom_.nx;
            double dx2 = dom_.dx(1);
            for (int k = 0; k < m; ++k) {
                int flat = interior_[k];
                int i1 = flat / n, i2 = flat % n;
                trip.emplace_back(k, k, 1.0 + 2.0 * dt_ / sq(dx1) + 2.0 * dt_ / sq(dx2) - dt_ * co_.c_at(flat));
                auto couple = [&](int f2, double v) {
                    if (interior_id_[f2] >= 0) trip.emplace_back(k, interior_id_[f2], v);
                };
                couple(dom_.flat_index(i1 - 1, i2), -dt_ * (1.0 / sq(dx1) - co_.b1_at(flat) / (2.0 * dx1)));
                couple(dom_.flat_index(i1 + 1, i2), -dt_ * (1.0 / sq(dx1) + co_.b1_at(flat) / (2.0 * dx1)));
                couple(dom_.flat_index(i1, i2 - 1), -dt_ * (1.0 / sq(dx2) - co_.b2_at(flat) / (2.0 * dx2)));
                couple(dom_.flat_index(i1, i2 + 1), -dt_ * (1.0 / sq(dx2) + co_.b2_at(flat) / (2.0 * dx2)));
            }
        }
        heat_A_ = std::make_shared<Eigen::SparseMatrix<double>>(m, m);
        heat_A_->setFromTriplets(trip.begin(), trip.end());
        heat_lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        heat_lu_->compute(*heat_A_);
        if (heat_lu_->info() != Eigen::Success) {
            throw LinearSolveFailure("factorization of the implicit heat operator failed");
        }
        Eigen::SparseMatrix<double> At = heat_A_->transpose();
        heat_At_ = std::make_shared<Eigen::SparseMatrix<double>>(std::move(At));
        heat_lu_t_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        heat_lu_t_->compute(*heat_At_);
        if (heat_lu_t_->info() != Eigen::Success) {
            throw LinearSolveFailure("factorization of the transposed heat operator failed");
        }
    }

    void build_weights() {
        sqrtw_.assign(data_dim_, 0.0);
        int idx = 0;
        for (const auto& row : trace_rows_) {
            for (int it = 0; it < nt_; ++it) {
                sqrtw_[idx++] = std::sqrt(trapezoid_weight(it, nt_, dt_) * row.wtan);
            }
        }
        for (std::size_t k = 0; k < slice_rows_.size(); ++k) {
            sqrtw_[idx++] = std::sqrt(slice_w_[k]);
        }
    }

    void maybe_assemble(std::optional<bool> assemble) {
        bool do_assemble = assemble.value_or(dom_.dim() == 1 && source_dim() <= 512);
        if (!do_assemble) return;
        A_.assign(static_cast<std::size_t>(source_dim()) * data_dim_, 0.0);
        std::vector<double> e(source_dim(), 0.0);
        for (int j = 0; j < source_dim(); ++j) {
            e[j] = 1.0;
            std::vector<double> col = apply_matrix_free(e);
            e[j] = 0.0;
            std::copy(col.begin(), col.end(), A_.begin() + static_cast<std::size_t>(j) * data_dim_);
        }
    }

    // --- matrix-free forward -------------------------------------------------

    std::vector<std::vector<double>> evolve(const std::vector<double>& f_int) const {
        int m = source_dim();
        std::vector<std::vector<double>> u(nt_, std::vector<double>(m, 0.0));
        if (scenario_ == InverseScenario::HyperbolicBoundary) {
            std::vector<double> full(dom_.node_count(), 0.0), Lu(dom_.node_count(), 0.0);
            for (int k = 0; k < m; ++k) u[1][k] = 0.5 * sq(dt_) * R_[0 * m + k] * f_int[k];
            for (int it = 1; it + 1 < nt_; ++it) {
                for (int k = 0; k < m; ++k) full[interior_[k]] = u[it][k];
                apply_spatial_operator(dom_, co_, full.data(), Lu.data());
                for (int k = 0; k < m; ++k) {
                    u[it + 1][k] = 2.0 * u[it][k] - u[it - 1][k] +
                                   sq(dt_) * (Lu[interior_[k]] + R_[it * m + k] * f_int[k]);
                }
            }
        } else {
            Eigen::VectorXd rhs(m), sol(m);
            for (int it = 0; it + 1 < nt_; ++it) {
                for (int k = 0; k < m; ++k) {
                    rhs[k] = u[it][k] + dt_ * R_[(it + 1) * m + k] * f_int[k];
                }
                sol = heat_lu_->solve(rhs);
                for (int k = 0; k < m; ++k) u[it + 1][k] = sol[k];
            }
        }
        return u;
    }

    std::vector<double> apply_matrix_free(const std::vector<double>& f_int) const {
        auto u = evolve(f_int);
        std::vector<double> y(data_dim_, 0.0);
        int idx = 0;
        std::vector<double> g(nt_), z(nt_);
        for (const auto& row : trace_rows_) {
            for (int it = 0; it < nt_; ++it) {
                double acc = 0.0;
                for (auto [col, c] : row.stencil.terms) acc += c * u[it][col];
                g[it] = acc;
            }
            time_derivative_1d(g, z);
            for (int it = 0; it < nt_; ++it) {
                y[idx] = sqrtw_[idx] * z[it];
                ++idx;
            }
        }
        for (std::size_t r = 0; r < slice_rows_.size(); ++r) {
            double acc = 0.0;
            for (auto [col, c] : slice_rows_[r].terms) acc += c * u[it0_][col];
            y[idx] = sqrtw_[idx] * acc;
            ++idx;
        }
        return y;
    }

    void time_derivative_1d(const std::vector<double>& g, std::vector<double>& z) const {
        int N = nt_ - 1;
        z[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * dt_);
        for (int it = 1; it < N; ++it) z[it] = (g[it + 1] - g[it - 1]) / (2.0 * dt_);
        z[N] = (3.0 * g[N] - 4.0 * g[N - 1] + g[N - 2]) / (2.0 * dt_);
    }

    void time_derivative_transpose_1d(const std::vector<double>& zb, std::vector<double>& gb) const {
        int N = nt_ - 1;
        std::fill(gb.begin(), gb.end(), 0.0);
        gb[0] += -3.0 * zb[0] / (2.0 * dt_);
        gb[1] += 4.0 * zb[0] / (2.0 * dt_);
        gb[2] += -1.0 * zb[0] / (2.0 * dt_);
        for (int it = 1; it < N; ++it) {
            gb[it + 1] += zb[it] / (2.0 * dt_);
            gb[it - 1] -= zb[it] / (2.0 * dt_);
        }
        gb[N] += 3.0 * zb[N] / (2.0 * dt_);
        gb[N - 1] += -4.0 * zb[N] / (2.0 * dt_);
        gb[N - 2] += 1.0 * zb[N] / (2.0 * dt_);
    }

    // --- matrix-free adjoint (exact reverse of the recurrences) --------------

    std::vector<double> apply_adjoint_matrix_free(const std::vector<double>& y) const {
        int m = source_dim();
        std::vector<std::vector<double>> ubar(nt_, std::vector<double>(m, 0.0));
        int idx = 0;
        std::vector<double> zb(nt_), gb(nt_);
        for (const auto& row : trace_rows_) {
            for (int it = 0; it < nt_; ++it) {
                zb[it] = sqrtw_[idx] * y[idx];
                ++idx;
            }
            time_derivative_transpose_1d(zb, gb);
            for (int it = 0; it < nt_; ++it) {
                for (auto [col, c] : row.stencil.terms) ubar[it][col] += c * gb[it];
            }
        }
        for (std::size_t r = 0; r < slice_rows_.size(); ++r) {
            double v = sqrtw_[idx] * y[idx];
            ++idx;
            for (auto [col, c] : slice_rows_[r].terms) ubar[it0_][col] += c * v;
        }

        std::vector<double> fbar(m, 0.0);
        if (scenario_ == InverseScenario::HyperbolicBoundary) {
            // u^{n+1} = 2 u^n - u^{n-1} + dt^2 (L u^n + R^n f), u^1 = dt^2/2 R^0 f.
            int N = nt_ - 1;
            std::vector<double> p_next(m, 0.0), p_next2(m, 0.0), p(m, 0.0);
            std::vector<double> full(dom_.node_count(), 0.0), Lt(dom_.node_count(), 0.0);
            auto Mt = [&](const std::vector<double>& v, std::vector<double>& out) {
                std::fill(full.begin(), full.end(), 0.0);
                for (int k = 0; k < m; ++k) full[interior_[k]] = v[k];
                apply_spatial_operator(dom_, co_, full.data(), Lt.data(), /*transpose=*/true);
                for (int k = 0; k < m; ++k) out[k] = 2.0 * v[k] + sq(dt_) * Lt[interior_[k]];
            };
            for (int n = N; n >= 1; --n) {
                if (n == N) {
                    p = ubar[N];
                } else {
                    Mt(p_next, p);
                    for (int k = 0; k < m; ++k) p[k] += ubar[n][k] - p_next2[k];
                }
                if (n >= 2) {
                    // contribution of f through the step producing u^n
                    for (int k = 0; k < m; ++k) fbar[k] += sq(dt_) * R_[(n - 1) * m + k] * p[k];
                } else {
                    for (int k = 0; k < m; ++k) fbar[k] += 0.5 * sq(dt_) * R_[0 * m + k] * p[k];
                }
                p_next2 = p_next;
                p_next = p;
            }
        } else {
            // u^{n+1} = S(u^n + dt R^{n+1} f) with S = (I - dt L)^{-1}.
            int N = nt_ - 1;
            std::vector<double> q = ubar[N];
            Eigen::VectorXd w(m), rhs(m);
            for (int n = N; n >= 1; --n) {
                for (int k = 0; k < m; ++k) rhs[k] = q[k];
                w = heat_lu_t_->solve(rhs);
                for (int k = 0; k < m; ++k) {
                    fbar[k] += dt_ * R_[n * m + k] * w[k];
                }
                if (n >= 2) {
                    for (int k = 0; k < m; ++k) q[k] = ubar[n - 1][k] + w[k];
                }
            }
        }
        return fbar;
    }

    struct TraceRow {
        double wtan = 1.0;
        detail::StencilRow stencil;
    };

    InverseScenario scenario_ = InverseScenario::HyperbolicBoundary;
    DomainSpec dom_;
    Coefficients co_;
    double dt_ = 0.0;
    int nt_ = 0;
    int it0_ = 0;
    int data_dim_ = 0;
    std::vector<int> interior_;     // interior flat indices
    std::vector<int> interior_id_;  // flat -> interior id or -1
    std::vector<double> R_;         // [time][interior]
    std::vector<TraceRow> trace_rows_;
    std::vector<detail::StencilRow> slice_rows_;
    std::vector<double> slice_w_;
    std::vector<double> sqrtw_;
    std::vector<double> A_;  // assembled, column-major (data_dim_ per column)
    std::shared_ptr<Eigen::SparseMatrix<double>> heat_A_, heat_At_;
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> heat_lu_, heat_lu_t_;
};

struct ReconstructionResult {
    std::vector<double> f_interior;
    std::vector<double> f_full;
    std::vector<double> residual_history;  // ||r_k|| of the normal equations
    std::vector<double> energy_history;    // quadratic objective at each iterate
    int iterations = 0;
    bool converged = false;
    bool max_iterations_exceeded = false;
};

// Conjugate gradients on (A^T A + alpha I) f = A^T d. The energy history is
// the quadratic objective evaluated from the recursive residual; its exact
// monotone decrease is a property of CG that callers assert.
inline ReconstructionResult reconstruct(const ForwardOperator& op, const std::vector<double>& data,
                                        const InverseProblemSpec& spec) {
    if (!(spec.alpha >= 0.0)) throw ConfigError("regularization alpha must be nonnegative");
    int n = op.source_dim();
    std::vector<double> b = op.apply_adjoint(data);
    auto apply_M = [&](const std::vector<double>& v) {
        std::vector<double> Mv = op.apply_adjoint(op.apply(v));
        for (int i = 0; i < n; ++i) Mv[i] += spec.alpha * v[i];
        return Mv;
    };
    auto dot = [n](const std::vector<double>& a, const std::vector<double>& c) {
        CompensatedSum s;
        for (int i = 0; i < n; ++i) s.add(a[i] * c[i]);
        return s.value();
    };

    ReconstructionResult out;
    std::vector<double> f(n, 0.0), r = b, p = r;
    double rs = dot(r, r);
    double rs0 = rs;
    out.residual_history.push_back(std::sqrt(rs));
    out.energy_history.push_back(0.0);  // phi(0) = 0
    if (rs0 == 0.0) {
        out.f_interior = f;
        out.f_full = op.extend_full(f);
        out.converged = true;
        return out;
    }
    for (int it = 0; it < spec.max_iterations; ++it) {
        std::vector<double> Mp = apply_M(p);
        double pMp = dot(p, Mp);
        if (!(pMp > 0.0)) break;  // numerically singular direction
        double alpha_k = rs / pMp;
        for (int i = 0; i < n; ++i) {
            f[i] += alpha_k * p[i];
            r[i] -= alpha_k * Mp[i];
        }
        double rs_new = dot(r, r);
        out.residual_history.push_back(std::sqrt(rs_new));
        // phi(f) = 1/2 f^T M f - b^T f = -1/2 f^T (b + r) with r = b - M f.
        double phi = 0.0;
        for (int i = 0; i < n; ++i) phi += f[i] * (b[i] + r[i]);
        out.energy_history.push_back(-0.5 * phi);
        out.iterations = it + 1;
        if (rs_new <= sq(spec.tolerance) * rs0) {
            out.converged = true;
            rs = rs_new;
            break;
        }
        double beta_k = rs_new / rs;
        rs = rs_new;
        for (int i = 0; i < n; ++i) p[i] = r[i] + beta_k * p[i];
    }
    if (!out.converged) out.max_iterations_exceeded = true;
    out.f_interior = f;
    out.f_full = op.extend_full(f);
    return out;
}

struct NoiseStudyRow {
    double level = 0.0;
    double sigma = 0.0;
    double alpha = 0.0;
    double error = 0.0;         // relative L^2 error over Omega
    double error_omega0 = 0.0;  // relative L^2 error over Omega_0 (parabolic)
    int iterations = 0;
};

struct NoiseStudyReport {
    std::string scenario;
    std::vector<NoiseStudyRow> rows;
    double slope = 0.0;
    double r2 = 0.0;
    bool slope_ok = false;
    double slope_lo = 0.0, slope_hi = 0.0;
};

// Discrepancy-principle alpha: the smallest-residual alpha whose data misfit
// matches safety * ||noise||, found by bisection on log alpha (the misfit is
// monotone increasing in alpha).
inline double discrepancy_alpha(const ForwardOperator& op, const std::vector<double>& data,
                                double noise_norm, const InverseProblemSpec& spec) {
    double target = spec.discrepancy_safety * noise_norm;
    auto misfit = [&](double alpha) {
        InverseProblemSpec s = spec;
        s.alpha = alpha;
        ReconstructionResult r = reconstruct(op, data, s);
        std::vector<double> y = op.apply(r.f_interior);
        CompensatedSum acc;
        for (std::size_t i = 0; i < y.size(); ++i) acc.add(sq(y[i] - data[i]));
        return std::sqrt(acc.value());
    };
    double lo = -14.0, hi = 2.0;
    if (misfit(std::pow(10.0, lo)) >= target) return std::pow(10.0, lo);
    if (misfit(std::pow(10.0, hi)) <= target) return std::pow(10.0, hi);
    for (int i = 0; i < 24; ++i) {
        double mid = 0.5 * (lo + hi);
        if (misfit(std::pow(10.0, mid)) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::pow(10.0, 0.5 * (lo + hi));
}

inline double relative_error(const ForwardOperator& op, const std::vector<double>& f_rec_full,
                             const std::vector<double>& f_true_full, double f_norm,
                             const std::optional<Box>& box) {
    std::vector<double> diff(f_rec_full.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = f_rec_full[i] - f_true_full[i];
    double e = l2_norm_spatial(op.domain(), diff, box);
    return f_norm > 0.0 ? e / f_norm : e;
}

// Error-versus-noise scaling: white noise on the raw trace at each relative
// level, discrepancy-selected alpha per level, then a log-log fit of the
// reconstruction error. The expected slope is 1 for the Lipschitz scenario
// and theta in (0,1] for the local parabolic scenario.
inline NoiseStudyReport noise_scaling_study(const ForwardOperator& op, const std::vector<double>& f_true_full,
                                            const InverseProblemSpec& spec,
                                            const std::optional<Box>& omega0 = std::nullopt,
                                            std::uint64_t seed = 1234) {
    if (spec.noise_levels.size() < 4) {
        throw FitUnderdetermined("noise study needs at least 4 noise levels");
    }
    NoiseStudyReport rep;
    rep.scenario = spec.scenario == InverseScenario::HyperbolicBoundary ? "hyperbolic" : "parabolic";
    rep.slope_lo = spec.scenario == InverseScenario::HyperbolicBoundary ? 0.8 : 0.0;
    rep.slope_hi = spec.scenario == InverseScenario::HyperbolicBoundary ? 1.1 : 1.05;

    std::vector<double> f_int = op.restrict_interior(f_true_full);
    std::vector<double> clean = op.apply(f_int);
    double f_norm = l2_norm_spatial(op.domain(), f_true_full);
    double f_norm0 = omega0 ? l2_norm_spatial(op.domain(), f_true_full, omega0) : 0.0;
    const std::vector<double>& sw = op.data_sqrt_weights();

    // RMS of the raw (unweighted) clean trace sets the relative noise scale.
    double data_measure = 0.0, data_l2 = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        data_measure += sq(sw[i]);
        data_l2 += sq(clean[i]);
    }
    double trace_rms = std::sqrt(data_l2 / data_measure);

    // Noiseless floor reference, excluded from the fit.
    {
        ReconstructionResult r = reconstruct(op, clean, spec);
        NoiseStudyRow row;
        row.level = 0.0;
        row.alpha = spec.alpha;
        row.iterations = r.iterations;
        row.error = relative_error(op, r.f_full, f_true_full, f_norm, std::nullopt);
        if (omega0) row.error_omega0 = relative_error(op, r.f_full, f_true_full, f_norm0, omega0);
        rep.rows.push_back(row);
    }

    Rng rng(seed);
    std::vector<double> lx, ly;
    for (double level : spec.noise_levels) {
        double sigma = level * trace_rms;
        std::vector<double> noisy = clean;
        CompensatedSum n2;
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            double xi = sigma * rng.normal();
            noisy[i] += sw[i] * xi;
            n2.add(sq(sw[i] * xi));
        }
        double noise_norm = std::sqrt(n2.value());
        InverseProblemSpec s = spec;
        s.alpha = discrepancy_alpha(op, noisy, noise_norm, spec);
        ReconstructionResult r = reconstruct(op, noisy, s);
        NoiseStudyRow row;
        row.level = level;
        row.sigma = sigma;
        row.alpha = s.alpha;
        row.iterations = r.iterations;
        row.error = relative_error(op, r.f_full, f_true_full, f_norm, std::nullopt);
        if (omega0) row.error_omega0 = relative_error(op, r.f_full, f_true_full, f_norm0, omega0);
        rep.rows.push_back(row);
        if (row.error > 0.0 && level > 0.0) {
            lx.push_back(std::log(level));
            ly.push_back(std::log(row.error));
        }
    }
    if (lx.size() < 4) throw FitUnderdetermined("noise study fit has fewer than 4 usable levels");
    LineFit fit = fit_line(lx, ly);
    rep.slope = fit.slope;
    rep.r2 = fit.r2;
    rep.slope_ok = fit.slope > rep.slope_lo && fit.slope <= rep.slope_hi;
    return rep;
}

}  // namespace carlab
