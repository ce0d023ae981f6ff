#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/types.hpp"

namespace tsa {

/// One-step map of the discretized dynamics. `out` must not alias `x`.
template <class S>
concept StepFn = requires(const S& s, std::span<const double> x, std::span<const double> u,
                          double t, std::span<double> out) {
    { s(x, u, t, out) } -> std::same_as<void>;
};

/// x + dt * f(x, u, t). Writes f into `out` first and folds in place, so no
/// scratch storage is needed and concurrent use is safe.
class ExplicitEuler {
public:
    ExplicitEuler(const OCProblem& problem, double dt) : problem_(&problem), dt_(dt) {
        check_config(dt >= 0.0, "ExplicitEuler: negative step");
    }

    double dt() const { return dt_; }

    void operator()(std::span<const double> x, std::span<const double> u, double t,
                    std::span<double> out) const {
        problem_->dynamics(x, u, t, out);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = x[i] + dt_ * out[i];
            if (!std::isfinite(out[i]))
                throw numerical_error("explicit Euler step produced a non-finite state");
        }
    }

private:
    const OCProblem* problem_;
    double dt_;
};

inline std::vector<double> explicit_euler_step(const OCProblem& problem,
                                               std::span<const double> x,
                                               std::span<const double> u, double t, double dt) {
    check_config(static_cast<int>(x.size()) == problem.state_dim,
                 "explicit_euler_step: state dimension mismatch");
    check_config(static_cast<int>(u.size()) == problem.control_dim,
                 "explicit_euler_step: control dimension mismatch");
    std::vector<double> out(x.size());
    ExplicitEuler(problem, dt)(x, u, t, out);
    return out;
}

/// Control-affine linear dynamics f(y, u) = A y + B u with structure-aware
/// storage: dense for small systems, tridiagonal for 1-D second-difference
/// operators, and the [[0, I], [c D2, 0]] block form of the semi-discrete
/// wave equation.
class LinearAffineDynamics {
public:
    static LinearAffineDynamics dense(int dim, std::vector<double> a_row_major,
                                      std::vector<double> b, int control_dim = 1) {
        check_config(dim >= 1, "LinearAffineDynamics: dimension must be >= 1");
        check_config(a_row_major.size() == static_cast<std::size_t>(dim) * dim,
                     "LinearAffineDynamics: A must be dim x dim");
        check_config(b.size() == static_cast<std::size_t>(dim) * control_dim,
                     "LinearAffineDynamics: B must be dim x control_dim");
        LinearAffineDynamics d;
        d.dim_ = dim;
        d.control_dim_ = control_dim;
        d.storage_ = Dense{std::move(a_row_major)};
        d.b_ = std::move(b);
        return d;
    }

    /// Symmetric second-difference stencil scale * (y_{i-1} - 2 y_i + y_{i+1})
    /// with homogeneous Dirichlet ends, i.e. A = scale * tridiag(1, -2, 1).
    static LinearAffineDynamics laplacian_1d(int dim, double scale, std::vector<double> b) {
        check_config(dim >= 2, "LinearAffineDynamics: 1-D Laplacian needs dim >= 2");
        check_config(b.size() == static_cast<std::size_t>(dim),
                     "LinearAffineDynamics: B must have length dim");
        LinearAffineDynamics d;
        d.dim_ = dim;
        d.control_dim_ = 1;
        d.storage_ = Tridiagonal{scale};
        d.b_ = std::move(b);
        return d;
    }

    /// State y = (w, w_t), A = [[0, I], [c D2, 0]] with D2 the Dirichlet
    /// second-difference operator scaled by 1/dx^2; B = (0, actuator).
    static LinearAffineDynamics wave_block(int half_dim, double wave_speed, double dx,
                                           std::vector<double> actuator) {
        check_config(half_dim >= 2, "LinearAffineDynamics: wave block needs half_dim >= 2");
        check_config(actuator.size() == static_cast<std::size_t>(half_dim),
                     "LinearAffineDynamics: actuator must have length half_dim");
        check_config(dx > 0.0, "LinearAffineDynamics: mesh width must be positive");
        LinearAffineDynamics d;
        d.dim_ = 2 * half_dim;
        d.control_dim_ = 1;
        d.storage_ = WaveBlock{wave_speed, dx};
        d.b_.assign(static_cast<std::size_t>(2) * half_dim, 0.0);
        for (int i = 0; i < half_dim; ++i) d.b_[half_dim + i] = actuator[i];
        return d;
    }

    int dim() const { return dim_; }
    int control_dim() const { return control_dim_; }
    std::span<const double> b() const { return b_; }

    bool is_dense() const { return std::holds_alternative<Dense>(storage_); }

    /// out = A x
    void apply_a(std::span<const double> x, std::span<double> out) const {
        if (const auto* dn = std::get_if<Dense>(&storage_)) {
            for (int i = 0; i < dim_; ++i) {
                double s = 0.0;
                const double* row = dn->a.data() + static_cast<std::size_t>(i) * dim_;
                for (int j = 0; j < dim_; ++j) s += row[j] * x[j];
                out[i] = s;
            }
        } else if (const auto* tr = std::get_if<Tridiagonal>(&storage_)) {
            apply_second_difference(tr->scale, x, out);
        } else {
            const auto& wb = std::get<WaveBlock>(storage_);
            const int h = dim_ / 2;
            for (int i = 0; i < h; ++i) out[i] = x[h + i];
            apply_second_difference(wb.wave_speed / (wb.dx * wb.dx), x.first(h),
                                    out.subspan(h));
        }
    }

    /// out += B u
    void add_bu(std::span<const double> u, std::span<double> out) const {
        for (int k = 0; k < control_dim_; ++k) {
            const double uk = u[k];
            const double* col = b_.data() + static_cast<std::size_t>(k) * dim_;
            for (int i = 0; i < dim_; ++i) out[i] += uk * col[i];
        }
    }

    /// f(x, u) = A x + B u
    void apply(std::span<const double> x, std::span<const double> u,
               std::span<double> out) const {
        apply_a(x, out);
        add_bu(u, out);
    }

    DynamicsFn as_dynamics_fn() const {
        // copies *this into the closure; the struct is cheap for the
        // structured variants and the dense one is only used for small dims
        return [dyn = *this](std::span<const double> x, std::span<const double> u, double,
                             std::span<double> out) { dyn.apply(x, u, out); };
    }

private:
    struct Dense {
        std::vector<double> a;  // row-major dim x dim
    };
    struct Tridiagonal {
        double scale;  // A = scale * tridiag(1, -2, 1)
    };
    struct WaveBlock {
        double wave_speed;
        double dx;
    };

    static void apply_second_difference(double scale, std::span<const double> x,
                                        std::span<double> out) {
        const int n = static_cast<int>(x.size());
        for (int i = 0; i < n; ++i) {
            const double left = i > 0 ? x[i - 1] : 0.0;
            const double right = i + 1 < n ? x[i + 1] : 0.0;
            out[i] = scale * (left - 2.0 * x[i] + right);
        }
    }

    friend class ImplicitEuler;

    int dim_ = 0;
    int control_dim_ = 1;
    std::variant<Dense, Tridiagonal, WaveBlock> storage_;
    std::vector<double> b_;  // column-major dim x control_dim
};

namespace detail {

/// LU factors of a tridiagonal matrix with constant off-diagonals, solved
/// in place with no scratch storage (Thomas algorithm).
struct TridiagonalFactor {
    std::vector<double> lower;  // elimination multipliers, size n-1
    std::vector<double> pivot;  // U diagonal, size n
    double super = 0.0;         // constant superdiagonal of the original matrix

    // matrix: diag d on the main diagonal, constant sub/super off-diagonals
    static TridiagonalFactor build(std::span<const double> diag, double sub, double super) {
        const std::size_t n = diag.size();
        TridiagonalFactor f;
        f.super = super;
        f.pivot.resize(n);
        f.lower.resize(n > 0 ? n - 1 : 0);
        f.pivot[0] = diag[0];
        for (std::size_t i = 1; i < n; ++i) {
            if (std::abs(f.pivot[i - 1]) < 1e-300)
                throw numerical_error("tridiagonal factorization: zero pivot");
            f.lower[i - 1] = sub / f.pivot[i - 1];
            f.pivot[i] = diag[i] - f.lower[i - 1] * super;
        }
        if (std::abs(f.pivot[n - 1]) < 1e-300)
            throw numerical_error("tridiagonal factorization: zero pivot");
        return f;
    }

    void solve_in_place(std::span<double> rhs) const {
        const std::size_t n = pivot.size();
        for (std::size_t i = 1; i < n; ++i) rhs[i] -= lower[i - 1] * rhs[i - 1];
        rhs[n - 1] /= pivot[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - super * rhs[i + 1]) / pivot[i];
    }
};

}  // namespace detail

/// Backward-Euler map for linear affine dynamics: solves
/// (I - dt A) y = x + dt B u. The factorization of (I - dt A) is built once
/// and reused for every node and step; application is read-only and safe to
/// call concurrently.
class ImplicitEuler {
public:
    static constexpr int kDenseDimLimit = 500;

    ImplicitEuler(const LinearAffineDynamics& dyn, double dt) : dyn_(dyn), dt_(dt) {
        check_config(dt > 0.0, "ImplicitEuler: step must be positive");
        if (const auto* dn = std::get_if<LinearAffineDynamics::Dense>(&dyn.storage_)) {
            check_config(dyn.dim() <= kDenseDimLimit,
                         "ImplicitEuler: dense factorization rejected above dim 500; use a "
                         "structured (tridiagonal or wave-block) dynamics");
            Eigen::MatrixXd m = -dt * Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                                     Eigen::Dynamic,
                                                                     Eigen::RowMajor>>(
                                          dn->a.data(), dyn.dim(), dyn.dim());
            m.diagonal().array() += 1.0;
            dense_ = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXd>>(m);
            const double min_pivot = dense_->matrixLU().diagonal().cwiseAbs().minCoeff();
            if (min_pivot < 1e-300)
                throw numerical_error("ImplicitEuler: singular (I - dt A)");
        } else if (const auto* tr =
                       std::get_if<LinearAffineDynamics::Tridiagonal>(&dyn.storage_)) {
            // I - dt * scale * tridiag(1, -2, 1)
            const double s = dt * tr->scale;
            std::vector<double> diag(dyn.dim(), 1.0 + 2.0 * s);
            tridiag_ = std::make_shared<detail::TridiagonalFactor>(
                detail::TridiagonalFactor::build(diag, -s, -s));
        } else {
            // Block elimination: with y = (w, v),
            //   w - dt v = b1,  v - dt c D2 w = b2
            // gives (I - dt^2 c D2) w = b1 + dt b2 and v = b2 + dt c D2 w,
            // so one tridiagonal solve on the half system does the whole step.
            const auto& wb = std::get<LinearAffineDynamics::WaveBlock>(dyn.storage_);
            const double s = dt * dt * wb.wave_speed / (wb.dx * wb.dx);
            std::vector<double> diag(dyn.dim() / 2, 1.0 + 2.0 * s);
            tridiag_ = std::make_shared<detail::TridiagonalFactor>(
                detail::TridiagonalFactor::build(diag, -s, -s));
        }
    }

    double dt() const { return dt_; }
    const LinearAffineDynamics& dynamics() const { return dyn_; }

    void operator()(std::span<const double> x, std::span<const double> u, double /*t*/,
                    std::span<double> out) const {
        const int d = dyn_.dim();
        if (dense_) {
            Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(x.data(), d);
            for (int k = 0; k < dyn_.control_dim(); ++k)
                rhs += dt_ * u[k] *
                       Eigen::Map<const Eigen::VectorXd>(
                           dyn_.b_.data() + static_cast<std::size_t>(k) * d, d);
            Eigen::Map<Eigen::VectorXd>(out.data(), d) = dense_->solve(rhs);
        } else if (std::holds_alternative<LinearAffineDynamics::Tridiagonal>(dyn_.storage_)) {
            for (int i = 0; i < d; ++i) out[i] = x[i] + dt_ * u[0] * dyn_.b_[i];
            tridiag_->solve_in_place(out);
        } else {
            const auto& wb = std::get<LinearAffineDynamics::WaveBlock>(dyn_.storage_);
            const int h = d / 2;
            // out_v = b2 = x_v + dt * actuator * u, out_w = b1 + dt * b2
            for (int i = 0; i < h; ++i) out[h + i] = x[h + i] + dt_ * u[0] * dyn_.b_[h + i];
            for (int i = 0; i < h; ++i) out[i] = x[i] + dt_ * out[h + i];
            tridiag_->solve_in_place(out.first(h));
            // v = b2 + dt c D2 w
            const double scale = wb.wave_speed / (wb.dx * wb.dx);
            for (int i = 0; i < h; ++i) {
                const double left = i > 0 ? out[i - 1] : 0.0;
                const double right = i + 1 < h ? out[i + 1] : 0.0;
                out[h + i] += dt_ * scale * (left - 2.0 * out[i] + right);
            }
        }
        for (int i = 0; i < d; ++i)
            if (!std::isfinite(out[i]))
                throw numerical_error("implicit Euler step produced a non-finite state");
    }

private:
    LinearAffineDynamics dyn_;
    double dt_;
    std::shared_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> dense_;
    std::shared_ptr<detail::TridiagonalFactor> tridiag_;
};

inline std::vector<double> implicit_euler_step(const ImplicitEuler& solver,
                                               std::span<const double> x,
                                               std::span<const double> u) {
    check_config(static_cast<int>(x.size()) == solver.dynamics().dim(),
                 "implicit_euler_step: state dimension mismatch");
    std::vector<double> out(x.size());
    solver(x, u, 0.0, out);
    return out;
}

}  // namespace tsa
