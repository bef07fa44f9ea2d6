#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tapkin {

/// LU factorization of a block-tridiagonal matrix with variable block sizes
/// (no inter-block pivoting; the diffusion operators here are strongly
/// diagonally dominant and the in-block solves pivot).
class BlockTridiagMatrix {
public:
    explicit BlockTridiagMatrix(const std::vector<int>& block_sizes) : sizes_(block_sizes) {
        const int nb = static_cast<int>(sizes_.size());
        diag_.resize(nb);
        lower_.resize(nb);  // lower_[i] couples block i to block i-1
        upper_.resize(nb);  // upper_[i] couples block i to block i+1
        offsets_.resize(nb);
        int off = 0;
        for (int i = 0; i < nb; ++i) {
            offsets_[i] = off;
            off += sizes_[i];
            diag_[i].setZero(sizes_[i], sizes_[i]);
            if (i > 0) lower_[i].setZero(sizes_[i], sizes_[i - 1]);
            if (i + 1 < nb) upper_[i].setZero(sizes_[i], sizes_[i + 1]);
        }
        total_ = off;
    }

    int total_size() const { return total_; }
    int n_blocks() const { return static_cast<int>(sizes_.size()); }
    int block_size(int i) const { return sizes_[i]; }
    int offset(int i) const { return offsets_[i]; }

    Eigen::MatrixXd& diag(int i) { return diag_[i]; }
    Eigen::MatrixXd& lower(int i) { return lower_[i]; }
    Eigen::MatrixXd& upper(int i) { return upper_[i]; }

    void set_zero() {
        for (auto& m : diag_) m.setZero();
        for (auto& m : lower_) m.setZero();
        for (auto& m : upper_) m.setZero();
    }

    /// Block Thomas factorization: D'_0 = D_0, D'_i = D_i - L_i D'^-1_{i-1} U_{i-1}.
    void factorize() {
        const int nb = n_blocks();
        factors_.clear();
        factors_.reserve(nb);
        fill_in_.assign(nb, Eigen::MatrixXd());
        Eigen::MatrixXd work;
        for (int i = 0; i < nb; ++i) {
            work = diag_[i];
            if (i > 0) work.noalias() -= lower_[i] * fill_in_[i - 1];
            factors_.emplace_back(work);
            if (i + 1 < nb) fill_in_[i] = factors_[i].solve(upper_[i]);
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        const int nb = n_blocks();
        Eigen::VectorXd x = rhs;
        // forward sweep
        for (int i = 0; i < nb; ++i) {
            Eigen::VectorXd b = rhs.segment(offsets_[i], sizes_[i]);
            if (i > 0) b.noalias() -= lower_[i] * x.segment(offsets_[i - 1], sizes_[i - 1]);
            x.segment(offsets_[i], sizes_[i]) = factors_[i].solve(b);
        }
        // back substitution
        for (int i = nb - 2; i >= 0; --i) {
            x.segment(offsets_[i], sizes_[i]).noalias() -=
                fill_in_[i] * x.segment(offsets_[i + 1], sizes_[i + 1]);
        }
        return x;
    }

private:
    std::vector<int> sizes_;
    std::vector<int> offsets_;
    int total_ = 0;
    std::vector<Eigen::MatrixXd> diag_, lower_, upper_;
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> factors_;
    std::vector<Eigen::MatrixXd> fill_in_;
};

struct StiffOptions {
    double rtol = 1e-6;
    double atol = 1e-9;
    double h_init = 1e-6;
    double h_min = 1e-14;
    double h_max = 0.0;  // 0 -> no cap
    int max_newton = 8;
    int max_steps = 2'000'000;
};

struct StiffFailure : std::runtime_error {
    StiffFailure(const std::string& what, double t_reached)
        : std::runtime_error(what + " (final time reached: " + std::to_string(t_reached) + " s)"),
          time_reached(t_reached) {}
    double time_reached;
};

/// One accepted TR-BDF2 step; endpoint values plus derivatives provide a
/// cubic Hermite dense output.
struct StepRecord {
    double t0, t1;
    Eigen::VectorXd y0, f0, y1, f1;
};

/// TR-BDF2 (trapezoidal rule + BDF2, L-stable, adaptive) for stiff systems.
///
/// System must provide:
///   int size() const
///   void rhs(double t, const VectorXd& y, VectorXd& f) const
///   void jacobian_times(double t, const VectorXd& y, double w, Matrix& M)
///     -- fills M = I - w*J(t, y), where Matrix is the solver policy type
/// Matrix must provide factorize() and solve(rhs).
template <typename System, typename Matrix>
class TrBdf2 {
public:
    TrBdf2(const System& sys, Matrix matrix, StiffOptions opts = {})
        : sys_(sys), mat_(std::move(matrix)), opts_(opts) {}

    /// Integrates from t0 to t1 starting at y0. on_step is invoked for every
    /// accepted step (dense output hook).
    Eigen::VectorXd integrate(double t0, double t1, const Eigen::VectorXd& y0,
                              const std::function<void(const StepRecord&)>& on_step = {}) {
        static const double gamma = 2.0 - std::sqrt(2.0);
        const int n = sys_.size();
        Eigen::VectorXd y = y0, f_now(n), fg(n), f1(n), yg(n), y1(n), err(n);

        // error-estimate weights: 3rd-order quadrature minus the method's own
        const double w12 = 1.0 / (2.0 * (2.0 - gamma));
        const double w3 = (1.0 - gamma) / (2.0 - gamma);
        const double b2 = 1.0 / (6.0 * gamma * (1.0 - gamma));
        const double b3 = 0.5 - 1.0 / (6.0 * (1.0 - gamma));
        const double b1 = 1.0 - b2 - b3;
        const double e1 = b1 - w12, e2 = b2 - w12, e3 = b3 - w3;

        double t = t0;
        double h = opts_.h_init;
        if (opts_.h_max > 0.0) h = std::min(h, opts_.h_max);
        h = std::min(h, t1 - t0);

        sys_.rhs(t, y, f_now);

        int steps = 0;
        while (t < t1) {
            if (t1 - t <= 1e-14 * std::max(1.0, std::abs(t1))) break;
            if (++steps > opts_.max_steps)
                throw StiffFailure("stiff integrator exceeded max step count", t);
            if (t + h > t1) h = t1 - t;
            if (h < opts_.h_min) throw StiffFailure("stiff integrator step-size underflow", t);

            const double w = gamma * h / 2.0;
            sys_.jacobian_times(t, y, w, mat_);
            mat_.factorize();

            // Stage 1: trapezoidal to t + gamma*h
            yg = y + (gamma * h) * f_now;  // explicit predictor
            bool ok = newton_solve(t + gamma * h, yg, y + w * f_now, w, fg);

            // Stage 2: BDF2 to t + h
            if (ok) {
                const double c_g = 1.0 / (gamma * (2.0 - gamma));
                const double c_y = (1.0 - gamma) * (1.0 - gamma) / (gamma * (2.0 - gamma));
                y1 = yg;
                ok = newton_solve(t + h, y1, c_g * yg - c_y * y, w, f1);
            }

            double enorm = 2.0;
            if (ok) {
                err = h * (e1 * f_now + e2 * fg + e3 * f1);
                err = mat_.solve(err);  // stiff filtering through (I - w J)^-1
                enorm = wrms(err, y, y1);
            }

            if (ok && enorm <= 1.0) {
                StepRecord rec{t, t + h, y, f_now, y1, f1};
                t += h;
                y = y1;
                sys_.rhs(t, y, f_now);
                rec.f1 = f_now;
                if (on_step) on_step(rec);
                const double grow = 0.9 * std::pow(std::max(enorm, 1e-10), -1.0 / 3.0);
                h *= std::clamp(grow, 0.2, 5.0);
                if (opts_.h_max > 0.0) h = std::min(h, opts_.h_max);
            } else if (!ok) {
                h *= 0.25;
            } else {
                const double shrink = 0.9 * std::pow(enorm, -1.0 / 3.0);
                h *= std::clamp(shrink, 0.1, 0.5);
            }
        }
        return y;
    }

private:
    /// Solves y = a + w*f(t, y) in place; returns false on non-convergence.
    bool newton_solve(double t, Eigen::VectorXd& y, const Eigen::VectorXd& a, double w,
                      Eigen::VectorXd& f_out) {
        Eigen::VectorXd res(y.size()), delta(y.size());
        const Eigen::VectorXd y_ref = y;
        for (int it = 0; it < opts_.max_newton; ++it) {
            sys_.rhs(t, y, f_out);
            res = a + w * f_out - y;
            delta = mat_.solve(res);
            y += delta;
            if (wrms(delta, y_ref, y) < 0.03) {
                sys_.rhs(t, y, f_out);
                return true;
            }
        }
        return false;
    }

    double wrms(const Eigen::VectorXd& v, const Eigen::VectorXd& ya,
                const Eigen::VectorXd& yb) const {
        double acc = 0.0;
        for (int i = 0; i < v.size(); ++i) {
            const double scale =
                opts_.atol + opts_.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
            const double q = v[i] / scale;
            acc += q * q;
        }
        return std::sqrt(acc / static_cast<double>(v.size()));
    }

    const System& sys_;
    Matrix mat_;
    StiffOptions opts_;
};

/// Dense-matrix policy for small systems (e.g. the thin-zone ODE rebuild).
class DenseMatrix {
public:
    explicit DenseMatrix(int n) : m_(n, n) {}
    Eigen::MatrixXd& matrix() { return m_; }
    void factorize() { lu_.compute(m_); }
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return lu_.solve(rhs); }

private:
    Eigen::MatrixXd m_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// Cubic Hermite evaluation of a dense-output step at time t in [t0, t1].
inline Eigen::VectorXd hermite_eval(const StepRecord& s, double t) {
    const double h = s.t1 - s.t0;
    if (h <= 0.0) return s.y1;
    const double th = (t - s.t0) / h;
    const double t2 = th * th, t3 = t2 * th;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + th;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * s.y0 + (h10 * h) * s.f0 + h01 * s.y1 + (h11 * h) * s.f1;
}

}  // namespace tapkin
