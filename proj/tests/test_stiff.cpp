#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "tapkin/stiff.hpp"

using namespace tapkin;

namespace {

// classic stiff test problem: y' = -a (y - cos t) - sin t, solution cos t
struct StiffDecay {
    double a = 1e5;
    int size() const { return 1; }
    void rhs(double t, const Eigen::VectorXd& y, Eigen::VectorXd& f) const {
        f.resize(1);
        f[0] = -a * (y[0] - std::cos(t)) - std::sin(t);
    }
    void jacobian_times(double, const Eigen::VectorXd&, double w, DenseMatrix& m) const {
        m.matrix()(0, 0) = 1.0 + w * a;
    }
};

// two-species linear exchange, conserves y0 + y1
struct LinearExchange {
    int size() const { return 2; }
    void rhs(double, const Eigen::VectorXd& y, Eigen::VectorXd& f) const {
        f.resize(2);
        f[0] = -3.0 * y[0] + 1.0 * y[1];
        f[1] = 3.0 * y[0] - 1.0 * y[1];
    }
    void jacobian_times(double, const Eigen::VectorXd&, double w, DenseMatrix& m) const {
        Eigen::MatrixXd j(2, 2);
        j << -3, 1, 3, -1;
        m.matrix() = Eigen::MatrixXd::Identity(2, 2) - w * j;
    }
};

}  // namespace

TEST_CASE("TR-BDF2 tracks a very stiff forced problem") {
    StiffDecay sys;
    StiffOptions opts;
    opts.rtol = 1e-8;
    opts.atol = 1e-10;
    TrBdf2<StiffDecay, DenseMatrix> stepper(sys, DenseMatrix(1), opts);
    Eigen::VectorXd y0(1);
    y0 << 2.0;  // off the slow manifold
    const Eigen::VectorXd y = stepper.integrate(0.0, 2.0, y0);
    CHECK(y[0] == doctest::Approx(std::cos(2.0)).epsilon(1e-6));
}

TEST_CASE("TR-BDF2 preserves linear invariants") {
    LinearExchange sys;
    TrBdf2<LinearExchange, DenseMatrix> stepper(sys, DenseMatrix(2));
    Eigen::VectorXd y0(2);
    y0 << 1.0, 0.0;
    double worst = 0.0;
    const Eigen::VectorXd y = stepper.integrate(0.0, 5.0, y0, [&](const StepRecord& s) {
        worst = std::max(worst, std::abs(s.y1.sum() - 1.0));
    });
    CHECK(worst < 1e-9);
    CHECK(y[0] == doctest::Approx(0.25).epsilon(1e-6));  // equilibrium 1:3 ratio
}

TEST_CASE("dense output interpolates between accepted steps") {
    LinearExchange sys;
    StiffOptions opts;
    opts.rtol = 1e-8;
    opts.atol = 1e-12;
    TrBdf2<LinearExchange, DenseMatrix> stepper(sys, DenseMatrix(2), opts);
    Eigen::VectorXd y0(2);
    y0 << 1.0, 0.0;
    double max_err = 0.0;
    stepper.integrate(0.0, 1.0, y0, [&](const StepRecord& s) {
        const double tm = 0.5 * (s.t0 + s.t1);
        const Eigen::VectorXd ym = hermite_eval(s, tm);
        // analytic: y0(t) = 1/4 + 3/4 exp(-4t)
        const double exact = 0.25 + 0.75 * std::exp(-4.0 * tm);
        max_err = std::max(max_err, std::abs(ym[0] - exact));
    });
    CHECK(max_err < 1e-6);
}

TEST_CASE("block tridiagonal solve matches a dense reference") {
    std::vector<int> sizes{2, 3, 1, 4};
    BlockTridiagMatrix m(sizes);
    const int n = m.total_size();
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    unsigned state = 123u;
    auto next = [&]() {
        state = state * 1664525u + 1013904223u;
        return static_cast<double>(state % 1000) / 1000.0 - 0.5;
    };
    for (int b = 0; b < m.n_blocks(); ++b) {
        for (int r = 0; r < sizes[b]; ++r)
            for (int c = 0; c < sizes[b]; ++c) {
                const double v = next() + (r == c ? 6.0 : 0.0);  // diagonally dominant
                m.diag(b)(r, c) = v;
                dense(m.offset(b) + r, m.offset(b) + c) = v;
            }
        if (b > 0)
            for (int r = 0; r < sizes[b]; ++r)
                for (int c = 0; c < sizes[b - 1]; ++c) {
                    const double v = next();
                    m.lower(b)(r, c) = v;
                    dense(m.offset(b) + r, m.offset(b - 1) + c) = v;
                }
        if (b + 1 < m.n_blocks())
            for (int r = 0; r < sizes[b]; ++r)
                for (int c = 0; c < sizes[b + 1]; ++c) {
                    const double v = next();
                    m.upper(b)(r, c) = v;
                    dense(m.offset(b) + r, m.offset(b + 1) + c) = v;
                }
    }
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = next();
    m.factorize();
    const Eigen::VectorXd x = m.solve(rhs);
    const Eigen::VectorXd x_ref = dense.partialPivLu().solve(rhs);
    CHECK((x - x_ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("step-size underflow reports the time reached") {
    // f blows up at t=0.5; the controller must shrink h to underflow
    struct Blowup {
        int size() const { return 1; }
        void rhs(double t, const Eigen::VectorXd& y, Eigen::VectorXd& f) const {
            f.resize(1);
            f[0] = y[0] * y[0];
        }
        void jacobian_times(double, const Eigen::VectorXd& y, double w, DenseMatrix& m) const {
            m.matrix()(0, 0) = 1.0 - w * 2.0 * y[0];
        }
    } sys;
    StiffOptions opts;
    opts.h_min = 1e-10;
    TrBdf2<Blowup, DenseMatrix> stepper(sys, DenseMatrix(1), opts);
    Eigen::VectorXd y0(1);
    y0 << 2.0;  // solution 2/(1-2t), singular at t=0.5
    CHECK_THROWS_AS(stepper.integrate(0.0, 1.0, y0), StiffFailure);
}
