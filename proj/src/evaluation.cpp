#include "tapkin/evaluation.hpp"

#include <cmath>
#include <stdexcept>

#include "tapkin/stiff.hpp"

namespace tapkin {

namespace {

constexpr double k_boltzmann_ev = 8.617333262e-5;  // eV/K

struct ThinZoneOde {
    const ReactionNetwork& net;
    const RateConstants& k;
    const PulseRecord& record;
    double voidage;
    double catalyst_length;

    int size() const { return net.n_species(); }

    Eigen::VectorXd flux_term(double t) const {
        const auto& times = record.times;
        const int T = record.n_times();
        int lo = 0, hi = T - 1;
        if (t <= times.front()) {
            lo = hi = 0;
        } else if (t >= times.back()) {
            lo = hi = T - 1;
        } else {
            while (hi - lo > 1) {
                const int mid = (lo + hi) / 2;
                (times[mid] <= t ? lo : hi) = mid;
            }
        }
        const int n_gas = net.n_gas();
        Eigen::VectorXd g(n_gas);
        for (int i = 0; i < n_gas; ++i) {
            double fin, fout;
            if (lo == hi) {
                fin = record.boundary_flux_in(i, lo);
                fout = record.boundary_flux_out(i, lo);
            } else {
                const double w = (t - times[lo]) / (times[hi] - times[lo]);
                fin = (1 - w) * record.boundary_flux_in(i, lo) +
                      w * record.boundary_flux_in(i, hi);
                fout = (1 - w) * record.boundary_flux_out(i, lo) +
                       w * record.boundary_flux_out(i, hi);
            }
            g[i] = (fin - fout) / catalyst_length;
        }
        return g;
    }

    void rhs(double t, const Eigen::VectorXd& y, Eigen::VectorXd& f) const {
        const Eigen::VectorXd conc = y.cwiseMax(0.0);
        const Eigen::VectorXd r = net.stoich * k.k.cwiseProduct(rate_basis(conc, net));
        const Eigen::VectorXd g = flux_term(t);
        const int n_gas = net.n_gas();
        f.resize(net.n_species());
        for (int i = 0; i < net.n_species(); ++i)
            f[i] = i < n_gas ? (g[i] + r[i]) / voidage : r[i];
    }

    void jacobian_times(double, const Eigen::VectorXd& y, double w, DenseMatrix& m) const {
        const Eigen::MatrixXd jr = species_rate_jacobian(y.cwiseMax(0.0), k, net);
        const int n = net.n_species(), n_gas = net.n_gas();
        Eigen::MatrixXd jac(n, n);
        for (int row = 0; row < n; ++row)
            jac.row(row) = (row < n_gas ? 1.0 / voidage : 1.0) * jr.row(row);
        m.matrix() = Eigen::MatrixXd::Identity(n, n) - w * jac;
    }
};

}  // namespace

UncertaintyReport parameter_std(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& kinetic_gradient,
    const Eigen::VectorXd& k_opt, double alpha, double beta) {
    const int m = static_cast<int>(k_opt.size());
    Eigen::MatrixXd hessian(m, m);
    for (int i = 0; i < m; ++i) {
        const double h = 1e-5 * std::max(std::abs(k_opt[i]), 1e-6);
        Eigen::VectorXd kp = k_opt, km = k_opt;
        kp[i] += h;
        km[i] -= h;
        hessian.col(i) = (kinetic_gradient(kp) - kinetic_gradient(km)) / (2.0 * h);
    }
    if (!hessian.allFinite()) throw std::runtime_error("non-finite Hessian entries");
    hessian = 0.5 * (hessian + hessian.transpose()).eval();

    UncertaintyReport report;
    report.k = k_opt;
    report.alpha = alpha;
    report.beta = beta;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian);
    const double min_ev = eig.eigenvalues().minCoeff();
    if (min_ev < 1e-10) {
        hessian += (1e-10 - min_ev) * Eigen::MatrixXd::Identity(m, m);
        report.ridged = true;
        eig.compute(hessian);
    }
    report.condition_number = eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
    report.covariance = hessian.inverse();
    report.covariance = 0.5 * (report.covariance + report.covariance.transpose()).eval();
    report.sigma = report.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    return report;
}

EnergyScaleError energy_scale_mae(const Eigen::VectorXd& k_fit, const Eigen::VectorXd& k_true,
                                  double temperature_K) {
    if (k_fit.size() != k_true.size())
        throw std::invalid_argument("energy_scale_mae: length mismatch");
    if (temperature_K <= 0.0) throw std::invalid_argument("temperature must be positive");
    EnergyScaleError out;
    for (int i = 0; i < k_fit.size(); ++i) {
        if (k_fit[i] <= 0.0 || k_true[i] <= 0.0)
            throw std::invalid_argument("energy_scale_mae: nonpositive rate constant");
        out.mean_abs_log_ratio += std::abs(std::log(k_fit[i] / k_true[i]));
    }
    out.mean_abs_log_ratio /= k_fit.size();
    out.mae_ev = k_boltzmann_ev * temperature_K * out.mean_abs_log_ratio;
    return out;
}

ParityMetrics parity_metrics(const Eigen::VectorXd& predicted, const Eigen::VectorXd& target) {
    if (predicted.size() != target.size() || predicted.size() < 2)
        throw std::invalid_argument("parity_metrics: need two equal-length series");
    ParityMetrics out;
    out.mae = (predicted - target).cwiseAbs().mean();
    const double mean = target.mean();
    const double ss_tot = (target.array() - mean).square().sum();
    if (ss_tot > 0.0) {
        const double ss_res = (predicted - target).squaredNorm();
        out.r2 = 1.0 - ss_res / ss_tot;
    }
    return out;
}

Eigen::MatrixXd rebuild_ode(const RateConstants& k_fit, const ReactionNetwork& net,
                            const PulseRecord& record, const Eigen::VectorXd& c0,
                            double voidage, double catalyst_length) {
    if (c0.size() != net.n_species())
        throw std::invalid_argument("rebuild_ode: initial state length mismatch");
    ThinZoneOde sys{net, k_fit, record, voidage, catalyst_length};
    StiffOptions opts;
    opts.rtol = 1e-8;
    opts.atol = 1e-12;
    TrBdf2<ThinZoneOde, DenseMatrix> stepper(sys, DenseMatrix(net.n_species()), opts);

    const int T = record.n_times();
    Eigen::MatrixXd out(net.n_species(), T);
    out.col(0) = c0;
    int next = 1;
    const double t0 = record.times.front();
    const Eigen::VectorXd y_final =
        stepper.integrate(t0, record.times.back(), c0, [&](const StepRecord& s) {
            while (next < T && record.times[next] <= s.t1 + 1e-15) {
                out.col(next) = hermite_eval(s, record.times[next]);
                ++next;
            }
        });
    if (next < T) out.col(T - 1) = y_final;
    return out;
}

}  // namespace tapkin
