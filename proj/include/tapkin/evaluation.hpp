#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tapkin/reaction.hpp"
#include "tapkin/reactor.hpp"

namespace tapkin {

/// Inverse-Hessian sensitivity proxy for the kinetic parameters (labeled a
/// proxy everywhere: the Hessian depends on the loss weighting).
struct UncertaintyReport {
    Eigen::VectorXd k;
    Eigen::MatrixXd covariance;  // P = H^-1 (after any ridge)
    Eigen::VectorXd sigma;       // sqrt(diag(P))
    double condition_number = 0.0;
    bool ridged = false;         // Hessian needed diagonal regularization
    double alpha = 0.0, beta = 0.0;
};

/// Hessian of the loss over the kinetic parameters only, by central finite
/// differences of the supplied gradient; P = H^-1 with a diagonal ridge
/// (flagged) when the smallest eigenvalue is below 1e-10.
UncertaintyReport parameter_std(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& kinetic_gradient,
    const Eigen::VectorXd& k_opt, double alpha, double beta);

/// Eyring-style energy error: kB*T (eV) * mean |ln(k_fit/k_true)|. Also
/// returns the temperature-independent mean |ln ratio|.
struct EnergyScaleError {
    double mae_ev = 0.0;
    double mean_abs_log_ratio = 0.0;
};
EnergyScaleError energy_scale_mae(const Eigen::VectorXd& k_fit, const Eigen::VectorXd& k_true,
                                  double temperature_K);

struct ParityMetrics {
    double mae = 0.0;
    std::optional<double> r2;  // absent when the target has zero variance
};
ParityMetrics parity_metrics(const Eigen::VectorXd& predicted, const Eigen::VectorXd& target);

/// Integrates the thin-zone ODE e dc/dt = g + r (gas), dc/dt = r (surface)
/// on the record's time grid, with g = (f_in - f_out)/l_cat interpolated
/// linearly from the pulse record.
Eigen::MatrixXd rebuild_ode(const RateConstants& k_fit, const ReactionNetwork& net,
                            const PulseRecord& record, const Eigen::VectorXd& c0,
                            double voidage, double catalyst_length);

}  // namespace tapkin
