#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tapkin/pipeline.hpp"
#include "tapkin/reaction.hpp"

namespace tapkin {

/// Derivative-matching least-squares baseline: smooth, differentiate, then
/// solve for k. A simplified surrogate for DAE-collocation fitting; it shares
/// the failure mode of differentiating noisy data.
struct SmoothingSpec {
    bool enabled = false;  // disabled -> central differences
    int window = 31;
    int poly_order = 3;
};

struct BaselineResult {
    Eigen::VectorXd k;
    std::vector<bool> converged;  // per parameter; false for clamped/ill-posed entries
    double residual_norm = 0.0;
    double condition_number = 0.0;
    SmoothingSpec smoothing;
    std::vector<std::string> k_names;

    bool all_converged() const {
        for (bool c : converged)
            if (!c) return false;
        return true;
    }
};

/// Smoothed values and time derivatives on the input grid. With smoothing
/// disabled this is plain central differencing (one-sided at the ends).
void estimate_derivatives(const Eigen::VectorXd& times, const Eigen::VectorXd& concentration,
                          const SmoothingSpec& smoothing, Eigen::VectorXd& value,
                          Eigen::VectorXd& derivative);

/// Nonnegative least squares for the rate constants: the targets
/// e*dc/dt - g (gas, observed) and dc/dt (surface, when observed) are linear
/// in k with basis columns M(i,j)*psi_j(c(t)). Parameters with negligible
/// basis columns, severe conditioning involvement, or zero-clamped solutions
/// are flagged unconverged.
BaselineResult fit_k_linear_ls(const Eigen::VectorXd& times, const Eigen::MatrixXd& conc,
                               const Eigen::MatrixXd& dconc_dt,
                               const Eigen::MatrixXd& gas_flux_term,
                               const std::vector<int>& observed_species,
                               const ReactionNetwork& net, double voidage);

/// Lawson-Hanson nonnegative least squares min |A x - b|, x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter = 200);

/// Full baseline pipeline over a dataset: per-pulse smoothing and
/// differentiation of the observed channels; in practical mode the adspecies
/// trajectories are reconstructed from the uptake targets before evaluating
/// the power-law basis.
BaselineResult run_baseline(const PulseDataset& dataset, const ReactionNetwork& net,
                            const SmoothingSpec& smoothing, double site_density);

void save_baseline_report(const BaselineResult& result, const Eigen::VectorXd& k_true,
                          const std::string& path);
BaselineResult load_baseline_report(const std::string& path);

}  // namespace tapkin
