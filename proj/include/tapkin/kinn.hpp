#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tapkin/pipeline.hpp"
#include "tapkin/reaction.hpp"

namespace tapkin {

/// Joint parameter set: MLP weights/biases plus the optimizer's unconstrained
/// view of the rate constants (the rate law sees k = |kinetic_raw|).
struct KinnParameters {
    std::vector<int> layer_sizes;          // e.g. {1, 8, 6} or {4, 10, 10, 6}
    std::vector<Eigen::MatrixXd> weights;  // out x in per layer
    std::vector<Eigen::VectorXd> biases;
    Eigen::VectorXd kinetic_raw;
    bool output_softplus = true;  // disabled only in linear test configurations

    int n_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }

    /// Network parameter count: sum over layers of (in+1)*out.
    int network_parameter_count() const;
    int total_parameter_count() const {
        return network_parameter_count() + static_cast<int>(kinetic_raw.size());
    }

    Eigen::VectorXd kinetic() const { return kinetic_raw.cwiseAbs(); }

    /// flat layout: per layer W row-major then b; kinetic_raw at the tail
    Eigen::VectorXd pack() const;
    void unpack(const Eigen::VectorXd& theta);

    static KinnParameters zeros(const std::vector<int>& layer_sizes, int n_kinetic);
    static KinnParameters random_init(const std::vector<int>& layer_sizes, int n_kinetic,
                                      double weight_scale, double kinetic_init,
                                      std::uint64_t seed);

    void save(const std::string& path, const std::vector<std::string>& species,
              const ScalingInfo& scaling, const std::vector<std::string>& kinetic_names,
              const std::vector<std::string>& kinetic_units) const;
    static KinnParameters load(const std::string& path);
};

struct TrainingStage {
    double alpha = 0.0;
    double beta = 0.0;
    int epochs = 5;
    double step_scale = 1.0;  // multiplies the schedule step size in this stage
};

struct TrainingSchedule {
    std::vector<TrainingStage> stages;
    int iterations_per_epoch = 1000;
    double step_size = 1e-3;
    double init_scale_weights = 1e-2;
    double init_scale_kinetic = 1e-5;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

/// alpha ramps 1e-10 -> 1 by factors of 10, then holds for a polish stage.
TrainingSchedule single_pulse_schedule();
/// alpha ramps 1e-10 -> 1e-3, no uptake term.
TrainingSchedule multi_pulse_ideal_schedule();
/// alpha 1e-10 -> 1e-3 with beta ramping 1e-7 -> 1 in lockstep.
TrainingSchedule multi_pulse_practical_schedule();

struct LossBreakdown {
    double j_data = 0.0;
    double j_model = 0.0;
    double j_uptake = 0.0;
    double total(double alpha, double beta) const {
        return j_data + alpha * j_model + beta * j_uptake;
    }
};

struct FitReport {
    LossBreakdown final_loss;
    double alpha_final = 0.0, beta_final = 0.0;
    double J_final = 0.0;
    Eigen::VectorXd k_fit;
    std::vector<std::string> k_names, k_units;
    Eigen::VectorXd k_true;  // ground truth when known (synthetic studies)

    struct TrajectoryPoint {
        int stage = 0, epoch = 0;
        double alpha = 0.0, beta = 0.0;
        double j_data = 0.0, j_model = 0.0, j_uptake = 0.0, J = 0.0;
    };
    std::vector<TrajectoryPoint> trajectory;

    double train_conc_mae = 0.0, test_conc_mae = 0.0;
    double train_conc_r2 = 0.0, test_conc_r2 = 0.0;
    double train_rate_mae = 0.0, test_rate_mae = 0.0;
    double train_rate_r2 = 0.0, test_rate_r2 = 0.0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    std::string schedule_echo;
};

struct TrainingDivergence : std::runtime_error {
    TrainingDivergence(int stage, int epoch, int iteration)
        : std::runtime_error("training diverged (non-finite loss) at stage " +
                             std::to_string(stage) + ", epoch " + std::to_string(epoch) +
                             ", iteration " + std::to_string(iteration)) {}
};

/// Scaled network outputs for one feature vector.
Eigen::VectorXd mlp_forward(const KinnParameters& params, const Eigen::VectorXd& features);

/// Unscaled concentrations and their exact time derivatives at t:
/// c_i = s_i N_i(ln t, moments), dc_i/dt = s_i dN_i/du / t.
void state_and_derivative(const KinnParameters& params, const ScalingInfo& scaling, double t,
                          const Eigen::VectorXd& moment_features, Eigen::VectorXd& conc,
                          Eigen::VectorXd& dconc_dt);

/// Scaled-unit model residual at one sample: for gas species
/// [dc/dt - flux_term - r/e] / s, for adspecies [dc/dt - r] / s, with
/// flux_term = (f_in - f_out)/(e*l_cat) as stored in the dataset.
Eigen::VectorXd model_residual(const KinnParameters& params, const ScalingInfo& scaling,
                               const ReactionNetwork& net, double voidage, double t,
                               const Eigen::VectorXd& moment_features,
                               const Eigen::VectorXd& flux_term);

/// Composite loss over the given pulses (defaults to the training split).
LossBreakdown total_loss(const KinnParameters& params, const PulseDataset& dataset,
                         const ReactionNetwork& net, const std::vector<int>& pulses);

/// Loss plus the exact gradient with respect to the packed parameter vector
/// (weights, biases, kinetic_raw), including the second-order path through
/// the network's time derivative.
LossBreakdown loss_gradient(const KinnParameters& params, const PulseDataset& dataset,
                            const ReactionNetwork& net, const std::vector<int>& pulses,
                            double alpha, double beta, Eigen::VectorXd& grad);

/// Full-batch Adam over the staged alpha/beta schedule.
std::pair<KinnParameters, FitReport> train(const PulseDataset& dataset,
                                           const ReactionNetwork& net,
                                           const TrainingSchedule& schedule,
                                           const std::vector<int>& layer_sizes);

/// Unscaled concentration trajectories for arbitrary moment features/times.
Eigen::MatrixXd predict_pulse(const KinnParameters& params, const ScalingInfo& scaling,
                              const Eigen::VectorXd& moment_features,
                              const Eigen::VectorXd& times);

void save_fit_report(const FitReport& report, const std::string& path);
FitReport load_fit_report(const std::string& path);

}  // namespace tapkin
