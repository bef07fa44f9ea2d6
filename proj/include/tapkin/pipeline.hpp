#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tapkin/reaction.hpp"
#include "tapkin/reactor.hpp"
#include "tapkin/rng.hpp"

namespace tapkin {

struct NoiseSpec {
    double level = 0.0;       // multiplier of each signal's standard deviation
    std::uint64_t seed = 0;
};

struct SamplingSpec {
    int points_per_pulse = 200;
    double split_time = 0.5;      // s
    double split_fraction = 0.5;  // share of points placed in (0, split_time]
};

enum class DatasetMode { Ideal, Practical };

/// Per-channel scales applied before training; unscale(scale(x)) == x.
struct ScalingInfo {
    Eigen::VectorXd conc_scale;    // per species, nmol/cm3
    Eigen::VectorXd moment_scale;  // per gas species, nmol
    double uptake_scale = 1.0;     // nmol/cm3
};

/// One pulse's worth of training/testing rows at the subsampled times.
struct PulseSamples {
    int pulse_index = 0;
    Eigen::VectorXd times;            // s, strictly increasing, > 0
    Eigen::VectorXd log_times;        // ln t
    Eigen::VectorXd moment_features;  // scaled m0 per gas species
    Eigen::VectorXd raw_moments;      // unscaled m0 per gas species, nmol
    Eigen::MatrixXd targets;          // n_species x T, scaled; NaN where unobserved
    Eigen::MatrixXd flux_term;        // n_gas x T, (f_in - f_out)/(e*l_cat), nmol/(cm3*s)
    Eigen::MatrixXd uptake;           // n_elements x T, scaled (practical mode; 0x0 otherwise)
};

struct PulseDataset {
    DatasetMode mode = DatasetMode::Ideal;
    NoiseSpec noise;
    SamplingSpec sampling;
    std::vector<int> train_pulses, test_pulses;
    std::vector<PulseSamples> pulses;  // indexed by pulse number
    ScalingInfo scaling;
    double voidage = 0.4;           // catalyst-zone voidage used in the flux term
    double catalyst_length = 0.1;   // cm
    double site_density = 0.0;      // nmol/cm3, backs the total-site uptake row
    std::vector<std::string> species_names;
    std::vector<std::string> element_names;
    std::vector<std::string> uptake_rows;  // element names plus "sites" (practical mode)
    std::vector<int> observed_species;     // indices with targets present

    int n_species() const { return static_cast<int>(species_names.size()); }
    int n_elements() const { return static_cast<int>(element_names.size()); }
    int n_uptake_rows() const {
        return static_cast<int>(uptake_rows.empty() ? element_names.size()
                                                    : uptake_rows.size());
    }
    bool has_uptake() const { return mode == DatasetMode::Practical; }
};

/// Additive zero-mean Gaussian noise with standard deviation
/// level * std(signal), homoskedastic per series.
Eigen::VectorXd add_noise(const Eigen::VectorXd& signal, const NoiseSpec& spec);
Eigen::VectorXd add_noise(const Eigen::VectorXd& signal, double level, RandomStream& rng);

/// Savitzky-Golay smoothing on a uniformly spaced series; edges are handled
/// by evaluating the first/last full-window polynomial fit.
Eigen::VectorXd savgol_smooth(const Eigen::VectorXd& signal, int window, int poly_order);

/// Local polynomial least-squares fit (possibly non-uniform abscissa);
/// returns the fitted value and first derivative on the input grid.
void savgol_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int window, int poly_order,
                Eigen::VectorXd& value, Eigen::VectorXd& derivative);

/// Deterministic two-segment subsampling: ceil(split_fraction*n) indices
/// spread over (0, split_time], the rest over (split_time, horizon]. Never
/// selects t <= 0.
std::vector<int> subsample_times(const std::vector<double>& times, int n_points,
                                 double split_time, double split_fraction);

/// Zeroth moments: trapezoidal time integral of each outlet flux, nmol.
Eigen::VectorXd zeroth_moments(const PulseRecord& record);
Eigen::VectorXd zeroth_moments(const std::vector<double>& times,
                               const Eigen::MatrixXd& outlet_flux);

/// Converts pulse records into a KINN-ready dataset. Ideal mode keeps every
/// channel noiseless and exposes adspecies targets; practical mode applies
/// noise to the thin-zone gas concentrations, boundary fluxes and outlet
/// fluxes, hides adspecies and carries per-element uptake targets instead.
PulseDataset build_dataset(const std::vector<PulseRecord>& records, const ReactionNetwork& net,
                           const ReactorConfig& reactor, DatasetMode mode,
                           const NoiseSpec& noise, const SamplingSpec& sampling,
                           const std::vector<int>& train_pulses,
                           const std::vector<int>& test_pulses);

/// dataset directory IO: train.csv / test.csv / scaling.csv / dataset.meta
void write_dataset(const PulseDataset& dataset, const std::string& dir);
PulseDataset read_dataset(const std::string& dir);

/// Reactor-stage CSV emission (pulse_<p>_outlet.csv, pulse_<p>_thinzone.csv).
void write_pulse_records(const std::vector<PulseRecord>& records, const ReactionNetwork& net,
                         const std::string& dir);
std::vector<PulseRecord> read_pulse_records(const std::string& dir, const ReactionNetwork& net);

}  // namespace tapkin
