#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "tapkin/reaction.hpp"

namespace tapkin {

/// Three-zone TAP reactor geometry and solver settings. Concentrations are
/// nmol/cm3, lengths cm, times s throughout.
struct ReactorConfig {
    std::array<double, 3> zone_lengths{1.85, 0.1, 1.85};  // inert1, catalyst, inert2
    std::array<double, 3> voidage{0.4, 0.4, 0.4};
    double cross_section_area = 1.0;   // cm2
    double diffusion_ref = 16.0;       // cm2/s at ref_molar_mass
    double ref_molar_mass = 40.0;      // g/mol
    double site_density = 30.0;        // nmol/cm3 of catalyst zone
    std::array<int, 3> grid_points{60, 10, 60};
    double time_horizon = 3.0;         // s
    double output_timestep = 1e-3;     // s

    double total_length() const { return zone_lengths[0] + zone_lengths[1] + zone_lengths[2]; }
    double catalyst_length() const { return zone_lengths[1]; }
    double catalyst_voidage() const { return voidage[1]; }

    /// Validation messages; empty when the configuration is usable. A
    /// catalyst zone above 10% of the total length is reported as a warning
    /// string starting with "warning:".
    std::vector<std::string> validate() const;
};

struct PulseSpec {
    Eigen::VectorXd intensities;   // nmol per gas species, network order
    double injection_width = 0.0;  // cm; 0 -> two inlet grid cells
};

/// Output of one pulse simulation on the configured output grid.
struct PulseRecord {
    std::vector<double> times;                  // s
    Eigen::MatrixXd outlet_flux;                // n_gas x T, nmol/s
    Eigen::MatrixXd thin_zone;                  // n_species x T, nmol/cm3 (catalyst average)
    Eigen::MatrixXd boundary_flux_in;           // n_gas x T, nmol/(cm2*s)
    Eigen::MatrixXd boundary_flux_out;          // n_gas x T, nmol/(cm2*s)
    Eigen::MatrixXd escaped;                    // n_gas x T, cumulative nmol out of the reactor
    Eigen::MatrixXd gas_total;                  // n_gas x T, nmol held in the reactor gas phase
    Eigen::VectorXd surface_start;              // n_surface, catalyst average at t=0
    Eigen::VectorXd surface_state_final;        // n_surface, catalyst average at horizon
    Eigen::MatrixXd surface_field_final;        // n_surface x catalyst cells (train carryover)
    Eigen::VectorXd injected;                   // n_gas, nmol actually placed on the grid

    int n_times() const { return static_cast<int>(times.size()); }
};

/// Solves the three-zone diffusion-reaction PDE for a single pulse. The
/// initial surface state is uniform across the catalyst zone.
PulseRecord simulate_pulse(const ReactorConfig& reactor, const ReactionNetwork& net,
                           const RateConstants& k, const Eigen::VectorXd& surface0,
                           const PulseSpec& pulse);

/// Sequential pulse train: each pulse starts from the previous pulse's final
/// surface field; the gas phase is re-initialized (full evacuation between
/// pulses).
std::vector<PulseRecord> simulate_pulse_train(const ReactorConfig& reactor,
                                              const ReactionNetwork& net, const RateConstants& k,
                                              const Eigen::VectorXd& surface0,
                                              const PulseSpec& pulse, int n_pulses);

/// Dimensionless standard diffusion curve for a one-zone reactor with a
/// reflecting inlet and absorbing outlet: the eigenfunction series
/// pi * sum_n (-1)^n (2n+1) exp(-(n+1/2)^2 pi^2 tau), truncated once the
/// partial sums settle below 1e-10.
double inert_reference_curve(double tau);
Eigen::VectorXd inert_reference_curve(const Eigen::VectorXd& tau_grid);

}  // namespace tapkin
