#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace tapkin {

enum class Phase { Gas, Surface };

struct Species {
    std::string name;                       // display name, e.g. "CO*"
    Phase phase = Phase::Gas;
    double molar_mass = 0.0;                // g/mol, gas species only
    std::map<std::string, int> elements;    // element -> atom count

    bool is_gas() const { return phase == Phase::Gas; }

    /// CSV/file-safe column identifier ("CO*" -> "COads", "*" -> "free").
    std::string column_name() const;
};

/// Micro-kinetic reaction network: species (gas first, then surface),
/// stoichiometry M (n x m), mass-action exponents (m x n), element
/// composition E (elements x n) and per-surface-species site counts.
struct ReactionNetwork {
    std::vector<Species> species;
    std::vector<std::string> reaction_names;   // e.g. "k1", "k-1"
    std::vector<std::string> reaction_units;   // unit string per rate constant
    std::vector<std::string> element_names;
    Eigen::MatrixXd stoich;        // n x m
    Eigen::MatrixXi exponents;     // m x n, power-law order of each reactant
    Eigen::MatrixXd composition;   // elements x n
    Eigen::VectorXd site_counts;   // n, zero for gas species

    int n_species() const { return static_cast<int>(species.size()); }
    int n_reactions() const { return static_cast<int>(stoich.cols()); }
    int n_gas() const;
    int n_surface() const { return n_species() - n_gas(); }
    int species_index(const std::string& name) const;

    std::vector<std::string> gas_names() const;
};

struct RateConstants {
    Eigen::VectorXd k;
};

/// Builds the six-step CO oxidation network (species order CO, O2, CO2,
/// CO*, O*, *) together with its reference rate constants.
ReactionNetwork co_oxidation_network();
RateConstants co_oxidation_rate_constants();

/// Per-reaction rates: rate_j = k_j * prod_i c_i^exponents(j,i).
Eigen::VectorXd elementary_rates(const Eigen::VectorXd& conc, const RateConstants& k,
                                 const ReactionNetwork& net);

/// Net per-species rates r = M * (k o psi(c)).
Eigen::VectorXd species_rates(const Eigen::VectorXd& conc, const RateConstants& k,
                              const ReactionNetwork& net);

/// Jacobian dr/dc (n x n); used by implicit integrators and the KINN
/// back-propagation.
Eigen::MatrixXd species_rate_jacobian(const Eigen::VectorXd& conc, const RateConstants& k,
                                      const ReactionNetwork& net);

/// d psi_j / d c_i (m x n) at the given concentrations.
Eigen::MatrixXd rate_basis_jacobian(const Eigen::VectorXd& conc, const ReactionNetwork& net);

/// Power-law basis psi_j(c) for each reaction (no rate constants applied).
Eigen::VectorXd rate_basis(const Eigen::VectorXd& conc, const ReactionNetwork& net);

/// Diagnostic check of the network invariants. Empty result means the
/// network is consistent; each entry names the offending reaction/species.
std::vector<std::string> validate_network(const ReactionNetwork& net);

}  // namespace tapkin
