#include "tapkin/reaction.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tapkin {

namespace {

double ipow(double base, int e) {
    double out = 1.0;
    for (int i = 0; i < e; ++i) out *= base;
    return out;
}

void check_inputs(const Eigen::VectorXd& conc, const RateConstants& k,
                  const ReactionNetwork& net) {
    if (conc.size() != net.n_species())
        throw std::invalid_argument("concentration vector length does not match network");
    if (k.k.size() != net.n_reactions())
        throw std::invalid_argument("rate constant vector length does not match network");
    for (int i = 0; i < conc.size(); ++i) {
        if (!std::isfinite(conc[i]) || conc[i] < 0.0)
            throw std::invalid_argument("concentrations must be finite and nonnegative");
    }
}

}  // namespace

std::string Species::column_name() const {
    if (name == "*") return "free";
    std::string out;
    for (char c : name) {
        if (c == '*')
            out += "ads";
        else if (std::isalnum(static_cast<unsigned char>(c)))
            out += c;
        else
            out += '_';
    }
    return out;
}

int ReactionNetwork::n_gas() const {
    int n = 0;
    for (const auto& s : species)
        if (s.is_gas()) ++n;
    return n;
}

int ReactionNetwork::species_index(const std::string& name) const {
    for (int i = 0; i < n_species(); ++i)
        if (species[i].name == name) return i;
    throw std::invalid_argument("unknown species: " + name);
}

std::vector<std::string> ReactionNetwork::gas_names() const {
    std::vector<std::string> out;
    for (const auto& s : species)
        if (s.is_gas()) out.push_back(s.name);
    return out;
}

ReactionNetwork co_oxidation_network() {
    ReactionNetwork net;
    net.species = {
        {"CO", Phase::Gas, 28.01, {{"C", 1}, {"O", 1}}},
        {"O2", Phase::Gas, 32.00, {{"O", 2}}},
        {"CO2", Phase::Gas, 44.01, {{"C", 1}, {"O", 2}}},
        {"CO*", Phase::Surface, 0.0, {{"C", 1}, {"O", 1}}},
        {"O*", Phase::Surface, 0.0, {{"O", 1}}},
        {"*", Phase::Surface, 0.0, {}},
    };
    net.reaction_names = {"k1", "k-1", "k2", "k3", "k-3", "k4"};
    net.reaction_units = {"cm3/(nmol*s)", "1/s",          "cm6/(nmol^2*s)",
                          "cm3/(nmol*s)", "cm6/(nmol^2*s)", "cm3/(nmol*s)"};
    net.element_names = {"C", "O"};

    const int n = 6, m = 6;
    net.stoich = Eigen::MatrixXd::Zero(n, m);
    // columns: CO+* -> CO* | CO* -> CO+* | O2+2* -> 2O* |
    //          CO*+O* -> CO2+2* | CO2+2* -> CO*+O* | CO+O* -> CO2+*
    // rows: CO, O2, CO2, CO*, O*, *
    net.stoich << -1,  1,  0,  0,  0, -1,
                   0,  0, -1,  0,  0,  0,
                   0,  0,  0,  1, -1,  1,
                   1, -1,  0, -1,  1,  0,
                   0,  0,  2, -1,  1, -1,
                  -1,  1, -2,  2, -2,  1;

    net.exponents = Eigen::MatrixXi::Zero(m, n);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i)
            if (net.stoich(i, j) < 0.0)
                net.exponents(j, i) = static_cast<int>(-net.stoich(i, j));

    net.composition = Eigen::MatrixXd::Zero(2, n);
    for (int i = 0; i < n; ++i) {
        for (int e = 0; e < 2; ++e) {
            auto it = net.species[i].elements.find(net.element_names[e]);
            net.composition(e, i) = it == net.species[i].elements.end() ? 0.0 : it->second;
        }
    }

    net.site_counts = Eigen::VectorXd::Zero(n);
    net.site_counts[3] = net.site_counts[4] = net.site_counts[5] = 1.0;
    return net;
}

RateConstants co_oxidation_rate_constants() {
    RateConstants k;
    k.k.resize(6);
    k.k << 15.0, 0.70, 0.33, 0.40, 0.02, 15.2;
    return k;
}

Eigen::VectorXd rate_basis(const Eigen::VectorXd& conc, const ReactionNetwork& net) {
    const int m = net.n_reactions();
    Eigen::VectorXd psi(m);
    for (int j = 0; j < m; ++j) {
        double p = 1.0;
        for (int i = 0; i < net.n_species(); ++i) {
            const int e = net.exponents(j, i);
            if (e > 0) p *= ipow(conc[i], e);
        }
        psi[j] = p;
    }
    return psi;
}

Eigen::MatrixXd rate_basis_jacobian(const Eigen::VectorXd& conc, const ReactionNetwork& net) {
    const int m = net.n_reactions(), n = net.n_species();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, n);
    for (int j = 0; j < m; ++j) {
        for (int q = 0; q < n; ++q) {
            const int eq = net.exponents(j, q);
            if (eq == 0) continue;
            double p = eq * ipow(conc[q], eq - 1);
            for (int i = 0; i < n; ++i) {
                if (i == q) continue;
                const int e = net.exponents(j, i);
                if (e > 0) p *= ipow(conc[i], e);
            }
            jac(j, q) = p;
        }
    }
    return jac;
}

Eigen::VectorXd elementary_rates(const Eigen::VectorXd& conc, const RateConstants& k,
                                 const ReactionNetwork& net) {
    check_inputs(conc, k, net);
    return k.k.cwiseProduct(rate_basis(conc, net));
}

Eigen::VectorXd species_rates(const Eigen::VectorXd& conc, const RateConstants& k,
                              const ReactionNetwork& net) {
    return net.stoich * elementary_rates(conc, k, net);
}

Eigen::MatrixXd species_rate_jacobian(const Eigen::VectorXd& conc, const RateConstants& k,
                                      const ReactionNetwork& net) {
    return net.stoich * k.k.asDiagonal() * rate_basis_jacobian(conc, net);
}

std::vector<std::string> validate_network(const ReactionNetwork& net) {
    std::vector<std::string> issues;
    const int n = net.n_species(), m = net.n_reactions();
    std::ostringstream msg;

    // gas species must precede surface species
    bool seen_surface = false;
    for (int i = 0; i < n; ++i) {
        if (!net.species[i].is_gas()) seen_surface = true;
        else if (seen_surface)
            issues.push_back("species ordering: gas species '" + net.species[i].name +
                             "' listed after a surface species");
    }

    for (int j = 0; j < m; ++j) {
        const std::string rname = j < static_cast<int>(net.reaction_names.size())
                                      ? net.reaction_names[j]
                                      : "reaction " + std::to_string(j);
        // mass-action order must equal the (negated) reactant stoichiometry
        for (int i = 0; i < n; ++i) {
            const int e = net.exponents(j, i);
            const double s = net.stoich(i, j);
            if (e > 0 && s >= 0.0) {
                msg.str("");
                msg << rname << ": exponent " << e << " on non-reactant species '"
                    << net.species[i].name << "'";
                issues.push_back(msg.str());
            } else if (s < 0.0 && e != static_cast<int>(-s)) {
                msg.str("");
                msg << rname << ": mass-action order " << e << " for species '"
                    << net.species[i].name << "' does not match stoichiometry " << -s;
                issues.push_back(msg.str());
            }
        }
        // element conservation per reaction column
        const Eigen::VectorXd balance = net.composition * net.stoich.col(j);
        for (int e = 0; e < balance.size(); ++e) {
            if (std::abs(balance[e]) > 1e-12) {
                msg.str("");
                msg << rname << ": element '" << net.element_names[e]
                    << "' not conserved (imbalance " << balance[e] << ")";
                issues.push_back(msg.str());
            }
        }
        // site conservation per reaction column
        const double sites = net.site_counts.dot(net.stoich.col(j));
        if (std::abs(sites) > 1e-12) {
            msg.str("");
            msg << rname << ": surface sites not conserved (imbalance " << sites << ")";
            issues.push_back(msg.str());
        }
    }

    for (int i = 0; i < n; ++i) {
        for (const auto& [elem, count] : net.species[i].elements) {
            if (count < 0)
                issues.push_back("species '" + net.species[i].name +
                                 "': negative element count for " + elem);
        }
    }
    return issues;
}

}  // namespace tapkin
