#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "tapkin/reaction.hpp"
#include "tapkin/rng.hpp"

using namespace tapkin;

namespace {

// brute-force oracle: explicit per-term products and sums, no linear algebra
Eigen::VectorXd oracle_elementary(const Eigen::VectorXd& c, const Eigen::VectorXd& k,
                                  const ReactionNetwork& net) {
    Eigen::VectorXd out(net.n_reactions());
    for (int j = 0; j < net.n_reactions(); ++j) {
        double rate = k[j];
        for (int i = 0; i < net.n_species(); ++i)
            for (int rep = 0; rep < net.exponents(j, i); ++rep) rate *= c[i];
        out[j] = rate;
    }
    return out;
}

Eigen::VectorXd oracle_species(const Eigen::VectorXd& c, const Eigen::VectorXd& k,
                               const ReactionNetwork& net) {
    const Eigen::VectorXd rates = oracle_elementary(c, k, net);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(net.n_species());
    for (int i = 0; i < net.n_species(); ++i)
        for (int j = 0; j < net.n_reactions(); ++j) out[i] += net.stoich(i, j) * rates[j];
    return out;
}

}  // namespace

TEST_CASE("CO oxidation network passes validation") {
    const auto net = co_oxidation_network();
    CHECK(net.n_species() == 6);
    CHECK(net.n_reactions() == 6);
    CHECK(net.n_gas() == 3);
    CHECK(validate_network(net).empty());
}

TEST_CASE("elementary rates at unit concentrations equal the rate constants") {
    const auto net = co_oxidation_network();
    const auto k = co_oxidation_rate_constants();
    const Eigen::VectorXd c = Eigen::VectorXd::Ones(6);
    const Eigen::VectorXd rates = elementary_rates(c, k, net);
    Eigen::VectorXd expected(6);
    expected << 15.0, 0.70, 0.33, 0.40, 0.02, 15.2;
    CHECK((rates - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("zero concentrations give zero rates") {
    const auto net = co_oxidation_network();
    const auto k = co_oxidation_rate_constants();
    const Eigen::VectorXd c = Eigen::VectorXd::Zero(6);
    CHECK(elementary_rates(c, k, net).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single active desorption step is linear in coverage") {
    const auto net = co_oxidation_network();
    RateConstants k;
    k.k = Eigen::VectorXd::Zero(6);
    k.k[1] = 0.7;  // CO* -> CO + *
    Eigen::VectorXd c = Eigen::VectorXd::Ones(6);
    c[3] = 2.0;  // CO*
    const Eigen::VectorXd rates = elementary_rates(c, k, net);
    Eigen::VectorXd expected(6);
    expected << 0.0, 1.4, 0.0, 0.0, 0.0, 0.0;
    CHECK((rates - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("species rates at unit concentrations match the hand-evaluated values") {
    const auto net = co_oxidation_network();
    const auto k = co_oxidation_rate_constants();
    const Eigen::VectorXd c = Eigen::VectorXd::Ones(6);
    const Eigen::VectorXd r = species_rates(c, k, net);
    // cross-checked with the brute-force oracle below
    Eigen::VectorXd expected(6);
    expected << -29.5, -0.33, 15.58, 13.92, -14.92, 1.0;
    CHECK((r - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r - oracle_species(c, k.k, net)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero rate constants give zero species rates") {
    const auto net = co_oxidation_network();
    RateConstants k;
    k.k = Eigen::VectorXd::Zero(6);
    const Eigen::VectorXd c = Eigen::VectorXd::Ones(6);
    CHECK(species_rates(c, k, net).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rates agree with the brute-force oracle on random samples") {
    const auto net = co_oxidation_network();
    RandomStream rng(20240901);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd c(6), kv(6);
        for (int i = 0; i < 6; ++i) c[i] = rng.uniform(0.0, 10.0);
        for (int i = 0; i < 6; ++i) kv[i] = rng.uniform(0.0, 20.0);
        RateConstants k{kv};
        const Eigen::VectorXd rates = elementary_rates(c, k, net);
        const Eigen::VectorXd oracle = oracle_elementary(c, kv, net);
        for (int j = 0; j < 6; ++j) {
            const double denom = std::max(std::abs(oracle[j]), 1e-30);
            CHECK(std::abs(rates[j] - oracle[j]) / denom < 1e-12);
        }
        const Eigen::VectorXd r = species_rates(c, k, net);
        const Eigen::VectorXd ro = oracle_species(c, kv, net);
        CHECK((r - ro).cwiseAbs().maxCoeff() <
              1e-12 * std::max(1.0, ro.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("site and element conservation hold to machine precision") {
    const auto net = co_oxidation_network();
    RandomStream rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd c(6), kv(6);
        for (int i = 0; i < 6; ++i) c[i] = rng.uniform(0.0, 5.0);
        for (int i = 0; i < 6; ++i) kv[i] = rng.uniform(0.0, 20.0);
        const Eigen::VectorXd r = species_rates(c, RateConstants{kv}, net);
        const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
        CHECK(std::abs(net.site_counts.dot(r)) < 1e-12 * scale);
        const Eigen::VectorXd per_element = net.composition * r;
        CHECK(per_element.cwiseAbs().maxCoeff() < 1e-12 * scale);
    }
}

TEST_CASE("species rates are exactly homogeneous in k") {
    const auto net = co_oxidation_network();
    RandomStream rng(12);
    Eigen::VectorXd c(6), kv(6);
    for (int i = 0; i < 6; ++i) c[i] = rng.uniform(0.0, 3.0);
    for (int i = 0; i < 6; ++i) kv[i] = rng.uniform(0.0, 20.0);
    const double a = 3.7;
    const Eigen::VectorXd r1 = species_rates(c, RateConstants{Eigen::VectorXd(a * kv)}, net);
    const Eigen::VectorXd r2 = a * species_rates(c, RateConstants{kv}, net);
    CHECK((r1 - r2).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, r2.cwiseAbs().maxCoeff()));
}

TEST_CASE("no consumption of an absent species") {
    const auto net = co_oxidation_network();
    const auto k = co_oxidation_rate_constants();
    RandomStream rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd c(6);
        for (int i = 0; i < 6; ++i) c[i] = rng.uniform(0.0, 4.0);
        const int zeroed = trial % 6;
        c[zeroed] = 0.0;
        const Eigen::VectorXd r = species_rates(c, k, net);
        CHECK(r[zeroed] >= -1e-15);
    }
}

TEST_CASE("rate law rejects bad input") {
    const auto net = co_oxidation_network();
    const auto k = co_oxidation_rate_constants();
    CHECK_THROWS_AS(elementary_rates(Eigen::VectorXd::Ones(4), k, net), std::invalid_argument);
    Eigen::VectorXd c = Eigen::VectorXd::Ones(6);
    c[2] = -0.5;
    CHECK_THROWS_AS(elementary_rates(c, k, net), std::invalid_argument);
    c[2] = std::nan("");
    CHECK_THROWS_AS(elementary_rates(c, k, net), std::invalid_argument);
}

TEST_CASE("validation flags constructed defects") {
    SUBCASE("broken element balance") {
        auto net = co_oxidation_network();
        net.stoich(4, 2) = 1.0;  // O* coefficient in O2 + 2* -> 2O* changed from 2 to 1
        const auto issues = validate_network(net);
        bool found = false;
        for (const auto& msg : issues)
            if (msg.find("k2") != std::string::npos && msg.find("'O'") != std::string::npos)
                found = true;
        CHECK(found);
    }
    SUBCASE("broken mass-action order") {
        auto net = co_oxidation_network();
        net.exponents(0, 0) = 2;  // CO order in CO + * -> CO* while stoichiometry is -1
        const auto issues = validate_network(net);
        bool found = false;
        for (const auto& msg : issues)
            if (msg.find("k1") != std::string::npos &&
                msg.find("mass-action") != std::string::npos)
                found = true;
        CHECK(found);
    }
}

TEST_CASE("rate jacobian matches finite differences") {
    const auto net = co_oxidation_network();
    const auto k = co_oxidation_rate_constants();
    Eigen::VectorXd c(6);
    c << 0.4, 1.3, 0.2, 3.0, 5.0, 22.0;
    const Eigen::MatrixXd jac = species_rate_jacobian(c, k, net);
    for (int q = 0; q < 6; ++q) {
        const double h = 1e-6 * std::max(1.0, std::abs(c[q]));
        Eigen::VectorXd cp = c, cm = c;
        cp[q] += h;
        cm[q] -= h;
        const Eigen::VectorXd fd =
            (species_rates(cp, k, net) - species_rates(cm, k, net)) / (2 * h);
        CHECK((jac.col(q) - fd).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
    }
}
