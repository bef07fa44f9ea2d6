#pragma once

#include <Eigen/Dense>

#include "tapkin/reaction.hpp"
#include "tapkin/reactor.hpp"

namespace tapkin::testing {

/// Single inert gas species at the reference molar mass, no reactions.
inline ReactionNetwork inert_network() {
    ReactionNetwork net;
    net.species = {{"Ar", Phase::Gas, 40.0, {{"Ar", 1}}}};
    net.element_names = {"Ar"};
    net.stoich = Eigen::MatrixXd::Zero(1, 0);
    net.exponents = Eigen::MatrixXi::Zero(0, 1);
    net.composition = Eigen::MatrixXd::Ones(1, 1);
    net.site_counts = Eigen::VectorXd::Zero(1);
    return net;
}

inline Eigen::VectorXd fresh_surface(const ReactorConfig& rc) {
    Eigen::VectorXd s(3);
    s << 0.0, 0.0, rc.site_density;
    return s;
}

inline PulseSpec co_o2_pulse(double co = 1.0, double o2 = 1.0, double co2 = 0.0) {
    PulseSpec p;
    p.intensities.resize(3);
    p.intensities << co, o2, co2;
    return p;
}

/// Parabolic refinement of a sampled peak (index of max plus neighbors).
inline void refine_peak(const std::vector<double>& t, const Eigen::VectorXd& v, double& t_peak,
                        double& v_peak) {
    int im = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v[i] > v[im]) im = i;
    t_peak = t[im];
    v_peak = v[im];
    if (im > 0 && im + 1 < v.size()) {
        const double d1 = v[im + 1] - v[im - 1];
        const double d2 = v[im + 1] - 2 * v[im] + v[im - 1];
        if (d2 < 0.0) {
            const double dt = t[im + 1] - t[im];
            const double shift = -0.5 * d1 / d2;
            t_peak = t[im] + shift * dt;
            v_peak = v[im] - 0.25 * d1 * shift;
        }
    }
}

}  // namespace tapkin::testing
