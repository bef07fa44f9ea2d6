#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "tapkin/pipeline.hpp"
#include "tapkin/reaction.hpp"
#include "tapkin/reactor.hpp"
#include "test_helpers.hpp"

using namespace tapkin;
using namespace tapkin::testing;

namespace {

// shared 3-pulse train at a reduced horizon (kept short for test speed)
struct TrainFixture {
    ReactorConfig rc;
    ReactionNetwork net = co_oxidation_network();
    RateConstants k = co_oxidation_rate_constants();
    std::vector<PulseRecord> records;
    TrainFixture() {
        rc.time_horizon = 2.0;
        records = simulate_pulse_train(rc, net, k, fresh_surface(rc), co_o2_pulse(), 3);
    }
};

const TrainFixture& fixture() {
    static const TrainFixture f;
    return f;
}

SamplingSpec default_sampling() {
    SamplingSpec s;
    s.points_per_pulse = 150;
    return s;
}

}  // namespace

TEST_CASE("zero noise level returns the signal unchanged") {
    Eigen::VectorXd signal(5);
    signal << 1, 2, 3, 4, 5;
    const Eigen::VectorXd out = add_noise(signal, NoiseSpec{0.0, 42});
    CHECK((out - signal).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noise is deterministic given the seed") {
    Eigen::VectorXd signal = Eigen::VectorXd::LinSpaced(100, 0.0, 1.0);
    const Eigen::VectorXd a = add_noise(signal, NoiseSpec{0.5, 42});
    const Eigen::VectorXd b = add_noise(signal, NoiseSpec{0.5, 42});
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd c = add_noise(signal, NoiseSpec{0.5, 43});
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("noise standard deviation follows the stated law") {
    // unit-std series: alternate -1, +1
    const int n = 10000;
    Eigen::VectorXd signal(n);
    for (int i = 0; i < n; ++i) signal[i] = i % 2 == 0 ? -1.0 : 1.0;
    const Eigen::VectorXd noisy = add_noise(signal, NoiseSpec{0.5, 7});
    const Eigen::VectorXd delta = noisy - signal;
    const double mean = delta.mean();
    const double sd = std::sqrt((delta.array() - mean).square().sum() / n);
    CHECK(sd > 0.45);
    CHECK(sd < 0.55);
}

TEST_CASE("savgol reproduces polynomials up to its order") {
    const int n = 50;
    Eigen::VectorXd quad(n), lin(n), constant(n);
    for (int i = 0; i < n; ++i) {
        quad[i] = 0.3 * i * i - 2.0 * i + 1.0;
        lin[i] = 2.0 * i + 1.0;
        constant[i] = 4.2;
    }
    CHECK((savgol_smooth(quad, 5, 2) - quad).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((savgol_smooth(constant, 7, 1) - constant).cwiseAbs().maxCoeff() < 1e-10);

    Eigen::VectorXd x(n), value, deriv;
    for (int i = 0; i < n; ++i) x[i] = 0.1 * i;
    savgol_fit(x, lin, 5, 1, value, deriv);
    // c(t) = 2 i + 1 = 20 t + 1, so dc/dt = 20
    CHECK((deriv.array() - 20.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("savgol denoises a sine by at least 2x") {
    const int n = 1000;
    Eigen::VectorXd clean(n), noisy(n);
    RandomStream rng(11);
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * M_PI * i / n;
        clean[i] = std::sin(t);
        noisy[i] = clean[i] + 0.1 * rng.normal();
    }
    const Eigen::VectorXd smoothed = savgol_smooth(noisy, 31, 3);
    const double rmse_raw = std::sqrt((noisy - clean).squaredNorm() / n);
    const double rmse_smooth = std::sqrt((smoothed - clean).squaredNorm() / n);
    CHECK(rmse_smooth * 2.0 < rmse_raw);
}

TEST_CASE("savgol rejects invalid settings") {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
    CHECK_THROWS_AS(savgol_smooth(y, 4, 2), std::invalid_argument);   // even window
    CHECK_THROWS_AS(savgol_smooth(y, 5, 5), std::invalid_argument);   // order >= window
    CHECK_THROWS_AS(savgol_smooth(y, 11, 2), std::invalid_argument);  // window > length
}

TEST_CASE("subsampling honors the split rule") {
    std::vector<double> times(3001);
    for (int i = 0; i <= 3000; ++i) times[i] = i * 1e-3;

    const auto idx = subsample_times(times, 100, 0.5, 0.5);
    REQUIRE(idx.size() == 100);
    int early = 0;
    for (int i : idx) {
        CHECK(times[i] > 0.0);
        if (times[i] <= 0.5) ++early;
    }
    CHECK(early == 50);

    // strictly increasing selection with no duplicates
    for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
}

TEST_CASE("subsampling the full series is the identity") {
    std::vector<double> times;
    for (int i = 1; i <= 20; ++i) times.push_back(0.1 * i);
    // 10 points at or below t=1.0, 10 above
    const auto idx = subsample_times(times, 20, 1.0, 0.5);
    REQUIRE(idx.size() == 20);
    for (int i = 0; i < 20; ++i) CHECK(idx[i] == i);
}

TEST_CASE("subsampling a 10-point budget splits 5 and 5") {
    std::vector<double> times(3001);
    for (int i = 0; i <= 3000; ++i) times[i] = i * 1e-3;
    const auto idx = subsample_times(times, 10, 0.5, 0.5);
    REQUIRE(idx.size() == 10);
    int early = 0;
    for (int i : idx) {
        CHECK(times[i] > 0.0);
        if (times[i] <= 0.5) ++early;
    }
    CHECK(early == 5);
}

TEST_CASE("subsampling reports segment exhaustion") {
    std::vector<double> times{0.0, 0.1, 0.2, 0.9, 1.0};
    CHECK_THROWS_AS(subsample_times(times, 5, 0.5, 0.8), std::invalid_argument);
}

TEST_CASE("zeroth moment of a boxcar flux is F*T") {
    std::vector<double> times;
    Eigen::MatrixXd flux(1, 101);
    for (int i = 0; i <= 100; ++i) {
        times.push_back(i * 0.01);
        flux(0, i) = 2.5;
    }
    const Eigen::VectorXd m0 = zeroth_moments(times, flux);
    CHECK(m0[0] == doctest::Approx(2.5 * 1.0).epsilon(1e-12));
}

TEST_CASE("zeroth moment recovers the injected amount for an inert pulse") {
    ReactorConfig rc;
    PulseSpec pulse;
    pulse.intensities = Eigen::VectorXd::Ones(1);
    const auto rec = simulate_pulse(rc, inert_network(), RateConstants{Eigen::VectorXd(0)},
                                    Eigen::VectorXd(0), pulse);
    const Eigen::VectorXd m0 = zeroth_moments(rec);
    CHECK(m0[0] == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("reactive pulse loses CO to conversion and adsorption") {
    const auto& f = fixture();
    const Eigen::VectorXd m0 = zeroth_moments(f.records[0]);
    CHECK(m0[0] < f.records[0].injected[0]);
}

TEST_CASE("ideal dataset round-trips the simulator values") {
    const auto& f = fixture();
    const auto ds = build_dataset(f.records, f.net, f.rc, DatasetMode::Ideal, NoiseSpec{},
                                  default_sampling(), {0, 2}, {1});
    REQUIRE(ds.pulses.size() == 3);
    CHECK(ds.observed_species.size() == 6);
    // unscaling a target reproduces the stored thin-zone value
    const auto& s = ds.pulses[0];
    for (int j = 0; j < s.times.size(); j += 17) {
        const int idx = static_cast<int>(std::lround(s.times[j] / f.rc.output_timestep));
        for (int i = 0; i < 6; ++i) {
            const double unscaled = s.targets(i, j) * ds.scaling.conc_scale[i];
            CHECK(unscaled == doctest::Approx(f.records[0].thin_zone(i, idx)).epsilon(1e-12));
        }
    }
    // scaled training targets live in [0, 1]
    for (int p : ds.train_pulses) {
        CHECK(ds.pulses[p].targets.maxCoeff() <= 1.0 + 1e-12);
        CHECK(ds.pulses[p].targets.minCoeff() >= 0.0);
    }
    // log-time feature is consistent
    for (int j = 0; j < s.times.size(); ++j)
        CHECK(s.log_times[j] == doctest::Approx(std::log(s.times[j])).epsilon(1e-14));
}

TEST_CASE("scaling round trip is exact to 1e-12") {
    const auto& f = fixture();
    const auto ds = build_dataset(f.records, f.net, f.rc, DatasetMode::Ideal, NoiseSpec{},
                                  default_sampling(), {0, 1, 2}, {});
    RandomStream rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const double x = rng.uniform(-10.0, 10.0);
        for (int i = 0; i < 6; ++i) {
            const double s = ds.scaling.conc_scale[i];
            CHECK(std::abs((x / s) * s - x) <= 1e-12 * std::max(1.0, std::abs(x)));
        }
    }
}

TEST_CASE("ideal-mode uptake consistency: E x adspecies matches the flux integral") {
    const auto& f = fixture();
    // practical mode with zero noise exposes the uptake estimate
    const auto ds = build_dataset(f.records, f.net, f.rc, DatasetMode::Practical,
                                  NoiseSpec{0.0, 1}, default_sampling(), {0, 1, 2}, {});
    const Eigen::MatrixXd E_surf = f.net.composition.rightCols(3);
    for (int p = 0; p < 3; ++p) {
        const auto& s = ds.pulses[p];
        // 2% of the per-element peak over the pulse (integration tolerance)
        Eigen::Vector2d peak = Eigen::Vector2d::Zero();
        for (int idx = 0; idx < f.records[p].n_times(); ++idx) {
            const Eigen::VectorXd truth = E_surf * f.records[p].thin_zone.col(idx).tail(3);
            peak = peak.cwiseMax(truth.cwiseAbs());
        }
        for (int j = 0; j < s.times.size(); j += 11) {
            const int idx = static_cast<int>(std::lround(s.times[j] / f.rc.output_timestep));
            const Eigen::VectorXd truth = E_surf * f.records[p].thin_zone.col(idx).tail(3);
            for (int e = 0; e < 2; ++e) {
                const double est = s.uptake(e, j) * ds.scaling.uptake_scale;
                CHECK(std::abs(est - truth[e]) < 0.02 * peak[e]);
            }
        }
    }
}

TEST_CASE("practical uptake carbon tracks CO* at pulse ends") {
    // noiseless practical pipeline against the simulator surface oracle
    const auto& f = fixture();
    const auto ds = build_dataset(f.records, f.net, f.rc, DatasetMode::Practical,
                                  NoiseSpec{0.0, 99}, default_sampling(), {0, 1, 2}, {});
    for (int p = 0; p < 3; ++p) {
        const auto& s = ds.pulses[p];
        const int jlast = static_cast<int>(s.times.size()) - 1;
        const double u_c = s.uptake(0, jlast) * ds.scaling.uptake_scale;
        const double co_star = f.records[p].surface_state_final[0];
        CHECK(std::abs(u_c - co_star) < 0.05 * std::max(co_star, 1.0));
    }
}

TEST_CASE("uptake sign convention on constructed flux series") {
    // one gas species CO-like network subset: reuse the CO oxidation network
    // with hand-built records
    const auto net = co_oxidation_network();
    ReactorConfig rc;
    const int T = 101;
    PulseRecord rec;
    rec.times.resize(T);
    rec.outlet_flux.setZero(3, T);
    rec.thin_zone.setZero(6, T);
    rec.boundary_flux_in.setZero(3, T);
    rec.boundary_flux_out.setZero(3, T);
    for (int i = 0; i < T; ++i) {
        rec.times[i] = i * 0.01;
        rec.boundary_flux_in(0, i) = 2.0;   // CO consumed: f_in > f_out
        rec.boundary_flux_out(0, i) = 1.0;
        rec.boundary_flux_in(2, i) = 0.0;   // CO2 produced: f_out > f_in
        rec.boundary_flux_out(2, i) = 0.5;
        rec.outlet_flux(0, i) = 1.0;
        rec.outlet_flux(1, i) = 0.1;
        rec.outlet_flux(2, i) = 0.5;
        // constant gas levels so the holdup correction drops out
        rec.thin_zone(0, i) = 1.0;
        rec.thin_zone(1, i) = 0.5;
        rec.thin_zone(2, i) = 0.25;
    }
    rec.surface_start = Eigen::VectorXd::Zero(3);
    rec.surface_state_final = Eigen::VectorXd::Zero(3);
    rec.injected = Eigen::VectorXd::Ones(3);

    SamplingSpec sampling;
    sampling.points_per_pulse = 50;
    sampling.split_time = 0.5;
    const auto ds = build_dataset({rec}, net, rc, DatasetMode::Practical, NoiseSpec{},
                                  sampling, {0}, {});
    const auto& s = ds.pulses[0];
    const int jlast = static_cast<int>(s.times.size()) - 1;
    // carbon: consumed CO raises U_C, produced CO2 lowers it; net over 1 s is
    // (2-1)/l_cat - (0.5-0)/l_cat > 0
    CHECK(s.uptake(0, jlast) > s.uptake(0, 0));
    // oxygen from CO (+1/l_cat) and CO2 (-2*0.5/l_cat) cancels exactly; O2 is
    // untouched, so U_O stays flat:
    CHECK(std::abs(s.uptake(1, jlast) * ds.scaling.uptake_scale) < 1e-9);
}

TEST_CASE("datasets are bit-identical across rebuilds with one seed") {
    const auto& f = fixture();
    const auto a = build_dataset(f.records, f.net, f.rc, DatasetMode::Practical,
                                 NoiseSpec{1.0, 4242}, default_sampling(), {0, 2}, {1});
    const auto b = build_dataset(f.records, f.net, f.rc, DatasetMode::Practical,
                                 NoiseSpec{1.0, 4242}, default_sampling(), {0, 2}, {1});
    for (int p = 0; p < 3; ++p) {
        CHECK((a.pulses[p].flux_term - b.pulses[p].flux_term).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.pulses[p].uptake - b.pulses[p].uptake).cwiseAbs().maxCoeff() == 0.0);
        for (int i : a.observed_species)
            CHECK((a.pulses[p].targets.row(i) - b.pulses[p].targets.row(i))
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
    }
}

TEST_CASE("practical mode hides adspecies and bounds noisy targets") {
    const auto& f = fixture();
    const double level = 1.0;
    const auto ds = build_dataset(f.records, f.net, f.rc, DatasetMode::Practical,
                                  NoiseSpec{level, 7}, default_sampling(), {0, 1}, {2});
    CHECK(ds.observed_species == std::vector<int>{0, 1, 2});
    for (int p : ds.train_pulses) {
        const auto& t = ds.pulses[p].targets;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < t.cols(); ++j) CHECK(t(i, j) <= 1.0 + 5.0 * level);
        for (int i = 3; i < 6; ++i)
            for (int j = 0; j < t.cols(); ++j) CHECK(std::isnan(t(i, j)));
    }
}

TEST_CASE("dataset validation rejects bad pulse sets") {
    const auto& f = fixture();
    CHECK_THROWS_AS(build_dataset(f.records, f.net, f.rc, DatasetMode::Ideal, NoiseSpec{},
                                  default_sampling(), {}, {0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_dataset(f.records, f.net, f.rc, DatasetMode::Ideal, NoiseSpec{},
                                  default_sampling(), {0, 1}, {1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_dataset(f.records, f.net, f.rc, DatasetMode::Ideal, NoiseSpec{},
                                  default_sampling(), {0, 7}, {}),
                    std::invalid_argument);
}

TEST_CASE("dataset CSV round trip preserves every value bit-for-bit") {
    const auto& f = fixture();
    const auto ds = build_dataset(f.records, f.net, f.rc, DatasetMode::Practical,
                                  NoiseSpec{0.5, 31}, default_sampling(), {0, 2}, {1});
    const std::string dir = "test_dataset_roundtrip";
    write_dataset(ds, dir);
    const auto back = read_dataset(dir);
    CHECK(back.mode == ds.mode);
    CHECK(back.voidage == ds.voidage);
    CHECK(back.catalyst_length == ds.catalyst_length);
    CHECK((back.scaling.conc_scale - ds.scaling.conc_scale).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.scaling.uptake_scale == ds.scaling.uptake_scale);
    for (int p : {0, 1, 2}) {
        const auto& a = ds.pulses[p];
        const auto& b = back.pulses[p];
        REQUIRE(a.times.size() == b.times.size());
        CHECK((a.times - b.times).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.flux_term - b.flux_term).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.uptake - b.uptake).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.moment_features - b.moment_features).cwiseAbs().maxCoeff() == 0.0);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < a.targets.cols(); ++j) {
                if (std::isnan(a.targets(i, j)))
                    CHECK(std::isnan(b.targets(i, j)));
                else
                    CHECK(a.targets(i, j) == b.targets(i, j));
            }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("pulse record CSV round trip") {
    const auto& f = fixture();
    const std::string dir = "test_records_roundtrip";
    write_pulse_records(f.records, f.net, dir);
    const auto back = read_pulse_records(dir, f.net);
    REQUIRE(back.size() == f.records.size());
    for (std::size_t p = 0; p < back.size(); ++p) {
        CHECK((back[p].outlet_flux - f.records[p].outlet_flux).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back[p].thin_zone - f.records[p].thin_zone).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back[p].boundary_flux_in - f.records[p].boundary_flux_in)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
    std::filesystem::remove_all(dir);
}
