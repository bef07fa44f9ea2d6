#include "tapkin/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tapkin/csv.hpp"
#include "tapkin/report.hpp"

namespace tapkin {

namespace {

double series_std(const Eigen::VectorXd& v) {
    const double mean = v.mean();
    double acc = 0.0;
    for (int i = 0; i < v.size(); ++i) acc += (v[i] - mean) * (v[i] - mean);
    return std::sqrt(acc / v.size());
}

double trapz(const std::vector<double>& t, const Eigen::VectorXd& v) {
    double acc = 0.0;
    for (int i = 1; i < v.size(); ++i) acc += 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
    return acc;
}

Eigen::VectorXd cumtrapz(const std::vector<double>& t, const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size());
    out[0] = 0.0;
    for (int i = 1; i < v.size(); ++i)
        out[i] = out[i - 1] + 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ' ';
        os << v[i];
    }
    return os.str();
}

std::vector<int> split_ints(const std::string& s) {
    std::istringstream is(s);
    std::vector<int> out;
    int x;
    while (is >> x) out.push_back(x);
    return out;
}

std::vector<std::string> split_names(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string x;
    while (is >> x) out.push_back(x);
    return out;
}

}  // namespace

Eigen::VectorXd add_noise(const Eigen::VectorXd& signal, double level, RandomStream& rng) {
    if (signal.size() == 0) throw std::invalid_argument("add_noise: empty signal");
    if (level < 0.0) throw std::invalid_argument("add_noise: negative noise level");
    if (level == 0.0) return signal;
    const double sigma = level * series_std(signal);
    Eigen::VectorXd out(signal.size());
    for (int i = 0; i < signal.size(); ++i) out[i] = signal[i] + sigma * rng.normal();
    return out;
}

Eigen::VectorXd add_noise(const Eigen::VectorXd& signal, const NoiseSpec& spec) {
    RandomStream rng(spec.seed);
    return add_noise(signal, spec.level, rng);
}

void savgol_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int window, int poly_order,
                Eigen::VectorXd& value, Eigen::VectorXd& derivative) {
    const int n = static_cast<int>(x.size());
    if (window % 2 == 0 || window <= poly_order || poly_order < 0)
        throw std::invalid_argument("savgol: window must be odd and exceed the polynomial order");
    if (window > n) throw std::invalid_argument("savgol: window longer than the series");
    for (int i = 1; i < n; ++i)
        if (x[i] <= x[i - 1]) throw std::invalid_argument("savgol: abscissa must increase");

    const int half = window / 2;
    const int terms = poly_order + 1;
    value.resize(n);
    derivative.resize(n);
    Eigen::MatrixXd design(window, terms);
    Eigen::VectorXd rhs(window);
    for (int i = 0; i < n; ++i) {
        // off-center windows at the edges evaluate the first/last full-window fit
        const int start = std::clamp(i - half, 0, n - window);
        double scale = 0.0;
        for (int j = 0; j < window; ++j)
            scale = std::max(scale, std::abs(x[start + j] - x[i]));
        if (scale == 0.0) scale = 1.0;
        for (int j = 0; j < window; ++j) {
            const double t = (x[start + j] - x[i]) / scale;
            double p = 1.0;
            for (int k = 0; k < terms; ++k) {
                design(j, k) = p;
                p *= t;
            }
            rhs[j] = y[start + j];
        }
        const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);
        value[i] = coef[0];
        derivative[i] = terms > 1 ? coef[1] / scale : 0.0;
    }
}

Eigen::VectorXd savgol_smooth(const Eigen::VectorXd& signal, int window, int poly_order) {
    Eigen::VectorXd x(signal.size());
    for (int i = 0; i < signal.size(); ++i) x[i] = i;
    Eigen::VectorXd value, deriv;
    savgol_fit(x, signal, window, poly_order, value, deriv);
    return value;
}

std::vector<int> subsample_times(const std::vector<double>& times, int n_points,
                                 double split_time, double split_fraction) {
    if (n_points < 1) throw std::invalid_argument("subsample: need at least one point");
    if (split_fraction < 0.0 || split_fraction > 1.0)
        throw std::invalid_argument("subsample: split fraction must lie in [0, 1]");
    std::vector<int> early, late;
    for (int i = 0; i < static_cast<int>(times.size()); ++i) {
        if (times[i] <= 0.0) continue;  // log-time needs t > 0
        (times[i] <= split_time ? early : late).push_back(i);
    }
    const int k_early = static_cast<int>(std::ceil(split_fraction * n_points));
    const int k_late = n_points - k_early;
    if (k_early > static_cast<int>(early.size()) || k_late > static_cast<int>(late.size()))
        throw std::invalid_argument("subsample: not enough points in a segment");

    std::vector<int> out;
    out.reserve(n_points);
    auto pick = [&](const std::vector<int>& pool, int k) {
        const double m = static_cast<double>(pool.size());
        for (int i = 0; i < k; ++i)
            out.push_back(pool[static_cast<int>((i + 0.5) * m / k)]);
    };
    pick(early, k_early);
    pick(late, k_late);
    return out;
}

Eigen::VectorXd zeroth_moments(const std::vector<double>& times,
                               const Eigen::MatrixXd& outlet_flux) {
    Eigen::VectorXd m0(outlet_flux.rows());
    for (int g = 0; g < outlet_flux.rows(); ++g) m0[g] = trapz(times, outlet_flux.row(g));
    return m0;
}

Eigen::VectorXd zeroth_moments(const PulseRecord& record) {
    return zeroth_moments(record.times, record.outlet_flux);
}

PulseDataset build_dataset(const std::vector<PulseRecord>& records, const ReactionNetwork& net,
                           const ReactorConfig& reactor, DatasetMode mode,
                           const NoiseSpec& noise, const SamplingSpec& sampling,
                           const std::vector<int>& train_pulses,
                           const std::vector<int>& test_pulses) {
    const int n_pulses = static_cast<int>(records.size());
    const int n_gas = net.n_gas();
    const int n_surf = net.n_surface();
    const int n_el = static_cast<int>(net.element_names.size());

    if (train_pulses.empty()) throw std::invalid_argument("dataset: empty training pulse set");
    std::set<int> train_set(train_pulses.begin(), train_pulses.end());
    for (int p : test_pulses)
        if (train_set.count(p))
            throw std::invalid_argument("dataset: train and test pulse sets overlap");
    for (int p : train_pulses)
        if (p < 0 || p >= n_pulses)
            throw std::invalid_argument("dataset: train pulse index out of range");
    for (int p : test_pulses)
        if (p < 0 || p >= n_pulses)
            throw std::invalid_argument("dataset: test pulse index out of range");

    PulseDataset ds;
    ds.mode = mode;
    ds.noise = noise;
    ds.sampling = sampling;
    ds.train_pulses = train_pulses;
    ds.test_pulses = test_pulses;
    ds.voidage = reactor.catalyst_voidage();
    ds.catalyst_length = reactor.catalyst_length();
    ds.site_density = reactor.site_density;
    for (const auto& s : net.species) ds.species_names.push_back(s.name);
    ds.element_names = net.element_names;
    if (mode == DatasetMode::Ideal) {
        for (int i = 0; i < net.n_species(); ++i) ds.observed_species.push_back(i);
    } else {
        for (int i = 0; i < n_gas; ++i) ds.observed_species.push_back(i);
        // per-element uptake rows plus the known total-site loading, which
        // pins the otherwise unobserved free-site level
        ds.uptake_rows = net.element_names;
        ds.uptake_rows.push_back("sites");
    }

    // working copies of the measured channels, noise applied in a fixed order
    // (pulse-major, then channel group, then species, then time). The net
    // zone flux is treated as one estimated signal per species: noising the
    // two face fluxes independently would bury the rate signal, which is an
    // order of magnitude smaller than either flux.
    std::vector<Eigen::MatrixXd> conc(n_pulses), net_flux(n_pulses), outlet(n_pulses);
    for (int p = 0; p < n_pulses; ++p) {
        conc[p] = records[p].thin_zone.topRows(n_gas);
        net_flux[p] = records[p].boundary_flux_in - records[p].boundary_flux_out;
        outlet[p] = records[p].outlet_flux;
    }
    const bool noisy = mode == DatasetMode::Practical && noise.level > 0.0;
    if (noisy) {
        RandomStream rng(noise.seed);
        for (int p = 0; p < n_pulses; ++p) {
            for (int g = 0; g < n_gas; ++g)
                conc[p].row(g) = add_noise(conc[p].row(g).transpose(), noise.level, rng).transpose();
            for (int g = 0; g < n_gas; ++g)
                net_flux[p].row(g) =
                    add_noise(net_flux[p].row(g).transpose(), noise.level, rng).transpose();
            for (int g = 0; g < n_gas; ++g)
                outlet[p].row(g) =
                    add_noise(outlet[p].row(g).transpose(), noise.level, rng).transpose();
        }
    }

    // per-pulse zeroth moments (from the noisy outlet flux in practical mode)
    Eigen::MatrixXd moments(n_gas, n_pulses);
    for (int p = 0; p < n_pulses; ++p)
        moments.col(p) = zeroth_moments(records[p].times, outlet[p]);

    // atomic uptake on the full grid with cross-pulse carryover:
    //   U_e(t) = U_e(start) + sum_g E_eg [ int (f_in - f_out)/l_cat dtau
    //                                      - e_cat (c_g(t) - c_g(0)) ]
    // the gas-holdup correction keeps the flux integral consistent with
    // E x adspecies, not just at pulse ends
    const Eigen::MatrixXd E_gas = net.composition.leftCols(n_gas);
    const Eigen::MatrixXd E_surf = net.composition.rightCols(n_surf);
    std::vector<Eigen::MatrixXd> uptake(n_pulses);
    if (mode == DatasetMode::Practical) {
        Eigen::VectorXd u_start = E_surf * records[0].surface_start;
        for (int p = 0; p < n_pulses; ++p) {
            const int T = records[p].n_times();
            Eigen::MatrixXd gas_term(n_gas, T);
            for (int g = 0; g < n_gas; ++g) {
                const Eigen::VectorXd rate_per_volume =
                    net_flux[p].row(g).transpose() / ds.catalyst_length;
                gas_term.row(g) = cumtrapz(records[p].times, rate_per_volume).transpose();
                gas_term.row(g) -=
                    ds.voidage * (conc[p].row(g).array() - conc[p](g, 0)).matrix();
            }
            uptake[p].resize(n_el + 1, T);
            uptake[p].topRows(n_el) = (E_gas * gas_term).colwise() + u_start;
            uptake[p].row(n_el).setConstant(reactor.site_density);
            u_start = uptake[p].col(T - 1).head(n_el);
        }
    }

    // subsample each pulse on the same rule
    std::vector<std::vector<int>> picks(n_pulses);
    for (int p = 0; p < n_pulses; ++p)
        picks[p] = subsample_times(records[p].times, sampling.points_per_pulse,
                                   sampling.split_time, sampling.split_fraction);

    // scales from the training pulses only
    ds.scaling.conc_scale = Eigen::VectorXd::Zero(net.n_species());
    ds.scaling.moment_scale = Eigen::VectorXd::Zero(n_gas);
    double uptake_max = 0.0;
    for (int p : train_pulses) {
        for (int idx : picks[p]) {
            for (int g = 0; g < n_gas; ++g)
                ds.scaling.conc_scale[g] = std::max(ds.scaling.conc_scale[g], conc[p](g, idx));
            if (mode == DatasetMode::Ideal)
                for (int s = 0; s < n_surf; ++s)
                    ds.scaling.conc_scale[n_gas + s] = std::max(
                        ds.scaling.conc_scale[n_gas + s], records[p].thin_zone(n_gas + s, idx));
            if (mode == DatasetMode::Practical)
                for (int e = 0; e < ds.n_uptake_rows(); ++e)
                    uptake_max = std::max(uptake_max, std::abs(uptake[p](e, idx)));
        }
        for (int g = 0; g < n_gas; ++g)
            ds.scaling.moment_scale[g] = std::max(ds.scaling.moment_scale[g], moments(g, p));
    }
    if (mode == DatasetMode::Practical) {
        if (uptake_max <= 0.0) throw std::invalid_argument("dataset: non-positive uptake scale");
        ds.scaling.uptake_scale = uptake_max;
        // adspecies network outputs are rescaled with the maximum atomic uptake
        for (int s = 0; s < n_surf; ++s) ds.scaling.conc_scale[n_gas + s] = uptake_max;
    }
    for (int i = 0; i < net.n_species(); ++i)
        if (ds.scaling.conc_scale[i] <= 0.0)
            throw std::invalid_argument("dataset: non-positive concentration scale for " +
                                        net.species[i].name);
    for (int g = 0; g < n_gas; ++g)
        if (ds.scaling.moment_scale[g] <= 0.0)
            throw std::invalid_argument("dataset: non-positive moment scale for " +
                                        net.species[g].name);

    // assemble the per-pulse rows
    const double flux_denom = ds.voidage * ds.catalyst_length;
    ds.pulses.resize(n_pulses);
    for (int p = 0; p < n_pulses; ++p) {
        PulseSamples& s = ds.pulses[p];
        s.pulse_index = p;
        const int T = static_cast<int>(picks[p].size());
        s.times.resize(T);
        s.log_times.resize(T);
        s.targets.setConstant(net.n_species(), T, std::nan(""));
        s.flux_term.resize(n_gas, T);
        if (mode == DatasetMode::Practical) s.uptake.resize(ds.n_uptake_rows(), T);
        for (int j = 0; j < T; ++j) {
            const int idx = picks[p][j];
            s.times[j] = records[p].times[idx];
            s.log_times[j] = std::log(s.times[j]);
            for (int g = 0; g < n_gas; ++g) {
                s.targets(g, j) = conc[p](g, idx) / ds.scaling.conc_scale[g];
                s.flux_term(g, j) = net_flux[p](g, idx) / flux_denom;
            }
            if (mode == DatasetMode::Ideal) {
                for (int su = 0; su < n_surf; ++su)
                    s.targets(n_gas + su, j) =
                        records[p].thin_zone(n_gas + su, idx) / ds.scaling.conc_scale[n_gas + su];
            } else {
                for (int e = 0; e < ds.n_uptake_rows(); ++e)
                    s.uptake(e, j) = uptake[p](e, idx) / ds.scaling.uptake_scale;
            }
        }
        s.raw_moments = moments.col(p);
        s.moment_features = moments.col(p).cwiseQuotient(ds.scaling.moment_scale);
    }
    return ds;
}

void write_pulse_records(const std::vector<PulseRecord>& records, const ReactionNetwork& net,
                         const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const int n_gas = net.n_gas();
    for (std::size_t p = 0; p < records.size(); ++p) {
        const auto& rec = records[p];
        {
            CsvWriter w(dir + "/pulse_" + std::to_string(p) + "_outlet.csv");
            std::vector<std::string> head{"time_s"};
            for (int g = 0; g < n_gas; ++g)
                head.push_back("flux_" + net.species[g].column_name());
            w.header(head);
            for (int i = 0; i < rec.n_times(); ++i) {
                std::vector<double> row{rec.times[i]};
                for (int g = 0; g < n_gas; ++g) row.push_back(rec.outlet_flux(g, i));
                w.row(row);
            }
        }
        {
            CsvWriter w(dir + "/pulse_" + std::to_string(p) + "_thinzone.csv");
            std::vector<std::string> head{"time_s"};
            for (int i = 0; i < net.n_species(); ++i)
                head.push_back("c_" + net.species[i].column_name());
            for (int g = 0; g < n_gas; ++g)
                head.push_back("f_in_" + net.species[g].column_name());
            for (int g = 0; g < n_gas; ++g)
                head.push_back("f_out_" + net.species[g].column_name());
            w.header(head);
            for (int i = 0; i < rec.n_times(); ++i) {
                std::vector<double> row{rec.times[i]};
                for (int s = 0; s < net.n_species(); ++s) row.push_back(rec.thin_zone(s, i));
                for (int g = 0; g < n_gas; ++g) row.push_back(rec.boundary_flux_in(g, i));
                for (int g = 0; g < n_gas; ++g) row.push_back(rec.boundary_flux_out(g, i));
                w.row(row);
            }
        }
    }
    KeyValueFile meta;
    meta.set("n_pulses", static_cast<int>(records.size()));
    meta.save(dir + "/pulses.meta");
}

std::vector<PulseRecord> read_pulse_records(const std::string& dir, const ReactionNetwork& net) {
    const auto meta = KeyValueFile::load(dir + "/pulses.meta");
    const int n_pulses = meta.get_int("n_pulses");
    const int n_gas = net.n_gas();
    const int n_surf = net.n_surface();
    std::vector<PulseRecord> records(n_pulses);
    for (int p = 0; p < n_pulses; ++p) {
        auto& rec = records[p];
        const auto outlet = read_csv(dir + "/pulse_" + std::to_string(p) + "_outlet.csv");
        const auto thin = read_csv(dir + "/pulse_" + std::to_string(p) + "_thinzone.csv");
        const int T = static_cast<int>(outlet.rows.size());
        if (static_cast<int>(thin.rows.size()) != T)
            throw std::runtime_error("pulse CSVs disagree on row counts");
        rec.times.resize(T);
        rec.outlet_flux.resize(n_gas, T);
        rec.thin_zone.resize(net.n_species(), T);
        rec.boundary_flux_in.resize(n_gas, T);
        rec.boundary_flux_out.resize(n_gas, T);
        for (int i = 0; i < T; ++i) {
            rec.times[i] = outlet.rows[i][0];
            for (int g = 0; g < n_gas; ++g) rec.outlet_flux(g, i) = outlet.rows[i][1 + g];
            for (int s = 0; s < net.n_species(); ++s)
                rec.thin_zone(s, i) = thin.rows[i][1 + s];
            for (int g = 0; g < n_gas; ++g)
                rec.boundary_flux_in(g, i) = thin.rows[i][1 + net.n_species() + g];
            for (int g = 0; g < n_gas; ++g)
                rec.boundary_flux_out(g, i) = thin.rows[i][1 + net.n_species() + n_gas + g];
        }
        rec.surface_start = rec.thin_zone.col(0).tail(n_surf);
        rec.surface_state_final = rec.thin_zone.col(T - 1).tail(n_surf);
    }
    return records;
}

void write_dataset(const PulseDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const int n_gas = static_cast<int>(ds.scaling.moment_scale.size());

    const std::vector<std::string> u_cols =
        ds.uptake_rows.empty() ? ds.element_names : ds.uptake_rows;
    auto write_split = [&](const std::string& name, const std::vector<int>& pulses) {
        CsvWriter w(dir + "/" + name);
        std::vector<std::string> head{"pulse", "t", "u"};
        for (int g = 0; g < n_gas; ++g) head.push_back("m0_" + ds.species_names[g]);
        for (const auto& s : ds.species_names) head.push_back("y_" + s);
        for (int g = 0; g < n_gas; ++g) head.push_back("g_" + ds.species_names[g]);
        for (const auto& e : u_cols) head.push_back("U_" + e);
        w.header(head);
        for (int p : pulses) {
            const auto& s = ds.pulses[p];
            for (int j = 0; j < s.times.size(); ++j) {
                std::vector<double> row{static_cast<double>(p), s.times[j], s.log_times[j]};
                for (int g = 0; g < n_gas; ++g) row.push_back(s.moment_features[g]);
                for (int i = 0; i < s.targets.rows(); ++i) row.push_back(s.targets(i, j));
                for (int g = 0; g < n_gas; ++g) row.push_back(s.flux_term(g, j));
                for (int e = 0; e < static_cast<int>(u_cols.size()); ++e)
                    row.push_back(ds.has_uptake() ? s.uptake(e, j) : std::nan(""));
                w.row(row);
            }
        }
    };
    write_split("train.csv", ds.train_pulses);
    write_split("test.csv", ds.test_pulses);

    {
        CsvWriter w(dir + "/scaling.csv");
        w.header({"name", "value"});
        for (int i = 0; i < ds.scaling.conc_scale.size(); ++i)
            w.row_of_strings({"s_" + ds.species_names[i], format_double(ds.scaling.conc_scale[i])});
        for (int g = 0; g < n_gas; ++g)
            w.row_of_strings(
                {"m0_" + ds.species_names[g], format_double(ds.scaling.moment_scale[g])});
        w.row_of_strings({"uptake", format_double(ds.scaling.uptake_scale)});
    }

    KeyValueFile meta;
    meta.set("mode", ds.mode == DatasetMode::Ideal ? "ideal" : "practical");
    meta.set("noise_level", ds.noise.level);
    meta.set("noise_seed", ds.noise.seed);
    meta.set("points_per_pulse", ds.sampling.points_per_pulse);
    meta.set("split_time", ds.sampling.split_time);
    meta.set("split_fraction", ds.sampling.split_fraction);
    meta.set("voidage", ds.voidage);
    meta.set("catalyst_length", ds.catalyst_length);
    std::string species;
    for (const auto& s : ds.species_names) species += (species.empty() ? "" : " ") + s;
    meta.set("species", species);
    std::string elements;
    for (const auto& e : ds.element_names) elements += (elements.empty() ? "" : " ") + e;
    meta.set("elements", elements);
    std::string urows;
    for (const auto& e : ds.uptake_rows) urows += (urows.empty() ? "" : " ") + e;
    meta.set("uptake_rows", urows);
    meta.set("site_density", ds.site_density);
    meta.set("observed", join_ints(ds.observed_species));
    meta.set("train_pulses", join_ints(ds.train_pulses));
    meta.set("test_pulses", join_ints(ds.test_pulses));
    meta.set("n_pulses", static_cast<int>(ds.pulses.size()));
    meta.save(dir + "/dataset.meta");
}

PulseDataset read_dataset(const std::string& dir) {
    const auto meta = KeyValueFile::load(dir + "/dataset.meta");
    PulseDataset ds;
    ds.mode = meta.get("mode") == "ideal" ? DatasetMode::Ideal : DatasetMode::Practical;
    ds.noise.level = meta.get_double("noise_level");
    ds.noise.seed = std::stoull(meta.get("noise_seed"));
    ds.sampling.points_per_pulse = meta.get_int("points_per_pulse");
    ds.sampling.split_time = meta.get_double("split_time");
    ds.sampling.split_fraction = meta.get_double("split_fraction");
    ds.voidage = meta.get_double("voidage");
    ds.catalyst_length = meta.get_double("catalyst_length");
    ds.species_names = split_names(meta.get("species"));
    ds.element_names = split_names(meta.get("elements"));
    ds.uptake_rows = split_names(meta.get_or("uptake_rows", ""));
    ds.site_density = meta.has("site_density") ? meta.get_double("site_density") : 0.0;
    ds.observed_species = split_ints(meta.get("observed"));
    ds.train_pulses = split_ints(meta.get("train_pulses"));
    ds.test_pulses = split_ints(meta.get("test_pulses"));
    ds.pulses.resize(meta.get_int("n_pulses"));

    const int n_sp = ds.n_species();
    const int n_el = static_cast<int>(
        (ds.uptake_rows.empty() ? ds.element_names : ds.uptake_rows).size());

    // scaling.csv carries a string name column; parse it by hand
    std::vector<double> scale_values;
    {
        std::ifstream in(dir + "/scaling.csv");
        if (!in) throw std::runtime_error("cannot open " + dir + "/scaling.csv");
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            scale_values.push_back(std::stod(line.substr(comma + 1)));
        }
    }
    // species scales, then gas moment scales, then the uptake scale
    int n_gas = static_cast<int>(scale_values.size()) - n_sp - 1;
    ds.scaling.conc_scale.resize(n_sp);
    for (int i = 0; i < n_sp; ++i) ds.scaling.conc_scale[i] = scale_values[i];
    ds.scaling.moment_scale.resize(n_gas);
    for (int g = 0; g < n_gas; ++g) ds.scaling.moment_scale[g] = scale_values[n_sp + g];
    ds.scaling.uptake_scale = scale_values.back();

    auto read_split = [&](const std::string& name) {
        const auto table = read_csv(dir + "/" + name);
        // group rows by pulse, preserving order
        std::vector<std::vector<const std::vector<double>*>> by_pulse(ds.pulses.size());
        for (const auto& row : table.rows)
            by_pulse[static_cast<int>(row[0])].push_back(&row);
        for (std::size_t p = 0; p < by_pulse.size(); ++p) {
            if (by_pulse[p].empty()) continue;
            const int T = static_cast<int>(by_pulse[p].size());
            PulseSamples& s = ds.pulses[p];
            s.pulse_index = static_cast<int>(p);
            s.times.resize(T);
            s.log_times.resize(T);
            s.moment_features.resize(n_gas);
            s.targets.resize(n_sp, T);
            s.flux_term.resize(n_gas, T);
            if (ds.has_uptake()) s.uptake.resize(n_el, T);
            for (int j = 0; j < T; ++j) {
                const auto& row = *by_pulse[p][j];
                int col = 1;
                s.times[j] = row[col++];
                s.log_times[j] = row[col++];
                for (int g = 0; g < n_gas; ++g) s.moment_features[g] = row[col++];
                for (int i = 0; i < n_sp; ++i) s.targets(i, j) = row[col++];
                for (int g = 0; g < n_gas; ++g) s.flux_term(g, j) = row[col++];
                for (int e = 0; e < n_el; ++e) {
                    if (ds.has_uptake()) s.uptake(e, j) = row[col];
                    ++col;
                }
            }
            s.raw_moments = s.moment_features.cwiseProduct(ds.scaling.moment_scale);
        }
    };
    read_split("train.csv");
    read_split("test.csv");
    return ds;
}

}  // namespace tapkin
