#include "tapkin/reactor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "tapkin/stiff.hpp"

namespace tapkin {

namespace {

struct Grid {
    int n_cells = 0;
    int n_cat_begin = 0, n_cat_end = 0;  // [begin, end) catalyst cell range
    std::vector<double> width;           // cm per cell
    std::vector<double> voidage;
    std::vector<int> zone;
};

Grid build_grid(const ReactorConfig& rc) {
    Grid g;
    for (int z = 0; z < 3; ++z) {
        const int nz = rc.grid_points[z];
        if (nz < 1) throw std::invalid_argument("grid_points must be >= 1 per zone");
        const double h = rc.zone_lengths[z] / nz;
        if (z == 1) g.n_cat_begin = g.n_cells;
        for (int i = 0; i < nz; ++i) {
            g.width.push_back(h);
            g.voidage.push_back(rc.voidage[z]);
            g.zone.push_back(z);
            ++g.n_cells;
        }
        if (z == 1) g.n_cat_end = g.n_cells;
    }
    return g;
}

/// Cell-centered finite volumes; state blocks are gas species per cell plus
/// surface species on catalyst cells, with trailing per-gas escaped-amount
/// accumulators. Fluxes are -D dc/dx; the voidage multiplies the time
/// derivative only (gas holdup is A * e * c per unit length).
class PulseSystem {
public:
    PulseSystem(const ReactorConfig& rc, const ReactionNetwork& net, const RateConstants& k)
        : rc_(rc), net_(net), k_(k), grid_(build_grid(rc)) {
        n_gas_ = net.n_gas();
        n_surf_ = net.n_surface();
        diff_.resize(n_gas_);
        for (int g = 0; g < n_gas_; ++g) {
            const double mm = net.species[g].molar_mass;
            if (mm <= 0.0)
                throw std::invalid_argument("gas species '" + net.species[g].name +
                                            "' needs a positive molar mass");
            diff_[g] = rc.diffusion_ref * std::sqrt(rc.ref_molar_mass / mm);
        }
        offsets_.resize(grid_.n_cells + 1);
        block_sizes_.clear();
        int off = 0;
        for (int i = 0; i < grid_.n_cells; ++i) {
            offsets_[i] = off;
            const int bs = n_gas_ + (is_catalyst(i) ? n_surf_ : 0);
            block_sizes_.push_back(bs);
            off += bs;
        }
        offsets_[grid_.n_cells] = off;  // escaped block
        block_sizes_.push_back(n_gas_);
        total_ = off + n_gas_;
    }

    int size() const { return total_; }
    const std::vector<int>& block_sizes() const { return block_sizes_; }
    const Grid& grid() const { return grid_; }
    double diffusivity(int g) const { return diff_[g]; }
    int gas_index(int cell, int g) const { return offsets_[cell] + g; }
    int surf_index(int cell, int s) const { return offsets_[cell] + n_gas_ + s; }
    int escaped_index(int g) const { return offsets_[grid_.n_cells] + g; }
    bool is_catalyst(int cell) const { return grid_.zone[cell] == 1; }

    double face_dx(int left_cell) const {
        return 0.5 * (grid_.width[left_cell] + grid_.width[left_cell + 1]);
    }

    void rhs(double /*t*/, const Eigen::VectorXd& y, Eigen::VectorXd& f) const {
        f.setZero(total_);
        const int N = grid_.n_cells;
        for (int g = 0; g < n_gas_; ++g) {
            const double D = diff_[g];
            for (int i = 0; i < N; ++i) {
                const double c = y[gas_index(i, g)];
                const double jl =
                    i == 0 ? 0.0 : -D * (c - y[gas_index(i - 1, g)]) / face_dx(i - 1);
                const double jr = i == N - 1
                                      ? 2.0 * D * c / grid_.width[i]
                                      : -D * (y[gas_index(i + 1, g)] - c) / face_dx(i);
                f[gas_index(i, g)] = (jl - jr) / (grid_.width[i] * grid_.voidage[i]);
            }
            f[escaped_index(g)] =
                rc_.cross_section_area * 2.0 * D * y[gas_index(N - 1, g)] / grid_.width[N - 1];
        }
        Eigen::VectorXd conc(net_.n_species());
        for (int i = grid_.n_cat_begin; i < grid_.n_cat_end; ++i) {
            for (int g = 0; g < n_gas_; ++g) conc[g] = y[gas_index(i, g)];
            for (int s = 0; s < n_surf_; ++s) conc[n_gas_ + s] = y[surf_index(i, s)];
            const Eigen::VectorXd rates = net_.stoich * k_.k.cwiseProduct(raw_basis(conc));
            const double e = grid_.voidage[i];
            for (int g = 0; g < n_gas_; ++g) f[gas_index(i, g)] += rates[g] / e;
            for (int s = 0; s < n_surf_; ++s) f[surf_index(i, s)] = rates[n_gas_ + s];
        }
    }

    void jacobian_times(double /*t*/, const Eigen::VectorXd& y, double w,
                        BlockTridiagMatrix& m) const {
        m.set_zero();
        const int N = grid_.n_cells;
        for (int i = 0; i <= N; ++i)
            m.diag(i).setIdentity(m.block_size(i), m.block_size(i));

        for (int g = 0; g < n_gas_; ++g) {
            const double D = diff_[g];
            for (int i = 0; i < N; ++i) {
                const double he = grid_.width[i] * grid_.voidage[i];
                double self = 0.0;
                if (i > 0) {
                    const double c = D / face_dx(i - 1) / he;
                    self -= c;
                    m.lower(i)(g, g) -= w * c;
                }
                if (i < N - 1) {
                    const double c = D / face_dx(i) / he;
                    self -= c;
                    m.upper(i)(g, g) -= w * c;
                } else {
                    self -= 2.0 * D / grid_.width[i] / he;
                }
                m.diag(i)(g, g) -= w * self;
            }
            m.lower(N)(g, g) =
                -w * rc_.cross_section_area * 2.0 * D / grid_.width[N - 1];
        }

        Eigen::VectorXd conc(net_.n_species());
        for (int i = grid_.n_cat_begin; i < grid_.n_cat_end; ++i) {
            for (int g = 0; g < n_gas_; ++g) conc[g] = y[gas_index(i, g)];
            for (int s = 0; s < n_surf_; ++s) conc[n_gas_ + s] = y[surf_index(i, s)];
            const Eigen::MatrixXd jr = species_rate_jacobian(conc, k_, net_);
            const double e = grid_.voidage[i];
            auto& d = m.diag(i);
            for (int row = 0; row < net_.n_species(); ++row) {
                const double scale = row < n_gas_ ? 1.0 / e : 1.0;
                for (int col = 0; col < net_.n_species(); ++col)
                    d(row, col) -= w * scale * jr(row, col);
            }
        }
    }

private:
    // basis without input validation (hot path; inputs come from the solver)
    Eigen::VectorXd raw_basis(const Eigen::VectorXd& conc) const {
        const int mrx = net_.n_reactions();
        Eigen::VectorXd psi(mrx);
        for (int j = 0; j < mrx; ++j) {
            double p = 1.0;
            for (int i = 0; i < net_.n_species(); ++i) {
                for (int rep = 0; rep < net_.exponents(j, i); ++rep) p *= conc[i];
            }
            psi[j] = p;
        }
        return psi;
    }

    const ReactorConfig& rc_;
    const ReactionNetwork& net_;
    const RateConstants& k_;
    Grid grid_;
    int n_gas_ = 0, n_surf_ = 0, total_ = 0;
    std::vector<double> diff_;
    std::vector<int> offsets_;
    std::vector<int> block_sizes_;
};

PulseRecord simulate_impl(const ReactorConfig& rc, const ReactionNetwork& net,
                          const RateConstants& k, const Eigen::MatrixXd& surface_field,
                          const PulseSpec& pulse) {
    for (const auto& msg : rc.validate())
        if (msg.rfind("warning:", 0) != 0) throw std::invalid_argument(msg);
    const int n_gas = net.n_gas(), n_surf = net.n_surface();
    if (pulse.intensities.size() != n_gas)
        throw std::invalid_argument("pulse intensities must have one entry per gas species");
    for (int g = 0; g < n_gas; ++g)
        if (pulse.intensities[g] < 0.0)
            throw std::invalid_argument("pulse intensities must be nonnegative");

    PulseSystem sys(rc, net, k);
    const Grid& grid = sys.grid();
    const int n_cat = grid.n_cat_end - grid.n_cat_begin;
    if (surface_field.rows() != n_surf || surface_field.cols() != n_cat)
        throw std::invalid_argument("surface field has wrong shape");
    for (int i = 0; n_surf > 0 && i < n_cat; ++i) {
        double sites = 0.0;
        for (int s = 0; s < n_surf; ++s)
            sites += net.site_counts[n_gas + s] * surface_field(s, i);
        if (std::abs(sites - rc.site_density) > 1e-6 * rc.site_density)
            throw std::invalid_argument("initial surface state violates the site balance");
    }

    // initial condition: top-hat of each injected gas over the first cells
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(sys.size());
    const double h0 = grid.width[0];
    int n_inject;
    if (pulse.injection_width <= 0.0) {
        n_inject = 2;
    } else {
        if (pulse.injection_width > rc.zone_lengths[0])
            throw std::invalid_argument("injection width exceeds the inlet inert zone");
        n_inject = std::max(1, static_cast<int>(std::lround(pulse.injection_width / h0)));
    }
    n_inject = std::min(n_inject, rc.grid_points[0]);
    const double inject_volume = rc.cross_section_area * rc.voidage[0] * n_inject * h0;
    for (int g = 0; g < n_gas; ++g) {
        const double c0 = pulse.intensities[g] / inject_volume;
        for (int i = 0; i < n_inject; ++i) y0[sys.gas_index(i, g)] = c0;
    }
    for (int i = 0; i < n_cat; ++i)
        for (int s = 0; s < n_surf; ++s)
            y0[sys.surf_index(grid.n_cat_begin + i, s)] = surface_field(s, i);

    // output grid
    const int n_out = static_cast<int>(std::lround(rc.time_horizon / rc.output_timestep)) + 1;
    const double t_end = (n_out - 1) * rc.output_timestep;

    PulseRecord rec;
    rec.times.resize(n_out);
    for (int i = 0; i < n_out; ++i) rec.times[i] = i * rc.output_timestep;
    rec.outlet_flux.setZero(n_gas, n_out);
    rec.thin_zone.setZero(net.n_species(), n_out);
    rec.boundary_flux_in.setZero(n_gas, n_out);
    rec.boundary_flux_out.setZero(n_gas, n_out);
    rec.escaped.setZero(n_gas, n_out);
    rec.gas_total.setZero(n_gas, n_out);
    rec.injected = pulse.intensities;

    const int last = grid.n_cells - 1;
    const int cat_b = grid.n_cat_begin, cat_e = grid.n_cat_end;
    auto sample = [&](int col, const Eigen::VectorXd& y) {
        for (int g = 0; g < n_gas; ++g) {
            const double D = sys.diffusivity(g);
            rec.outlet_flux(g, col) =
                rc.cross_section_area * 2.0 * D * y[sys.gas_index(last, g)] / grid.width[last];
            rec.boundary_flux_in(g, col) =
                -D * (y[sys.gas_index(cat_b, g)] - y[sys.gas_index(cat_b - 1, g)]) /
                sys.face_dx(cat_b - 1);
            rec.boundary_flux_out(g, col) =
                -D * (y[sys.gas_index(cat_e, g)] - y[sys.gas_index(cat_e - 1, g)]) /
                sys.face_dx(cat_e - 1);
            rec.escaped(g, col) = y[sys.escaped_index(g)];
            double avg = 0.0;
            for (int i = cat_b; i < cat_e; ++i) avg += y[sys.gas_index(i, g)];
            rec.thin_zone(g, col) = avg / n_cat;
            double held = 0.0;
            for (int i = 0; i < grid.n_cells; ++i)
                held += grid.voidage[i] * grid.width[i] * y[sys.gas_index(i, g)];
            rec.gas_total(g, col) = rc.cross_section_area * held;
        }
        for (int s = 0; s < n_surf; ++s) {
            double avg = 0.0;
            for (int i = cat_b; i < cat_e; ++i) avg += y[sys.surf_index(i, s)];
            rec.thin_zone(n_gas + s, col) = avg / n_cat;
        }
    };

    sample(0, y0);
    rec.surface_start = rec.thin_zone.col(0).tail(n_surf);

    StiffOptions opts;
    opts.rtol = 1e-6;
    opts.atol = 1e-9;
    opts.h_init = 1e-7;

    int next_out = 1;
    BlockTridiagMatrix mat(sys.block_sizes());
    TrBdf2<PulseSystem, BlockTridiagMatrix> stepper(sys, std::move(mat), opts);
    Eigen::VectorXd y_final = stepper.integrate(0.0, t_end, y0, [&](const StepRecord& s) {
        while (next_out < n_out && rec.times[next_out] <= s.t1 + 1e-15) {
            sample(next_out, hermite_eval(s, rec.times[next_out]));
            ++next_out;
        }
    });
    if (next_out < n_out) sample(n_out - 1, y_final);

    rec.surface_state_final = rec.thin_zone.col(n_out - 1).tail(n_surf);
    rec.surface_field_final.resize(n_surf, n_cat);
    for (int i = 0; i < n_cat; ++i)
        for (int s = 0; s < n_surf; ++s)
            rec.surface_field_final(s, i) = y_final[sys.surf_index(cat_b + i, s)];
    return rec;
}

}  // namespace

std::vector<std::string> ReactorConfig::validate() const {
    std::vector<std::string> issues;
    for (int z = 0; z < 3; ++z) {
        if (zone_lengths[z] <= 0.0) issues.push_back("zone lengths must be positive");
        if (voidage[z] <= 0.0 || voidage[z] >= 1.0)
            issues.push_back("voidage must lie strictly between 0 and 1");
        if (grid_points[z] < 1) issues.push_back("grid_points must be >= 1 per zone");
    }
    if (cross_section_area <= 0.0) issues.push_back("cross-section area must be positive");
    if (diffusion_ref <= 0.0) issues.push_back("reference diffusivity must be positive");
    if (ref_molar_mass <= 0.0) issues.push_back("reference molar mass must be positive");
    if (site_density <= 0.0) issues.push_back("site density must be positive");
    if (time_horizon <= 0.0 || output_timestep <= 0.0)
        issues.push_back("time horizon and output step must be positive");
    if (zone_lengths[1] > 0.1 * total_length())
        issues.push_back(
            "warning: catalyst zone exceeds 10% of the reactor; the thin-zone "
            "approximation degrades");
    return issues;
}

PulseRecord simulate_pulse(const ReactorConfig& reactor, const ReactionNetwork& net,
                           const RateConstants& k, const Eigen::VectorXd& surface0,
                           const PulseSpec& pulse) {
    if (surface0.size() != net.n_surface())
        throw std::invalid_argument("surface0 must have one entry per surface species");
    Eigen::MatrixXd field(net.n_surface(), reactor.grid_points[1]);
    field.colwise() = surface0;
    return simulate_impl(reactor, net, k, field, pulse);
}

std::vector<PulseRecord> simulate_pulse_train(const ReactorConfig& reactor,
                                              const ReactionNetwork& net, const RateConstants& k,
                                              const Eigen::VectorXd& surface0,
                                              const PulseSpec& pulse, int n_pulses) {
    if (n_pulses < 1) throw std::invalid_argument("n_pulses must be >= 1");
    std::vector<PulseRecord> records;
    records.reserve(n_pulses);
    Eigen::MatrixXd field(net.n_surface(), reactor.grid_points[1]);
    field.colwise() = surface0;
    for (int p = 0; p < n_pulses; ++p) {
        records.push_back(simulate_impl(reactor, net, k, field, pulse));
        field = records.back().surface_field_final;
    }
    return records;
}

double inert_reference_curve(double tau) {
    if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
    double sum = 0.0;
    double prev = -1.0;
    for (int n = 0; n < 2'000'000; ++n) {
        const double lam = (n + 0.5) * M_PI;
        const double term = (n % 2 == 0 ? 1.0 : -1.0) * (2 * n + 1) * std::exp(-lam * lam * tau);
        sum += term;
        // alternating series: once terms decay the remainder is below the
        // last term's magnitude
        if (std::abs(term) < 1e-12 && std::abs(sum - prev) < 1e-10) break;
        prev = sum;
    }
    return M_PI * sum;
}

Eigen::VectorXd inert_reference_curve(const Eigen::VectorXd& tau_grid) {
    Eigen::VectorXd out(tau_grid.size());
    for (int i = 0; i < tau_grid.size(); ++i) out[i] = inert_reference_curve(tau_grid[i]);
    return out;
}

}  // namespace tapkin
