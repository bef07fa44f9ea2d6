#include "tapkin/kinn.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "tapkin/report.hpp"
#include "tapkin/rng.hpp"

namespace tapkin {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 30.0) return z;
    if (z < -30.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

double swish(double z) { return z * sigmoid(z); }

double swish_d1(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

double swish_d2(double z) {
    const double s = sigmoid(z);
    return s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s));
}

template <typename F>
Eigen::MatrixXd apply(const Eigen::MatrixXd& m, F f) {
    return m.unaryExpr([&](double v) { return f(v); });
}

/// Flattened training rows for one pulse set.
struct Batch {
    Eigen::MatrixXd X;        // d0 x B
    Eigen::VectorXd t;        // B
    Eigen::MatrixXd targets;  // n x B (NaN where unobserved)
    Eigen::MatrixXd flux;     // n_gas x B, (f_in-f_out)/(e*l_cat)
    Eigen::MatrixXd uptake;   // n_el x B (scaled) or 0x0
    int size() const { return static_cast<int>(t.size()); }
};

Batch assemble_batch(const PulseDataset& ds, const std::vector<int>& pulses, int input_dim) {
    const int n_gas = static_cast<int>(ds.scaling.moment_scale.size());
    if (input_dim != 1 && input_dim != 1 + n_gas)
        throw std::invalid_argument(
            "network input dimension must be 1 (log-time) or 1 + n_gas (log-time + moments)");
    int B = 0;
    for (int p : pulses) B += static_cast<int>(ds.pulses.at(p).times.size());
    Batch b;
    b.X.resize(input_dim, B);
    b.t.resize(B);
    b.targets.resize(ds.n_species(), B);
    b.flux.resize(n_gas, B);
    if (ds.has_uptake()) b.uptake.resize(ds.n_uptake_rows(), B);
    int col = 0;
    for (int p : pulses) {
        const auto& s = ds.pulses.at(p);
        for (int j = 0; j < s.times.size(); ++j, ++col) {
            b.X(0, col) = s.log_times[j];
            if (input_dim > 1) b.X.block(1, col, n_gas, 1) = s.moment_features;
            b.t[col] = s.times[j];
            b.targets.col(col) = s.targets.col(j);
            b.flux.col(col) = s.flux_term.col(j);
            if (ds.has_uptake()) b.uptake.col(col) = s.uptake.col(j);
        }
    }
    return b;
}

/// Forward pass with the exact tangent along the log-time input. Keeps all
/// intermediates for the reverse sweep.
struct ForwardPass {
    std::vector<Eigen::MatrixXd> A, Ta;  // activations and their u-tangents
    std::vector<Eigen::MatrixXd> Z, Tz;  // pre-activations and their tangents
    Eigen::MatrixXd N, Nd;               // outputs and dN/du

    void run(const KinnParameters& p, const Eigen::MatrixXd& X) {
        const int L = p.n_layers();
        const int B = static_cast<int>(X.cols());
        A.assign(L + 1, {});
        Ta.assign(L + 1, {});
        Z.assign(L, {});
        Tz.assign(L, {});
        A[0] = X;
        Ta[0] = Eigen::MatrixXd::Zero(X.rows(), B);
        Ta[0].row(0).setOnes();  // d(features)/du
        for (int l = 0; l < L; ++l) {
            Z[l] = (p.weights[l] * A[l]).colwise() + p.biases[l];
            Tz[l] = p.weights[l] * Ta[l];
            if (l + 1 < L) {
                A[l + 1] = apply(Z[l], swish);
                Ta[l + 1] = apply(Z[l], swish_d1).cwiseProduct(Tz[l]);
            }
        }
        if (p.output_softplus) {
            N = apply(Z[L - 1], softplus);
            Nd = apply(Z[L - 1], sigmoid).cwiseProduct(Tz[L - 1]);
        } else {
            N = Z[L - 1];
            Nd = Tz[L - 1];
        }
    }

    /// Reverse sweep for cotangents on (N, Nd); accumulates into gW/gb.
    void backward(const KinnParameters& p, const Eigen::MatrixXd& GN,
                  const Eigen::MatrixXd& GNd, std::vector<Eigen::MatrixXd>& gW,
                  std::vector<Eigen::VectorXd>& gb) const {
        const int L = p.n_layers();
        Eigen::MatrixXd Gz, Gt;
        if (p.output_softplus) {
            const Eigen::MatrixXd S = apply(Z[L - 1], sigmoid);
            const Eigen::MatrixXd Sp = S.cwiseProduct(Eigen::MatrixXd::Ones(S.rows(), S.cols()) - S);
            Gz = S.cwiseProduct(GN) + Sp.cwiseProduct(Tz[L - 1]).cwiseProduct(GNd);
            Gt = S.cwiseProduct(GNd);
        } else {
            Gz = GN;
            Gt = GNd;
        }
        for (int l = L - 1; l >= 0; --l) {
            gW[l].noalias() += Gz * A[l].transpose() + Gt * Ta[l].transpose();
            gb[l] += Gz.rowwise().sum();
            if (l == 0) break;
            const Eigen::MatrixXd GA = p.weights[l].transpose() * Gz;
            const Eigen::MatrixXd GT = p.weights[l].transpose() * Gt;
            const Eigen::MatrixXd P1 = apply(Z[l - 1], swish_d1);
            const Eigen::MatrixXd P2 = apply(Z[l - 1], swish_d2);
            Gt = P1.cwiseProduct(GT);
            Gz = P1.cwiseProduct(GA) + P2.cwiseProduct(Tz[l - 1]).cwiseProduct(GT);
        }
    }
};

/// Everything the loss/gradient evaluation needs besides the parameters.
struct LossContext {
    const PulseDataset& ds;
    const ReactionNetwork& net;
    Batch batch;
    std::vector<int> observed;
    Eigen::MatrixXd exponents_t;    // n x m, double copy of the exponent matrix
    Eigen::MatrixXd uptake_matrix;  // uptake rows (elements, sites) x n_surf
    int n_gas = 0, n_surf = 0;

    LossContext(const PulseDataset& dataset, const ReactionNetwork& network,
                const std::vector<int>& pulses, int input_dim)
        : ds(dataset), net(network) {
        if (network.n_species() != dataset.n_species())
            throw std::invalid_argument("network/dataset species mismatch");
        batch = assemble_batch(dataset, pulses, input_dim);
        observed = dataset.observed_species;
        n_gas = network.n_gas();
        n_surf = network.n_surface();
        exponents_t = network.exponents.cast<double>().transpose();
        if (dataset.has_uptake()) {
            const auto& rows =
                dataset.uptake_rows.empty() ? dataset.element_names : dataset.uptake_rows;
            uptake_matrix.resize(rows.size(), n_surf);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r] == "sites") {
                    uptake_matrix.row(r) = network.site_counts.tail(n_surf).transpose();
                    continue;
                }
                int e = -1;
                for (std::size_t i = 0; i < network.element_names.size(); ++i)
                    if (network.element_names[i] == rows[r]) e = static_cast<int>(i);
                if (e < 0)
                    throw std::invalid_argument("unknown uptake row: " + rows[r]);
                uptake_matrix.row(r) =
                    network.composition.row(e).tail(n_surf);
            }
        }
    }
};

LossBreakdown evaluate(const KinnParameters& params, const LossContext& ctx, double alpha,
                       double beta, Eigen::VectorXd* grad_out) {
    const auto& ds = ctx.ds;
    const auto& net = ctx.net;
    const Batch& b = ctx.batch;
    const int B = b.size();
    const int n = net.n_species();
    const int m = net.n_reactions();
    const Eigen::VectorXd& s = ds.scaling.conc_scale;
    const Eigen::VectorXd k = params.kinetic();

    ForwardPass fwd;
    fwd.run(params, b.X);

    // unscaled concentrations and the power-law basis
    const Eigen::MatrixXd C = s.asDiagonal() * fwd.N;
    Eigen::MatrixXd Psi = Eigen::MatrixXd::Ones(m, B);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i)
            for (int rep = 0; rep < net.exponents(j, i); ++rep)
                Psi.row(j) = Psi.row(j).cwiseProduct(C.row(i));
    const Eigen::MatrixXd Rates = net.stoich * (k.asDiagonal() * Psi);

    // scaled-unit residuals of the governing ODE
    const Eigen::ArrayXd inv_t = b.t.array().inverse();
    Eigen::MatrixXd resid(n, B);
    for (int i = 0; i < n; ++i) {
        const double w = i < ctx.n_gas ? 1.0 / ds.voidage : 1.0;
        Eigen::ArrayXd rhs = w * Rates.row(i).transpose().array();
        if (i < ctx.n_gas) rhs += b.flux.row(i).transpose().array();
        resid.row(i) =
            (fwd.Nd.row(i).transpose().array() * inv_t - rhs / s[i]).matrix().transpose();
    }

    LossBreakdown loss;
    loss.j_model = resid.squaredNorm();
    for (int i : ctx.observed) {
        loss.j_data += (fwd.N.row(i) - b.targets.row(i)).squaredNorm();
    }
    Eigen::MatrixXd epsU;
    if (ds.has_uptake()) {
        // (uptake rows) x c_surf / uptake_scale - scaled uptake target
        const Eigen::MatrixXd Es =
            ctx.uptake_matrix * s.tail(ctx.n_surf).asDiagonal() / ds.scaling.uptake_scale;
        epsU = Es * fwd.N.bottomRows(ctx.n_surf) - b.uptake;
        loss.j_uptake = epsU.squaredNorm();
    }
    if (!grad_out) return loss;

    // reverse pass
    Eigen::MatrixXd GN = Eigen::MatrixXd::Zero(n, B);
    Eigen::MatrixXd GNd = Eigen::MatrixXd::Zero(n, B);
    for (int i : ctx.observed) GN.row(i) = 2.0 * (fwd.N.row(i) - b.targets.row(i));
    if (ds.has_uptake() && beta != 0.0) {
        const Eigen::MatrixXd Es =
            ctx.uptake_matrix * s.tail(ctx.n_surf).asDiagonal() / ds.scaling.uptake_scale;
        GN.bottomRows(ctx.n_surf) += 2.0 * beta * (Es.transpose() * epsU);
    }
    Eigen::VectorXd gk = Eigen::VectorXd::Zero(m);
    if (alpha != 0.0) {
        Eigen::MatrixXd VW(n, B);
        for (int i = 0; i < n; ++i) {
            const double w = i < ctx.n_gas ? 1.0 / ds.voidage : 1.0;
            VW.row(i) = (2.0 * w / s[i]) * resid.row(i);
        }
        const Eigen::MatrixXd KMV = net.stoich.transpose() * VW;           // m x B
        const Eigen::MatrixXd W1 = (k.asDiagonal() * Psi).cwiseProduct(KMV);
        const Eigen::MatrixXd gC = -(ctx.exponents_t * W1).cwiseQuotient(C);
        GN += alpha * (s.asDiagonal() * gC);
        for (int i = 0; i < n; ++i)
            GNd.row(i) = (2.0 * alpha) * resid.row(i).cwiseProduct(inv_t.transpose().matrix());
        gk = -alpha * Psi.cwiseProduct(KMV).rowwise().sum();
    }

    std::vector<Eigen::MatrixXd> gW(params.n_layers());
    std::vector<Eigen::VectorXd> gb(params.n_layers());
    for (int l = 0; l < params.n_layers(); ++l) {
        gW[l] = Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols());
        gb[l] = Eigen::VectorXd::Zero(params.biases[l].size());
    }
    fwd.backward(params, GN, GNd, gW, gb);

    // pack in the flat layout (per layer W row-major then b, kinetic at tail)
    Eigen::VectorXd& g = *grad_out;
    g.resize(params.total_parameter_count());
    int pos = 0;
    for (int l = 0; l < params.n_layers(); ++l) {
        for (int r = 0; r < gW[l].rows(); ++r)
            for (int c = 0; c < gW[l].cols(); ++c) g[pos++] = gW[l](r, c);
        for (int r = 0; r < gb[l].size(); ++r) g[pos++] = gb[l][r];
    }
    for (int j = 0; j < m; ++j) {
        const double sign = params.kinetic_raw[j] > 0.0   ? 1.0
                            : params.kinetic_raw[j] < 0.0 ? -1.0
                                                          : 0.0;
        g[pos++] = gk[j] * sign;
    }
    return loss;
}

std::string schedule_to_string(const TrainingSchedule& sched) {
    std::ostringstream os;
    for (std::size_t i = 0; i < sched.stages.size(); ++i) {
        if (i) os << "; ";
        os << sched.stages[i].alpha << "," << sched.stages[i].beta << ","
           << sched.stages[i].epochs;
    }
    os << " @" << sched.iterations_per_epoch << " it/epoch, step " << sched.step_size;
    return os.str();
}

/// Pooled MAE / r-squared over concentrations (scaled) and rates (unscaled).
void fit_metrics(const KinnParameters& params, const PulseDataset& ds,
                 const ReactionNetwork& net, const std::vector<int>& pulses, double& conc_mae,
                 double& conc_r2, double& rate_mae, double& rate_r2) {
    conc_mae = conc_r2 = rate_mae = rate_r2 = std::nan("");
    if (pulses.empty()) return;
    LossContext ctx(ds, net, pulses, params.input_dim());
    const Batch& b = ctx.batch;
    ForwardPass fwd;
    fwd.run(params, b.X);
    const Eigen::VectorXd& s = ds.scaling.conc_scale;
    const Eigen::VectorXd k = params.kinetic();
    const Eigen::MatrixXd C = s.asDiagonal() * fwd.N;

    // concentrations: scaled predictions against scaled targets
    double abs_sum = 0.0, ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
    int count = 0;
    for (int i : ctx.observed)
        for (int col = 0; col < b.size(); ++col) {
            mean += b.targets(i, col);
            ++count;
        }
    mean /= count;
    for (int i : ctx.observed)
        for (int col = 0; col < b.size(); ++col) {
            const double d = fwd.N(i, col) - b.targets(i, col);
            abs_sum += std::abs(d);
            ss_res += d * d;
            ss_tot += (b.targets(i, col) - mean) * (b.targets(i, col) - mean);
        }
    conc_mae = abs_sum / count;
    conc_r2 = 1.0 - ss_res / ss_tot;

    // rates: network dc/dt against the model right-hand side, unscaled
    Eigen::MatrixXd Psi = Eigen::MatrixXd::Ones(net.n_reactions(), b.size());
    for (int j = 0; j < net.n_reactions(); ++j)
        for (int i = 0; i < net.n_species(); ++i)
            for (int rep = 0; rep < net.exponents(j, i); ++rep)
                Psi.row(j) = Psi.row(j).cwiseProduct(C.row(i));
    const Eigen::MatrixXd Rates = net.stoich * (k.asDiagonal() * Psi);
    abs_sum = ss_res = ss_tot = mean = 0.0;
    count = 0;
    const int n = net.n_species();
    Eigen::MatrixXd dcdt(n, b.size()), rhs(n, b.size());
    for (int i = 0; i < n; ++i)
        for (int col = 0; col < b.size(); ++col) {
            dcdt(i, col) = s[i] * fwd.Nd(i, col) / b.t[col];
            rhs(i, col) = i < ctx.n_gas
                              ? b.flux(i, col) + Rates(i, col) / ds.voidage
                              : Rates(i, col);
            mean += dcdt(i, col);
            ++count;
        }
    mean /= count;
    for (int i = 0; i < n; ++i)
        for (int col = 0; col < b.size(); ++col) {
            const double d = rhs(i, col) - dcdt(i, col);
            abs_sum += std::abs(d);
            ss_res += d * d;
            ss_tot += (dcdt(i, col) - mean) * (dcdt(i, col) - mean);
        }
    rate_mae = abs_sum / count;
    rate_r2 = 1.0 - ss_res / ss_tot;
}

}  // namespace

int KinnParameters::network_parameter_count() const {
    int total = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        total += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return total;
}

Eigen::VectorXd KinnParameters::pack() const {
    Eigen::VectorXd theta(total_parameter_count());
    int pos = 0;
    for (int l = 0; l < n_layers(); ++l) {
        for (int r = 0; r < weights[l].rows(); ++r)
            for (int c = 0; c < weights[l].cols(); ++c) theta[pos++] = weights[l](r, c);
        for (int r = 0; r < biases[l].size(); ++r) theta[pos++] = biases[l][r];
    }
    theta.tail(kinetic_raw.size()) = kinetic_raw;
    return theta;
}

void KinnParameters::unpack(const Eigen::VectorXd& theta) {
    if (theta.size() != total_parameter_count())
        throw std::invalid_argument("parameter vector length mismatch");
    int pos = 0;
    for (int l = 0; l < n_layers(); ++l) {
        for (int r = 0; r < weights[l].rows(); ++r)
            for (int c = 0; c < weights[l].cols(); ++c) weights[l](r, c) = theta[pos++];
        for (int r = 0; r < biases[l].size(); ++r) biases[l][r] = theta[pos++];
    }
    kinetic_raw = theta.tail(kinetic_raw.size());
}

KinnParameters KinnParameters::zeros(const std::vector<int>& layer_sizes, int n_kinetic) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("need at least input/output layers");
    KinnParameters p;
    p.layer_sizes = layer_sizes;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        p.weights.emplace_back(Eigen::MatrixXd::Zero(layer_sizes[l + 1], layer_sizes[l]));
        p.biases.emplace_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
    }
    p.kinetic_raw = Eigen::VectorXd::Zero(n_kinetic);
    return p;
}

KinnParameters KinnParameters::random_init(const std::vector<int>& layer_sizes, int n_kinetic,
                                           double weight_scale, double kinetic_init,
                                           std::uint64_t seed) {
    KinnParameters p = zeros(layer_sizes, n_kinetic);
    RandomStream rng(seed);
    for (auto& W : p.weights)
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) W(r, c) = rng.uniform(-weight_scale, weight_scale);
    p.kinetic_raw.setConstant(kinetic_init);
    return p;
}

void KinnParameters::save(const std::string& path, const std::vector<std::string>& species,
                          const ScalingInfo& scaling, const std::vector<std::string>& k_names,
                          const std::vector<std::string>& k_units) const {
    KeyValueFile kv;
    kv.set("format", "tapkin-parameters-v1");
    std::ostringstream arch;
    for (std::size_t i = 0; i < layer_sizes.size(); ++i)
        arch << (i ? " " : "") << layer_sizes[i];
    kv.set("layer_sizes", arch.str());
    kv.set("output_softplus", output_softplus ? 1 : 0);
    kv.set("n_kinetic", static_cast<int>(kinetic_raw.size()));
    auto join = [](const std::vector<std::string>& v) {
        std::string out;
        for (const auto& x : v) out += (out.empty() ? "" : " ") + x;
        return out;
    };
    kv.set("species", join(species));
    kv.set("kinetic_names", join(k_names));
    kv.set("kinetic_units", join(k_units));
    std::ostringstream scales;
    for (int i = 0; i < scaling.conc_scale.size(); ++i)
        scales << (i ? " " : "") << format_double(scaling.conc_scale[i]);
    kv.set("conc_scale", scales.str());
    std::ostringstream mscales;
    for (int i = 0; i < scaling.moment_scale.size(); ++i)
        mscales << (i ? " " : "") << format_double(scaling.moment_scale[i]);
    kv.set("moment_scale", mscales.str());
    kv.set("uptake_scale", scaling.uptake_scale);
    const Eigen::VectorXd theta = pack();
    std::ostringstream values;
    for (int i = 0; i < theta.size(); ++i) values << (i ? " " : "") << format_double(theta[i]);
    kv.set("theta", values.str());
    kv.save(path);
}

KinnParameters KinnParameters::load(const std::string& path) {
    const auto kv = KeyValueFile::load(path);
    if (kv.get("format") != "tapkin-parameters-v1")
        throw std::runtime_error("unsupported parameter file format");
    std::istringstream arch(kv.get("layer_sizes"));
    std::vector<int> sizes;
    int v;
    while (arch >> v) sizes.push_back(v);
    KinnParameters p = zeros(sizes, kv.get_int("n_kinetic"));
    p.output_softplus = kv.get_int("output_softplus") != 0;
    Eigen::VectorXd theta(p.total_parameter_count());
    std::istringstream values(kv.get("theta"));
    for (int i = 0; i < theta.size(); ++i)
        if (!(values >> theta[i])) throw std::runtime_error("parameter file truncated");
    p.unpack(theta);
    return p;
}

TrainingSchedule single_pulse_schedule() {
    TrainingSchedule sched;
    for (int i = 0; i <= 10; ++i)  // 1e-10 ... 1e0
        sched.stages.push_back({std::pow(10.0, -10.0 + i), 0.0, 5});
    sched.stages.push_back({1.0, 0.0, 15});  // hold at the ending alpha
    return sched;
}

TrainingSchedule multi_pulse_ideal_schedule() {
    TrainingSchedule sched;
    for (int i = 0; i <= 7; ++i)  // 1e-10 ... 1e-3
        sched.stages.push_back({std::pow(10.0, -10.0 + i), 0.0, 5});
    sched.stages.push_back({1e-3, 0.0, 15});
    return sched;
}

TrainingSchedule multi_pulse_practical_schedule() {
    TrainingSchedule sched;
    for (int i = 0; i <= 7; ++i)  // alpha 1e-10 -> 1e-3 with beta 1e-7 -> 1
        sched.stages.push_back({std::pow(10.0, -10.0 + i), std::pow(10.0, -7.0 + i), 5});
    sched.stages.push_back({1e-3, 1.0, 15});
    return sched;
}

Eigen::VectorXd mlp_forward(const KinnParameters& params, const Eigen::VectorXd& features) {
    if (features.size() != params.input_dim())
        throw std::invalid_argument("feature length does not match the network input");
    for (const auto& W : params.weights)
        if (!W.allFinite()) throw std::invalid_argument("non-finite network weights");
    ForwardPass fwd;
    fwd.run(params, features);
    return fwd.N.col(0);
}

void state_and_derivative(const KinnParameters& params, const ScalingInfo& scaling, double t,
                          const Eigen::VectorXd& moment_features, Eigen::VectorXd& conc,
                          Eigen::VectorXd& dconc_dt) {
    if (t <= 0.0) throw std::invalid_argument("time must be positive (log-time input)");
    Eigen::VectorXd x(params.input_dim());
    x[0] = std::log(t);
    if (params.input_dim() > 1) {
        if (moment_features.size() != params.input_dim() - 1)
            throw std::invalid_argument("moment feature length mismatch");
        x.tail(moment_features.size()) = moment_features;
    }
    ForwardPass fwd;
    fwd.run(params, x);
    conc = scaling.conc_scale.cwiseProduct(fwd.N.col(0));
    dconc_dt = scaling.conc_scale.cwiseProduct(fwd.Nd.col(0)) / t;
}

Eigen::VectorXd model_residual(const KinnParameters& params, const ScalingInfo& scaling,
                               const ReactionNetwork& net, double voidage, double t,
                               const Eigen::VectorXd& moment_features,
                               const Eigen::VectorXd& flux_term) {
    Eigen::VectorXd conc, dcdt;
    state_and_derivative(params, scaling, t, moment_features, conc, dcdt);
    const Eigen::VectorXd r = species_rates(conc, RateConstants{params.kinetic()}, net);
    const int n_gas = net.n_gas();
    Eigen::VectorXd resid(net.n_species());
    for (int i = 0; i < net.n_species(); ++i) {
        double rhs = i < n_gas ? flux_term[i] + r[i] / voidage : r[i];
        resid[i] = (dcdt[i] - rhs) / scaling.conc_scale[i];
    }
    return resid;
}

LossBreakdown total_loss(const KinnParameters& params, const PulseDataset& dataset,
                         const ReactionNetwork& net, const std::vector<int>& pulses) {
    LossContext ctx(dataset, net, pulses, params.input_dim());
    return evaluate(params, ctx, 1.0, 1.0, nullptr);
}

LossBreakdown loss_gradient(const KinnParameters& params, const PulseDataset& dataset,
                            const ReactionNetwork& net, const std::vector<int>& pulses,
                            double alpha, double beta, Eigen::VectorXd& grad) {
    LossContext ctx(dataset, net, pulses, params.input_dim());
    return evaluate(params, ctx, alpha, beta, &grad);
}

std::pair<KinnParameters, FitReport> train(const PulseDataset& dataset,
                                           const ReactionNetwork& net,
                                           const TrainingSchedule& schedule,
                                           const std::vector<int>& layer_sizes) {
    const auto t_start = std::chrono::steady_clock::now();
    if (layer_sizes.back() != net.n_species())
        throw std::invalid_argument("network output dimension must equal the species count");
    KinnParameters params =
        KinnParameters::random_init(layer_sizes, net.n_reactions(), schedule.init_scale_weights,
                                    schedule.init_scale_kinetic, schedule.seed);
    LossContext ctx(dataset, net, dataset.train_pulses, params.input_dim());

    Eigen::VectorXd theta = params.pack();
    Eigen::VectorXd grad(theta.size());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
    double b1t = 1.0, b2t = 1.0;

    FitReport report;
    report.seed = schedule.seed;
    report.schedule_echo = schedule_to_string(schedule);

    LossBreakdown loss;
    for (std::size_t stage = 0; stage < schedule.stages.size(); ++stage) {
        const auto& st = schedule.stages[stage];
        for (int epoch = 0; epoch < st.epochs; ++epoch) {
            for (int it = 0; it < schedule.iterations_per_epoch; ++it) {
                loss = evaluate(params, ctx, st.alpha, st.beta, &grad);
                if (!std::isfinite(loss.total(st.alpha, st.beta)))
                    throw TrainingDivergence(static_cast<int>(stage), epoch, it);
                b1t *= schedule.adam_beta1;
                b2t *= schedule.adam_beta2;
                m = schedule.adam_beta1 * m + (1.0 - schedule.adam_beta1) * grad;
                v = schedule.adam_beta2 * v +
                    (1.0 - schedule.adam_beta2) * grad.cwiseProduct(grad);
                const double step = schedule.step_size * st.step_scale;
                for (int i = 0; i < theta.size(); ++i) {
                    const double mh = m[i] / (1.0 - b1t);
                    const double vh = v[i] / (1.0 - b2t);
                    theta[i] -= step * mh / (std::sqrt(vh) + schedule.adam_eps);
                }
                params.unpack(theta);
            }
            report.trajectory.push_back({static_cast<int>(stage), epoch, st.alpha, st.beta,
                                         loss.j_data, loss.j_model, loss.j_uptake,
                                         loss.total(st.alpha, st.beta)});
        }
    }

    const auto& last_stage = schedule.stages.back();
    report.final_loss = evaluate(params, ctx, last_stage.alpha, last_stage.beta, nullptr);
    report.alpha_final = last_stage.alpha;
    report.beta_final = last_stage.beta;
    report.J_final = report.final_loss.total(last_stage.alpha, last_stage.beta);
    report.k_fit = params.kinetic();
    report.k_names = net.reaction_names;
    report.k_units = net.reaction_units;
    fit_metrics(params, dataset, net, dataset.train_pulses, report.train_conc_mae,
                report.train_conc_r2, report.train_rate_mae, report.train_rate_r2);
    fit_metrics(params, dataset, net, dataset.test_pulses, report.test_conc_mae,
                report.test_conc_r2, report.test_rate_mae, report.test_rate_r2);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {params, report};
}

Eigen::MatrixXd predict_pulse(const KinnParameters& params, const ScalingInfo& scaling,
                              const Eigen::VectorXd& moment_features,
                              const Eigen::VectorXd& times) {
    Eigen::MatrixXd out(params.output_dim(), times.size());
    Eigen::VectorXd conc, dcdt;
    for (int i = 0; i < times.size(); ++i) {
        state_and_derivative(params, scaling, times[i], moment_features, conc, dcdt);
        out.col(i) = conc;
    }
    return out;
}

void save_fit_report(const FitReport& report, const std::string& path) {
    KeyValueFile kv;
    kv.set("report", "kinn-fit");
    kv.set("j_data", report.final_loss.j_data);
    kv.set("j_model", report.final_loss.j_model);
    kv.set("j_uptake", report.final_loss.j_uptake);
    kv.set("J", report.J_final);
    kv.set("alpha_final", report.alpha_final);
    kv.set("beta_final", report.beta_final);
    kv.set("seed", report.seed);
    kv.set("schedule", report.schedule_echo);
    kv.set("sigma_note", "sigma values are an inverse-Hessian sensitivity proxy, "
                         "not a rigorous error estimate");
    for (int j = 0; j < report.k_fit.size(); ++j) {
        const std::string name = report.k_names.at(j);
        kv.set("k_fit." + name, report.k_fit[j]);
        kv.set("k_unit." + name, report.k_units.at(j));
        if (report.k_true.size() == report.k_fit.size())
            kv.set("k_true." + name, report.k_true[j]);
    }
    kv.set("train_conc_mae", report.train_conc_mae);
    kv.set("train_conc_r2", report.train_conc_r2);
    kv.set("train_rate_mae", report.train_rate_mae);
    kv.set("train_rate_r2", report.train_rate_r2);
    kv.set("test_conc_mae", report.test_conc_mae);
    kv.set("test_conc_r2", report.test_conc_r2);
    kv.set("test_rate_mae", report.test_rate_mae);
    kv.set("test_rate_r2", report.test_rate_r2);
    kv.set("wall_seconds", report.wall_seconds);
    kv.set("n_trajectory", static_cast<int>(report.trajectory.size()));
    for (std::size_t i = 0; i < report.trajectory.size(); ++i) {
        const auto& p = report.trajectory[i];
        std::ostringstream os;
        os << p.stage << " " << p.epoch << " " << format_double(p.alpha) << " "
           << format_double(p.beta) << " " << format_double(p.j_data) << " "
           << format_double(p.j_model) << " " << format_double(p.j_uptake) << " "
           << format_double(p.J);
        kv.set("traj_" + std::to_string(i), os.str());
    }
    kv.save(path);
}

FitReport load_fit_report(const std::string& path) {
    const auto kv = KeyValueFile::load(path);
    FitReport report;
    report.final_loss.j_data = kv.get_double("j_data");
    report.final_loss.j_model = kv.get_double("j_model");
    report.final_loss.j_uptake = kv.get_double("j_uptake");
    report.J_final = kv.get_double("J");
    report.alpha_final = kv.get_double("alpha_final");
    report.beta_final = kv.get_double("beta_final");
    report.seed = std::stoull(kv.get("seed"));
    report.schedule_echo = kv.get("schedule");
    std::vector<double> k_fit, k_true;
    for (const auto& key : kv.keys()) {
        if (key.rfind("k_fit.", 0) == 0) {
            report.k_names.push_back(key.substr(6));
            k_fit.push_back(kv.get_double(key));
            report.k_units.push_back(kv.get("k_unit." + key.substr(6)));
            if (kv.has("k_true." + key.substr(6)))
                k_true.push_back(kv.get_double("k_true." + key.substr(6)));
        }
    }
    report.k_fit = Eigen::Map<Eigen::VectorXd>(k_fit.data(), k_fit.size());
    if (k_true.size() == k_fit.size())
        report.k_true = Eigen::Map<Eigen::VectorXd>(k_true.data(), k_true.size());
    report.train_conc_mae = kv.get_double("train_conc_mae");
    report.train_conc_r2 = kv.get_double("train_conc_r2");
    report.train_rate_mae = kv.get_double("train_rate_mae");
    report.train_rate_r2 = kv.get_double("train_rate_r2");
    report.test_conc_mae = kv.get_double("test_conc_mae");
    report.test_conc_r2 = kv.get_double("test_conc_r2");
    report.test_rate_mae = kv.get_double("test_rate_mae");
    report.test_rate_r2 = kv.get_double("test_rate_r2");
    report.wall_seconds = kv.get_double("wall_seconds");
    const int n_traj = kv.has("n_trajectory") ? kv.get_int("n_trajectory") : 0;
    for (int i = 0; i < n_traj; ++i) {
        std::istringstream is(kv.get("traj_" + std::to_string(i)));
        FitReport::TrajectoryPoint p;
        is >> p.stage >> p.epoch >> p.alpha >> p.beta >> p.j_data >> p.j_model >> p.j_uptake >>
            p.J;
        report.trajectory.push_back(p);
    }
    return report;
}

}  // namespace tapkin
