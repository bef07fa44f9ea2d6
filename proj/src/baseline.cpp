#include "tapkin/baseline.hpp"

#include <cmath>
#include <stdexcept>

#include "tapkin/report.hpp"

namespace tapkin {

void estimate_derivatives(const Eigen::VectorXd& times, const Eigen::VectorXd& concentration,
                          const SmoothingSpec& smoothing, Eigen::VectorXd& value,
                          Eigen::VectorXd& derivative) {
    const int n = static_cast<int>(times.size());
    if (concentration.size() != n) throw std::invalid_argument("series length mismatch");
    for (int i = 1; i < n; ++i)
        if (times[i] <= times[i - 1])
            throw std::invalid_argument("times must be strictly increasing");
    if (smoothing.enabled) {
        savgol_fit(times, concentration, smoothing.window, smoothing.poly_order, value,
                   derivative);
        return;
    }
    value = concentration;
    derivative.resize(n);
    if (n < 2) throw std::invalid_argument("need at least two points to differentiate");
    derivative[0] = (concentration[1] - concentration[0]) / (times[1] - times[0]);
    derivative[n - 1] =
        (concentration[n - 1] - concentration[n - 2]) / (times[n - 1] - times[n - 2]);
    for (int i = 1; i + 1 < n; ++i)
        derivative[i] =
            (concentration[i + 1] - concentration[i - 1]) / (times[i + 1] - times[i - 1]);
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter) {
    const int m = static_cast<int>(A.cols());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    std::vector<bool> passive(m, false);
    Eigen::VectorXd w = A.transpose() * (b - A * x);
    const double tol = 1e-12 * A.cwiseAbs().maxCoeff() * b.cwiseAbs().maxCoeff();

    for (int iter = 0; iter < max_iter; ++iter) {
        // most-violating inactive coordinate
        int best = -1;
        double best_w = tol;
        for (int j = 0; j < m; ++j)
            if (!passive[j] && w[j] > best_w) {
                best_w = w[j];
                best = j;
            }
        if (best < 0) break;
        passive[best] = true;

        for (int inner = 0; inner < max_iter; ++inner) {
            std::vector<int> idx;
            for (int j = 0; j < m; ++j)
                if (passive[j]) idx.push_back(j);
            Eigen::MatrixXd Ap(A.rows(), idx.size());
            for (std::size_t c = 0; c < idx.size(); ++c) Ap.col(c) = A.col(idx[c]);
            const Eigen::VectorXd z = Ap.colPivHouseholderQr().solve(b);
            if (z.minCoeff() > 0.0) {
                x.setZero();
                for (std::size_t c = 0; c < idx.size(); ++c) x[idx[c]] = z[c];
                break;
            }
            // step back to the feasible boundary and retire a coordinate
            double alpha = 1.0;
            for (std::size_t c = 0; c < idx.size(); ++c)
                if (z[c] <= 0.0)
                    alpha = std::min(alpha, x[idx[c]] / (x[idx[c]] - z[c]));
            for (std::size_t c = 0; c < idx.size(); ++c) {
                x[idx[c]] += alpha * (z[c] - x[idx[c]]);
                if (x[idx[c]] <= 1e-14) {
                    x[idx[c]] = 0.0;
                    passive[idx[c]] = false;
                }
            }
        }
        w = A.transpose() * (b - A * x);
    }
    return x;
}

BaselineResult fit_k_linear_ls(const Eigen::VectorXd& times, const Eigen::MatrixXd& conc,
                               const Eigen::MatrixXd& dconc_dt,
                               const Eigen::MatrixXd& gas_flux_term,
                               const std::vector<int>& observed_species,
                               const ReactionNetwork& net, double voidage) {
    const int T = static_cast<int>(times.size());
    const int m = net.n_reactions();
    const int n_gas = net.n_gas();
    if (observed_species.empty()) throw std::invalid_argument("empty observation set");

    const int rows = T * static_cast<int>(observed_species.size());
    Eigen::MatrixXd design(rows, m);
    Eigen::VectorXd target(rows);
    int row = 0;
    for (int j = 0; j < T; ++j) {
        const Eigen::VectorXd psi = rate_basis(conc.col(j).cwiseMax(0.0), net);
        for (int i : observed_species) {
            for (int jr = 0; jr < m; ++jr) design(row, jr) = net.stoich(i, jr) * psi[jr];
            target[row] = i < n_gas
                              ? voidage * (dconc_dt(i, j) - gas_flux_term(i, j))
                              : dconc_dt(i, j);
            ++row;
        }
    }

    BaselineResult result;
    result.k_names = net.reaction_names;
    result.k = nnls(design, target);
    result.residual_norm = (design * result.k - target).norm();

    // per-parameter diagnostics: negligible basis columns, zero-clamped
    // solutions, and involvement in a near-null direction of the normal matrix
    result.converged.assign(m, true);
    Eigen::VectorXd col_norms(m);
    for (int j = 0; j < m; ++j) col_norms[j] = design.col(j).norm();
    const double max_norm = col_norms.maxCoeff();
    Eigen::MatrixXd scaled = design;
    for (int j = 0; j < m; ++j)
        if (col_norms[j] > 0.0) scaled.col(j) /= col_norms[j];
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinV);
    const double cond = svd.singularValues()(0) /
                        svd.singularValues()(svd.singularValues().size() - 1);
    result.condition_number = cond * cond;  // normal-equation conditioning
    const Eigen::VectorXd v_min = svd.matrixV().col(svd.matrixV().cols() - 1);
    for (int j = 0; j < m; ++j) {
        if (col_norms[j] < 1e-10 * max_norm) result.converged[j] = false;
        if (result.k[j] == 0.0) result.converged[j] = false;
        if (result.condition_number > 1e12 &&
            std::abs(v_min[j]) > 1.0 / std::sqrt(2.0 * m))
            result.converged[j] = false;
    }
    return result;
}

BaselineResult run_baseline(const PulseDataset& dataset, const ReactionNetwork& net,
                            const SmoothingSpec& smoothing, double site_density) {
    const int n = net.n_species();
    const int n_gas = net.n_gas();
    const int n_surf = net.n_surface();

    // concatenate the training pulses
    std::vector<Eigen::MatrixXd> conc_blocks, deriv_blocks, flux_blocks;
    int total = 0;
    for (int p : dataset.train_pulses) {
        const auto& s = dataset.pulses.at(p);
        const int T = static_cast<int>(s.times.size());
        Eigen::MatrixXd conc(n, T), deriv = Eigen::MatrixXd::Zero(n, T);
        for (int i : dataset.observed_species) {
            Eigen::VectorXd value, derivative;
            const Eigen::VectorXd unscaled =
                s.targets.row(i).transpose() * dataset.scaling.conc_scale[i];
            estimate_derivatives(s.times, unscaled, smoothing, value, derivative);
            conc.row(i) = value.transpose();
            deriv.row(i) = derivative.transpose();
        }
        if (dataset.mode == DatasetMode::Practical) {
            // adspecies reconstructed from the uptake rows; the site balance
            // is appended when the dataset does not already carry a site row
            const auto& row_names = dataset.uptake_rows.empty() ? dataset.element_names
                                                                : dataset.uptake_rows;
            bool has_site_row = false;
            for (const auto& name : row_names) has_site_row |= name == "sites";
            const int n_rows = static_cast<int>(row_names.size()) + (has_site_row ? 0 : 1);
            Eigen::MatrixXd lhs(n_rows, n_surf);
            for (std::size_t r = 0; r < row_names.size(); ++r) {
                if (row_names[r] == "sites") {
                    lhs.row(r) = net.site_counts.tail(n_surf).transpose();
                    continue;
                }
                int e = -1;
                for (std::size_t i = 0; i < net.element_names.size(); ++i)
                    if (net.element_names[i] == row_names[r]) e = static_cast<int>(i);
                if (e < 0) throw std::invalid_argument("unknown uptake row: " + row_names[r]);
                lhs.row(r) = net.composition.row(e).tail(n_surf);
            }
            if (!has_site_row)
                lhs.row(n_rows - 1) = net.site_counts.tail(n_surf).transpose();
            const auto solver = lhs.colPivHouseholderQr();
            for (int j = 0; j < T; ++j) {
                Eigen::VectorXd rhs(n_rows);
                rhs.head(row_names.size()) = s.uptake.col(j) * dataset.scaling.uptake_scale;
                if (!has_site_row) rhs[n_rows - 1] = site_density;
                conc.col(j).tail(n_surf) = solver.solve(rhs).cwiseMax(0.0);
            }
        } else if (static_cast<int>(dataset.observed_species.size()) < n) {
            throw std::invalid_argument("ideal-mode baseline expects all species observed");
        }
        conc_blocks.push_back(std::move(conc));
        deriv_blocks.push_back(std::move(deriv));
        flux_blocks.push_back(s.flux_term);
        total += T;
    }

    Eigen::VectorXd times(total);  // synthetic strictly-increasing axis for concatenation
    Eigen::MatrixXd conc(n, total), deriv(n, total), flux(n_gas, total);
    int col = 0;
    for (std::size_t b = 0; b < conc_blocks.size(); ++b) {
        const int T = static_cast<int>(conc_blocks[b].cols());
        conc.middleCols(col, T) = conc_blocks[b];
        deriv.middleCols(col, T) = deriv_blocks[b];
        flux.middleCols(col, T) = flux_blocks[b];
        col += T;
    }
    for (int i = 0; i < total; ++i) times[i] = i;

    auto result = fit_k_linear_ls(times, conc, deriv, flux, dataset.observed_species, net,
                                  dataset.voidage);
    result.smoothing = smoothing;
    return result;
}

void save_baseline_report(const BaselineResult& result, const Eigen::VectorXd& k_true,
                          const std::string& path) {
    KeyValueFile kv;
    kv.set("report", "baseline-fit");
    kv.set("residual_norm", result.residual_norm);
    kv.set("condition_number", result.condition_number);
    kv.set("smoothing", result.smoothing.enabled ? "savgol" : "none");
    kv.set("smoothing_window", result.smoothing.window);
    kv.set("smoothing_order", result.smoothing.poly_order);
    for (int j = 0; j < result.k.size(); ++j) {
        const std::string& name = result.k_names.at(j);
        kv.set("k_fit." + name, result.k[j]);
        kv.set("k_converged." + name, result.converged[j] ? 1 : 0);
        if (k_true.size() == result.k.size()) kv.set("k_true." + name, k_true[j]);
    }
    kv.save(path);
}

BaselineResult load_baseline_report(const std::string& path) {
    const auto kv = KeyValueFile::load(path);
    BaselineResult result;
    result.residual_norm = kv.get_double("residual_norm");
    result.condition_number = kv.get_double("condition_number");
    result.smoothing.enabled = kv.get("smoothing") == "savgol";
    result.smoothing.window = kv.get_int("smoothing_window");
    result.smoothing.poly_order = kv.get_int("smoothing_order");
    std::vector<double> k;
    for (const auto& key : kv.keys()) {
        if (key.rfind("k_fit.", 0) == 0) {
            const std::string name = key.substr(6);
            result.k_names.push_back(name);
            k.push_back(kv.get_double(key));
            result.converged.push_back(kv.get_int("k_converged." + name) != 0);
        }
    }
    result.k = Eigen::Map<Eigen::VectorXd>(k.data(), k.size());
    return result;
}

}  // namespace tapkin
