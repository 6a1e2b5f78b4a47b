#pragma once

#include <streetrisk/error.hpp>
#include <streetrisk/features.hpp>
#include <streetrisk/normal.hpp>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace streetrisk {

inline constexpr const char* kInterceptName = "(Intercept)";

/// n x p model matrix. Column 0 is the all-ones intercept.
struct DesignMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> names;
    std::vector<std::string> dropped_columns;
    std::vector<std::string> warnings;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    /// Returns the columns named in `wanted`, in that order.
    DesignMatrix select(const std::vector<std::string>& wanted) const {
        std::vector<Eigen::Index> idx;
        std::string missing;
        for (const auto& w : wanted) {
            auto it = std::find(names.begin(), names.end(), w);
            if (it == names.end()) missing += (missing.empty() ? "" : ", ") + w;
            else idx.push_back(it - names.begin());
        }
        if (!missing.empty()) throw InputError("design is missing columns: " + missing);
        DesignMatrix out;
        out.values.resize(values.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = values.col(idx[j]);
        out.names = wanted;
        return out;
    }

    /// Row subset, in the given order.
    DesignMatrix subset(std::span<const std::size_t> row_index) const {
        DesignMatrix out;
        out.names = names;
        out.dropped_columns = dropped_columns;
        out.values.resize(static_cast<Eigen::Index>(row_index.size()), values.cols());
        for (std::size_t i = 0; i < row_index.size(); ++i)
            out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(row_index[i]));
        return out;
    }
};

inline DesignMatrix intercept_design(Eigen::Index n) {
    DesignMatrix d;
    d.values = Eigen::MatrixXd::Ones(n, 1);
    d.names = {kInterceptName};
    return d;
}

struct DesignOptions {
    /// Drop constant columns and exact duplicates of earlier columns. Test
    /// sets are built with this off and then `select`ed to the fitted names.
    bool drop_degenerate = true;
};

/// Intercept plus one column per retained indicator. `rows[i]` holds the
/// features of observation i, with indicators laid out per `feature_names`.
inline DesignMatrix build_design(std::span<const FeatureVector> rows, const std::vector<std::string>& feature_names,
                                 const std::vector<std::string>& retained, const DesignOptions& options = {}) {
    std::set<std::string> unique;
    std::vector<std::size_t> positions;
    for (const auto& name : retained) {
        if (!unique.insert(name).second) throw InputError("duplicate variable name '" + name + "'");
        auto it = std::find(feature_names.begin(), feature_names.end(), name);
        if (it == feature_names.end()) throw InputError("unknown feature '" + name + "'");
        positions.push_back(static_cast<std::size_t>(it - feature_names.begin()));
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    DesignMatrix d = intercept_design(n);
    std::vector<Eigen::VectorXd> kept;
    for (std::size_t k = 0; k < retained.size(); ++k) {
        Eigen::VectorXd col(n);
        for (Eigen::Index i = 0; i < n; ++i) col(i) = rows[static_cast<std::size_t>(i)].indicators.at(positions[k]);
        if (options.drop_degenerate) {
            bool constant = n == 0 || (col.array() == col(0)).all();
            if (constant) {
                d.dropped_columns.push_back(retained[k]);
                d.warnings.push_back("column '" + retained[k] + "' is constant; dropped");
                continue;
            }
            bool duplicate = false;
            for (std::size_t j = 0; j < kept.size() && !duplicate; ++j) duplicate = kept[j] == col;
            if (duplicate) {
                d.dropped_columns.push_back(retained[k]);
                d.warnings.push_back("column '" + retained[k] + "' duplicates an earlier column; dropped");
                continue;
            }
        }
        kept.push_back(std::move(col));
        d.names.push_back(retained[k]);
    }
    d.values.conservativeResize(n, static_cast<Eigen::Index>(1 + kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) d.values.col(static_cast<Eigen::Index>(j + 1)) = kept[j];
    return d;
}

// ---------------------------------------------------------------------------
// Poisson log-link GLM

struct FitOptions {
    double tolerance = 1e-8;       ///< on |dD| / (|D| + 0.1)
    double step_tolerance = 1e-10; ///< on max_j |d beta_j| / (1 + |beta_j|)
    int max_iterations = 100;
    int max_halvings = 10;
    double coefficient_cap = 15.0; ///< |beta| beyond this is quasi-separation
    double pivot_threshold = 1e-10;

    bool operator==(const FitOptions&) const = default;
};

struct FittedModel {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    Eigen::MatrixXd covariance;
    double deviance = 0.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> dropped_columns;
    std::vector<double> deviance_trace; ///< deviance after each iteration, starting value first
    FitOptions options;
};

/// 2 sum [y log(y / mu) - (y - mu)], with y log(y / mu) = 0 at y = 0.
inline double deviance(std::span<const double> y, std::span<const double> mu) {
    if (y.size() != mu.size()) throw InputError("deviance: size mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double term = y[i] > 0.0 ? y[i] * std::log(y[i] / mu[i]) : 0.0;
        d += term - (y[i] - mu[i]);
    }
    return 2.0 * d;
}

inline double poisson_log_likelihood(std::span<const double> y, std::span<const double> mu) {
    double ll = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) ll += y[i] * std::log(mu[i]) - mu[i] - std::lgamma(y[i] + 1.0);
    return ll;
}

namespace detail {

inline Eigen::Index qr_rank(const Eigen::MatrixXd& m, double threshold) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    qr.setThreshold(threshold);
    return qr.rank();
}

inline Eigen::VectorXd mean_from(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, const Eigen::VectorXd& log_off) {
    return (x * beta + log_off).array().exp().matrix();
}

inline double deviance_of(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    return deviance(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                    std::span<const double>(mu.data(), static_cast<std::size_t>(mu.size())));
}

} // namespace detail

/// Maximum-likelihood Poisson fit with log link and log(offset) on the
/// linear predictor, by iteratively reweighted least squares.
///
/// Each iteration solves the weighted least-squares problem with weights mu
/// and working response eta - log(offset) + (y - mu) / mu through a
/// column-pivoted Householder QR of sqrt(W) X. Columns that are linearly
/// dependent on earlier ones (pivot below `pivot_threshold` times the
/// largest) are dropped before iterating. A deviance increase triggers step
/// halving.
inline FittedModel fit_poisson(const DesignMatrix& design, std::span<const double> claim_counts,
                               std::span<const double> offsets, const FitOptions& options = {}) {
    const Eigen::Index n = design.rows();
    if (static_cast<std::size_t>(n) != claim_counts.size() || claim_counts.size() != offsets.size())
        throw InputError("fit_poisson: dimension mismatch");
    if (n == 0) throw InputError("fit_poisson: no observations");
    if (design.cols() == 0) throw InputError("fit_poisson: empty design");

    Eigen::VectorXd y(n), log_off(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double yi = claim_counts[static_cast<std::size_t>(i)];
        double oi = offsets[static_cast<std::size_t>(i)];
        if (!(yi >= 0.0) || yi != std::floor(yi)) throw InputError("fit_poisson: claim counts must be nonnegative integers");
        if (!(oi > 0.0) || !std::isfinite(oi)) throw InputError("fit_poisson: offsets must be positive");
        y(i) = yi;
        log_off(i) = std::log(oi);
    }
    if (!design.values.allFinite()) throw InputError("fit_poisson: non-finite design entries");

    FittedModel model;
    model.options = options;
    model.dropped_columns = design.dropped_columns;

    // Starting point: intercept at the pooled log rate, everything else 0.
    const bool has_intercept = !design.names.empty() && design.names.front() == kInterceptName;
    const double start = std::log((y.sum() + 0.5) / log_off.array().exp().sum());

    // Greedy rank check in column order, on the starting weights.
    Eigen::VectorXd sqrt_w0 = (log_off.array() + (has_intercept ? start : 0.0)).exp().sqrt().matrix();
    std::vector<Eigen::Index> keep;
    {
        Eigen::MatrixXd weighted = sqrt_w0.asDiagonal() * design.values;
        Eigen::MatrixXd trial(n, 0);
        for (Eigen::Index j = 0; j < design.cols(); ++j) {
            Eigen::MatrixXd next(n, trial.cols() + 1);
            next << trial, weighted.col(j);
            if (detail::qr_rank(next, options.pivot_threshold) == next.cols()) {
                keep.push_back(j);
                trial = std::move(next);
            } else {
                model.dropped_columns.push_back(design.names[static_cast<std::size_t>(j)]);
            }
        }
    }
    const auto p = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        x.col(j) = design.values.col(keep[static_cast<std::size_t>(j)]);
        model.names.push_back(design.names[static_cast<std::size_t>(keep[static_cast<std::size_t>(j)])]);
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (has_intercept && keep.front() == 0) beta(0) = start;

    Eigen::VectorXd mu = detail::mean_from(x, beta, log_off);
    double dev = detail::deviance_of(y, mu);
    model.deviance_trace.push_back(dev);

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        Eigen::VectorXd eta_no_off = x * beta;
        Eigen::VectorXd z = eta_no_off.array() + (y - mu).array() / mu.array();
        Eigen::VectorXd sw = mu.array().sqrt();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * x);
        qr.setThreshold(options.pivot_threshold);
        Eigen::VectorXd next = qr.solve((sw.array() * z.array()).matrix());

        Eigen::VectorXd next_mu = detail::mean_from(x, next, log_off);
        double next_dev = detail::deviance_of(y, next_mu);
        for (int h = 0; h < options.max_halvings && !(next_dev <= dev) && iter > 1; ++h) {
            next = 0.5 * (next + beta);
            next_mu = detail::mean_from(x, next, log_off);
            next_dev = detail::deviance_of(y, next_mu);
        }

        for (Eigen::Index j = 0; j < p; ++j) {
            if (!std::isfinite(next(j)) || std::fabs(next(j)) > options.coefficient_cap)
                throw QuasiSeparation(model.names[static_cast<std::size_t>(j)], next(j));
        }

        const double change = std::fabs(next_dev - dev) / (std::fabs(next_dev) + 0.1);
        double step = 0.0;
        for (Eigen::Index j = 0; j < p; ++j)
            step = std::max(step, std::fabs(next(j) - beta(j)) / (1.0 + std::fabs(next(j))));
        beta = std::move(next);
        mu = std::move(next_mu);
        dev = next_dev;
        model.deviance_trace.push_back(dev);
        model.iterations = iter;
        if (change < options.tolerance && step < options.step_tolerance) {
            model.converged = true;
            break;
        }
    }

    // Inverse Fisher information from the QR of sqrt(W) X at the estimate:
    // (X'WX)^-1 = P R^-1 R^-T P'.
    {
        Eigen::VectorXd sw = mu.array().sqrt();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * x);
        Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
        Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
        Eigen::MatrixXd inner = r_inv * r_inv.transpose();
        const auto& perm = qr.colsPermutation();
        model.covariance = perm * inner * perm.transpose();
        model.covariance = 0.5 * (model.covariance + model.covariance.transpose()).eval();
    }

    model.coefficients.assign(beta.data(), beta.data() + p);
    model.deviance = dev;
    model.log_likelihood = poisson_log_likelihood(std::span<const double>(y.data(), static_cast<std::size_t>(n)),
                                                  std::span<const double>(mu.data(), static_cast<std::size_t>(n)));
    return model;
}

/// mu_i = exp(x_i' beta) * offset_i. The design's columns must match the
/// model's (after drops), in order.
inline std::vector<double> predict(const FittedModel& model, const DesignMatrix& design,
                                   std::span<const double> offsets) {
    if (design.names != model.names) {
        std::string expected, got;
        for (const auto& n : model.names) expected += (expected.empty() ? "" : ", ") + n;
        for (const auto& n : design.names) got += (got.empty() ? "" : ", ") + n;
        throw InputError("predict: column mismatch; model has [" + expected + "], design has [" + got + "]");
    }
    if (static_cast<std::size_t>(design.rows()) != offsets.size()) throw InputError("predict: offset size mismatch");
    Eigen::Map<const Eigen::VectorXd> beta(model.coefficients.data(), static_cast<Eigen::Index>(model.coefficients.size()));
    Eigen::VectorXd eta = design.values * beta;
    std::vector<double> mu(offsets.size());
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = std::exp(eta(static_cast<Eigen::Index>(i))) * offsets[i];
    return mu;
}

struct WaldRow {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    bool degenerate = false; ///< zero standard error; z and p undefined
};

inline std::vector<WaldRow> wald_tests(const FittedModel& model) {
    if (!model.converged) throw InputError("wald_tests: model did not converge");
    std::vector<WaldRow> rows;
    for (std::size_t k = 0; k < model.names.size(); ++k) {
        WaldRow r{model.names[k], model.coefficients[k], 0.0, 0.0, 1.0, false};
        double var = model.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
        r.std_error = var > 0.0 ? std::sqrt(var) : 0.0;
        if (r.std_error > 0.0 && std::isfinite(r.std_error)) {
            r.z = r.estimate / r.std_error;
            r.p_value = two_sided_p(r.z);
        } else {
            r.degenerate = true;
            r.z = std::numeric_limits<double>::quiet_NaN();
            r.p_value = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(r);
    }
    return rows;
}

inline nlohmann::json to_json(const FitOptions& o) {
    return {{"tolerance", o.tolerance},
            {"step_tolerance", o.step_tolerance},
            {"max_iterations", o.max_iterations},
            {"max_halvings", o.max_halvings},
            {"coefficient_cap", o.coefficient_cap},
            {"pivot_threshold", o.pivot_threshold}};
}

inline nlohmann::json to_json(const FittedModel& m) {
    nlohmann::json coefs = nlohmann::json::array();
    for (std::size_t k = 0; k < m.names.size(); ++k) coefs.push_back({{"name", m.names[k]}, {"value", m.coefficients[k]}});
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.covariance.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.covariance.cols(); ++j) row.push_back(m.covariance(i, j));
        cov.push_back(std::move(row));
    }
    return {{"coefficients", coefs},
            {"covariance", cov},
            {"deviance", m.deviance},
            {"log_likelihood", m.log_likelihood},
            {"iterations", m.iterations},
            {"converged", m.converged},
            {"dropped_columns", m.dropped_columns},
            {"options", to_json(m.options)}};
}

inline FittedModel fitted_model_from_json(const nlohmann::json& j) {
    FittedModel m;
    try {
        for (const auto& c : j.at("coefficients")) {
            m.names.push_back(c.at("name").get<std::string>());
            m.coefficients.push_back(c.at("value").get<double>());
        }
        const auto p = static_cast<Eigen::Index>(m.names.size());
        m.covariance.resize(p, p);
        const auto& cov = j.at("covariance");
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index k = 0; k < p; ++k)
                m.covariance(i, k) = cov.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
        m.deviance = j.at("deviance").get<double>();
        m.log_likelihood = j.at("log_likelihood").get<double>();
        m.iterations = j.at("iterations").get<int>();
        m.converged = j.at("converged").get<bool>();
        m.dropped_columns = j.at("dropped_columns").get<std::vector<std::string>>();
        const auto& o = j.at("options");
        m.options.tolerance = o.at("tolerance").get<double>();
        m.options.step_tolerance = o.value("step_tolerance", m.options.step_tolerance);
        m.options.max_iterations = o.at("max_iterations").get<int>();
        m.options.max_halvings = o.at("max_halvings").get<int>();
        m.options.coefficient_cap = o.at("coefficient_cap").get<double>();
        m.options.pivot_threshold = o.at("pivot_threshold").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid model JSON: ") + e.what());
    }
    return m;
}

inline void write_wald_csv(std::ostream& out, const std::vector<WaldRow>& rows) {
    out << "name,estimate,std_error,z,p_value\n";
    for (const auto& r : rows) {
        out << r.name << ',' << csv::format_double(r.estimate) << ',' << csv::format_double(r.std_error) << ',';
        if (r.degenerate) out << ",degenerate\n";
        else out << csv::format_double(r.z) << ',' << csv::format_double(r.p_value) << '\n';
    }
}

} // namespace streetrisk
