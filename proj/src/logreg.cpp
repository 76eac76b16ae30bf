#include "latefusion/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "latefusion/error.hpp"
#include "latefusion/parallel.hpp"

namespace latefusion {

namespace {

double softplus(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) noexcept
{
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct Design {
    Eigen::MatrixXd z;  // n x (1 + p), standardized, leading column of ones
    Eigen::VectorXd y;
    std::vector<double> mean, sd;
};

Design build_design(const FeatureTable& table, std::span<const std::string> features)
{
    const std::size_t n = table.rows(), p = features.size();
    Design d;
    d.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
    d.y.resize(static_cast<Eigen::Index>(n));
    d.mean.resize(p);
    d.sd.resize(p);
    d.z.col(0).setOnes();
    for (std::size_t r = 0; r < n; ++r) d.y[static_cast<Eigen::Index>(r)] = table.labels()[r] == ClassLabel::Malignant ? 1.0 : 0.0;

    for (std::size_t j = 0; j < p; ++j) {
        const auto c = table.feature_index(features[j]);
        if (table.missing_count(c) > 0) throw ModelError("feature '" + features[j] + "' has missing cells");
        auto col = table.column(c);
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double v : col) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (!(sd > 0.0)) throw ModelError("singular design: feature '" + features[j] + "' is constant");
        d.mean[j] = mean;
        d.sd[j] = sd;
        for (std::size_t r = 0; r < n; ++r) {
            d.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j + 1)) = (col[r] - mean) / sd;
        }
    }
    return d;
}

double log_lik(const Design& d, const Eigen::VectorXd& beta)
{
    const Eigen::VectorXd eta = d.z * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += d.y[i] * eta[i] - softplus(eta[i]);
    return ll;
}

}  // namespace

double FittedLogReg::coefficient(const std::string& feature) const
{
    auto it = coefficients.find(feature);
    return it == coefficients.end() ? 0.0 : it->second;
}

FittedLogReg fit_logistic(const FeatureTable& table, std::span<const std::string> features, const FitOptions& options)
{
    const std::size_t n = table.rows();
    if (!table.has_both_classes()) throw ModelError("logistic fit needs both classes");
    {
        std::vector<std::string> sorted(features.begin(), features.end());
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ModelError("duplicate feature in fit");
    }
    Design d;
    try {
        d = build_design(table, features);
    } catch (const DataError& e) {
        throw ModelError(e.what());
    }
    const auto k = static_cast<Eigen::Index>(features.size() + 1);
    if (features.size() + 1 > n) throw ModelError("singular design: more parameters than samples");
    if (features.size() > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.z);
        qr.setThreshold(1e-10);
        if (qr.rank() < k) throw ModelError("singular design: collinear features");
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    const double rate = d.y.mean();
    beta[0] = std::log(rate / (1.0 - rate));

    FittedLogReg model;
    double ll = log_lik(d, beta);
    bool capped = false;
    std::size_t it = 0;
    for (; it < options.max_iterations; ++it) {
        const Eigen::VectorXd eta = d.z * beta;
        Eigen::VectorXd prob(eta.size()), w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            prob[i] = sigmoid(eta[i]);
            w[i] = prob[i] * (1.0 - prob[i]);
        }
        const Eigen::VectorXd grad = d.z.transpose() * (d.y - prob);
        if (grad.cwiseAbs().maxCoeff() < options.gradient_tolerance) {
            model.converged = true;
            break;
        }
        const Eigen::MatrixXd hess = d.z.transpose() * w.asDiagonal() * d.z;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        Eigen::VectorXd step = ldlt.solve(grad);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            // Information matrix has collapsed: fitted probabilities are saturated.
            capped = true;
            break;
        }
        double t = 1.0;
        Eigen::VectorXd next = beta + step;
        double next_ll = log_lik(d, next);
        while (next_ll < ll - 1e-12 * (1.0 + std::fabs(ll)) && t > 1e-10) {
            t *= 0.5;
            next = beta + t * step;
            next_ll = log_lik(d, next);
        }
        beta = next;
        ll = next_ll;
        if (beta.cwiseAbs().maxCoeff() > options.coefficient_cap) {
            beta = beta.cwiseMax(-options.coefficient_cap).cwiseMin(options.coefficient_cap);
            ll = log_lik(d, beta);
            capped = true;
            break;
        }
    }
    if (!capped) {
        // A finite optimum can still sit on separated data when the gradient
        // underflows before the cap: check whether the fitted linear predictor
        // orders the classes without overlap.
        const Eigen::VectorXd eta = d.z * beta;
        double max_benign = -std::numeric_limits<double>::infinity();
        double min_malignant = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            if (d.y[i] > 0.5) min_malignant = std::min(min_malignant, eta[i]);
            else max_benign = std::max(max_benign, eta[i]);
        }
        capped = features.size() > 0 && max_benign <= min_malignant;
    }
    if (capped) {
        model.separation = true;
        model.converged = false;
        if (options.warnings) warn("logistic fit: (quasi-)separation detected, coefficients capped");
    } else if (!model.converged && options.warnings) {
        warn("logistic fit: no convergence after " + std::to_string(options.max_iterations) + " iterations");
    }

    model.iterations = it;
    model.n_train = n;
    model.selected_order.assign(features.begin(), features.end());
    double intercept = beta[0];
    for (std::size_t j = 0; j < features.size(); ++j) {
        const double b = beta[static_cast<Eigen::Index>(j + 1)] / d.sd[j];
        model.coefficients[features[j]] = b;
        intercept -= b * d.mean[j];
    }
    model.intercept = intercept;
    model.log_likelihood = ll;
    model.bic = static_cast<double>(1 + model.coefficients.size()) * std::log(static_cast<double>(n)) - 2.0 * ll;
    return model;
}

std::vector<double> predict_proba(const FittedLogReg& model, const FeatureTable& table)
{
    std::vector<double> eta(table.rows(), model.intercept);
    for (const auto& [name, b] : model.coefficients) {
        const auto c = table.find_feature(name);
        if (!c) throw PredictError("table lacks model feature '" + name + "'");
        if (table.missing_count(*c) > 0) throw PredictError("missing cell in model feature '" + name + "'");
        auto col = table.column(*c);
        for (std::size_t r = 0; r < eta.size(); ++r) eta[r] += b * col[r];
    }
    for (auto& v : eta) v = sigmoid(v);
    return eta;
}

FittedLogReg forward_select(const FeatureTable& table, std::span<const std::string> candidates,
                            double delta_bic_stop, unsigned workers)
{
    for (const auto& c : candidates) {
        if (!table.find_feature(c)) throw ModelError("unknown candidate feature '" + c + "'");
    }
    FitOptions quiet;
    quiet.warnings = false;

    std::vector<std::string> selected;
    FittedLogReg current = fit_logistic(table, selected, quiet);
    std::vector<std::string> remaining(candidates.begin(), candidates.end());

    while (!remaining.empty()) {
        std::vector<std::optional<FittedLogReg>> fits(remaining.size());
        parallel_for(remaining.size(), workers, [&](std::size_t i) {
            std::vector<std::string> trial = selected;
            trial.push_back(remaining[i]);
            try {
                fits[i] = fit_logistic(table, trial, quiet);
            } catch (const ModelError&) {
                fits[i].reset();
            }
        });

        std::size_t best = remaining.size();
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            if (!fits[i]) {
                warn("forward selection: skipped candidate '" + remaining[i] + "' (fit failed)");
                continue;
            }
            if (best == remaining.size() || fits[i]->bic < fits[best]->bic ||
                (fits[i]->bic == fits[best]->bic && remaining[i] < remaining[best])) {
                best = i;
            }
        }
        if (best == remaining.size()) break;
        if (!(current.bic - fits[best]->bic > delta_bic_stop)) break;

        current = std::move(*fits[best]);
        selected.push_back(remaining[best]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    }
    current.selected_order = selected;
    return current;
}

double logistic_log_likelihood(const FeatureTable& table, std::span<const std::string> features, double intercept,
                               std::span<const double> beta)
{
    double ll = 0.0;
    std::vector<std::span<const double>> cols;
    for (const auto& f : features) cols.push_back(table.column(table.feature_index(f)));
    for (std::size_t r = 0; r < table.rows(); ++r) {
        double eta = intercept;
        for (std::size_t j = 0; j < cols.size(); ++j) eta += beta[j] * cols[j][r];
        const double y = table.labels()[r] == ClassLabel::Malignant ? 1.0 : 0.0;
        ll += y * eta - softplus(eta);
    }
    return ll;
}

std::vector<double> logistic_gradient(const FeatureTable& table, std::span<const std::string> features,
                                      double intercept, std::span<const double> beta)
{
    std::vector<std::span<const double>> cols;
    for (const auto& f : features) cols.push_back(table.column(table.feature_index(f)));
    std::vector<double> g(features.size() + 1, 0.0);
    for (std::size_t r = 0; r < table.rows(); ++r) {
        double eta = intercept;
        for (std::size_t j = 0; j < cols.size(); ++j) eta += beta[j] * cols[j][r];
        const double y = table.labels()[r] == ClassLabel::Malignant ? 1.0 : 0.0;
        const double resid = y - sigmoid(eta);
        g[0] += resid;
        for (std::size_t j = 0; j < cols.size(); ++j) g[j + 1] += resid * cols[j][r];
    }
    return g;
}

void to_json(nlohmann::json& j, const FittedLogReg& m)
{
    j = nlohmann::json{{"format", "latefusion.logreg"},
                       {"version", 1},
                       {"intercept", m.intercept},
                       {"coefficients", m.coefficients},
                       {"selected_order", m.selected_order},
                       {"log_likelihood", m.log_likelihood},
                       {"bic", m.bic},
                       {"n_train", m.n_train},
                       {"converged", m.converged},
                       {"separation", m.separation}};
}

void from_json(const nlohmann::json& j, FittedLogReg& m)
{
    if (j.value("format", std::string{}) != "latefusion.logreg" || j.value("version", 0) != 1) {
        throw ModelError("not a version 1 logistic regression document");
    }
    m.intercept = j.at("intercept").get<double>();
    m.coefficients = j.at("coefficients").get<std::map<std::string, double>>();
    m.selected_order = j.at("selected_order").get<std::vector<std::string>>();
    m.log_likelihood = j.at("log_likelihood").get<double>();
    m.bic = j.at("bic").get<double>();
    m.n_train = j.at("n_train").get<std::size_t>();
    m.converged = j.value("converged", true);
    m.separation = j.value("separation", false);
}

}  // namespace latefusion
