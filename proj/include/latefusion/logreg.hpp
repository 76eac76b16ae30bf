#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "latefusion/table.hpp"

namespace latefusion {

/// Logistic regression on original feature units.
/// Invariant: bic == (1 + coefficients.size()) * ln(n_train) - 2 * log_likelihood.
struct FittedLogReg {
    double intercept = 0.0;
    std::map<std::string, double> coefficients;
    std::vector<std::string> selected_order;  // order of forward addition (or fit order)
    double log_likelihood = 0.0;
    double bic = 0.0;
    std::size_t n_train = 0;
    std::size_t iterations = 0;
    bool converged = false;
    bool separation = false;  // coefficients were capped

    double coefficient(const std::string& feature) const;
};

struct FitOptions {
    std::size_t max_iterations = 100;
    double gradient_tolerance = 1e-8;  // max |score| on standardized inputs
    double coefficient_cap = 30.0;     // |beta| bound on standardized inputs
    bool warnings = true;
};

/// Damped Newton / IRLS on internally standardized columns. Throws ModelError
/// for a singular design, a single-class response or missing cells; reports
/// separation through FittedLogReg::separation (and a warning).
FittedLogReg fit_logistic(const FeatureTable& table, std::span<const std::string> features,
                          const FitOptions& options = {});

/// sigmoid(intercept + sum beta x) per row. Throws PredictError on a missing cell
/// or absent feature.
std::vector<double> predict_proba(const FittedLogReg& model, const FeatureTable& table);

/// Greedy forward selection from the intercept-only model. Each step fits every
/// one-feature extension and keeps the lowest BIC (lexicographic name on exact
/// ties); selection stops once the best improvement over the current model is
/// <= delta_bic_stop or no candidate remains.
FittedLogReg forward_select(const FeatureTable& table, std::span<const std::string> candidates,
                            double delta_bic_stop = 2.0, unsigned workers = 1);

/// Bernoulli log-likelihood and its gradient (intercept first, then features in
/// the given order) at arbitrary coefficients, on original units.
double logistic_log_likelihood(const FeatureTable& table, std::span<const std::string> features, double intercept,
                               std::span<const double> beta);
std::vector<double> logistic_gradient(const FeatureTable& table, std::span<const std::string> features,
                                      double intercept, std::span<const double> beta);

void to_json(nlohmann::json& j, const FittedLogReg& model);
void from_json(const nlohmann::json& j, FittedLogReg& model);

}  // namespace latefusion
