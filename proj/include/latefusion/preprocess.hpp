#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "latefusion/table.hpp"

namespace latefusion {

/// Linear interpolation between order statistics (R type 7):
/// h = (n-1)q, Q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
/// `sorted` must be ascending and non-empty.
double quantile_type7(std::span<const double> sorted, double q);

double median(std::vector<double> values);

struct ScaledFeature {
    std::string name;
    double median = 0.0;
    double iqr = 0.0;
    bool usable = false;  // false when IQR is 0 or fewer than 2 reference values were observed
};

/// Median / IQR standardization fitted on reference-class rows.
struct RobustScaler {
    std::string cohort;     // empty: applies to every row
    std::string reference;  // e.g. "Benign within cohort A"
    std::vector<ScaledFeature> features;

    const ScaledFeature* find(const std::string& name) const;
};

/// One scaler per cohort when `per_cohort` is set, otherwise a single scaler
/// with an empty cohort tag. Throws PreprocessError when a cohort has fewer
/// than 2 reference rows.
std::vector<RobustScaler> fit_robust_scaler(const FeatureTable& table, ClassLabel reference, bool per_cohort);

/// (x - median) / IQR for every row. Unusable features are dropped from the
/// output with a warning; a table feature unknown to the scaler throws.
FeatureTable apply_scaler(const RobustScaler& scaler, const FeatureTable& table);

/// Applies the scaler matching each row's cohort (an empty-cohort scaler
/// matches all rows). Features unusable in any scaler are dropped.
FeatureTable apply_scalers(std::span<const RobustScaler> scalers, const FeatureTable& table);

struct MissingnessResult {
    FeatureTable table;
    std::vector<std::string> dropped;
    std::map<std::string, double> imputation_medians;  // per kept feature, over observed values
};

/// Drops features whose missing fraction exceeds `max_missing_fraction`, then
/// fills remaining gaps with the feature's median over observed rows.
MissingnessResult filter_missingness(const FeatureTable& table, double max_missing_fraction);

/// Fills missing cells from a stored median map (test-time counterpart of filter_missingness).
FeatureTable impute_medians(const FeatureTable& table, const std::map<std::string, double>& medians);

/// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> midranks(std::span<const double> values);

struct CorrelationMatrix {
    std::vector<std::string> feature_names;
    std::vector<double> rho;                // row-major p x p
    std::vector<std::uint8_t> undefined;    // set where a feature was constant or too few complete rows

    std::size_t size() const noexcept { return feature_names.size(); }
    double at(std::size_t i, std::size_t j) const noexcept { return rho[i * size() + j]; }
    bool is_undefined(std::size_t i, std::size_t j) const noexcept { return undefined[i * size() + j] != 0; }
};

/// Spearman rho over complete pairs (x and y both observed).
/// NaN when fewer than 3 complete pairs remain or either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

CorrelationMatrix spearman_matrix(const FeatureTable& table, unsigned workers = 1);

struct PruneResult {
    FeatureTable table;
    std::vector<std::string> removed;  // in removal order
};

/// Greedy redundancy pruning: while some pair has |rho| >= threshold, take the
/// worst pair and remove the member with the larger mean |rho| to the other
/// remaining features (lexicographically later name on ties).
PruneResult drop_correlated(const FeatureTable& table, const CorrelationMatrix& matrix, double threshold = 0.95);

}  // namespace latefusion
