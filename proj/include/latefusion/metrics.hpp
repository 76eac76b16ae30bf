#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latefusion/table.hpp"

namespace latefusion {

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t positives() const noexcept { return tp + fn; }
    std::size_t negatives() const noexcept { return tn + fp; }
    bool operator==(const Confusion&) const = default;
};

/// A sample is called Malignant when score >= threshold.
Confusion confusion(std::span<const double> scores, std::span<const ClassLabel> labels, double threshold);

/// PPV and NPV are empty when nothing was predicted in that class; AUC is
/// filled in only by callers that have scores.
struct MetricsRow {
    double sensitivity = 0.0;
    double specificity = 0.0;
    std::optional<double> ppv;
    std::optional<double> npv;
    double f1 = 0.0;
    double balanced_accuracy = 0.0;
    std::optional<double> auc;
};

/// Throws MetricsError when the confusion has no positives or no negatives.
MetricsRow metrics_from_confusion(const Confusion& c);

struct RocPoint {
    double threshold = 0.0;  // +inf for the (0, 0) origin
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // from (0,0) to (1,1), thresholds descending
};

RocCurve roc_curve(std::span<const double> scores, std::span<const ClassLabel> labels);

/// Trapezoidal area under the ROC curve; tied positive/negative scores count 1/2.
double auc(std::span<const double> scores, std::span<const ClassLabel> labels);

struct ThresholdChoice {
    double threshold = 0.0;
    double balanced_accuracy = 0.0;
};

/// Sweeps the minimum score (everything positive), midpoints between
/// consecutive distinct scores, and a value just above the maximum
/// (everything negative). Among equally good candidates the median one, in
/// ascending threshold order, is returned (lower median for even counts).
ThresholdChoice best_threshold_bacc(std::span<const double> scores, std::span<const ClassLabel> labels);

double balanced_accuracy_at(std::span<const double> scores, std::span<const ClassLabel> labels, double threshold);

/// Column names shared by every metrics table, in report order.
const std::vector<std::string>& metric_names();

/// One row per (name, metrics) pair; first column is "model".
void write_metrics_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricsRow>>& rows);

/// Text for one metric value: 6 significant digits, "NA" when undefined.
std::string format_metric(const std::optional<double>& value);

}  // namespace latefusion
