#include "latefusion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>

#include "latefusion/csv.hpp"
#include "latefusion/error.hpp"

namespace latefusion {

namespace {

void check_inputs(std::span<const double> scores, std::span<const ClassLabel> labels)
{
    if (scores.size() != labels.size()) throw MetricsError("scores and labels differ in length");
    for (double s : scores) {
        if (std::isnan(s)) throw MetricsError("NaN score");
    }
}

void require_both_classes(std::span<const ClassLabel> labels)
{
    const auto pos = std::count(labels.begin(), labels.end(), ClassLabel::Malignant);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
        throw MetricsError("both classes are required");
    }
}

// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const double> scores)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace

Confusion confusion(std::span<const double> scores, std::span<const ClassLabel> labels, double threshold)
{
    check_inputs(scores, labels);
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == ClassLabel::Malignant) {
            (predicted ? c.tp : c.fn)++;
        } else {
            (predicted ? c.fp : c.tn)++;
        }
    }
    return c;
}

MetricsRow metrics_from_confusion(const Confusion& c)
{
    if (c.positives() == 0 || c.negatives() == 0) throw MetricsError("confusion needs positives and negatives");
    const auto d = [](std::size_t x) { return static_cast<double>(x); };
    MetricsRow m;
    m.sensitivity = d(c.tp) / d(c.positives());
    m.specificity = d(c.tn) / d(c.negatives());
    if (c.tp + c.fp > 0) m.ppv = d(c.tp) / d(c.tp + c.fp);
    if (c.tn + c.fn > 0) m.npv = d(c.tn) / d(c.tn + c.fn);
    m.f1 = 2.0 * d(c.tp) / (2.0 * d(c.tp) + d(c.fp) + d(c.fn));
    m.balanced_accuracy = (m.sensitivity + m.specificity) / 2.0;
    return m;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const ClassLabel> labels)
{
    check_inputs(scores, labels);
    require_both_classes(labels);
    const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), ClassLabel::Malignant));
    const double neg = static_cast<double>(labels.size()) - pos;

    RocCurve roc;
    roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    const auto order = descending(scores);
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == ClassLabel::Malignant ? tp : fp)++;
            ++i;
        }
        roc.points.push_back({s, static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
    }
    return roc;
}

double auc(std::span<const double> scores, std::span<const ClassLabel> labels)
{
    check_inputs(scores, labels);
    require_both_classes(labels);
    // Twice the trapezoid area in integer units of (1/P) x (1/N).
    const auto order = descending(scores);
    std::uint64_t tp = 0, fp = 0, twice_area = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        const std::uint64_t tp0 = tp, fp0 = fp;
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == ClassLabel::Malignant ? tp : fp)++;
            ++i;
        }
        twice_area += (fp - fp0) * (tp + tp0);
    }
    return static_cast<double>(twice_area) / (2.0 * static_cast<double>(tp) * static_cast<double>(fp));
}

double balanced_accuracy_at(std::span<const double> scores, std::span<const ClassLabel> labels, double threshold)
{
    return metrics_from_confusion(confusion(scores, labels, threshold)).balanced_accuracy;
}

ThresholdChoice best_threshold_bacc(std::span<const double> scores, std::span<const ClassLabel> labels)
{
    check_inputs(scores, labels);
    require_both_classes(labels);

    const auto order = descending(scores);
    const std::uint64_t pos = static_cast<std::uint64_t>(std::count(labels.begin(), labels.end(), ClassLabel::Malignant));
    const std::uint64_t neg = labels.size() - pos;

    // Walk distinct scores from the top. After consuming the group at score s,
    // (tp, fp) is the confusion of threshold s; a threshold strictly between s
    // and the next lower score gives the same confusion.
    struct Candidate {
        double threshold;
        std::uint64_t key;  // (tp * N + tn * P), proportional to BAcc
    };
    std::vector<Candidate> candidates;
    const double top = scores[order.front()];
    candidates.push_back({std::nextafter(top, std::numeric_limits<double>::infinity()), neg * pos});

    std::uint64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == ClassLabel::Malignant ? tp : fp)++;
            ++i;
        }
        double t;
        if (i < order.size()) {
            const double lower = scores[order[i]];
            t = lower + (s - lower) / 2.0;
            if (!(t > lower)) t = s;
        } else {
            t = s;  // minimum score: everything called positive
        }
        candidates.push_back({t, tp * neg + (neg - fp) * pos});
    }

    std::uint64_t best = 0;
    for (const auto& c : candidates) best = std::max(best, c.key);
    std::vector<double> tied;
    for (const auto& c : candidates) {
        if (c.key == best) tied.push_back(c.threshold);
    }
    std::sort(tied.begin(), tied.end());
    ThresholdChoice out;
    out.threshold = tied[(tied.size() - 1) / 2];
    out.balanced_accuracy = balanced_accuracy_at(scores, labels, out.threshold);
    return out;
}

const std::vector<std::string>& metric_names()
{
    static const std::vector<std::string> names{"Sensitivity", "Specificity", "PPV", "NPV",
                                                "F1", "Balanced Accuracy", "AUC"};
    return names;
}

std::string format_metric(const std::optional<double>& value)
{
    return value ? csv::format_g6(*value) : std::string("NA");
}

void write_metrics_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricsRow>>& rows)
{
    csv::write_version_line(out, "metrics");
    csv::Writer w(out);
    std::vector<std::string> header{"model"};
    header.insert(header.end(), metric_names().begin(), metric_names().end());
    w.row(header);
    for (const auto& [name, m] : rows) {
        w.row({name, format_metric(m.sensitivity), format_metric(m.specificity), format_metric(m.ppv),
               format_metric(m.npv), format_metric(m.f1), format_metric(m.balanced_accuracy), format_metric(m.auc)});
    }
}

}  // namespace latefusion
