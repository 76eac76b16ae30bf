#include "latefusion/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "latefusion/csv.hpp"
#include "latefusion/error.hpp"
#include "latefusion/normal.hpp"

namespace latefusion {

std::string_view rule_name(FusionRule rule) noexcept
{
    switch (rule) {
    case FusionRule::Stouffer: return "stouffer";
    case FusionRule::Mean: return "mean";
    case FusionRule::Max: return "max";
    case FusionRule::Product: return "product";
    }
    return "unknown";
}

FusionRule parse_rule(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (FusionRule rule : kAllFusionRules) {
        if (lower == rule_name(rule)) return rule;
    }
    throw FusionError("unknown fusion rule '" + std::string(text) + "'");
}

double fuse_pair(double p1, double p2, FusionRule rule)
{
    if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0)) {
        throw FusionError("fusion inputs must lie in [0, 1]");
    }
    switch (rule) {
    case FusionRule::Mean: return (p1 + p2) / 2.0;
    case FusionRule::Max: return std::max(p1, p2);
    case FusionRule::Product: return p1 * p2;
    case FusionRule::Stouffer: {
        const double a = std::clamp(p1, kStoufferClip, 1.0 - kStoufferClip);
        const double b = std::clamp(p2, kStoufferClip, 1.0 - kStoufferClip);
        // The combined z can round to exactly 0 or 1; keep the fused value open.
        const double z = (normal_quantile(a) + normal_quantile(b)) / std::sqrt(2.0);
        return std::clamp(normal_cdf(z), kStoufferClip, 1.0 - kStoufferClip);
    }
    }
    throw FusionError("unknown fusion rule");
}

std::pair<ModalityScores, ModalityScores> align_scores(const ModalityScores& a, const ModalityScores& b)
{
    std::unordered_map<std::string, std::size_t> in_b;
    for (std::size_t i = 0; i < b.sample_ids.size(); ++i) in_b.emplace(b.sample_ids[i], i);
    ModalityScores ra, rb;
    ra.threshold = a.threshold;
    rb.threshold = b.threshold;
    for (std::size_t i = 0; i < a.sample_ids.size(); ++i) {
        auto it = in_b.find(a.sample_ids[i]);
        if (it == in_b.end()) continue;
        const std::size_t j = it->second;
        if (a.labels[i] != b.labels[j]) throw FusionError("conflicting labels for sample '" + a.sample_ids[i] + "'");
        ra.sample_ids.push_back(a.sample_ids[i]);
        ra.labels.push_back(a.labels[i]);
        ra.probability.push_back(a.probability[i]);
        rb.sample_ids.push_back(b.sample_ids[j]);
        rb.labels.push_back(b.labels[j]);
        rb.probability.push_back(b.probability[j]);
    }
    return {std::move(ra), std::move(rb)};
}

FusedScores fuse_modalities(const ModalityScores& a, const ModalityScores& b, FusionRule rule)
{
    if (a.sample_ids != b.sample_ids) throw FusionError("modality score sets are not aligned");
    if (a.probability.size() != a.sample_ids.size() || b.probability.size() != b.sample_ids.size()) {
        throw FusionError("score and id counts differ");
    }
    FusedScores out;
    out.rule = rule;
    out.sample_ids = a.sample_ids;
    out.labels = a.labels;
    out.p_a = a.probability;
    out.p_b = b.probability;
    out.fused_threshold = fuse_pair(std::clamp(a.threshold, 0.0, 1.0), std::clamp(b.threshold, 0.0, 1.0), rule);
    out.fused_probability.reserve(a.probability.size());
    for (std::size_t i = 0; i < a.probability.size(); ++i) {
        out.fused_probability.push_back(fuse_pair(a.probability[i], b.probability[i], rule));
    }
    return out;
}

void write_fused_csv(std::ostream& out, const FusedScores& fused)
{
    csv::write_version_line(out, "fused " + std::string(rule_name(fused.rule)));
    csv::Writer w(out);
    w.row({"sample_id", "p_a", "p_b", "fused_p", "fused_threshold", "prediction"});
    const std::string thr = csv::format_exact(fused.fused_threshold);
    for (std::size_t i = 0; i < fused.sample_ids.size(); ++i) {
        w.row({fused.sample_ids[i], csv::format_exact(fused.p_a[i]), csv::format_exact(fused.p_b[i]),
               csv::format_exact(fused.fused_probability[i]), thr,
               std::string(label_name(fused.predicted_positive(i) ? ClassLabel::Malignant : ClassLabel::Benign))});
    }
}

}  // namespace latefusion
