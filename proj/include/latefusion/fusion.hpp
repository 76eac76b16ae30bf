#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "latefusion/table.hpp"

namespace latefusion {

enum class FusionRule { Stouffer, Mean, Max, Product };

inline constexpr std::array<FusionRule, 4> kAllFusionRules{FusionRule::Stouffer, FusionRule::Mean, FusionRule::Max,
                                                           FusionRule::Product};

std::string_view rule_name(FusionRule rule) noexcept;
FusionRule parse_rule(std::string_view text);  // case-insensitive; throws FusionError

inline constexpr double kStoufferClip = 1e-12;

/// Stouffer: Phi((Phi^-1(p1) + Phi^-1(p2)) / sqrt 2) on inputs clipped into
/// [1e-12, 1 - 1e-12], result clipped the same way. Throws FusionError for inputs outside [0, 1] or NaN.
double fuse_pair(double p1, double p2, FusionRule rule);

/// Per-sample probabilities of one modality with the threshold estimated for it.
struct ModalityScores {
    std::vector<std::string> sample_ids;
    std::vector<ClassLabel> labels;
    std::vector<double> probability;
    double threshold = 0.5;
};

struct FusedScores {
    FusionRule rule = FusionRule::Stouffer;
    std::vector<std::string> sample_ids;
    std::vector<ClassLabel> labels;
    std::vector<double> p_a;
    std::vector<double> p_b;
    std::vector<double> fused_probability;
    double fused_threshold = 0.5;

    bool predicted_positive(std::size_t i) const { return fused_probability[i] >= fused_threshold; }
};

/// Restricts both score sets to shared sample ids in the order of `a`.
/// Throws FusionError on conflicting labels.
std::pair<ModalityScores, ModalityScores> align_scores(const ModalityScores& a, const ModalityScores& b);

/// Fuses aligned score sets; thresholds are clipped into [0, 1] first (a
/// threshold above every probability stays above every fused probability).
/// Throws FusionError when the id sequences differ.
FusedScores fuse_modalities(const ModalityScores& a, const ModalityScores& b, FusionRule rule);

void write_fused_csv(std::ostream& out, const FusedScores& fused);

}  // namespace latefusion
