#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "latefusion/table.hpp"

namespace latefusion {

struct ShapiroWilk {
    double w = 0.0;
    double p = 0.0;
};

/// Royston's AS R94 algorithm: polynomial approximations to the coefficients
/// and a log-normal transform of 1 - W for the p-value. Valid for 3 <= n <= 5000.
/// Throws StatsError for n < 3, n > 5000 or a constant sample.
ShapiroWilk shapiro_wilk(std::span<const double> sample);

/// Upper-half weights a_1..a_{n/2}; the full antisymmetric vector has unit norm.
std::vector<double> shapiro_wilk_coefficients(std::size_t n);

struct MannWhitney {
    double u = 0.0;  // U of the first sample: pairs with a > b, ties counted as 1/2
    double p_two_sided = 1.0;
    bool exact = false;
};

/// Exact null distribution when n_a + n_b <= 12 and no ties. Otherwise a
/// normal approximation with tie-corrected variance, a 0.5 continuity
/// correction and a Cornish-Fisher skewness/kurtosis adjustment built from the
/// exact permutation cumulants of the midrank sum.
MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b);

/// Two-sided exact p for a tie-free U statistic, by counting arrangements.
double mann_whitney_exact_p(std::size_t n_a, std::size_t n_b, double u);

/// Permutation cumulants (variance, third, fourth) of the rank sum of `m`
/// items drawn without replacement from `ranks`.
struct RankSumCumulants {
    double variance = 0.0;
    double k3 = 0.0;
    double k4 = 0.0;
};
RankSumCumulants rank_sum_cumulants(std::span<const double> ranks, std::size_t m);

/// rg = 2 U / (n_m n_b) - 1 with `malignant` first: positive when the
/// malignant group tends to be higher.
double rank_biserial(std::span<const double> malignant, std::span<const double> benign);

/// Benjamini-Hochberg step-up adjustment, returned in input order.
std::vector<double> bh_fdr(std::span<const double> p);

struct UnivariateResult {
    std::string feature;
    double normality_p_benign = 0.0;     // NaN when the test could not run
    double normality_p_malignant = 0.0;  // NaN when the test could not run
    double rg = 0.0;
    double p_value = 1.0;
    double fdr = 1.0;
    std::string flag;  // non-empty when some test failed for this feature
};

struct ScreenReport {
    std::vector<UnivariateResult> rows;  // input feature order
    double alpha = 0.05;
    std::size_t significant = 0;
    std::size_t up = 0;    // significant with rg > 0
    std::size_t down = 0;  // significant with rg < 0
};

/// Per feature: Shapiro-Wilk per class, Mann-Whitney malignant vs benign,
/// rank-biserial effect size, then BH over every feature with a valid p.
/// Missing cells are ignored per feature. Throws StatsError when a class is absent.
ScreenReport univariate_screen(const FeatureTable& table, double alpha = 0.05, unsigned workers = 1);

/// CSV with columns feature, normality_benign_p, normality_malignant_p, rg, p_value, fdr.
void write_screen_csv(std::ostream& out, const ScreenReport& report);

}  // namespace latefusion
