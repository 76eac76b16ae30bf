#pragma once

// Independent reference computations and table builders shared by the unit
// and acceptance tests. Nothing here calls into the library's statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "latefusion/rng.hpp"
#include "latefusion/table.hpp"

namespace fixtures {

using latefusion::ClassLabel;
using latefusion::FeatureTable;

inline std::string name(const char* prefix, std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
    return buf;
}

/// Column-major values; names x000, x001, ...
inline FeatureTable make_table(const std::vector<std::vector<double>>& columns, const std::vector<ClassLabel>& labels)
{
    const std::size_t n = labels.size();
    std::vector<std::string> ids, cohort(n, "C"), features;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(name("s", i));
    std::vector<double> values;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        features.push_back(name("x", c));
        values.insert(values.end(), columns[c].begin(), columns[c].end());
    }
    return FeatureTable(ids, cohort, labels, features, values);
}

/// y ~ Bernoulli(sigmoid(intercept + beta . x)) with x iid standard normal.
inline FeatureTable logistic_table(std::uint64_t seed, std::size_t n, double intercept, const std::vector<double>& beta)
{
    latefusion::Rng rng(seed);
    std::vector<std::vector<double>> cols(beta.size(), std::vector<double>(n));
    std::vector<ClassLabel> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        double eta = intercept;
        for (std::size_t c = 0; c < beta.size(); ++c) {
            cols[c][i] = rng.normal();
            eta += beta[c] * cols[c][i];
        }
        labels[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? ClassLabel::Malignant : ClassLabel::Benign;
    }
    return make_table(cols, labels);
}

/// Two-sided Mann-Whitney p by listing every assignment of the pooled values
/// to the first group. Practical up to about 20 pooled values.
inline double mann_whitney_enumerated_p(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> pool = a;
    pool.insert(pool.end(), b.begin(), b.end());
    const std::size_t n = pool.size(), na = a.size();
    auto u_of = [&](std::uint32_t mask) {
        double u = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(mask >> i & 1u)) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (mask >> j & 1u) continue;
                u += pool[i] > pool[j] ? 1.0 : pool[i] == pool[j] ? 0.5 : 0.0;
            }
        }
        return u;
    };
    const double centre = static_cast<double>(na * (n - na)) / 2.0;
    const double observed = std::fabs(u_of((1u << na) - 1u) - centre);
    std::uint64_t extreme = 0, total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != na) continue;
        ++total;
        if (std::fabs(u_of(mask) - centre) >= observed - 1e-9) ++extreme;
    }
    return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(total));
}

/// Six two-decimal reference metrics: sensitivity, specificity, PPV, NPV, F1, BAcc.
struct ReferenceRow {
    std::string label;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    double values[6]{};
};

struct IntegerConfusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Every (tp, tn) at the given class sizes whose six derived ratios sit within
/// `tol` of the reference values. Computed directly from counts.
inline std::vector<IntegerConfusion> admissible_confusions(const ReferenceRow& row, double tol)
{
    std::vector<IntegerConfusion> out;
    const double P = static_cast<double>(row.positives), N = static_cast<double>(row.negatives);
    for (std::size_t tp = 0; tp <= row.positives; ++tp) {
        for (std::size_t tn = 0; tn <= row.negatives; ++tn) {
            const double fn = P - tp, fp = N - tn;
            if (tp + fp == 0 || tn + fn == 0) continue;
            const double sens = tp / P, spec = tn / N;
            const double derived[6]{sens, spec, tp / (tp + fp), tn / (tn + fn), 2.0 * tp / (2.0 * tp + fp + fn),
                                    (sens + spec) / 2};
            bool ok = true;
            for (int k = 0; k < 6 && ok; ++k) ok = std::fabs(derived[k] - row.values[k]) <= tol;
            if (ok) out.push_back({tp, static_cast<std::size_t>(fp), tn, static_cast<std::size_t>(fn)});
        }
    }
    return out;
}

}  // namespace fixtures
