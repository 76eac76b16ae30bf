#include "latefusion/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "latefusion/error.hpp"
#include "latefusion/parallel.hpp"

namespace latefusion {

double quantile_type7(std::span<const double> sorted, double q)
{
    if (sorted.empty()) throw PreprocessError("quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double median(std::vector<double> values)
{
    std::sort(values.begin(), values.end());
    return quantile_type7(values, 0.5);
}

const ScaledFeature* RobustScaler::find(const std::string& name) const
{
    for (const auto& f : features) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

namespace {

RobustScaler fit_rows(const FeatureTable& table, ClassLabel reference, const std::vector<std::size_t>& rows,
                      const std::string& cohort)
{
    RobustScaler scaler;
    scaler.cohort = cohort;
    scaler.reference = std::string(label_name(reference)) + (cohort.empty() ? "" : " within cohort " + cohort);
    for (std::size_t c = 0; c < table.cols(); ++c) {
        std::vector<double> vals;
        for (auto r : rows) {
            if (!table.is_missing(r, c)) vals.push_back(table.value(r, c));
        }
        ScaledFeature f;
        f.name = table.feature_names()[c];
        if (vals.size() >= 2) {
            std::sort(vals.begin(), vals.end());
            f.median = quantile_type7(vals, 0.5);
            f.iqr = quantile_type7(vals, 0.75) - quantile_type7(vals, 0.25);
            f.usable = f.iqr > 0.0;
        }
        scaler.features.push_back(f);
    }
    return scaler;
}

}  // namespace

std::vector<RobustScaler> fit_robust_scaler(const FeatureTable& table, ClassLabel reference, bool per_cohort)
{
    std::vector<std::string> cohorts;
    if (per_cohort) {
        for (const auto& c : table.cohort()) {
            if (std::find(cohorts.begin(), cohorts.end(), c) == cohorts.end()) cohorts.push_back(c);
        }
    } else {
        cohorts.emplace_back();
    }

    std::vector<RobustScaler> out;
    for (const auto& cohort : cohorts) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < table.rows(); ++r) {
            if (table.labels()[r] != reference) continue;
            if (per_cohort && table.cohort()[r] != cohort) continue;
            rows.push_back(r);
        }
        if (rows.size() < 2) {
            throw PreprocessError("robust scaler needs at least 2 " + std::string(label_name(reference)) +
                                  " rows" + (per_cohort ? " in cohort '" + cohort + "'" : std::string{}) + ", found " +
                                  std::to_string(rows.size()));
        }
        out.push_back(fit_rows(table, reference, rows, per_cohort ? cohort : std::string{}));
    }
    return out;
}

FeatureTable apply_scaler(const RobustScaler& scaler, const FeatureTable& table)
{
    RobustScaler global = scaler;
    global.cohort.clear();
    return apply_scalers(std::span<const RobustScaler>(&global, 1), table);
}

FeatureTable apply_scalers(std::span<const RobustScaler> scalers, const FeatureTable& table)
{
    if (scalers.empty()) throw PreprocessError("no scaler supplied");

    std::vector<std::size_t> scaler_of_row(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        std::size_t found = scalers.size();
        for (std::size_t s = 0; s < scalers.size(); ++s) {
            if (scalers[s].cohort.empty() || scalers[s].cohort == table.cohort()[r]) {
                found = s;
                break;
            }
        }
        if (found == scalers.size()) {
            throw PreprocessError("no scaler for cohort '" + table.cohort()[r] + "'");
        }
        scaler_of_row[r] = found;
    }

    std::vector<std::string> kept;
    std::vector<std::vector<const ScaledFeature*>> params;  // [kept feature][scaler]
    for (const auto& name : table.feature_names()) {
        std::vector<const ScaledFeature*> per(scalers.size());
        bool usable = true;
        for (std::size_t s = 0; s < scalers.size(); ++s) {
            per[s] = scalers[s].find(name);
            if (!per[s]) throw PreprocessError("feature '" + name + "' is not covered by the scaler");
            usable = usable && per[s]->usable;
        }
        if (!usable) {
            warn("feature '" + name + "' has zero IQR in the reference rows; excluded from scaled output");
            continue;
        }
        kept.push_back(name);
        params.push_back(std::move(per));
    }

    const FeatureTable subset = table.select_features(kept);
    const std::size_t n = subset.rows();
    std::vector<double> vals(n * kept.size());
    std::vector<std::uint8_t> miss(subset.any_missing() ? vals.size() : 0);
    for (std::size_t c = 0; c < kept.size(); ++c) {
        for (std::size_t r = 0; r < n; ++r) {
            const ScaledFeature& f = *params[c][scaler_of_row[r]];
            if (subset.is_missing(r, c)) {
                miss[c * n + r] = 1;
                continue;
            }
            vals[c * n + r] = (subset.value(r, c) - f.median) / f.iqr;
        }
    }
    return FeatureTable(subset.sample_ids(), subset.cohort(), subset.labels(), kept, std::move(vals),
                        std::move(miss), subset.patient_ids());
}

MissingnessResult filter_missingness(const FeatureTable& table, double max_missing_fraction)
{
    if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0)) {
        throw PreprocessError("max_missing_fraction must lie in [0, 1]");
    }
    MissingnessResult result;
    std::vector<std::string> kept;
    const double n = static_cast<double>(table.rows());
    for (std::size_t c = 0; c < table.cols(); ++c) {
        const auto miss = table.missing_count(c);
        const double fraction = table.rows() ? static_cast<double>(miss) / n : 0.0;
        const auto& name = table.feature_names()[c];
        if (fraction > max_missing_fraction || miss == table.rows()) {
            result.dropped.push_back(name);
            continue;
        }
        kept.push_back(name);
        result.imputation_medians[name] = median(table.observed(c));
    }
    if (kept.empty()) throw PreprocessError("missingness filter dropped every feature");
    result.table = impute_medians(table.select_features(kept), result.imputation_medians);
    return result;
}

FeatureTable impute_medians(const FeatureTable& table, const std::map<std::string, double>& medians)
{
    if (!table.any_missing()) return table;
    const std::size_t n = table.rows();
    std::vector<double> vals = table.raw_values();
    for (std::size_t c = 0; c < table.cols(); ++c) {
        if (table.missing_count(c) == 0) continue;
        auto it = medians.find(table.feature_names()[c]);
        if (it == medians.end()) {
            throw PreprocessError("no imputation median for feature '" + table.feature_names()[c] + "'");
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (table.is_missing(r, c)) vals[c * n + r] = it->second;
        }
    }
    return FeatureTable(table.sample_ids(), table.cohort(), table.labels(), table.feature_names(), std::move(vals),
                        {}, table.patient_ids());
}

std::vector<double> midranks(std::span<const double> values)
{
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
        i = j;
    }
    return ranks;
}

namespace {

double pearson(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw PreprocessError("spearman: length mismatch");
    if (x.size() < 3) return std::numeric_limits<double>::quiet_NaN();
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    return pearson(rx, ry);
}

CorrelationMatrix spearman_matrix(const FeatureTable& table, unsigned workers)
{
    const std::size_t p = table.cols();
    const std::size_t n = table.rows();
    CorrelationMatrix m;
    m.feature_names = table.feature_names();
    m.rho.assign(p * p, 0.0);
    m.undefined.assign(p * p, 0);

    // Columns without gaps share one rank vector; pairs touching a gappy
    // column are re-ranked over their complete rows.
    std::vector<std::vector<double>> ranks(p);
    for (std::size_t c = 0; c < p; ++c) {
        if (table.missing_count(c) == 0) ranks[c] = midranks(table.column(c));
    }

    parallel_for(p, workers, [&](std::size_t i) {
        m.rho[i * p + i] = 1.0;
        for (std::size_t j = i + 1; j < p; ++j) {
            double r;
            if (!ranks[i].empty() && !ranks[j].empty()) {
                r = n >= 3 ? pearson(ranks[i], ranks[j]) : std::numeric_limits<double>::quiet_NaN();
            } else {
                std::vector<double> x, y;
                for (std::size_t k = 0; k < n; ++k) {
                    if (table.is_missing(k, i) || table.is_missing(k, j)) continue;
                    x.push_back(table.value(k, i));
                    y.push_back(table.value(k, j));
                }
                r = spearman(x, y);
            }
            if (std::isnan(r)) {
                m.undefined[i * p + j] = m.undefined[j * p + i] = 1;
                r = 0.0;
            }
            m.rho[i * p + j] = m.rho[j * p + i] = r;
        }
    });
    return m;
}

PruneResult drop_correlated(const FeatureTable& table, const CorrelationMatrix& matrix, double threshold)
{
    if (!(threshold > 0.0 && threshold <= 1.0)) throw PreprocessError("correlation threshold must lie in (0, 1]");

    // Work over the matrix entries of the table's features.
    std::vector<std::size_t> idx;
    for (const auto& name : table.feature_names()) {
        auto it = std::find(matrix.feature_names.begin(), matrix.feature_names.end(), name);
        if (it == matrix.feature_names.end()) throw PreprocessError("feature '" + name + "' missing from correlation matrix");
        idx.push_back(static_cast<std::size_t>(it - matrix.feature_names.begin()));
    }
    const std::size_t p = idx.size();
    auto absrho = [&](std::size_t a, std::size_t b) { return std::fabs(matrix.at(idx[a], idx[b])); };
    const auto& names = table.feature_names();

    std::vector<std::uint8_t> alive(p, 1);
    PruneResult result;
    for (;;) {
        std::size_t best_a = p, best_b = p;
        double worst = -1.0;
        for (std::size_t a = 0; a < p; ++a) {
            if (!alive[a]) continue;
            for (std::size_t b = a + 1; b < p; ++b) {
                if (!alive[b]) continue;
                const double r = absrho(a, b);
                if (r < threshold) continue;
                bool better = r > worst;
                if (!better && r == worst) {
                    auto key = [&](std::size_t x, std::size_t y) {
                        return std::minmax(names[x], names[y]);
                    };
                    better = key(a, b) < key(best_a, best_b);
                }
                if (better) {
                    worst = r;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        if (best_a == p) break;

        auto mean_abs = [&](std::size_t a) {
            double s = 0.0;
            std::size_t k = 0;
            for (std::size_t b = 0; b < p; ++b) {
                if (b == a || !alive[b]) continue;
                s += absrho(a, b);
                ++k;
            }
            return k ? s / static_cast<double>(k) : 0.0;
        };
        const double ma = mean_abs(best_a), mb = mean_abs(best_b);
        std::size_t victim;
        if (ma != mb) {
            victim = ma > mb ? best_a : best_b;
        } else {
            victim = names[best_a] > names[best_b] ? best_a : best_b;
        }
        alive[victim] = 0;
        result.removed.push_back(names[victim]);
    }
    result.table = table.drop_features(result.removed);
    return result;
}

}  // namespace latefusion
