#include "latefusion/univariate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "latefusion/csv.hpp"
#include "latefusion/error.hpp"
#include "latefusion/normal.hpp"
#include "latefusion/parallel.hpp"
#include "latefusion/preprocess.hpp"

namespace latefusion {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <std::size_t N>
double poly(const double (&c)[N], double x)
{
    double r = c[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) r = r * x + c[i];
    return r;
}

// AS R94 constants.
constexpr double kC1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
constexpr double kC2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
constexpr double kC3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
constexpr double kC4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
constexpr double kC5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
constexpr double kC6[] = {-0.4803, -0.082676, 0.0030302};
constexpr double kG[] = {-2.273, 0.459};

void check_finite(std::span<const double> x, const char* what)
{
    for (double v : x) {
        if (!std::isfinite(v)) throw StatsError(std::string(what) + ": non-finite value");
    }
}

}  // namespace

std::vector<double> shapiro_wilk_coefficients(std::size_t n)
{
    if (n < 3) throw StatsError("Shapiro-Wilk needs n >= 3");
    const std::size_t half = n / 2;
    std::vector<double> a(half);
    if (n == 3) {
        a[0] = std::sqrt(0.5);
        return a;
    }
    const double an = static_cast<double>(n);
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        m[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
        summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(kC1, rsn) - m[0] / ssumm2;

    std::size_t first_plain;
    double fac;
    if (n > 5) {
        const double a2 = -m[1] / ssumm2 + poly(kC2, rsn);
        fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
        a[0] = a1;
        a[1] = a2;
        first_plain = 2;
    } else {
        fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
        a[0] = a1;
        first_plain = 1;
    }
    for (std::size_t i = first_plain; i < half; ++i) a[i] = -m[i] / fac;
    return a;
}

ShapiroWilk shapiro_wilk(std::span<const double> sample)
{
    const std::size_t n = sample.size();
    if (n < 3) throw StatsError("Shapiro-Wilk needs at least 3 observations");
    if (n > 5000) throw StatsError("Shapiro-Wilk approximation is valid up to n = 5000");
    check_finite(sample, "Shapiro-Wilk");

    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    if (!(range > 0.0)) throw StatsError("Shapiro-Wilk: zero variance sample");

    // Work on range-scaled data for conditioning; W is scale invariant.
    const double lo = x.front();
    double mean = 0.0;
    for (auto& v : x) v = (v - lo) / range;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);

    const auto a = shapiro_wilk_coefficients(n);
    double num = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) num += a[i] * (x[n - 1 - i] - x[i]);
    double w = std::min(1.0, num * num / ss);

    ShapiroWilk out;
    out.w = w;
    if (n == 3) {
        constexpr double pi6 = 1.90985931710274;   // 6 / pi
        constexpr double stqr = 1.04719755119660;  // pi / 3
        out.p = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
        return out;
    }

    const double an = static_cast<double>(n);
    double y = std::log1p(-w);
    double mu, sigma;
    if (n <= 11) {
        const double gamma = poly(kG, an);
        if (y >= gamma) {
            out.p = 1e-99;
            return out;
        }
        y = -std::log(gamma - y);
        mu = poly(kC3, an);
        sigma = std::exp(poly(kC4, an));
    } else {
        const double ln = std::log(an);
        mu = poly(kC5, ln);
        sigma = std::exp(poly(kC6, ln));
    }
    out.p = std::isinf(y) ? 1.0 : normal_sf((y - mu) / sigma);
    return out;
}

double mann_whitney_exact_p(std::size_t n_a, std::size_t n_b, double u)
{
    // counts[i][j] holds the U distribution for i items of a and j of b;
    // roll over i keeping one row.
    const std::size_t max_u = n_a * n_b;
    std::vector<std::vector<double>> prev(n_b + 1), cur(n_b + 1);
    for (std::size_t j = 0; j <= n_b; ++j) prev[j] = {1.0};
    for (std::size_t i = 1; i <= n_a; ++i) {
        cur[0] = {1.0};
        for (std::size_t j = 1; j <= n_b; ++j) {
            std::vector<double> d(i * j + 1, 0.0);
            for (std::size_t k = 0; k < prev[j].size(); ++k) d[k + j] += prev[j][k];  // largest item from a
            for (std::size_t k = 0; k < cur[j - 1].size(); ++k) d[k] += cur[j - 1][k];
            cur[j] = std::move(d);
        }
        std::swap(prev, cur);
    }
    const auto& dist = prev[n_b];
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const auto uu = static_cast<std::size_t>(std::llround(u));
    double le = 0.0, ge = 0.0;
    for (std::size_t k = 0; k <= max_u; ++k) {
        if (k <= uu) le += dist[k];
        if (k >= uu) ge += dist[k];
    }
    return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

RankSumCumulants rank_sum_cumulants(std::span<const double> ranks, std::size_t m)
{
    const std::size_t big_n = ranks.size();
    const double nn = static_cast<double>(big_n);
    const double mean = std::accumulate(ranks.begin(), ranks.end(), 0.0) / nn;
    double p2 = 0.0, p3 = 0.0, p4 = 0.0;
    for (double r : ranks) {
        const double y = r - mean;
        const double y2 = y * y;
        p2 += y2;
        p3 += y2 * y;
        p4 += y2 * y2;
    }
    // pi_k: probability that k given distinct items all land in the sample.
    auto inclusion = [&](int k) {
        double v = 1.0;
        for (int i = 0; i < k; ++i) {
            const double num = static_cast<double>(m) - i;
            const double den = nn - i;
            if (num <= 0.0 || den <= 0.0) return 0.0;
            v *= num / den;
        }
        return v;
    };
    const double pi1 = inclusion(1), pi2 = inclusion(2), pi3 = inclusion(3), pi4 = inclusion(4);

    RankSumCumulants c;
    c.variance = (pi1 - pi2) * p2;
    c.k3 = p3 * (pi1 - 3.0 * pi2 + 2.0 * pi3);
    const double m4 = pi1 * p4 - 4.0 * pi2 * p4 + 3.0 * pi2 * (p2 * p2 - p4) + 6.0 * pi3 * (2.0 * p4 - p2 * p2) +
                      pi4 * (3.0 * p2 * p2 - 6.0 * p4);
    c.k4 = m4 - 3.0 * c.variance * c.variance;
    return c;
}

MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty()) throw StatsError("Mann-Whitney needs two non-empty groups");
    check_finite(a, "Mann-Whitney");
    check_finite(b, "Mann-Whitney");

    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);

    double rank_sum = 0.0;
    for (std::size_t i = 0; i < na; ++i) rank_sum += ranks[i];
    MannWhitney out;
    out.u = rank_sum - 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);

    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    const bool ties = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();

    if (n <= 12 && !ties) {
        out.exact = true;
        out.p_two_sided = mann_whitney_exact_p(na, nb, out.u);
        return out;
    }

    const auto cum = rank_sum_cumulants(ranks, na);
    if (!(cum.variance > 0.0)) {
        out.p_two_sided = 1.0;
        return out;
    }
    const double mu = 0.5 * static_cast<double>(na) * static_cast<double>(nb);
    const double sd = std::sqrt(cum.variance);
    const double g1 = cum.k3 / (sd * sd * sd);
    const double g2 = cum.k4 / (cum.variance * cum.variance);

    // Cornish-Fisher normalizing transform of the standardized statistic; the
    // same order as the Edgeworth series but never leaves (0, 1).
    auto normalize = [&](double x) {
        return x - g1 / 6.0 * (x * x - 1.0) - g2 / 24.0 * (x * x * x - 3.0 * x) +
               g1 * g1 / 36.0 * (4.0 * x * x * x - 7.0 * x);
    };
    const double lower = normal_cdf(normalize((out.u + 0.5 - mu) / sd));
    const double upper = normal_sf(normalize((out.u - 0.5 - mu) / sd));
    out.p_two_sided = std::clamp(2.0 * std::min(lower, upper), std::numeric_limits<double>::min(), 1.0);
    return out;
}

double rank_biserial(std::span<const double> malignant, std::span<const double> benign)
{
    const auto mw = mann_whitney(malignant, benign);
    const double pairs = static_cast<double>(malignant.size()) * static_cast<double>(benign.size());
    return 2.0 * mw.u / pairs - 1.0;
}

std::vector<double> bh_fdr(std::span<const double> p)
{
    const std::size_t m = p.size();
    for (double v : p) {
        if (!(v > 0.0 && v <= 1.0)) throw StatsError("BH: p-values must lie in (0, 1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return p[x] < p[y]; });

    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        const std::size_t i = order[k];
        running = std::min(running, static_cast<double>(m) * p[i] / static_cast<double>(k + 1));
        adjusted[i] = running;
    }
    return adjusted;
}

ScreenReport univariate_screen(const FeatureTable& table, double alpha, unsigned workers)
{
    if (!table.has_both_classes()) throw StatsError("univariate screen needs both classes");

    ScreenReport report;
    report.alpha = alpha;
    report.rows.resize(table.cols());

    parallel_for(table.cols(), workers, [&](std::size_t c) {
        UnivariateResult& row = report.rows[c];
        row.feature = table.feature_names()[c];
        const auto benign = table.observed(c, ClassLabel::Benign);
        const auto malignant = table.observed(c, ClassLabel::Malignant);
        std::string flag;
        auto normality = [&](const std::vector<double>& x, const char* group) {
            try {
                return shapiro_wilk(x).p;
            } catch (const StatsError& e) {
                flag += std::string(flag.empty() ? "" : "; ") + group + " normality: " + e.what();
                return kNaN;
            }
        };
        row.normality_p_benign = normality(benign, "benign");
        row.normality_p_malignant = normality(malignant, "malignant");
        try {
            const auto mw = mann_whitney(malignant, benign);
            row.p_value = mw.p_two_sided;
            row.rg = 2.0 * mw.u / (static_cast<double>(malignant.size()) * static_cast<double>(benign.size())) - 1.0;
        } catch (const StatsError& e) {
            flag += std::string(flag.empty() ? "" : "; ") + "mann-whitney: " + e.what();
            row.p_value = kNaN;
            row.rg = kNaN;
        }
        row.flag = std::move(flag);
    });

    std::vector<double> valid_p;
    std::vector<std::size_t> valid_idx;
    for (std::size_t c = 0; c < report.rows.size(); ++c) {
        if (std::isnan(report.rows[c].p_value)) {
            report.rows[c].fdr = kNaN;
            continue;
        }
        valid_p.push_back(report.rows[c].p_value);
        valid_idx.push_back(c);
    }
    const auto adjusted = bh_fdr(valid_p);
    for (std::size_t k = 0; k < valid_idx.size(); ++k) {
        auto& row = report.rows[valid_idx[k]];
        row.fdr = adjusted[k];
        if (row.fdr < alpha) {
            ++report.significant;
            if (row.rg > 0.0) ++report.up;
            if (row.rg < 0.0) ++report.down;
        }
    }
    return report;
}

void write_screen_csv(std::ostream& out, const ScreenReport& report)
{
    csv::write_version_line(out, "univariate; rg > 0 means higher values in Malignant");
    csv::Writer w(out);
    w.row({"feature", "normality_benign_p", "normality_malignant_p", "rg", "p_value", "fdr"});
    for (const auto& r : report.rows) {
        w.row({r.feature, csv::format_g6(r.normality_p_benign), csv::format_g6(r.normality_p_malignant),
               csv::format_g6(r.rg), csv::format_g6(r.p_value), csv::format_g6(r.fdr)});
    }
}

}  // namespace latefusion
