// Acceptance checks. Prints one "[PASS]" or "[FAIL]" line per criterion and
// exits nonzero when any selected criterion fails.
//
//   acceptance                 run every criterion
//   acceptance --criterion N   run criterion N only

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "latefusion/config.hpp"
#include "latefusion/error.hpp"
#include "latefusion/forest.hpp"
#include "latefusion/fusion.hpp"
#include "latefusion/logreg.hpp"
#include "latefusion/metrics.hpp"
#include "latefusion/mrcv.hpp"
#include "latefusion/pipeline.hpp"
#include "latefusion/rng.hpp"
#include "latefusion/synth.hpp"
#include "latefusion/univariate.hpp"

using namespace latefusion;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Reference metric rows admit an integer confusion matrix and the library
//    reproduces the two-decimal values from it.

Outcome reference_rows()
{
    using fixtures::ReferenceRow;
    // sensitivity, specificity, PPV, NPV, F1, balanced accuracy
    const std::vector<ReferenceRow> rows{
        {"test 20/20 radiomics LR", 20, 20, {0.60, 0.85, 0.80, 0.68, 0.69, 0.73}},
        {"test 20/20 radiomics RF", 20, 20, {0.70, 0.70, 0.70, 0.70, 0.70, 0.70}},
        {"test 20/20 metabolomics LR", 20, 20, {0.55, 0.55, 0.55, 0.55, 0.55, 0.55}},
        {"test 20/20 metabolomics RF", 20, 20, {0.70, 0.55, 0.61, 0.65, 0.65, 0.63}},
        {"test 20/20 stouffer LR", 20, 20, {0.70, 0.80, 0.78, 0.73, 0.74, 0.75}},
        {"test 20/20 stouffer RF", 20, 20, {0.75, 0.60, 0.65, 0.71, 0.70, 0.68}},
        {"test 20/20 product LR", 20, 20, {0.78, 0.73, 0.70, 0.80, 0.74, 0.75}},
        {"test 20/20 product RF", 20, 20, {0.63, 0.69, 0.75, 0.55, 0.68, 0.66}},
        {"radiomics train LR 440/4569", 440, 4569, {0.78, 0.78, 0.25, 0.97, 0.38, 0.78}},
        {"radiomics train RF 440/4569", 440, 4569, {0.67, 0.82, 0.27, 0.96, 0.38, 0.74}},
        {"radiomics test LR 49/122", 49, 122, {0.69, 0.74, 0.51, 0.86, 0.59, 0.72}},
        {"radiomics test RF 49/122", 49, 122, {0.69, 0.68, 0.47, 0.85, 0.56, 0.69}},
        {"metabolomics train LR 103/103", 103, 103, {0.76, 0.74, 0.74, 0.75, 0.75, 0.75}},
        {"metabolomics train RF 103/103", 103, 103, {0.61, 0.66, 0.64, 0.62, 0.62, 0.63}},
        {"metabolomics test LR 20/20", 20, 20, {0.55, 0.55, 0.55, 0.55, 0.55, 0.55}},
        {"metabolomics test RF 20/20", 20, 20, {0.70, 0.55, 0.61, 0.65, 0.65, 0.63}},
    };
    const double tol = 0.005 + 1e-9;
    std::vector<std::string> failed;
    std::size_t reproduced = 0;
    for (const auto& row : rows) {
        const auto candidates = fixtures::admissible_confusions(row, tol);
        bool ok = false;
        for (const auto& c : candidates) {
            const auto m = metrics_from_confusion(Confusion{c.tp, c.fp, c.tn, c.fn});
            if (!m.ppv || !m.npv) continue;
            const double got[6]{m.sensitivity, m.specificity, *m.ppv, *m.npv, m.f1, m.balanced_accuracy};
            bool all = true;
            for (int k = 0; k < 6; ++k) all = all && std::fabs(got[k] - row.values[k]) <= tol;
            ok = ok || all;
        }
        if (ok) ++reproduced;
        else failed.push_back(row.label);
    }

    // Worked example: 12/8/17/3 at 20/20.
    const auto ex = metrics_from_confusion(Confusion{12, 3, 17, 8});
    const bool example = std::fabs(ex.sensitivity - 0.60) <= tol && std::fabs(ex.specificity - 0.85) <= tol &&
                         std::fabs(*ex.ppv - 0.80) <= tol && std::fabs(*ex.npv - 0.68) <= tol &&
                         std::fabs(ex.f1 - 0.69) <= tol && std::fabs(ex.balanced_accuracy - 0.73) <= tol;

    std::string detail = std::to_string(reproduced) + "/" + std::to_string(rows.size()) + " rows reproduced";
    detail += example ? ", 12/8/17/3 example ok" : ", 12/8/17/3 example WRONG";
    if (!failed.empty()) {
        detail += "; no integer confusion matrix for:";
        for (const auto& f : failed) detail += " [" + f + "]";
    }
    return {failed.empty() && example, detail};
}

// ---------------------------------------------------------------------------
// 2. Mann-Whitney exact path against enumeration; normal path against exact.

std::vector<double> tie_free_group_with_u(std::size_t u)
{
    // Ranks 1..16; the first group starts at {1..8} (U = 0) and each bump of
    // one member to the next free rank raises U by one.
    std::vector<int> a{1, 2, 3, 4, 5, 6, 7, 8};
    for (std::size_t step = 0; step < u; ++step) {
        for (std::size_t k = a.size(); k-- > 0;) {
            const int next = a[k] + 1;
            if (next <= 16 && std::find(a.begin(), a.end(), next) == a.end()) {
                a[k] = next;
                break;
            }
        }
    }
    return {a.begin(), a.end()};
}

Outcome mann_whitney_oracle()
{
    Rng rng(20240611);
    std::size_t exact_mismatch = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t na = 1 + rng.index(9);
        const std::size_t nb = 1 + rng.index(10 - na);
        std::vector<double> pool(na + nb);
        std::iota(pool.begin(), pool.end(), 1.0);
        rng.shuffle(std::span<double>(pool));
        for (auto& v : pool) v = v * 0.37 + rng.uniform() * 0.01;  // distinct, irregular spacing
        const std::vector<double> a(pool.begin(), pool.begin() + na), b(pool.begin() + na, pool.end());
        const auto r = mann_whitney(a, b);
        if (!r.exact || std::fabs(r.p_two_sided - fixtures::mann_whitney_enumerated_p(a, b)) > 1e-12) ++exact_mismatch;
    }

    double worst = 0;
    std::size_t worst_u = 0;
    for (std::size_t u = 0; u <= 64; ++u) {
        const auto a_ranks = tie_free_group_with_u(u);
        std::vector<double> b;
        for (int r = 1; r <= 16; ++r) {
            if (std::find(a_ranks.begin(), a_ranks.end(), double(r)) == a_ranks.end()) b.push_back(r);
        }
        // a holds the larger ranks when u is large: U counts pairs a > b.
        const auto r = mann_whitney(a_ranks, b);
        const double exact = mann_whitney_exact_p(8, 8, r.u);
        const double d = std::fabs(r.p_two_sided - exact);
        if (r.u != static_cast<double>(u) || r.exact) return {false, "8-vs-8 family did not take the normal path at U=" + std::to_string(u)};
        if (d > worst) {
            worst = d;
            worst_u = u;
        }
    }
    const bool ok = exact_mismatch == 0 && worst <= 0.005;
    return {ok, std::to_string(1000 - exact_mismatch) + "/1000 exact p equal to enumeration; 8-vs-8 max |dp| = " +
                    fmt("%.5f", worst) + " at U=" + std::to_string(worst_u)};
}

// ---------------------------------------------------------------------------
// 3. AUC equals normalized U, ties included.

Outcome auc_u_identity()
{
    Rng rng(3);
    double worst = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 4 + rng.index(60);
        std::vector<double> scores(n);
        std::vector<ClassLabel> labels(n);
        std::vector<double> pos, neg;
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = i < 2 ? ClassLabel(i) : ClassLabel(rng.index(2));
            scores[i] = std::round(rng.uniform() * (rep % 2 ? 6 : 1e6)) + (labels[i] == ClassLabel::Malignant);
            (labels[i] == ClassLabel::Malignant ? pos : neg).push_back(scores[i]);
        }
        const double u = mann_whitney(pos, neg).u / (pos.size() * neg.size());
        worst = std::max(worst, std::fabs(auc(scores, labels) - u));
    }
    return {worst <= 1e-12, "max |auc - U/(n_pos n_neg)| = " + fmt("%.3g", worst) + " over 200 instances"};
}

// ---------------------------------------------------------------------------
// 4. Benjamini-Hochberg against a step-up reference.

std::vector<double> step_up_reference(const std::vector<double>& p)
{
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
    std::vector<double> out(m);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        running = std::min(running, p[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1));
        out[order[k]] = running;
    }
    return out;
}

Outcome bh_reference()
{
    Rng rng(4);
    std::size_t mismatched = 0, not_invariant = 0;
    for (int rep = 0; rep < 500; ++rep) {
        std::vector<double> p(1 + rng.index(60));
        for (auto& v : p) v = rep % 3 == 0 ? std::ceil(rng.uniform() * 20) / 20 : 1.0 - rng.uniform();
        const auto adj = bh_fdr(p);
        if (adj != step_up_reference(p)) ++mismatched;
        std::vector<std::size_t> perm(p.size());
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(std::span<std::size_t>(perm));
        std::vector<double> q(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) q[i] = p[perm[i]];
        const auto adj_q = bh_fdr(q);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (adj_q[i] != adj[perm[i]]) {
                ++not_invariant;
                break;
            }
        }
    }
    return {mismatched == 0 && not_invariant == 0,
            std::to_string(500 - mismatched) + "/500 exact matches, " + std::to_string(not_invariant) +
                " permutation failures"};
}

// ---------------------------------------------------------------------------
// 5. Threshold optimizer against every cut.

Outcome threshold_sweep()
{
    Rng rng(5);
    std::size_t disagreements = 0;
    double lowest = 1.0;
    for (int rep = 0; rep < 500; ++rep) {
        const std::size_t n = 2 + rng.index(50);
        std::vector<double> scores(n);
        std::vector<ClassLabel> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = i < 2 ? ClassLabel(i) : ClassLabel(rng.index(2));
            scores[i] = rng.uniform() + 0.3 * (labels[i] == ClassLabel::Malignant);
            if (rep % 2) scores[i] = std::round(scores[i] * 4) / 4;
        }
        const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), ClassLabel::Malignant));
        const double neg = static_cast<double>(n) - pos;
        std::vector<double> order = scores;
        std::sort(order.begin(), order.end());
        order.push_back(std::numeric_limits<double>::infinity());
        double best = 0;
        for (double cut : order) {
            double tp = 0, tn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool called = scores[i] >= cut;
                if (labels[i] == ClassLabel::Malignant) tp += called;
                else tn += !called;
            }
            best = std::max(best, (tp / pos + tn / neg) / 2);
        }
        const auto r = best_threshold_bacc(scores, labels);
        if (std::fabs(r.balanced_accuracy - best) > 1e-12) ++disagreements;
        lowest = std::min(lowest, r.balanced_accuracy);
    }
    return {disagreements == 0 && lowest >= 0.5,
            std::to_string(500 - disagreements) + "/500 agree with the exhaustive sweep, min bacc " + fmt("%.4f", lowest)};
}

// ---------------------------------------------------------------------------
// 6. Logistic regression closed form, gradient and recovery.

Outcome logistic_checks()
{
    double bic_err = 0;
    for (std::size_t n : {10u, 100u, 1000u, 4000u}) {
        std::vector<ClassLabel> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = ClassLabel(i % 2);
        const auto t = fixtures::make_table({std::vector<double>(n, 0.0)}, labels);
        const auto m = fit_logistic(t, {});
        const double expected = std::log(double(n)) - 2.0 * n * std::log(0.5);
        bic_err = std::max(bic_err, std::fabs(m.bic - expected));
    }

    const auto t = fixtures::logistic_table(606, 800, -0.2, {0.9, -0.6, 0.3});
    const std::vector<std::string> f{"x000", "x001", "x002"};
    const auto m = fit_logistic(t, f);
    std::vector<double> beta{m.coefficient("x000"), m.coefficient("x001"), m.coefficient("x002")};
    double grad_rel = 0;
    // At the optimum the gradient is ~0, so relative agreement is checked at
    // offsets from it along with the absolute size at the fit itself.
    const auto at_fit = logistic_gradient(t, f, m.intercept, beta);
    double at_fit_max = 0;
    for (double g : at_fit) at_fit_max = std::max(at_fit_max, std::fabs(g));
    for (double offset : {0.05, -0.2, 0.5}) {
        const double b0 = m.intercept + offset;
        std::vector<double> b = beta;
        for (auto& v : b) v -= offset;
        const auto g = logistic_gradient(t, f, b0, b);
        const double h = 1e-5;
        for (std::size_t k = 0; k <= b.size(); ++k) {
            double i_up = b0, i_dn = b0;
            auto up = b, dn = b;
            if (k == 0) {
                i_up += h;
                i_dn -= h;
            } else {
                up[k - 1] += h;
                dn[k - 1] -= h;
            }
            const double fd = (logistic_log_likelihood(t, f, i_up, up) - logistic_log_likelihood(t, f, i_dn, dn)) / (2 * h);
            grad_rel = std::max(grad_rel, std::fabs(g[k] - fd) / std::max(std::fabs(fd), 1e-300));
        }
    }

    const auto big = fixtures::logistic_table(5000, 5000, 0.0, {1.5, -2.0});
    const auto fit = fit_logistic(big, std::vector<std::string>{"x000", "x001"});
    const double rec = std::max(std::fabs(fit.coefficient("x000") - 1.5), std::fabs(fit.coefficient("x001") + 2.0));

    const bool ok = bic_err <= 1e-9 && grad_rel <= 1e-5 && at_fit_max <= 1e-6 && rec <= 0.1;
    return {ok, "intercept-only BIC err " + fmt("%.2g", bic_err) + ", gradient vs finite difference rel err " +
                    fmt("%.2g", grad_rel) + " (|grad| at fit " + fmt("%.2g", at_fit_max) +
                    "), max coefficient error at n=5000 " + fmt("%.3f", rec)};
}

// ---------------------------------------------------------------------------
// 7. Forward selection under the BIC stop rule.

Outcome forward_selection()
{
    std::size_t planted_first = 0, empty_null = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthSpec s;
        s.n_benign = 100;
        s.n_malignant = 100;
        s.n_features = 20;
        s.seed = derive_seed(0x7e1ec7, seed);
        s.planted.push_back({seed % 20, 1.0});
        const auto planted = generate(s);
        const auto m = forward_select(planted, planted.feature_names(), 2.0);
        if (!m.selected_order.empty() && m.selected_order.front() == planted.feature_names()[seed % 20]) ++planted_first;

        s.planted.clear();
        s.seed = derive_seed(0x0dd, seed);
        const auto null = generate(s);
        if (forward_select(null, null.feature_names(), 2.0).selected_order.empty()) ++empty_null;
    }
    return {planted_first >= 95 && empty_null >= 95,
            "planted feature first in " + std::to_string(planted_first) + "/100 seeds, empty selection on noise in " +
                std::to_string(empty_null) + "/100 seeds"};
}

// ---------------------------------------------------------------------------
// 8. Random forest determinism and permutation importance.

Outcome forest_checks()
{
    SynthSpec s;
    s.n_benign = 80;
    s.n_malignant = 80;
    s.n_features = 10;
    s.seed = 8;
    s.planted.push_back({2, 1.0});
    const auto small = generate(s);
    ForestParams p;
    p.ntree = 100;
    p.mtry = 3;
    p.seed = 88;
    bool identical = true;
    const std::string one = nlohmann::json(fit_forest(small, p, 1)).dump();
    for (unsigned w : {2u, 3u, 8u}) identical = identical && nlohmann::json(fit_forest(small, p, w)).dump() == one;

    const auto forest = fit_forest(small, p);
    bool identity_zero = true;
    const auto id_report =
        oob_permutation_importance(forest, small, 1, [](std::span<std::size_t>, std::size_t, std::size_t) {});
    for (const auto& fi : id_report.features) identity_zero = identity_zero && fi.mean_decrease == 0.0;

    std::size_t tops = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthSpec q;
        q.n_benign = 100;
        q.n_malignant = 100;
        q.n_features = 21;
        q.seed = derive_seed(0xf0e57, seed);
        q.planted.push_back({0, 1.0});
        const auto t = generate(q);
        ForestParams fp;
        fp.ntree = 500;
        fp.mtry = 5;
        fp.seed = derive_seed(0xf0e57, seed, 1);
        const auto report = oob_permutation_importance(fit_forest(t, fp), t);
        std::size_t best = 0;
        for (std::size_t k = 1; k < report.features.size(); ++k) {
            if (report.features[k].normalized > report.features[best].normalized) best = k;
        }
        tops += best == 0;
    }
    return {identical && identity_zero && tops >= 95,
            std::string(identical ? "bit-identical" : "DIFFERENT") + " forests for 1/2/3/8 workers, identity permutation " +
                (identity_zero ? "zero" : "NONZERO") + ", planted feature tops normalized importance in " +
                std::to_string(tops) + "/100 seeds"};
}

// ---------------------------------------------------------------------------
// 9. MRCV harness.

Outcome mrcv_checks()
{
    auto table = [](std::uint64_t seed, bool signal) {
        SynthSpec s;
        s.n_benign = 100;
        s.n_malignant = 100;
        s.n_features = 10;
        s.seed = seed;
        if (signal) {
            s.planted.push_back({0, 1.5});
            s.planted.push_back({1, 1.5});
        }
        return generate(s);
    };
    MrcvOptions opt;
    opt.repeats = 100;
    opt.base_seed = 909;
    auto mean_bacc = [](const std::vector<FoldOutcome>& o) {
        double s = 0;
        for (const auto& f : o) s += f.bacc_validation;
        return s / o.size();
    };
    const auto planted = table(91, true);
    const auto a = run_mrcv_lr(planted, planted.feature_names(), opt);
    const auto null = table(92, false);
    const auto n = run_mrcv_lr(null, null.feature_names(), opt);
    opt.workers = 3;
    const auto again = run_mrcv_lr(planted, planted.feature_names(), opt);
    std::ostringstream sa, sb;
    write_folds_csv(sa, a);
    write_folds_csv(sb, again);
    const double ma = mean_bacc(a), mn = mean_bacc(n);
    const bool ok = ma > 0.8 && mn >= 0.4 && mn <= 0.6 && sa.str() == sb.str();
    return {ok, "planted mean validation BAcc " + fmt("%.4f", ma) + ", null " + fmt("%.4f", mn) + ", rerun " +
                    (sa.str() == sb.str() ? "identical" : "DIFFERENT")};
}

// ---------------------------------------------------------------------------
// 10. Fusion rule properties and the complementary-modality gain.

double test_bacc_lr(const FeatureTable& train, const FeatureTable& test, std::vector<double>& test_p, double& threshold)
{
    const auto model = forward_select(train, train.feature_names(), 2.0);
    const auto train_p = predict_proba(model, train);
    threshold = best_threshold_bacc(train_p, train.labels()).threshold;
    test_p = predict_proba(model, test);
    return balanced_accuracy_at(test_p, test.labels(), threshold);
}

Outcome fusion_checks()
{
    bool grid_ok = true;
    for (int i = 0; i <= 100 && grid_ok; ++i) {
        for (int j = 0; j <= 100 && grid_ok; ++j) {
            const double a = i / 100.0, b = j / 100.0;
            for (auto rule : kAllFusionRules) {
                const double v = fuse_pair(a, b, rule);
                grid_ok = grid_ok && v == fuse_pair(b, a, rule);
                if (i > 0) grid_ok = grid_ok && v >= fuse_pair((i - 1) / 100.0, b, rule);
                if (j > 0) grid_ok = grid_ok && v >= fuse_pair(a, (j - 1) / 100.0, rule);
            }
            const double prod = fuse_pair(a, b, FusionRule::Product), mean = fuse_pair(a, b, FusionRule::Mean),
                         mx = fuse_pair(a, b, FusionRule::Max);
            grid_ok = grid_ok && prod <= std::min(a, b) && std::min(a, b) <= mean && mean <= mx;
        }
    }
    const double s95 = fuse_pair(0.95, 0.95, FusionRule::Stouffer);

    std::size_t wins = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthSpec a;
        a.n_benign = 150;
        a.n_malignant = 150;
        a.n_features = 10;
        a.seed = derive_seed(0xc0, seed);
        a.planted = {{0, 2.0}, {1, 2.0}};
        SynthSpec b = a;
        b.feature_prefix = "g";
        const auto pair = generate_pair(a, b, true);
        const auto split = stratified_split(pair.a, 0.3, derive_seed(0xc1, seed));
        const auto& test_ids = split.validation.sample_ids();
        std::vector<std::size_t> test_rows, train_rows;
        for (std::size_t r = 0; r < pair.b.rows(); ++r) {
            const bool in_test = std::find(test_ids.begin(), test_ids.end(), pair.b.sample_ids()[r]) != test_ids.end();
            (in_test ? test_rows : train_rows).push_back(r);
        }
        const auto b_train = pair.b.select_rows(train_rows), b_test = pair.b.select_rows(test_rows);

        ModalityScores sa, sb;
        const double bacc_a = test_bacc_lr(split.train, split.validation, sa.probability, sa.threshold);
        const double bacc_b = test_bacc_lr(b_train, b_test, sb.probability, sb.threshold);
        sa.sample_ids = split.validation.sample_ids();
        sa.labels = split.validation.labels();
        sb.sample_ids = b_test.sample_ids();
        sb.labels = b_test.labels();
        const auto [xa, xb] = align_scores(sa, sb);
        const auto fused = fuse_modalities(xa, xb, FusionRule::Stouffer);
        const double bacc_f = balanced_accuracy_at(fused.fused_probability, fused.labels, fused.fused_threshold);
        wins += bacc_f > bacc_a && bacc_f > bacc_b;
    }
    const bool ok = grid_ok && std::fabs(s95 - 0.99) <= 1e-4 && wins >= 80;
    return {ok, std::string("101x101 grid properties ") + (grid_ok ? "hold" : "VIOLATED") + ", stouffer(0.95,0.95) = " +
                    fmt("%.6f", s95) + ", fused BAcc beats both modalities in " + std::to_string(wins) + "/100 seeds"};
}

// ---------------------------------------------------------------------------
// 11. Two full pipeline runs from one config produce identical bytes.

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome end_to_end()
{
    const fs::path source = fs::path(LATEFUSION_SOURCE_DIR) / "configs" / "synthetic.toml";
    const fs::path root = fs::temp_directory_path() / ("latefusion-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::vector<fs::path> outputs;
    for (const char* run : {"first", "second"}) {
        const fs::path conf_dir = root / run / "configs";
        fs::create_directories(conf_dir);
        fs::copy_file(source, conf_dir / "synthetic.toml");
        const auto config = make_run_config(Config::load(conf_dir / "synthetic.toml"));
        run_all(config, true);
        outputs.push_back(config.output_dir);
    }
    std::size_t compared = 0, differing = 0;
    std::string first_diff;
    for (const auto& entry : fs::recursive_directory_iterator(outputs[0])) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext != ".csv" && ext != ".svg") continue;
        const auto rel = fs::relative(entry.path(), outputs[0]);
        ++compared;
        if (!fs::exists(outputs[1] / rel) || slurp(entry.path()) != slurp(outputs[1] / rel)) {
            ++differing;
            if (first_diff.empty()) first_diff = rel.string();
        }
    }
    std::size_t second_count = 0;
    for (const auto& entry : fs::recursive_directory_iterator(outputs[1])) {
        const auto ext = entry.path().extension();
        second_count += entry.is_regular_file() && (ext == ".csv" || ext == ".svg");
    }
    fs::remove_all(root);
    const bool ok = compared > 0 && differing == 0 && second_count == compared;
    std::string detail = std::to_string(compared - differing) + "/" + std::to_string(compared) +
                         " CSV/SVG files byte-identical across two runs";
    if (!first_diff.empty()) detail += " (first difference: " + first_diff + ")";
    return {ok, detail};
}

struct Criterion {
    const char* title;
    double budget_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> criteria{
        {"reference metric rows admit integer confusion matrices", 1, reference_rows},
        {"Mann-Whitney exact and approximate p against oracles", 30, mann_whitney_oracle},
        {"AUC equals normalized U", 30, auc_u_identity},
        {"BH adjustment matches step-up reference", 30, bh_reference},
        {"threshold optimizer matches exhaustive sweep", 30, threshold_sweep},
        {"logistic regression closed form, gradient, recovery", 60, logistic_checks},
        {"forward selection under the BIC stop rule", 60, forward_selection},
        {"random forest determinism and importance", 300, forest_checks},
        {"MRCV harness", 300, mrcv_checks},
        {"fusion rule properties and complementary gain", 300, fusion_checks},
        {"end-to-end byte-identical reruns", 600, end_to_end},
    };

    std::size_t only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::strtoul(argv[++i], nullptr, 10);
        } else {
            std::cerr << "usage: acceptance [--criterion N]\n";
            return 2;
        }
    }
    if (only > criteria.size()) {
        std::cerr << "no criterion " << only << "\n";
        return 2;
    }

    bool all_pass = true;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        if (only != 0 && only != k + 1) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > criteria[k].budget_seconds) {
            o.pass = false;
            o.detail += "; over time budget";
        }
        std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << (k + 1) << ": " << criteria[k].title << " -- "
                  << o.detail << " (" << fmt("%.2f", secs) << " s)" << std::endl;
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
