#include "latefusion/mrcv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "latefusion/csv.hpp"
#include "latefusion/error.hpp"
#include "latefusion/logreg.hpp"
#include "latefusion/metrics.hpp"
#include "latefusion/parallel.hpp"
#include "latefusion/rng.hpp"

namespace latefusion {

TrainValidation stratified_split(const FeatureTable& table, double validation_fraction, std::uint64_t seed)
{
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw SplitError("validation fraction must lie in (0, 1)");
    }
    Rng rng(seed);
    std::vector<std::uint8_t> in_validation(table.rows(), 0);
    for (ClassLabel label : {ClassLabel::Benign, ClassLabel::Malignant}) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < table.rows(); ++r) {
            if (table.labels()[r] == label) rows.push_back(r);
        }
        if (rows.size() < 2) {
            throw SplitError("class " + std::string(label_name(label)) + " has fewer than 2 samples");
        }
        auto k = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(rows.size())));
        k = std::clamp<std::size_t>(k, 1, rows.size() - 1);
        rng.shuffle(std::span<std::size_t>(rows));
        for (std::size_t i = 0; i < k; ++i) in_validation[rows[i]] = 1;
    }
    std::vector<std::size_t> train_rows, validation_rows;
    for (std::size_t r = 0; r < table.rows(); ++r) (in_validation[r] ? validation_rows : train_rows).push_back(r);
    return {table.select_rows(train_rows), table.select_rows(validation_rows)};
}

std::vector<FoldOutcome> run_mrcv_lr(const FeatureTable& table, std::span<const std::string> candidates,
                                     const MrcvOptions& options)
{
    const FeatureTable work = table.select_features(candidates);
    std::vector<FoldOutcome> outcomes(options.repeats);
    parallel_for(options.repeats, options.workers, [&](std::size_t r) {
        FoldOutcome& out = outcomes[r];
        out.repeat_index = r;
        try {
            const auto split = stratified_split(work, options.validation_fraction, derive_seed(options.base_seed, r));
            out.train_ids = split.train.sample_ids();
            out.validation_ids = split.validation.sample_ids();
            const auto model = forward_select(split.train, candidates, options.delta_bic_stop, 1);
            const auto train_scores = predict_proba(model, split.train);
            const auto validation_scores = predict_proba(model, split.validation);
            const auto choice = best_threshold_bacc(train_scores, split.train.labels());
            out.threshold = choice.threshold;
            out.bacc_train = choice.balanced_accuracy;
            out.bacc_validation = balanced_accuracy_at(validation_scores, split.validation.labels(), choice.threshold);
            out.lr_selected_order = model.selected_order;
        } catch (const Error& e) {
            out.ok = false;
            out.error = e.what();
        }
    });
    for (const auto& o : outcomes) {
        if (!o.ok) warn("MRCV repeat " + std::to_string(o.repeat_index) + " failed: " + o.error);
    }
    return outcomes;
}

std::vector<FoldOutcome> run_mrcv_rf(const FeatureTable& table, std::span<const std::string> candidates,
                                     const ForestGrid& grid, const MrcvOptions& options)
{
    if (grid.mtry.empty() || grid.ntree.empty()) throw ModelError("forest grid is empty");
    const FeatureTable work = table.select_features(candidates);
    std::vector<std::pair<std::size_t, std::size_t>> points;
    for (std::size_t nt : grid.ntree) {
        for (std::size_t m : grid.mtry) points.emplace_back(m, nt);
    }

    std::vector<FoldOutcome> outcomes(options.repeats);
    parallel_for(options.repeats, options.workers, [&](std::size_t r) {
        FoldOutcome& out = outcomes[r];
        out.repeat_index = r;
        try {
            const std::uint64_t seed = derive_seed(options.base_seed, r);
            const auto split = stratified_split(work, options.validation_fraction, seed);
            out.train_ids = split.train.sample_ids();
            out.validation_ids = split.validation.sample_ids();

            Forest best;
            bool have = false;
            for (std::size_t g = 0; g < points.size(); ++g) {
                ForestParams params;
                params.mtry = std::min(points[g].first, work.cols());
                params.ntree = points[g].second;
                params.min_leaf = grid.min_leaf;
                params.weighted = grid.weighted;
                params.seed = derive_seed(seed, 0xf0e5ULL, g);
                Forest forest = fit_forest(split.train, params, 1);
                const auto train_scores = oob_predict_proba(forest, split.train);
                const auto choice = best_threshold_bacc(train_scores, split.train.labels());
                const auto validation_scores = predict_proba(forest, split.validation);
                const double bacc = balanced_accuracy_at(validation_scores, split.validation.labels(), choice.threshold);
                if (!have || bacc > out.bacc_validation) {
                    have = true;
                    out.bacc_validation = bacc;
                    out.bacc_train = choice.balanced_accuracy;
                    out.threshold = choice.threshold;
                    out.mtry = params.mtry;
                    out.ntree = params.ntree;
                    best = std::move(forest);
                }
            }
            const auto report = oob_permutation_importance(best, split.train, 1);
            for (const auto& f : report.features) out.importances.emplace_back(f.feature, f.normalized);
        } catch (const Error& e) {
            out.ok = false;
            out.error = e.what();
        }
    });
    for (const auto& o : outcomes) {
        if (!o.ok) warn("MRCV repeat " + std::to_string(o.repeat_index) + " failed: " + o.error);
    }
    return outcomes;
}

double proportional_order(std::size_t position, std::size_t m)
{
    return static_cast<double>(m - position + 1) / static_cast<double>(m);
}

void sort_ranking(FeatureRanking& ranking)
{
    std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
}

namespace {

FeatureRanking to_ranking(const std::map<std::string, double>& scores)
{
    FeatureRanking ranking(scores.begin(), scores.end());
    sort_ranking(ranking);
    return ranking;
}

}  // namespace

FeatureRanking rank_features_lr(std::span<const FoldOutcome> outcomes, std::span<const std::string> universe)
{
    std::map<std::string, double> scores;
    for (const auto& name : universe) scores[name] = 0.0;
    // Sorted by repeat index so the floating sum is independent of input order.
    std::vector<const FoldOutcome*> ordered;
    for (const auto& o : outcomes) {
        if (o.ok) ordered.push_back(&o);
    }
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const FoldOutcome* a, const FoldOutcome* b) { return a->repeat_index < b->repeat_index; });
    for (const FoldOutcome* o : ordered) {
        const std::size_t m = o->lr_selected_order.size();
        for (std::size_t i = 0; i < m; ++i) {
            scores[o->lr_selected_order[i]] += proportional_order(i + 1, m) * o->bacc_validation;
        }
    }
    return to_ranking(scores);
}

FeatureRanking rank_features_rf(std::span<const FoldOutcome> outcomes, std::span<const std::string> universe)
{
    std::map<std::string, double> sums;
    for (const auto& name : universe) sums[name] = 0.0;
    std::vector<const FoldOutcome*> ordered;
    for (const auto& o : outcomes) {
        if (o.ok) ordered.push_back(&o);
    }
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const FoldOutcome* a, const FoldOutcome* b) { return a->repeat_index < b->repeat_index; });
    for (const FoldOutcome* o : ordered) {
        for (const auto& [name, value] : o->importances) sums[name] += value;
    }
    if (!ordered.empty()) {
        for (auto& [name, value] : sums) value /= static_cast<double>(ordered.size());
    }
    return to_ranking(sums);
}

ElbowResult elbow_cut(const FeatureRanking& ranking)
{
    const std::size_t k = ranking.size();
    if (k < 3) throw ElbowError("elbow needs at least 3 ranked features");
    for (const auto& [name, score] : ranking) {
        if (!std::isfinite(score)) throw ElbowError("non-finite score for '" + name + "'");
    }
    const double first = ranking.front().second, last = ranking.back().second;
    bool all_equal = true;
    double scale = 0.0;
    for (const auto& entry : ranking) {
        all_equal = all_equal && entry.second == first;
        scale = std::max(scale, std::fabs(entry.second));
    }
    if (all_equal) throw ElbowError("all scores are equal; no elbow exists");

    // Signed offset of each point from the chord, in score units; the
    // perpendicular distance is this times a constant factor.
    const double span = static_cast<double>(k - 1);
    std::size_t best = 0;
    double best_abs = 0.0, best_signed = 0.0;
    for (std::size_t i = 1; i + 1 < k; ++i) {
        const double on_chord = first + (last - first) * static_cast<double>(i) / span;
        const double offset = ranking[i].second - on_chord;
        if (std::fabs(offset) > best_abs) {
            best_abs = std::fabs(offset);
            best_signed = offset;
            best = i;
        }
    }

    ElbowResult out;
    if (best_abs <= 1e-12 * scale) {
        warn("elbow: scores decay linearly; keeping only the top feature");
        out.degenerate = true;
        out.elbow_index = 1;
        out.selected.push_back(ranking.front().first);
        return out;
    }
    out.elbow_index = best + 1;
    const std::size_t keep = best_signed < 0.0 ? best : best + 1;
    for (std::size_t i = 0; i < keep; ++i) out.selected.push_back(ranking[i].first);
    return out;
}

void write_folds_csv(std::ostream& out, std::span<const FoldOutcome> outcomes)
{
    csv::write_version_line(out, "folds");
    csv::Writer w(out);
    w.row({"repeat", "ok", "n_train", "n_validation", "bacc_train", "bacc_validation", "threshold", "mtry", "ntree",
           "selected"});
    for (const auto& o : outcomes) {
        std::string selected;
        for (std::size_t i = 0; i < o.lr_selected_order.size(); ++i) {
            if (i) selected += ';';
            selected += o.lr_selected_order[i];
        }
        w.row({std::to_string(o.repeat_index), o.ok ? "1" : "0", std::to_string(o.train_ids.size()),
               std::to_string(o.validation_ids.size()), csv::format_exact(o.bacc_train),
               csv::format_exact(o.bacc_validation), csv::format_exact(o.threshold),
               o.mtry ? std::to_string(o.mtry) : std::string(), o.ntree ? std::to_string(o.ntree) : std::string(),
               selected});
    }
}

void write_ranking_csv(std::ostream& out, const FeatureRanking& ranking, std::size_t selected_count)
{
    csv::write_version_line(out, "ranking");
    csv::Writer w(out);
    w.row({"rank", "feature", "score", "selected"});
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        w.row({std::to_string(i + 1), ranking[i].first, csv::format_exact(ranking[i].second),
               i < selected_count ? "1" : "0"});
    }
}

}  // namespace latefusion
