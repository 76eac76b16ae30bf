#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latefusion/forest.hpp"
#include "latefusion/table.hpp"

namespace latefusion {

struct TrainValidation {
    FeatureTable train;
    FeatureTable validation;
};

/// Per class, round(fraction * n_c) rows go to validation, clamped to
/// [1, n_c - 1]. Both parts keep the input row order. Throws SplitError when a
/// class has fewer than 2 rows or the fraction is outside (0, 1).
TrainValidation stratified_split(const FeatureTable& table, double validation_fraction, std::uint64_t seed);

struct FoldOutcome {
    std::size_t repeat_index = 0;
    bool ok = true;
    std::string error;
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
    double bacc_train = 0.0;
    double bacc_validation = 0.0;
    double threshold = 0.0;
    std::vector<std::string> lr_selected_order;
    std::vector<std::pair<std::string, double>> importances;  // normalized, forest feature order
    std::size_t mtry = 0;   // kept grid point (forest mode)
    std::size_t ntree = 0;
};

struct MrcvOptions {
    std::size_t repeats = 100;
    double validation_fraction = 0.3;
    std::uint64_t base_seed = 0;
    double delta_bic_stop = 2.0;
    unsigned workers = 1;
};

struct ForestGrid {
    std::vector<std::size_t> mtry{5, 10, 15, 20, 25, 30};
    std::vector<std::size_t> ntree{100, 500, 1000, 2000};
    std::size_t min_leaf = 1;
    bool weighted = true;
};

/// Repeat r splits with derive_seed(base_seed, r), runs forward selection on
/// the training part, estimates the threshold on training predictions and
/// records balanced accuracy on both parts. Repeats run in parallel; failed
/// repeats are kept with ok = false.
std::vector<FoldOutcome> run_mrcv_lr(const FeatureTable& table, std::span<const std::string> candidates,
                                     const MrcvOptions& options);

/// Like run_mrcv_lr with a forest per grid point; the grid point with the
/// highest validation balanced accuracy is kept (first in grid order on ties)
/// and its normalized OOB importances are recorded. Training scores and the
/// threshold come from OOB predictions.
std::vector<FoldOutcome> run_mrcv_rf(const FeatureTable& table, std::span<const std::string> candidates,
                                     const ForestGrid& grid, const MrcvOptions& options);

using FeatureRanking = std::vector<std::pair<std::string, double>>;

/// Weight of the feature added at 1-based position i among m selected ones.
double proportional_order(std::size_t position, std::size_t m);

/// Sum over folds of proportional_order * validation balanced accuracy.
/// Features in `universe` that were never selected score 0.
FeatureRanking rank_features_lr(std::span<const FoldOutcome> outcomes, std::span<const std::string> universe = {});

/// Mean normalized importance over successful folds (absent counts as 0).
FeatureRanking rank_features_rf(std::span<const FoldOutcome> outcomes, std::span<const std::string> universe = {});

/// Sorts by score descending, then name ascending.
void sort_ranking(FeatureRanking& ranking);

struct ElbowResult {
    std::vector<std::string> selected;  // a prefix of the ranking
    std::size_t elbow_index = 0;        // 1-based index of the max-distance point
    bool degenerate = false;            // every point lies on the chord
};

/// Maximum perpendicular distance to the chord joining the first and last
/// points. A point below the chord starts the tail and is excluded; a point
/// above it closes the head and is included. Throws ElbowError for fewer than
/// 3 features, all-equal or non-finite scores.
ElbowResult elbow_cut(const FeatureRanking& ranking);

void write_folds_csv(std::ostream& out, std::span<const FoldOutcome> outcomes);
void write_ranking_csv(std::ostream& out, const FeatureRanking& ranking, std::size_t selected_count);

}  // namespace latefusion
