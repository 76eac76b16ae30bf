#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "latefusion/table.hpp"

namespace latefusion {

struct ForestParams {
    std::size_t mtry = 5;
    std::size_t ntree = 500;
    std::size_t min_leaf = 1;  // minimum bootstrap draws per child
    std::uint64_t seed = 0;
    bool weighted = true;  // balanced class weights n / (2 n_c), per bootstrap
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // x <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  // weighted malignant proportion (leaves)
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::vector<std::uint32_t> inbag_counts;  // draws per training row
    std::vector<std::size_t> oob_rows;        // rows with zero draws, ascending

    /// `columns[f]` holds feature f (forest order) for every row.
    double predict_row(std::span<const std::span<const double>> columns, std::size_t row) const;
    std::vector<std::size_t> used_features() const;
};

struct Forest {
    ForestParams params;
    std::vector<std::string> feature_names;
    std::vector<Tree> trees;
    double weight_benign = 1.0;  // whole-training-set balanced weights, informational
    double weight_malignant = 1.0;
    std::size_t n_train = 0;
};

/// Grows params.ntree CART trees on bootstrap samples with weighted Gini splits
/// over mtry randomly drawn features. Tree t draws from its own RNG stream so
/// the forest is bit-identical for any worker count. Throws ModelError on a
/// single-class table or missing cells.
Forest fit_forest(const FeatureTable& table, const ForestParams& params, unsigned workers = 1);

/// Mean of per-tree leaf values, accumulated in tree order.
std::vector<double> predict_proba(const Forest& forest, const FeatureTable& table);

/// Per-row mean over the trees for which the row is out of bag; rows that are
/// in bag for every tree fall back to the full-forest prediction.
std::vector<double> oob_predict_proba(const Forest& forest, const FeatureTable& table);

struct FeatureImportance {
    std::string feature;
    double mean_decrease = 0.0;
    double std_error = 0.0;
    double normalized = 0.0;  // mean / SE; 0 when both are 0; +-inf when only SE is 0
};

struct ImportanceReport {
    std::vector<FeatureImportance> features;  // forest feature order
    std::size_t trees_used = 0;

    const FeatureImportance* find(const std::string& name) const;
};

/// Reorders `rows` in place for (tree, feature). The default draws a uniform
/// shuffle from a stream derived from (seed, tree, feature).
using PermuteFn = std::function<void(std::span<std::size_t> rows, std::size_t tree, std::size_t feature)>;

/// OOB accuracy drop after permuting each feature among a tree's OOB rows,
/// averaged over trees; SE uses the (T - 1) standard deviation over T trees.
/// Trees with no OOB rows are skipped with a warning. `table` must be the
/// training table the forest was fitted on.
ImportanceReport oob_permutation_importance(const Forest& forest, const FeatureTable& table, unsigned workers = 1,
                                            const PermuteFn& permute = {});

void write_importance_csv(std::ostream& out, const ImportanceReport& report);

void to_json(nlohmann::json& j, const Forest& forest);
void from_json(const nlohmann::json& j, Forest& forest);

}  // namespace latefusion
