#include "latefusion/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "latefusion/csv.hpp"
#include "latefusion/error.hpp"
#include "latefusion/parallel.hpp"
#include "latefusion/rng.hpp"

namespace latefusion {

namespace {

constexpr std::uint64_t kImportanceStream = 0x1a7e5eedULL;

struct Entry {
    double x;
    std::size_t row;
};

// Weighted Gini impurity scaled by node weight: W * (1 - pm^2 - pb^2).
double scaled_gini(double w, double wm) noexcept
{
    return w > 0.0 ? 2.0 * wm * (w - wm) / w : 0.0;
}

std::vector<std::span<const double>> gather_columns(const Forest& forest, const FeatureTable& table)
{
    std::vector<std::span<const double>> cols;
    cols.reserve(forest.feature_names.size());
    for (const auto& name : forest.feature_names) {
        const auto c = table.find_feature(name);
        if (!c) throw PredictError("table lacks forest feature '" + name + "'");
        if (table.missing_count(*c) > 0) throw PredictError("missing cell in forest feature '" + name + "'");
        cols.push_back(table.column(*c));
    }
    return cols;
}

class Grower {
public:
    Grower(std::span<const std::span<const double>> cols, std::span<const ClassLabel> labels, const ForestParams& params,
           Rng& rng)
        : cols_(cols), labels_(labels), params_(params), rng_(rng)
    {
    }

    Tree grow()
    {
        const std::size_t n = labels_.size();
        Tree tree;
        tree.inbag_counts.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) ++tree.inbag_counts[rng_.index(n)];

        double draws_m = 0.0, draws_b = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (tree.inbag_counts[r] == 0) {
                tree.oob_rows.push_back(r);
                continue;
            }
            rows_.push_back(r);
            (labels_[r] == ClassLabel::Malignant ? draws_m : draws_b) += tree.inbag_counts[r];
        }
        double wb = 1.0, wm = 1.0;
        if (params_.weighted) {
            if (draws_b > 0) wb = static_cast<double>(n) / (2.0 * draws_b);
            if (draws_m > 0) wm = static_cast<double>(n) / (2.0 * draws_m);
        }
        weight_.assign(n, 0.0);
        for (std::size_t r : rows_) {
            weight_[r] = tree.inbag_counts[r] * (labels_[r] == ClassLabel::Malignant ? wm : wb);
        }
        counts_ = &tree.inbag_counts;
        features_.resize(cols_.size());
        std::iota(features_.begin(), features_.end(), std::size_t{0});

        tree.nodes.emplace_back();
        struct Pending {
            std::size_t node, begin, end;
        };
        std::vector<Pending> stack{{0, 0, rows_.size()}};
        while (!stack.empty()) {
            const Pending p = stack.back();
            stack.pop_back();
            const auto split = split_node(tree.nodes[p.node], p.begin, p.end);
            if (!split) continue;
            const std::size_t mid = *split;
            const auto left = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            tree.nodes[p.node].left = left;
            tree.nodes[p.node].right = left + 1;
            // Right pushed first so the left subtree is grown first.
            stack.push_back({static_cast<std::size_t>(left + 1), mid, p.end});
            stack.push_back({static_cast<std::size_t>(left), p.begin, mid});
        }
        return tree;
    }

private:
    // Fills the node's value; on a split sets feature/threshold, partitions
    // rows_[begin, end) and returns the boundary.
    std::optional<std::size_t> split_node(TreeNode& node, std::size_t begin, std::size_t end)
    {
        double w = 0.0, wm = 0.0;
        std::size_t draws = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t r = rows_[i];
            w += weight_[r];
            if (labels_[r] == ClassLabel::Malignant) wm += weight_[r];
            draws += (*counts_)[r];
        }
        node.value = w > 0.0 ? wm / w : 0.0;
        if (wm == 0.0 || wm == w || draws < 2 * params_.min_leaf) return std::nullopt;

        const double parent = scaled_gini(w, wm);
        double best_gain = 0.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        bool found = false;

        const std::size_t p = features_.size();
        const std::size_t mtry = std::min(params_.mtry, p);
        for (std::size_t k = 0; k < mtry; ++k) {
            std::swap(features_[k], features_[k + rng_.index(p - k)]);
            const std::size_t f = features_[k];
            const auto col = cols_[f];
            entries_.clear();
            for (std::size_t i = begin; i < end; ++i) entries_.push_back({col[rows_[i]], rows_[i]});
            std::sort(entries_.begin(), entries_.end(),
                      [](const Entry& a, const Entry& b) { return a.x < b.x || (a.x == b.x && a.row < b.row); });

            double lw = 0.0, lwm = 0.0;
            std::size_t ldraws = 0;
            for (std::size_t i = 0; i + 1 < entries_.size(); ++i) {
                const std::size_t r = entries_[i].row;
                lw += weight_[r];
                if (labels_[r] == ClassLabel::Malignant) lwm += weight_[r];
                ldraws += (*counts_)[r];
                if (entries_[i].x == entries_[i + 1].x) continue;
                if (ldraws < params_.min_leaf || draws - ldraws < params_.min_leaf) continue;
                const double gain = parent - scaled_gini(lw, lwm) - scaled_gini(w - lw, wm - lwm);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    const double lo = entries_[i].x, hi = entries_[i + 1].x;
                    const double mid = lo + (hi - lo) / 2.0;
                    best_threshold = mid < hi ? mid : lo;
                    found = true;
                }
            }
        }
        if (!found || !(best_gain > 1e-12 * w)) return std::nullopt;

        node.feature = static_cast<std::int32_t>(best_feature);
        node.threshold = best_threshold;
        const auto col = cols_[best_feature];
        const auto it = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                              rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                              [&](std::size_t r) { return col[r] <= best_threshold; });
        return static_cast<std::size_t>(it - rows_.begin());
    }

    std::span<const std::span<const double>> cols_;
    std::span<const ClassLabel> labels_;
    const ForestParams& params_;
    Rng& rng_;
    std::vector<std::size_t> rows_;
    std::vector<double> weight_;
    const std::vector<std::uint32_t>* counts_ = nullptr;
    std::vector<std::size_t> features_;
    std::vector<Entry> entries_;
};

double tree_accuracy(const Tree& tree, std::span<const std::span<const double>> cols, std::span<const ClassLabel> labels)
{
    std::size_t correct = 0;
    for (std::size_t r : tree.oob_rows) {
        const bool positive = tree.predict_row(cols, r) >= 0.5;
        if (positive == (labels[r] == ClassLabel::Malignant)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(tree.oob_rows.size());
}

}  // namespace

double Tree::predict_row(std::span<const std::span<const double>> columns, std::size_t row) const
{
    std::size_t at = 0;
    while (nodes[at].feature >= 0) {
        const auto& node = nodes[at];
        at = static_cast<std::size_t>(columns[static_cast<std::size_t>(node.feature)][row] <= node.threshold ? node.left
                                                                                                            : node.right);
    }
    return nodes[at].value;
}

std::vector<std::size_t> Tree::used_features() const
{
    std::vector<std::size_t> out;
    for (const auto& node : nodes) {
        if (node.feature >= 0) out.push_back(static_cast<std::size_t>(node.feature));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Forest fit_forest(const FeatureTable& table, const ForestParams& params, unsigned workers)
{
    if (!table.has_both_classes()) throw ModelError("random forest needs both classes");
    if (table.cols() == 0) throw ModelError("random forest needs at least one feature");
    if (params.ntree == 0) throw ModelError("ntree must be at least 1");
    if (params.mtry == 0) throw ModelError("mtry must be at least 1");
    if (params.min_leaf == 0) throw ModelError("min_leaf must be at least 1");

    Forest forest;
    forest.params = params;
    if (params.mtry > table.cols()) {
        warn("mtry " + std::to_string(params.mtry) + " exceeds feature count, using " + std::to_string(table.cols()));
        forest.params.mtry = table.cols();
    }
    forest.feature_names = table.feature_names();
    forest.n_train = table.rows();
    const auto n = static_cast<double>(table.rows());
    forest.weight_benign = n / (2.0 * static_cast<double>(table.count(ClassLabel::Benign)));
    forest.weight_malignant = n / (2.0 * static_cast<double>(table.count(ClassLabel::Malignant)));

    std::vector<std::span<const double>> cols;
    try {
        cols = gather_columns(forest, table);
    } catch (const PredictError& e) {
        throw ModelError(e.what());
    }

    forest.trees.resize(params.ntree);
    parallel_for(params.ntree, workers, [&](std::size_t t) {
        Rng rng(derive_seed(params.seed, t));
        Grower grower(cols, table.labels(), forest.params, rng);
        forest.trees[t] = grower.grow();
    });
    return forest;
}

std::vector<double> predict_proba(const Forest& forest, const FeatureTable& table)
{
    const auto cols = gather_columns(forest, table);
    std::vector<double> sum(table.rows(), 0.0);
    for (const auto& tree : forest.trees) {
        for (std::size_t r = 0; r < sum.size(); ++r) sum[r] += tree.predict_row(cols, r);
    }
    const auto t = static_cast<double>(forest.trees.size());
    for (auto& v : sum) v /= t;
    return sum;
}

std::vector<double> oob_predict_proba(const Forest& forest, const FeatureTable& table)
{
    const auto cols = gather_columns(forest, table);
    if (table.rows() != forest.n_train) throw PredictError("OOB prediction needs the training table");
    std::vector<double> sum(table.rows(), 0.0);
    std::vector<std::size_t> hits(table.rows(), 0);
    for (const auto& tree : forest.trees) {
        for (std::size_t r : tree.oob_rows) {
            sum[r] += tree.predict_row(cols, r);
            ++hits[r];
        }
    }
    std::vector<double> full;
    for (std::size_t r = 0; r < sum.size(); ++r) {
        if (hits[r] > 0) {
            sum[r] /= static_cast<double>(hits[r]);
            continue;
        }
        if (full.empty()) full = predict_proba(forest, table);
        sum[r] = full[r];
    }
    return sum;
}

const FeatureImportance* ImportanceReport::find(const std::string& name) const
{
    for (const auto& f : features) {
        if (f.feature == name) return &f;
    }
    return nullptr;
}

ImportanceReport oob_permutation_importance(const Forest& forest, const FeatureTable& table, unsigned workers,
                                            const PermuteFn& permute)
{
    const auto cols = gather_columns(forest, table);
    if (table.rows() != forest.n_train) throw PredictError("importance needs the training table");
    const std::size_t p = forest.feature_names.size();
    const std::size_t ntree = forest.trees.size();
    const std::uint64_t base = derive_seed(forest.params.seed, kImportanceStream);

    // drop[t * p + f]; stays 0 for features a tree never splits on.
    std::vector<double> drop(ntree * p, 0.0);
    parallel_for(ntree, workers, [&](std::size_t t) {
        const Tree& tree = forest.trees[t];
        if (tree.oob_rows.empty()) return;
        const double acc = tree_accuracy(tree, cols, table.labels());
        std::vector<std::span<const double>> local(cols.begin(), cols.end());
        std::vector<double> shuffled;
        std::vector<std::size_t> order;
        for (std::size_t f : tree.used_features()) {
            order = tree.oob_rows;
            if (permute) {
                permute(order, t, f);
            } else {
                Rng rng(derive_seed(base, t, f));
                rng.shuffle(std::span<std::size_t>(order));
            }
            shuffled.assign(cols[f].begin(), cols[f].end());
            for (std::size_t k = 0; k < order.size(); ++k) shuffled[tree.oob_rows[k]] = cols[f][order[k]];
            local[f] = shuffled;
            drop[t * p + f] = acc - tree_accuracy(tree, local, table.labels());
            local[f] = cols[f];
        }
    });

    ImportanceReport report;
    std::vector<std::size_t> used;
    for (std::size_t t = 0; t < ntree; ++t) {
        if (forest.trees[t].oob_rows.empty()) {
            warn("tree " + std::to_string(t) + " has no out-of-bag rows; skipped in importance");
        } else {
            used.push_back(t);
        }
    }
    report.trees_used = used.size();
    const auto count = static_cast<double>(used.size());
    for (std::size_t f = 0; f < p; ++f) {
        FeatureImportance fi;
        fi.feature = forest.feature_names[f];
        if (!used.empty()) {
            double sum = 0.0;
            for (std::size_t t : used) sum += drop[t * p + f];
            fi.mean_decrease = sum / count;
            if (used.size() > 1) {
                double ss = 0.0;
                for (std::size_t t : used) ss += (drop[t * p + f] - fi.mean_decrease) * (drop[t * p + f] - fi.mean_decrease);
                fi.std_error = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
            }
        }
        if (fi.std_error > 0.0) {
            fi.normalized = fi.mean_decrease / fi.std_error;
        } else if (fi.mean_decrease != 0.0) {
            fi.normalized = fi.mean_decrease > 0.0 ? std::numeric_limits<double>::infinity()
                                                   : -std::numeric_limits<double>::infinity();
        }
        report.features.push_back(fi);
    }
    return report;
}

void write_importance_csv(std::ostream& out, const ImportanceReport& report)
{
    csv::write_version_line(out, "importance");
    csv::Writer w(out);
    w.row({"feature", "mean", "se", "normalized"});
    for (const auto& f : report.features) {
        w.row({f.feature, csv::format_exact(f.mean_decrease), csv::format_exact(f.std_error),
               csv::format_exact(f.normalized)});
    }
}

void to_json(nlohmann::json& j, const Forest& forest)
{
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : forest.trees) {
        std::vector<std::int32_t> feature, left, right;
        std::vector<double> threshold, value;
        for (const auto& node : tree.nodes) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            value.push_back(node.value);
        }
        trees.push_back({{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"value", value},
                         {"inbag", tree.inbag_counts}});
    }
    j = nlohmann::json{{"format", "latefusion.forest"},
                       {"version", 1},
                       {"mtry", forest.params.mtry},
                       {"ntree", forest.params.ntree},
                       {"min_leaf", forest.params.min_leaf},
                       {"seed", forest.params.seed},
                       {"weighted", forest.params.weighted},
                       {"features", forest.feature_names},
                       {"n_train", forest.n_train},
                       {"weight_benign", forest.weight_benign},
                       {"weight_malignant", forest.weight_malignant},
                       {"trees", trees}};
}

void from_json(const nlohmann::json& j, Forest& forest)
{
    if (j.value("format", std::string{}) != "latefusion.forest" || j.value("version", 0) != 1) {
        throw ModelError("not a version 1 forest document");
    }
    forest.params.mtry = j.at("mtry").get<std::size_t>();
    forest.params.ntree = j.at("ntree").get<std::size_t>();
    forest.params.min_leaf = j.at("min_leaf").get<std::size_t>();
    forest.params.seed = j.at("seed").get<std::uint64_t>();
    forest.params.weighted = j.at("weighted").get<bool>();
    forest.feature_names = j.at("features").get<std::vector<std::string>>();
    forest.n_train = j.at("n_train").get<std::size_t>();
    forest.weight_benign = j.at("weight_benign").get<double>();
    forest.weight_malignant = j.at("weight_malignant").get<double>();
    forest.trees.clear();
    for (const auto& jt : j.at("trees")) {
        Tree tree;
        const auto feature = jt.at("feature").get<std::vector<std::int32_t>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<std::int32_t>>();
        const auto right = jt.at("right").get<std::vector<std::int32_t>>();
        const auto value = jt.at("value").get<std::vector<double>>();
        if (feature.empty() || threshold.size() != feature.size() || left.size() != feature.size() ||
            right.size() != feature.size() || value.size() != feature.size()) {
            throw ModelError("malformed tree in forest document");
        }
        for (std::size_t i = 0; i < feature.size(); ++i) {
            const auto nn = static_cast<std::int32_t>(feature.size());
            if (feature[i] >= static_cast<std::int32_t>(forest.feature_names.size()) ||
                (feature[i] >= 0 && (left[i] <= 0 || left[i] >= nn || right[i] <= 0 || right[i] >= nn))) {
                throw ModelError("malformed tree in forest document");
            }
            tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
        }
        tree.inbag_counts = jt.at("inbag").get<std::vector<std::uint32_t>>();
        for (std::size_t r = 0; r < tree.inbag_counts.size(); ++r) {
            if (tree.inbag_counts[r] == 0) tree.oob_rows.push_back(r);
        }
        forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.empty()) throw ModelError("forest document has no trees");
}

}  // namespace latefusion
