#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace latefusion {

/// Malignant is the positive class for every metric in the library.
enum class ClassLabel : std::uint8_t { Benign = 0, Malignant = 1 };

/// Case-insensitive; accepts {benign, 0} and {malignant, 1}. Throws DataError otherwise.
ClassLabel parse_label(std::string_view text);
std::string_view label_name(ClassLabel label) noexcept;

/// Samples x features matrix with per-sample metadata. Cells may be missing;
/// a missing cell holds 0.0 in the value buffer and is marked in the mask.
///
/// Storage is column-major: feature c occupies values[c*rows, (c+1)*rows).
/// Immutable after construction.
class FeatureTable {
public:
    FeatureTable() = default;

    /// Validates every invariant (shape, unique ids and names); throws DataError.
    /// `missing` may be empty when no cell is missing. `patient_ids` may be
    /// empty, in which case each sample is its own patient.
    FeatureTable(std::vector<std::string> sample_ids, std::vector<std::string> cohort,
                 std::vector<ClassLabel> labels, std::vector<std::string> feature_names,
                 std::vector<double> values, std::vector<std::uint8_t> missing = {},
                 std::vector<std::string> patient_ids = {});

    std::size_t rows() const noexcept { return sample_ids_.size(); }
    std::size_t cols() const noexcept { return feature_names_.size(); }

    const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
    const std::vector<std::string>& cohort() const noexcept { return cohort_; }
    const std::vector<ClassLabel>& labels() const noexcept { return labels_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const std::vector<std::string>& patient_ids() const noexcept { return patient_ids_; }
    bool has_patient_ids() const noexcept { return !patient_ids_.empty(); }

    bool is_missing(std::size_t row, std::size_t col) const noexcept
    {
        return !missing_.empty() && missing_[col * rows() + row] != 0;
    }
    double value(std::size_t row, std::size_t col) const noexcept { return values_[col * rows() + row]; }
    std::optional<double> get(std::size_t row, std::size_t col) const noexcept
    {
        if (is_missing(row, col)) return std::nullopt;
        return value(row, col);
    }

    std::span<const double> column(std::size_t col) const noexcept
    {
        return {values_.data() + col * rows(), rows()};
    }
    std::size_t missing_count(std::size_t col) const noexcept;
    bool any_missing() const noexcept;

    /// Observed (non-missing) values of a feature, optionally restricted to one class.
    std::vector<double> observed(std::size_t col, std::optional<ClassLabel> only = std::nullopt) const;

    std::optional<std::size_t> find_feature(std::string_view name) const;
    std::size_t feature_index(std::string_view name) const;  // throws DataError
    std::optional<std::size_t> find_sample(std::string_view id) const;

    std::size_t count(ClassLabel label) const noexcept;
    bool has_both_classes() const noexcept { return count(ClassLabel::Benign) > 0 && count(ClassLabel::Malignant) > 0; }

    FeatureTable select_rows(std::span<const std::size_t> rows) const;
    FeatureTable select_features(std::span<const std::string> names) const;
    FeatureTable drop_features(std::span<const std::string> names) const;

    const std::vector<double>& raw_values() const noexcept { return values_; }
    const std::vector<std::uint8_t>& raw_missing() const noexcept { return missing_; }

private:
    std::vector<std::string> sample_ids_;
    std::vector<std::string> cohort_;
    std::vector<ClassLabel> labels_;
    std::vector<std::string> feature_names_;
    std::vector<std::string> patient_ids_;
    std::vector<double> values_;
    std::vector<std::uint8_t> missing_;
    std::unordered_map<std::string, std::size_t> feature_lookup_;
    std::unordered_map<std::string, std::size_t> sample_lookup_;
};

/// Column roles for CSV ingestion. Every other column is a numeric feature.
struct TableSchema {
    std::string id_column = "id";
    std::string cohort_column = "cohort";
    std::string label_column = "label";
    std::string patient_column;  // optional grouping column
    std::vector<std::string> missing_tokens{"", "NA"};
};

FeatureTable read_feature_table(std::istream& in, const TableSchema& schema = {});
FeatureTable load_feature_table(const std::filesystem::path& path, const TableSchema& schema = {});

/// Emits the metadata columns named by `schema` followed by the features in
/// table order. Values use round-trip precision; missing cells use the first
/// missing token ("" by default is replaced with "NA").
void write_feature_table(std::ostream& out, const FeatureTable& table, const TableSchema& schema = {});
void save_feature_table(const std::filesystem::path& path, const FeatureTable& table, const TableSchema& schema = {});

/// Restricts both tables to their shared sample ids, in the row order of `a`.
std::pair<FeatureTable, FeatureTable> align_common_samples(const FeatureTable& a, const FeatureTable& b);

struct SplitSpec {
    std::vector<std::string> test_sample_ids;
    std::uint64_t seed = 0;
};

struct TrainTest {
    FeatureTable train;
    FeatureTable test;
};

TrainTest partition(const FeatureTable& table, const SplitSpec& spec);

/// How many samples of one (cohort, label) cell go to the test set.
struct TestQuota {
    std::string cohort;  // empty matches any cohort
    ClassLabel label = ClassLabel::Benign;
    std::size_t count = 0;
    bool require_patient_in = false;  // restrict to ids present in `eligible`
};

/// Draws a test set by quota, sampling without replacement inside each cell.
/// When `eligible` is non-empty, quotas with require_patient_in only draw from
/// those sample ids (used to take test cases present in both modalities).
SplitSpec draw_test_split(const FeatureTable& table, std::span<const TestQuota> quotas, std::uint64_t seed,
                          std::span<const std::string> eligible = {});

/// Stacks rows of two tables with identical feature names.
FeatureTable concat_rows(const FeatureTable& a, const FeatureTable& b);

}  // namespace latefusion
