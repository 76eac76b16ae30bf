#include "latefusion/table.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>
#include <unordered_set>

#include "latefusion/csv.hpp"
#include "latefusion/error.hpp"
#include "latefusion/rng.hpp"

namespace latefusion {

ClassLabel parse_label(std::string_view text)
{
    std::string lower;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (lower == "benign" || lower == "0") return ClassLabel::Benign;
    if (lower == "malignant" || lower == "1") return ClassLabel::Malignant;
    throw DataError("unknown class label '" + std::string(text) + "'");
}

std::string_view label_name(ClassLabel label) noexcept
{
    return label == ClassLabel::Malignant ? "Malignant" : "Benign";
}

FeatureTable::FeatureTable(std::vector<std::string> sample_ids, std::vector<std::string> cohort,
                           std::vector<ClassLabel> labels, std::vector<std::string> feature_names,
                           std::vector<double> values, std::vector<std::uint8_t> missing,
                           std::vector<std::string> patient_ids)
    : sample_ids_(std::move(sample_ids)),
      cohort_(std::move(cohort)),
      labels_(std::move(labels)),
      feature_names_(std::move(feature_names)),
      patient_ids_(std::move(patient_ids)),
      values_(std::move(values)),
      missing_(std::move(missing))
{
    const std::size_t n = sample_ids_.size();
    if (cohort_.size() != n || labels_.size() != n) {
        throw DataError("sample metadata lengths differ (ids, cohort, labels)");
    }
    if (!patient_ids_.empty() && patient_ids_.size() != n) throw DataError("patient id column length differs");
    if (values_.size() != n * feature_names_.size()) throw DataError("value buffer does not match rows x cols");
    if (!missing_.empty() && missing_.size() != values_.size()) throw DataError("missing mask does not match value buffer");
    if (std::none_of(missing_.begin(), missing_.end(), [](auto m) { return m != 0; })) missing_.clear();

    for (std::size_t i = 0; i < n; ++i) {
        if (!sample_lookup_.emplace(sample_ids_[i], i).second) {
            throw DataError("duplicate sample id '" + sample_ids_[i] + "'");
        }
        if (labels_[i] != ClassLabel::Benign && labels_[i] != ClassLabel::Malignant) {
            throw DataError("label outside {Benign, Malignant} for sample '" + sample_ids_[i] + "'");
        }
    }
    for (std::size_t c = 0; c < feature_names_.size(); ++c) {
        if (!feature_lookup_.emplace(feature_names_[c], c).second) {
            throw DataError("duplicate feature name '" + feature_names_[c] + "'");
        }
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!missing_.empty() && missing_[i]) values_[i] = 0.0;
    }
}

std::size_t FeatureTable::missing_count(std::size_t col) const noexcept
{
    if (missing_.empty()) return 0;
    const auto first = missing_.begin() + static_cast<std::ptrdiff_t>(col * rows());
    return static_cast<std::size_t>(std::count(first, first + static_cast<std::ptrdiff_t>(rows()), std::uint8_t{1}));
}

bool FeatureTable::any_missing() const noexcept { return !missing_.empty(); }

std::vector<double> FeatureTable::observed(std::size_t col, std::optional<ClassLabel> only) const
{
    std::vector<double> out;
    out.reserve(rows());
    for (std::size_t r = 0; r < rows(); ++r) {
        if (is_missing(r, col)) continue;
        if (only && labels_[r] != *only) continue;
        out.push_back(value(r, col));
    }
    return out;
}

std::optional<std::size_t> FeatureTable::find_feature(std::string_view name) const
{
    auto it = feature_lookup_.find(std::string(name));
    if (it == feature_lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t FeatureTable::feature_index(std::string_view name) const
{
    if (auto idx = find_feature(name)) return *idx;
    throw DataError("unknown feature '" + std::string(name) + "'");
}

std::optional<std::size_t> FeatureTable::find_sample(std::string_view id) const
{
    auto it = sample_lookup_.find(std::string(id));
    if (it == sample_lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t FeatureTable::count(ClassLabel label) const noexcept
{
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

FeatureTable FeatureTable::select_rows(std::span<const std::size_t> idx) const
{
    const std::size_t n = idx.size();
    std::vector<std::string> ids, coh, pats;
    std::vector<ClassLabel> labs;
    ids.reserve(n);
    coh.reserve(n);
    labs.reserve(n);
    for (auto r : idx) {
        if (r >= rows()) throw DataError("row index out of range");
        ids.push_back(sample_ids_[r]);
        coh.push_back(cohort_[r]);
        labs.push_back(labels_[r]);
        if (has_patient_ids()) pats.push_back(patient_ids_[r]);
    }
    std::vector<double> vals(n * cols());
    std::vector<std::uint8_t> miss(missing_.empty() ? 0 : n * cols());
    for (std::size_t c = 0; c < cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            vals[c * n + i] = value(idx[i], c);
            if (!miss.empty()) miss[c * n + i] = missing_[c * rows() + idx[i]];
        }
    }
    return FeatureTable(std::move(ids), std::move(coh), std::move(labs), feature_names_, std::move(vals),
                        std::move(miss), std::move(pats));
}

FeatureTable FeatureTable::select_features(std::span<const std::string> names) const
{
    std::vector<std::size_t> cols_idx;
    cols_idx.reserve(names.size());
    for (const auto& name : names) cols_idx.push_back(feature_index(name));

    const std::size_t n = rows();
    std::vector<double> vals;
    vals.reserve(n * cols_idx.size());
    std::vector<std::uint8_t> miss;
    for (auto c : cols_idx) {
        auto col = column(c);
        vals.insert(vals.end(), col.begin(), col.end());
    }
    if (!missing_.empty()) {
        miss.reserve(vals.size());
        for (auto c : cols_idx) {
            auto first = missing_.begin() + static_cast<std::ptrdiff_t>(c * n);
            miss.insert(miss.end(), first, first + static_cast<std::ptrdiff_t>(n));
        }
    }
    return FeatureTable(sample_ids_, cohort_, labels_, std::vector<std::string>(names.begin(), names.end()),
                        std::move(vals), std::move(miss), patient_ids_);
}

FeatureTable FeatureTable::drop_features(std::span<const std::string> names) const
{
    std::unordered_set<std::string> drop(names.begin(), names.end());
    std::vector<std::string> keep;
    for (const auto& f : feature_names_) {
        if (!drop.count(f)) keep.push_back(f);
    }
    return select_features(keep);
}

FeatureTable read_feature_table(std::istream& in, const TableSchema& schema)
{
    auto records = csv::read_records(in);
    if (records.empty()) throw DataError("CSV has no header row");
    const auto& header = records.front();

    auto find_col = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
        if (name.empty()) {
            if (required) throw DataError("schema is missing a required column name");
            return std::nullopt;
        }
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            if (required) throw DataError("CSV lacks column '" + name + "'");
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto id_col = *find_col(schema.id_column, true);
    const auto label_col = *find_col(schema.label_column, true);
    const auto cohort_col = find_col(schema.cohort_column, false);
    const auto patient_col = find_col(schema.patient_column, !schema.patient_column.empty());

    std::vector<std::size_t> feature_cols;
    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == id_col || c == label_col || (cohort_col && c == *cohort_col) || (patient_col && c == *patient_col)) continue;
        feature_cols.push_back(c);
        feature_names.push_back(header[c]);
    }

    const std::size_t n = records.size() - 1;
    const std::size_t p = feature_cols.size();
    std::vector<std::string> ids, cohorts, patients;
    std::vector<ClassLabel> labels;
    std::vector<double> values(n * p, 0.0);
    std::vector<std::uint8_t> missing(n * p, 0);

    auto is_missing_token = [&](const std::string& s) {
        return std::find(schema.missing_tokens.begin(), schema.missing_tokens.end(), s) != schema.missing_tokens.end();
    };

    for (std::size_t r = 0; r < n; ++r) {
        const auto& rec = records[r + 1];
        if (rec.size() != header.size()) {
            throw DataError("ragged row " + std::to_string(r + 2) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(rec.size()));
        }
        ids.push_back(rec[id_col]);
        labels.push_back(parse_label(rec[label_col]));
        cohorts.push_back(cohort_col ? rec[*cohort_col] : std::string{});
        if (patient_col) patients.push_back(rec[*patient_col]);
        for (std::size_t j = 0; j < p; ++j) {
            const auto& cell = rec[feature_cols[j]];
            double v = 0.0;
            if (is_missing_token(cell) || !csv::parse_double(cell, v) || std::isnan(v)) {
                missing[j * n + r] = 1;
            } else {
                values[j * n + r] = v;
            }
        }
    }
    return FeatureTable(std::move(ids), std::move(cohorts), std::move(labels), std::move(feature_names),
                        std::move(values), std::move(missing), std::move(patients));
}

FeatureTable load_feature_table(const std::filesystem::path& path, const TableSchema& schema)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    return read_feature_table(in, schema);
}

void write_feature_table(std::ostream& out, const FeatureTable& table, const TableSchema& schema)
{
    csv::write_version_line(out, "table");
    std::string missing_token = "NA";
    for (const auto& t : schema.missing_tokens) {
        if (!t.empty()) {
            missing_token = t;
            break;
        }
    }

    csv::Writer w(out);
    std::vector<std::string> header{schema.id_column};
    if (!schema.cohort_column.empty()) header.push_back(schema.cohort_column);
    header.push_back(schema.label_column);
    const bool patients = !schema.patient_column.empty() && table.has_patient_ids();
    if (patients) header.push_back(schema.patient_column);
    for (const auto& f : table.feature_names()) header.push_back(f);
    w.row(header);

    std::vector<std::string> fields;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        fields.clear();
        fields.push_back(table.sample_ids()[r]);
        if (!schema.cohort_column.empty()) fields.push_back(table.cohort()[r]);
        fields.emplace_back(label_name(table.labels()[r]));
        if (patients) fields.push_back(table.patient_ids()[r]);
        for (std::size_t c = 0; c < table.cols(); ++c) {
            fields.push_back(table.is_missing(r, c) ? missing_token : csv::format_exact(table.value(r, c)));
        }
        w.row(fields);
    }
}

void save_feature_table(const std::filesystem::path& path, const FeatureTable& table, const TableSchema& schema)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    write_feature_table(out, table, schema);
}

std::pair<FeatureTable, FeatureTable> align_common_samples(const FeatureTable& a, const FeatureTable& b)
{
    std::vector<std::size_t> rows_a, rows_b;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto other = b.find_sample(a.sample_ids()[r]);
        if (!other) continue;
        if (a.labels()[r] != b.labels()[*other]) {
            throw DataError("conflicting labels for sample '" + a.sample_ids()[r] + "'");
        }
        rows_a.push_back(r);
        rows_b.push_back(*other);
    }
    return {a.select_rows(rows_a), b.select_rows(rows_b)};
}

TrainTest partition(const FeatureTable& table, const SplitSpec& spec)
{
    std::vector<std::uint8_t> in_test(table.rows(), 0);
    for (const auto& id : spec.test_sample_ids) {
        auto r = table.find_sample(id);
        if (!r) throw DataError("split lists unknown sample id '" + id + "'");
        in_test[*r] = 1;
    }
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t r = 0; r < table.rows(); ++r) (in_test[r] ? test_rows : train_rows).push_back(r);
    return {table.select_rows(train_rows), table.select_rows(test_rows)};
}

SplitSpec draw_test_split(const FeatureTable& table, std::span<const TestQuota> quotas, std::uint64_t seed,
                          std::span<const std::string> eligible)
{
    std::unordered_set<std::string> eligible_set(eligible.begin(), eligible.end());
    std::vector<std::uint8_t> taken(table.rows(), 0);
    SplitSpec spec;
    spec.seed = seed;

    for (std::size_t q = 0; q < quotas.size(); ++q) {
        const auto& quota = quotas[q];
        std::vector<std::size_t> pool;
        for (std::size_t r = 0; r < table.rows(); ++r) {
            if (taken[r] || table.labels()[r] != quota.label) continue;
            if (!quota.cohort.empty() && table.cohort()[r] != quota.cohort) continue;
            if (quota.require_patient_in && !eligible_set.count(table.sample_ids()[r])) continue;
            pool.push_back(r);
        }
        if (pool.size() < quota.count) {
            throw DataError("test quota for cohort '" + quota.cohort + "' / " + std::string(label_name(quota.label)) +
                            " needs " + std::to_string(quota.count) + " samples, only " + std::to_string(pool.size()) +
                            " available");
        }
        Rng rng(derive_seed(seed, q));
        rng.shuffle(std::span<std::size_t>(pool));
        pool.resize(quota.count);
        std::sort(pool.begin(), pool.end());
        for (auto r : pool) taken[r] = 1;
    }
    for (std::size_t r = 0; r < table.rows(); ++r) {
        if (taken[r]) spec.test_sample_ids.push_back(table.sample_ids()[r]);
    }
    return spec;
}

FeatureTable concat_rows(const FeatureTable& a, const FeatureTable& b)
{
    if (a.feature_names() != b.feature_names()) throw DataError("concat_rows: feature names differ");
    if (a.has_patient_ids() != b.has_patient_ids()) throw DataError("concat_rows: patient id columns differ");
    const std::size_t na = a.rows(), nb = b.rows(), n = na + nb, p = a.cols();

    auto ids = a.sample_ids();
    ids.insert(ids.end(), b.sample_ids().begin(), b.sample_ids().end());
    auto coh = a.cohort();
    coh.insert(coh.end(), b.cohort().begin(), b.cohort().end());
    auto labs = a.labels();
    labs.insert(labs.end(), b.labels().begin(), b.labels().end());
    auto pats = a.patient_ids();
    pats.insert(pats.end(), b.patient_ids().begin(), b.patient_ids().end());

    std::vector<double> vals(n * p);
    std::vector<std::uint8_t> miss((a.any_missing() || b.any_missing()) ? n * p : 0);
    for (std::size_t c = 0; c < p; ++c) {
        for (std::size_t r = 0; r < na; ++r) {
            vals[c * n + r] = a.value(r, c);
            if (!miss.empty()) miss[c * n + r] = a.is_missing(r, c);
        }
        for (std::size_t r = 0; r < nb; ++r) {
            vals[c * n + na + r] = b.value(r, c);
            if (!miss.empty()) miss[c * n + na + r] = b.is_missing(r, c);
        }
    }
    return FeatureTable(std::move(ids), std::move(coh), std::move(labs), a.feature_names(), std::move(vals),
                        std::move(miss), std::move(pats));
}

}  // namespace latefusion
