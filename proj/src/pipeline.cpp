#include "latefusion/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "latefusion/csv.hpp"
#include "latefusion/forest.hpp"
#include "latefusion/logreg.hpp"
#include "latefusion/metrics.hpp"
#include "latefusion/rng.hpp"
#include "latefusion/svg.hpp"
#include "latefusion/univariate.hpp"

namespace fs = std::filesystem;

namespace latefusion {

namespace {

// Independent seed streams derived from the run seed.
enum Stream : std::uint64_t {
    kSynthStream = 1,
    kSplitStream = 11,
    kLrStream = 21,
    kRfStream = 22,
    kFinalForestStream = 23,
};

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PipelineError(kExitFailure, "cannot write " + path.string());
    body(out);
    if (!out) throw PipelineError(kExitFailure, "write failed for " + path.string());
}

void write_text(const fs::path& path, const std::string& text)
{
    write_file(path, [&](std::ostream& o) { o << text; });
}

void log(const std::string& message) { std::fprintf(stderr, "%s\n", message.c_str()); }

std::vector<PlantedShift> parse_planted(const std::vector<std::string>& items, const std::string& key)
{
    std::vector<PlantedShift> out;
    for (const auto& item : items) {
        const auto colon = item.find(':');
        double shift = 0.0;
        std::size_t index = 0;
        try {
            if (colon == std::string::npos) throw std::invalid_argument("no colon");
            index = std::stoul(item.substr(0, colon));
            if (!csv::parse_double(item.substr(colon + 1), shift)) throw std::invalid_argument("shift");
        } catch (const std::exception&) {
            throw ConfigError("'" + key + "' entries look like <feature number>:<shift>, got '" + item + "'");
        }
        if (index == 0) throw ConfigError("'" + key + "' feature numbers start at 1");
        out.push_back({index - 1, shift});
    }
    return out;
}

std::vector<CorrelationBlock> parse_blocks(const std::vector<std::string>& items, const std::string& key)
{
    std::vector<CorrelationBlock> out;
    for (const auto& item : items) {
        const auto colon = item.find(':');
        double rho = 0.0;
        std::size_t size = 0;
        try {
            if (colon == std::string::npos) throw std::invalid_argument("no colon");
            size = std::stoul(item.substr(0, colon));
            if (!csv::parse_double(item.substr(colon + 1), rho)) throw std::invalid_argument("rho");
        } catch (const std::exception&) {
            throw ConfigError("'" + key + "' entries look like <size>:<rho>, got '" + item + "'");
        }
        out.push_back({size, rho});
    }
    return out;
}

SynthSpec synth_spec(const Config& c, const std::string& slot, const RunConfig& run)
{
    SynthSpec s;
    s.n_benign = c.get_size("synth.n_benign", 250);
    s.n_malignant = c.get_size("synth.n_malignant", 250);
    s.common_fraction = c.get_double("synth.common_fraction", 1.0);
    s.seed = c.get_u64("synth.seed", derive_seed(run.seed, kSynthStream));
    s.cohort = c.get_string("synth.cohort", "SYNTH");
    s.id_prefix = c.get_string("synth.id_prefix", "P");
    const std::string p = "synth." + slot + ".";
    s.n_features = c.get_size(p + "n_features", 100);
    s.feature_prefix = c.get_string(p + "feature_prefix", slot + "_f");
    s.planted = parse_planted(c.get_list(p + "planted"), p + "planted");
    s.correlation_blocks = parse_blocks(c.get_list(p + "blocks"), p + "blocks");
    return s;
}

FeatureTable load_checked(const fs::path& path, const TableSchema& schema)
{
    if (!fs::exists(path)) throw PipelineError(kExitMissingInput, "input file not found: " + path.string());
    return load_feature_table(path, schema);
}

nlohmann::json read_json(const fs::path& path)
{
    if (!fs::exists(path)) throw PipelineError(kExitMissingInput, "input file not found: " + path.string());
    std::ifstream in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw PipelineError(kExitFailure, "cannot parse " + path.string() + ": " + e.what());
    }
}

struct SelectedFeatures {
    FeatureRanking ranking;
    std::vector<std::string> features;
};

// Elbow prefix of the ranking restricted to positive scores; falls back to
// every positive-score feature when no elbow exists.
SelectedFeatures select_features(FeatureRanking ranking)
{
    SelectedFeatures out;
    std::vector<std::string> picked;
    try {
        picked = elbow_cut(ranking).selected;
    } catch (const ElbowError& e) {
        warn(std::string("elbow: ") + e.what() + "; keeping every feature with a positive score");
        for (const auto& [name, score] : ranking) picked.push_back(name);
    }
    for (const auto& name : picked) {
        const auto it = std::find_if(ranking.begin(), ranking.end(), [&](const auto& e) { return e.first == name; });
        if (it->second > 0.0) out.features.push_back(name);
    }
    if (out.features.empty()) throw PipelineError(kExitEmptyFeatures, "no feature has a positive ranking score");
    out.ranking = std::move(ranking);
    return out;
}

struct Bundle {
    std::string modality;
    ModelKind kind = ModelKind::LogReg;
    Preprocessing preprocessing;
    std::vector<std::string> features;
    double threshold = 0.5;
    FittedLogReg logreg;
    Forest forest;
};

nlohmann::json bundle_json(const Bundle& b)
{
    nlohmann::json j{{"format", "latefusion.bundle"},
                     {"version", 1},
                     {"modality", b.modality},
                     {"model", std::string(model_kind_name(b.kind))},
                     {"features", b.features},
                     {"threshold", b.threshold},
                     {"preprocessing", b.preprocessing}};
    if (b.kind == ModelKind::LogReg) {
        j["logreg"] = b.logreg;
    } else {
        j["forest"] = b.forest;
    }
    return j;
}

Bundle parse_bundle(const nlohmann::json& j)
{
    if (j.value("format", std::string{}) != "latefusion.bundle" || j.value("version", 0) != 1) {
        throw PipelineError(kExitFailure, "not a version 1 model bundle");
    }
    Bundle b;
    b.modality = j.at("modality").get<std::string>();
    b.kind = parse_model_kind(j.at("model").get<std::string>());
    b.features = j.at("features").get<std::vector<std::string>>();
    b.threshold = j.at("threshold").get<double>();
    b.preprocessing = j.at("preprocessing").get<Preprocessing>();
    if (b.kind == ModelKind::LogReg) {
        b.logreg = j.at("logreg").get<FittedLogReg>();
    } else {
        b.forest = j.at("forest").get<Forest>();
    }
    return b;
}

std::vector<double> bundle_predict(const Bundle& b, const FeatureTable& table)
{
    try {
        return b.kind == ModelKind::LogReg ? predict_proba(b.logreg, table) : predict_proba(b.forest, table);
    } catch (const PredictError& e) {
        throw PipelineError(kExitMismatch, e.what());
    }
}

std::pair<std::string, MetricsRow> metrics_row(const std::string& name, std::span<const double> scores,
                                               std::span<const ClassLabel> labels, double threshold)
{
    MetricsRow row = metrics_from_confusion(confusion(scores, labels, threshold));
    row.auc = auc(scores, labels);
    return {name, row};
}

void write_scores_csv(const fs::path& path, const FeatureTable& table, std::span<const double> scores, double threshold)
{
    write_file(path, [&](std::ostream& o) {
        csv::write_version_line(o, "scores");
        csv::Writer w(o);
        w.row({"sample_id", "label", "probability", "threshold", "prediction"});
        for (std::size_t r = 0; r < table.rows(); ++r) {
            w.row({table.sample_ids()[r], std::string(label_name(table.labels()[r])), csv::format_exact(scores[r]),
                   csv::format_exact(threshold),
                   std::string(label_name(scores[r] >= threshold ? ClassLabel::Malignant : ClassLabel::Benign))});
        }
    });
}

ModalityScores read_scores_csv(const fs::path& path)
{
    if (!fs::exists(path)) throw PipelineError(kExitMissingInput, "input file not found: " + path.string());
    std::ifstream in(path);
    const auto records = csv::read_records(in);
    if (records.empty()) throw PipelineError(kExitFailure, "empty scores file " + path.string());
    const auto& header = records.front();
    auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw PipelineError(kExitFailure, path.string() + " lacks column " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ci = col("sample_id"), cl = col("label"), cp = col("probability"), ct = col("threshold");
    ModalityScores s;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.size() != header.size()) throw PipelineError(kExitFailure, "ragged row in " + path.string());
        double p = 0.0, t = 0.0;
        if (!csv::parse_double(rec[cp], p) || !csv::parse_double(rec[ct], t)) {
            throw PipelineError(kExitFailure, "non-numeric score in " + path.string());
        }
        s.sample_ids.push_back(rec[ci]);
        s.labels.push_back(parse_label(rec[cl]));
        s.probability.push_back(p);
        s.threshold = t;
    }
    return s;
}

void write_roc(const fs::path& dir, const std::string& stem, const std::string& title, std::span<const double> scores,
               std::span<const ClassLabel> labels)
{
    const RocCurve curve = roc_curve(scores, labels);
    write_file(dir / (stem + ".csv"), [&](std::ostream& o) {
        csv::write_version_line(o, "roc");
        csv::Writer w(o);
        w.row({"threshold", "fpr", "tpr"});
        for (const auto& p : curve.points) {
            w.row({csv::format_exact(p.threshold), csv::format_exact(p.fpr), csv::format_exact(p.tpr)});
        }
    });
    write_text(dir / (stem + ".svg"), svg::roc_plot(curve, auc(scores, labels), title));
}

// Copies the data rows of a metrics CSV, prefixing the model column.
void append_metrics(const fs::path& path, const std::string& prefix, csv::Writer& w, bool& found)
{
    if (!fs::exists(path)) {
        warn("report: " + path.string() + " not found; skipped");
        return;
    }
    std::ifstream in(path);
    const auto records = csv::read_records(in);
    for (std::size_t i = 1; i < records.size(); ++i) {
        auto rec = records[i];
        rec[0] = prefix + rec[0];
        w.row(rec);
        found = true;
    }
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) noexcept { return kind == ModelKind::LogReg ? "lr" : "rf"; }

ModelKind parse_model_kind(std::string_view text)
{
    if (text == "lr") return ModelKind::LogReg;
    if (text == "rf") return ModelKind::Forest;
    throw ConfigError("model must be lr or rf, got '" + std::string(text) + "'");
}

RunConfig make_run_config(const Config& c)
{
    RunConfig r;
    if (!c.has("seed")) throw ConfigError("'seed' is mandatory");
    r.seed = c.get_u64("seed", 0);
    r.workers = static_cast<unsigned>(c.get_size("workers", 0));
    r.output_dir = c.get_path("output", "out");
    const char* slots[2] = {"a", "b"};
    for (std::size_t m = 0; m < 2; ++m) {
        const std::string s = slots[m];
        r.modalities[m].name = c.get_string(s + ".name", s);
        r.modalities[m].path = c.get_path(s + ".path", fs::path("data") / (r.modalities[m].name + ".csv"));
    }
    if (r.modalities[0].name == r.modalities[1].name) throw ConfigError("modality names must differ");

    r.schema.id_column = c.get_string("schema.id", "id");
    r.schema.cohort_column = c.get_string("schema.cohort", "cohort");
    r.schema.label_column = c.get_string("schema.label", "label");
    r.schema.patient_column = c.get_string("schema.patient", "");
    r.schema.missing_tokens = c.get_list("schema.missing", r.schema.missing_tokens);

    r.scaler = c.get_string("preprocess.scaler", r.scaler);
    if (r.scaler != "benign_per_cohort" && r.scaler != "benign" && r.scaler != "none") {
        throw ConfigError("preprocess.scaler must be benign_per_cohort, benign or none");
    }
    r.max_missing = c.get_double("preprocess.max_missing", r.max_missing);
    r.correlation_cutoff = c.get_double("preprocess.correlation_cutoff", r.correlation_cutoff);
    if (!(r.max_missing >= 0.0 && r.max_missing <= 1.0)) throw ConfigError("preprocess.max_missing must lie in [0, 1]");
    if (!(r.correlation_cutoff > 0.0)) throw ConfigError("preprocess.correlation_cutoff must be positive");

    r.test_benign = c.get_size("split.test_benign", r.test_benign);
    r.test_malignant = c.get_size("split.test_malignant", r.test_malignant);
    r.test_cohort = c.get_string("split.test_cohort", "");
    r.test_common = c.get_bool("split.common", r.test_common);

    r.alpha = c.get_double("univariate.alpha", r.alpha);
    r.significant_only = c.get_bool("train.significant_only", r.significant_only);

    r.repeats = c.get_size("mrcv.repeats", r.repeats);
    r.lr_fraction = c.get_double("mrcv.lr_fraction", r.lr_fraction);
    r.rf_fraction = c.get_double("mrcv.rf_fraction", r.rf_fraction);
    r.delta_bic = c.get_double("mrcv.delta_bic", r.delta_bic);
    if (r.repeats == 0) throw ConfigError("mrcv.repeats must be at least 1");

    r.grid.mtry = c.get_size_list("rf.mtry", r.grid.mtry);
    r.grid.ntree = c.get_size_list("rf.ntree", r.grid.ntree);
    r.grid.min_leaf = c.get_size("rf.min_leaf", r.grid.min_leaf);
    r.grid.weighted = c.get_bool("rf.weighted", r.grid.weighted);
    if (r.grid.mtry.empty() || r.grid.ntree.empty()) throw ConfigError("rf.mtry and rf.ntree need at least one value");

    if (c.has("fusion.rules")) {
        r.rules.clear();
        for (const auto& name : c.get_list("fusion.rules")) {
            try {
                r.rules.push_back(parse_rule(name));
            } catch (const FusionError& e) {
                throw ConfigError(e.what());
            }
        }
    }

    r.synth_a = synth_spec(c, "a", r);
    r.synth_b = synth_spec(c, "b", r);
    r.synth_complementary = c.get_bool("synth.complementary", false);
    return r;
}

Prepared fit_preprocessing(const FeatureTable& train, const RunConfig& config)
{
    Prepared out;
    MissingnessResult filtered;
    try {
        filtered = filter_missingness(train, config.max_missing);
    } catch (const PreprocessError& e) {
        throw PipelineError(kExitEmptyFeatures, e.what());
    }
    out.steps.input_features = filtered.table.feature_names();
    out.steps.dropped_missing = filtered.dropped;
    out.steps.imputation_medians = filtered.imputation_medians;

    FeatureTable table = std::move(filtered.table);
    if (config.scaler != "none") {
        out.steps.scalers = fit_robust_scaler(table, ClassLabel::Benign, config.scaler == "benign_per_cohort");
        table = apply_scalers(out.steps.scalers, table);
    }
    if (table.cols() == 0) throw PipelineError(kExitEmptyFeatures, "no usable feature after scaling");

    if (config.correlation_cutoff <= 1.0 && table.cols() > 1) {
        const auto matrix = spearman_matrix(table, config.workers);
        auto pruned = drop_correlated(table, matrix, config.correlation_cutoff);
        out.steps.removed_correlated = std::move(pruned.removed);
        table = std::move(pruned.table);
    }
    if (table.cols() == 0) throw PipelineError(kExitEmptyFeatures, "empty feature set after pruning");
    out.steps.features = table.feature_names();
    out.table = std::move(table);
    return out;
}

FeatureTable apply_preprocessing(const Preprocessing& steps, const FeatureTable& table)
{
    for (const auto& name : steps.input_features) {
        if (!table.find_feature(name)) throw PipelineError(kExitMismatch, "table lacks feature '" + name + "'");
    }
    try {
        FeatureTable t = impute_medians(table.select_features(steps.input_features), steps.imputation_medians);
        if (!steps.scalers.empty()) t = apply_scalers(steps.scalers, t);
        return t.select_features(steps.features);
    } catch (const PreprocessError& e) {
        throw PipelineError(kExitMismatch, e.what());
    } catch (const DataError& e) {
        throw PipelineError(kExitMismatch, e.what());
    }
}

void to_json(nlohmann::json& j, const Preprocessing& p)
{
    nlohmann::json scalers = nlohmann::json::array();
    for (const auto& s : p.scalers) {
        nlohmann::json feats = nlohmann::json::array();
        for (const auto& f : s.features) {
            feats.push_back({{"name", f.name}, {"median", f.median}, {"iqr", f.iqr}, {"usable", f.usable}});
        }
        scalers.push_back({{"cohort", s.cohort}, {"reference", s.reference}, {"features", feats}});
    }
    j = nlohmann::json{{"input_features", p.input_features},
                       {"dropped_missing", p.dropped_missing},
                       {"imputation_medians", p.imputation_medians},
                       {"scalers", scalers},
                       {"removed_correlated", p.removed_correlated},
                       {"features", p.features}};
}

void from_json(const nlohmann::json& j, Preprocessing& p)
{
    p.input_features = j.at("input_features").get<std::vector<std::string>>();
    p.dropped_missing = j.at("dropped_missing").get<std::vector<std::string>>();
    p.imputation_medians = j.at("imputation_medians").get<std::map<std::string, double>>();
    p.removed_correlated = j.at("removed_correlated").get<std::vector<std::string>>();
    p.features = j.at("features").get<std::vector<std::string>>();
    p.scalers.clear();
    for (const auto& js : j.at("scalers")) {
        RobustScaler s;
        s.cohort = js.at("cohort").get<std::string>();
        s.reference = js.at("reference").get<std::string>();
        for (const auto& jf : js.at("features")) {
            s.features.push_back({jf.at("name").get<std::string>(), jf.at("median").get<double>(),
                                  jf.at("iqr").get<double>(), jf.at("usable").get<bool>()});
        }
        p.scalers.push_back(std::move(s));
    }
}

std::array<FeatureTable, 2> load_modalities(const RunConfig& config)
{
    return {load_checked(config.modalities[0].path, config.schema), load_checked(config.modalities[1].path, config.schema)};
}

std::array<TrainTest, 2> split_modalities(const std::array<FeatureTable, 2>& tables, const RunConfig& config)
{
    std::vector<TestQuota> quotas;
    if (config.test_benign > 0) {
        quotas.push_back({config.test_cohort, ClassLabel::Benign, config.test_benign, config.test_common});
    }
    if (config.test_malignant > 0) {
        quotas.push_back({config.test_cohort, ClassLabel::Malignant, config.test_malignant, config.test_common});
    }
    const std::uint64_t seed = derive_seed(config.seed, kSplitStream);

    std::array<std::unordered_set<std::string>, 2> test_ids;
    if (config.test_common) {
        std::unordered_set<std::string> in_b(tables[1].sample_ids().begin(), tables[1].sample_ids().end());
        std::vector<std::string> common;
        for (const auto& id : tables[0].sample_ids()) {
            if (in_b.count(id)) common.push_back(id);
        }
        const auto spec = draw_test_split(tables[0], quotas, seed, common);
        test_ids[0].insert(spec.test_sample_ids.begin(), spec.test_sample_ids.end());
        test_ids[1] = test_ids[0];
    } else {
        for (std::size_t m = 0; m < 2; ++m) {
            const auto spec = draw_test_split(tables[m], quotas, derive_seed(seed, m));
            test_ids[m].insert(spec.test_sample_ids.begin(), spec.test_sample_ids.end());
        }
    }

    // Rows of a test patient follow the patient into the test set. With a
    // common draw the patient set is shared by both modalities.
    std::array<std::unordered_set<std::string>, 2> test_patients;
    for (std::size_t m = 0; m < 2; ++m) {
        if (!tables[m].has_patient_ids()) continue;
        for (std::size_t r = 0; r < tables[m].rows(); ++r) {
            if (test_ids[m].count(tables[m].sample_ids()[r])) test_patients[m].insert(tables[m].patient_ids()[r]);
        }
    }
    if (config.test_common) {
        test_patients[0].insert(test_patients[1].begin(), test_patients[1].end());
        test_patients[1] = test_patients[0];
    }

    std::array<TrainTest, 2> out;
    for (std::size_t m = 0; m < 2; ++m) {
        SplitSpec spec;
        spec.seed = seed;
        for (std::size_t r = 0; r < tables[m].rows(); ++r) {
            const bool by_id = test_ids[m].count(tables[m].sample_ids()[r]) > 0;
            const bool by_patient = tables[m].has_patient_ids() && test_patients[m].count(tables[m].patient_ids()[r]) > 0;
            if (by_id || by_patient) spec.test_sample_ids.push_back(tables[m].sample_ids()[r]);
        }
        out[m] = partition(tables[m], spec);
    }
    return out;
}

fs::path modality_dir(const RunConfig& config, std::size_t modality)
{
    return config.output_dir / config.modalities[modality].name;
}

fs::path model_dir(const RunConfig& config, std::size_t modality, ModelKind kind)
{
    return modality_dir(config, modality) / std::string(model_kind_name(kind));
}

void cmd_synth(const RunConfig& config)
{
    const auto pair = generate_pair(config.synth_a, config.synth_b, config.synth_complementary);
    for (std::size_t m = 0; m < 2; ++m) {
        const auto& path = config.modalities[m].path;
        write_file(path, [&](std::ostream& o) { write_feature_table(o, m == 0 ? pair.a : pair.b, config.schema); });
        log("synth: wrote " + path.string());
    }
}

void cmd_univariate(const RunConfig& config, std::size_t modality)
{
    const auto tables = load_modalities(config);
    const auto parts = split_modalities(tables, config);
    const Prepared prep = fit_preprocessing(parts[modality].train, config);
    const ScreenReport report = univariate_screen(prep.table, config.alpha, config.workers);
    const fs::path dir = modality_dir(config, modality);
    write_file(dir / "univariate.csv", [&](std::ostream& o) { write_screen_csv(o, report); });
    write_file(dir / "univariate_summary.csv", [&](std::ostream& o) {
        csv::write_version_line(o, "univariate-summary");
        csv::Writer w(o);
        w.row({"modality", "features", "alpha", "significant", "up", "down"});
        w.row({config.modalities[modality].name, std::to_string(report.rows.size()), csv::format_exact(report.alpha),
               std::to_string(report.significant), std::to_string(report.up), std::to_string(report.down)});
    });
    write_file(dir / "preprocess.csv", [&](std::ostream& o) {
        csv::write_version_line(o, "preprocess");
        csv::Writer w(o);
        w.row({"feature", "status"});
        for (const auto& f : prep.steps.dropped_missing) w.row({f, "dropped_missing"});
        for (const auto& f : prep.steps.input_features) {
            const bool kept = std::find(prep.steps.features.begin(), prep.steps.features.end(), f) !=
                              prep.steps.features.end();
            const bool pruned = std::find(prep.steps.removed_correlated.begin(), prep.steps.removed_correlated.end(),
                                          f) != prep.steps.removed_correlated.end();
            w.row({f, kept ? "kept" : pruned ? "removed_correlated" : "unusable_scale"});
        }
    });
    log("univariate: " + config.modalities[modality].name + ": " + std::to_string(report.significant) +
        " significant (" + std::to_string(report.up) + " up, " + std::to_string(report.down) + " down)");
}

void cmd_train(const RunConfig& config, std::size_t modality, ModelKind kind)
{
    const auto tables = load_modalities(config);
    const auto parts = split_modalities(tables, config);
    const Prepared prep = fit_preprocessing(parts[modality].train, config);

    std::vector<std::string> candidates = prep.steps.features;
    if (config.significant_only) {
        const auto report = univariate_screen(prep.table, config.alpha, config.workers);
        candidates.clear();
        for (const auto& row : report.rows) {
            if (row.flag.empty() && row.fdr < config.alpha) candidates.push_back(row.feature);
        }
        if (candidates.empty()) throw PipelineError(kExitEmptyFeatures, "no significant feature to train on");
    }

    Bundle bundle;
    bundle.modality = config.modalities[modality].name;
    bundle.kind = kind;
    bundle.preprocessing = prep.steps;
    const fs::path dir = model_dir(config, modality, kind);

    MrcvOptions options;
    options.repeats = config.repeats;
    options.delta_bic_stop = config.delta_bic;
    options.workers = config.workers;

    std::vector<FoldOutcome> outcomes;
    SelectedFeatures selected;
    if (kind == ModelKind::LogReg) {
        options.validation_fraction = config.lr_fraction;
        options.base_seed = derive_seed(config.seed, kLrStream, modality);
        outcomes = run_mrcv_lr(prep.table, candidates, options);
        selected = select_features(rank_features_lr(outcomes, candidates));
        bundle.features = selected.features;
        bundle.logreg = fit_logistic(prep.table, bundle.features);
        const auto scores = predict_proba(bundle.logreg, prep.table);
        bundle.threshold = best_threshold_bacc(scores, prep.table.labels()).threshold;
    } else {
        options.validation_fraction = config.rf_fraction;
        options.base_seed = derive_seed(config.seed, kRfStream, modality);
        outcomes = run_mrcv_rf(prep.table, candidates, config.grid, options);
        selected = select_features(rank_features_rf(outcomes, candidates));
        bundle.features = selected.features;

        // Most frequently kept grid point; first in grid order on ties.
        std::vector<std::pair<std::size_t, std::size_t>> points;
        for (std::size_t nt : config.grid.ntree) {
            for (std::size_t m : config.grid.mtry) points.emplace_back(m, nt);
        }
        std::vector<std::size_t> wins(points.size(), 0);
        for (const auto& o : outcomes) {
            if (!o.ok) continue;
            for (std::size_t g = 0; g < points.size(); ++g) {
                if (std::min(points[g].first, candidates.size()) == o.mtry && points[g].second == o.ntree) {
                    ++wins[g];
                    break;
                }
            }
        }
        const std::size_t g = static_cast<std::size_t>(std::max_element(wins.begin(), wins.end()) - wins.begin());
        ForestParams params;
        params.mtry = std::min(points[g].first, bundle.features.size());
        params.ntree = points[g].second;
        params.min_leaf = config.grid.min_leaf;
        params.weighted = config.grid.weighted;
        params.seed = derive_seed(config.seed, kFinalForestStream, modality);
        const FeatureTable train = prep.table.select_features(bundle.features);
        bundle.forest = fit_forest(train, params, config.workers);
        const auto scores = oob_predict_proba(bundle.forest, train);
        bundle.threshold = best_threshold_bacc(scores, train.labels()).threshold;
        const auto importance = oob_permutation_importance(bundle.forest, train, config.workers);
        write_file(dir / "importance.csv", [&](std::ostream& o) { write_importance_csv(o, importance); });
    }

    write_file(dir / "folds.csv", [&](std::ostream& o) { write_folds_csv(o, outcomes); });
    write_file(dir / "ranking.csv",
               [&](std::ostream& o) { write_ranking_csv(o, selected.ranking, selected.features.size()); });
    write_text(dir / "elbow.svg", svg::elbow_plot(selected.ranking, selected.features.size(),
                                                  bundle.modality + " " + std::string(model_kind_name(kind)) +
                                                      " feature ranking"));
    write_file(dir / "model.json", [&](std::ostream& o) { o << bundle_json(bundle).dump(1) << '\n'; });

    double mean_bacc = 0.0;
    std::size_t ok = 0;
    for (const auto& o : outcomes) {
        if (o.ok) {
            mean_bacc += o.bacc_validation;
            ++ok;
        }
    }
    log("train: " + bundle.modality + "/" + std::string(model_kind_name(kind)) + ": " +
        std::to_string(bundle.features.size()) + " features, mean validation BAcc " +
        csv::format_g6(ok ? mean_bacc / static_cast<double>(ok) : 0.0));
}

void cmd_evaluate(const RunConfig& config, std::size_t modality, ModelKind kind, const fs::path& bundle_path,
                  const fs::path& table_path)
{
    const fs::path dir = model_dir(config, modality, kind);
    Bundle bundle;
    try {
        bundle = parse_bundle(read_json(bundle_path.empty() ? dir / "model.json" : bundle_path));
    } catch (const nlohmann::json::exception& e) {
        throw PipelineError(kExitFailure, std::string("malformed model bundle: ") + e.what());
    }
    if (bundle.kind != kind) throw PipelineError(kExitMismatch, "bundle holds a different model kind");

    std::vector<std::pair<std::string, MetricsRow>> rows;
    FeatureTable test;
    if (!table_path.empty()) {
        test = apply_preprocessing(bundle.preprocessing, load_checked(table_path, config.schema));
    } else {
        const auto tables = load_modalities(config);
        const auto parts = split_modalities(tables, config);
        const FeatureTable train = apply_preprocessing(bundle.preprocessing, parts[modality].train);
        test = apply_preprocessing(bundle.preprocessing, parts[modality].test);
        std::vector<double> train_scores;
        if (kind == ModelKind::Forest && train.rows() == bundle.forest.n_train) {
            train_scores = oob_predict_proba(bundle.forest, train.select_features(bundle.features));
        } else {
            train_scores = bundle_predict(bundle, train);
        }
        rows.push_back(metrics_row("train", train_scores, train.labels(), bundle.threshold));
    }
    if (test.rows() == 0) throw PipelineError(kExitFailure, "test set is empty");
    const auto scores = bundle_predict(bundle, test);
    rows.push_back(metrics_row("test", scores, test.labels(), bundle.threshold));

    const std::string title = bundle.modality + " " + std::string(model_kind_name(kind));
    write_file(dir / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(o, rows); });
    write_scores_csv(dir / "scores.csv", test, scores, bundle.threshold);
    write_roc(dir, "roc", title + " ROC (test)", scores, test.labels());
    write_text(dir / "confusion.svg",
               svg::confusion_plot(confusion(scores, test.labels(), bundle.threshold), title + " confusion (test)"));
    log("evaluate: " + title + ": test BAcc " + csv::format_g6(rows.back().second.balanced_accuracy) + ", AUC " +
        format_metric(rows.back().second.auc));
}

void cmd_fuse(const RunConfig& config, ModelKind kind, const fs::path& scores_a, const fs::path& scores_b)
{
    const ModalityScores a = read_scores_csv(scores_a.empty() ? model_dir(config, 0, kind) / "scores.csv" : scores_a);
    const ModalityScores b = read_scores_csv(scores_b.empty() ? model_dir(config, 1, kind) / "scores.csv" : scores_b);
    const auto [ca, cb] = align_scores(a, b);
    if (ca.sample_ids.empty()) throw PipelineError(kExitEmptyFusion, "the two modalities share no sample");

    const fs::path dir = config.output_dir / "fusion" / std::string(model_kind_name(kind));
    std::vector<std::pair<std::string, MetricsRow>> rows;
    rows.push_back(metrics_row(config.modalities[0].name, ca.probability, ca.labels, ca.threshold));
    rows.push_back(metrics_row(config.modalities[1].name, cb.probability, cb.labels, cb.threshold));
    for (FusionRule rule : config.rules) {
        const FusedScores fused = fuse_modalities(ca, cb, rule);
        const std::string name(rule_name(rule));
        rows.push_back(metrics_row(name, fused.fused_probability, fused.labels, fused.fused_threshold));
        write_file(dir / ("fused_" + name + ".csv"), [&](std::ostream& o) { write_fused_csv(o, fused); });
        write_text(dir / ("confusion_" + name + ".svg"),
                   svg::confusion_plot(confusion(fused.fused_probability, fused.labels, fused.fused_threshold),
                                       std::string(model_kind_name(kind)) + " " + name + " fusion"));
        write_roc(dir, "roc_" + name, std::string(model_kind_name(kind)) + " " + name + " fusion ROC",
                  fused.fused_probability, fused.labels);
    }
    write_file(dir / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(o, rows); });
    log("fuse: " + std::string(model_kind_name(kind)) + ": " + std::to_string(ca.sample_ids.size()) +
        " common samples, " + std::to_string(config.rules.size()) + " rules");
}

void cmd_report(const RunConfig& config)
{
    bool found = false;
    const fs::path dir = config.output_dir / "report";
    write_file(dir / "metrics.csv", [&](std::ostream& o) {
        csv::write_version_line(o, "metrics");
        csv::Writer w(o);
        std::vector<std::string> header{"model"};
        for (const auto& n : metric_names()) header.push_back(n);
        w.row(header);
        for (ModelKind kind : {ModelKind::LogReg, ModelKind::Forest}) {
            const std::string k(model_kind_name(kind));
            for (std::size_t m = 0; m < 2; ++m) {
                append_metrics(model_dir(config, m, kind) / "metrics.csv", config.modalities[m].name + "/" + k + "/", w,
                               found);
            }
            append_metrics(config.output_dir / "fusion" / k / "metrics.csv", "fusion/" + k + "/", w, found);
        }
    });
    write_file(dir / "univariate.csv", [&](std::ostream& o) {
        csv::write_version_line(o, "univariate-summary");
        csv::Writer w(o);
        w.row({"modality", "features", "alpha", "significant", "up", "down"});
        for (std::size_t m = 0; m < 2; ++m) {
            const fs::path p = modality_dir(config, m) / "univariate_summary.csv";
            if (!fs::exists(p)) continue;
            std::ifstream in(p);
            const auto records = csv::read_records(in);
            for (std::size_t i = 1; i < records.size(); ++i) {
                w.row(records[i]);
                found = true;
            }
        }
    });
    if (!found) throw PipelineError(kExitMissingInput, "nothing to report under " + config.output_dir.string());
    log("report: wrote " + (dir / "metrics.csv").string());
}

void run_all(const RunConfig& config, bool with_synth)
{
    if (with_synth) cmd_synth(config);
    for (std::size_t m = 0; m < 2; ++m) cmd_univariate(config, m);
    for (ModelKind kind : {ModelKind::LogReg, ModelKind::Forest}) {
        for (std::size_t m = 0; m < 2; ++m) {
            cmd_train(config, m, kind);
            cmd_evaluate(config, m, kind);
        }
        cmd_fuse(config, kind);
    }
    cmd_report(config);
}

int exit_code_for(const std::exception& e) noexcept
{
    if (const auto* p = dynamic_cast<const PipelineError*>(&e)) return p->code();
    if (dynamic_cast<const InputError*>(&e)) return kExitMissingInput;
    if (dynamic_cast<const PredictError*>(&e)) return kExitMismatch;
    return kExitFailure;
}

}  // namespace latefusion
