#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "latefusion/config.hpp"
#include "latefusion/error.hpp"
#include "latefusion/fusion.hpp"
#include "latefusion/mrcv.hpp"
#include "latefusion/preprocess.hpp"
#include "latefusion/synth.hpp"
#include "latefusion/table.hpp"

namespace latefusion {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitMissingInput = 2,
    kExitEmptyFeatures = 3,
    kExitMismatch = 4,
    kExitEmptyFusion = 5,
};

class PipelineError : public Error {
public:
    PipelineError(int code, const std::string& message) : Error(message), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

enum class ModelKind { LogReg, Forest };
std::string_view model_kind_name(ModelKind kind) noexcept;  // "lr" / "rf"
ModelKind parse_model_kind(std::string_view text);

struct ModalityConfig {
    std::string name;
    std::filesystem::path path;
};

struct RunConfig {
    std::array<ModalityConfig, 2> modalities;
    TableSchema schema;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    unsigned workers = 0;

    std::string scaler = "benign_per_cohort";  // benign_per_cohort | benign | none
    double max_missing = 0.5;
    double correlation_cutoff = 0.95;

    std::size_t test_benign = 20;
    std::size_t test_malignant = 20;
    std::string test_cohort;
    bool test_common = true;  // draw test patients among ids present in both modalities

    double alpha = 0.05;
    bool significant_only = false;  // restrict model candidates to screen hits

    std::size_t repeats = 100;
    double lr_fraction = 0.3;
    double rf_fraction = 0.2;
    double delta_bic = 2.0;
    ForestGrid grid;

    std::vector<FusionRule> rules{kAllFusionRules.begin(), kAllFusionRules.end()};

    SynthSpec synth_a;
    SynthSpec synth_b;
    bool synth_complementary = false;
};

/// Reads every option; `seed` is mandatory. Throws ConfigError.
RunConfig make_run_config(const Config& config);

/// Train-time preprocessing, replayed verbatim on test tables.
struct Preprocessing {
    std::vector<std::string> input_features;     // features kept after missingness filtering
    std::vector<std::string> dropped_missing;
    std::map<std::string, double> imputation_medians;
    std::vector<RobustScaler> scalers;           // empty when scaling is off
    std::vector<std::string> removed_correlated;
    std::vector<std::string> features;           // final feature set
};

struct Prepared {
    Preprocessing steps;
    FeatureTable table;
};

/// Missingness filter, benign-referenced scaling, correlation pruning.
/// Throws PipelineError(kExitEmptyFeatures) when nothing survives.
Prepared fit_preprocessing(const FeatureTable& train, const RunConfig& config);
/// Throws PipelineError(kExitMismatch) when the table lacks a required feature.
FeatureTable apply_preprocessing(const Preprocessing& steps, const FeatureTable& table);

void to_json(nlohmann::json& j, const Preprocessing& p);
void from_json(const nlohmann::json& j, Preprocessing& p);

/// Loads both modality tables (kExitMissingInput when a file is absent).
std::array<FeatureTable, 2> load_modalities(const RunConfig& config);

/// Test membership per modality: quotas drawn once over the shared ids (or per
/// modality when test_common is off), then matched by sample id and, when a
/// patient column exists, by patient id.
std::array<TrainTest, 2> split_modalities(const std::array<FeatureTable, 2>& tables, const RunConfig& config);

std::filesystem::path modality_dir(const RunConfig& config, std::size_t modality);
std::filesystem::path model_dir(const RunConfig& config, std::size_t modality, ModelKind kind);

// Subcommands. Each writes into config.output_dir and throws PipelineError
// (or another latefusion::Error) on failure.
void cmd_synth(const RunConfig& config);
void cmd_univariate(const RunConfig& config, std::size_t modality);
void cmd_train(const RunConfig& config, std::size_t modality, ModelKind kind);
void cmd_evaluate(const RunConfig& config, std::size_t modality, ModelKind kind,
                  const std::filesystem::path& bundle = {}, const std::filesystem::path& table = {});
void cmd_fuse(const RunConfig& config, ModelKind kind, const std::filesystem::path& scores_a = {},
              const std::filesystem::path& scores_b = {});
void cmd_report(const RunConfig& config);

/// synth (when synth.enabled) -> univariate -> train lr/rf -> evaluate -> fuse -> report.
void run_all(const RunConfig& config, bool with_synth);

/// Maps an exception to the documented process exit code.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace latefusion
