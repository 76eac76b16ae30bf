#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latefusion/config.hpp"
#include "latefusion/pipeline.hpp"

using namespace latefusion;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
    std::string seed;
    int workers = -1;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("-c,--config", c.config_path, "Run configuration file")->required();
    app->add_option("--set", c.overrides, "Override a config key (key=value), repeatable");
    app->add_option("-o,--output", c.output, "Output directory");
    app->add_option("--seed", c.seed, "Base seed");
    app->add_option("-j,--workers", c.workers, "Worker threads (0 = all cores)");
}

RunConfig resolve(const Common& c)
{
    Config cfg = Config::load(c.config_path);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!c.output.empty()) cfg.set("output", c.output);
    if (!c.seed.empty()) cfg.set("seed", c.seed);
    if (c.workers >= 0) cfg.set("workers", std::to_string(c.workers));
    return make_run_config(cfg);
}

std::vector<std::size_t> modalities_for(const RunConfig& config, const std::string& which)
{
    if (which.empty() || which == "both") return {0, 1};
    for (std::size_t m = 0; m < 2; ++m) {
        if (which == config.modalities[m].name || which == (m == 0 ? "a" : "b")) return {m};
    }
    throw ConfigError("unknown modality '" + which + "'");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-modality classifier building and late fusion"};
    app.require_subcommand(1);

    Common common;
    std::string modality, model = "lr", bundle, table, scores_a, scores_b;
    bool with_synth = false;

    auto* synth = app.add_subcommand("synth", "Write synthetic two-modality tables to the configured input paths");
    add_common(synth, common);

    auto* univariate = app.add_subcommand("univariate", "Univariate screen of each modality's training set");
    add_common(univariate, common);
    univariate->add_option("-m,--modality", modality, "Modality name (default both)");

    auto* train = app.add_subcommand("train", "MRCV, ranking, elbow selection and final model fit");
    add_common(train, common);
    train->add_option("model", model, "lr or rf")->required()->check(CLI::IsMember({"lr", "rf"}));
    train->add_option("-m,--modality", modality, "Modality name (default both)");

    auto* evaluate = app.add_subcommand("evaluate", "Apply a trained model to the test set");
    add_common(evaluate, common);
    evaluate->add_option("model", model, "lr or rf")->required()->check(CLI::IsMember({"lr", "rf"}));
    evaluate->add_option("-m,--modality", modality, "Modality name (default both)");
    evaluate->add_option("--bundle", bundle, "Model bundle (default from the output directory)");
    evaluate->add_option("--table", table, "Evaluate on every row of this table instead of the test split");

    auto* fuse = app.add_subcommand("fuse", "Late fusion of the two modalities' test scores");
    add_common(fuse, common);
    fuse->add_option("model", model, "lr or rf")->required()->check(CLI::IsMember({"lr", "rf"}));
    fuse->add_option("--scores-a", scores_a, "Scores CSV of the first modality");
    fuse->add_option("--scores-b", scores_b, "Scores CSV of the second modality");

    auto* report = app.add_subcommand("report", "Collect metric rows into one report");
    add_common(report, common);

    auto* run = app.add_subcommand("run", "Every stage in order");
    add_common(run, common);
    run->add_flag("--synth", with_synth, "Generate the synthetic inputs first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const RunConfig config = resolve(common);
        if (synth->parsed()) {
            cmd_synth(config);
        } else if (univariate->parsed()) {
            for (auto m : modalities_for(config, modality)) cmd_univariate(config, m);
        } else if (train->parsed()) {
            for (auto m : modalities_for(config, modality)) cmd_train(config, m, parse_model_kind(model));
        } else if (evaluate->parsed()) {
            const auto ms = modalities_for(config, modality);
            if ((!bundle.empty() || !table.empty()) && ms.size() != 1) {
                throw ConfigError("--bundle and --table need a single --modality");
            }
            for (auto m : ms) cmd_evaluate(config, m, parse_model_kind(model), bundle, table);
        } else if (fuse->parsed()) {
            cmd_fuse(config, parse_model_kind(model), scores_a, scores_b);
        } else if (report->parsed()) {
            cmd_report(config);
        } else if (run->parsed()) {
            run_all(config, with_synth);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
    return 0;
}
