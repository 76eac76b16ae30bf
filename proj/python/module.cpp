#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "latefusion/config.hpp"
#include "latefusion/error.hpp"
#include "latefusion/forest.hpp"
#include "latefusion/fusion.hpp"
#include "latefusion/logreg.hpp"
#include "latefusion/metrics.hpp"
#include "latefusion/mrcv.hpp"
#include "latefusion/pipeline.hpp"
#include "latefusion/synth.hpp"
#include "latefusion/table.hpp"
#include "latefusion/univariate.hpp"

namespace py = pybind11;
using namespace latefusion;

namespace {

// Labels arrive as 0/1 ints or benign/malignant strings.
std::vector<ClassLabel> to_labels(const py::iterable& items)
{
    std::vector<ClassLabel> out;
    for (const auto& item : items) {
        if (py::isinstance<py::str>(item)) out.push_back(parse_label(item.cast<std::string>()));
        else out.push_back(item.cast<long>() != 0 ? ClassLabel::Malignant : ClassLabel::Benign);
    }
    return out;
}

std::vector<int> from_labels(const std::vector<ClassLabel>& labels)
{
    std::vector<int> out;
    out.reserve(labels.size());
    for (auto l : labels) out.push_back(l == ClassLabel::Malignant ? 1 : 0);
    return out;
}

py::dict metrics_dict(const MetricsRow& m)
{
    py::dict d;
    d["sensitivity"] = m.sensitivity;
    d["specificity"] = m.specificity;
    d["ppv"] = m.ppv ? py::cast(*m.ppv) : py::none();
    d["npv"] = m.npv ? py::cast(*m.npv) : py::none();
    d["f1"] = m.f1;
    d["balanced_accuracy"] = m.balanced_accuracy;
    d["auc"] = m.auc ? py::cast(*m.auc) : py::none();
    return d;
}

FeatureTable table_from_arrays(std::vector<std::string> ids, const py::iterable& labels,
                               std::vector<std::string> features,
                               py::array_t<double, py::array::c_style | py::array::forcecast> values,
                               std::optional<std::vector<std::string>> cohort)
{
    if (values.ndim() != 2) throw DataError("values must be a 2-D array (samples x features)");
    const auto n = static_cast<std::size_t>(values.shape(0)), p = static_cast<std::size_t>(values.shape(1));
    auto v = values.unchecked<2>();
    std::vector<double> cm(n * p);
    std::vector<std::uint8_t> missing(n * p, 0);
    bool any = false;
    for (std::size_t c = 0; c < p; ++c) {
        for (std::size_t r = 0; r < n; ++r) {
            const double x = v(r, c);
            if (std::isnan(x)) {
                missing[c * n + r] = 1;
                any = true;
            } else {
                cm[c * n + r] = x;
            }
        }
    }
    auto cohorts = cohort ? std::move(*cohort) : std::vector<std::string>(n, "default");
    return FeatureTable(std::move(ids), std::move(cohorts), to_labels(labels), std::move(features), std::move(cm),
                        any ? std::move(missing) : std::vector<std::uint8_t>{});
}

py::array_t<double> table_values(const FeatureTable& t)
{
    py::array_t<double> out({t.rows(), t.cols()});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t c = 0; c < t.cols(); ++c) {
            w(r, c) = t.is_missing(r, c) ? std::numeric_limits<double>::quiet_NaN() : t.value(r, c);
        }
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_latefusion, m)
{
    m.doc() = "Two-modality classifier building and late fusion";

    py::register_exception<Error>(m, "LatefusionError", PyExc_RuntimeError);

    py::class_<FeatureTable>(m, "FeatureTable")
        .def(py::init(&table_from_arrays), py::arg("sample_ids"), py::arg("labels"), py::arg("feature_names"),
             py::arg("values"), py::arg("cohort") = py::none(),
             "Build from a samples x features array; NaN marks a missing cell.")
        .def_static(
            "load",
            [](const std::filesystem::path& path, std::string id, std::string cohort, std::string label) {
                TableSchema s;
                s.id_column = std::move(id);
                s.cohort_column = std::move(cohort);
                s.label_column = std::move(label);
                return load_feature_table(path, s);
            },
            py::arg("path"), py::arg("id_column") = "id", py::arg("cohort_column") = "cohort",
            py::arg("label_column") = "label")
        .def("save", [](const FeatureTable& t, const std::filesystem::path& path) { save_feature_table(path, t); })
        .def_property_readonly("rows", &FeatureTable::rows)
        .def_property_readonly("cols", &FeatureTable::cols)
        .def_property_readonly("sample_ids", &FeatureTable::sample_ids)
        .def_property_readonly("feature_names", &FeatureTable::feature_names)
        .def_property_readonly("cohort", &FeatureTable::cohort)
        .def_property_readonly("labels", [](const FeatureTable& t) { return from_labels(t.labels()); })
        .def_property_readonly("values", &table_values)
        .def("select_features", [](const FeatureTable& t, std::vector<std::string> names) {
            return t.select_features(names);
        });

    // statistics
    m.def("shapiro_wilk", [](std::vector<double> x) {
        const auto r = shapiro_wilk(x);
        return py::make_tuple(r.w, r.p);
    }, "Returns (W, p).");
    m.def("mann_whitney", [](std::vector<double> a, std::vector<double> b) {
        const auto r = mann_whitney(a, b);
        return py::make_tuple(r.u, r.p_two_sided, r.exact);
    }, "Returns (U of the first sample, two-sided p, exact).");
    m.def("rank_biserial", [](std::vector<double> mal, std::vector<double> ben) { return rank_biserial(mal, ben); });
    m.def("bh_fdr", [](std::vector<double> p) { return bh_fdr(p); });
    m.def("univariate_screen", [](const FeatureTable& t, double alpha, unsigned workers) {
        const auto r = univariate_screen(t, alpha, workers);
        py::list rows;
        for (const auto& u : r.rows) {
            py::dict d;
            d["feature"] = u.feature;
            d["rg"] = u.rg;
            d["p_value"] = u.p_value;
            d["fdr"] = u.fdr;
            d["normality_p_benign"] = u.normality_p_benign;
            d["normality_p_malignant"] = u.normality_p_malignant;
            d["flag"] = u.flag;
            rows.append(d);
        }
        return rows;
    }, py::arg("table"), py::arg("alpha") = 0.05, py::arg("workers") = 1);

    // metrics
    m.def("auc", [](std::vector<double> s, const py::iterable& l) { return auc(s, to_labels(l)); });
    m.def("confusion", [](std::vector<double> s, const py::iterable& l, double t) {
        const auto c = confusion(s, to_labels(l), t);
        py::dict d;
        d["tp"] = c.tp;
        d["fp"] = c.fp;
        d["tn"] = c.tn;
        d["fn"] = c.fn;
        return d;
    });
    m.def("metrics_from_confusion", [](std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
        return metrics_dict(metrics_from_confusion(Confusion{tp, fp, tn, fn}));
    }, py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));
    m.def("best_threshold_bacc", [](std::vector<double> s, const py::iterable& l) {
        const auto r = best_threshold_bacc(s, to_labels(l));
        return py::make_tuple(r.threshold, r.balanced_accuracy);
    }, "Returns (threshold, balanced accuracy).");
    m.def("roc_curve", [](std::vector<double> s, const py::iterable& l) {
        const auto c = roc_curve(s, to_labels(l));
        std::vector<double> th, fpr, tpr;
        for (const auto& p : c.points) {
            th.push_back(p.threshold);
            fpr.push_back(p.fpr);
            tpr.push_back(p.tpr);
        }
        return py::make_tuple(fpr, tpr, th);
    }, "Returns (fpr, tpr, thresholds).");

    // models
    py::class_<FittedLogReg>(m, "LogisticModel")
        .def_readonly("intercept", &FittedLogReg::intercept)
        .def_readonly("coefficients", &FittedLogReg::coefficients)
        .def_readonly("selected_order", &FittedLogReg::selected_order)
        .def_readonly("log_likelihood", &FittedLogReg::log_likelihood)
        .def_readonly("bic", &FittedLogReg::bic)
        .def_readonly("converged", &FittedLogReg::converged)
        .def_readonly("separation", &FittedLogReg::separation)
        .def("predict_proba", [](const FittedLogReg& model, const FeatureTable& t) { return predict_proba(model, t); })
        .def("to_json", [](const FittedLogReg& model) { return nlohmann::json(model).dump(); });
    m.def("fit_logistic", [](const FeatureTable& t, std::vector<std::string> features) {
        return fit_logistic(t, features);
    });
    m.def("forward_select", [](const FeatureTable& t, std::optional<std::vector<std::string>> candidates,
                               double delta_bic_stop, unsigned workers) {
        return forward_select(t, candidates ? *candidates : t.feature_names(), delta_bic_stop, workers);
    }, py::arg("table"), py::arg("candidates") = py::none(), py::arg("delta_bic_stop") = 2.0, py::arg("workers") = 1);

    py::class_<Forest>(m, "Forest")
        .def_property_readonly("ntree", [](const Forest& f) { return f.trees.size(); })
        .def_property_readonly("feature_names", [](const Forest& f) { return f.feature_names; })
        .def("predict_proba", [](const Forest& f, const FeatureTable& t) { return predict_proba(f, t); })
        .def("oob_predict_proba", [](const Forest& f, const FeatureTable& t) { return oob_predict_proba(f, t); })
        .def("importance", [](const Forest& f, const FeatureTable& t, unsigned workers) {
            py::dict out;
            for (const auto& fi : oob_permutation_importance(f, t, workers).features) {
                out[py::str(fi.feature)] = py::make_tuple(fi.mean_decrease, fi.std_error, fi.normalized);
            }
            return out;
        }, py::arg("table"), py::arg("workers") = 1, "feature -> (mean decrease, SE, normalized)")
        .def("to_json", [](const Forest& f) { return nlohmann::json(f).dump(); });
    m.def("fit_forest", [](const FeatureTable& t, std::size_t mtry, std::size_t ntree, std::size_t min_leaf,
                           std::uint64_t seed, bool weighted, unsigned workers) {
        return fit_forest(t, ForestParams{mtry, ntree, min_leaf, seed, weighted}, workers);
    }, py::arg("table"), py::arg("mtry") = 5, py::arg("ntree") = 500, py::arg("min_leaf") = 1, py::arg("seed") = 0,
       py::arg("weighted") = true, py::arg("workers") = 1);

    // resampling and ranking
    m.def("mrcv_lr", [](const FeatureTable& t, std::size_t repeats, double fraction, std::uint64_t seed,
                        double delta_bic_stop, unsigned workers) {
        MrcvOptions o{repeats, fraction, seed, delta_bic_stop, workers};
        const auto outs = run_mrcv_lr(t, t.feature_names(), o);
        py::list folds;
        for (const auto& f : outs) {
            py::dict d;
            d["ok"] = f.ok;
            d["bacc_train"] = f.bacc_train;
            d["bacc_validation"] = f.bacc_validation;
            d["threshold"] = f.threshold;
            d["selected"] = f.lr_selected_order;
            folds.append(d);
        }
        const auto ranking = rank_features_lr(outs, t.feature_names());
        return py::make_tuple(folds, ranking);
    }, py::arg("table"), py::arg("repeats") = 100, py::arg("fraction") = 0.3, py::arg("seed") = 0,
       py::arg("delta_bic_stop") = 2.0, py::arg("workers") = 1, "Returns (folds, ranking).");
    m.def("elbow_cut", [](FeatureRanking ranking) { return elbow_cut(ranking).selected; });

    // fusion
    m.def("fuse_pair", [](double a, double b, const std::string& rule) { return fuse_pair(a, b, parse_rule(rule)); });
    m.def("fusion_rules", [] {
        std::vector<std::string> out;
        for (auto r : kAllFusionRules) out.emplace_back(rule_name(r));
        return out;
    });

    // synthetic data
    m.def("generate", [](std::size_t n_benign, std::size_t n_malignant, std::size_t n_features,
                         std::vector<std::pair<std::size_t, double>> planted, std::uint64_t seed) {
        SynthSpec s;
        s.n_benign = n_benign;
        s.n_malignant = n_malignant;
        s.n_features = n_features;
        s.seed = seed;
        for (auto [f, shift] : planted) s.planted.push_back({f, shift});
        return generate(s);
    }, py::arg("n_benign") = 100, py::arg("n_malignant") = 100, py::arg("n_features") = 50,
       py::arg("planted") = std::vector<std::pair<std::size_t, double>>{}, py::arg("seed") = 0,
       "planted: list of (0-based feature index, shift in SD units).");

    // whole pipeline
    m.def("run", [](const std::filesystem::path& config, bool synth, std::map<std::string, std::string> overrides) {
        auto c = Config::load(config);
        for (const auto& [k, v] : overrides) c.set(k, v);
        run_all(make_run_config(c), synth);
    }, py::arg("config"), py::arg("synth") = false, py::arg("overrides") = std::map<std::string, std::string>{},
       "Runs every stage for the config file; outputs go to its output directory.");
}
