#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "latefusion/error.hpp"
#include "latefusion/logreg.hpp"

using namespace latefusion;

namespace {

std::vector<ClassLabel> balanced(std::size_t n)
{
    std::vector<ClassLabel> l(n);
    for (std::size_t i = 0; i < n; ++i) l[i] = i % 2 ? ClassLabel::Malignant : ClassLabel::Benign;
    return l;
}

}  // namespace

TEST_SUITE("model_logreg")
{
    TEST_CASE("intercept-only closed form")
    {
        const auto t = fixtures::make_table({std::vector<double>(100, 1.0)}, balanced(100));
        const auto m = fit_logistic(t, {});
        CHECK(std::fabs(m.intercept) <= 1e-12);
        CHECK(m.log_likelihood == doctest::Approx(100 * std::log(0.5)).epsilon(1e-12));
        CHECK(std::fabs(m.bic - (std::log(100.0) - 200 * std::log(0.5))) <= 1e-9);
        CHECK(m.bic == doctest::Approx(143.2346).epsilon(1e-6));
    }

    TEST_CASE("bic identity and score equation")
    {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto t = fixtures::logistic_table(seed, 300, 0.4, {0.8, -0.5, 0.0});
            const std::vector<std::string> f{"x000", "x001", "x002"};
            const auto m = fit_logistic(t, f);
            CHECK(m.converged);
            CHECK(m.bic == doctest::Approx(4 * std::log(300.0) - 2 * m.log_likelihood).epsilon(1e-14));
            const auto p = predict_proba(m, t);
            const double mean_p = std::accumulate(p.begin(), p.end(), 0.0) / p.size();
            const double rate = static_cast<double>(t.count(ClassLabel::Malignant)) / t.rows();
            CHECK(std::fabs(mean_p - rate) <= 1e-6);
        }
    }

    TEST_CASE("planted coefficients are recovered at n = 5000")
    {
        const auto t = fixtures::logistic_table(42, 5000, 0.0, {1.5, -2.0});
        const std::vector<std::string> f{"x000", "x001"};
        const auto m = fit_logistic(t, f);
        CHECK(std::fabs(m.coefficient("x000") - 1.5) <= 0.1);
        CHECK(std::fabs(m.coefficient("x001") + 2.0) <= 0.1);
        CHECK(!m.separation);
    }

    TEST_CASE("analytic gradient matches finite differences")
    {
        const auto t = fixtures::logistic_table(5, 400, -0.3, {1.0, 0.5});
        const std::vector<std::string> f{"x000", "x001"};
        const auto m = fit_logistic(t, f);
        const std::vector<double> at_fit{m.coefficient("x000"), m.coefficient("x001")};
        const auto g_fit = logistic_gradient(t, f, m.intercept, at_fit);
        for (double g : g_fit) CHECK(std::fabs(g) <= 1e-6);

        // Away from the optimum the gradient is large enough for a relative check.
        const double b0 = m.intercept + 0.3;
        const std::vector<double> beta{at_fit[0] - 0.4, at_fit[1] + 0.2};
        const auto g = logistic_gradient(t, f, b0, beta);
        const double h = 1e-5;
        auto ll = [&](double i0, std::vector<double> b) { return logistic_log_likelihood(t, f, i0, b); };
        const double fd0 = (ll(b0 + h, beta) - ll(b0 - h, beta)) / (2 * h);
        CHECK(std::fabs(g[0] - fd0) <= 1e-5 * std::fabs(fd0));
        for (std::size_t k = 0; k < 2; ++k) {
            auto up = beta, dn = beta;
            up[k] += h;
            dn[k] -= h;
            const double fd = (ll(b0, up) - ll(b0, dn)) / (2 * h);
            CHECK(std::fabs(g[k + 1] - fd) <= 1e-5 * std::fabs(fd));
        }
    }

    TEST_CASE("nested fits never lose likelihood")
    {
        const auto t = fixtures::logistic_table(9, 250, 0.2, {0.7, 0.0, -0.4, 0.1});
        std::vector<std::string> f;
        double prev = fit_logistic(t, f).log_likelihood;
        for (const auto& name : t.feature_names()) {
            f.push_back(name);
            const double ll = fit_logistic(t, f).log_likelihood;
            CHECK(ll >= prev - 1e-8);
            prev = ll;
        }
    }

    TEST_CASE("separation is detected and capped")
    {
        const auto labels = balanced(60);
        std::vector<double> x(60);
        for (std::size_t i = 0; i < 60; ++i) x[i] = labels[i] == ClassLabel::Malignant ? 1.0 : 0.0;
        const auto t = fixtures::make_table({x}, labels);
        FitOptions quiet;
        quiet.warnings = false;
        const auto m = fit_logistic(t, std::vector<std::string>{"x000"}, quiet);
        CHECK(m.separation);
        CHECK(std::isfinite(m.coefficient("x000")));
        const auto p = predict_proba(m, t);
        for (std::size_t i = 0; i < 60; ++i) CHECK((p[i] >= 0.5) == (labels[i] == ClassLabel::Malignant));
    }

    TEST_CASE("singular design and bad inputs")
    {
        const auto labels = balanced(40);
        Rng rng(3);
        std::vector<double> a(40), b(40);
        for (std::size_t i = 0; i < 40; ++i) {
            a[i] = rng.normal();
            b[i] = 2 * a[i];
        }
        const auto t = fixtures::make_table({a, b}, labels);
        CHECK_THROWS_AS(fit_logistic(t, std::vector<std::string>{"x000", "x001"}), ModelError);
        CHECK_THROWS_AS(fit_logistic(t, std::vector<std::string>{"nope"}), Error);

        const auto one_class = fixtures::make_table({a}, std::vector<ClassLabel>(40, ClassLabel::Benign));
        CHECK_THROWS_AS(fit_logistic(one_class, {}), ModelError);
    }

    TEST_CASE("prediction examples")
    {
        FittedLogReg m;
        const auto t = fixtures::logistic_table(1, 10, 0, {1.0});
        for (double p : predict_proba(m, t)) CHECK(p == 0.5);
        m.intercept = std::log(3.0);
        for (double p : predict_proba(m, t)) CHECK(p == doctest::Approx(0.75).epsilon(1e-15));
        m.coefficients["x000"] = 0.8;
        const auto p = predict_proba(m, t);
        for (std::size_t i = 0; i < t.rows(); ++i) {
            for (std::size_t j = 0; j < t.rows(); ++j) {
                if (t.value(i, 0) > t.value(j, 0)) CHECK(p[i] > p[j]);
            }
        }
        m.coefficients["absent"] = 1.0;
        CHECK_THROWS_AS(predict_proba(m, t), PredictError);
    }

    TEST_CASE("forward selection picks the planted feature")
    {
        std::vector<double> beta(21, 0.0);
        beta[7] = 1.5;
        const auto t = fixtures::logistic_table(77, 200, 0.0, beta);
        const auto m = forward_select(t, t.feature_names(), 2.0);
        REQUIRE(!m.selected_order.empty());
        CHECK(m.selected_order.front() == "x007");
        CHECK(m.selected_order.size() == m.coefficients.size());
        CHECK(m.bic == doctest::Approx((1 + m.coefficients.size()) * std::log(200.0) - 2 * m.log_likelihood));
    }

    TEST_CASE("forward selection stops immediately with an infinite threshold")
    {
        const auto t = fixtures::logistic_table(78, 200, 0.0, {2.0, 0.0});
        const auto m = forward_select(t, t.feature_names(), std::numeric_limits<double>::infinity());
        CHECK(m.selected_order.empty());
        CHECK(m.coefficients.empty());
    }

    TEST_CASE("forward selection is independent of worker count")
    {
        std::vector<double> beta(12, 0.0);
        beta[2] = 0.9;
        beta[9] = -0.6;
        const auto t = fixtures::logistic_table(81, 300, 0.1, beta);
        const auto a = forward_select(t, t.feature_names(), 2.0, 1);
        const auto b = forward_select(t, t.feature_names(), 2.0, 4);
        CHECK(a.selected_order == b.selected_order);
        CHECK(a.coefficients == b.coefficients);
        CHECK(a.bic == b.bic);
    }

    TEST_CASE("json round trip")
    {
        const auto t = fixtures::logistic_table(4, 120, 0.3, {0.9, -0.2});
        const auto m = fit_logistic(t, std::vector<std::string>{"x000", "x001"});
        nlohmann::json j = m;
        const auto back = j.get<FittedLogReg>();
        CHECK(back.intercept == m.intercept);
        CHECK(back.coefficients == m.coefficients);
        CHECK(back.selected_order == m.selected_order);
        CHECK(back.bic == m.bic);
        CHECK(back.n_train == m.n_train);
        CHECK(predict_proba(back, t) == predict_proba(m, t));
        j["version"] = 99;
        CHECK_THROWS(j.get<FittedLogReg>());
    }
}
