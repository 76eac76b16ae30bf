#include <doctest.h>

#include <cmath>
#include <set>

#include "latefusion/error.hpp"
#include "latefusion/mrcv.hpp"
#include "latefusion/preprocess.hpp"
#include "latefusion/synth.hpp"

using namespace latefusion;

TEST_SUITE("synth")
{
    TEST_CASE("shape, names and determinism")
    {
        SynthSpec s;
        s.n_benign = 7;
        s.n_malignant = 5;
        s.n_features = 4;
        s.seed = 3;
        const auto t = generate(s);
        CHECK(t.rows() == 12);
        CHECK(t.cols() == 4);
        CHECK(t.feature_names()[0] == "f001");
        CHECK(t.count(ClassLabel::Benign) == 7);
        CHECK(t.labels().front() == ClassLabel::Benign);
        CHECK(t.labels().back() == ClassLabel::Malignant);
        CHECK(generate(s).raw_values() == t.raw_values());
        s.seed = 4;
        CHECK(generate(s).raw_values() != t.raw_values());
    }

    TEST_CASE("planted class means")
    {
        SynthSpec s;
        s.n_benign = 2000;
        s.n_malignant = 2000;
        s.n_features = 3;
        s.seed = 8;
        s.planted.push_back({1, 1.25});
        const auto t = generate(s);
        for (std::size_t c = 0; c < 3; ++c) {
            double mb = 0, mm = 0;
            for (double v : t.observed(c, ClassLabel::Benign)) mb += v;
            for (double v : t.observed(c, ClassLabel::Malignant)) mm += v;
            mb /= 2000;
            mm /= 2000;
            const double expected = c == 1 ? 1.25 : 0.0;
            CHECK(std::fabs(mb) <= 4 / std::sqrt(2000.0));
            CHECK(std::fabs(mm - expected) <= 4 / std::sqrt(2000.0));
        }
    }

    TEST_CASE("correlation blocks")
    {
        SynthSpec s;
        s.n_benign = 1500;
        s.n_malignant = 1500;
        s.n_features = 6;
        s.seed = 10;
        s.correlation_blocks.push_back({3, 0.8});
        const auto t = generate(s);
        const auto r = spearman_matrix(t);
        // Spearman of a bivariate normal with Pearson 0.8 is (6/pi) asin(0.4).
        const double expected = 6 / M_PI * std::asin(0.4);
        CHECK(std::fabs(r.at(0, 1) - expected) <= 0.05);
        CHECK(std::fabs(r.at(1, 2) - expected) <= 0.05);
        CHECK(std::fabs(r.at(0, 4)) <= 0.08);
    }

    TEST_CASE("invalid specs throw")
    {
        SynthSpec s;
        s.n_features = 3;
        s.planted.push_back({3, 1.0});
        CHECK_THROWS_AS(generate(s), DataError);
        SynthSpec c;
        c.n_features = 3;
        c.correlation_blocks.push_back({4, 0.5});
        CHECK_THROWS_AS(generate(c), DataError);
        SynthSpec f;
        f.common_fraction = 1.5;
        CHECK_THROWS_AS(generate_pair(f, f, false), DataError);
    }

    TEST_CASE("strong imbalance splits proportionally")
    {
        SynthSpec s;
        s.n_benign = 4569;
        s.n_malignant = 440;
        s.n_features = 5;
        s.seed = 12;
        const auto t = generate(s);
        const auto split = stratified_split(t, 0.3, 1);
        CHECK(split.validation.count(ClassLabel::Benign) == 1371);
        CHECK(split.validation.count(ClassLabel::Malignant) == 132);
    }

    TEST_CASE("modality pairs share a common subset")
    {
        SynthSpec a;
        a.n_benign = 50;
        a.n_malignant = 40;
        a.n_features = 6;
        a.common_fraction = 0.6;
        a.seed = 21;
        a.planted.push_back({0, 1.0});
        SynthSpec b = a;
        b.n_features = 4;
        b.feature_prefix = "g";
        const auto pair = generate_pair(a, b, true);
        CHECK(pair.a.rows() == 90);
        CHECK(pair.b.rows() == 90);
        std::set<std::string> ia(pair.a.sample_ids().begin(), pair.a.sample_ids().end());
        std::size_t shared = 0;
        for (const auto& id : pair.b.sample_ids()) shared += ia.count(id);
        CHECK(shared == 30 + 24);
        const auto [ca, cb] = align_common_samples(pair.a, pair.b);
        CHECK(ca.labels() == cb.labels());
        CHECK(pair.b.feature_names()[0] == "g001");
    }
}
