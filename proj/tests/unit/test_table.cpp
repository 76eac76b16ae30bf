#include <doctest.h>

#include <sstream>

#include "latefusion/error.hpp"
#include "latefusion/rng.hpp"
#include "latefusion/synth.hpp"
#include "latefusion/table.hpp"

using namespace latefusion;

namespace {

// Label follows the id: a trailing odd digit means malignant.
FeatureTable small_table(std::vector<std::string> ids, bool flip = false)
{
    const std::size_t n = ids.size();
    std::vector<ClassLabel> labels;
    std::vector<double> values;
    for (const auto& id : ids) {
        const bool odd = (id.back() - '0') % 2 == 1;
        labels.push_back(odd != flip ? ClassLabel::Malignant : ClassLabel::Benign);
    }
    for (std::size_t i = 0; i < 2 * n; ++i) values.push_back(static_cast<double>(i) * 0.5);
    return FeatureTable(ids, std::vector<std::string>(n, "C"), labels, {"f1", "f2"}, values);
}

}  // namespace

TEST_SUITE("data_model")
{
    TEST_CASE("load a three-row table")
    {
        std::istringstream in("id,cohort,label,f1,f2\nS1,A,benign,1,2\nS2,A,MALIGNANT,3,NA\nS3,B,1,5,\n");
        const auto t = read_feature_table(in);
        CHECK(t.rows() == 3);
        CHECK(t.cols() == 2);
        CHECK(t.labels()[1] == ClassLabel::Malignant);
        CHECK(t.labels()[2] == ClassLabel::Malignant);
        CHECK(t.is_missing(1, 1));
        CHECK(t.is_missing(2, 1));
        CHECK_FALSE(t.is_missing(0, 1));
        CHECK(t.value(2, 0) == 5.0);
    }

    TEST_CASE("label parsing is case-insensitive over the synonym set")
    {
        CHECK(parse_label("Malignant") == ClassLabel::Malignant);
        CHECK(parse_label("mAlIgNaNt") == ClassLabel::Malignant);
        CHECK(parse_label("0") == ClassLabel::Benign);
        CHECK(parse_label("BENIGN") == ClassLabel::Benign);
        CHECK_THROWS_AS(parse_label("tumour"), DataError);
    }

    TEST_CASE("ingestion errors")
    {
        std::istringstream dup("id,cohort,label,f1\nS1,A,benign,1\nS1,A,benign,2\n");
        CHECK_THROWS_AS(read_feature_table(dup), DataError);
        std::istringstream ragged("id,cohort,label,f1\nS1,A,benign,1,7\n");
        CHECK_THROWS_AS(read_feature_table(ragged), DataError);
        std::istringstream label("id,cohort,label,f1\nS1,A,unknown,1\n");
        CHECK_THROWS_AS(read_feature_table(label), DataError);
        CHECK_THROWS_AS(load_feature_table("/nonexistent/table.csv"), InputError);
    }

    TEST_CASE("non-numeric feature cells become missing")
    {
        std::istringstream in("id,cohort,label,f1\nS1,A,benign,abc\nS2,A,benign,2\n");
        const auto t = read_feature_table(in);
        CHECK(t.is_missing(0, 0));
    }

    TEST_CASE("round trip is bit-identical")
    {
        SynthSpec spec;
        spec.n_benign = 20;
        spec.n_malignant = 15;
        spec.n_features = 6;
        spec.seed = 9;
        const auto t = generate(spec);
        std::ostringstream out;
        write_feature_table(out, t);
        std::istringstream in(out.str());
        const auto back = read_feature_table(in);
        CHECK(back.sample_ids() == t.sample_ids());
        CHECK(back.feature_names() == t.feature_names());
        CHECK(back.labels() == t.labels());
        CHECK(back.raw_values() == t.raw_values());
        std::ostringstream again;
        write_feature_table(again, back);
        CHECK(again.str() == out.str());
        CHECK(out.str().rfind("# latefusion-csv v1", 0) == 0);
    }

    TEST_CASE("align common samples")
    {
        const auto a = small_table({"S1", "S2", "S3"});
        const auto b = small_table({"S4", "S3", "S2"});
        auto [ra, rb] = align_common_samples(a, b);
        CHECK(ra.sample_ids() == std::vector<std::string>{"S2", "S3"});
        CHECK(rb.sample_ids() == std::vector<std::string>{"S2", "S3"});

        auto [sa, sb] = align_common_samples(b, a);
        std::vector<std::string> x = sa.sample_ids(), y = ra.sample_ids();
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        CHECK(x == y);

        const auto d = small_table({"X1", "X2"});
        auto [ea, eb] = align_common_samples(a, d);
        CHECK(ea.rows() == 0);
        CHECK(eb.rows() == 0);
        CHECK(ea.cols() == 2);
    }

    TEST_CASE("align rejects conflicting labels")
    {
        const auto a = small_table({"S1", "S2"});
        const auto b = small_table({"S2", "S1"}, true);
        CHECK_THROWS_AS(align_common_samples(a, b), DataError);
    }

    TEST_CASE("partition is lossless and order preserving")
    {
        std::vector<std::string> ids;
        for (int i = 0; i < 10; ++i) ids.push_back("S" + std::to_string(i));
        const auto t = small_table(ids);
        const auto parts = partition(t, SplitSpec{{"S7", "S1", "S3", "S9"}, 0});
        CHECK(parts.train.rows() == 6);
        CHECK(parts.test.rows() == 4);
        CHECK(parts.test.sample_ids() == std::vector<std::string>{"S1", "S3", "S7", "S9"});
        const auto whole = concat_rows(parts.train, parts.test);
        std::vector<std::string> all = whole.sample_ids();
        std::sort(all.begin(), all.end());
        std::vector<std::string> expected = ids;
        std::sort(expected.begin(), expected.end());
        CHECK(all == expected);

        const auto same = partition(t, SplitSpec{});
        CHECK(same.train.sample_ids() == t.sample_ids());
        CHECK(same.train.raw_values() == t.raw_values());
        CHECK_THROWS_AS(partition(t, SplitSpec{{"nope"}, 0}), DataError);
    }

    TEST_CASE("quota split at a 4569/440 shape")
    {
        SynthSpec spec;
        spec.n_benign = 4569 + 122;
        spec.n_malignant = 440 + 49;
        spec.n_features = 2;
        spec.seed = 4;
        const auto t = generate(spec);
        std::vector<TestQuota> quotas{{"", ClassLabel::Benign, 122, false}, {"", ClassLabel::Malignant, 49, false}};
        const auto split = draw_test_split(t, quotas, 77);
        const auto parts = partition(t, split);
        CHECK(parts.train.count(ClassLabel::Benign) == 4569);
        CHECK(parts.train.count(ClassLabel::Malignant) == 440);
        CHECK(parts.train.rows() == 5009);
        CHECK(parts.test.rows() == 171);
        CHECK(draw_test_split(t, quotas, 77).test_sample_ids == split.test_sample_ids);
    }

    TEST_CASE("rng streams are reproducible")
    {
        Rng a(derive_seed(1, 2)), b(derive_seed(1, 2)), c(derive_seed(1, 3));
        for (int i = 0; i < 10; ++i) {
            const auto x = a.next();
            CHECK(x == b.next());
            CHECK(x != c.next());
        }
    }
}
