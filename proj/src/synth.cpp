#include "latefusion/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "latefusion/error.hpp"
#include "latefusion/rng.hpp"

namespace latefusion {

namespace {

std::string numbered(const std::string& prefix, std::size_t i, std::size_t total)
{
    int width = 1;
    for (std::size_t t = total; t >= 10; t /= 10) ++width;
    width = std::max(width, 3);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*zu", width, i);
    return prefix + buf;
}

void validate(const SynthSpec& spec)
{
    if (spec.n_features == 0) throw DataError("synthetic spec needs at least one feature");
    for (const auto& p : spec.planted) {
        if (p.feature >= spec.n_features) throw DataError("planted feature index out of range");
    }
    std::size_t used = 0;
    for (const auto& b : spec.correlation_blocks) {
        if (!(b.rho >= 0.0 && b.rho < 1.0)) throw DataError("block correlation must lie in [0, 1)");
        used += b.size;
    }
    if (used > spec.n_features) throw DataError("correlation blocks exceed the feature count");
    if (!(spec.common_fraction >= 0.0 && spec.common_fraction <= 1.0)) {
        throw DataError("common_fraction must lie in [0, 1]");
    }
}

// One row per entry of `labels`; `shifted[r]` enables the planted offsets.
FeatureTable build(const SynthSpec& spec, std::vector<std::string> ids, std::vector<ClassLabel> labels,
                   const std::vector<bool>& shifted, std::uint64_t seed)
{
    const std::size_t n = ids.size(), p = spec.n_features;
    std::vector<double> shift(p, 0.0);
    for (const auto& pl : spec.planted) shift[pl.feature] += pl.shift;

    Rng rng(seed);
    std::vector<double> values(n * p);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t f = 0;
        for (const auto& block : spec.correlation_blocks) {
            const double latent = rng.normal();
            const double a = std::sqrt(block.rho), b = std::sqrt(1.0 - block.rho);
            for (std::size_t k = 0; k < block.size; ++k, ++f) values[f * n + r] = a * latent + b * rng.normal();
        }
        for (; f < p; ++f) values[f * n + r] = rng.normal();
        if (shifted[r]) {
            for (std::size_t c = 0; c < p; ++c) values[c * n + r] += shift[c];
        }
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < p; ++c) names.push_back(numbered(spec.feature_prefix, c + 1, p));
    std::vector<std::string> cohort(n, spec.cohort);
    return FeatureTable(std::move(ids), std::move(cohort), std::move(labels), std::move(names), std::move(values));
}

}  // namespace

FeatureTable generate(const SynthSpec& spec)
{
    validate(spec);
    const std::size_t n = spec.n_benign + spec.n_malignant;
    std::vector<std::string> ids;
    std::vector<ClassLabel> labels;
    std::vector<bool> shifted;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(numbered(spec.id_prefix, i + 1, n));
        const bool malignant = i >= spec.n_benign;
        labels.push_back(malignant ? ClassLabel::Malignant : ClassLabel::Benign);
        shifted.push_back(malignant);
    }
    return build(spec, std::move(ids), std::move(labels), shifted, spec.seed);
}

ModalityPair generate_pair(const SynthSpec& a, const SynthSpec& b, bool complementary)
{
    validate(a);
    validate(b);
    const std::size_t n = a.n_benign + a.n_malignant;

    struct Rows {
        std::vector<std::string> ids;
        std::vector<ClassLabel> labels;
        std::vector<bool> shifted;
    } ra, rb;

    std::size_t shared_counter = 0, own_a = 0, own_b = 0;
    for (ClassLabel label : {ClassLabel::Benign, ClassLabel::Malignant}) {
        const std::size_t count = label == ClassLabel::Benign ? a.n_benign : a.n_malignant;
        const auto shared = static_cast<std::size_t>(std::llround(a.common_fraction * static_cast<double>(count)));
        for (std::size_t j = 0; j < count; ++j) {
            const bool malignant = label == ClassLabel::Malignant;
            const bool shift_a = malignant && (!complementary || j % 2 == 0);
            const bool shift_b = malignant && (!complementary || j % 2 == 1);
            if (j < shared) {
                const std::string id = numbered(a.id_prefix, ++shared_counter, n);
                ra.ids.push_back(id);
                rb.ids.push_back(id);
            } else {
                ra.ids.push_back(numbered(a.id_prefix + "A", ++own_a, n));
                rb.ids.push_back(numbered(a.id_prefix + "B", ++own_b, n));
            }
            ra.labels.push_back(label);
            rb.labels.push_back(label);
            ra.shifted.push_back(shift_a);
            rb.shifted.push_back(shift_b);
        }
    }
    ModalityPair out;
    out.a = build(a, std::move(ra.ids), std::move(ra.labels), ra.shifted, derive_seed(a.seed, 1));
    out.b = build(b, std::move(rb.ids), std::move(rb.labels), rb.shifted, derive_seed(a.seed, 2));
    return out;
}

}  // namespace latefusion
