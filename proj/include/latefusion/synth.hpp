#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "latefusion/table.hpp"

namespace latefusion {

struct PlantedShift {
    std::size_t feature = 0;
    double shift = 0.0;  // malignant mean offset in noise SD units
};

/// Consecutive features sharing one latent factor with pairwise correlation rho.
/// Blocks are laid out from feature 0 in the order given.
struct CorrelationBlock {
    std::size_t size = 0;
    double rho = 0.0;
};

struct SynthSpec {
    std::size_t n_benign = 100;
    std::size_t n_malignant = 100;
    std::size_t n_features = 50;
    std::vector<PlantedShift> planted;
    std::vector<CorrelationBlock> correlation_blocks;
    double common_fraction = 1.0;  // share of each class present in both modalities (pairs only)
    std::uint64_t seed = 0;
    std::string cohort = "SYNTH";
    std::string id_prefix = "S";
    std::string feature_prefix = "f";
};

/// Benign rows first, then malignant. Standard normal noise, planted features
/// shifted for malignant rows. Throws DataError on an invalid spec.
FeatureTable generate(const SynthSpec& spec);

struct ModalityPair {
    FeatureTable a;
    FeatureTable b;
};

/// Two modalities over one patient population. Class sizes and
/// common_fraction come from `a`; `b` supplies its own features, shifts and
/// blocks. round(common_fraction * n_c) patients per class appear in both
/// tables under the same id; the rest are modality-specific.
/// With `complementary`, the planted shifts of `a` apply only to even-indexed
/// malignant patients and those of `b` only to odd-indexed ones.
ModalityPair generate_pair(const SynthSpec& a, const SynthSpec& b, bool complementary = false);

}  // namespace latefusion
