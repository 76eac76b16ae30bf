#pragma once

#include <string>

#include "latefusion/metrics.hpp"
#include "latefusion/mrcv.hpp"

namespace latefusion::svg {

// Fixed 480x400 canvas; every number is printed with 6 significant digits so
// identical inputs give byte-identical documents.

std::string roc_plot(const RocCurve& curve, double auc_value, const std::string& title);

/// Index vs score with the kept prefix highlighted and the cut marked.
std::string elbow_plot(const FeatureRanking& ranking, std::size_t selected_count, const std::string& title);

/// 2x2 heatmap, rows = actual (Malignant, Benign), columns = predicted.
std::string confusion_plot(const Confusion& c, const std::string& title);

}  // namespace latefusion::svg
