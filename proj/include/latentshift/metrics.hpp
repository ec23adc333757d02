#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "latentshift/classifier.hpp"
#include "latentshift/errors.hpp"

namespace latentshift {

struct ClassifierMetrics {
    double roc_auc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

/// ROC AUC via the rank statistic (Mann-Whitney with average ranks for ties);
/// equivalent to the trapezoidal area over all thresholds.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    }
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l == 1 ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw MetricError("roc_auc: undefined for a single-class cohort (" +
                          std::to_string(n_pos) + " positives, " + std::to_string(n_neg) +
                          " negatives)");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1); // 1-based
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

/// AUC, precision and recall at threshold 0.5, dementia as the positive class.
inline ClassifierMetrics evaluate_classifier(const ClassifierModel& model, const Matrix& x,
                                             const std::vector<int>& labels) {
    if (x.rows() != labels.size()) {
        throw ShapeError("evaluate_classifier: " + std::to_string(x.rows()) + " records vs " +
                         std::to_string(labels.size()) + " labels");
    }
    const Matrix probs = model.predict(x);
    std::vector<double> scores(probs.values().begin(), probs.values().end());

    ClassifierMetrics m;
    m.roc_auc = roc_auc(scores, labels);

    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= 0.5;
        const bool actual = labels[i] == 1;
        if (predicted && actual) ++tp;
        if (predicted && !actual) ++fp;
        if (!predicted && actual) ++fn;
    }
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    return m;
}

} // namespace latentshift
