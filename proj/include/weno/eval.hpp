#pragma once

// Evaluation: AUC over scored sets, instance- and bag-level evaluation for
// both model branches, and the per-instance score-grid CSV export. All
// functions here are read-only with respect to the parameter store.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "weno/dataset.hpp"
#include "weno/model.hpp"
#include "weno/params.hpp"

namespace weno {

// Area under the ROC curve as the Mann-Whitney statistic: over all
// (positive, negative) pairs, the fraction where the positive scores
// higher, counting ties as one half. Computed from average ranks in
// O(n log n); the numerator is assembled in integer arithmetic so the
// result is bit-identical to the brute-force pairwise count.
template <typename T>
double auc(const std::vector<T>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores and labels differ in length");
    long pos = 0;
    long neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw std::invalid_argument("auc: labels must be 0 or 1");
        if (!std::isfinite(static_cast<double>(scores[i])))
            throw std::invalid_argument("auc: non-finite score");
        if (labels[i] == 1)
            ++pos;
        else
            ++neg;
    }
    if (pos == 0) throw std::invalid_argument("auc: no positive examples in scored set");
    if (neg == 0) throw std::invalid_argument("auc: no negative examples in scored set");

    std::vector<std::pair<T, int>> order(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) order[i] = {scores[i], labels[i]};
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Walk tie groups in ascending score order. Each positive in a group
    // beats every negative strictly below it (worth 2 in the doubled
    // numerator) and ties with the negatives inside its own group (worth 1).
    unsigned long long numerator2 = 0;
    unsigned long long neg_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        unsigned long long group_pos = 0;
        unsigned long long group_neg = 0;
        while (j < order.size() && !(order[i].first < order[j].first)) {
            if (order[j].second == 1)
                ++group_pos;
            else
                ++group_neg;
            ++j;
        }
        numerator2 += group_pos * (2 * neg_below + group_neg);
        neg_below += group_neg;
        i = j;
    }
    return static_cast<double>(numerator2) /
           (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// Which score drives instance-level evaluation.
enum class InstanceScoreMode { student, teacher_attention };
// Which score drives bag-level evaluation.
enum class BagScoreMode { teacher, student_maxpool };

// Per-bag forward passes (no gradients). The store is taken by non-const
// reference because the tape binds parameters through it, but nothing is
// modified.
std::vector<float> student_instance_scores(ParameterStore<float>& store, const ModelConfig& config,
                                           const Bag& bag);
// Raw attention weights (softmax over the bag's instances).
std::vector<float> teacher_attention_weights(ParameterStore<float>& store,
                                             const ModelConfig& config, const Bag& bag);
// Attention weights min-max normalized within the bag; degenerate bags
// (all weights equal) map to 0.5. Applied uniformly to every bag.
std::vector<float> teacher_attention_instance_scores(ParameterStore<float>& store,
                                                     const ModelConfig& config, const Bag& bag);
// Teacher bag positive probability (attention-weighted feature + bag head).
float teacher_bag_probability(ParameterStore<float>& store, const ModelConfig& config,
                              const Bag& bag);
// Student bag score: max over the bag's instance predictions.
float student_bag_score(ParameterStore<float>& store, const ModelConfig& config, const Bag& bag);

// AUC of per-instance scores against instance ground truth over a split.
double evaluate_instance_level(const std::vector<Bag>& split, ParameterStore<float>& store,
                               const ModelConfig& config, InstanceScoreMode mode);
// AUC of per-bag scores against bag labels over a split.
double evaluate_bag_level(const std::vector<Bag>& split, ParameterStore<float>& store,
                          const ModelConfig& config, BagScoreMode mode);

// One exported score row per instance.
struct ScoreRow {
    long instance_id = 0;
    int true_label = 0;
    float student_score = 0.0f;
    float teacher_attention_score = 0.0f;
};

// Scores every instance of every bag with both branches; rows are sorted
// by instance id ascending.
std::vector<ScoreRow> score_grid(const std::vector<Bag>& bags, ParameterStore<float>& store,
                                 const ModelConfig& config);

// Writes the score grid as UTF-8 CSV (header row, 9 significant digits,
// sorted by instance id). The write is atomic.
void export_scores(const std::vector<Bag>& bags, ParameterStore<float>& store,
                   const ModelConfig& config, const std::string& path);

}  // namespace weno
