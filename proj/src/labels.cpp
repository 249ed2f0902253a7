#include "weno/labels.hpp"

#include <algorithm>

namespace weno {

PseudoLabelSet make_pseudo_labels(const Bag& bag, const std::vector<float>* attention,
                                  long source_epoch, const std::vector<long>* surviving) {
    PseudoLabelSet set;
    set.bag_id = bag.bag_id;
    set.source_epoch = source_epoch;

    const long n = static_cast<long>(bag.instances.size());
    if (bag.label == 0) {
        set.provenance = PseudoLabelSet::Provenance::negative_bag;
        set.instance_indices.resize(static_cast<std::size_t>(n));
        for (long j = 0; j < n; ++j) set.instance_indices[static_cast<std::size_t>(j)] = j;
        set.labels.assign(static_cast<std::size_t>(n), 0.0f);
        return set;
    }

    if (attention == nullptr)
        throw std::invalid_argument("pseudo labels for positive bag " +
                                    std::to_string(bag.bag_id) +
                                    " require attention weights");
    set.provenance = PseudoLabelSet::Provenance::normalized_attention;
    if (surviving) {
        set.instance_indices = *surviving;
    } else {
        set.instance_indices.resize(static_cast<std::size_t>(n));
        for (long j = 0; j < n; ++j) set.instance_indices[static_cast<std::size_t>(j)] = j;
    }
    for (long idx : set.instance_indices)
        if (idx < 0 || idx >= n)
            throw std::out_of_range("pseudo labels: instance index " + std::to_string(idx) +
                                    " out of range for bag " + std::to_string(bag.bag_id));
    if (attention->size() != set.instance_indices.size())
        throw std::invalid_argument(
            "pseudo labels: " + std::to_string(attention->size()) + " attention weights for " +
            std::to_string(set.instance_indices.size()) + " instances in bag " +
            std::to_string(bag.bag_id));
    set.labels = minmax_normalize(*attention);
    return set;
}

double binary_cross_entropy(double target, double prediction) {
    if (!(target >= 0.0 && target <= 1.0))
        throw std::invalid_argument("binary cross-entropy: target " + std::to_string(target) +
                                    " outside [0, 1]");
    const double p = std::clamp(prediction, 1e-7, 1.0 - 1e-7);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

}  // namespace weno
