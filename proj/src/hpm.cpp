#include "weno/hpm.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace weno {

void HpmConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("mining threshold must be in (0, 1), got " +
                                    std::to_string(threshold));
    if (warmup_epochs < 0) throw std::invalid_argument("mining warm-up must be >= 0");
    if (min_surviving < 1)
        throw std::invalid_argument("minimum surviving instances must be >= 1");
}

bool hpm_active(long epoch, const HpmConfig& config) {
    config.validate();
    if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
    return epoch >= config.warmup_epochs;
}

FilteredBagView filter_bag(const Bag& bag, const std::vector<float>& student_scores,
                           const HpmConfig& config) {
    config.validate();
    const long n = static_cast<long>(bag.instances.size());
    if (n == 0) throw std::invalid_argument("cannot filter an empty bag");
    if (static_cast<long>(student_scores.size()) != n)
        throw std::invalid_argument("bag " + std::to_string(bag.bag_id) + " has " +
                                    std::to_string(n) + " instances but " +
                                    std::to_string(student_scores.size()) + " scores");
    for (float s : student_scores)
        if (!(s >= 0.0f && s <= 1.0f))
            throw std::invalid_argument("student score " + std::to_string(s) +
                                        " outside [0, 1] for bag " + std::to_string(bag.bag_id));

    FilteredBagView view;
    view.bag_id = bag.bag_id;

    if (bag.label == 0) {
        view.surviving.resize(static_cast<std::size_t>(n));
        for (long j = 0; j < n; ++j) view.surviving[static_cast<std::size_t>(j)] = j;
        return view;
    }

    long at_or_under = 0;
    for (float s : student_scores)
        if (static_cast<double>(s) <= config.threshold) ++at_or_under;
    const long keep = std::min(n, std::max(config.min_surviving, at_or_under));

    std::vector<long> order(static_cast<std::size_t>(n));
    for (long j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
        return student_scores[static_cast<std::size_t>(a)] <
               student_scores[static_cast<std::size_t>(b)];
    });

    view.surviving.assign(order.begin(), order.begin() + keep);
    view.dropped.assign(order.begin() + keep, order.end());
    std::sort(view.surviving.begin(), view.surviving.end());
    std::sort(view.dropped.begin(), view.dropped.end());
    return view;
}

}  // namespace weno
