#pragma once

#include <vector>

#include "weno/dataset.hpp"

namespace weno {

// Hard-positive-instance mining: after a warm-up period, drop instances of
// positive bags that the student already scores as confidently positive, so
// the teacher is forced onto the harder positives.
struct HpmConfig {
    double threshold = 0.8;    // drop when student score > threshold
    long warmup_epochs = 100;  // active from this epoch on
    long min_surviving = 1;    // a bag is never emptied below this

    void validate() const;  // throws std::invalid_argument
};

// True from the warm-up epoch onward.
bool hpm_active(long epoch, const HpmConfig& config);

// Partition of one bag's instance indices into survivors and drops.
struct FilteredBagView {
    long bag_id = 0;
    std::vector<long> surviving;  // ascending, never empty
    std::vector<long> dropped;    // ascending
};

// Negative bags pass through unfiltered. For positive bags the survivors are
// the k lowest-scoring instances where k = max(min_surviving, count of
// scores <= threshold): every instance at or under the threshold survives,
// and the retention floor keeps the lowest scorers when too many would drop.
// Ties resolve by instance index. Scores must lie in [0, 1].
FilteredBagView filter_bag(const Bag& bag, const std::vector<float>& student_scores,
                           const HpmConfig& config);

}  // namespace weno
