#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "weno/dataset.hpp"

namespace weno {

// Min-max normalization to [0,1]: min -> 0, max -> 1, order preserved. A
// degenerate range (max - min <= 1e-8) maps every value to 0.5, the
// maximally uncertain soft label.
template <typename T>
std::vector<T> minmax_normalize(const std::vector<T>& values) {
    if (values.empty())
        throw std::invalid_argument("minmax_normalize: need at least one value");
    T lo = values[0], hi = values[0];
    for (T v : values) {
        if (!std::isfinite(static_cast<double>(v)))
            throw std::invalid_argument("minmax_normalize: non-finite input");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<T> out(values.size());
    if (static_cast<double>(hi - lo) <= 1e-8) {
        for (auto& v : out) v = T(0.5);
        return out;
    }
    const T range = hi - lo;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / range;
    return out;
}

// Per-instance soft targets for the student. Negative bags get exactly 0
// everywhere; positive bags get per-bag min-max normalized attention over
// the instances that have attention values (HPM survivors).
struct PseudoLabelSet {
    long bag_id = 0;
    std::vector<long> instance_indices;  // which instances the labels cover
    std::vector<float> labels;           // in [0,1], parallel to instance_indices
    long source_epoch = 0;
    enum class Provenance { negative_bag, normalized_attention };
    Provenance provenance = Provenance::negative_bag;
};

// `attention` may be null for negative bags (it is ignored); positive bags
// require one weight per covered instance. `surviving` restricts a positive
// bag's coverage to those instance indices (defaults to all).
PseudoLabelSet make_pseudo_labels(const Bag& bag, const std::vector<float>* attention,
                                  long source_epoch,
                                  const std::vector<long>* surviving = nullptr);

// Scalar binary cross-entropy with the prediction clamped to
// [1e-7, 1 - 1e-7] before the logs; minimized over p at p = t.
double binary_cross_entropy(double target, double prediction);

}  // namespace weno
