#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "weno/params.hpp"
#include "weno/tape.hpp"
#include "weno/tensor.hpp"

namespace weno {

struct GradCheckReport {
    double max_rel_err = 0.0;      // worst relative error over all parameter scalars
    std::string worst_param;       // parameter holding the worst scalar
    std::size_t worst_index = 0;   // flat index of that scalar
    bool deterministic = false;    // two independent forward passes agreed bitwise
    std::size_t scalars = 0;       // number of scalars checked

    bool passed(double tol) const { return deterministic && max_rel_err < tol; }
};

// Central-difference verification of the tape's analytic gradients.
//
// `build` must construct the loss graph on the given tape from the current
// store values and return the scalar loss Var; it must be a pure function of
// the store (fixed inputs, no RNG). Runs in double precision only: the
// perturbation eps would drown in float rounding error.
template <typename T, typename BuildFn>
GradCheckReport finite_difference_check(ParameterStore<T>& store, BuildFn&& build,
                                        double eps = 1e-5) {
    static_assert(std::is_same_v<T, double>,
                  "finite_difference_check requires double-precision parameters");

    const auto eval = [&]() -> double {
        Tape<T> tape(false);
        Var loss = build(tape);
        return tape.value(loss).item();
    };

    GradCheckReport report;

    // Two independent forward passes must agree bitwise, otherwise the
    // difference quotient below measures noise rather than slope.
    const double f0 = eval();
    const double f1 = eval();
    report.deterministic = (f0 == f1);

    // Analytic gradients.
    store.zero_grads();
    std::vector<Tensor<T>> analytic;
    {
        Tape<T> tape(true);
        Var loss = build(tape);
        tape.backward(loss);
        for (std::size_t p = 0; p < store.size(); ++p)
            analytic.push_back(store.entry(static_cast<int>(p)).grad);
        store.zero_grads();
    }

    for (std::size_t p = 0; p < store.size(); ++p) {
        auto& entry = store.entry(static_cast<int>(p));
        for (std::size_t i = 0; i < entry.value.data.size(); ++i) {
            const double saved = entry.value.data[i];
            entry.value.data[i] = saved + eps;
            const double fp = eval();
            entry.value.data[i] = saved - eps;
            const double fm = eval();
            entry.value.data[i] = saved;

            const double fd = (fp - fm) / (2.0 * eps);
            const double an = analytic[p].data[i];
            const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
            const double rel = std::fabs(fd - an) / denom;
            ++report.scalars;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = entry.name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

}  // namespace weno
