#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/tree.hpp"
#include "tsa/value_table.hpp"

namespace tsa {

/// Relative l2 error over paired samples:
///   sqrt( sum |ref_i - approx_i|^2 / sum |ref_i|^2 ).
inline double relative_l2_error(std::span<const double> approx,
                                std::span<const double> reference) {
    check_config(approx.size() == reference.size() && !approx.empty(),
                 "relative_l2_error: size mismatch");
    std::vector<double> num(approx.size()), den(approx.size());
    for (std::size_t i = 0; i < approx.size(); ++i) {
        const double d = reference[i] - approx[i];
        num[i] = d * d;
        den[i] = reference[i] * reference[i];
    }
    const double denominator = pairwise_sum(den);
    if (!(denominator > 0.0))
        throw numerical_error("relative_l2_error: reference is identically zero on the level");
    return std::sqrt(pairwise_sum(num) / denominator);
}

/// E2(t_n): relative l2 error of the value table against a reference function
/// over the nodes covered at time index n (the native level, or the union of
/// levels 0..n for autonomous-extension tables). `ref(node, state)` supplies
/// the reference value.
template <class RefFn>
double relative_l2_error_level(const Tree& tree, const ValueTable& values, int time_idx,
                               RefFn&& ref) {
    const int first_level =
        values.coverage() == ValueTable::Coverage::NativeLevel ? time_idx : 0;
    std::vector<double> approx, reference;
    approx.reserve(values.covered_count(time_idx));
    reference.reserve(values.covered_count(time_idx));
    for (int k = first_level; k <= time_idx; ++k) {
        for (std::size_t i = 0; i < tree.level_size(k); ++i) {
            const NodeRef id{k, static_cast<std::int32_t>(i)};
            approx.push_back(values.value(time_idx, id));
            reference.push_back(ref(id, tree.state(id)));
        }
    }
    return relative_l2_error(approx, reference);
}

/// Err_{2,2} = sqrt( dt * sum_n E2(t_n)^2 )
inline double err_22(std::span<const double> per_level_errors, double dt) {
    std::vector<double> sq(per_level_errors.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = per_level_errors[i] * per_level_errors[i];
    return std::sqrt(dt * pairwise_sum(sq));
}

/// Err_{inf,2} = max_n E2(t_n)
inline double err_inf2(std::span<const double> per_level_errors) {
    double m = 0.0;
    for (double e : per_level_errors) m = std::max(m, e);
    return m;
}

/// Order = log2( err(dt) / err(dt/2) ) for halving studies.
inline double convergence_order(double err_coarse, double err_fine) {
    check_config(err_coarse > 0.0 && err_fine > 0.0,
                 "convergence_order: errors must be positive");
    return std::log2(err_coarse / err_fine);
}

/// Order for an arbitrary step ratio r = dt_coarse / dt_fine > 1.
inline double convergence_order(double err_coarse, double err_fine, double step_ratio) {
    check_config(err_coarse > 0.0 && err_fine > 0.0,
                 "convergence_order: errors must be positive");
    check_config(step_ratio > 1.0, "convergence_order: step ratio must exceed 1");
    return std::log(err_coarse / err_fine) / std::log(step_ratio);
}

}  // namespace tsa
