#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/tree.hpp"

namespace tsa {

enum class NeighborStrategy {
    Auto,           // spatial hash up to dim 16, PCA projection above
    BruteForce,
    SpatialHash,
    PcaProjection,
};

inline NeighborStrategy resolve_strategy(NeighborStrategy s, int dim) {
    if (s != NeighborStrategy::Auto) return s;
    return dim <= 16 ? NeighborStrategy::SpatialHash : NeighborStrategy::PcaProjection;
}

/// Incremental eps-ball search over node states, in the plain Euclidean
/// metric (callers rescale the radius for weighted norms). All strategies
/// return the exact argmin within the radius with ties broken by lowest id,
/// so swapping strategies never changes a build.
class NeighborIndex {
public:
    /// `sample_states` (row-major) seeds the PCA projection direction; the
    /// other strategies ignore it. The sample may be the batch of candidate
    /// points about to be processed and need not be inserted.
    NeighborIndex(int dim, double radius, NeighborStrategy strategy,
                  std::span<const double> sample_states = {})
        : dim_(dim), radius_(radius), strategy_(resolve_strategy(strategy, dim)) {
        check_config(dim >= 1, "NeighborIndex: dimension must be >= 1");
        check_config(radius > 0.0, "NeighborIndex: radius must be positive");
        if (strategy_ == NeighborStrategy::SpatialHash) {
            check_config(dim <= 16, "NeighborIndex: spatial hash limited to dim <= 16 "
                                    "(cell fan-out is 3^dim); use pca");
            inv_cell_ = 1.0 / radius;
        } else if (strategy_ == NeighborStrategy::PcaProjection) {
            compute_direction(sample_states);
            if (direction_.empty()) strategy_ = NeighborStrategy::BruteForce;  // degenerate data
        }
    }

    int dim() const { return dim_; }
    double radius() const { return radius_; }
    NeighborStrategy strategy() const { return strategy_; }
    std::size_t size() const { return ids_.size(); }

    void insert(NodeRef id, std::span<const double> state) {
        const std::uint32_t slot = static_cast<std::uint32_t>(ids_.size());
        ids_.push_back(id);
        coords_.insert(coords_.end(), state.begin(), state.end());
        switch (strategy_) {
            case NeighborStrategy::SpatialHash:
                cells_[cell_key(state)].push_back(slot);
                break;
            case NeighborStrategy::PcaProjection:
                projected_.emplace(project(state), slot);
                break;
            default:
                break;
        }
    }

    /// Nearest inserted node within `eps` of `p` (eps defaults to the index
    /// radius and must not exceed it). Ties at equal distance go to the
    /// lowest node id.
    std::optional<NodeRef> query_nearest(std::span<const double> p, double eps) const {
        check_config(eps <= radius_ * (1.0 + 1e-12),
                     "NeighborIndex: query radius exceeds index radius");
        const double eps_sq = eps * eps;
        std::uint32_t best_slot = 0;
        double best_sq = -1.0;
        auto consider = [&](std::uint32_t slot) {
            const double d2 = squared_distance(p, slot_state(slot));
            if (d2 > eps_sq) return;
            if (best_sq < 0.0 || d2 < best_sq ||
                (d2 == best_sq && ids_[slot] < ids_[best_slot])) {
                best_sq = d2;
                best_slot = slot;
            }
        };

        switch (strategy_) {
            case NeighborStrategy::SpatialHash: {
                scan_neighbor_cells(p, consider);
                break;
            }
            case NeighborStrategy::PcaProjection: {
                const double c = project(p);
                auto lo = projected_.lower_bound(c - eps);
                auto hi = projected_.upper_bound(c + eps);
                for (auto it = lo; it != hi; ++it) consider(it->second);
                break;
            }
            default: {
                for (std::uint32_t slot = 0; slot < ids_.size(); ++slot) consider(slot);
                break;
            }
        }
        if (best_sq < 0.0) return std::nullopt;
        return ids_[best_slot];
    }

    std::optional<NodeRef> query_nearest(std::span<const double> p) const {
        return query_nearest(p, radius_);
    }

private:
    std::span<const double> slot_state(std::uint32_t slot) const {
        return {coords_.data() + static_cast<std::size_t>(slot) * dim_,
                static_cast<std::size_t>(dim_)};
    }

    // --- spatial hash ---

    struct KeyHash {
        std::size_t operator()(const std::vector<std::int64_t>& key) const {
            std::size_t h = 1469598103934665603ull;
            for (std::int64_t v : key) {
                h ^= static_cast<std::size_t>(v);
                h *= 1099511628211ull;
            }
            return h;
        }
    };

    std::vector<std::int64_t> cell_key(std::span<const double> p) const {
        std::vector<std::int64_t> key(dim_);
        for (int k = 0; k < dim_; ++k)
            key[k] = static_cast<std::int64_t>(std::floor(p[k] * inv_cell_));
        return key;
    }

    template <class Fn>
    void scan_neighbor_cells(std::span<const double> p, Fn&& consider) const {
        std::vector<std::int64_t> center = cell_key(p);
        std::vector<std::int64_t> probe = center;
        std::vector<int> offset(dim_, -1);
        for (int k = 0; k < dim_; ++k) probe[k] = center[k] - 1;
        while (true) {
            auto it = cells_.find(probe);
            if (it != cells_.end())
                for (std::uint32_t slot : it->second) consider(slot);
            int k = dim_;
            while (k > 0) {
                --k;
                if (++offset[k] <= 1) {
                    probe[k] = center[k] + offset[k];
                    break;
                }
                offset[k] = -1;
                probe[k] = center[k] - 1;
                if (k == 0) return;
            }
        }
    }

    // --- PCA projection ---

    /// First principal direction of the (centered) sample, found by power
    /// iteration on the covariance action; any unit direction gives a valid
    /// 1-Lipschitz projection, so accuracy here only affects window sizes,
    /// never query results.
    void compute_direction(std::span<const double> sample) {
        const std::size_t n = dim_ > 0 ? sample.size() / dim_ : 0;
        if (n < 2) return;
        std::vector<double> mean(dim_, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (int k = 0; k < dim_; ++k) mean[k] += sample[i * dim_ + k];
        for (int k = 0; k < dim_; ++k) mean[k] /= static_cast<double>(n);

        // start along the axis of largest variance
        std::vector<double> var(dim_, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (int k = 0; k < dim_; ++k) {
                const double d = sample[i * dim_ + k] - mean[k];
                var[k] += d * d;
            }
        const auto max_axis = std::max_element(var.begin(), var.end()) - var.begin();
        const double total_var = pairwise_sum(var);
        if (!(total_var > 0.0)) return;  // all sample states identical

        std::vector<double> v(dim_, 0.0);
        v[max_axis] = 1.0;
        std::vector<double> next(dim_);
        std::vector<double> centered(dim_);
        for (int iter = 0; iter < 60; ++iter) {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int k = 0; k < dim_; ++k) {
                    centered[k] = sample[i * dim_ + k] - mean[k];
                    dot += centered[k] * v[k];
                }
                for (int k = 0; k < dim_; ++k) next[k] += dot * centered[k];
            }
            const double norm = euclidean_norm(next);
            if (!(norm > 0.0)) break;
            double delta = 0.0;
            for (int k = 0; k < dim_; ++k) {
                next[k] /= norm;
                delta = std::max(delta, std::abs(next[k] - v[k]));
            }
            v = next;
            if (delta < 1e-12) break;
        }
        direction_ = std::move(v);
    }

    double project(std::span<const double> p) const {
        double s = 0.0;
        for (int k = 0; k < dim_; ++k) s += direction_[k] * p[k];
        return s;
    }

    int dim_;
    double radius_;
    NeighborStrategy strategy_;
    double inv_cell_ = 0.0;

    std::vector<NodeRef> ids_;
    std::vector<double> coords_;  // row-major copies of inserted states

    std::unordered_map<std::vector<std::int64_t>, std::vector<std::uint32_t>, KeyHash> cells_;

    std::vector<double> direction_;
    std::multimap<double, std::uint32_t> projected_;
};

/// Argmin node within eps of the candidate, or nullopt when nothing in scope
/// is that close.
inline std::optional<NodeRef> find_merge_target(const NeighborIndex& index,
                                                std::span<const double> candidate, double eps) {
    return index.query_nearest(candidate, eps);
}

}  // namespace tsa
