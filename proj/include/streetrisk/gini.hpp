#pragma once

#include <streetrisk/error.hpp>

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

namespace streetrisk {

struct ScoredPolicy {
    double score = 0.0;   ///< predicted expected claim count
    double weight = 1.0;  ///< Lorenz x-axis mass
    double outcome = 0.0; ///< observed claims
};

struct LorenzPoint {
    double x = 0.0; ///< cumulative weight share
    double y = 0.0; ///< cumulative outcome share
    bool operator==(const LorenzPoint&) const = default;
};

/// Policies sorted by ascending score; exact score ties form one segment.
/// Runs from (0,0) to (1,1).
inline std::vector<LorenzPoint> lorenz_curve(std::span<const ScoredPolicy> policies) {
    if (policies.empty()) throw InputError("lorenz_curve: no policies");
    double total_w = 0.0, total_y = 0.0;
    for (const auto& p : policies) {
        if (!(p.weight > 0.0)) throw InputError("lorenz_curve: weights must be positive");
        if (p.outcome < 0.0) throw InputError("lorenz_curve: outcomes must be nonnegative");
        total_w += p.weight;
        total_y += p.outcome;
    }
    if (!(total_y > 0.0)) throw UndefinedLorenz("lorenz_curve: total outcome is zero");

    std::vector<std::size_t> order(policies.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return policies[a].score < policies[b].score; });

    std::vector<LorenzPoint> points{{0.0, 0.0}};
    double cw = 0.0, cy = 0.0;
    for (std::size_t k = 0; k < order.size();) {
        const double s = policies[order[k]].score;
        for (; k < order.size() && policies[order[k]].score == s; ++k) {
            cw += policies[order[k]].weight;
            cy += policies[order[k]].outcome;
        }
        points.push_back({cw / total_w, cy / total_y});
    }
    points.back() = {1.0, 1.0};
    return points;
}

/// 1 - sum (x_k - x_{k-1})(y_k + y_{k-1}): twice the area between the
/// diagonal and the Lorenz curve.
inline double gini_from_curve(std::span<const LorenzPoint> points) {
    double area2 = 0.0;
    for (std::size_t k = 1; k < points.size(); ++k)
        area2 += (points[k].x - points[k - 1].x) * (points[k].y + points[k - 1].y);
    return 1.0 - area2;
}

inline double gini(std::span<const ScoredPolicy> policies) {
    auto curve = lorenz_curve(policies);
    return gini_from_curve(curve);
}

} // namespace streetrisk
