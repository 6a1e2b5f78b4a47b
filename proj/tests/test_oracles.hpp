#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library paths they check.

#include <streetrisk/kappa.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

/// ratings[item][rater] = category index in [0, k).
inline std::vector<std::vector<int>> random_ratings(std::mt19937_64& rng, int items, int raters, int k) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(items), std::vector<int>(static_cast<std::size_t>(raters)));
    for (auto& item : out)
        for (auto& r : item) r = static_cast<int>(rng() % static_cast<unsigned>(k));
    return out;
}

inline streetrisk::CountTable to_counts(const std::vector<std::vector<int>>& ratings, int k) {
    streetrisk::CountTable t;
    for (const auto& item : ratings) {
        std::vector<std::int64_t> row(static_cast<std::size_t>(k), 0);
        for (int c : item) ++row[static_cast<std::size_t>(c)];
        t.push_back(row);
    }
    return t;
}

/// Fleiss' kappa by enumerating ordered rater pairs per item. Empty when
/// chance agreement is 1.
inline std::optional<double> brute_force_kappa(const std::vector<std::vector<int>>& ratings, int k) {
    const double n_items = static_cast<double>(ratings.size());
    const std::size_t n = ratings.front().size();
    double mean_agree = 0.0;
    std::vector<double> share(static_cast<std::size_t>(k), 0.0);
    for (const auto& item : ratings) {
        int pairs = 0, agree = 0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                if (a == b) continue;
                ++pairs;
                agree += item[a] == item[b];
            }
        mean_agree += static_cast<double>(agree) / pairs;
        for (int c : item) share[static_cast<std::size_t>(c)] += 1.0;
    }
    mean_agree /= n_items;
    double chance = 0.0;
    for (double s : share) {
        double p = s / (n_items * static_cast<double>(n));
        chance += p * p;
    }
    if (std::fabs(1.0 - chance) < 1e-15) return std::nullopt;
    return (mean_agree - chance) / (1.0 - chance);
}

/// Standard normal CDF from its Taylor series in long double:
/// Phi(x) = 1/2 + phi(x) * sum_k x^(2k+1) / (1*3*...*(2k+1)).
inline long double normal_cdf_series(long double x) {
    const long double pi = 3.141592653589793238462643383279502884L;
    long double term = x, sum = x;
    for (int k = 1; k < 400; ++k) {
        term *= x * x / (2.0L * k + 1.0L);
        sum += term;
        if (std::fabs(term) < 1e-30L * std::fabs(sum)) break;
    }
    return 0.5L + std::exp(-0.5L * x * x) / std::sqrt(2.0L * pi) * sum;
}

/// Trapezoid Gini from an explicit ordering with tie grouping done by hand.
struct Obs {
    double score, weight, outcome;
};

inline double naive_gini(std::vector<Obs> obs) {
    std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) { return a.score < b.score; });
    double tw = 0.0, ty = 0.0;
    for (const auto& o : obs) {
        tw += o.weight;
        ty += o.outcome;
    }
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    double cw = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        cw += obs[i].weight;
        cy += obs[i].outcome;
        if (i + 1 == obs.size() || obs[i + 1].score != obs[i].score) pts.emplace_back(cw / tw, cy / ty);
    }
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += 0.5 * (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second);
    return 1.0 - 2.0 * area;
}

/// Group-ratio MLE for log-link Poisson with one binary covariate:
/// beta1 = log[(sum_{x=1} y / sum_{x=1} o) / (sum_{x=0} y / sum_{x=0} o)].
inline std::pair<double, double> group_ratio_mle(const std::vector<int>& x, const std::vector<double>& y,
                                                 const std::vector<double>& o) {
    double y0 = 0, o0 = 0, y1 = 0, o1 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i]) {
            y1 += y[i];
            o1 += o[i];
        } else {
            y0 += y[i];
            o0 += o[i];
        }
    }
    const double b0 = std::log(y0 / o0);
    return {b0, std::log(y1 / o1) - b0};
}

inline double naive_deviance(const std::vector<double>& y, const std::vector<double>& mu) {
    long double d = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i) {
        long double yi = y[i], mi = mu[i];
        long double term = yi == 0.0L ? 0.0L : yi * std::log(yi / mi);
        d += 2.0L * (term - (yi - mi));
    }
    return static_cast<double>(d);
}

} // namespace oracle
