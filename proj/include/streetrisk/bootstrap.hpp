#pragma once

#include <streetrisk/csv.hpp>
#include <streetrisk/dataset.hpp>
#include <streetrisk/error.hpp>
#include <streetrisk/gini.hpp>
#include <streetrisk/glm.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace streetrisk {

/// Lorenz x-axis mass per policy.
enum class LorenzAxis { policy_count, exposure };

/// `split` draws a random test fraction without replacement; `bootstrap`
/// trains on n draws with replacement and tests on the out-of-bag rows.
enum class Resampling { split, bootstrap };

inline const char* to_string(LorenzAxis a) { return a == LorenzAxis::exposure ? "exposure" : "policy_count"; }
inline const char* to_string(Resampling r) { return r == Resampling::bootstrap ? "bootstrap" : "split"; }

struct EvaluationSpec {
    std::vector<std::string> variables; ///< Model C covariates (columns of the design)
    FitOptions fit;
    LorenzAxis axis = LorenzAxis::policy_count;
    Resampling resampling = Resampling::split;
};

struct Partition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Deterministic train/test partition for one seed.
inline Partition draw_partition(std::size_t n, double split_fraction, std::uint64_t seed, Resampling mode) {
    std::mt19937_64 rng(seed);
    Partition p;
    if (mode == Resampling::split) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        auto test_size = static_cast<std::size_t>(std::llround(split_fraction * static_cast<double>(n)));
        test_size = std::clamp<std::size_t>(test_size, 1, n > 1 ? n - 1 : 1);
        p.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(test_size));
        p.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(test_size), idx.end());
        std::sort(p.test.begin(), p.test.end());
        std::sort(p.train.begin(), p.train.end());
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<char> in_bag(n, 0);
        p.train.resize(n);
        for (auto& t : p.train) {
            t = pick(rng);
            in_bag[t] = 1;
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!in_bag[i]) p.test.push_back(i);
    }
    return p;
}

struct TrialRecord {
    std::size_t trial_index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    double test_gini_a = 0.0, test_gini_b = 0.0, test_gini_c = 0.0;
    double train_gini_a = 0.0, train_gini_b = 0.0, train_gini_c = 0.0;

    bool operator==(const TrialRecord&) const = default;
};

struct ImprovementSummary {
    std::size_t successful = 0;
    std::size_t failed = 0;
    double mean_a = 0.0, mean_b = 0.0, mean_c = 0.0;
    double mean_delta = 0.0; ///< mean of C - B
    std::size_t win_count = 0; ///< trials with C > B
};

struct GiniReport {
    std::vector<TrialRecord> trials;
    double split_fraction = 0.2;
    std::uint64_t base_seed = 0;
    LorenzAxis axis = LorenzAxis::policy_count;
    Resampling resampling = Resampling::split;
};

inline ImprovementSummary improvement_summary(const GiniReport& report) {
    ImprovementSummary s;
    for (const auto& t : report.trials) {
        if (!t.ok) {
            ++s.failed;
            continue;
        }
        ++s.successful;
        s.mean_a += t.test_gini_a;
        s.mean_b += t.test_gini_b;
        s.mean_c += t.test_gini_c;
        s.mean_delta += t.test_gini_c - t.test_gini_b;
        s.win_count += t.test_gini_c > t.test_gini_b;
    }
    if (s.successful == 0) throw InputError("improvement_summary: no successful trials");
    const auto k = static_cast<double>(s.successful);
    s.mean_a /= k;
    s.mean_b /= k;
    s.mean_c /= k;
    s.mean_delta /= k;
    return s;
}

namespace detail {

inline double gini_of(const std::vector<double>& score, const std::vector<std::size_t>& rows, const ModelingData& data,
                      LorenzAxis axis) {
    std::vector<ScoredPolicy> scored(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto r = rows[i];
        scored[i] = {score[i], axis == LorenzAxis::exposure ? data.exposure[r] : 1.0, data.claims[r]};
    }
    return gini(scored);
}

inline std::vector<double> gather(const std::vector<double>& v, const std::vector<std::size_t>& rows) {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = v[rows[i]];
    return out;
}

inline TrialRecord run_trial(const ModelingData& data, const EvaluationSpec& spec, std::size_t index,
                             std::uint64_t seed, double split_fraction) {
    TrialRecord rec;
    rec.trial_index = index;
    rec.seed = seed;
    try {
        const Partition part = draw_partition(data.size(), split_fraction, seed, spec.resampling);
        rec.train_size = part.train.size();
        rec.test_size = part.test.size();
        if (part.test.empty()) throw InputError("empty test partition");

        std::vector<double> b_offset(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) b_offset[i] = data.model_b_frequency[i] * data.exposure[i];

        std::vector<std::string> c_columns{kInterceptName};
        c_columns.insert(c_columns.end(), spec.variables.begin(), spec.variables.end());
        const DesignMatrix full = data.design.select(c_columns);

        const auto y_train = gather(data.claims, part.train);
        const auto e_train = gather(data.exposure, part.train);
        const auto b_train = gather(b_offset, part.train);
        const auto e_test = gather(data.exposure, part.test);
        const auto b_test = gather(b_offset, part.test);

        const FittedModel model_a = fit_poisson(intercept_design(static_cast<Eigen::Index>(part.train.size())),
                                                y_train, e_train, spec.fit);
        const DesignMatrix train_design = full.subset(part.train);
        const FittedModel model_c = fit_poisson(train_design, y_train, b_train, spec.fit);
        if (!model_a.converged || !model_c.converged) throw InputError("training fit did not converge");

        auto score_all = [&](const std::vector<std::size_t>& rows, const std::vector<double>& e,
                             const std::vector<double>& b, double& ga, double& gb, double& gc) {
            const auto a_mu = predict(model_a, intercept_design(static_cast<Eigen::Index>(rows.size())), e);
            const auto c_mu = predict(model_c, full.subset(rows).select(model_c.names), b);
            ga = gini_of(a_mu, rows, data, spec.axis);
            gb = gini_of(b, rows, data, spec.axis);
            gc = gini_of(c_mu, rows, data, spec.axis);
        };
        score_all(part.test, e_test, b_test, rec.test_gini_a, rec.test_gini_b, rec.test_gini_c);
        score_all(part.train, e_train, b_train, rec.train_gini_a, rec.train_gini_b, rec.train_gini_c);
        rec.ok = true;
    } catch (const Error& e) {
        rec.ok = false;
        rec.error = std::string(e.kind()) + ": " + e.what();
    }
    return rec;
}

} // namespace detail

/// Repeated train/test evaluation of Models A (intercept + exposure offset),
/// B (incumbent frequency x exposure) and C (features + Model B offset).
/// Trial t uses seed base_seed + t. Trials may run on several threads; the
/// report is keyed by trial index and identical for any thread count.
inline GiniReport bootstrap_evaluate(const ModelingData& data, const EvaluationSpec& spec, std::size_t trials,
                                     double split_fraction, std::uint64_t base_seed, unsigned threads = 1) {
    if (trials < 1) throw InputError("bootstrap_evaluate: trials must be >= 1");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw InputError("bootstrap_evaluate: split fraction must be in (0, 1)");
    if (data.size() < 2) throw InputError("bootstrap_evaluate: need at least 2 policies");

    GiniReport report;
    report.split_fraction = split_fraction;
    report.base_seed = base_seed;
    report.axis = spec.axis;
    report.resampling = spec.resampling;
    report.trials.resize(trials);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < trials;)
            report.trials[t] = detail::run_trial(data, spec, t, base_seed + t, split_fraction);
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(trials)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return report;
}

inline nlohmann::json to_json(const ImprovementSummary& s) {
    return {{"successful", s.successful}, {"failed", s.failed},        {"mean_gini_A", s.mean_a},
            {"mean_gini_B", s.mean_b},    {"mean_gini_C", s.mean_c},   {"mean_delta_C_minus_B", s.mean_delta},
            {"win_count_C_over_B", s.win_count}};
}

inline nlohmann::json to_json(const GiniReport& r) {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : r.trials) {
        nlohmann::json j{{"trial_index", t.trial_index}, {"seed", t.seed}, {"ok", t.ok},
                         {"train_size", t.train_size},   {"test_size", t.test_size}};
        if (t.ok) {
            j["test_gini_A"] = t.test_gini_a;
            j["test_gini_B"] = t.test_gini_b;
            j["test_gini_C"] = t.test_gini_c;
            j["train_gini_A"] = t.train_gini_a;
            j["train_gini_B"] = t.train_gini_b;
            j["train_gini_C"] = t.train_gini_c;
        } else {
            j["error"] = t.error;
        }
        trials.push_back(std::move(j));
    }
    nlohmann::json out{{"split_fraction", r.split_fraction},
                       {"base_seed", r.base_seed},
                       {"lorenz_axis", to_string(r.axis)},
                       {"resampling", to_string(r.resampling)},
                       {"trials", trials}};
    try {
        out["summary"] = to_json(improvement_summary(r));
    } catch (const InputError&) {
        out["summary"] = nullptr;
    }
    return out;
}

/// Plot-ready rows: trial_index,gini_A,gini_B,gini_C (blank for failed trials).
inline void write_plot_csv(std::ostream& out, const GiniReport& r) {
    out << "trial_index,gini_A,gini_B,gini_C\n";
    for (const auto& t : r.trials) {
        out << t.trial_index << ',';
        if (t.ok)
            out << csv::format_double(t.test_gini_a) << ',' << csv::format_double(t.test_gini_b) << ','
                << csv::format_double(t.test_gini_c);
        else
            out << ",,";
        out << '\n';
    }
}

} // namespace streetrisk
