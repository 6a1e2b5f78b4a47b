// Acceptance suite: one PASS/FAIL line per primary criterion.
//
// Usage: acceptance [path-to-streetrisk-cli]

#include <streetrisk/pipeline.hpp>

#include "test_oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace streetrisk;
namespace fs = std::filesystem;

namespace {

std::string g_cli;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++g_failures;
    std::printf("%s  %s  [%s; %.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("streetrisk_acceptance_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + g_cli + "\" " + args + " >/dev/null";
    return std::system(cmd.c_str());
}

/// Synthetic portfolio run through calibration and feature simplification.
struct Prepared {
    SynthPortfolio g;
    Dataset dataset;
    VariablesConfig vars;
};

Prepared prepare(const SynthConfig& cfg, bool calibrate = true) {
    Prepared p{generate_portfolio(cfg), {}, {}};
    p.vars = {p.g.schema.retained_names(), cfg.retained_annotators(), calibrate};
    const auto features = features_from_annotations(p.g.annotations, p.g.schema, p.vars, p.g.common_set);
    p.dataset = join_dataset(p.g.policies, p.g.registry, features, Provenance::synthetic);
    return p;
}

SynthConfig null_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    for (auto& [name, e] : cfg.effects) e.relative_risk = 1.0;
    return cfg;
}

std::vector<double> column(const Dataset& d, const std::function<double(const PolicyRecord&)>& f) {
    std::vector<double> out;
    for (const auto& p : d.policies) out.push_back(f(p));
    return out;
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1e-300, std::fabs(b)); }

// ---------------------------------------------------------------------------

Outcome kappa_oracle() {
    std::mt19937_64 rng(20190601);
    double worst = 0.0;
    int compared = 0, degenerate = 0;
    for (int t = 0; t < 1000; ++t) {
        const int items = 1 + static_cast<int>(rng() % 10);
        const int raters = 2 + static_cast<int>(rng() % 4);
        const int cats = 2 + static_cast<int>(rng() % 3);
        const auto ratings = oracle::random_ratings(rng, items, raters, cats);
        const auto expected = oracle::brute_force_kappa(ratings, cats);
        const auto table = oracle::to_counts(ratings, cats);
        if (!expected) {
            try {
                fleiss_kappa(table, raters);
                return {false, "instance " + std::to_string(t) + " should be degenerate"};
            } catch (const DegenerateAgreement&) {
                ++degenerate;
            }
            continue;
        }
        worst = std::max(worst, std::fabs(fleiss_kappa(table, raters) - *expected));
        ++compared;
    }
    const double hand = fleiss_kappa({{2, 0}, {1, 1}}, 2);
    const bool ok = worst <= 1e-12 && hand == -1.0 / 3.0;
    return {ok, fmt("1000 instances (%d compared, %d degenerate agreed), max |diff| %.2e; hand example %.17g", compared,
                    degenerate, worst, hand)};
}

Outcome kappa_bands() {
    const std::vector<std::pair<double, std::string>> table{{0.52, "moderate agreement"},    {0.50, "moderate agreement"},
                                                            {0.79, "substantial agreement"}, {0.69, "substantial agreement"},
                                                            {0.51, "moderate agreement"},    {0.54, "moderate agreement"},
                                                            {0.32, "fair agreement"}};
    std::string bad;
    for (const auto& [k, band] : table)
        if (interpret_kappa(k) != band) bad += fmt(" %.2f->%s", k, interpret_kappa(k).c_str());
    return {bad.empty(), bad.empty() ? "7 of 7 reference values banded as expected" : "mismatch:" + bad};
}

Outcome glm_closed_forms() {
    SynthConfig cfg;
    const auto p = prepare(cfg);
    const auto& d = p.dataset;
    const auto y = column(d, [](const PolicyRecord& r) { return static_cast<double>(r.claim_count); });
    const auto e = column(d, [](const PolicyRecord& r) { return r.exposure; });
    const double sum_y = std::accumulate(y.begin(), y.end(), 0.0), sum_e = std::accumulate(e.begin(), e.end(), 0.0);

    const auto m0 = fit_poisson(intercept_design(static_cast<Eigen::Index>(d.size())), y, e);
    const double err0 = std::fabs(m0.coefficients[0] - std::log(sum_y / sum_e));

    const auto single = build_design(d.features, d.feature_names, {"house_age"});
    const auto m1 = fit_poisson(single, y, e);
    double y_g[2] = {0, 0}, e_g[2] = {0, 0};
    for (std::size_t i = 0; i < d.size(); ++i) {
        const int g = single.values(static_cast<Eigen::Index>(i), 1) > 0.5;
        y_g[g] += y[i];
        e_g[g] += e[i];
    }
    const double err1 = std::max(std::fabs(m1.coefficients[0] - std::log(y_g[0] / e_g[0])),
                                 std::fabs(m1.coefficients[1] - std::log((y_g[1] / e_g[1]) / (y_g[0] / e_g[0]))));

    const auto full = build_design(d.features, d.feature_names, p.vars.variables);
    const auto off = column(d, [](const PolicyRecord& r) { return r.model_b_frequency * r.exposure; });
    const auto mc = fit_poisson(full, y, off);
    const auto mu = predict(mc, full, off);
    const double balance = rel_err(std::accumulate(mu.begin(), mu.end(), 0.0), sum_y);

    const double c = 7.5;
    auto scaled = off;
    for (auto& o : scaled) o *= c;
    const auto ms = fit_poisson(full, y, scaled);
    double shift = std::fabs(ms.coefficients[0] - (mc.coefficients[0] - std::log(c)));
    for (std::size_t k = 1; k < mc.coefficients.size(); ++k)
        shift = std::max(shift, std::fabs(ms.coefficients[k] - mc.coefficients[k]));

    const bool ok = err0 <= 1e-8 && err1 <= 1e-8 && balance <= 1e-6 && shift <= 1e-8;
    return {ok, fmt("n=%zu: intercept-only %.1e, group ratio %.1e, sum(mu)/sum(y) rel %.1e, offset scaling %.1e", d.size(),
                    err0, err1, balance, shift)};
}

Outcome inference() {
    const double p = two_sided_p(1.959964);
    const int reps = 200;
    const auto names = synthetic_schema().retained_names();
    std::map<std::string, int> significant;
    int fitted = 0;
    for (int r = 0; r < reps; ++r) {
        const auto prep = prepare(null_config(1000 + static_cast<std::uint64_t>(r)));
        const auto& d = prep.dataset;
        const auto design = build_design(d.features, d.feature_names, prep.vars.variables);
        const auto y = column(d, [](const PolicyRecord& x) { return static_cast<double>(x.claim_count); });
        const auto off = column(d, [](const PolicyRecord& x) { return x.model_b_frequency * x.exposure; });
        for (const auto& row : wald_tests(fit_poisson(design, y, off)))
            if (row.name != kInterceptName && !row.degenerate && row.p_value < 0.05) ++significant[row.name];
        ++fitted;
    }
    bool ok = std::fabs(p - 0.05) <= 1e-6;
    std::string rates;
    for (const auto& name : names) {
        const double rate = static_cast<double>(significant[name]) / fitted;
        ok = ok && rate >= 0.01 && rate <= 0.10;
        rates += fmt(" %s=%.3f", name.c_str(), rate);
    }
    return {ok, fmt("p(1.959964)=%.9f; null false-significance over %d fits:", p, fitted) + rates};
}

Outcome gini_checks() {
    std::vector<std::string> problems;
    auto unit = [](std::vector<double> s, std::vector<double> y) {
        std::vector<ScoredPolicy> out;
        for (std::size_t i = 0; i < s.size(); ++i) out.push_back({s[i], 1.0, y[i]});
        return out;
    };
    const double h1 = gini(unit({1, 2, 3}, {0, 1, 2})), h2 = gini(unit({0.1, 0.2, 0.3, 0.9}, {0, 0, 0, 1}));
    const double h3 = gini(unit({1, 1, 1, 1}, {3, 0, 1, 0}));
    const double hand_err = std::max({std::fabs(h1 - 4.0 / 9.0), std::fabs(h2 - 0.75), std::fabs(h3)});
    if (hand_err > 1e-12) problems.push_back(fmt("hand error %.2e", hand_err));

    std::mt19937_64 rng(7);
    int max_instances = 0;
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + rng() % 6;
        std::vector<double> y(n);
        for (auto& v : y) v = static_cast<double>(rng() % 4);
        y[0] += 1.0;
        std::vector<double> ranks(n);
        std::iota(ranks.begin(), ranks.end(), 0.0);
        double best = -2.0;
        do best = std::max(best, gini(unit(ranks, y)));
        while (std::next_permutation(ranks.begin(), ranks.end()));
        if (std::fabs(gini(unit(y, y)) - best) > 1e-12) problems.push_back("maximality failed at instance " + std::to_string(t));
        ++max_instances;
    }

    std::uniform_real_distribution<double> u(0.0, 1.0);
    int mono = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng() % 40;
        std::vector<ScoredPolicy> pol;
        for (std::size_t i = 0; i < n; ++i)
            pol.push_back({t % 2 ? u(rng) : static_cast<double>(rng() % 5), 0.1 + u(rng), static_cast<double>(rng() % 3)});
        pol[0].outcome += 1.0;
        auto q = pol;
        for (auto& x : q) x.score = std::exp(2.0 * x.score) + 3.0;
        if (gini(q) != gini(pol)) problems.push_back("monotone invariance failed at instance " + std::to_string(t));
        ++mono;
    }
    return {problems.empty(), problems.empty()
                                  ? fmt("hand max err %.1e; maximality on %d instances (n<=6); monotone invariance on %d",
                                        hand_err, max_instances, mono)
                                  : problems.front()};
}

Outcome gini_lift() {
    const auto dir = scratch("lift");
    if (run_cli("synth --out \"" + (dir / "fx").string() + "\"") != 0) return {false, "synth failed"};
    if (run_cli("evaluate --dataset \"" + (dir / "fx").string() + "\" --trials 20 --split 0.2 --out \"" +
                (dir / "out").string() + "\"") != 0)
        return {false, "evaluate failed"};
    const auto report = read_json_file(dir / "out" / "gini_report.json");
    const auto& s = report.at("summary");
    const int wins = s.at("win_count_C_over_B").get<int>();
    const double delta = s.at("mean_delta_C_minus_B").get<double>();
    const double b = s.at("mean_gini_B").get<double>(), c = s.at("mean_gini_C").get<double>();
    std::size_t rows = 0;
    {
        std::ifstream in(dir / "out" / "gini_plot.csv");
        for (std::string line; std::getline(in, line);) ++rows;
    }
    fs::remove_all(dir);
    const bool ok = wins >= 15 && delta >= 0.01 && b >= 0.30 && b <= 0.45 && rows == 21;
    return {ok, fmt("C>B in %d/20 trials; mean Gini B %.2f%% C %.2f%%; mean improvement %.2f pp; plot rows %zu", wins,
                    100 * b, 100 * c, 100 * delta, rows - 1)};
}

Outcome gini_null() {
    const int reps = 50;
    double total = 0.0;
    int in_range = 0, lo = 20, hi = 0;
    for (int r = 0; r < reps; ++r) {
        const auto prep = prepare(null_config(5000 + static_cast<std::uint64_t>(r)));
        EvaluationSpec spec;
        spec.variables = prep.vars.variables;
        const auto report = bootstrap_evaluate(modeling_data(prep.dataset, spec.variables), spec, 20, 0.2, 1);
        const int wins = static_cast<int>(improvement_summary(report).win_count);
        total += wins;
        in_range += wins >= 6 && wins <= 14;
        lo = std::min(lo, wins);
        hi = std::max(hi, wins);
    }
    const double mean = total / reps;
    return {mean >= 6.0 && mean <= 14.0,
            fmt("mean C>B wins %.2f/20 over %d null replications (range %d-%d; %d of %d inside [6, 14])", mean, reps, lo, hi,
                in_range, reps)};
}

Outcome calibration() {
    // Moment matching on the retained annotators' ratings, without range clamping.
    SynthConfig cfg;
    const auto g = generate_portfolio(cfg);
    const auto retained = filter_annotators(g.annotations, cfg.retained_annotators());
    CalibrationOptions opts;
    opts.clamp = false;
    const auto result = calibrate_annotators(retained, g.schema, opts);
    auto moments = [](const std::vector<double>& xs) {
        long double sum = 0, ss = 0;
        for (double x : xs) sum += x;
        const long double mean = sum / static_cast<long double>(xs.size());
        for (double x : xs) ss += (x - mean) * (x - mean);
        return std::pair<double, double>{static_cast<double>(mean),
                                         static_cast<double>(std::sqrt(ss / static_cast<long double>(xs.size())))};
    };
    double worst = 0.0;
    int checked = 0;
    std::set<std::string> annotators;
    for (const auto& r : retained) annotators.insert(r.annotator_id);
    for (std::size_t vi = 0; vi < g.schema.variables.size(); ++vi) {
        if (g.schema.variables[vi].is_choice()) continue;
        std::vector<double> pooled;
        for (const auto& r : retained) pooled.push_back(r.ordinal(vi));
        const auto [pm, psd] = moments(pooled);
        for (const auto& annotator : annotators) {
            std::vector<double> out;
            for (std::size_t i = 0; i < retained.size(); ++i)
                if (retained[i].annotator_id == annotator) out.push_back(result.records[i].ordinal(vi));
            const auto [m, sd] = moments(out);
            worst = std::max({worst, std::fabs(m - pm), std::fabs(sd - psd)});
            ++checked;
        }
    }

    // Planted-effect recovery with and without calibration.
    double mae_cal = 0.0, mae_raw = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        SynthConfig c;
        c.seed = 300 + static_cast<std::uint64_t>(s);
        for (bool cal : {true, false}) {
            const auto prep = prepare(c, cal);
            const auto& d = prep.dataset;
            const auto design = build_design(d.features, d.feature_names, prep.vars.variables);
            const auto y = column(d, [](const PolicyRecord& x) { return static_cast<double>(x.claim_count); });
            const auto off = column(d, [](const PolicyRecord& x) { return x.model_b_frequency * x.exposure; });
            const auto model = fit_poisson(design, y, off);
            double mae = 0.0;
            int terms = 0;
            for (std::size_t k = 1; k < model.names.size(); ++k) {
                mae += std::fabs(model.coefficients[k] - std::log(c.effects.at(model.names[k]).relative_risk));
                ++terms;
            }
            (cal ? mae_cal : mae_raw) += mae / terms / seeds;
        }
    }
    const bool ok = checked > 0 && worst <= 1e-9 && mae_cal < mae_raw;
    return {ok, fmt("moments: %d annotator-variable pairs within %.1e of pooled; beta MAE over %d seeds calibrated %.4f "
                    "vs uncalibrated %.4f",
                    checked, worst, seeds, mae_cal, mae_raw)};
}

Outcome determinism() {
    const std::vector<std::string> runs{"run1", "run2"};
    const auto root = scratch("determinism");
    for (const auto& r : runs) {
        const auto fx = (root / r / "fixtures").string(), out = (root / r / "out").string();
        const std::vector<std::string> steps{
            "synth --seed 11 --out \"" + fx + "\"",
            "kappa --annotations \"" + fx + "/annotations.csv\" --common \"" + fx + "/common.txt\" --out \"" + out + "\"",
            "calibrate --annotations \"" + fx + "/annotations.csv\" --common \"" + fx +
                "/common.txt\" --annotators ann1,ann2,ann3,ann4 --out \"" + out + "\"",
            "fit --dataset \"" + fx + "\" --annotations \"" + out + "/calibrated_annotations.csv\" --calibrated --out \"" +
                out + "\"",
            "evaluate --dataset \"" + fx + "\" --annotations \"" + out +
                "/calibrated_annotations.csv\" --calibrated --trials 20 --split 0.2 --seed 11 --out \"" + out + "\"",
            "report --dir \"" + out + "\""};
        for (const auto& step : steps)
            if (run_cli(step) != 0) return {false, "step failed: " + step};
    }
    std::size_t files = 0, bytes = 0;
    for (const auto& entry : fs::recursive_directory_iterator(root / runs[0])) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), root / runs[0]);
        const auto a = slurp(entry.path()), b = slurp(root / runs[1] / rel);
        if (a != b) return {false, "differs: " + rel.string()};
        ++files;
        bytes += a.size();
    }
    fs::remove_all(root);
    return {files >= 14, fmt("%zu files (%zu bytes) byte-identical across two runs", files, bytes)};
}

} // namespace

int main(int argc, char** argv) {
    g_cli = argc > 1 ? argv[1] : "streetrisk";
    criterion("Kappa oracle equivalence", kappa_oracle);
    criterion("Kappa banding of reference values", kappa_bands);
    criterion("GLM closed forms", glm_closed_forms);
    criterion("Wald inference and null false-significance rate", inference);
    criterion("Gini hand values, maximality and monotone invariance", gini_checks);
    criterion("Model C lifts Model B Gini on the default synthetic portfolio", gini_lift);
    criterion("No systematic C-over-B win under null effects", gini_null);
    criterion("Calibration moment matching and effect recovery", calibration);
    criterion("Pipeline determinism", determinism);
    std::printf("%d of 9 criteria passed\n", 9 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
