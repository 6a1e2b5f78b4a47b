#include <streetrisk/pipeline.hpp>

#include <gtest/gtest.h>

#include <set>

using namespace streetrisk;

namespace {

ModelingData small_portfolio(std::size_t n = 4000, std::uint64_t seed = 77) {
    SynthConfig cfg;
    cfg.n_policies = n;
    cfg.seed = seed;
    cfg.n_foreign = 5;
    cfg.n_unresolved = 10;
    cfg.common_size = 100;
    const auto g = generate_portfolio(cfg);
    VariablesConfig vars{g.schema.retained_names(), cfg.retained_annotators(), true};
    const auto features = features_from_annotations(g.annotations, g.schema, vars, g.common_set);
    const auto ds = join_dataset(g.policies, g.registry, features, Provenance::synthetic);
    return modeling_data(ds, vars.variables);
}

EvaluationSpec all_variables() {
    EvaluationSpec spec;
    spec.variables = synthetic_schema().retained_names();
    return spec;
}

} // namespace

TEST(DrawPartition, SplitIsDisjointAndCovering) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto p = draw_partition(1001, 0.2, seed, Resampling::split);
        EXPECT_EQ(p.test.size(), 200u);
        EXPECT_EQ(p.train.size(), 801u);
        std::set<std::size_t> all(p.test.begin(), p.test.end());
        for (auto i : p.train) EXPECT_TRUE(all.insert(i).second);
        EXPECT_EQ(all.size(), 1001u);
        EXPECT_EQ(*all.rbegin(), 1000u);
    }
}

TEST(DrawPartition, BootstrapTestsOnOutOfBagRows) {
    auto p = draw_partition(2000, 0.2, 3, Resampling::bootstrap);
    EXPECT_EQ(p.train.size(), 2000u);
    std::set<std::size_t> bag(p.train.begin(), p.train.end());
    for (auto i : p.test) EXPECT_FALSE(bag.count(i));
    EXPECT_EQ(bag.size() + p.test.size(), 2000u);
    // Out-of-bag share is about exp(-1).
    EXPECT_NEAR(static_cast<double>(p.test.size()) / 2000.0, std::exp(-1.0), 0.04);
}

TEST(DrawPartition, SameSeedSamePartition) {
    auto a = draw_partition(500, 0.3, 9, Resampling::split);
    auto b = draw_partition(500, 0.3, 9, Resampling::split);
    auto c = draw_partition(500, 0.3, 10, Resampling::split);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(a.test, c.test);
}

TEST(BootstrapEvaluate, TwentyTrialsWithTwentyPercentTestSets) {
    const auto data = small_portfolio();
    auto report = bootstrap_evaluate(data, all_variables(), 20, 0.2, 1);
    ASSERT_EQ(report.trials.size(), 20u);
    const auto expected_test = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(data.size())));
    for (std::size_t t = 0; t < 20; ++t) {
        const auto& r = report.trials[t];
        EXPECT_EQ(r.trial_index, t);
        EXPECT_EQ(r.seed, 1 + t);
        ASSERT_TRUE(r.ok) << r.error;
        EXPECT_EQ(r.test_size, expected_test);
        EXPECT_EQ(r.train_size + r.test_size, data.size());
    }
    auto s = improvement_summary(report);
    EXPECT_EQ(s.successful, 20u);
    EXPECT_EQ(s.failed, 0u);
}

TEST(BootstrapEvaluate, DeterministicForFixedSeed) {
    const auto data = small_portfolio();
    auto a = bootstrap_evaluate(data, all_variables(), 6, 0.2, 42);
    auto b = bootstrap_evaluate(data, all_variables(), 6, 0.2, 42);
    EXPECT_EQ(a.trials, b.trials);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    auto c = bootstrap_evaluate(data, all_variables(), 6, 0.2, 43);
    EXPECT_NE(a.trials[0].test_gini_c, c.trials[0].test_gini_c);
}

TEST(BootstrapEvaluate, ThreadCountDoesNotChangeResults) {
    const auto data = small_portfolio();
    auto one = bootstrap_evaluate(data, all_variables(), 8, 0.2, 5, 1);
    auto four = bootstrap_evaluate(data, all_variables(), 8, 0.2, 5, 4);
    EXPECT_EQ(one.trials, four.trials);
    std::ostringstream a, b;
    write_plot_csv(a, one);
    write_plot_csv(b, four);
    EXPECT_EQ(a.str(), b.str());
}

TEST(BootstrapEvaluate, ModelCWithoutFeaturesRanksExactlyLikeModelB) {
    const auto data = small_portfolio();
    EvaluationSpec spec; // intercept + Model B offset only
    auto report = bootstrap_evaluate(data, spec, 5, 0.2, 11);
    for (const auto& t : report.trials) {
        ASSERT_TRUE(t.ok);
        EXPECT_NEAR(t.test_gini_c, t.test_gini_b, 1e-12);
    }
    auto s = improvement_summary(report);
    EXPECT_NEAR(s.mean_delta, 0.0, 1e-12);
}

TEST(BootstrapEvaluate, LorenzAxisChangesModelAGini) {
    // Model A's score is proportional to exposure, so it ranks policies by
    // exposure alone and the x-axis mass matters.
    const auto data = small_portfolio();
    EvaluationSpec spec = all_variables();
    auto count = bootstrap_evaluate(data, spec, 3, 0.2, 2);
    spec.axis = LorenzAxis::exposure;
    auto exposure = bootstrap_evaluate(data, spec, 3, 0.2, 2);
    for (std::size_t t = 0; t < 3; ++t) {
        EXPECT_GT(count.trials[t].test_gini_a, 0.0);
        EXPECT_NE(count.trials[t].test_gini_a, exposure.trials[t].test_gini_a);
        EXPECT_EQ(count.trials[t].test_size, exposure.trials[t].test_size);
    }
}

TEST(BootstrapEvaluate, FailedTrialsAreRecordedNotFatal) {
    auto data = small_portfolio(500, 3);
    for (auto& y : data.claims) y = 0.0;
    data.claims[0] = 1.0; // only one claim in the whole portfolio
    auto report = bootstrap_evaluate(data, all_variables(), 10, 0.2, 1);
    std::size_t failed = 0;
    for (const auto& t : report.trials) {
        if (!t.ok) {
            ++failed;
            EXPECT_FALSE(t.error.empty());
        }
    }
    EXPECT_GT(failed, 0u);
    std::ostringstream plot;
    write_plot_csv(plot, report);
    EXPECT_NE(plot.str().find(",,\n"), std::string::npos);
    auto j = to_json(report);
    for (const auto& t : j["trials"])
        if (!t["ok"].get<bool>()) {
            EXPECT_TRUE(t.contains("error"));
        }
}

TEST(BootstrapEvaluate, RejectsBadArguments) {
    const auto data = small_portfolio(200, 1);
    EXPECT_THROW(bootstrap_evaluate(data, all_variables(), 0, 0.2, 1), InputError);
    EXPECT_THROW(bootstrap_evaluate(data, all_variables(), 1, 0.0, 1), InputError);
    EXPECT_THROW(bootstrap_evaluate(data, all_variables(), 1, 1.0, 1), InputError);
}

TEST(ImprovementSummary, HandComputedThreeTrials) {
    GiniReport r;
    r.trials = {{0, 1, true, "", 8, 2, 0.10, 0.30, 0.35, 0, 0, 0},
                {1, 2, true, "", 8, 2, 0.12, 0.32, 0.31, 0, 0, 0},
                {2, 3, true, "", 8, 2, 0.08, 0.28, 0.34, 0, 0, 0},
                {3, 4, false, "UndefinedLorenz: x", 8, 2, 0, 0, 0, 0, 0, 0}};
    auto s = improvement_summary(r);
    EXPECT_EQ(s.successful, 3u);
    EXPECT_EQ(s.failed, 1u);
    EXPECT_NEAR(s.mean_a, 0.10, 1e-15);
    EXPECT_NEAR(s.mean_b, 0.30, 1e-15);
    EXPECT_NEAR(s.mean_c, 1.00 / 3.0, 1e-15);
    EXPECT_NEAR(s.mean_delta, (0.05 - 0.01 + 0.06) / 3.0, 1e-15);
    EXPECT_EQ(s.win_count, 2u);

    GiniReport none;
    none.trials = {r.trials[3]};
    EXPECT_THROW(improvement_summary(none), InputError);
}

TEST(PlotCsv, HeaderAndRows) {
    GiniReport r;
    r.trials = {{0, 1, true, "", 8, 2, 0.5, 0.25, 0.125, 0, 0, 0}, {1, 2, false, "e", 8, 2, 0, 0, 0, 0, 0, 0}};
    std::ostringstream out;
    write_plot_csv(out, r);
    EXPECT_EQ(out.str(), "trial_index,gini_A,gini_B,gini_C\n0,0.5,0.25,0.125\n1,,,\n");
}
