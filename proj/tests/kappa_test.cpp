#include <streetrisk/kappa.hpp>

#include <gtest/gtest.h>

#include "test_oracles.hpp"

#include <algorithm>
#include <random>

using namespace streetrisk;

TEST(FleissKappa, HandExampleIsMinusOneThird) {
    // item 1: both raters "A"; item 2: one "A", one "B"
    CountTable t{{2, 0}, {1, 1}};
    EXPECT_EQ(fleiss_kappa(t, 2), -1.0 / 3.0);
}

TEST(FleissKappa, PerfectAgreementAcrossTwoCategories) {
    CountTable t{{3, 0}, {0, 3}};
    EXPECT_EQ(fleiss_kappa(t, 3), 1.0);
}

TEST(FleissKappa, AllOneCategoryIsDegenerate) {
    CountTable t{{3, 0}, {3, 0}, {3, 0}};
    EXPECT_THROW(fleiss_kappa(t, 3), DegenerateAgreement);
}

TEST(FleissKappa, UnequalRatingsPerItemIsAnError) {
    CountTable t{{2, 0}, {1, 2}};
    EXPECT_THROW(fleiss_kappa(t, 2), InputError);
    EXPECT_THROW(fleiss_kappa({{1, 0}}, 1), InputError);
    EXPECT_THROW(fleiss_kappa({{2}}, 2), InputError);
}

TEST(FleissKappa, MatchesBruteForceOracleOnRandomInstances) {
    std::mt19937_64 rng(2019);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int items = 1 + static_cast<int>(rng() % 10);
        const int raters = 2 + static_cast<int>(rng() % 4);
        const int cats = 2 + static_cast<int>(rng() % 3);
        auto ratings = oracle::random_ratings(rng, items, raters, cats);
        auto expected = oracle::brute_force_kappa(ratings, cats);
        auto table = oracle::to_counts(ratings, cats);
        if (!expected) {
            EXPECT_THROW(fleiss_kappa(table, raters), DegenerateAgreement);
            continue;
        }
        EXPECT_NEAR(fleiss_kappa(table, raters), *expected, 1e-12);
        ++checked;
    }
    EXPECT_GT(checked, 900);
}

TEST(FleissKappa, InvariantUnderCategoryAndItemPermutation) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto ratings = oracle::random_ratings(rng, 8, 4, 4);
        auto table = oracle::to_counts(ratings, 4);
        double k;
        try {
            k = fleiss_kappa(table, 4);
        } catch (const DegenerateAgreement&) {
            continue;
        }
        auto shuffled = table;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::vector<int> perm{0, 1, 2, 3};
        std::shuffle(perm.begin(), perm.end(), rng);
        for (auto& row : shuffled) {
            auto copy = row;
            for (int j = 0; j < 4; ++j) row[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = copy[static_cast<std::size_t>(j)];
        }
        EXPECT_EQ(fleiss_kappa(shuffled, 4), k);
    }
}

TEST(FleissKappa, EqualsOneExactlyWhenUnanimousWithTwoCategoriesUsed) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        auto ratings = oracle::random_ratings(rng, 2 + static_cast<int>(rng() % 6), 3, 3);
        bool unanimous = (rng() % 2) == 0;
        if (unanimous)
            for (auto& item : ratings) std::fill(item.begin(), item.end(), item.front());
        auto table = oracle::to_counts(ratings, 3);
        std::set<int> used;
        bool all_unanimous = true;
        for (const auto& item : ratings) {
            used.insert(item.begin(), item.end());
            all_unanimous &= std::all_of(item.begin(), item.end(), [&](int c) { return c == item.front(); });
        }
        if (used.size() < 2) {
            EXPECT_THROW(fleiss_kappa(table, 3), DegenerateAgreement);
            continue;
        }
        EXPECT_EQ(fleiss_kappa(table, 3) == 1.0, all_unanimous);
    }
}

TEST(InterpretKappa, TableBands) {
    EXPECT_EQ(interpret_kappa(0.52), "moderate agreement");
    EXPECT_EQ(interpret_kappa(0.79), "substantial agreement");
    EXPECT_EQ(interpret_kappa(0.32), "fair agreement");
    EXPECT_EQ(interpret_kappa(0.0), "poor agreement");
    EXPECT_EQ(interpret_kappa(-0.5), "poor agreement");
    EXPECT_EQ(interpret_kappa(0.20), "slight agreement");
    EXPECT_EQ(interpret_kappa(0.2000001), "fair agreement");
    EXPECT_EQ(interpret_kappa(0.60), "moderate agreement");
    EXPECT_EQ(interpret_kappa(0.80), "substantial agreement");
    EXPECT_EQ(interpret_kappa(1.0), "almost perfect agreement");
    EXPECT_THROW(interpret_kappa(1.01), InputError);
    EXPECT_THROW(interpret_kappa(-1.01), InputError);
}

// ---------------------------------------------------------------------------

namespace {

AnnotationRecord rec(const std::string& address, const std::string& annotator, std::vector<std::string> hood,
                     double density, const std::string& sv, const std::string& type, double age, double cond,
                     double wealth) {
    return {address, annotator, "t", {hood, density, sv, type, age, cond, wealth}};
}

} // namespace

TEST(AgreementReport, SevenRowsWithBruteForceKappas) {
    const auto schema = default_schema();
    std::mt19937_64 rng(3);
    const std::vector<std::string> raters{"r1", "r2", "r3", "r4"};
    std::vector<AnnotationRecord> recs;
    std::vector<std::string> common;
    for (int i = 0; i < 60; ++i) {
        const std::string address = "A" + std::to_string(i);
        common.push_back(address);
        // Engineered agreement: each rater copies a base value with some probability.
        const int base_age = 1 + static_cast<int>(rng() % 3);
        const int base_density = 1 + static_cast<int>(rng() % 5);
        const auto base_type = schema.variables[3].codes[rng() % 5];
        for (const auto& r : raters) {
            auto noisy = [&](int base, int lo, int hi) {
                return (rng() % 10) < 7 ? base : lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1));
            };
            std::vector<std::string> hood{(rng() % 10) ? "residential" : "industrial"};
            if (rng() % 4 == 0) hood.push_back("commercial");
            hood = canonical_codes(schema.variables[0], hood);
            recs.push_back(rec(address, r, hood, noisy(base_density, 1, 5), (rng() % 5) ? "good" : "bad",
                               (rng() % 10) < 8 ? base_type : schema.variables[3].codes[rng() % 5],
                               noisy(base_age, 1, 3), noisy(base_age, 1, 3), noisy(5, 1, 10)));
        }
    }
    // Some non-common noise that must be ignored.
    recs.push_back(rec("Z", "r1", {"industrial"}, 1, "good", "other", 1, 1, 1));

    auto report = agreement_report(recs, schema, common, raters);
    ASSERT_EQ(report.variables.size(), 7u);

    // Oracle on single-choice / ordinal variables.
    for (std::size_t vi : {1u, 2u, 3u, 4u, 5u, 6u}) {
        const auto& v = schema.variables[vi];
        std::vector<std::vector<int>> ratings;
        for (int i = 0; i < 60; ++i) {
            std::vector<int> item;
            for (const auto& r : raters) {
                for (const auto& x : recs)
                    if (x.address_id == "A" + std::to_string(i) && x.annotator_id == r)
                        item.push_back(v.is_choice() ? v.code_index(x.code(vi)) : static_cast<int>(x.ordinal(vi)) - v.min);
            }
            ratings.push_back(item);
        }
        auto expected = oracle::brute_force_kappa(ratings, static_cast<int>(v.granularity()));
        ASSERT_TRUE(expected.has_value()) << v.name;
        ASSERT_TRUE(report.variables[vi].kappa.has_value()) << v.name;
        EXPECT_NEAR(*report.variables[vi].kappa, *expected, 1e-12) << v.name;
        EXPECT_EQ(report.variables[vi].band, interpret_kappa(*expected));
        EXPECT_EQ(report.variables[vi].items, 60u);
        EXPECT_EQ(report.variables[vi].raters, 4u);
    }

    // Multi-choice: mean over non-degenerate per-code binary kappas.
    const auto& hood = report.variables[0];
    ASSERT_EQ(hood.per_choice.size(), 7u);
    double sum = 0.0;
    int defined = 0;
    for (const auto& code : schema.variables[0].codes) {
        std::vector<std::vector<int>> ratings;
        for (int i = 0; i < 60; ++i) {
            std::vector<int> item;
            for (const auto& r : raters)
                for (const auto& x : recs)
                    if (x.address_id == "A" + std::to_string(i) && x.annotator_id == r) {
                        const auto& set = x.codes(0);
                        item.push_back(std::find(set.begin(), set.end(), code) != set.end() ? 0 : 1);
                    }
            ratings.push_back(item);
        }
        if (auto k = oracle::brute_force_kappa(ratings, 2)) {
            sum += *k;
            ++defined;
        }
    }
    ASSERT_EQ(defined, 3); // only residential, commercial and industrial vary
    ASSERT_TRUE(hood.kappa.has_value());
    EXPECT_NEAR(*hood.kappa, sum / defined, 1e-12);
}

TEST(AgreementReport, OneRaterIsAnError) {
    const auto schema = default_schema();
    std::vector<AnnotationRecord> recs{rec("A", "r1", {"residential"}, 1, "good", "other", 1, 1, 1)};
    try {
        agreement_report(recs, schema, {"A"});
        FAIL();
    } catch (const InputError& e) {
        EXPECT_STREQ(e.what(), "at least 2 raters required");
    }
}

TEST(AgreementReport, DegenerateVariableIsReportedNotFatal) {
    const auto schema = default_schema();
    std::vector<AnnotationRecord> recs{
        rec("A", "r1", {"residential"}, 1, "good", "other", 1, 1, 1),
        rec("A", "r2", {"residential"}, 2, "good", "other", 2, 1, 1),
        rec("B", "r1", {"residential"}, 3, "good", "other", 3, 1, 1),
        rec("B", "r2", {"residential"}, 3, "good", "other", 3, 1, 1),
    };
    auto report = agreement_report(recs, schema, {"A", "B"});
    EXPECT_FALSE(report.variables[2].kappa.has_value());
    EXPECT_EQ(report.variables[2].band, "degenerate");
    EXPECT_TRUE(report.variables[4].kappa.has_value());
}

TEST(AgreementReport, MissingRatingOnCommonSetIsAnError) {
    const auto schema = default_schema();
    std::vector<AnnotationRecord> recs{
        rec("A", "r1", {"residential"}, 1, "good", "other", 1, 1, 1),
        rec("A", "r2", {"residential"}, 2, "good", "other", 2, 1, 1),
        rec("B", "r1", {"residential"}, 3, "good", "other", 3, 1, 1),
    };
    EXPECT_THROW(agreement_report(recs, schema, {"A", "B"}, {"r1", "r2"}), InputError);
}
