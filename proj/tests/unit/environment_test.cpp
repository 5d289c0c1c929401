#include <gtest/gtest.h>

#include <cmath>

#include "fogslice/environment.hpp"

using namespace fogslice;

namespace {

// Table I, rows P(u>=8) and mean utility, per environment.
constexpr double kTableTail[5] = {0.023, 0.115, 0.229, 0.343, 0.435};
constexpr double kTableMean[5] = {3.82, 4.589, 5.55, 6.5, 7.27};

}  // namespace

TEST(Environment, BuiltinColumnsMatchTable) {
    const auto e3 = builtin_profile("E3");
    EXPECT_DOUBLE_EQ(e3.utility.probs[2], 0.192);
    EXPECT_DOUBLE_EQ(e3.utility.probs[9], 0.029);
    EXPECT_NEAR(builtin_profile("E1").utility.tail(8), 0.023, 1e-12);
}

TEST(Environment, ColumnsSumToOne) {
    for (const auto& id : builtin_profile_ids()) {
        const auto p = builtin_profile(id);
        double s = 0.0;
        for (double x : p.utility.probs) s += x;
        EXPECT_NEAR(s, 1.0, 1e-9) << id;
        EXPECT_NO_THROW(p.validate(7));
    }
}

TEST(Environment, SummaryRowsAgreeWithColumns) {
    // The table's own summary rows are rounded; they bound our column arithmetic.
    for (int i = 0; i < 5; ++i) {
        const auto p = builtin_profile(builtin_profile_ids()[static_cast<std::size_t>(i)]);
        EXPECT_NEAR(p.utility.tail(8), kTableTail[i], 1e-9);
        EXPECT_NEAR(p.utility.mean(), kTableMean[i], 0.006);
    }
}

TEST(Environment, UnknownProfileIsConfigError) {
    EXPECT_THROW(builtin_profile("E6"), ConfigError);
}

TEST(Environment, LoadDistributionMatchesSetup) {
    const auto l = default_load_distribution();
    EXPECT_EQ(l.c_values, (std::vector<int>{1, 2, 3, 4}));
    EXPECT_EQ(l.h_values, (std::vector<int>{5, 10, 15, 20, 25, 30}));
    EXPECT_EQ(l.c_max(), 4);
    EXPECT_EQ(l.h_max(), 30);
}

TEST(Environment, ValidationRejectsBadDistributions) {
    auto p = builtin_profile("E2");
    p.utility.probs[0] += 0.01;
    EXPECT_THROW(p.validate(), ConfigError);

    auto q = builtin_profile("E2");
    q.load.c_values = {1, 2, 3, 8};
    EXPECT_THROW(q.validate(7), ConfigError);

    auto r = builtin_profile("E2");
    r.load.h_probs = {0.5, 0.5};
    EXPECT_THROW(r.validate(), ConfigError);

    auto s = builtin_profile("E2");
    s.primary_fn_rule.weights = {0.5, 0.6};
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Environment, UtilityFrequenciesWithinThreeSigma) {
    constexpr int n = 100000;
    for (const auto& id : builtin_profile_ids()) {
        const auto p = builtin_profile(id);
        // the stream a run with the default master seed draws from
        Rng rng = make_rng(1, "environment");
        std::array<int, kMaxUtility> counts{};
        for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_request(p, 7, i, rng).u - 1)];
        for (int u = 0; u < kMaxUtility; ++u) {
            const double pu = p.utility.probs[static_cast<std::size_t>(u)];
            const double sigma = std::sqrt(pu * (1.0 - pu) / n);
            EXPECT_LE(std::abs(counts[static_cast<std::size_t>(u)] / double(n) - pu), 3.0 * sigma)
                << id << " u=" << u + 1;
        }
    }
}

TEST(Environment, ChiSquareAveragedOverSeeds) {
    // Pearson statistic of 10 classes has mean 9 and variance 18 under a correct sampler.
    constexpr int seeds = 40, n = 20000;
    for (const auto& id : builtin_profile_ids()) {
        const auto p = builtin_profile(id);
        double total = 0.0;
        for (int s = 0; s < seeds; ++s) {
            Rng rng = make_rng(static_cast<std::uint64_t>(s), "chi/" + id);
            std::array<int, kMaxUtility> counts{};
            for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_request(p, 7, i, rng).u - 1)];
            for (std::size_t u = 0; u < kMaxUtility; ++u) {
                const double e = n * p.utility.probs[u];
                total += (counts[u] - e) * (counts[u] - e) / e;
            }
        }
        EXPECT_NEAR(total / seeds, 9.0, 3.0 * std::sqrt(18.0 / seeds)) << id;
    }
}

TEST(Environment, SampledHighUtilityShareAndMean) {
    constexpr int n = 100000;
    Rng rng = make_rng(5, "e3");
    const auto e3 = builtin_profile("E3");
    int high = 0;
    for (int i = 0; i < n; ++i) high += sample_request(e3, 7, i, rng).u >= 8;
    EXPECT_NEAR(high / double(n), 0.229, 0.01);

    const auto e1 = builtin_profile("E1");
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample_request(e1, 7, i, rng).u;
    EXPECT_NEAR(sum / n, 3.82, 0.05);
}

TEST(Environment, LoadAndPrimaryFnFrequencies) {
    constexpr int n = 100000;
    const auto p = builtin_profile("E4");
    Rng rng = make_rng(8, "load");
    std::array<int, 5> c{};
    std::array<int, 31> h{};
    std::array<int, 8> fn{};
    for (int i = 0; i < n; ++i) {
        const auto r = sample_request(p, 7, i, rng);
        ++c[static_cast<std::size_t>(r.c)];
        ++h[static_cast<std::size_t>(r.h)];
        ++fn[static_cast<std::size_t>(r.primary_fn)];
        ASSERT_GE(r.primary_fn, 1);
        ASSERT_LE(r.primary_fn, 7);
    }
    auto check = [&](int count, double prob) {
        EXPECT_LE(std::abs(count / double(n) - prob), 3.0 * std::sqrt(prob * (1 - prob) / n));
    };
    for (std::size_t i = 0; i < p.load.c_values.size(); ++i) check(c[static_cast<std::size_t>(p.load.c_values[i])], p.load.c_probs[i]);
    for (std::size_t i = 0; i < p.load.h_values.size(); ++i) check(h[static_cast<std::size_t>(p.load.h_values[i])], p.load.h_probs[i]);
    for (int f = 1; f <= 7; ++f) check(fn[static_cast<std::size_t>(f)], 1.0 / 7);
}

TEST(Environment, DegenerateProfile) {
    EnvironmentProfile p;
    p.id = "fixed";
    p.utility.probs.fill(0.0);
    p.utility.probs[4] = 1.0;
    p.load = {{3}, {1.0}, {10}, {1.0}};
    p.primary_fn_rule.weights = {0.0, 1.0, 0.0};
    Rng rng = make_rng(1, "x");
    for (int t = 0; t < 100; ++t) {
        const auto r = sample_request(p, 3, t, rng);
        EXPECT_EQ(r, (TaskRequest{5, 3, 10, 2, t}));
    }
}

TEST(Environment, SameSeedSameStream) {
    const auto p = builtin_profile("E3");
    Rng a = make_rng(42, "environment"), b = make_rng(42, "environment"), c = make_rng(43, "environment");
    bool differs = false;
    for (int t = 0; t < 1000; ++t) {
        const auto ra = sample_request(p, 7, t, a);
        EXPECT_EQ(ra, sample_request(p, 7, t, b));
        differs |= !(ra == sample_request(p, 7, t, c));
    }
    EXPECT_TRUE(differs);
}

TEST(Schedule, DaySwitchTimes) {
    const auto s = day_schedule();
    EXPECT_EQ(switch_times(s), (std::vector<std::int64_t>{80000, 140000, 200000, 260000}));
    EXPECT_EQ(schedule_length(s), 320000);
    EXPECT_EQ(advance_schedule(s, 0).id, "E4");
    EXPECT_EQ(advance_schedule(s, 79999).id, "E4");
    EXPECT_EQ(advance_schedule(s, 80000).id, "E1");
    EXPECT_EQ(advance_schedule(s, 260000).id, "E5");
    EXPECT_EQ(advance_schedule(s, 10'000'000).id, "E5");
}

TEST(Schedule, HalfOpenSegments) {
    auto a = builtin_profile("E1"), b = builtin_profile("E2");
    const Schedule s{{a, 10}, {b, 10}};
    EXPECT_EQ(advance_schedule(s, 9).id, "E1");
    EXPECT_EQ(advance_schedule(s, 10).id, "E2");
    const Schedule one{{a, 1}};
    for (std::int64_t t : {0, 1, 5000}) EXPECT_EQ(advance_schedule(one, t).id, "E1");
}

TEST(Schedule, Validation) {
    auto a = builtin_profile("E1");
    EXPECT_THROW(validate_schedule({}), ConfigError);
    EXPECT_THROW(validate_schedule({{a, 0}}), ConfigError);
    EXPECT_THROW(validate_schedule({{a, 5}, {a, 5}}), ConfigError);
    EXPECT_NO_THROW(validate_schedule({{a, 5}, {builtin_profile("E2"), 5}}));
}
