#include <gtest/gtest.h>

#include "fogslice/metrics.hpp"

using namespace fogslice;

TEST(Metrics, CountersFollowIndicators) {
    KpiCounters k;
    record_step(k, {9, 1, 5, 1, 0}, Action::serve(1, 7), 0.5, 8);
    EXPECT_EQ(k.received_high, 1);
    EXPECT_EQ(k.served_high, 1);
    record_step(k, {3, 1, 5, 1, 1}, Action::cloud(7), 1.0, 8);
    EXPECT_EQ(k.received_low, 1);
    EXPECT_EQ(k.served_low, 0);
    EXPECT_DOUBLE_EQ(k.utilization_sum, 1.5);
    EXPECT_EQ(k.steps, 2);
}

TEST(Metrics, FullClusterAddsOne) {
    const auto topo = ClusterTopology::fully_connected(2, 2);
    ClusterState s(2);
    s = allocate(s, topo, 1, {1, 2, 3, 1, 0});
    s = allocate(s, topo, 2, {1, 2, 3, 2, 0});
    KpiCounters k;
    record_step(k, {1, 1, 1, 1, 0}, Action::cloud(2), s, topo, 8);
    EXPECT_EQ(k.utilization_sum, 1.0);
}

#ifndef NDEBUG
TEST(Metrics, DoubleCountIsContractViolation) {
    KpiCounters k;
    record_step(k, {9, 1, 5, 1, 4}, Action::serve(1, 7), 0.5, 8);
    EXPECT_THROW(record_step(k, {9, 1, 5, 1, 4}, Action::serve(1, 7), 0.5, 8), ContractViolation);
}
#endif

TEST(Metrics, FinalizeExamples) {
    KpiCounters k;
    k.received_high = 4;
    k.served_high = 3;
    k.received_low = 6;
    k.served_low = 2;
    k.utilization_sum = 6.0;
    k.steps = 10;
    const auto r = finalize(k, {0.7, 0.3});
    EXPECT_DOUBLE_EQ(r.gos, 0.75);
    EXPECT_DOUBLE_EQ(r.utilization, 0.6);
    EXPECT_DOUBLE_EQ(r.cloud_avoidance, 0.5);
    EXPECT_DOUBLE_EQ(r.performance, 0.7 * 0.75 + 0.3 * 0.6);

    k.served_high = 4;
    k.received_high = 5;  // GoS 0.8
    EXPECT_NEAR(finalize(k, {0.7, 0.3}).performance, 0.74, 1e-12);
}

TEST(Metrics, VacuousValues) {
    const auto r = finalize(KpiCounters{}, {0.5, 0.5});
    EXPECT_EQ(r.gos, 1.0);
    EXPECT_EQ(r.utilization, 0.0);
    EXPECT_EQ(r.cloud_avoidance, 1.0);
}

TEST(Metrics, ServeEverythingMeansFullCloudAvoidance) {
    KpiCounters k;
    for (int t = 0; t < 100; ++t) record_step(k, {1 + t % 10, 1, 5, 1, t}, Action::serve(1, 3), 0.1, 8);
    EXPECT_EQ(finalize(k, {0.7, 0.3}).cloud_avoidance, 1.0);
    record_step(k, {1, 1, 5, 1, 100}, Action::cloud(3), 0.1, 8);
    EXPECT_LT(finalize(k, {0.7, 0.3}).cloud_avoidance, 1.0);
}

TEST(Metrics, BoundsAndMonotonicity) {
    Rng rng = make_rng(1, "m");
    for (int rep = 0; rep < 500; ++rep) {
        KpiCounters k;
        k.received_high = static_cast<std::int64_t>(uniform_index(rng, 50));
        k.served_high = static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(k.received_high) + 1));
        k.received_low = static_cast<std::int64_t>(uniform_index(rng, 50));
        k.served_low = static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(k.received_low) + 1));
        k.steps = k.received_high + k.received_low;
        k.utilization_sum = uniform01(rng) * static_cast<double>(k.steps);
        const auto w = ScenarioWeights::from_gos_weight(uniform01(rng));
        const auto r = finalize(k, w);
        for (double x : {r.gos, r.utilization, r.cloud_avoidance, r.performance}) {
            ASSERT_GE(x, 0.0);
            ASSERT_LE(x, 1.0);
        }
        if (k.served_high < k.received_high) {
            auto more = k;
            ++more.served_high;
            ASSERT_GE(finalize(more, w).performance, r.performance);
        }
        auto busier = k;
        busier.utilization_sum = std::min(static_cast<double>(k.steps), k.utilization_sum + 1.0);
        ASSERT_GE(finalize(busier, w).performance, r.performance);
    }
}

TEST(Metrics, WeightsValidation) {
    EXPECT_THROW(ScenarioWeights({0.7, 0.4}).validate(), ConfigError);
    EXPECT_THROW(ScenarioWeights({-0.1, 1.1}).validate(), ConfigError);
    EXPECT_NO_THROW(ScenarioWeights::from_gos_weight(0.3).validate());
}
