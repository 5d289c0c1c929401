#pragma once

// Environment profiles (utility and load distributions) and the sequential
// request stream, including schedules that switch profiles over time.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "fogslice/error.hpp"
#include "fogslice/rng.hpp"

namespace fogslice {

inline constexpr int kMaxUtility = 10;
inline constexpr double kProbTolerance = 1e-9;

namespace detail {

inline void check_distribution(const std::vector<double>& probs, const std::string& what) {
    if (probs.empty()) throw ConfigError(what + ": empty probability vector");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw ConfigError(what + ": negative or NaN probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTolerance)
        throw ConfigError(what + ": probabilities sum to " + std::to_string(sum) + ", expected 1");
}

}  // namespace detail

/// Probabilities over utility classes u = 1..10 (probs[0] is P(u=1)).
struct UtilityDistribution {
    std::array<double, kMaxUtility> probs{};

    void validate() const {
        detail::check_distribution({probs.begin(), probs.end()}, "utility distribution");
    }

    double mean() const {
        double m = 0.0;
        for (int u = 1; u <= kMaxUtility; ++u) m += u * probs[u - 1];
        return m;
    }

    /// P(u >= threshold).
    double tail(int threshold) const {
        double p = 0.0;
        for (int u = std::max(threshold, 1); u <= kMaxUtility; ++u) p += probs[u - 1];
        return p;
    }
};

/// Block counts c and holding times h with their probabilities.
struct LoadDistribution {
    std::vector<int> c_values;
    std::vector<double> c_probs;
    std::vector<int> h_values;
    std::vector<double> h_probs;

    int c_max() const { return *std::max_element(c_values.begin(), c_values.end()); }
    int h_max() const { return *std::max_element(h_values.begin(), h_values.end()); }

    /// `min_capacity` is the smallest FN capacity of the cluster it will feed.
    void validate(int min_capacity = std::numeric_limits<int>::max()) const {
        if (c_values.size() != c_probs.size() || h_values.size() != h_probs.size())
            throw ConfigError("load distribution: value/probability length mismatch");
        detail::check_distribution(c_probs, "block-count distribution");
        detail::check_distribution(h_probs, "holding-time distribution");
        if (!std::is_sorted(c_values.begin(), c_values.end()) ||
            !std::is_sorted(h_values.begin(), h_values.end()) ||
            std::adjacent_find(c_values.begin(), c_values.end()) != c_values.end() ||
            std::adjacent_find(h_values.begin(), h_values.end()) != h_values.end())
            throw ConfigError("load distribution: values must be strictly increasing");
        for (int c : c_values)
            if (c < 1 || c > min_capacity)
                throw ConfigError("load distribution: block count " + std::to_string(c) +
                                  " outside [1, min capacity]");
        for (int h : h_values)
            if (h < 1) throw ConfigError("load distribution: holding time must be >= 1");
    }
};

/// How the receiving (primary) FN of each request is chosen. An empty weight
/// vector means uniform over the k FNs.
struct PrimaryFnRule {
    std::vector<double> weights;
};

struct EnvironmentProfile {
    std::string id;
    UtilityDistribution utility;
    LoadDistribution load;
    PrimaryFnRule primary_fn_rule;

    void validate(int min_capacity = std::numeric_limits<int>::max()) const {
        utility.validate();
        load.validate(min_capacity);
        if (!primary_fn_rule.weights.empty())
            detail::check_distribution(primary_fn_rule.weights, "primary FN weights");
    }
};

struct ScheduleSegment {
    EnvironmentProfile profile;
    std::int64_t duration = 1;  // time steps
};

using Schedule = std::vector<ScheduleSegment>;

/// One service request. `primary_fn` is 1-based.
struct TaskRequest {
    int u = 1;
    int c = 1;
    int h = 1;
    int primary_fn = 1;
    std::int64_t t = 0;

    int load() const { return c * h; }
    friend bool operator==(const TaskRequest&, const TaskRequest&) = default;
};

/// Block and holding-time statistics shared by all builtin profiles:
/// C = {1,2,3,4} w.p. 0.1..0.4, H = {5,...,30} (literal durations).
inline LoadDistribution default_load_distribution() {
    return LoadDistribution{
        {1, 2, 3, 4},
        {0.1, 0.2, 0.3, 0.4},
        {5, 10, 15, 20, 25, 30},
        {0.05, 0.1, 0.1, 0.15, 0.2, 0.4},
    };
}

inline const std::vector<std::string>& builtin_profile_ids() {
    static const std::vector<std::string> ids{"E1", "E2", "E3", "E4", "E5"};
    return ids;
}

/// Builtin environments E1..E5, ordered by increasing share of high-utility traffic.
inline EnvironmentProfile builtin_profile(const std::string& id) {
    static constexpr std::array<std::array<double, kMaxUtility>, 5> columns{{
        {0.015, 0.073, 0.365, 0.292, 0.205, 0.014, 0.013, 0.011, 0.009, 0.003},
        {0.012, 0.058, 0.288, 0.230, 0.162, 0.071, 0.064, 0.057, 0.043, 0.015},
        {0.008, 0.038, 0.192, 0.154, 0.108, 0.142, 0.129, 0.114, 0.086, 0.029},
        {0.004, 0.019, 0.096, 0.077, 0.054, 0.214, 0.193, 0.171, 0.129, 0.043},
        {0.001, 0.004, 0.019, 0.015, 0.011, 0.271, 0.244, 0.217, 0.163, 0.055},
    }};
    const auto& ids = builtin_profile_ids();
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw ConfigError("unknown environment profile '" + id + "'");
    EnvironmentProfile p;
    p.id = id;
    p.utility.probs = columns[static_cast<std::size_t>(it - ids.begin())];
    p.load = default_load_distribution();
    return p;
}

/// Draws one request at time t. u, c, h and the primary FN are independent draws,
/// in that order, from the same random source.
inline TaskRequest sample_request(const EnvironmentProfile& profile, int k, std::int64_t t, Rng& rng) {
    TaskRequest r;
    r.t = t;
    r.u = static_cast<int>(sample_categorical(rng, profile.utility.probs)) + 1;
    r.c = profile.load.c_values[sample_categorical(rng, profile.load.c_probs)];
    r.h = profile.load.h_values[sample_categorical(rng, profile.load.h_probs)];
    if (profile.primary_fn_rule.weights.empty())
        r.primary_fn = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k))) + 1;
    else
        r.primary_fn = static_cast<int>(sample_categorical(rng, profile.primary_fn_rule.weights)) + 1;
    return r;
}

/// Index of the segment covering t. Segments are half-open [start, start + duration);
/// past the end the last segment persists.
inline std::size_t segment_index(const Schedule& schedule, std::int64_t t) {
    if (schedule.empty()) throw ContractViolation("segment_index: empty schedule");
    std::int64_t start = 0;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        start += schedule[i].duration;
        if (t < start) return i;
    }
    return schedule.size() - 1;
}

inline const EnvironmentProfile& advance_schedule(const Schedule& schedule, std::int64_t t) {
    return schedule[segment_index(schedule, t)].profile;
}

/// Start time of every segment after the first.
inline std::vector<std::int64_t> switch_times(const Schedule& schedule) {
    std::vector<std::int64_t> out;
    std::int64_t start = 0;
    for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
        start += schedule[i].duration;
        out.push_back(start);
    }
    return out;
}

inline std::int64_t schedule_length(const Schedule& schedule) {
    std::int64_t n = 0;
    for (const auto& s : schedule) n += s.duration;
    return n;
}

inline void validate_schedule(const Schedule& schedule, int min_capacity = std::numeric_limits<int>::max()) {
    if (schedule.empty()) throw ConfigError("schedule must have at least one segment");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (schedule[i].duration < 1) throw ConfigError("schedule segment duration must be >= 1");
        schedule[i].profile.validate(min_capacity);
        for (std::size_t j = 0; j < i; ++j)
            if (schedule[j].profile.id == schedule[i].profile.id)
                throw ConfigError("duplicate profile id '" + schedule[i].profile.id + "' in schedule");
    }
}

/// Busy-day schedule E4 -> E1 -> E2 -> E3 -> E5: 40 samples for the first profile,
/// then 30 each, where one sample spans `steps_per_sample` time steps.
inline Schedule day_schedule(std::int64_t steps_per_sample = 2000) {
    Schedule s;
    const std::array<std::pair<const char*, int>, 5> plan{{{"E4", 40}, {"E1", 30}, {"E2", 30}, {"E3", 30}, {"E5", 30}}};
    for (const auto& [id, samples] : plan) s.push_back({builtin_profile(id), samples * steps_per_sample});
    return s;
}

}  // namespace fogslice
