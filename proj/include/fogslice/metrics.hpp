#pragma once

// KPI accounting: grade of service, average utilization, cloud avoidance and
// the weighted performance score.

#include <cmath>
#include <cstdint>
#include <string>

#include "fogslice/cluster.hpp"
#include "fogslice/error.hpp"
#include "fogslice/mdp.hpp"

namespace fogslice {

struct ScenarioWeights {
    double w_g = 0.7;
    double w_u = 0.3;

    void validate() const {
        if (w_g < 0.0 || w_u < 0.0 || std::abs(w_g + w_u - 1.0) > 1e-9)
            throw ConfigError("scenario weights must be nonnegative and sum to 1");
    }
    static ScenarioWeights from_gos_weight(double w_g) { return {w_g, 1.0 - w_g}; }
};

struct Kpis {
    double gos = 1.0;
    double utilization = 0.0;
    double cloud_avoidance = 1.0;
    double performance = 0.0;
};

struct KpiCounters {
    std::int64_t received_high = 0;  // M_h
    std::int64_t served_high = 0;    // m_h
    std::int64_t received_low = 0;   // M_l
    std::int64_t served_low = 0;     // m_l
    double utilization_sum = 0.0;
    std::int64_t steps = 0;          // T
    std::int64_t last_recorded_t = -1;

    std::int64_t received() const { return received_high + received_low; }
    std::int64_t served() const { return served_high + served_low; }
};

/// Counts one decision. `utilization` is the cluster's busy fraction after the
/// decision and before the tick.
inline void record_step(KpiCounters& k, const TaskRequest& req, const Action& action, double utilization, int u_h) {
#ifndef NDEBUG
    if (req.t <= k.last_recorded_t) throw ContractViolation("record_step: time step counted twice");
#endif
    k.last_recorded_t = req.t;
    const bool served = action.is_serve();
    if (req.u >= u_h) {
        ++k.received_high;
        k.served_high += served;
    } else {
        ++k.received_low;
        k.served_low += served;
    }
    k.utilization_sum += utilization;
    ++k.steps;
}

inline void record_step(KpiCounters& k, const TaskRequest& req, const Action& action, const ClusterState& cluster,
                        const ClusterTopology& topo, int u_h) {
    record_step(k, req, action, utilization_snapshot(cluster, topo), u_h);
}

/// Empty denominators give the vacuous values: GoS 1, cloud avoidance 1, utilization 0.
inline Kpis finalize(const KpiCounters& k, const ScenarioWeights& w) {
    Kpis out;
    out.gos = k.received_high == 0 ? 1.0 : static_cast<double>(k.served_high) / static_cast<double>(k.received_high);
    out.utilization = k.steps == 0 ? 0.0 : k.utilization_sum / static_cast<double>(k.steps);
    out.cloud_avoidance = k.received() == 0 ? 1.0 : static_cast<double>(k.served()) / static_cast<double>(k.received());
    out.performance = w.w_g * out.gos + w.w_u * out.utilization;
    return out;
}

}  // namespace fogslice
