#pragma once

// Experiment orchestration: a single run (environment -> decision -> reward ->
// metrics -> tick), the scenario x environment x policy matrix, the dynamic
// schedule run, and CSV output.

#include <boost/math/distributions/chi_squared.hpp>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fogslice/baselines.hpp"
#include "fogslice/cluster.hpp"
#include "fogslice/config.hpp"
#include "fogslice/dqn_agent.hpp"
#include "fogslice/environment.hpp"
#include "fogslice/metrics.hpp"
#include "fogslice/mdp.hpp"
#include "fogslice/rng.hpp"

namespace fogslice {

/// Two-sample chi-square homogeneity test between a reference window of
/// utilities and the most recent window. After a detection the reference is
/// rebuilt from the next full window.
class UtilityDriftDetector {
public:
    explicit UtilityDriftDetector(const AdaptationConfig& cfg)
        : window_(static_cast<std::size_t>(cfg.window)),
          check_interval_(std::max(cfg.check_interval, 1)),
          quantile_(cfg.quantile) {}

    /// Feeds one utility; returns true when a change is detected at this step.
    bool push(int u) {
        recent_.push_back(u);
        ++current_[static_cast<std::size_t>(u - 1)];
        if (recent_.size() > window_) {
            --current_[static_cast<std::size_t>(recent_.front() - 1)];
            recent_.pop_front();
        }
        if (!has_reference_) {
            if (recent_.size() == window_) {
                reference_ = current_;
                has_reference_ = true;
                since_check_ = 0;
            }
            return false;
        }
        if (++since_check_ < check_interval_ || recent_.size() < window_) return false;
        since_check_ = 0;
        if (statistic(reference_, current_) <= critical(reference_, current_)) return false;
        reset();
        return true;
    }

    bool has_reference() const { return has_reference_; }
    const std::array<std::int64_t, kMaxUtility>& reference() const { return reference_; }

    /// Chi-square statistic of the 2 x C contingency table (empty classes skipped).
    static double statistic(const std::array<std::int64_t, kMaxUtility>& a, const std::array<std::int64_t, kMaxUtility>& b) {
        double na = 0, nb = 0;
        for (std::size_t i = 0; i < kMaxUtility; ++i) {
            na += static_cast<double>(a[i]);
            nb += static_cast<double>(b[i]);
        }
        const double n = na + nb;
        if (na == 0 || nb == 0) return 0.0;
        double x2 = 0.0;
        for (std::size_t i = 0; i < kMaxUtility; ++i) {
            const double col = static_cast<double>(a[i] + b[i]);
            if (col == 0) continue;
            const double ea = na * col / n, eb = nb * col / n;
            x2 += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
        }
        return x2;
    }

    double critical(const std::array<std::int64_t, kMaxUtility>& a, const std::array<std::int64_t, kMaxUtility>& b) const {
        int classes = 0;
        for (std::size_t i = 0; i < kMaxUtility; ++i) classes += (a[i] + b[i]) > 0;
        if (classes < 2) return std::numeric_limits<double>::infinity();
        return boost::math::quantile(boost::math::chi_squared(classes - 1), quantile_);
    }

    /// True when two count vectors are statistically indistinguishable.
    bool same_mix(const std::array<std::int64_t, kMaxUtility>& a, const std::array<std::int64_t, kMaxUtility>& b) const {
        return statistic(a, b) <= critical(a, b);
    }

private:
    void reset() {
        recent_.clear();
        current_.fill(0);
        has_reference_ = false;
    }

    std::size_t window_;
    int check_interval_;
    double quantile_;
    std::deque<int> recent_;
    std::array<std::int64_t, kMaxUtility> current_{};
    std::array<std::int64_t, kMaxUtility> reference_{};
    bool has_reference_ = false;
    int since_check_ = 0;
};

struct WindowRow {
    std::int64_t index = 0;
    std::int64_t t_start = 0;
    std::int64_t t_end = 0;  // exclusive
    Kpis kpis;
    double mean_reward = 0.0;
    double epsilon = 0.0;
    double loss_mean = std::numeric_limits<double>::quiet_NaN();
    KpiCounters counters;
};

struct RunRecord {
    std::string label;
    std::vector<WindowRow> rows;
    Kpis summary;
    KpiCounters totals;
    double mean_reward = 0.0;
    double final_epsilon = 0.0;
    std::optional<std::int64_t> converged_at;  // learning frozen from this step on
    std::vector<std::int64_t> detections;      // drift detections (dynamic runs)
    std::uint64_t config_digest = 0;

    /// KPIs over the last `n` windows (all windows if fewer).
    Kpis tail_kpis(std::size_t n, const ScenarioWeights& w) const {
        KpiCounters acc;
        const std::size_t from = rows.size() > n ? rows.size() - n : 0;
        for (std::size_t i = from; i < rows.size(); ++i) {
            const auto& c = rows[i].counters;
            acc.received_high += c.received_high;
            acc.served_high += c.served_high;
            acc.received_low += c.received_low;
            acc.served_low += c.served_low;
            acc.utilization_sum += c.utilization_sum;
            acc.steps += c.steps;
        }
        return finalize(acc, w);
    }
};

inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline constexpr const char* kRunCsvSchema = "#schema=fogslice.run/1";

/// Windowed rows followed by one summary row (kind = summary, window = -1).
inline std::string run_csv(const RunRecord& r) {
    std::ostringstream os;
    os << kRunCsvSchema << '\n';
    os << "kind,window,t_start,t_end,gos,utilization,cloud_avoidance,performance,mean_reward,epsilon,loss_mean\n";
    auto line = [&](const char* kind, std::int64_t w, std::int64_t a, std::int64_t b, const Kpis& k, double mr, double eps,
                    double loss) {
        os << kind << ',' << w << ',' << a << ',' << b << ',' << format_number(k.gos) << ','
           << format_number(k.utilization) << ',' << format_number(k.cloud_avoidance) << ','
           << format_number(k.performance) << ',' << format_number(mr) << ',' << format_number(eps) << ','
           << format_number(loss) << '\n';
    };
    for (const auto& row : r.rows)
        line("window", row.index, row.t_start, row.t_end, row.kpis, row.mean_reward, row.epsilon, row.loss_mean);
    line("summary", -1, 0, r.totals.steps, r.summary, r.mean_reward, r.final_epsilon, std::numeric_limits<double>::quiet_NaN());
    return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << text;
}

/// Runs one experiment for `cfg.horizon` steps. Deterministic given the config.
/// Throws ConfigError for invalid configs and TrainingFault for non-finite losses.
inline RunRecord run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto& topo = cfg.topology;
    const int k = topo.k;
    const std::int64_t T = cfg.horizon;
    const auto& load0 = cfg.schedule.front().profile.load;

    Rng env_rng = make_rng(cfg.seed, "environment");
    Rng policy_rng = make_rng(cfg.seed, "policy");

    std::optional<DqnAgent> dqn;
    std::optional<QlNecCluster> ql;
    if (cfg.policy == PolicyKind::dqn)
        dqn.emplace(topo, load0.c_max(), load0.h_max(), cfg.agent, derive_seed(cfg.seed, "agent"));
    if (cfg.policy == PolicyKind::ql_nec) ql.emplace(k, cfg.ql.alpha, cfg.ql.gamma);
    EpsilonSchedule eps(cfg.agent, T);
    RewardConvergence convergence(cfg.agent.convergence_window, cfg.agent.convergence_tolerance);
    std::optional<UtilityDriftDetector> detector;
    if (cfg.adapt && cfg.adaptation.mode != AdaptationMode::none) detector.emplace(cfg.adaptation);
    struct BankEntry {
        std::array<std::int64_t, kMaxUtility> mix;
        Network weights;
    };
    std::vector<BankEntry> bank;
    bool bank_lookup_pending = false;
    std::array<std::int64_t, kMaxUtility> last_reference{};

    RunRecord rec;
    rec.config_digest = config_digest(cfg);
    bool frozen = false;

    ClusterState cluster(k);
    KpiCounters window_counters;
    double window_reward = 0.0, window_loss = 0.0, total_reward = 0.0;
    std::int64_t window_losses = 0, window_start = 0;

    auto flush_window = [&](std::int64_t t_end) {
        WindowRow row;
        row.index = static_cast<std::int64_t>(rec.rows.size());
        row.t_start = window_start;
        row.t_end = t_end;
        row.counters = window_counters;
        row.kpis = finalize(window_counters, cfg.weights);
        row.mean_reward = window_counters.steps ? window_reward / static_cast<double>(window_counters.steps) : 0.0;
        row.epsilon = eps.value();
        if (window_losses) row.loss_mean = window_loss / static_cast<double>(window_losses);
        rec.rows.push_back(row);
        window_counters = {};
        window_reward = window_loss = 0.0;
        window_losses = 0;
        window_start = t_end;
    };

    TaskRequest req = sample_request(advance_schedule(cfg.schedule, 0), k, 0, env_rng);
    for (std::int64_t t = 0; t < T; ++t) {
        const auto feasible = feasible_serve_set(cluster, topo, req);
        const double epsilon = frozen ? 0.0 : eps.value();
        Action action;
        StateVector state;
        std::optional<double> reward_override;
        switch (cfg.policy) {
            case PolicyKind::dqn:
                state = dqn->encode(cluster, req);
                action = dqn->select_action(state, feasible, epsilon);
                break;
            case PolicyKind::sau: action = sau_decide(cluster, topo, feasible, cfg.preference); break;
            case PolicyKind::shu: action = shu_decide(cluster, topo, req, feasible, cfg.reward.u_h, cfg.preference); break;
            case PolicyKind::random: action = random_decide(feasible, k, policy_rng); break;
            case PolicyKind::ql_nec: {
                const auto d = ql->decide_and_learn(cluster, topo, req, cfg.reward, epsilon, policy_rng);
                action = d.action;
                reward_override = d.reward;
                break;
            }
        }
        StepOutcome out = step(cluster, req, action, cfg.reward, topo);
        const double reward = reward_override.value_or(out.reward);
        record_step(window_counters, req, action, out.utilization, cfg.reward.u_h);
        record_step(rec.totals, req, action, out.utilization, cfg.reward.u_h);
        window_reward += reward;
        total_reward += reward;

        const std::int64_t t_next = t + 1;
        TaskRequest next_req = sample_request(advance_schedule(cfg.schedule, t_next), k, t_next, env_rng);

        if (dqn && !frozen) {
            Transition tr{std::move(state), action, reward, dqn->encode(out.next, next_req), t_next == T};
            if (auto loss = dqn->learn_step(std::move(tr), t)) {
                window_loss += *loss;
                ++window_losses;
            }
            if (cfg.agent.stop_on_convergence && eps.at_floor() && convergence.push(reward)) {
                frozen = true;
                rec.converged_at = t_next;
            }
        }

        if (detector && detector->push(req.u)) {
            rec.detections.push_back(t);
            if (dqn && !frozen) {
                eps.boost(cfg.adaptation.boost_to);
                if (cfg.adaptation.mode == AdaptationMode::policy_bank) {
                    bank.push_back({last_reference, dqn->online()});
                    bank_lookup_pending = true;
                }
            }
        }
        if (detector && detector->has_reference()) {
            if (bank_lookup_pending && dqn) {
                bank_lookup_pending = false;
                for (const auto& entry : bank)
                    if (detector->same_mix(entry.mix, detector->reference())) {
                        dqn->load_weights(entry.weights);
                        break;
                    }
            }
            last_reference = detector->reference();
        }

        eps.advance();
        cluster = std::move(out.next);
        req = next_req;
        if (t_next - window_start == cfg.window) flush_window(t_next);
    }
    if (window_counters.steps > 0) flush_window(T);
    if (ql) ql->finish();

    rec.summary = finalize(rec.totals, cfg.weights);
    rec.mean_reward = rec.totals.steps ? total_reward / static_cast<double>(rec.totals.steps) : 0.0;
    rec.final_epsilon = frozen ? 0.0 : eps.value();
    if (dqn && !cfg.snapshot_path.empty() && T > 0) dqn->export_policy(rec.config_digest).save(cfg.snapshot_path);
    return rec;
}

/// Same as run_experiment, also writing the CSV to `csv_path` when non-empty.
inline RunRecord run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& csv_path) {
    auto rec = run_experiment(cfg);
    if (!csv_path.empty()) write_text(csv_path, run_csv(rec));
    return rec;
}

struct MatrixOptions {
    std::vector<std::string> scenarios{"R1", "R2", "R3"};
    std::vector<std::string> environments{"E1", "E2", "E3", "E4", "E5"};
    std::vector<PolicyKind> policies{PolicyKind::dqn, PolicyKind::sau, PolicyKind::shu, PolicyKind::ql_nec};
    int replicas = 1;
    int jobs = 1;
    bool write_files = true;
};

struct MatrixCell {
    std::string scenario;
    std::string environment;
    PolicyKind policy = PolicyKind::dqn;
    int replica = 0;
    std::uint64_t seed = 0;
    std::optional<RunRecord> record;
    std::string error;

    std::string name() const {
        return scenario + "_" + environment + "_" + to_string(policy) + (replica ? "_r" + std::to_string(replica) : "");
    }
};

/// Config for one matrix cell: the base config with the scenario's reward system and
/// weights, a static environment, the policy, and a seed shared by every policy of
/// the same (scenario, environment, replica) so they face the same request stream.
inline ExperimentConfig cell_config(const ExperimentConfig& base, const std::string& scen, const std::string& env,
                                    PolicyKind policy, int replica) {
    ExperimentConfig c = base;
    const auto profile = builtin_profile(env);
    c.schedule = {{profile, 1}};
    std::tie(c.reward, c.weights) = scenario(scen, profile.load.c_max(), base.reward.h_max);
    c.reward.u_h = base.reward.u_h;
    c.policy = policy;
    c.adapt = false;
    c.seed = derive_seed(base.seed, "cell/" + scen + "/" + env + "/" + std::to_string(replica));
    return c;
}

inline std::string matrix_summary_csv(const std::vector<MatrixCell>& cells, std::size_t tail_windows) {
    std::ostringstream os;
    os << "#schema=fogslice.matrix/1\n";
    os << "scenario,environment,policy,replica,seed,status,gos,utilization,cloud_avoidance,performance,"
          "tail_gos,tail_utilization,tail_cloud_avoidance,tail_performance,mean_reward\n";
    for (const auto& c : cells) {
        os << c.scenario << ',' << c.environment << ',' << to_string(c.policy) << ',' << c.replica << ',' << c.seed << ',';
        if (!c.record) {
            std::string msg = c.error;
            for (char& ch : msg)
                if (ch == ',' || ch == '\n') ch = ' ';
            os << "failed: " << msg << ",,,,,,,,,\n";
            continue;
        }
        const auto& r = *c.record;
        const auto w = scenario(c.scenario).second;
        const auto tail = r.tail_kpis(tail_windows, w);
        os << "ok," << format_number(r.summary.gos) << ',' << format_number(r.summary.utilization) << ','
           << format_number(r.summary.cloud_avoidance) << ',' << format_number(r.summary.performance) << ','
           << format_number(tail.gos) << ',' << format_number(tail.utilization) << ','
           << format_number(tail.cloud_avoidance) << ',' << format_number(tail.performance) << ','
           << format_number(r.mean_reward) << '\n';
    }
    return os.str();
}

/// Runs every scenario x environment x policy (x replica) cell. A failing cell is
/// recorded and does not stop the others. Cells may run on `opts.jobs` threads;
/// each owns its environment, agent and output file.
inline std::vector<MatrixCell> run_paper_matrix(const ExperimentConfig& base, const MatrixOptions& opts = {},
                                                std::function<void(const MatrixCell&)> on_done = {}) {
    std::vector<MatrixCell> cells;
    for (const auto& s : opts.scenarios)
        for (const auto& e : opts.environments)
            for (int rep = 0; rep < opts.replicas; ++rep)
                for (auto p : opts.policies) {
                    MatrixCell c;
                    c.scenario = s;
                    c.environment = e;
                    c.policy = p;
                    c.replica = rep;
                    cells.push_back(c);
                }
    const std::filesystem::path dir = std::filesystem::path(base.output_dir) / "matrix";
    std::atomic<std::size_t> next{0};
    std::mutex done_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            auto& c = cells[i];
            try {
                const auto cfg = cell_config(base, c.scenario, c.environment, c.policy, c.replica);
                c.seed = cfg.seed;
                c.record = run_experiment(cfg, opts.write_files ? dir / (c.name() + ".csv") : std::filesystem::path{});
            } catch (const std::exception& ex) {
                c.error = ex.what();
            }
            if (on_done) {
                std::lock_guard lock(done_mutex);
                on_done(c);
            }
        }
    };
    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    if (opts.write_files) write_text(std::filesystem::path(base.output_dir) / "matrix_summary.csv", matrix_summary_csv(cells, 10));
    return cells;
}

/// One continuous run across the schedule's profile switches. Learning continues
/// throughout; the drift detector re-boosts exploration (or restores a banked
/// policy) when the utility mix changes.
inline RunRecord run_dynamic(const ExperimentConfig& base, const Schedule& schedule,
                             const std::filesystem::path& csv_path = {}) {
    if (schedule.empty()) throw ConfigError("dynamic run needs a nonempty schedule");
    ExperimentConfig c = base;
    c.schedule = schedule;
    c.adapt = true;
    c.agent.stop_on_convergence = false;
    c.horizon = schedule_length(schedule);
    return run_experiment(c, csv_path);
}

}  // namespace fogslice
