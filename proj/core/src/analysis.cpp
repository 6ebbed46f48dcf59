#include "erta/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace erta {

StateVec feature_shift(const StateVec& v_tilde, const StateVec& v) {
    require_same_shape(v_tilde, v, "feature_shift");
    return sub(v_tilde, v);
}

namespace {

void check_comparable(const TrajectoryRecord& cached, const TrajectoryRecord& full) {
    if (cached.T != full.T) {
        throw std::invalid_argument("trajectory comparison: step counts differ (" +
                                    std::to_string(cached.T) + " vs " + std::to_string(full.T) + ")");
    }
    if (cached.delta_t != full.delta_t) {
        throw std::invalid_argument(
            "trajectory comparison: schedules differ; deviation isolation requires matched schedules");
    }
    if (cached.steps.empty() || full.steps.empty()) {
        throw std::invalid_argument("trajectory comparison: records must carry full step logs");
    }
    const StateVec& a = cached.steps.front().state;
    const StateVec& b = full.steps.front().state;
    require_same_shape(a, b, "trajectory comparison");
    if (a.values != b.values) {
        throw std::invalid_argument("trajectory comparison: start states differ");
    }
}

std::vector<std::pair<int, int>> maximal_cached_runs(const TrajectoryRecord& cached) {
    std::vector<std::pair<int, int>> runs;
    int run_first = -1;
    int run_last = -1;
    for (const auto& s : cached.steps) {  // execution order, step descending
        if (s.cached) {
            if (run_first < 0) {
                run_first = s.step;
            }
            run_last = s.step;
        } else if (run_first >= 0) {
            runs.emplace_back(run_first, run_last);
            run_first = -1;
        }
    }
    if (run_first >= 0) {
        runs.emplace_back(run_first, run_last);
    }
    return runs;
}

}  // namespace

ErrorLedger trajectory_deviation(const TrajectoryRecord& cached, const TrajectoryRecord& full) {
    check_comparable(cached, full);

    ErrorLedger ledger;
    ledger.T = cached.T;
    ledger.dt = cached.delta_t;
    ledger.runs = maximal_cached_runs(cached);
    ledger.delta.resize(static_cast<std::size_t>(cached.T));

    for (std::size_t k = 0; k < cached.steps.size(); ++k) {
        const TrajectoryStep& cs = cached.steps[k];
        const TrajectoryStep& fs = full.steps[k];
        ledger.delta[static_cast<std::size_t>(cs.step)] = sub(cs.state, fs.state);
        if (cs.cached) {
            ledger.cached_steps.push_back(cs.step);
            ledger.eps_cross.emplace(cs.step, sub(cs.velocity, fs.velocity));
        }
    }
    ledger.endpoint_delta = sub(cached.endpoint, full.endpoint);
    return ledger;
}

DecompositionReport verify_decomposition(const FieldSpec& field, const TrajectoryRecord& cached,
                                         const TrajectoryRecord& full) {
    check_comparable(cached, full);

    DecompositionReport report;
    EvalCounter scratch;

    for (const auto& [first, last] : maximal_cached_runs(cached)) {
        const std::size_t n = cached.endpoint.values.size();
        // Shadow trajectory: start from the cached state at run entry and
        // apply the true field velocity at the cached run's own states.
        StateVec shadow = cached.at_step(first).state;
        std::vector<double> accum(n, 0.0);  // sum of dt_k * eps_k over the run
        for (int i = first; i >= last; --i) {
            const TrajectoryStep& s = cached.at_step(i);
            const StateVec v_true = eval_velocity(field, s.state, s.tau, scratch);
            for (std::size_t j = 0; j < n; ++j) {
                accum[j] += s.dt * (s.velocity.values[j] - v_true.values[j]);
            }
            shadow = euler_step(shadow, v_true, s.dt);
        }
        // State reached by the cached run right after the run's last step.
        const StateVec& after =
            (last > 0) ? cached.at_step(last - 1).state : cached.endpoint;

        DecompositionRun run;
        run.first_step = first;
        run.last_step = last;
        run.length = first - last + 1;
        double delta_norm = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double delta_end = after.values[j] - shadow.values[j];
            run.abs_residual = std::max(run.abs_residual, std::fabs(delta_end - accum[j]));
            delta_norm = std::max(delta_norm, std::fabs(delta_end));
        }
        run.rel_residual = run.abs_residual / (1.0 + delta_norm);
        report.max_abs_residual = std::max(report.max_abs_residual, run.abs_residual);
        report.max_rel_residual = std::max(report.max_rel_residual, run.rel_residual);
        report.runs.push_back(run);
    }
    return report;
}

MetricsReport endpoint_metrics(const StateVec& cached_endpoint, const StateVec& reference,
                               const TimingCounts& timing) {
    require_same_shape(cached_endpoint, reference, "endpoint_metrics");

    MetricsReport m;
    m.mse_vs_reference = mean_squared_error(cached_endpoint, reference);

    const auto [lo, hi] = std::minmax_element(reference.values.begin(), reference.values.end());
    m.peak = *hi - *lo;
    if (m.mse_vs_reference == 0.0) {
        m.psnr_db = std::numeric_limits<double>::infinity();
    } else {
        m.psnr_db = 10.0 * std::log10(m.peak * m.peak / m.mse_vs_reference);
    }

    m.mean_rel_l1 = timing.mean_rel_l1;
    m.full_evals = timing.full_evals;
    m.cached_evals = timing.cached_evals;
    m.eval_ratio = timing.cached_evals > 0
                       ? static_cast<double>(timing.full_evals) / static_cast<double>(timing.cached_evals)
                       : 0.0;
    m.full_time_s = timing.full_time_s;
    m.cached_time_s = timing.cached_time_s;
    m.wall_speedup = timing.cached_time_s > 0.0 ? timing.full_time_s / timing.cached_time_s : 0.0;
    return m;
}

}  // namespace erta
