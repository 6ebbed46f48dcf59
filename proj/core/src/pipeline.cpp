#include "erta/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace erta {

std::vector<int> uniform_cache_steps(int t_steps, int count) {
    if (t_steps < 3) {
        throw std::invalid_argument("uniform_cache_steps: need T >= 3");
    }
    const int candidates = t_steps - 2;  // steps 1 .. T-2
    if (count < 0 || count > candidates) {
        throw std::invalid_argument("uniform_cache_steps: count " + std::to_string(count) +
                                    " out of range (0.." + std::to_string(candidates) + ")");
    }
    std::vector<int> steps;
    steps.reserve(static_cast<std::size_t>(count));
    // Even spread over the candidate range, descending and duplicate-free.
    int prev = t_steps - 1;
    for (int j = 0; j < count; ++j) {
        const double pos = (count == 1)
                               ? 0.5
                               : static_cast<double>(j) / static_cast<double>(count - 1);
        int s = (t_steps - 2) - static_cast<int>(std::lround(pos * (candidates - 1)));
        if (s >= prev) {
            s = prev - 1;
        }
        steps.push_back(s);
        prev = s;
    }
    return steps;
}

CachePolicy make_uniform_policy(int t_steps, std::vector<int> cached_steps) {
    CachePolicy policy;
    policy.steps = t_steps;
    policy.cached_steps = std::move(cached_steps);
    policy.delta_t = StepSchedule::uniform(t_steps).delta_t;
    policy.phi.assign(static_cast<std::size_t>(t_steps), 1.0);
    validate_policy(policy);
    return policy;
}

SeedRunArtifacts run_policy_seed(const FieldSpec& field, const LatentShape& shape,
                                 std::uint64_t seed, const CachePolicy& policy,
                                 RectifyMode rectify_mode, long t_ref_steps, bool measure_time,
                                 bool with_baseline) {
    using clock = std::chrono::steady_clock;

    SeedRunArtifacts out;
    out.seed = seed;
    const StateVec x0 = sample_noise(seed, shape);

    double cached_time = 0.0;
    {
        const auto t0 = clock::now();
        out.cached = cached_sample(field, x0, policy, rectify_mode);
        if (measure_time) {
            cached_time = std::chrono::duration<double>(clock::now() - t0).count();
        }
    }

    double full_time = 0.0;
    double mean_rel_l1 = 0.0;
    if (with_baseline) {
        const StepSchedule uniform = StepSchedule::uniform(policy.steps);
        const auto t0 = clock::now();
        out.baseline = full_sample(field, x0, uniform);
        if (measure_time) {
            full_time = std::chrono::duration<double>(clock::now() - t0).count();
        }
        out.mse_vs_full = mean_squared_error(out.cached.endpoint, out.baseline->endpoint);

        // Mean relative-l1 between the residuals the cached run used and the
        // baseline's true residuals, over cached steps.
        int counted = 0;
        for (const auto& s : out.cached.steps) {
            if (!s.cached) {
                continue;
            }
            const TrajectoryStep& f = out.baseline->at_step(s.step);
            const StateVec r_used = sub(s.velocity, s.state);
            const StateVec r_full = sub(f.velocity, f.state);
            const double denom = l1_norm(r_full);
            if (denom > 0.0) {
                mean_rel_l1 += l1_norm(sub(r_used, r_full)) / denom;
                ++counted;
            }
        }
        if (counted > 0) {
            mean_rel_l1 /= static_cast<double>(counted);
        }
    }

    out.reference = reference_endpoint(field, x0, t_ref_steps);

    TimingCounts timing;
    timing.full_evals = static_cast<std::uint64_t>(policy.steps);
    timing.cached_evals = out.cached.eval_count;
    timing.full_time_s = full_time;
    timing.cached_time_s = measure_time ? cached_time : 0.0;
    timing.mean_rel_l1 = mean_rel_l1;
    out.metrics = endpoint_metrics(out.cached.endpoint, out.reference, timing);
    return out;
}

}  // namespace erta
