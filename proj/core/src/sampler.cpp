#include "erta/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "erta/cache.hpp"

namespace erta {

StepSchedule StepSchedule::uniform(int t_steps) {
    if (t_steps < 1) {
        throw std::invalid_argument("schedule: step count must be >= 1");
    }
    StepSchedule s;
    s.delta_t.assign(static_cast<std::size_t>(t_steps), 1.0 / static_cast<double>(t_steps));
    return s;
}

void validate_schedule(const StepSchedule& schedule) {
    if (schedule.delta_t.empty()) {
        throw std::invalid_argument("schedule: empty interval array");
    }
    for (double dt : schedule.delta_t) {
        if (!std::isfinite(dt) || dt < 0.0) {
            throw std::invalid_argument("schedule: intervals must be finite and >= 0");
        }
    }
}

const TrajectoryStep& TrajectoryRecord::at_step(int step_index) const {
    for (const auto& s : steps) {
        if (s.step == step_index) {
            return s;
        }
    }
    throw std::out_of_range("trajectory record has no step " + std::to_string(step_index));
}

StateVec euler_step(const StateVec& x, const StateVec& v, double dt) {
    require_same_shape(x, v, "euler_step");
    if (!(dt >= 0.0)) {
        throw std::invalid_argument("euler_step: dt must be >= 0");
    }
    StateVec out = x;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] += dt * v.values[i];
    }
    return out;
}

namespace {

// Shared integration loop. velocity_fn(step, x, tau) -> (velocity, cached flag).
template <typename VelocityFn>
TrajectoryRecord integrate(const StateVec& x_start, const StepSchedule& schedule,
                           const SampleOptions& options, VelocityFn&& velocity_fn) {
    validate_schedule(schedule);
    const int T = schedule.steps();

    TrajectoryRecord record;
    record.T = T;
    record.delta_t = schedule.delta_t;
    if (options.log_trajectory) {
        record.steps.reserve(static_cast<std::size_t>(T));
    }

    StateVec x = x_start;
    double tau = 0.0;
    for (int i = T - 1; i >= 0; --i) {
        const double dt = schedule.delta_t[static_cast<std::size_t>(i)];
        auto [v, cached] = velocity_fn(i, x, tau);
        require_same_shape(x, v, "sampler update");
        if (options.log_trajectory) {
            record.steps.push_back(TrajectoryStep{i, x, v, cached, dt, tau});
        }
        x = euler_step(x, v, dt);
        tau += dt;
    }
    record.endpoint = std::move(x);
    return record;
}

}  // namespace

TrajectoryRecord full_sample(const FieldSpec& field, const StateVec& x_start,
                             const StepSchedule& schedule, const SampleOptions& options) {
    EvalCounter counter;
    TrajectoryRecord record =
        integrate(x_start, schedule, options, [&](int i, const StateVec& x, double tau) {
            try {
                return std::pair<StateVec, bool>(eval_velocity(field, x, tau, counter), false);
            } catch (const std::exception& e) {
                throw std::runtime_error("full_sample step " + std::to_string(i) + ": " + e.what());
            }
        });
    record.eval_count = counter.count;
    return record;
}

TrajectoryRecord cached_sample(const FieldSpec& field, const StateVec& x_start,
                               const CachePolicy& policy, RectifyMode rectify_mode,
                               const SampleOptions& options) {
    validate_policy(policy);
    if (rectify_mode != RectifyMode::off && !policy.has_rectification()) {
        throw std::runtime_error("cached_sample: rectify mode '" +
                                 std::string(rectify_mode_name(rectify_mode)) +
                                 "' requested but the policy carries no K/B parameters");
    }

    std::vector<bool> in_set(static_cast<std::size_t>(policy.steps), false);
    for (int s : policy.cached_steps) {
        in_set[static_cast<std::size_t>(s)] = true;
    }

    StepSchedule schedule{policy.delta_t};
    EvalCounter counter;
    ResidualCache cache;

    TrajectoryRecord record =
        integrate(x_start, schedule, options, [&](int i, const StateVec& x, double tau) {
            if (in_set[static_cast<std::size_t>(i)]) {
                StateVec v = cache.reuse(x);
                if (rectify_mode != RectifyMode::off) {
                    v = rectify_velocity(v, policy.k_values[static_cast<std::size_t>(i)],
                                         policy.b_values[static_cast<std::size_t>(i)], rectify_mode);
                }
                return std::pair<StateVec, bool>(std::move(v), true);
            }
            StateVec v = [&] {
                try {
                    return eval_velocity(field, x, tau, counter);
                } catch (const std::exception& e) {
                    throw std::runtime_error("cached_sample step " + std::to_string(i) + ": " + e.what());
                }
            }();
            cache.refresh(v, x, i);
            return std::pair<StateVec, bool>(std::move(v), false);
        });
    record.eval_count = counter.count;
    return record;
}

void write_trajectory_csv(const TrajectoryRecord& record, std::ostream& out) {
    out << "step,tau,dt,cached,x_l2,v_l2\n";
    for (const auto& s : record.steps) {
        out << s.step << ',' << s.tau << ',' << s.dt << ',' << (s.cached ? 1 : 0) << ','
            << l2_norm(s.state) << ',' << l2_norm(s.velocity) << '\n';
    }
}

}  // namespace erta
