#include "erta/schedule.hpp"

#include <algorithm>
#include <stdexcept>

namespace erta {

namespace {
constexpr double kNormFloor = 1e-30;
}

PhiEntry compute_phi(const StateVec& v_tilde, const StateVec& v, const StateVec& v_next) {
    require_same_shape(v_tilde, v, "compute_phi");
    require_same_shape(v, v_next, "compute_phi");

    PhiEntry e;
    e.numerator = l1_norm(sub(v_tilde, v));
    e.denominator = l1_norm(sub(v, v_next));

    if (e.denominator < kNormFloor) {
        // Stationary velocity: any measurable shift forces the maximal
        // shrink, no shift keeps the step untouched.
        e.phi = (e.numerator < kNormFloor) ? 1.0 : 0.0;
        return e;
    }
    e.phi = std::clamp(1.0 - e.numerator / e.denominator, 0.0, 1.0);
    return e;
}

StepSchedule build_schedule(int t_steps, const std::vector<int>& cached_steps, const PhiRecord& phi) {
    if (t_steps < 1) {
        throw std::invalid_argument("build_schedule: step count must be >= 1");
    }
    std::vector<bool> in_set(static_cast<std::size_t>(t_steps), false);
    for (int s : cached_steps) {
        if (s < 0 || s >= t_steps) {
            throw std::invalid_argument("build_schedule: cached step " + std::to_string(s) +
                                        " out of range for T=" + std::to_string(t_steps));
        }
        if (s == 0) {
            throw std::invalid_argument(
                "build_schedule: step 0 cannot be cached (no remaining steps to absorb the budget)");
        }
        in_set[static_cast<std::size_t>(s)] = true;
    }

    StepSchedule schedule;
    schedule.delta_t.assign(static_cast<std::size_t>(t_steps), 0.0);

    double quantum = 1.0 / static_cast<double>(t_steps);
    double consumed = 0.0;
    for (int i = t_steps - 1; i >= 0; --i) {
        double dt = quantum;
        if (in_set[static_cast<std::size_t>(i)]) {
            auto it = phi.find(i);
            if (it == phi.end()) {
                throw std::invalid_argument("build_schedule: no phi entry for cached step " +
                                            std::to_string(i));
            }
            dt = quantum * std::clamp(it->second.phi, 0.0, 1.0);
        }
        schedule.delta_t[static_cast<std::size_t>(i)] = dt;
        consumed += dt;
        const int remaining = i;  // steps i-1 .. 0 still to process
        // Recomputing after an unshrunk step is an identity in exact
        // arithmetic; skipping it there keeps uniform schedules bit-uniform.
        if (remaining > 0 && dt != quantum) {
            quantum = (1.0 - consumed) / static_cast<double>(remaining);
        }
    }
    return schedule;
}

}  // namespace erta
