#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "erta/field.hpp"
#include "erta/latent.hpp"
#include "erta/policy.hpp"
#include "erta/rectify.hpp"

namespace erta {

// Per-step interval array. delta_t[i] is the interval consumed at step i;
// steps execute in descending order i = T-1, ..., 0 and the intervals sum
// to the unit time budget.
struct StepSchedule {
    std::vector<double> delta_t;

    int steps() const { return static_cast<int>(delta_t.size()); }

    static StepSchedule uniform(int t_steps);
};

void validate_schedule(const StepSchedule& schedule);

struct SampleOptions {
    bool log_trajectory = true;  // lean mode keeps only the endpoint
};

struct TrajectoryStep {
    int step;           // i
    StateVec state;     // x_i before the update
    StateVec velocity;  // velocity used for the update (reconstructed and/or rectified on cached steps)
    bool cached;
    double dt;
    double tau;         // consumed budget at the start of the step
};

struct TrajectoryRecord {
    int T = 0;
    std::vector<TrajectoryStep> steps;  // execution order (step index descending); empty in lean mode
    std::vector<double> delta_t;        // schedule actually used, always recorded
    StateVec endpoint;                  // state after the final update
    std::uint64_t eval_count = 0;

    const TrajectoryStep& at_step(int step_index) const;
};

// x + dt*v, elementwise.
StateVec euler_step(const StateVec& x, const StateVec& v, double dt);

// Full-compute Euler integration; evaluates the field once per step.
TrajectoryRecord full_sample(const FieldSpec& field, const StateVec& x_start,
                             const StepSchedule& schedule, const SampleOptions& options = {});

// Cache-accelerated integration under a calibrated policy: steps in S reuse
// the cached residual (optionally rectified before the update), all other
// steps evaluate the field and refresh the cache. Field evals = T - |S|.
TrajectoryRecord cached_sample(const FieldSpec& field, const StateVec& x_start,
                               const CachePolicy& policy, RectifyMode rectify_mode,
                               const SampleOptions& options = {});

// One CSV row per step: step, tau, dt, cached, |x|_2, |v|_2.
void write_trajectory_csv(const TrajectoryRecord& record, std::ostream& out);

}  // namespace erta
