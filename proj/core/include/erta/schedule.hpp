#pragma once

#include <map>
#include <vector>

#include "erta/latent.hpp"
#include "erta/sampler.hpp"

namespace erta {

// Timestep-shrink coefficient for one cached step:
// phi = clip(1 - |v_tilde - v|_1 / |v - v_next|_1, 0, 1).
struct PhiEntry {
    double phi = 1.0;
    double numerator = 0.0;    // |v_tilde - v|_1
    double denominator = 0.0;  // |v - v_next|_1
};

// Keyed by cached step index.
using PhiRecord = std::map<int, PhiEntry>;

PhiEntry compute_phi(const StateVec& v_tilde, const StateVec& v, const StateVec& v_next);

// Builds the adjusted schedule: walk i = T-1..0 with a running quantum
// dt_c (initially 1/T); cached steps consume dt_c*phi_i, others dt_c, and
// after every step dt_c becomes remaining budget / remaining steps. The
// shaved budget is thereby redistributed over later steps and the total
// stays exactly 1 (step 0 must not be cached).
StepSchedule build_schedule(int t_steps, const std::vector<int>& cached_steps, const PhiRecord& phi);

}  // namespace erta
