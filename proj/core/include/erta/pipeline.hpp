#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "erta/analysis.hpp"
#include "erta/calibration.hpp"
#include "erta/field.hpp"
#include "erta/policy.hpp"
#include "erta/sampler.hpp"

namespace erta {

// count step indices spread evenly over {1, ..., T-2} (boundaries are never
// cached), returned descending. The fixed-pattern baseline policies and the
// speedup harness use this.
std::vector<int> uniform_cache_steps(int t_steps, int count);

// Synthetic policy: given cached steps, uniform schedule, phi = 1, no
// rectification parameters.
CachePolicy make_uniform_policy(int t_steps, std::vector<int> cached_steps);

struct SeedRunArtifacts {
    std::uint64_t seed = 0;
    TrajectoryRecord cached;
    std::optional<TrajectoryRecord> baseline;
    StateVec reference;
    MetricsReport metrics;
    double mse_vs_full = 0.0;  // meaningful only when baseline is present
};

// One inference run: noise from the seed, cached sampling under the policy,
// optional full-compute baseline, fine-grid reference, endpoint metrics.
// Wall-clock fields are populated only when measure_time is set.
SeedRunArtifacts run_policy_seed(const FieldSpec& field, const LatentShape& shape,
                                 std::uint64_t seed, const CachePolicy& policy,
                                 RectifyMode rectify_mode, long t_ref_steps, bool measure_time,
                                 bool with_baseline);

}  // namespace erta
