#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "erta/field.hpp"
#include "erta/latent.hpp"
#include "erta/policy.hpp"
#include "erta/rectify.hpp"
#include "erta/sampler.hpp"

namespace erta {

// A calibration prompt is a (field instance, noise seed) pair.
struct CalibrationPrompt {
    FieldSpec field;
    std::uint64_t seed = 0;
    std::string id;
};

CalibrationPrompt make_prompt(const FieldSpec& field, std::uint64_t seed);

// Pass 1 output: ground-truth residuals r_gt(x_i, t) = v_i - x_i along the
// cache-free trajectory, per prompt and per step.
struct PromptProfile {
    std::string id;
    std::uint64_t seed = 0;
    std::vector<StateVec> r_gt;  // indexed by step (size T)
};

struct CalibrationProfile {
    int T = 0;
    LatentShape shape;
    std::vector<PromptProfile> prompts;
};

// |r_tilde - r|_1 / |r_gt|_1; the denominator must be strictly positive.
double relative_l1(const StateVec& r_tilde, const StateVec& r, const StateVec& r_gt);

enum class Aggregation { mean, max, quantile };
struct AggregationSpec {
    Aggregation kind = Aggregation::mean;
    double q = 0.9;  // used by quantile only
};
std::string aggregation_name(const AggregationSpec& spec);
AggregationSpec aggregation_from_name(const std::string& name);
double aggregate(std::span<const double> values, const AggregationSpec& spec);

CalibrationProfile log_ground_truth(std::span<const CalibrationPrompt> prompts,
                                    const LatentShape& shape, int t_steps, int workers = 1);

// Pass 2 output for one cached step: the (v_tilde, v, eps) samples per prompt
// plus the true velocity of the preceding step, feeding phi and the K/B fit.
struct CachedStepSamples {
    int step = 0;
    std::vector<StateVec> eps;      // v_tilde - v, per prompt
    std::vector<StateVec> v_tilde;  // reused velocity, per prompt
    std::vector<StateVec> v_true;   // freshly computed velocity at the same state
    std::vector<StateVec> v_next;   // true velocity at step i+1
    std::vector<double> rel_l1;     // per prompt, at decision time
    double rel_l1_agg = 0.0;
};

struct CalibrationArtifacts {
    int T = 0;
    std::vector<int> cached_steps;            // S, descending
    std::vector<CachedStepSamples> samples;   // aligned with cached_steps
    // Diagnostics over every step: per-prompt and aggregated relative-l1
    // (NaN at the forced-compute boundary steps T-1 and 0).
    std::vector<std::vector<double>> rel_l1_by_step;
    std::vector<double> rel_l1_agg_by_step;
};

// Threshold-based policy search: simulates the cached trajectory while
// computing the true velocity at every step (calibration has full compute).
// A non-boundary step joins S iff the aggregated relative-l1 of the batch is
// strictly below lambda; trajectories then advance with the reused velocity,
// otherwise every cache refreshes. Prompts advance in lockstep so the single
// policy matches the collected samples.
CalibrationArtifacts search_policy(std::span<const CalibrationPrompt> prompts,
                                   const CalibrationProfile& profile, double lambda,
                                   const AggregationSpec& agg = {}, int workers = 1);

struct PolicyBuildOptions {
    AggregationSpec aggregation;
    bool time_adjustment = true;     // phi-adjusted schedule (uniform otherwise)
    bool fit_rectification = true;   // fit per-step K/B from the pooled samples
    std::string created_at;
    std::string field_hash;
};

// Full offline calibration: search S, aggregate phi, build the schedule, fit
// K/B, and assemble the persistable policy.
CachePolicy build_cache_policy(std::span<const CalibrationPrompt> prompts,
                               const CalibrationProfile& profile, double lambda,
                               const PolicyBuildOptions& options = {}, int workers = 1);

// Per-step calibration report rows (written as CSV by the CLI). Cached steps
// carry the K/B fit diagnostics recomputed from the pooled samples.
struct CalibrationStepReport {
    int step = 0;
    bool cached = false;
    double rel_l1_agg = 0.0;  // NaN at boundaries
    double phi = 1.0;
    double k = 0.0;
    double b = 0.0;
    double dt = 0.0;
    RectFit fit;  // meaningful on cached steps only
};
std::vector<CalibrationStepReport> calibration_report(const CalibrationArtifacts& artifacts,
                                                      const CachePolicy& policy);

struct SweepRow {
    double lambda = 0.0;
    int cached_count = 0;
    double mse_vs_reference = 0.0;  // mean over prompts
    double mse_vs_full = 0.0;       // mean over prompts
    std::uint64_t eval_count = 0;   // per trajectory, T - |S|
    CachePolicy policy;             // the policy this row was measured under
};

struct SweepOptions {
    AggregationSpec aggregation;
    RectifyMode rectify = RectifyMode::off;
    bool time_adjustment = true;
    long t_ref_steps = 20000;
    int workers = 1;
};

// One row per lambda (grid must be ascending); |S| is checked to be
// nondecreasing and a violation raises.
std::vector<SweepRow> sweep_lambda(std::span<const CalibrationPrompt> prompts,
                                   const CalibrationProfile& profile,
                                   std::span<const double> lambdas, const SweepOptions& options);

// Profile persistence: a directory holding a manifest plus per-prompt
// residual-norm CSV summaries; full residual vectors optionally as flat
// little-endian float64 files with an "ERTA" header (magic, version, T, n).
void save_profile(const CalibrationProfile& profile, const std::string& dir, bool full_vectors);
CalibrationProfile load_profile(const std::string& dir);

}  // namespace erta
