// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code and enforces its
// runtime budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "erta/analysis.hpp"
#include "erta/cache.hpp"
#include "erta/calibration.hpp"
#include "erta/pipeline.hpp"
#include "erta/rectify.hpp"
#include "erta/schedule.hpp"

using namespace erta;

namespace {

struct Criterion {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget_s = 0.0;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// The benchmark mixture: two broad modes (data wider than the noise) around a
// common offset. The denoising flow expands through most of the trajectory,
// which keeps per-step reuse harm roughly flat, gives the timestep
// coefficients interior values, and makes the cache-error/velocity relation
// strongly linear (stable K fits).
FieldSpec benchmark_mixture(int dim) {
    std::vector<double> m1(dim), m2(dim);
    for (int i = 0; i < dim; ++i) {
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        m1[i] = 2.0 + 0.3 * sign;
        m2[i] = 2.0 - 0.3 * sign;
    }
    return make_mixture_field(dim, {MixtureComponent{0.5, m1, 4.5},
                                    MixtureComponent{0.5, m2, 4.5}});
}

std::vector<CalibrationPrompt> make_prompts(const FieldSpec& field, std::uint64_t first_seed,
                                            int count) {
    std::vector<CalibrationPrompt> prompts;
    for (int i = 0; i < count; ++i) {
        prompts.push_back(make_prompt(field, first_seed + static_cast<std::uint64_t>(i)));
    }
    return prompts;
}

// Smallest grid lambda whose cached set lands closest to the target size.
double select_lambda(std::span<const CalibrationPrompt> prompts, const CalibrationProfile& profile,
                     int target) {
    double best = 0.0;
    int best_gap = 1 << 20;
    for (double l = 0.005; l < 1.2; l *= 1.1) {
        const auto art = search_policy(prompts, profile, l);
        const int gap = std::abs(static_cast<int>(art.cached_steps.size()) - target);
        if (gap < best_gap) {
            best_gap = gap;
            best = l;
        }
    }
    return best;
}

// Random cached set made of runs of bounded length with at least one computed
// step between runs; never touches the boundary steps.
std::vector<int> random_cached_runs(std::mt19937_64& rng, int t_steps, int max_run) {
    std::vector<int> steps;
    int i = t_steps - 2;
    std::uniform_int_distribution<int> len_dist(1, max_run);
    std::bernoulli_distribution start(0.5);
    while (i >= 1) {
        if (start(rng)) {
            const int len = std::min(len_dist(rng), i);
            for (int k = 0; k < len && i >= 1; ++k, --i) {
                steps.push_back(i);
            }
            --i;
        } else {
            --i;
        }
    }
    return steps;
}

// ---------------------------------------------------------------------------

Criterion criterion_decomposition_identity() {
    Criterion c{"decomposition identity (random cached runs)"};
    c.budget_s = 10.0;
    const double tol = 1e-9;
    std::mt19937_64 rng(71);
    double worst = 0.0;
    int runs = 0;
    for (int dim : {2, 16}) {
        const FieldSpec field = benchmark_mixture(dim);
        const LatentShape shape{1, dim, 1, 1};
        for (int rep = 0; rep < 60; ++rep) {
            const auto policy = make_uniform_policy(50, random_cached_runs(rng, 50, 5));
            const StateVec x0 = sample_noise(5000 + static_cast<std::uint64_t>(rep), shape);
            const auto cached = cached_sample(field, x0, policy, RectifyMode::off);
            const auto full = full_sample(field, x0, StepSchedule{policy.delta_t});
            worst = std::max(worst, verify_decomposition(field, cached, full).max_rel_residual);
            ++runs;
        }
    }
    c.pass = worst <= tol;
    c.detail = std::to_string(runs) + " runs, max relative residual " + fmt(worst) + " (tol 1e-9)";
    return c;
}

Criterion criterion_zero_feature_shift() {
    Criterion c{"zero-feature-shift exactness on the constant-residual field"};
    c.budget_s = 5.0;
    const double tol = 1e-12;
    const int T = 50;
    const FieldSpec field = make_shift_field({0.4, -0.2, 0.1, 0.7});
    const LatentShape shape{1, 4, 1, 1};
    std::mt19937_64 rng(29);
    double worst = 0.0;
    double min_phi = 1.0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto steps = random_cached_runs(rng, T, 6);
        const StateVec x0 = sample_noise(600 + static_cast<std::uint64_t>(rep), shape);

        // Without adjustment: uniform schedule.
        const auto plain = make_uniform_policy(T, steps);
        {
            const auto cached = cached_sample(field, x0, plain, RectifyMode::off);
            const auto full = full_sample(field, x0, StepSchedule{plain.delta_t});
            worst = std::max(worst, linf_norm(sub(cached.endpoint, full.endpoint)));
        }

        // With adjustment: phi measured by a forced-set full-compute pass.
        PhiRecord phi;
        {
            EvalCounter counter;
            ResidualCache cache;
            StateVec x = x0;
            StateVec prev_v;
            double tau = 0.0;
            const double dt = 1.0 / static_cast<double>(T);
            for (int i = T - 1; i >= 0; --i) {
                const StateVec v_true = eval_velocity(field, x, tau, counter);
                if (plain.is_cached_step(i)) {
                    const StateVec v_tilde = cache.reuse(x);
                    phi[i] = compute_phi(v_tilde, v_true, prev_v);
                    min_phi = std::min(min_phi, phi[i].phi);
                    x = euler_step(x, v_tilde, dt);
                } else {
                    cache.refresh(v_true, x, i);
                    x = euler_step(x, v_true, dt);
                }
                prev_v = v_true;
                tau += dt;
            }
        }
        auto adjusted = plain;
        adjusted.delta_t = build_schedule(T, steps, phi).delta_t;
        for (int s : steps) {
            adjusted.phi[static_cast<std::size_t>(s)] = phi[s].phi;
        }
        {
            const auto cached = cached_sample(field, x0, adjusted, RectifyMode::off);
            const auto full = full_sample(field, x0, StepSchedule{adjusted.delta_t});
            worst = std::max(worst, linf_norm(sub(cached.endpoint, full.endpoint)));
        }
    }
    c.pass = worst <= tol && min_phi >= 1.0 - 1e-9;
    c.detail = "20 random sets, max endpoint gap " + fmt(worst) + " (tol 1e-12), min phi " +
               fmt(min_phi);
    return c;
}

Criterion criterion_budget_conservation() {
    Criterion c{"timestep budget conservation"};
    c.budget_s = 1.0;
    const double tol = 1e-12;
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> phi_dist(0.0, 1.0);
    double worst = 0.0;
    int configs = 0;
    for (int t_steps : {4, 50, 100}) {
        for (int rep = 0; rep < 334; ++rep) {
            const auto steps = random_cached_runs(rng, t_steps, t_steps);
            PhiRecord phi;
            for (int s : steps) {
                phi[s] = PhiEntry{phi_dist(rng), 0.0, 0.0};
            }
            const auto schedule = build_schedule(t_steps, steps, phi);
            double sum = 0.0;
            for (double dt : schedule.delta_t) sum += dt;
            worst = std::max(worst, std::fabs(sum - 1.0));
            ++configs;
        }
    }
    c.pass = worst <= tol;
    c.detail = std::to_string(configs) + " configurations, max |sum(dt)-1| " + fmt(worst) +
               " (tol 1e-12)";
    return c;
}

Criterion criterion_closed_form_fit() {
    Criterion c{"closed-form K/B fit vs normal-equation oracle"};
    c.budget_s = 2.0;
    const double tol = 1e-8;
    std::mt19937_64 rng(55);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto gap = [](double a, double b) {
        return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
    };
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> v(1000), e(1000);
        const double slope = noise(rng), icept = noise(rng);
        const double spread = 0.5 + std::fabs(noise(rng));
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = spread * noise(rng) + icept;
            e[i] = slope * v[i] + 0.1 * noise(rng);
        }
        const RectFit fit = fit_kb(v, e);
        const auto [ok, ob] = fit_kb_oracle_ls(v, e);
        worst = std::max({worst, gap(fit.k, ok), gap(fit.b, ob)});
    }
    // Exact-linear special case: eps = a*v + c on a sixteenths grid -> K = 4a.
    {
        std::vector<double> v, e;
        for (int j = 0; j <= 32; ++j) {
            v.push_back(static_cast<double>(j) / 16.0);
            e.push_back(0.5 * v.back() + 0.25);
        }
        const RectFit fit = fit_kb(v, e);
        const auto [ok, ob] = fit_kb_oracle_ls(v, e);
        if (fit.k != 2.0) {
            c.detail = "exact-linear case: K != 4a";
            return c;
        }
        worst = std::max({worst, gap(fit.k, ok), gap(fit.b, ob)});
    }
    // Constant-eps special case: K degenerates to 0.
    {
        std::vector<double> v, e;
        for (int j = 0; j <= 32; ++j) {
            v.push_back(static_cast<double>(j) / 16.0);
            e.push_back(0.25);
        }
        const RectFit fit = fit_kb(v, e);
        const auto [ok, ob] = fit_kb_oracle_ls(v, e);
        if (fit.k != 0.0 || fit.b != -1.0) {
            c.detail = "constant-eps case: expected K=0, B=-1";
            return c;
        }
        worst = std::max({worst, gap(fit.k, ok), gap(fit.b, ob)});
    }
    c.pass = worst <= tol;
    c.detail = "100 random datasets + 2 special cases, max relative gap " + fmt(worst) +
               " (tol 1e-8)";
    return c;
}

Criterion criterion_ablation_trend() {
    Criterion c{"ablation ordering: uniform >= policy >= +adjustment >= +rectification"};
    c.budget_s = 30.0;
    const int T = 50;
    const int dim = 16;
    const FieldSpec field = benchmark_mixture(dim);
    const LatentShape shape{1, dim, 1, 1};

    const auto prompts = make_prompts(field, 1, 8);
    const auto profile = log_ground_truth(prompts, shape, T);
    const double lambda = select_lambda(prompts, profile, 25);

    PolicyBuildOptions with_adjust;
    with_adjust.field_hash = "acceptance";
    PolicyBuildOptions no_adjust = with_adjust;
    no_adjust.time_adjustment = false;
    const CachePolicy policy_plain = build_cache_policy(prompts, profile, lambda, no_adjust);
    const CachePolicy policy_adjusted = build_cache_policy(prompts, profile, lambda, with_adjust);
    const int cached_count = static_cast<int>(policy_plain.cached_steps.size());
    if (cached_count < 20 || cached_count > 30) {
        c.detail = "lambda selection missed |S| ~ 25 (got " + std::to_string(cached_count) + ")";
        return c;
    }
    const CachePolicy policy_uniform = make_uniform_policy(T, uniform_cache_steps(T, cached_count));

    // Regression fixtures: endpoint MSE vs the full run, produced by this
    // suite and frozen (rows: seeds 201..205; columns: uniform, policy,
    // +adjustment, +rectification). Negative entries skip the check.
    const double fixtures[5][4] = {
        {0.0155266, 0.00744958, 0.00151896, 0.000999317},
        {0.0188213, 0.00962856, 0.0015745, 0.000979114},
        {0.0108158, 0.00866928, 0.000817779, 0.00050269},
        {0.0245485, 0.00893265, 0.00227537, 0.00145443},
        {0.0320888, 0.0127485, 0.00247616, 0.00146965},
    };
    const double fixture_rel_tol = 1e-5;

    int ordered = 0;
    bool fixtures_ok = true;
    std::string rows;
    const std::uint64_t seeds[5] = {201, 202, 203, 204, 205};
    for (int si = 0; si < 5; ++si) {
        const StateVec x0 = sample_noise(seeds[si], shape);
        const StateVec full =
            full_sample(field, x0, StepSchedule::uniform(T), SampleOptions{false}).endpoint;
        auto run_mse = [&](const CachePolicy& p, RectifyMode m) {
            return mean_squared_error(
                cached_sample(field, x0, p, m, SampleOptions{false}).endpoint, full);
        };
        const double mse[4] = {
            run_mse(policy_uniform, RectifyMode::off),
            run_mse(policy_plain, RectifyMode::off),
            run_mse(policy_adjusted, RectifyMode::off),
            run_mse(policy_adjusted, RectifyMode::linearized),
        };
        if (mse[0] >= mse[1] && mse[1] >= mse[2] && mse[2] >= mse[3]) {
            ++ordered;
        }
        for (int k = 0; k < 4; ++k) {
            if (fixtures[si][k] > 0 &&
                std::fabs(mse[k] - fixtures[si][k]) > fixture_rel_tol * fixtures[si][k]) {
                fixtures_ok = false;
            }
        }
        rows += "\n      seed " + std::to_string(seeds[si]) + ": " + fmt(mse[0]) + " >= " +
                fmt(mse[1]) + " >= " + fmt(mse[2]) + " >= " + fmt(mse[3]);
    }
    c.pass = ordered >= 4 && fixtures_ok;
    c.detail = "lambda " + fmt(lambda) + ", |S| " + std::to_string(cached_count) +
               ", ordering on " + std::to_string(ordered) + "/5 seeds (need >= 4)" +
               (fixtures_ok ? "" : ", regression fixtures violated") + rows;
    return c;
}

Criterion criterion_speedup_accounting() {
    Criterion c{"speedup accounting with a 10 ms artificial eval delay"};
    c.budget_s = 60.0;
    const int T = 50;
    FieldSpec field = benchmark_mixture(2);
    field.eval_delay_ms = 10.0;
    const LatentShape shape{1, 2, 1, 1};
    const StateVec x0 = sample_noise(404, shape);
    const auto policy = make_uniform_policy(T, uniform_cache_steps(T, 25));

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const auto full = full_sample(field, x0, StepSchedule{policy.delta_t}, SampleOptions{false});
    const auto t1 = clock::now();
    const auto cached = cached_sample(field, x0, policy, RectifyMode::off, SampleOptions{false});
    const auto t2 = clock::now();

    const double full_s = std::chrono::duration<double>(t1 - t0).count();
    const double cached_s = std::chrono::duration<double>(t2 - t1).count();
    const double speedup = full_s / cached_s;
    const double eval_ratio =
        static_cast<double>(full.eval_count) / static_cast<double>(cached.eval_count);
    c.pass =
        speedup >= 1.8 && eval_ratio == 2.0 && full.eval_count == 50 && cached.eval_count == 25;
    c.detail = "wall " + fmt(full_s) + "s vs " + fmt(cached_s) + "s, speedup " + fmt(speedup) +
               " (need >= 1.8), eval ratio " + fmt(eval_ratio) + " (need exactly 2)";
    return c;
}

Criterion criterion_lambda_monotonicity() {
    Criterion c{"cached-set growth is monotone in lambda"};
    c.budget_s = 10.0;
    const FieldSpec field = benchmark_mixture(2);
    const LatentShape shape{1, 2, 1, 1};
    const auto prompts = make_prompts(field, 11, 4);
    const auto profile = log_ground_truth(prompts, shape, 50);
    const std::vector<double> grid = {0.02, 0.06, 0.1, 0.2, 0.4};
    SweepOptions options;
    options.t_ref_steps = 2000;
    std::string sizes;
    try {
        const auto rows = sweep_lambda(prompts, profile, grid, options);
        bool monotone = true;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && rows[i].cached_count < rows[i - 1].cached_count) {
                monotone = false;
            }
            sizes += (i ? "," : "") + std::to_string(rows[i].cached_count);
        }
        c.pass = monotone;
    } catch (const std::exception& e) {
        c.detail = e.what();
        return c;
    }
    c.detail = "|S| over the 5-point grid: " + sizes;
    return c;
}

Criterion criterion_sampler_convergence() {
    Criterion c{"first-order convergence of the full sampler on the exponential flow"};
    c.budget_s = 1.0;
    const FieldSpec field = make_affine_field(1, {1.0}, {1.0}, {0.0}, {0.0});
    const StateVec x0 = flat_state({1.0});
    const double exact = std::exp(1.0);
    double err[3];
    const int steps[3] = {50, 100, 200};
    for (int k = 0; k < 3; ++k) {
        err[k] = std::fabs(
            full_sample(field, x0, StepSchedule::uniform(steps[k]), SampleOptions{false})
                .endpoint.values[0] -
            exact);
    }
    const double r1 = err[1] / err[0];
    const double r2 = err[2] / err[1];
    c.pass = r1 > 0.4 && r1 < 0.6 && r2 > 0.4 && r2 < 0.6;
    c.detail =
        "error ratios per T doubling: " + fmt(r1) + ", " + fmt(r2) + " (need within [0.4, 0.6])";
    return c;
}

Criterion criterion_prompt_count_stability() {
    Criterion c{"K fits stable across 20 vs 100 calibration prompts"};
    c.budget_s = 30.0;
    const int T = 50;
    const int dim = 16;
    const FieldSpec field = benchmark_mixture(dim);
    const LatentShape shape{1, dim, 1, 1};

    // Same lambda-selection procedure as the ablation criterion.
    const auto sel_prompts = make_prompts(field, 1, 8);
    const auto sel_profile = log_ground_truth(sel_prompts, shape, T);
    const double lambda = select_lambda(sel_prompts, sel_profile, 25);

    const auto p100 = make_prompts(field, 1001, 100);
    const std::vector<CalibrationPrompt> p20(p100.begin(), p100.begin() + 20);
    const auto prof20 = log_ground_truth(p20, shape, T);
    const auto prof100 = log_ground_truth(p100, shape, T);
    PolicyBuildOptions options;
    options.field_hash = "acceptance";
    const CachePolicy pol20 = build_cache_policy(p20, prof20, lambda, options);
    const CachePolicy pol100 = build_cache_policy(p100, prof100, lambda, options);

    int common = 0, sym_diff = 0;
    double worst = 0.0;
    for (int s : pol100.cached_steps) {
        if (!pol20.is_cached_step(s)) {
            ++sym_diff;
            continue;
        }
        ++common;
        const double a = pol20.k_values[static_cast<std::size_t>(s)];
        const double b = pol100.k_values[static_cast<std::size_t>(s)];
        worst = std::max(worst, std::fabs(a - b) / std::fabs(b));
    }
    for (int s : pol20.cached_steps) {
        if (!pol100.is_cached_step(s)) {
            ++sym_diff;
        }
    }
    c.pass = common >= 20 && sym_diff <= 2 && worst <= 0.2;
    c.detail = std::to_string(common) + " shared cached steps (set mismatch " +
               std::to_string(sym_diff) + "), max per-step |K20-K100|/|K100| " + fmt(worst) +
               " (tol 0.2)";
    return c;
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    std::vector<Criterion (*)()> criteria = {
        criterion_decomposition_identity, criterion_zero_feature_shift,
        criterion_budget_conservation,    criterion_closed_form_fit,
        criterion_ablation_trend,         criterion_speedup_accounting,
        criterion_lambda_monotonicity,    criterion_sampler_convergence,
        criterion_prompt_count_stability,
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = clock::now();
        Criterion c = criteria[i]();
        c.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        const bool in_budget = c.seconds < c.budget_s;
        const bool pass = c.pass && in_budget;
        std::printf("[%zu] %s %s: %s [%.2fs / %.0fs budget]\n", i + 1, pass ? "PASS" : "FAIL",
                    c.name.c_str(), c.detail.c_str(), c.seconds, c.budget_s);
        if (!pass) {
            ++failures;
        }
    }
    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
    }
    return failures;
}
