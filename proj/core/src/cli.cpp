#include "erta/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "canonical_json.hpp"
#include "erta/analysis.hpp"
#include "erta/cache.hpp"
#include "erta/calibration.hpp"
#include "erta/config.hpp"
#include "erta/errors.hpp"
#include "erta/parallel.hpp"
#include "erta/pipeline.hpp"
#include "erta/schedule.hpp"

namespace erta::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    int workers = 0;  // 0: take from config
    bool quiet = false;
};

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

RunConfig load_effective_config(const GlobalArgs& g) {
    RunConfig config = g.config_path.empty() ? default_config() : load_config(g.config_path);
    if (!g.out_dir.empty()) {
        config.out_dir = g.out_dir;
    }
    if (config.out_dir.empty()) {
        if (const char* env = std::getenv("ERTA_OUT_DIR")) {
            config.out_dir = env;
        } else {
            config.out_dir = "erta_out";
        }
    }
    if (g.workers > 0) {
        config.workers = g.workers;
    }
    if (config.created_at.empty()) {
        config.created_at = utc_now();
    }
    return config;
}

void print_effective(const RunConfig& c, const GlobalArgs& g, const std::string& command) {
    if (g.quiet) {
        return;
    }
    std::cout << "erta " << command << " (flags > config > defaults)\n"
              << "  field        = " << field_kind_name(c.field.kind) << " d=" << c.field.dimension
              << " hash=" << field_spec_hash(c.field) << "\n"
              << "  steps        = " << c.steps << "\n"
              << "  lambda       = " << c.lambda << "\n"
              << "  aggregation  = " << aggregation_name(c.aggregation) << "\n"
              << "  rectify_mode = " << rectify_mode_name(c.rectify_mode) << "\n"
              << "  adjustment   = " << (c.time_adjustment ? "on" : "off") << "\n"
              << "  t_ref_steps  = " << c.t_ref_steps << "\n"
              << "  out_dir      = " << c.out_dir << "\n"
              << "  workers      = " << c.workers << "\n";
}

std::string fmt(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return detail::format_double_17g(v);
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

void write_calibration_outputs(const CalibrationArtifacts& artifacts, const CachePolicy& policy,
                               const std::string& out_dir, const std::string& policy_name,
                               bool quiet) {
    fs::create_directories(out_dir);
    const std::string policy_path = (fs::path(out_dir) / (policy_name + kPolicyFileExtension)).string();
    save_policy(policy, policy_path);

    {
        std::ofstream csv(fs::path(out_dir) / "calibration_report.csv");
        csv << "step,cached,rel_l1_agg,phi,k,b,dt,fit_s_vv,fit_s_ve,fit_eps_mean,fit_v_mean,"
               "fit_samples,fit_degenerate\n";
        for (const auto& row : calibration_report(artifacts, policy)) {
            csv << row.step << ',' << (row.cached ? 1 : 0) << ',' << fmt(row.rel_l1_agg) << ','
                << fmt(row.phi) << ',' << fmt(row.k) << ',' << fmt(row.b) << ',' << fmt(row.dt)
                << ',' << fmt(row.fit.s_vv) << ',' << fmt(row.fit.s_ve) << ','
                << fmt(row.fit.eps_mean) << ',' << fmt(row.fit.v_mean) << ','
                << row.fit.sample_count << ',' << (row.fit.degenerate_variance ? 1 : 0) << '\n';
        }
    }
    {
        std::ofstream csv(fs::path(out_dir) / "schedule.csv");
        csv << "step,dt,phi,cached\n";
        for (int i = policy.steps - 1; i >= 0; --i) {
            csv << i << ',' << fmt(policy.delta_t[static_cast<std::size_t>(i)]) << ','
                << fmt(policy.phi[static_cast<std::size_t>(i)]) << ','
                << (policy.is_cached_step(i) ? 1 : 0) << '\n';
        }
    }
    if (!quiet) {
        std::cout << "policy: " << policy_path << "\n"
                  << "cached steps |S| = " << policy.cached_steps.size() << " of T=" << policy.steps
                  << "\n";
    }
}

int cmd_calibrate(const RunConfig& config, const GlobalArgs& g, double lambda_override,
                  bool has_lambda_override) {
    RunConfig cfg = config;
    if (has_lambda_override) {
        cfg.lambda = lambda_override;
        validate_config(cfg);
    }
    print_effective(cfg, g, "calibrate");

    const auto prompts = calibration_prompts(cfg);
    const CalibrationProfile profile = log_ground_truth(prompts, cfg.shape, cfg.steps, cfg.workers);
    if (cfg.save_profile) {
        save_profile(profile, (fs::path(cfg.out_dir) / "profile").string(), cfg.save_profile_vectors);
    }

    PolicyBuildOptions build;
    build.aggregation = cfg.aggregation;
    build.time_adjustment = cfg.time_adjustment;
    build.fit_rectification = true;
    build.created_at = cfg.created_at;
    build.field_hash = field_spec_hash(cfg.field);
    const CachePolicy policy = build_cache_policy(prompts, profile, cfg.lambda, build, cfg.workers);

    const CalibrationArtifacts artifacts =
        search_policy(prompts, profile, cfg.lambda, cfg.aggregation, cfg.workers);
    write_calibration_outputs(artifacts, policy, cfg.out_dir, "policy", g.quiet);
    return kOk;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

void write_metrics_json(const fs::path& path, const SeedRunArtifacts& run, const CachePolicy& policy,
                        RectifyMode mode, bool has_baseline) {
    nlohmann::json j;
    j["seed"] = run.seed;
    j["steps"] = policy.steps;
    j["lambda"] = policy.lambda;
    j["rectify_mode"] = std::string(rectify_mode_name(mode));
    j["cached_steps"] = static_cast<int>(policy.cached_steps.size());
    j["eval_full"] = run.metrics.full_evals;
    j["eval_cached"] = run.metrics.cached_evals;
    j["eval_ratio"] = run.metrics.eval_ratio;
    j["mse_vs_reference"] = run.metrics.mse_vs_reference;
    if (std::isinf(run.metrics.psnr_db)) {
        j["psnr_db"] = "inf";  // JSON has no infinity literal
    } else {
        j["psnr_db"] = run.metrics.psnr_db;
    }
    if (has_baseline) {
        j["mse_vs_full"] = run.mse_vs_full;
        j["mean_rel_l1"] = run.metrics.mean_rel_l1;
    } else {
        j["mse_vs_full"] = nullptr;
        j["mean_rel_l1"] = nullptr;
    }
    j["full_time_s"] = run.metrics.full_time_s;
    j["cached_time_s"] = run.metrics.cached_time_s;
    j["wall_speedup"] = run.metrics.wall_speedup;
    j["endpoint"] = run.cached.endpoint.values;

    std::ofstream out(path, std::ios::binary);
    out << detail::canonical_dump(j) << '\n';
    if (!out.good()) {
        throw std::runtime_error("failed writing metrics file '" + path.string() + "'");
    }
}

void append_runs_csv(const fs::path& path, const SeedRunArtifacts& run, const CachePolicy& policy,
                     RectifyMode mode, bool has_baseline) {
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (fresh) {
        out << "seed,T,lambda,rectify,cached_steps,eval_full,eval_cached,eval_ratio,"
               "mse_vs_reference,psnr_db,mse_vs_full,mean_rel_l1,full_time_s,cached_time_s,"
               "wall_speedup\n";
    }
    out << run.seed << ',' << policy.steps << ',' << fmt(policy.lambda) << ','
        << rectify_mode_name(mode) << ',' << policy.cached_steps.size() << ','
        << run.metrics.full_evals << ',' << run.metrics.cached_evals << ','
        << fmt(run.metrics.eval_ratio) << ',' << fmt(run.metrics.mse_vs_reference) << ','
        << fmt(run.metrics.psnr_db) << ','
        << (has_baseline ? fmt(run.mse_vs_full) : std::string("nan")) << ','
        << (has_baseline ? fmt(run.metrics.mean_rel_l1) : std::string("nan")) << ','
        << fmt(run.metrics.full_time_s) << ',' << fmt(run.metrics.cached_time_s) << ','
        << fmt(run.metrics.wall_speedup) << '\n';
}

int cmd_run(const RunConfig& config, const GlobalArgs& g, const std::string& policy_path,
            const std::vector<std::uint64_t>& seed_override, const std::string& rectify_override,
            bool with_baseline) {
    RunConfig cfg = config;
    if (!seed_override.empty()) {
        cfg.run_seeds = seed_override;
        validate_config(cfg);
    }
    if (!rectify_override.empty()) {
        try {
            cfg.rectify_mode = rectify_mode_from_name(rectify_override);
        } catch (const std::invalid_argument& e) {
            throw config_error(e.what());
        }
    }
    print_effective(cfg, g, "run");

    const CachePolicy policy = load_policy(policy_path);
    if (policy.steps != cfg.steps) {
        throw compat_error("policy T=" + std::to_string(policy.steps) +
                           " does not match config T=" + std::to_string(cfg.steps));
    }
    const std::string expected_hash = field_spec_hash(cfg.field);
    if (!policy.field_hash.empty() && policy.field_hash != expected_hash && !g.quiet) {
        std::cerr << "warning: policy was calibrated for field " << policy.field_hash
                  << " but the config field hashes to " << expected_hash << "\n";
    }

    fs::create_directories(cfg.out_dir);
    std::vector<SeedRunArtifacts> results(cfg.run_seeds.size());
    parallel_for(cfg.run_seeds.size(), cfg.workers, [&](std::size_t i) {
        results[i] = run_policy_seed(cfg.field, cfg.shape, cfg.run_seeds[i], policy, cfg.rectify_mode,
                                     cfg.t_ref_steps, cfg.measure_time, with_baseline);
    });

    // Single-writer output pass in seed order.
    for (const auto& run : results) {
        const std::string stem = "run_seed" + std::to_string(run.seed);
        write_metrics_json(fs::path(cfg.out_dir) / (stem + ".metrics.json"), run, policy,
                           cfg.rectify_mode, with_baseline);
        {
            std::ofstream traj(fs::path(cfg.out_dir) / (stem + ".trajectory.csv"));
            write_trajectory_csv(run.cached, traj);
        }
        if (run.baseline) {
            std::ofstream traj(fs::path(cfg.out_dir) / (stem + ".baseline.trajectory.csv"));
            write_trajectory_csv(*run.baseline, traj);
        }
        append_runs_csv(fs::path(cfg.out_dir) / "runs.csv", run, policy, cfg.rectify_mode,
                        with_baseline);
        if (!g.quiet) {
            std::cout << "seed " << run.seed << ": mse_vs_reference=" << fmt(run.metrics.mse_vs_reference)
                      << " evals=" << run.metrics.cached_evals << "/" << run.metrics.full_evals << "\n";
        }
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

int cmd_sweep(const RunConfig& config, const GlobalArgs& g, std::vector<double> lambdas) {
    RunConfig cfg = config;
    if (lambdas.empty()) {
        lambdas = cfg.lambda_grid;
    }
    if (lambdas.size() < 2) {
        throw config_error("sweep needs at least 2 lambda grid points (--lambdas or config lambda_grid)");
    }
    std::sort(lambdas.begin(), lambdas.end());
    std::vector<double> grid;
    for (double l : lambdas) {
        if (!grid.empty() && l == grid.back()) {
            std::cerr << "warning: duplicate lambda " << l << " dropped from the sweep grid\n";
            continue;
        }
        grid.push_back(l);
    }
    print_effective(cfg, g, "sweep");

    const auto prompts = calibration_prompts(cfg);
    const CalibrationProfile profile = log_ground_truth(prompts, cfg.shape, cfg.steps, cfg.workers);

    SweepOptions options;
    options.aggregation = cfg.aggregation;
    options.rectify = cfg.rectify_mode;
    options.time_adjustment = cfg.time_adjustment;
    options.t_ref_steps = cfg.t_ref_steps;
    options.workers = cfg.workers;
    const auto rows = sweep_lambda(prompts, profile, grid, options);

    fs::create_directories(cfg.out_dir);
    const fs::path csv_path = fs::path(cfg.out_dir) / "sweep.csv";
    std::ofstream csv(csv_path);
    csv << "lambda,cached_steps,eval_ratio,endpoint_mse_vs_full,endpoint_mse_vs_reference,"
           "wall_speedup\n";
    for (const auto& row : rows) {
        double wall_speedup = 0.0;
        if (cfg.measure_time) {
            const CachePolicy policy = row.policy;
            const auto timed = run_policy_seed(cfg.field, cfg.shape, prompts.front().seed, policy,
                                               cfg.rectify_mode, cfg.t_ref_steps, true, true);
            wall_speedup = timed.metrics.wall_speedup;
        }
        const double eval_ratio = static_cast<double>(cfg.steps) / static_cast<double>(row.eval_count);
        csv << fmt(row.lambda) << ',' << row.cached_count << ',' << fmt(eval_ratio) << ','
            << fmt(row.mse_vs_full) << ',' << fmt(row.mse_vs_reference) << ',' << fmt(wall_speedup)
            << '\n';
        if (!g.quiet) {
            std::cout << "lambda=" << row.lambda << " |S|=" << row.cached_count
                      << " mse_vs_full=" << fmt(row.mse_vs_full) << "\n";
        }
    }
    if (!g.quiet) {
        std::cout << "sweep: " << csv_path.string() << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct PropertyResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double tolerance = 0.0;
};

std::vector<int> random_cached_runs(std::mt19937_64& rng, int t_steps, int max_run) {
    std::vector<int> steps;
    int i = t_steps - 2;
    std::uniform_int_distribution<int> len_dist(1, max_run);
    std::bernoulli_distribution start(0.5);
    while (i >= 1) {
        if (start(rng)) {
            int len = std::min(len_dist(rng), i);  // never reaches step 0
            for (int k = 0; k < len && i >= 1; ++k, --i) {
                steps.push_back(i);
            }
            --i;  // at least one computed step between runs
        } else {
            --i;
        }
    }
    return steps;
}

int cmd_verify(const RunConfig& config, const GlobalArgs& g) {
    print_effective(config, g, "verify");
    std::vector<PropertyResult> results;

    const FieldSpec mixture = default_config().field;
    const LatentShape mixture_shape = default_config().shape;

    {  // decomposition identity on randomized cached runs
        PropertyResult r{"decomposition-identity", false, 0.0, 1e-9};
        std::mt19937_64 rng(2024);
        const int T = 50;
        for (int rep = 0; rep < 25; ++rep) {
            const auto policy = make_uniform_policy(T, random_cached_runs(rng, T, 5));
            const StateVec x0 = sample_noise(4000 + static_cast<std::uint64_t>(rep), mixture_shape);
            const auto cached = cached_sample(mixture, x0, policy, RectifyMode::off);
            const auto full = full_sample(mixture, x0, StepSchedule{policy.delta_t});
            const auto report = verify_decomposition(mixture, cached, full);
            r.measured = std::max(r.measured, report.max_rel_residual);
        }
        r.pass = r.measured <= r.tolerance;
        results.push_back(r);
    }
    {  // timestep budget conservation
        PropertyResult r{"budget-conservation", false, 0.0, 1e-12};
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> phi_dist(0.0, 1.0);
        for (int t_steps : {4, 50, 100}) {
            for (int rep = 0; rep < 100; ++rep) {
                const auto steps = random_cached_runs(rng, t_steps, t_steps);
                PhiRecord phi;
                for (int s : steps) {
                    phi[s] = PhiEntry{phi_dist(rng), 0, 0};
                }
                const auto schedule = build_schedule(t_steps, steps, phi);
                double sum = 0.0;
                for (double dt : schedule.delta_t) sum += dt;
                r.measured = std::max(r.measured, std::fabs(sum - 1.0));
            }
        }
        r.pass = r.measured <= r.tolerance;
        results.push_back(r);
    }
    {  // closed-form fit vs normal-equation oracle
        PropertyResult r{"closed-form-vs-oracle", false, 0.0, 1e-8};
        std::mt19937_64 rng(123);
        std::normal_distribution<double> noise(0.0, 1.0);
        for (int rep = 0; rep < 25; ++rep) {
            std::vector<double> v(1000), e(1000);
            for (std::size_t i = 0; i < v.size(); ++i) {
                v[i] = 2.0 * noise(rng);
                e[i] = 0.4 * v[i] + 0.3 + 0.05 * noise(rng);
            }
            const RectFit fit = fit_kb(v, e);
            const auto [ok, ob] = fit_kb_oracle_ls(v, e);
            const double gap =
                std::max(std::fabs(fit.k - ok) / std::max({1.0, std::fabs(ok)}),
                         std::fabs(fit.b - ob) / std::max({1.0, std::fabs(ob)}));
            r.measured = std::max(r.measured, gap);
        }
        r.pass = r.measured <= r.tolerance;
        results.push_back(r);
    }
    {  // zero feature shift on the constant-residual field
        PropertyResult r{"zero-shift-exactness", false, 0.0, 1e-12};
        const FieldSpec field = make_shift_field({0.4, -0.2, 0.1, 0.7});
        const LatentShape shape{1, 4, 1, 1};
        std::mt19937_64 rng(5);
        const int T = 40;
        for (int rep = 0; rep < 8; ++rep) {
            const auto policy = make_uniform_policy(T, random_cached_runs(rng, T, 6));
            const StateVec x0 = sample_noise(900 + static_cast<std::uint64_t>(rep), shape);
            const auto cached = cached_sample(field, x0, policy, RectifyMode::off);
            const auto full = full_sample(field, x0, StepSchedule{policy.delta_t});
            r.measured = std::max(r.measured, linf_norm(sub(cached.endpoint, full.endpoint)));
        }
        r.pass = r.measured <= r.tolerance;
        results.push_back(r);
    }
    {  // S = {} reproduces the full sampler bitwise
        PropertyResult r{"empty-set-equivalence", false, 0.0, 0.0};
        const auto policy = make_uniform_policy(config.steps, {});
        const StateVec x0 = sample_noise(42, config.shape);
        const auto cached = cached_sample(config.field, x0, policy, RectifyMode::off);
        const auto full = full_sample(config.field, x0, StepSchedule{policy.delta_t});
        r.pass = cached.endpoint.values == full.endpoint.values;
        r.measured = r.pass ? 0.0 : linf_norm(sub(cached.endpoint, full.endpoint));
        results.push_back(r);
    }
    {  // refresh/reuse round trip is exact
        PropertyResult r{"cache-roundtrip", false, 0.0, 0.0};
        std::mt19937_64 rng(7);
        std::normal_distribution<double> noise(0.0, 2.0);
        bool exact = true;
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> xv(8), vv(8);
            for (std::size_t i = 0; i < xv.size(); ++i) {
                xv[i] = noise(rng);
                vv[i] = noise(rng);
            }
            const StateVec x = flat_state(xv), v = flat_state(vv);
            ResidualCache cache;
            cache.refresh(v, x, 3);
            const StateVec back = cache.reuse(x);
            exact = exact && back.values == v.values;
        }
        r.pass = exact;
        results.push_back(r);
    }
    {  // mixture responsibilities form a probability vector
        PropertyResult r{"responsibility-normalization", false, 0.0, 1e-12};
        std::mt19937_64 rng(11);
        std::normal_distribution<double> noise(0.0, 3.0);
        std::uniform_real_distribution<double> t_dist(0.0, 1.0);
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<double> xv(2);
            xv[0] = noise(rng);
            xv[1] = noise(rng);
            const auto w = mixture_responsibilities(mixture, flat_state(xv), t_dist(rng));
            double sum = 0.0;
            for (double wi : w) {
                if (wi < 0.0) {
                    r.measured = 1.0;
                }
                sum += wi;
            }
            r.measured = std::max(r.measured, std::fabs(sum - 1.0));
        }
        r.pass = r.measured <= r.tolerance;
        results.push_back(r);
    }
    {  // cached steps only ever shrink their interval
        PropertyResult r{"schedule-shrink-only", false, 0.0, 1e-15};
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> phi_dist(0.0, 1.0);
        for (int rep = 0; rep < 100; ++rep) {
            const int t_steps = 50;
            const auto steps = random_cached_runs(rng, t_steps, 5);
            PhiRecord phi;
            for (int s : steps) {
                phi[s] = PhiEntry{phi_dist(rng), 0, 0};
            }
            const auto schedule = build_schedule(t_steps, steps, phi);
            const std::set<int> cached(steps.begin(), steps.end());
            // Non-cached intervals are nondecreasing in execution order and
            // every cached interval fits under the next computed one.
            double last_quantum = 0.0;
            for (int i = t_steps - 1; i >= 0; --i) {
                const double dt = schedule.delta_t[static_cast<std::size_t>(i)];
                if (cached.count(i)) {
                    double next_quantum = last_quantum;
                    for (int j = i - 1; j >= 0; --j) {
                        if (!cached.count(j)) {
                            next_quantum = schedule.delta_t[static_cast<std::size_t>(j)];
                            break;
                        }
                    }
                    r.measured = std::max(r.measured, dt - next_quantum);
                } else {
                    r.measured = std::max(r.measured, last_quantum - dt);
                    last_quantum = dt;
                }
            }
        }
        r.pass = r.measured <= r.tolerance;
        results.push_back(r);
    }

    bool all_pass = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << ' ' << r.name << ": measured " << fmt(r.measured)
                  << " (tolerance " << fmt(r.tolerance) << ")\n";
        all_pass = all_pass && r.pass;
    }
    if (!all_pass) {
        std::cerr << "verify: property failures:";
        for (const auto& r : results) {
            if (!r.pass) {
                std::cerr << ' ' << r.name;
            }
        }
        std::cerr << "\n";
        return kFailure;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct RunRow {
    std::uint64_t seed;
    int t_steps;
    double lambda;
    std::string rectify;
    std::map<std::string, double> metrics;
};

int cmd_report(const std::string& dir, const GlobalArgs& g) {
    if (!fs::exists(dir)) {
        throw empty_input_error("report: directory '" + dir + "' does not exist");
    }
    const std::vector<std::string> metric_cols = {"eval_ratio", "mse_vs_reference", "psnr_db",
                                                  "mse_vs_full", "wall_speedup"};
    std::vector<RunRow> rows;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().filename() != "runs.csv") {
            continue;
        }
        std::ifstream in(entry.path());
        std::string header;
        if (!std::getline(in, header)) {
            continue;
        }
        std::vector<std::string> cols;
        {
            std::stringstream ss(header);
            std::string c;
            while (std::getline(ss, c, ',')) cols.push_back(c);
        }
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            std::stringstream ss(line);
            std::string cell;
            std::map<std::string, std::string> record;
            for (std::size_t k = 0; k < cols.size() && std::getline(ss, cell, ','); ++k) {
                record[cols[k]] = cell;
            }
            try {
                RunRow row;
                row.seed = std::stoull(record.at("seed"));
                row.t_steps = std::stoi(record.at("T"));
                row.lambda = std::stod(record.at("lambda"));
                row.rectify = record.at("rectify");
                for (const auto& m : metric_cols) {
                    row.metrics[m] = std::stod(record.at(m));
                }
                rows.push_back(std::move(row));
            } catch (const std::exception&) {
                std::cerr << "warning: skipping unparsable row in " << entry.path() << "\n";
            }
        }
    }
    if (rows.empty()) {
        throw empty_input_error("report: no run rows found under '" + dir + "'");
    }

    // Group by configuration; mixed-T runs are reported separately.
    std::map<std::tuple<int, double, std::string>, std::vector<RunRow*>> groups;
    for (auto& row : rows) {
        groups[{row.t_steps, row.lambda, row.rectify}].push_back(&row);
    }

    const fs::path summary_path = fs::path(dir) / "summary.csv";
    std::ofstream summary(summary_path);
    summary << "T,lambda,rectify,seeds";
    for (const auto& m : metric_cols) {
        summary << ',' << m << "_mean," << m << "_std";
    }
    summary << '\n';

    std::cout << "T      lambda    rectify     seeds";
    for (const auto& m : metric_cols) {
        std::cout << "  " << m << " (mean+-std)";
    }
    std::cout << "\n";
    for (const auto& [key, members] : groups) {
        const auto& [t_steps, lambda, rectify] = key;
        summary << t_steps << ',' << fmt(lambda) << ',' << rectify << ',' << members.size();
        std::cout << t_steps << "  " << lambda << "  " << rectify << "  " << members.size();
        for (const auto& m : metric_cols) {
            double mean = 0.0;
            for (const auto* row : members) mean += row->metrics.at(m);
            mean /= static_cast<double>(members.size());
            double var = 0.0;
            for (const auto* row : members) {
                const double d = row->metrics.at(m) - mean;
                var += d * d;
            }
            const double stddev =
                members.size() > 1 ? std::sqrt(var / static_cast<double>(members.size() - 1)) : 0.0;
            summary << ',' << fmt(mean) << ',' << fmt(stddev);
            std::cout << "  " << fmt(mean) << "+-" << fmt(stddev);
        }
        summary << '\n';
        std::cout << "\n";
    }
    if (!g.quiet) {
        std::cout << "summary: " << summary_path.string() << "\n";
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    std::vector<std::string> storage = args;
    std::vector<char*> argv;
    argv.reserve(storage.size() + 1);
    static std::string prog = "erta";
    argv.push_back(prog.data());
    for (auto& a : storage) {
        argv.push_back(a.data());
    }
    return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, char** argv) {
    CLI::App app{"residual-cache accelerated ODE sampling: calibrate, run, sweep, verify, report"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalArgs g;
    app.add_option("--config", g.config_path, "JSON run configuration");
    app.add_option("--out", g.out_dir, "output directory (default: config, then $ERTA_OUT_DIR)");
    app.add_option("--workers", g.workers, "worker thread count");
    app.add_flag("--quiet", g.quiet, "suppress startup and progress chatter");

    auto* calibrate = app.add_subcommand("calibrate", "offline policy calibration -> policy file");
    double lambda_override = 0.0;
    auto* lambda_opt = calibrate->add_option("--lambda", lambda_override, "reuse threshold");

    auto* run_cmd = app.add_subcommand("run", "cached inference under a policy -> metrics files");
    std::string policy_path;
    run_cmd->add_option("--policy", policy_path, "policy file path")->required();
    std::vector<std::uint64_t> seed_override;
    run_cmd->add_option("--seeds", seed_override, "run seeds (overrides config)");
    std::string rectify_override;
    run_cmd->add_option("--rectify-mode", rectify_override, "off | sigmoid | linearized");
    bool with_baseline = false;
    run_cmd->add_flag("--baseline", with_baseline, "also run the full-compute baseline per seed");

    auto* sweep = app.add_subcommand("sweep", "lambda sweep -> Pareto CSV");
    std::vector<double> lambdas;
    sweep->add_option("--lambdas", lambdas, "lambda grid (overrides config lambda_grid)");

    auto* verify = app.add_subcommand("verify", "run the numerical property suite");
    auto* report = app.add_subcommand("report", "aggregate run CSVs into a summary table");
    std::string report_dir;
    report->add_option("dir", report_dir, "directory holding runs.csv files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        const RunConfig config = load_effective_config(g);
        if (calibrate->parsed()) {
            return cmd_calibrate(config, g, lambda_override, lambda_opt->count() > 0);
        }
        if (run_cmd->parsed()) {
            return cmd_run(config, g, policy_path, seed_override, rectify_override, with_baseline);
        }
        if (sweep->parsed()) {
            return cmd_sweep(config, g, lambdas);
        }
        if (verify->parsed()) {
            return cmd_verify(config, g);
        }
        if (report->parsed()) {
            return cmd_report(report_dir.empty() ? config.out_dir : report_dir, g);
        }
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const compat_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCompatError;
    } catch (const empty_input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kEmptyInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kConfigError;
}

}  // namespace erta::cli
