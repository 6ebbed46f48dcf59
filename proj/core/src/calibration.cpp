#include "erta/calibration.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "canonical_json.hpp"
#include "erta/cache.hpp"
#include "erta/parallel.hpp"
#include "erta/schedule.hpp"

namespace erta {

namespace {

constexpr double kResidualFloor = 1e-30;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_prompts_match_profile(std::span<const CalibrationPrompt> prompts,
                                 const CalibrationProfile& profile) {
    if (prompts.size() != profile.prompts.size()) {
        throw std::invalid_argument("calibration: prompt batch size " + std::to_string(prompts.size()) +
                                    " does not match profile (" + std::to_string(profile.prompts.size()) +
                                    ")");
    }
    for (std::size_t p = 0; p < prompts.size(); ++p) {
        if (prompts[p].seed != profile.prompts[p].seed) {
            throw std::invalid_argument("calibration: prompt '" + prompts[p].id +
                                        "' does not match profile entry '" + profile.prompts[p].id + "'");
        }
    }
}

}  // namespace

CalibrationPrompt make_prompt(const FieldSpec& field, std::uint64_t seed) {
    return CalibrationPrompt{field, seed, "seed-" + std::to_string(seed)};
}

double relative_l1(const StateVec& r_tilde, const StateVec& r, const StateVec& r_gt) {
    require_same_shape(r_tilde, r, "relative_l1");
    require_same_shape(r, r_gt, "relative_l1");
    const double denom = l1_norm(r_gt);
    if (denom < kResidualFloor) {
        throw std::runtime_error("relative_l1: zero-norm ground-truth residual");
    }
    return l1_norm(sub(r_tilde, r)) / denom;
}

std::string aggregation_name(const AggregationSpec& spec) {
    switch (spec.kind) {
        case Aggregation::mean: return "mean";
        case Aggregation::max: return "max";
        case Aggregation::quantile: return "quantile-" + std::to_string(spec.q);
    }
    return "unknown";
}

AggregationSpec aggregation_from_name(const std::string& name) {
    AggregationSpec spec;
    if (name == "mean") {
        spec.kind = Aggregation::mean;
    } else if (name == "max") {
        spec.kind = Aggregation::max;
    } else if (name.rfind("quantile-", 0) == 0) {
        spec.kind = Aggregation::quantile;
        spec.q = std::stod(name.substr(9));
        if (!(spec.q >= 0.0 && spec.q <= 1.0)) {
            throw std::invalid_argument("aggregation quantile must lie in [0,1]");
        }
    } else {
        throw std::invalid_argument("unknown aggregation '" + name + "' (mean | max | quantile-q)");
    }
    return spec;
}

double aggregate(std::span<const double> values, const AggregationSpec& spec) {
    if (values.empty()) {
        throw std::invalid_argument("aggregate: empty value list");
    }
    switch (spec.kind) {
        case Aggregation::mean: {
            double s = 0.0;
            for (double v : values) s += v;
            return s / static_cast<double>(values.size());
        }
        case Aggregation::max:
            return *std::max_element(values.begin(), values.end());
        case Aggregation::quantile: {
            std::vector<double> sorted(values.begin(), values.end());
            std::sort(sorted.begin(), sorted.end());
            const auto rank = static_cast<std::size_t>(
                std::ceil(spec.q * static_cast<double>(sorted.size())));
            return sorted[rank == 0 ? 0 : rank - 1];  // nearest-rank
        }
    }
    throw std::logic_error("aggregate: unreachable");
}

CalibrationProfile log_ground_truth(std::span<const CalibrationPrompt> prompts,
                                    const LatentShape& shape, int t_steps, int workers) {
    if (t_steps < 2) {
        throw std::invalid_argument("log_ground_truth: T must be >= 2");
    }
    if (prompts.empty()) {
        throw std::invalid_argument("log_ground_truth: empty prompt batch");
    }
    validate_shape(shape);

    CalibrationProfile profile;
    profile.T = t_steps;
    profile.shape = shape;
    profile.prompts.resize(prompts.size());

    const StepSchedule schedule = StepSchedule::uniform(t_steps);
    parallel_for(prompts.size(), workers, [&](std::size_t p) {
        const CalibrationPrompt& prompt = prompts[p];
        TrajectoryRecord record;
        try {
            record = full_sample(prompt.field, sample_noise(prompt.seed, shape), schedule);
        } catch (const std::exception& e) {
            throw std::runtime_error("ground-truth logging failed for prompt '" + prompt.id +
                                     "': " + e.what());
        }
        PromptProfile& out = profile.prompts[p];
        out.id = prompt.id;
        out.seed = prompt.seed;
        out.r_gt.resize(static_cast<std::size_t>(t_steps));
        for (const auto& s : record.steps) {
            out.r_gt[static_cast<std::size_t>(s.step)] = sub(s.velocity, s.state);
        }
    });
    return profile;
}

CalibrationArtifacts search_policy(std::span<const CalibrationPrompt> prompts,
                                   const CalibrationProfile& profile, double lambda,
                                   const AggregationSpec& agg, int workers) {
    check_prompts_match_profile(prompts, profile);
    if (std::isnan(lambda) || lambda < 0.0) {
        throw std::invalid_argument("search_policy: lambda must be >= 0");
    }
    const int T = profile.T;
    const std::size_t P = prompts.size();
    const StepSchedule schedule = StepSchedule::uniform(T);

    CalibrationArtifacts art;
    art.T = T;
    art.rel_l1_by_step.assign(static_cast<std::size_t>(T), std::vector<double>(P, kNaN));
    art.rel_l1_agg_by_step.assign(static_cast<std::size_t>(T), kNaN);

    std::vector<StateVec> x(P);
    std::vector<ResidualCache> cache(P);
    std::vector<StateVec> v(P);       // true velocity at the current step
    std::vector<StateVec> v_prev(P);  // true velocity at step i+1
    std::vector<EvalCounter> counters(P);
    for (std::size_t p = 0; p < P; ++p) {
        x[p] = sample_noise(prompts[p].seed, profile.shape);
    }

    std::vector<double> rel(P, 0.0);
    double tau = 0.0;
    for (int i = T - 1; i >= 0; --i) {
        const double dt = schedule.delta_t[static_cast<std::size_t>(i)];
        // Full compute at every step: calibration always knows the truth.
        parallel_for(P, workers, [&](std::size_t p) {
            try {
                v[p] = eval_velocity(prompts[p].field, x[p], tau, counters[p]);
            } catch (const std::exception& e) {
                throw std::runtime_error("policy search failed for prompt '" + prompts[p].id +
                                         "' at step " + std::to_string(i) + ": " + e.what());
            }
        });

        const bool boundary = (i == T - 1 || i == 0);
        bool reuse = false;
        if (!boundary) {
            for (std::size_t p = 0; p < P; ++p) {
                const StateVec r_cali = sub(v[p], x[p]);
                const StateVec& r_gt = profile.prompts[p].r_gt[static_cast<std::size_t>(i)];
                if (l1_norm(r_gt) < kResidualFloor) {
                    throw std::runtime_error("degenerate ground-truth residual at step " +
                                             std::to_string(i) + " (prompt '" + prompts[p].id + "')");
                }
                rel[p] = relative_l1(cache[p].residual, r_cali, r_gt);
                art.rel_l1_by_step[static_cast<std::size_t>(i)][p] = rel[p];
            }
            const double agg_value = aggregate(rel, agg);
            art.rel_l1_agg_by_step[static_cast<std::size_t>(i)] = agg_value;
            reuse = agg_value < lambda;  // strict, as searched
        }

        if (reuse) {
            art.cached_steps.push_back(i);
            CachedStepSamples samples;
            samples.step = i;
            samples.rel_l1.assign(rel.begin(), rel.end());
            samples.rel_l1_agg = art.rel_l1_agg_by_step[static_cast<std::size_t>(i)];
            for (std::size_t p = 0; p < P; ++p) {
                StateVec v_tilde = cache[p].reuse(x[p]);
                samples.eps.push_back(sub(v_tilde, v[p]));
                samples.v_true.push_back(v[p]);
                samples.v_next.push_back(v_prev[p]);
                x[p] = euler_step(x[p], v_tilde, dt);  // advance with the reused velocity
                samples.v_tilde.push_back(std::move(v_tilde));
            }
            art.samples.push_back(std::move(samples));
        } else {
            for (std::size_t p = 0; p < P; ++p) {
                cache[p].refresh(v[p], x[p], i);
                x[p] = euler_step(x[p], v[p], dt);
            }
        }
        v_prev = v;
        tau += dt;
    }
    return art;
}

CachePolicy build_cache_policy(std::span<const CalibrationPrompt> prompts,
                               const CalibrationProfile& profile, double lambda,
                               const PolicyBuildOptions& options, int workers) {
    const CalibrationArtifacts art = search_policy(prompts, profile, lambda, options.aggregation, workers);
    const int T = art.T;

    CachePolicy policy;
    policy.steps = T;
    policy.lambda = lambda;
    policy.cached_steps = art.cached_steps;
    policy.phi.assign(static_cast<std::size_t>(T), 1.0);
    if (options.fit_rectification) {
        policy.k_values.assign(static_cast<std::size_t>(T), 0.0);
        policy.b_values.assign(static_cast<std::size_t>(T), 0.0);
    }

    PhiRecord phi_used;
    for (const auto& samples : art.samples) {
        // Per-prompt phi, aggregated with the batch rule.
        std::vector<double> phis;
        phis.reserve(samples.v_tilde.size());
        for (std::size_t p = 0; p < samples.v_tilde.size(); ++p) {
            phis.push_back(compute_phi(samples.v_tilde[p], samples.v_true[p], samples.v_next[p]).phi);
        }
        const double phi_agg = aggregate(phis, options.aggregation);
        policy.phi[static_cast<std::size_t>(samples.step)] = phi_agg;
        phi_used[samples.step] = PhiEntry{phi_agg, 0.0, 0.0};

        if (options.fit_rectification) {
            // Pool every latent position of every prompt before fitting.
            std::vector<double> pooled_v, pooled_eps;
            for (std::size_t p = 0; p < samples.v_tilde.size(); ++p) {
                pooled_v.insert(pooled_v.end(), samples.v_tilde[p].values.begin(),
                                samples.v_tilde[p].values.end());
                pooled_eps.insert(pooled_eps.end(), samples.eps[p].values.begin(),
                                  samples.eps[p].values.end());
            }
            const RectFit fit = fit_kb(pooled_v, pooled_eps);
            policy.k_values[static_cast<std::size_t>(samples.step)] = fit.k;
            policy.b_values[static_cast<std::size_t>(samples.step)] = fit.b;
        }
    }

    if (options.time_adjustment) {
        policy.delta_t = build_schedule(T, policy.cached_steps, phi_used).delta_t;
    } else {
        policy.delta_t = StepSchedule::uniform(T).delta_t;
        std::fill(policy.phi.begin(), policy.phi.end(), 1.0);
    }

    policy.field_hash = options.field_hash;
    policy.prompt_count = static_cast<int>(prompts.size());
    for (const auto& p : prompts) {
        policy.prompt_seeds.push_back(p.seed);
    }
    policy.aggregation = aggregation_name(options.aggregation);
    policy.created_at = options.created_at;

    validate_policy(policy);
    return policy;
}

std::vector<CalibrationStepReport> calibration_report(const CalibrationArtifacts& artifacts,
                                                      const CachePolicy& policy) {
    std::vector<CalibrationStepReport> rows;
    for (int i = artifacts.T - 1; i >= 0; --i) {
        CalibrationStepReport row;
        row.step = i;
        row.cached = policy.is_cached_step(i);
        row.rel_l1_agg = artifacts.rel_l1_agg_by_step[static_cast<std::size_t>(i)];
        row.phi = policy.phi[static_cast<std::size_t>(i)];
        if (policy.has_rectification()) {
            row.k = policy.k_values[static_cast<std::size_t>(i)];
            row.b = policy.b_values[static_cast<std::size_t>(i)];
        }
        row.dt = policy.delta_t[static_cast<std::size_t>(i)];
        rows.push_back(row);
    }
    for (const auto& samples : artifacts.samples) {
        std::vector<double> pooled_v, pooled_eps;
        for (std::size_t p = 0; p < samples.v_tilde.size(); ++p) {
            pooled_v.insert(pooled_v.end(), samples.v_tilde[p].values.begin(),
                            samples.v_tilde[p].values.end());
            pooled_eps.insert(pooled_eps.end(), samples.eps[p].values.begin(),
                              samples.eps[p].values.end());
        }
        rows[static_cast<std::size_t>(artifacts.T - 1 - samples.step)].fit =
            fit_kb(pooled_v, pooled_eps);
    }
    return rows;
}

std::vector<SweepRow> sweep_lambda(std::span<const CalibrationPrompt> prompts,
                                   const CalibrationProfile& profile,
                                   std::span<const double> lambdas, const SweepOptions& options) {
    if (lambdas.empty()) {
        throw std::invalid_argument("sweep_lambda: empty lambda grid");
    }
    for (std::size_t i = 1; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > lambdas[i - 1])) {
            throw std::invalid_argument("sweep_lambda: lambda grid must be strictly ascending");
        }
    }
    check_prompts_match_profile(prompts, profile);

    // References and full baselines are lambda-independent.
    const std::size_t P = prompts.size();
    std::vector<StateVec> reference(P), full_end(P);
    const StepSchedule uniform = StepSchedule::uniform(profile.T);
    parallel_for(P, options.workers, [&](std::size_t p) {
        const StateVec x0 = sample_noise(prompts[p].seed, profile.shape);
        reference[p] = reference_endpoint(prompts[p].field, x0, options.t_ref_steps);
        full_end[p] = full_sample(prompts[p].field, x0, uniform, SampleOptions{false}).endpoint;
    });

    PolicyBuildOptions build;
    build.aggregation = options.aggregation;
    build.time_adjustment = options.time_adjustment;
    build.fit_rectification = options.rectify != RectifyMode::off;

    std::vector<SweepRow> rows;
    int prev_count = -1;
    for (double lambda : lambdas) {
        const CachePolicy policy =
            build_cache_policy(prompts, profile, lambda, build, options.workers);

        SweepRow row;
        row.lambda = lambda;
        row.cached_count = static_cast<int>(policy.cached_steps.size());
        double mse_ref = 0.0, mse_full = 0.0;
        std::uint64_t evals = 0;
        for (std::size_t p = 0; p < P; ++p) {
            const StateVec x0 = sample_noise(prompts[p].seed, profile.shape);
            const TrajectoryRecord cached =
                cached_sample(prompts[p].field, x0, policy, options.rectify, SampleOptions{false});
            mse_ref += mean_squared_error(cached.endpoint, reference[p]);
            mse_full += mean_squared_error(cached.endpoint, full_end[p]);
            evals = cached.eval_count;
        }
        row.mse_vs_reference = mse_ref / static_cast<double>(P);
        row.mse_vs_full = mse_full / static_cast<double>(P);
        row.eval_count = evals;

        if (row.cached_count < prev_count) {
            throw std::runtime_error("sweep_lambda: cached-step count decreased from " +
                                     std::to_string(prev_count) + " to " +
                                     std::to_string(row.cached_count) + " at lambda=" +
                                     std::to_string(lambda));
        }
        prev_count = row.cached_count;
        row.policy = policy;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Profile persistence
// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "profile residual dumps are defined little-endian");

constexpr char kMagic[4] = {'E', 'R', 'T', 'A'};
constexpr std::uint32_t kProfileVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw std::runtime_error("truncated residual file '" + path + "'");
    }
    return v;
}

}  // namespace

void save_profile(const CalibrationProfile& profile, const std::string& dir, bool full_vectors) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["T"] = profile.T;
    manifest["shape"] = {{"n_t", profile.shape.n_t},
                         {"n_c", profile.shape.n_c},
                         {"n_h", profile.shape.n_h},
                         {"n_w", profile.shape.n_w}};
    manifest["full_vectors"] = full_vectors;

    nlohmann::json prompt_list = nlohmann::json::array();
    for (const auto& prompt : profile.prompts) {
        const std::string stem = "prompt_" + prompt.id;
        nlohmann::json entry;
        entry["id"] = prompt.id;
        entry["seed"] = prompt.seed;
        entry["summary_csv"] = stem + "_summary.csv";
        if (full_vectors) {
            entry["residuals_bin"] = stem + "_rgt.bin";
        }
        prompt_list.push_back(entry);

        {
            std::ofstream csv(fs::path(dir) / (stem + "_summary.csv"));
            csv << "step,r_gt_l1,r_gt_l2\n";
            for (int i = profile.T - 1; i >= 0; --i) {
                const auto& r = prompt.r_gt[static_cast<std::size_t>(i)];
                csv << i << ',' << detail::format_double_17g(l1_norm(r)) << ','
                    << detail::format_double_17g(l2_norm(r)) << '\n';
            }
        }

        if (full_vectors) {
            std::ofstream bin(fs::path(dir) / (stem + "_rgt.bin"), std::ios::binary);
            bin.write(kMagic, 4);
            write_u32(bin, kProfileVersion);
            write_u32(bin, static_cast<std::uint32_t>(profile.T));
            write_u32(bin, static_cast<std::uint32_t>(profile.shape.n()));
            // Rows in execution order: step T-1 first.
            for (int i = profile.T - 1; i >= 0; --i) {
                const auto& r = prompt.r_gt[static_cast<std::size_t>(i)];
                bin.write(reinterpret_cast<const char*>(r.values.data()),
                          static_cast<std::streamsize>(r.values.size() * sizeof(double)));
            }
            if (!bin.good()) {
                throw std::runtime_error("failed writing residual file for prompt '" + prompt.id + "'");
            }
        }
    }
    manifest["prompts"] = prompt_list;

    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    out << detail::canonical_dump(manifest) << '\n';
    if (!out.good()) {
        throw std::runtime_error("failed writing profile manifest under '" + dir + "'");
    }
}

CalibrationProfile load_profile(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open profile manifest '" + manifest_path.string() + "'");
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("malformed profile manifest at byte " + std::to_string(e.byte) + ": " +
                                 e.what());
    }
    if (manifest.value("format_version", 0) != 1) {
        throw std::runtime_error("unsupported profile format version");
    }
    if (!manifest.value("full_vectors", false)) {
        throw std::runtime_error("profile under '" + dir +
                                 "' was saved without full residual vectors and cannot be reloaded");
    }

    CalibrationProfile profile;
    profile.T = manifest.at("T").get<int>();
    const auto& sh = manifest.at("shape");
    profile.shape = LatentShape{sh.at("n_t").get<int>(), sh.at("n_c").get<int>(),
                                sh.at("n_h").get<int>(), sh.at("n_w").get<int>()};

    for (const auto& entry : manifest.at("prompts")) {
        PromptProfile prompt;
        prompt.id = entry.at("id").get<std::string>();
        prompt.seed = entry.at("seed").get<std::uint64_t>();

        const std::string bin_path = (fs::path(dir) / entry.at("residuals_bin").get<std::string>()).string();
        std::ifstream bin(bin_path, std::ios::binary);
        if (!bin) {
            throw std::runtime_error("cannot open residual file '" + bin_path + "'");
        }
        char magic[4];
        if (!bin.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
            throw std::runtime_error("residual file '" + bin_path + "' has a bad magic header");
        }
        if (read_u32(bin, bin_path) != kProfileVersion) {
            throw std::runtime_error("residual file '" + bin_path + "' has an unsupported version");
        }
        const std::uint32_t t_steps = read_u32(bin, bin_path);
        const std::uint32_t n = read_u32(bin, bin_path);
        if (t_steps != static_cast<std::uint32_t>(profile.T) || n != profile.shape.n()) {
            throw std::runtime_error("residual file '" + bin_path + "' does not match the manifest (T=" +
                                     std::to_string(t_steps) + ", n=" + std::to_string(n) + ")");
        }
        prompt.r_gt.resize(profile.T);
        for (int i = profile.T - 1; i >= 0; --i) {
            std::vector<double> values(n);
            if (!bin.read(reinterpret_cast<char*>(values.data()),
                          static_cast<std::streamsize>(n * sizeof(double)))) {
                throw std::runtime_error("truncated residual file '" + bin_path + "'");
            }
            prompt.r_gt[static_cast<std::size_t>(i)] = StateVec{std::move(values), profile.shape};
        }
        profile.prompts.push_back(std::move(prompt));
    }
    return profile;
}

}  // namespace erta
