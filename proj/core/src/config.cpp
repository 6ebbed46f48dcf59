#include "erta/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "canonical_json.hpp"
#include "erta/errors.hpp"

namespace erta {

using nlohmann::json;

RunConfig default_config() {
    RunConfig c;
    c.shape = LatentShape{1, 2, 1, 1};
    c.field = make_mixture_field(2, {MixtureComponent{0.5, {1.2, 0.8}, 0.7},
                                     MixtureComponent{0.5, {-1.0, -0.6}, 0.9}});
    return c;
}

namespace {

json field_to_json(const FieldSpec& field) {
    json j;
    j["kind"] = std::string(field_kind_name(field.kind));
    j["dimension"] = field.dimension;
    j["eval_delay_ms"] = field.eval_delay_ms;
    switch (field.kind) {
        case FieldKind::affine:
            j["a0"] = field.affine.a0;
            j["a1"] = field.affine.a1;
            j["b0"] = field.affine.b0;
            j["b1"] = field.affine.b1;
            break;
        case FieldKind::affine_plus_identity:
            j["c"] = field.shift.shift;
            break;
        case FieldKind::gaussian_mixture: {
            json comps = json::array();
            for (const auto& c : field.mixture.components) {
                comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"sigma", c.sigma}});
            }
            j["components"] = comps;
            break;
        }
        case FieldKind::scripted:
            j["table"] = field.scripted.rows;
            break;
    }
    return j;
}

FieldSpec field_from_json(const json& j) {
    FieldSpec field;
    field.kind = field_kind_from_name(j.at("kind").get<std::string>());
    field.dimension = j.at("dimension").get<int>();
    field.eval_delay_ms = j.value("eval_delay_ms", 0.0);
    switch (field.kind) {
        case FieldKind::affine:
            field.affine.a0 = j.at("a0").get<std::vector<double>>();
            field.affine.a1 = j.at("a1").get<std::vector<double>>();
            field.affine.b0 = j.at("b0").get<std::vector<double>>();
            field.affine.b1 = j.at("b1").get<std::vector<double>>();
            break;
        case FieldKind::affine_plus_identity:
            field.shift.shift = j.at("c").get<std::vector<double>>();
            break;
        case FieldKind::gaussian_mixture:
            for (const auto& c : j.at("components")) {
                field.mixture.components.push_back(MixtureComponent{
                    c.at("weight").get<double>(), c.at("mean").get<std::vector<double>>(),
                    c.at("sigma").get<double>()});
            }
            break;
        case FieldKind::scripted:
            if (j.contains("table_csv")) {
                field.scripted.rows = load_scripted_csv(j.at("table_csv").get<std::string>());
            } else {
                field.scripted.rows = j.at("table").get<std::vector<std::vector<double>>>();
            }
            break;
    }
    validate_field(field);
    return field;
}

}  // namespace

std::string field_to_canonical_json(const FieldSpec& field) {
    return detail::canonical_dump(field_to_json(field));
}

std::string field_spec_hash(const FieldSpec& field) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(field_to_canonical_json(field))));
    return buf;
}

void validate_config(const RunConfig& config) {
    if (config.steps < 2) {
        throw config_error("config: steps (T) must be >= 2, got " + std::to_string(config.steps));
    }
    try {
        validate_field(config.field);
        validate_shape(config.shape);
    } catch (const std::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    if (config.field.dimension != static_cast<int>(config.shape.n())) {
        throw config_error("config: field dimension " + std::to_string(config.field.dimension) +
                           " does not match shape element count " + std::to_string(config.shape.n()));
    }
    if (config.field.kind == FieldKind::scripted &&
        config.field.scripted.rows.size() < static_cast<std::size_t>(config.steps)) {
        throw config_error("config: scripted table has " +
                           std::to_string(config.field.scripted.rows.size()) + " rows but T=" +
                           std::to_string(config.steps));
    }
    if (config.prompt_count < 1) {
        throw config_error("config: prompt_count must be >= 1");
    }
    if (static_cast<std::size_t>(config.prompt_count) > config.calibration_seeds.size()) {
        throw config_error("config: prompt_count " + std::to_string(config.prompt_count) +
                           " exceeds the calibration seed list (" +
                           std::to_string(config.calibration_seeds.size()) + ")");
    }
    std::set<std::uint64_t> uniq(config.calibration_seeds.begin(), config.calibration_seeds.end());
    if (uniq.size() != config.calibration_seeds.size()) {
        throw config_error("config: calibration seeds must be distinct");
    }
    std::set<std::uint64_t> run_uniq(config.run_seeds.begin(), config.run_seeds.end());
    if (run_uniq.size() != config.run_seeds.size()) {
        throw config_error("config: run seeds must be distinct");
    }
    if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda)) {
        throw config_error("config: lambda must be finite and >= 0");
    }
    if (config.t_ref_steps < 1000) {
        throw config_error("config: t_ref_steps must be >= 1000");
    }
    if (config.workers < 1) {
        throw config_error("config: workers must be >= 1");
    }
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw config_error("config not found: '" + path + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error("malformed config '" + path + "' at byte " + std::to_string(e.byte) + ": " +
                           e.what());
    }

    RunConfig c = default_config();
    try {
        if (j.contains("field")) {
            c.field = field_from_json(j.at("field"));
        }
        if (j.contains("shape")) {
            const auto& sh = j.at("shape");
            c.shape = LatentShape{sh.value("n_t", 1), sh.value("n_c", 1), sh.value("n_h", 1),
                                  sh.value("n_w", 1)};
        } else if (j.contains("field")) {
            c.shape = LatentShape{1, c.field.dimension, 1, 1};
        }
        c.steps = j.value("steps", c.steps);
        if (j.contains("calibration")) {
            const auto& cal = j.at("calibration");
            if (cal.contains("seeds")) {
                c.calibration_seeds = cal.at("seeds").get<std::vector<std::uint64_t>>();
            }
            c.prompt_count = cal.value("prompt_count", static_cast<int>(c.calibration_seeds.size()));
        }
        c.lambda = j.value("lambda", c.lambda);
        if (j.contains("lambda_grid")) {
            c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
        }
        if (j.contains("aggregation")) {
            c.aggregation = aggregation_from_name(j.at("aggregation").get<std::string>());
        }
        if (j.contains("rectify_mode")) {
            c.rectify_mode = rectify_mode_from_name(j.at("rectify_mode").get<std::string>());
        }
        c.time_adjustment = j.value("time_adjustment", c.time_adjustment);
        c.t_ref_steps = j.value("t_ref_steps", c.t_ref_steps);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.workers = j.value("workers", c.workers);
        if (j.contains("run_seeds")) {
            c.run_seeds = j.at("run_seeds").get<std::vector<std::uint64_t>>();
        }
        c.measure_time = j.value("measure_time", c.measure_time);
        c.save_profile = j.value("save_profile", c.save_profile);
        c.save_profile_vectors = j.value("save_profile_vectors", c.save_profile_vectors);
        c.created_at = j.value("created_at", c.created_at);
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& e) {
        throw config_error("config '" + path + "': " + e.what());
    }

    validate_config(c);
    return c;
}

std::vector<CalibrationPrompt> calibration_prompts(const RunConfig& config) {
    return calibration_prompts(config, config.prompt_count);
}

std::vector<CalibrationPrompt> calibration_prompts(const RunConfig& config, int count) {
    if (count < 1 || static_cast<std::size_t>(count) > config.calibration_seeds.size()) {
        throw config_error("calibration prompt count " + std::to_string(count) +
                           " out of range for the configured seed list");
    }
    std::vector<CalibrationPrompt> prompts;
    prompts.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        prompts.push_back(make_prompt(config.field, config.calibration_seeds[static_cast<std::size_t>(i)]));
    }
    return prompts;
}

}  // namespace erta
