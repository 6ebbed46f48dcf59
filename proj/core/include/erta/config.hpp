#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "erta/calibration.hpp"
#include "erta/field.hpp"
#include "erta/latent.hpp"
#include "erta/rectify.hpp"

namespace erta {

// Run configuration, loaded from a JSON file. CLI flags override config
// fields; defaults fill the rest (flags > config > defaults).
struct RunConfig {
    FieldSpec field;
    LatentShape shape;
    int steps = 50;                       // T
    int prompt_count = 4;                 // calibration prompts actually used
    std::vector<std::uint64_t> calibration_seeds{11, 12, 13, 14};
    double lambda = 0.1;
    std::vector<double> lambda_grid;
    AggregationSpec aggregation;
    RectifyMode rectify_mode = RectifyMode::sigmoid;
    bool time_adjustment = true;
    long t_ref_steps = 20000;
    std::string out_dir;                  // empty: --out, then $ERTA_OUT_DIR, then "erta_out"
    int workers = 1;
    std::vector<std::uint64_t> run_seeds{101, 102, 103, 104, 105};
    bool measure_time = false;            // wall-clock fields stay 0 when off (keeps outputs byte-stable)
    bool save_profile = false;
    bool save_profile_vectors = false;
    std::string created_at;               // provenance stamp; system clock when empty
};

RunConfig default_config();

// Throws config_error on missing files, malformed JSON, or invariant
// violations (T >= 2, distinct seeds, valid field).
RunConfig load_config(const std::string& path);
void validate_config(const RunConfig& config);

// Canonical field serialization (used for provenance hashing and documented
// in the README).
std::string field_to_canonical_json(const FieldSpec& field);
std::string field_spec_hash(const FieldSpec& field);  // "fnv1a:<16 hex digits>"

// The first prompt_count calibration seeds paired with the config's field.
std::vector<CalibrationPrompt> calibration_prompts(const RunConfig& config);
std::vector<CalibrationPrompt> calibration_prompts(const RunConfig& config, int count);

}  // namespace erta
