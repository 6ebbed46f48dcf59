#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace erta {

// Persisted calibration output: everything inference needs to run the cached
// sampler. Written as canonical JSON (sorted keys, 17-significant-digit
// floats, atomic replace) under the `.ertapolicy.json` extension.
struct CachePolicy {
    int format_version = 1;
    int steps = 0;               // T
    double lambda = 0.0;
    std::vector<int> cached_steps;   // S, sorted descending; never contains T-1 or 0
    std::vector<double> delta_t;     // length T, sums to 1 within 1e-12
    std::vector<double> k_values;    // length T (zero outside S) or empty if never fitted
    std::vector<double> b_values;    // same layout as k_values
    std::vector<double> phi;         // length T, 1.0 outside S

    // provenance
    std::string field_hash;
    int prompt_count = 0;
    std::vector<std::uint64_t> prompt_seeds;
    std::string aggregation = "mean";
    std::string created_at;

    bool is_cached_step(int step) const;
    bool has_rectification() const { return !k_values.empty(); }
};

// Throws std::runtime_error describing the first violated invariant.
void validate_policy(const CachePolicy& policy);

void save_policy(const CachePolicy& policy, const std::string& path);
CachePolicy load_policy(const std::string& path);

constexpr const char* kPolicyFileExtension = ".ertapolicy.json";

}  // namespace erta
