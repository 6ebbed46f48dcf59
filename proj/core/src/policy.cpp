#include "erta/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "canonical_json.hpp"

namespace erta {

namespace {

constexpr int kSupportedVersion = 1;
constexpr double kBudgetTolerance = 1e-12;

}  // namespace

bool CachePolicy::is_cached_step(int step) const {
    return std::find(cached_steps.begin(), cached_steps.end(), step) != cached_steps.end();
}

void validate_policy(const CachePolicy& policy) {
    if (policy.format_version != kSupportedVersion) {
        throw std::runtime_error("policy format version " + std::to_string(policy.format_version) +
                                 " unsupported (expected " + std::to_string(kSupportedVersion) + ")");
    }
    if (policy.steps < 2) {
        throw std::runtime_error("policy: step count must be >= 2, got " + std::to_string(policy.steps));
    }
    // +infinity is the documented "always reuse" sentinel; it is valid in
    // memory but refused at save time (JSON carries no infinity literal).
    if (std::isnan(policy.lambda) || policy.lambda < 0.0) {
        throw std::runtime_error("policy: lambda must be >= 0");
    }
    if (policy.delta_t.size() != static_cast<std::size_t>(policy.steps)) {
        throw std::runtime_error("policy: delta_t length " + std::to_string(policy.delta_t.size()) +
                                 " does not match steps " + std::to_string(policy.steps));
    }
    double sum = 0.0;
    for (double dt : policy.delta_t) {
        if (!std::isfinite(dt) || dt < 0.0) {
            throw std::runtime_error("policy: every delta_t must be finite and >= 0");
        }
        sum += dt;
    }
    if (std::fabs(sum - 1.0) > kBudgetTolerance) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.3e", std::fabs(sum - 1.0));
        throw std::runtime_error(std::string("policy: timestep budget not conserved, |sum(delta_t)-1| = ") + buf);
    }
    int prev = policy.steps;
    for (int s : policy.cached_steps) {
        if (s == 0 || s == policy.steps - 1) {
            throw std::runtime_error("policy: boundary step cached (step " + std::to_string(s) + ")");
        }
        if (s < 0 || s >= policy.steps) {
            throw std::runtime_error("policy: cached step " + std::to_string(s) + " out of range");
        }
        if (s >= prev) {
            throw std::runtime_error("policy: cached steps must be strictly descending");
        }
        prev = s;
    }
    if (!policy.k_values.empty() || !policy.b_values.empty()) {
        if (policy.k_values.size() != static_cast<std::size_t>(policy.steps) ||
            policy.b_values.size() != static_cast<std::size_t>(policy.steps)) {
            throw std::runtime_error("policy: K/B arrays must both have length T or both be empty");
        }
        for (int i = 0; i < policy.steps; ++i) {
            if (!std::isfinite(policy.k_values[i]) || !std::isfinite(policy.b_values[i])) {
                throw std::runtime_error("policy: non-finite K/B at step " + std::to_string(i));
            }
        }
    }
    if (policy.phi.size() != static_cast<std::size_t>(policy.steps)) {
        throw std::runtime_error("policy: phi length must equal steps");
    }
    for (double p : policy.phi) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::runtime_error("policy: phi values must lie in [0,1]");
        }
    }
}

void save_policy(const CachePolicy& policy, const std::string& path) {
    validate_policy(policy);
    if (!std::isfinite(policy.lambda)) {
        throw std::runtime_error("policy: cannot persist a non-finite lambda");
    }

    nlohmann::json j;
    j["aggregation"] = policy.aggregation;
    j["b"] = policy.b_values;
    j["cached_steps"] = policy.cached_steps;
    j["created_at"] = policy.created_at;
    j["delta_t"] = policy.delta_t;
    j["field_hash"] = policy.field_hash;
    j["format_version"] = policy.format_version;
    j["k"] = policy.k_values;
    j["lambda"] = policy.lambda;
    j["phi"] = policy.phi;
    j["prompt_count"] = policy.prompt_count;
    j["prompt_seeds"] = policy.prompt_seeds;
    j["steps"] = policy.steps;

    const std::string body = detail::canonical_dump(j) + "\n";

    const std::filesystem::path target(path);
    if (target.has_parent_path()) {
        std::filesystem::create_directories(target.parent_path());
    }
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write policy file '" + tmp.string() + "'");
        }
        out << body;
        if (!out.good()) {
            throw std::runtime_error("write failed for policy file '" + tmp.string() + "'");
        }
    }
    std::filesystem::rename(tmp, target);
}

CachePolicy load_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open policy file '" + path + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        // e.byte is the offset where parsing stopped.
        throw std::runtime_error("malformed policy file '" + path + "' at byte " +
                                 std::to_string(e.byte) + ": " + e.what());
    }

    CachePolicy p;
    try {
        p.format_version = j.at("format_version").get<int>();
        if (p.format_version != kSupportedVersion) {
            throw std::runtime_error("policy format version " + std::to_string(p.format_version) +
                                     " unsupported (expected " + std::to_string(kSupportedVersion) + ")");
        }
        p.steps = j.at("steps").get<int>();
        p.lambda = j.at("lambda").get<double>();
        p.cached_steps = j.at("cached_steps").get<std::vector<int>>();
        p.delta_t = j.at("delta_t").get<std::vector<double>>();
        p.k_values = j.at("k").get<std::vector<double>>();
        p.b_values = j.at("b").get<std::vector<double>>();
        p.phi = j.at("phi").get<std::vector<double>>();
        p.field_hash = j.value("field_hash", std::string());
        p.prompt_count = j.value("prompt_count", 0);
        p.prompt_seeds = j.value("prompt_seeds", std::vector<std::uint64_t>());
        p.aggregation = j.value("aggregation", std::string("mean"));
        p.created_at = j.value("created_at", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("policy file '" + path + "': " + e.what());
    }

    validate_policy(p);
    return p;
}

}  // namespace erta
