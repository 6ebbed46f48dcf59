#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "erta/latent.hpp"

namespace erta {

// Velocity-field providers standing in for a learned denoiser.
//
// Time convention: the sampler advances a denoising progress tau in [0,1]
// from noise (tau=0) to data (tau=1), and every provider returns the
// denoising-direction velocity so the update x += dt*v is a plain plus.
// Analytic flows defined in forward (data-to-noise) time t use t = 1 - tau
// and return the negated forward marginal velocity.
enum class FieldKind {
    affine,               // v(x,tau) = ((1-tau)A0 + tau*A1) x + (1-tau)b0 + tau*b1
    affine_plus_identity, // v(x) = x + c; residual v - x is constant (zero cache error)
    gaussian_mixture,     // marginal transport velocity of an isotropic Gaussian mixture
    scripted,             // per-step velocity table, independent of x
};

std::string_view field_kind_name(FieldKind kind);
FieldKind field_kind_from_name(std::string_view name);

struct AffineParams {
    std::vector<double> a0, a1;  // n x n, row-major
    std::vector<double> b0, b1;  // n
};

struct ShiftParams {
    std::vector<double> shift;  // the constant c in v(x) = x + c
};

struct MixtureComponent {
    double weight = 1.0;
    std::vector<double> mean;
    double sigma = 1.0;  // isotropic data scale
};

struct MixtureParams {
    std::vector<MixtureComponent> components;
};

struct ScriptedParams {
    // Rows in execution order: row 0 is the first executed step (step T-1).
    std::vector<std::vector<double>> rows;
};

struct FieldSpec {
    FieldKind kind = FieldKind::affine_plus_identity;
    int dimension = 1;
    AffineParams affine;
    ShiftParams shift;
    MixtureParams mixture;
    ScriptedParams scripted;
    double eval_delay_ms = 0.0;  // artificial per-eval cost for wall-clock studies
};

void validate_field(const FieldSpec& field);

FieldSpec make_shift_field(std::vector<double> shift);
FieldSpec make_affine_field(int n, std::vector<double> a0, std::vector<double> a1,
                            std::vector<double> b0, std::vector<double> b1);
FieldSpec make_mixture_field(int n, std::vector<MixtureComponent> components);
FieldSpec make_scripted_field(int n, std::vector<std::vector<double>> rows);

// Counts full field evaluations. One counter per in-flight trajectory; batch
// totals are reduced in fixed (seed-sorted) order.
struct EvalCounter {
    std::uint64_t count = 0;
};

StateVec eval_velocity(const FieldSpec& field, const StateVec& x, double tau, EvalCounter& counter);

// Posterior component weights of the mixture at forward time t (noise level
// 1-t consumed). Computed in log-space; if every component underflows the
// weight collapses onto the nearest component in scaled Mahalanobis distance
// (ties break to the lower index).
std::vector<double> mixture_responsibilities(const FieldSpec& field, const StateVec& x, double t);

// Fine-grid uniform Euler endpoint, the ground-truth oracle for quality
// metrics. Deliberately first-order so the T->infinity limit matches the
// sampler's own discretization family.
StateVec reference_endpoint(const FieldSpec& field, const StateVec& x_start, long t_ref_steps,
                            double divergence_norm_bound = 1e12);

// Deterministic, portable standard-normal draw: mt19937_64 keyed by the seed,
// uniforms from the top 53 bits, Box-Muller pairs.
StateVec sample_noise(std::uint64_t seed, const LatentShape& shape);

// One row per step, comma-separated reals.
std::vector<std::vector<double>> load_scripted_csv(const std::string& path);

}  // namespace erta
