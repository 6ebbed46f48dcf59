#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "erta/latent.hpp"

namespace erta {

enum class RectifyMode { off, sigmoid, linearized };

std::string_view rectify_mode_name(RectifyMode mode);
RectifyMode rectify_mode_from_name(std::string_view name);

double sigmoid(double x);

// Per-step scalar fit of the cache-error model eps ~ sigmoid(K*v + B),
// linearized through sigmoid(x) ~ x/4 + 1/2. Samples pool all latent
// positions and all calibration prompts for one step.
struct RectFit {
    double k = 0.0;
    double b = 0.0;
    // fit diagnostics
    double s_vv = 0.0;
    double s_ve = 0.0;
    double eps_mean = 0.0;
    double v_mean = 0.0;
    std::size_t sample_count = 0;
    bool degenerate_variance = false;  // constant-v input; K forced to 0
};

// Closed form via centered sums: K = 4*S_ve/S_vv, B = 4*(eps_mean - 1/2) - K*v_mean.
RectFit fit_kb(std::span<const double> v_samples, std::span<const double> eps_samples);

// Independent oracle: assembles and solves the 2x2 normal equations of the
// linearized objective mean[eps - (K*v + B)/4 - 1/2]^2 directly (raw sums and
// Cramer's rule, no shared code with fit_kb beyond the degenerate fallback).
std::pair<double, double> fit_kb_oracle_ls(std::span<const double> v_samples,
                                           std::span<const double> eps_samples);

// Gradient-descent minimizer of the exact sigmoid objective
// mean[eps - sigmoid(K*v + B)]^2, used to quantify the Taylor-approximation
// gap. Starts from the closed-form fit. If the loss rises for 10 consecutive
// iterations the rate is halved and the best point restored; after 5 halvings
// the fit is reported as not converged.
struct SigmoidFitResult {
    double k = 0.0;
    double b = 0.0;
    double loss = 0.0;
    bool converged = true;
    int rate_halvings = 0;
};

SigmoidFitResult fit_kb_oracle_sigmoid(std::span<const double> v_samples,
                                       std::span<const double> eps_samples,
                                       int iters, double rate);

double sigmoid_objective_loss(std::span<const double> v_samples,
                              std::span<const double> eps_samples, double k, double b);

// Subtract the modeled error from a reconstructed velocity, elementwise.
// sigmoid mode: v - sigmoid(K*v + B); linearized mode: v - ((K*v + B)/4 + 1/2).
StateVec rectify_velocity(const StateVec& v_tilde, double k, double b, RectifyMode mode);

}  // namespace erta
