#include "erta/rectify.hpp"

#include <cmath>
#include <stdexcept>

namespace erta {

namespace {

constexpr double kVarianceFloor = 1e-30;

void check_samples(std::span<const double> v, std::span<const double> eps) {
    if (v.size() != eps.size()) {
        throw std::invalid_argument("rectify fit: sample sequences differ in length");
    }
    if (v.size() < 2) {
        throw std::invalid_argument("rectify fit: need at least 2 samples, got " +
                                    std::to_string(v.size()));
    }
}

}  // namespace

std::string_view rectify_mode_name(RectifyMode mode) {
    switch (mode) {
        case RectifyMode::off: return "off";
        case RectifyMode::sigmoid: return "sigmoid";
        case RectifyMode::linearized: return "linearized";
    }
    return "unknown";
}

RectifyMode rectify_mode_from_name(std::string_view name) {
    if (name == "off") return RectifyMode::off;
    if (name == "sigmoid") return RectifyMode::sigmoid;
    if (name == "linearized") return RectifyMode::linearized;
    throw std::invalid_argument("unknown rectify mode '" + std::string(name) + "'");
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

RectFit fit_kb(std::span<const double> v_samples, std::span<const double> eps_samples) {
    check_samples(v_samples, eps_samples);
    const auto n = static_cast<double>(v_samples.size());

    // Two-pass centered sums.
    double v_mean = 0.0, e_mean = 0.0;
    for (std::size_t i = 0; i < v_samples.size(); ++i) {
        v_mean += v_samples[i];
        e_mean += eps_samples[i];
    }
    v_mean /= n;
    e_mean /= n;

    double s_vv = 0.0, s_ve = 0.0;
    for (std::size_t i = 0; i < v_samples.size(); ++i) {
        const double dv = v_samples[i] - v_mean;
        s_vv += dv * dv;
        s_ve += dv * (eps_samples[i] - e_mean);
    }

    RectFit fit;
    fit.s_vv = s_vv;
    fit.s_ve = s_ve;
    fit.eps_mean = e_mean;
    fit.v_mean = v_mean;
    fit.sample_count = v_samples.size();

    if (s_vv < kVarianceFloor) {
        fit.degenerate_variance = true;
        fit.k = 0.0;
        fit.b = 4.0 * (e_mean - 0.5);
        return fit;
    }
    fit.k = 4.0 * s_ve / s_vv;
    fit.b = 4.0 * (e_mean - 0.5) - fit.k * v_mean;
    return fit;
}

std::pair<double, double> fit_kb_oracle_ls(std::span<const double> v_samples,
                                           std::span<const double> eps_samples) {
    check_samples(v_samples, eps_samples);
    const auto n = static_cast<double>(v_samples.size());

    // Design row per sample: (v/4, 1/4), target eps - 1/2.
    double sv = 0.0, svv = 0.0, sy = 0.0, svy = 0.0;
    for (std::size_t i = 0; i < v_samples.size(); ++i) {
        const double v = v_samples[i];
        const double y = eps_samples[i] - 0.5;
        sv += v;
        svv += v * v;
        sy += y;
        svy += v * y;
    }
    const double a11 = svv / 16.0, a12 = sv / 16.0, a22 = n / 16.0;
    const double r1 = svy / 4.0, r2 = sy / 4.0;
    const double det = a11 * a22 - a12 * a12;  // = n*S_vv/256

    if (det / (n * n) * 256.0 < kVarianceFloor) {
        return {0.0, 4.0 * (sy / n)};  // same degenerate handling as fit_kb
    }
    const double k = (r1 * a22 - a12 * r2) / det;
    const double b = (a11 * r2 - a12 * r1) / det;
    return {k, b};
}

double sigmoid_objective_loss(std::span<const double> v_samples,
                              std::span<const double> eps_samples, double k, double b) {
    double loss = 0.0;
    for (std::size_t i = 0; i < v_samples.size(); ++i) {
        const double d = eps_samples[i] - sigmoid(k * v_samples[i] + b);
        loss += d * d;
    }
    return loss / static_cast<double>(v_samples.size());
}

SigmoidFitResult fit_kb_oracle_sigmoid(std::span<const double> v_samples,
                                       std::span<const double> eps_samples,
                                       int iters, double rate) {
    check_samples(v_samples, eps_samples);
    if (iters < 1) {
        throw std::invalid_argument("fit_kb_oracle_sigmoid: iters must be >= 1");
    }

    const RectFit init = fit_kb(v_samples, eps_samples);
    double k = init.k, b = init.b;
    const auto n = static_cast<double>(v_samples.size());

    SigmoidFitResult best;
    best.k = k;
    best.b = b;
    best.loss = sigmoid_objective_loss(v_samples, eps_samples, k, b);

    double prev_loss = best.loss;
    int rising = 0;
    int halvings = 0;

    for (int it = 0; it < iters; ++it) {
        double gk = 0.0, gb = 0.0;
        for (std::size_t i = 0; i < v_samples.size(); ++i) {
            const double s = sigmoid(k * v_samples[i] + b);
            const double common = 2.0 * (s - eps_samples[i]) * s * (1.0 - s);
            gk += common * v_samples[i];
            gb += common;
        }
        k -= rate * gk / n;
        b -= rate * gb / n;

        const double loss = sigmoid_objective_loss(v_samples, eps_samples, k, b);
        if (loss < best.loss) {
            best.k = k;
            best.b = b;
            best.loss = loss;
        }
        if (loss > prev_loss) {
            if (++rising >= 10) {
                if (++halvings > 5) {
                    best.converged = false;
                    best.rate_halvings = halvings - 1;
                    return best;
                }
                rate *= 0.5;
                k = best.k;
                b = best.b;
                rising = 0;
                prev_loss = best.loss;
                continue;
            }
        } else {
            rising = 0;
        }
        prev_loss = loss;
    }
    best.rate_halvings = halvings;
    return best;
}

StateVec rectify_velocity(const StateVec& v_tilde, double k, double b, RectifyMode mode) {
    if (!std::isfinite(k) || !std::isfinite(b)) {
        throw std::invalid_argument("rectify_velocity: K and B must be finite");
    }
    StateVec out = v_tilde;
    switch (mode) {
        case RectifyMode::sigmoid:
            for (double& v : out.values) {
                v -= sigmoid(k * v + b);
            }
            break;
        case RectifyMode::linearized:
            for (double& v : out.values) {
                v -= 0.25 * (k * v + b) + 0.5;
            }
            break;
        case RectifyMode::off:
            throw std::invalid_argument("rectify_velocity: mode must be sigmoid or linearized");
    }
    return out;
}

}  // namespace erta
