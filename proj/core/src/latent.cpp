#include "erta/latent.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace erta {

void validate_shape(const LatentShape& shape) {
    if (shape.n_t < 1 || shape.n_c < 1 || shape.n_h < 1 || shape.n_w < 1) {
        throw std::invalid_argument("latent shape: all axis counts must be >= 1, got (" +
                                    std::to_string(shape.n_t) + "," + std::to_string(shape.n_c) + "," +
                                    std::to_string(shape.n_h) + "," + std::to_string(shape.n_w) + ")");
    }
}

StateVec make_state(const LatentShape& shape, std::vector<double> values) {
    validate_shape(shape);
    if (values.size() != shape.n()) {
        throw std::invalid_argument("state length " + std::to_string(values.size()) +
                                    " does not match shape element count " + std::to_string(shape.n()));
    }
    return StateVec{std::move(values), shape};
}

StateVec flat_state(std::vector<double> values) {
    LatentShape shape{1, static_cast<int>(values.size()), 1, 1};
    return StateVec{std::move(values), shape};
}

void require_same_shape(const StateVec& a, const StateVec& b, const char* what) {
    if (a.values.size() != b.values.size() || !(a.shape == b.shape)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                    std::to_string(a.values.size()) + " vs " +
                                    std::to_string(b.values.size()) + " elements)");
    }
}

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

double l1_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += std::fabs(x);
    }
    return s;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double linf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::fabs(x));
    }
    return m;
}

StateVec sub(const StateVec& a, const StateVec& b) {
    require_same_shape(a, b, "sub");
    StateVec out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] -= b.values[i];
    }
    return out;
}

double mean_squared_error(const StateVec& a, const StateVec& b) {
    require_same_shape(a, b, "mean_squared_error");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return s / static_cast<double>(a.values.size());
}

}  // namespace erta
