#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace erta {

// Axis counts of the latent tensor (time, channel, height, width). States are
// kept flat; the shape only fixes the element count n = n_t*n_c*n_h*n_w.
struct LatentShape {
    int n_t = 1;
    int n_c = 1;
    int n_h = 1;
    int n_w = 1;

    std::size_t n() const {
        return static_cast<std::size_t>(n_t) * static_cast<std::size_t>(n_c) *
               static_cast<std::size_t>(n_h) * static_cast<std::size_t>(n_w);
    }

    bool operator==(const LatentShape&) const = default;
};

void validate_shape(const LatentShape& shape);

// Flat latent state vector.
struct StateVec {
    std::vector<double> values;
    LatentShape shape;

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

StateVec make_state(const LatentShape& shape, std::vector<double> values);

// Convenience for tests and 1-D experiments: shape (1, n, 1, 1).
StateVec flat_state(std::vector<double> values);

void require_same_shape(const StateVec& a, const StateVec& b, const char* what);

bool all_finite(std::span<const double> v);

double l1_norm(std::span<const double> v);
double l2_norm(std::span<const double> v);
double linf_norm(std::span<const double> v);

inline double l1_norm(const StateVec& v) { return l1_norm(std::span<const double>(v.values)); }
inline double l2_norm(const StateVec& v) { return l2_norm(std::span<const double>(v.values)); }
inline double linf_norm(const StateVec& v) { return linf_norm(std::span<const double>(v.values)); }

// a - b, elementwise.
StateVec sub(const StateVec& a, const StateVec& b);

double mean_squared_error(const StateVec& a, const StateVec& b);

}  // namespace erta
