#include "erta/cache.hpp"

#include <stdexcept>

namespace erta {

void ResidualCache::refresh(const StateVec& v, const StateVec& x, int step) {
    require_same_shape(v, x, "cache refresh");
    residual = sub(v, x);
    refresh_state_ = x;
    refresh_velocity_ = v;
    refreshed_at = step;
    valid = true;
}

StateVec ResidualCache::reuse(const StateVec& x) const {
    if (!valid) {
        throw std::runtime_error("residual cache: reuse before refresh");
    }
    require_same_shape(residual, x, "cache reuse");
    if (x.values == refresh_state_.values) {
        return refresh_velocity_;
    }
    StateVec v = x;
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        v.values[i] += residual.values[i];
    }
    return v;
}

}  // namespace erta
