#pragma once

#include "erta/latent.hpp"

namespace erta {

// Single-slot residual cache. Compute steps store r = v - x; reuse steps
// reconstruct the velocity as x + r without touching the field. One cache per
// in-flight trajectory, never shared.
struct ResidualCache {
    StateVec residual;
    int refreshed_at = -1;
    bool valid = false;

    void refresh(const StateVec& v, const StateVec& x, int step);

    // Returns x + r. Reconstruction at the exact refresh state returns the
    // recorded velocity bitwise (x + (v - x) is the identity on v there;
    // evaluating it in floats would not be). The cache is unchanged; reuse
    // before the first refresh is an error.
    StateVec reuse(const StateVec& x) const;

private:
    StateVec refresh_state_;
    StateVec refresh_velocity_;
};

}  // namespace erta
