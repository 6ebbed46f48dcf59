#include "erta/field.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace erta {

std::string_view field_kind_name(FieldKind kind) {
    switch (kind) {
        case FieldKind::affine: return "affine";
        case FieldKind::affine_plus_identity: return "affine-plus-identity";
        case FieldKind::gaussian_mixture: return "gaussian-mixture";
        case FieldKind::scripted: return "scripted";
    }
    return "unknown";
}

FieldKind field_kind_from_name(std::string_view name) {
    if (name == "affine") return FieldKind::affine;
    if (name == "affine-plus-identity") return FieldKind::affine_plus_identity;
    if (name == "gaussian-mixture") return FieldKind::gaussian_mixture;
    if (name == "scripted") return FieldKind::scripted;
    throw std::invalid_argument("unknown field kind '" + std::string(name) + "'");
}

void validate_field(const FieldSpec& field) {
    if (field.dimension < 1) {
        throw std::invalid_argument("field dimension must be >= 1");
    }
    if (field.eval_delay_ms < 0.0) {
        throw std::invalid_argument("field eval delay must be nonnegative");
    }
    const std::size_t n = static_cast<std::size_t>(field.dimension);
    switch (field.kind) {
        case FieldKind::affine: {
            if (field.affine.a0.size() != n * n || field.affine.a1.size() != n * n ||
                field.affine.b0.size() != n || field.affine.b1.size() != n) {
                throw std::invalid_argument("affine field: parameter sizes do not match dimension " +
                                            std::to_string(n));
            }
            break;
        }
        case FieldKind::affine_plus_identity: {
            if (field.shift.shift.size() != n) {
                throw std::invalid_argument("affine-plus-identity field: shift length must equal dimension");
            }
            break;
        }
        case FieldKind::gaussian_mixture: {
            if (field.mixture.components.empty()) {
                throw std::invalid_argument("gaussian-mixture field: at least one component required");
            }
            double wsum = 0.0;
            for (const auto& c : field.mixture.components) {
                if (c.weight <= 0.0) {
                    throw std::invalid_argument("gaussian-mixture field: component weights must be positive");
                }
                if (c.sigma <= 0.0) {
                    throw std::invalid_argument("gaussian-mixture field: component sigma must be > 0");
                }
                if (c.mean.size() != n) {
                    throw std::invalid_argument("gaussian-mixture field: component mean length must equal dimension");
                }
                wsum += c.weight;
            }
            if (std::fabs(wsum - 1.0) > 1e-9) {
                throw std::invalid_argument("gaussian-mixture field: component weights must sum to 1, got " +
                                            std::to_string(wsum));
            }
            break;
        }
        case FieldKind::scripted: {
            if (field.scripted.rows.empty()) {
                throw std::invalid_argument("scripted field: velocity table is empty");
            }
            for (const auto& row : field.scripted.rows) {
                if (row.size() != n) {
                    throw std::invalid_argument("scripted field: every table row must have length " +
                                                std::to_string(n));
                }
            }
            break;
        }
    }
}

FieldSpec make_shift_field(std::vector<double> shift) {
    FieldSpec f;
    f.kind = FieldKind::affine_plus_identity;
    f.dimension = static_cast<int>(shift.size());
    f.shift.shift = std::move(shift);
    validate_field(f);
    return f;
}

FieldSpec make_affine_field(int n, std::vector<double> a0, std::vector<double> a1,
                            std::vector<double> b0, std::vector<double> b1) {
    FieldSpec f;
    f.kind = FieldKind::affine;
    f.dimension = n;
    f.affine = AffineParams{std::move(a0), std::move(a1), std::move(b0), std::move(b1)};
    validate_field(f);
    return f;
}

FieldSpec make_mixture_field(int n, std::vector<MixtureComponent> components) {
    FieldSpec f;
    f.kind = FieldKind::gaussian_mixture;
    f.dimension = n;
    f.mixture.components = std::move(components);
    validate_field(f);
    return f;
}

FieldSpec make_scripted_field(int n, std::vector<std::vector<double>> rows) {
    FieldSpec f;
    f.kind = FieldKind::scripted;
    f.dimension = n;
    f.scripted.rows = std::move(rows);
    validate_field(f);
    return f;
}

namespace {

void apply_eval_delay(double delay_ms) {
    if (delay_ms <= 0.0) {
        return;
    }
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
}

std::vector<double> affine_velocity(const FieldSpec& field, const StateVec& x, double tau) {
    const std::size_t n = x.values.size();
    const auto& p = field.affine;
    std::vector<double> v(n, 0.0);
    const double w0 = 1.0 - tau;
    const double w1 = tau;
    for (std::size_t r = 0; r < n; ++r) {
        double acc = w0 * p.b0[r] + w1 * p.b1[r];
        const double* row0 = p.a0.data() + r * n;
        const double* row1 = p.a1.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) {
            acc += (w0 * row0[c] + w1 * row1[c]) * x.values[c];
        }
        v[r] = acc;
    }
    return v;
}

// Per-component interpolation-path statistics at forward time t:
// mean m_k(t) = (1-t) mu_k, scale s_k(t)^2 = (1-t)^2 sigma_k^2 + t^2.
struct ComponentPath {
    double s2;      // s_k(t)^2
    double ds2_dt;  // d/dt of s_k(t)^2
};

ComponentPath component_path(const MixtureComponent& c, double t) {
    const double omt = 1.0 - t;
    ComponentPath p;
    p.s2 = omt * omt * c.sigma * c.sigma + t * t;
    p.ds2_dt = 2.0 * (t - omt * c.sigma * c.sigma);
    return p;
}

std::vector<double> mixture_forward_velocity(const FieldSpec& field, const StateVec& x, double t) {
    const std::size_t n = x.values.size();
    const auto& comps = field.mixture.components;
    const std::vector<double> w = mixture_responsibilities(field, x, t);

    std::vector<double> u(n, 0.0);
    const double omt = 1.0 - t;
    for (std::size_t k = 0; k < comps.size(); ++k) {
        if (w[k] == 0.0) {
            continue;
        }
        const ComponentPath p = component_path(comps[k], t);
        // u_k = (s'/s)(x - m_k) + m_k' with m_k(t) = (1-t) mu_k, m_k' = -mu_k
        const double rate = 0.5 * p.ds2_dt / p.s2;  // s'/s
        for (std::size_t i = 0; i < n; ++i) {
            const double mu = comps[k].mean[i];
            const double uk = rate * (x.values[i] - omt * mu) - mu;
            u[i] += w[k] * uk;
        }
    }
    return u;
}

std::size_t scripted_row_index(const FieldSpec& field, double tau) {
    const std::size_t rows = field.scripted.rows.size();
    // Piecewise-constant over a uniform grid of `rows` cells on [0,1); the
    // nudge keeps fp-exact cell boundaries in the cell they open.
    double pos = tau * static_cast<double>(rows) + 1e-9;
    if (pos < 0.0) {
        pos = 0.0;
    }
    auto idx = static_cast<std::size_t>(pos);
    return std::min(idx, rows - 1);
}

}  // namespace

StateVec eval_velocity(const FieldSpec& field, const StateVec& x, double tau, EvalCounter& counter) {
    if (x.values.size() != static_cast<std::size_t>(field.dimension)) {
        throw std::invalid_argument("eval_velocity: state length " + std::to_string(x.values.size()) +
                                    " does not match field dimension " + std::to_string(field.dimension));
    }
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("eval_velocity: tau must lie in [0,1], got " + std::to_string(tau));
    }
    if (!all_finite(x.values)) {
        throw std::invalid_argument("eval_velocity: non-finite state");
    }
    apply_eval_delay(field.eval_delay_ms);

    std::vector<double> v;
    switch (field.kind) {
        case FieldKind::affine:
            v = affine_velocity(field, x, tau);
            break;
        case FieldKind::affine_plus_identity: {
            v.resize(x.values.size());
            for (std::size_t i = 0; i < v.size(); ++i) {
                v[i] = x.values[i] + field.shift.shift[i];
            }
            break;
        }
        case FieldKind::gaussian_mixture: {
            // Denoising direction: negate the forward velocity at t = 1 - tau.
            v = mixture_forward_velocity(field, x, 1.0 - tau);
            for (double& vi : v) {
                vi = -vi;
            }
            break;
        }
        case FieldKind::scripted:
            v = field.scripted.rows[scripted_row_index(field, tau)];
            break;
    }

    counter.count += 1;
    if (!all_finite(v)) {
        throw std::runtime_error("eval_velocity: non-finite velocity from " +
                                 std::string(field_kind_name(field.kind)) + " field at tau=" +
                                 std::to_string(tau));
    }
    return StateVec{std::move(v), x.shape};
}

std::vector<double> mixture_responsibilities(const FieldSpec& field, const StateVec& x, double t) {
    if (field.kind != FieldKind::gaussian_mixture) {
        throw std::invalid_argument("mixture_responsibilities: field kind is " +
                                    std::string(field_kind_name(field.kind)));
    }
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("mixture_responsibilities: t must lie in [0,1]");
    }
    const auto& comps = field.mixture.components;
    const std::size_t n = x.values.size();
    const double omt = 1.0 - t;

    std::vector<double> logw(comps.size());
    std::vector<double> scaled_dist(comps.size());
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const ComponentPath p = component_path(comps[k], t);
        double d2 = 0.0;
        double dmax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x.values[i] - omt * comps[k].mean[i];
            d2 += d * d;
            dmax = std::max(dmax, std::fabs(d));
        }
        // Overflow-safe scaled distance for the underflow fallback.
        if (dmax == 0.0) {
            scaled_dist[k] = 0.0;
        } else {
            double scaled = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = (x.values[i] - omt * comps[k].mean[i]) / dmax;
                scaled += d * d;
            }
            scaled_dist[k] = dmax * std::sqrt(scaled) / std::sqrt(p.s2);
        }
        logw[k] = std::log(comps[k].weight) - 0.5 * static_cast<double>(n) * std::log(p.s2) -
                  0.5 * d2 / p.s2;
    }

    const double lmax = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(comps.size(), 0.0);
    if (!std::isfinite(lmax)) {
        // Every component likelihood underflowed; collapse onto the nearest
        // component in scaled Mahalanobis distance, lower index on ties.
        std::size_t best = 0;
        for (std::size_t k = 1; k < comps.size(); ++k) {
            if (scaled_dist[k] < scaled_dist[best]) {
                best = k;
            }
        }
        w[best] = 1.0;
        return w;
    }

    double sum = 0.0;
    for (std::size_t k = 0; k < comps.size(); ++k) {
        w[k] = std::exp(logw[k] - lmax);
        sum += w[k];
    }
    for (double& wk : w) {
        wk /= sum;
    }
    return w;
}

StateVec reference_endpoint(const FieldSpec& field, const StateVec& x_start, long t_ref_steps,
                            double divergence_norm_bound) {
    if (t_ref_steps < 1000) {
        throw std::invalid_argument("reference_endpoint: t_ref_steps must be >= 1000, got " +
                                    std::to_string(t_ref_steps));
    }
    EvalCounter scratch;
    StateVec x = x_start;
    const double dt = 1.0 / static_cast<double>(t_ref_steps);
    for (long j = 0; j < t_ref_steps; ++j) {
        const double tau = static_cast<double>(j) * dt;
        const StateVec v = eval_velocity(field, x, tau, scratch);
        for (std::size_t i = 0; i < x.values.size(); ++i) {
            x.values[i] += dt * v.values[i];
        }
        if (l2_norm(x) > divergence_norm_bound) {
            throw std::runtime_error("reference_endpoint: trajectory diverged at fine-grid step " +
                                     std::to_string(j) + " of " + std::to_string(t_ref_steps) +
                                     " (norm bound " + std::to_string(divergence_norm_bound) + ")");
        }
    }
    return x;
}

StateVec sample_noise(std::uint64_t seed, const LatentShape& shape) {
    validate_shape(shape);
    const std::size_t n = shape.n();
    std::mt19937_64 rng(seed);
    auto next_unit = [&rng]() {
        // (0,1]: top 53 bits, shifted away from zero so log() stays finite.
        return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    };
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; i += 2) {
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        values[i] = r * std::cos(a);
        if (i + 1 < n) {
            values[i + 1] = r * std::sin(a);
        }
    }
    return StateVec{std::move(values), shape};
}

std::vector<std::vector<double>> load_scripted_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open scripted table '" + path + "'");
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(cell, &pos));
            } catch (const std::exception&) {
                throw std::runtime_error("scripted table '" + path + "' line " + std::to_string(lineno) +
                                         ": cannot parse '" + cell + "' as a real");
            }
        }
        if (!row.empty()) {
            rows.push_back(std::move(row));
        }
    }
    if (rows.empty()) {
        throw std::runtime_error("scripted table '" + path + "' contains no rows");
    }
    return rows;
}

}  // namespace erta
