#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "erta/schedule.hpp"

using namespace erta;

TEST_CASE("compute_phi") {
    SUBCASE("identical velocities give phi = 1") {
        const StateVec v = flat_state({1.0, -2.0});
        const PhiEntry e = compute_phi(v, v, flat_state({0.5, 0.5}));
        CHECK(e.phi == 1.0);
        CHECK(e.numerator == 0.0);
    }
    SUBCASE("num/den = 0.25 gives phi = 0.75") {
        // |vt - v|_1 = 0.5, |v - vn|_1 = 2.0
        const PhiEntry e =
            compute_phi(flat_state({1.5}), flat_state({1.0}), flat_state({3.0}));
        CHECK(e.phi == doctest::Approx(0.75).epsilon(1e-15));
    }
    SUBCASE("ratios above 1 clip to 0") {
        // |vt - v| = 3, |v - vn| = 1
        const PhiEntry e = compute_phi(flat_state({4.0}), flat_state({1.0}), flat_state({2.0}));
        CHECK(e.phi == 0.0);
    }
    SUBCASE("vanishing denominator forces max shrink unless the shift vanishes too") {
        const StateVec v = flat_state({1.0});
        CHECK(compute_phi(flat_state({1.5}), v, v).phi == 0.0);
        CHECK(compute_phi(v, v, v).phi == 1.0);
    }
}

TEST_CASE("build_schedule") {
    SUBCASE("empty set gives the exact uniform schedule") {
        for (int t_steps : {3, 4, 50}) {
            const auto s = build_schedule(t_steps, {}, {});
            for (double dt : s.delta_t) {
                CHECK(dt == 1.0 / static_cast<double>(t_steps));
            }
        }
    }
    SUBCASE("all phi = 1 stays uniform regardless of the cached set") {
        PhiRecord phi;
        for (int i = 1; i <= 40; ++i) {
            phi[i] = PhiEntry{1.0, 0.0, 1.0};
        }
        std::vector<int> steps;
        for (int i = 40; i >= 1; i -= 3) {
            steps.push_back(i);
        }
        const auto s = build_schedule(50, steps, phi);
        for (double dt : s.delta_t) {
            CHECK(dt == 1.0 / 50.0);
        }
    }
    SUBCASE("T=4, S={2}, phi=0.5 reproduces the renormalization by hand") {
        // step 3: 0.25; step 2: 0.125; remaining budget 0.625 over 2 steps.
        PhiRecord phi;
        phi[2] = PhiEntry{0.5, 0.0, 0.0};
        const auto s = build_schedule(4, {2}, phi);
        CHECK(s.delta_t[3] == 0.25);
        CHECK(s.delta_t[2] == 0.125);
        CHECK(s.delta_t[1] == 0.3125);
        CHECK(s.delta_t[0] == 0.3125);
        double sum = 0.0;
        for (double dt : s.delta_t) sum += dt;
        CHECK(sum == 1.0);
    }
    SUBCASE("budget is conserved for random sets and coefficients") {
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> phi_dist(0.0, 1.0);
        for (int t_steps : {4, 50, 100}) {
            for (int rep = 0; rep < 200; ++rep) {
                PhiRecord phi;
                std::vector<int> steps;
                for (int i = t_steps - 2; i >= 1; --i) {
                    if (rng() % 3 == 0) {
                        steps.push_back(i);
                        phi[i] = PhiEntry{phi_dist(rng), 0.0, 0.0};
                    }
                }
                const auto s = build_schedule(t_steps, steps, phi);
                double sum = 0.0;
                for (double dt : s.delta_t) {
                    CHECK(dt >= 0.0);
                    sum += dt;
                }
                CHECK(std::fabs(sum - 1.0) <= 1e-12);
            }
        }
    }
    SUBCASE("phi entries outside the cached set are ignored") {
        PhiRecord phi;
        phi[5] = PhiEntry{0.25, 0.0, 0.0};
        const auto base = build_schedule(10, {5}, phi);
        phi[7] = PhiEntry{0.01, 0.0, 0.0};  // not cached; must not matter
        phi[2] = PhiEntry{0.99, 0.0, 0.0};
        const auto same = build_schedule(10, {5}, phi);
        CHECK(base.delta_t == same.delta_t);
    }
    SUBCASE("a shrink strictly increases every later interval") {
        PhiRecord phi;
        phi[6] = PhiEntry{0.4, 0.0, 0.0};
        const auto s = build_schedule(8, {6}, phi);
        CHECK(s.delta_t[7] == 0.125);
        CHECK(s.delta_t[6] == doctest::Approx(0.05).epsilon(1e-15));
        for (int i = 5; i >= 0; --i) {
            CHECK(s.delta_t[static_cast<std::size_t>(i)] > 0.125);
        }
    }
    SUBCASE("rejects step 0 in the cached set and missing phi entries") {
        PhiRecord phi;
        phi[0] = PhiEntry{0.5, 0.0, 0.0};
        CHECK_THROWS_WITH_AS(build_schedule(4, {0}, phi), doctest::Contains("step 0"),
                             std::invalid_argument);
        CHECK_THROWS_WITH_AS(build_schedule(4, {2}, {}), doctest::Contains("no phi"),
                             std::invalid_argument);
        CHECK_THROWS_AS(build_schedule(4, {9}, phi), std::invalid_argument);
    }
}
