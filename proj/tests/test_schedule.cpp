#include <doctest.h>

#include <cmath>

#include "rng.hpp"
#include "schedule.hpp"

using namespace dode;

TEST_SUITE_BEGIN("schedule");

TEST_CASE("ve alpha_sigma is the identity pair") {
    NoiseSchedule s = NoiseSchedule::ve_karras();
    auto [a, sg] = s.alpha_sigma(0.5);
    CHECK(a == 1.0);
    CHECK(sg == 0.5);
}

TEST_CASE("vp limits at t_epsilon") {
    NoiseSchedule s = NoiseSchedule::vp_linear(0.1, 20.0, 1e-3);
    auto [a, sg] = s.alpha_sigma(1e-3);
    CHECK(std::abs(1.0 - a) < 1e-2);
    CHECK(sg > 0.0);
    // exact closed-form value at the cutoff (sigma(1e-3) is just above 1e-2)
    double log_alpha = -0.25 * 1e-6 * 19.9 - 0.5 * 1e-3 * 0.1;
    CHECK(sg == doctest::Approx(std::sqrt(-std::expm1(2.0 * log_alpha))).epsilon(1e-13));
    // the zero-noise limit itself, probed at a smaller cutoff
    NoiseSchedule tight = NoiseSchedule::vp_linear(0.1, 20.0, 1e-4);
    CHECK(tight.sigma(1e-4) < 1e-2);
}

TEST_CASE("vp closed form at t = 1") {
    NoiseSchedule s = NoiseSchedule::vp_linear(0.1, 20.0, 1e-3);
    auto [a, sg] = s.alpha_sigma(1.0);
    CHECK(a == doctest::Approx(std::exp(-0.25 * 19.9 - 0.05)).epsilon(1e-14));
    CHECK(a * a + sg * sg == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vp alpha^2 + sigma^2 = 1 across the whole grid") {
    NoiseSchedule s = NoiseSchedule::vp_linear();
    TimeGrid g = make_grid(s, 500, GridSpacing::uniform_t);
    for (double t : g.points) {
        auto [a, sg] = s.alpha_sigma(t);
        CHECK(std::abs(a * a + sg * sg - 1.0) < 1e-12);
    }
}

TEST_CASE("log-SNR basics and round trip") {
    NoiseSchedule ve = NoiseSchedule::ve_karras();
    CHECK(ve.log_snr(1.0) == doctest::Approx(0.0).epsilon(1e-15));

    Rng rng(11);
    for (const NoiseSchedule& s : {NoiseSchedule::vp_linear(), NoiseSchedule::ve_karras()}) {
        for (int i = 0; i < 100; ++i) {
            double t = s.t_min() + rng.uniform() * (s.t_max() - s.t_min());
            CHECK(std::abs(s.inv_log_snr(s.log_snr(t)) - t) < 1e-9);
        }
    }
}

TEST_CASE("vp log-SNR strictly decreasing on a 1000-point sweep") {
    NoiseSchedule s = NoiseSchedule::vp_linear();
    TimeGrid g = make_grid(s, 999, GridSpacing::uniform_t);
    // grid points run from t_max down to t_min, so tau must increase along them
    for (size_t i = 0; i + 1 < g.points.size(); ++i)
        CHECK(s.log_snr(g.points[i]) < s.log_snr(g.points[i + 1]));
}

TEST_CASE("snr strictly decreasing in t") {
    for (const NoiseSchedule& s : {NoiseSchedule::vp_linear(), NoiseSchedule::ve_karras()}) {
        TimeGrid g = make_grid(s, 200, GridSpacing::uniform_t);
        for (size_t i = 0; i + 1 < g.points.size(); ++i) {
            auto [a1, s1] = s.alpha_sigma(g.points[i + 1]);  // smaller t
            auto [a0, s0] = s.alpha_sigma(g.points[i]);
            CHECK(a1 * a1 / (s1 * s1) > a0 * a0 / (s0 * s0));
        }
    }
}

TEST_CASE("uniform grid: equal spacing and degenerate n = 1") {
    NoiseSchedule s = NoiseSchedule::vp_linear(0.1, 20.0, 1e-3);
    TimeGrid g = make_grid(s, 4, GridSpacing::uniform_t);
    REQUIRE(g.points.size() == 5);
    double h = g.points[0] - g.points[1];
    for (size_t i = 0; i + 1 < g.points.size(); ++i)
        CHECK(g.points[i] - g.points[i + 1] == doctest::Approx(h).epsilon(1e-12));
    CHECK(g.points.front() == 1.0);
    CHECK(g.points.back() == 1e-3);

    TimeGrid g1 = make_grid(s, 1, GridSpacing::uniform_t);
    REQUIRE(g1.points.size() == 2);
    CHECK(g1.points[0] == 1.0);
    CHECK(g1.points[1] == 1e-3);
}

TEST_CASE("karras grid endpoints") {
    NoiseSchedule s = NoiseSchedule::ve_karras(0.002, 80.0, 7.0);
    TimeGrid g = make_grid(s, 18, GridSpacing::karras_rho);
    CHECK(g.points.front() == doctest::Approx(80.0).epsilon(1e-12));
    CHECK(g.points.back() == doctest::Approx(0.002).epsilon(1e-12));
    for (size_t i = 0; i + 1 < g.points.size(); ++i) CHECK(g.points[i] > g.points[i + 1]);
}

TEST_CASE("grid refinement nesting") {
    for (auto spacing : {GridSpacing::uniform_t, GridSpacing::karras_rho}) {
        NoiseSchedule s = spacing == GridSpacing::karras_rho ? NoiseSchedule::ve_karras()
                                                             : NoiseSchedule::vp_linear();
        TimeGrid coarse = make_grid(s, 10, spacing);
        TimeGrid fine = make_grid(s, 100, spacing);
        for (size_t i = 0; i < coarse.points.size(); ++i)
            CHECK(std::abs(coarse.points[i] - fine.points[10 * i]) < 1e-12);
    }
}

TEST_CASE("error paths") {
    NoiseSchedule vp = NoiseSchedule::vp_linear();
    CHECK_THROWS_AS(vp.alpha(2.0), Error);
    CHECK_THROWS_AS(vp.alpha(0.0), Error);
    CHECK_THROWS_AS(vp.inv_log_snr(1e9), Error);
    CHECK_THROWS_AS(make_grid(vp, 0, GridSpacing::uniform_t), Error);
    CHECK_THROWS_AS(make_grid(vp, 10, GridSpacing::karras_rho), Error);
    CHECK_THROWS_AS(NoiseSchedule::vp_linear(-1.0, 20.0, 1e-3), Error);
    CHECK_THROWS_AS(NoiseSchedule::ve_karras(0.0, 80.0, 7.0), Error);
}

TEST_SUITE_END();
