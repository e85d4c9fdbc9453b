#include <doctest.h>

#include <cmath>

#include "analysis.hpp"
#include "bench.hpp"
#include "distill.hpp"
#include "solvers.hpp"

using namespace dode;

namespace {

Trajectory synthetic_trajectory(const std::vector<Batch>& outputs) {
    Trajectory t;
    t.recorded = true;
    t.times.resize(outputs.size() + 1);
    for (size_t i = 0; i < t.times.size(); ++i) t.times[i] = 1.0 - double(i) * 0.1;
    for (size_t i = 0; i <= outputs.size(); ++i) t.states.push_back(Batch(outputs[0].batch, outputs[0].dim));
    for (const Batch& o : outputs) {
        StepRecord rec;
        rec.output = o;
        t.steps.push_back(rec);
    }
    return t;
}

}  // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("cosine matrix structure") {
    Rng rng(3);
    Batch d = rng.normal_batch(8, 3, 1.0);
    Trajectory t = synthetic_trajectory({d, d, d});
    CosineMatrix m = cosine_similarity_matrix(t);
    REQUIRE(m.n == 3);
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 3; ++j) {
            CHECK(m.at(i, j) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(m.at(i, j) == m.at(j, i));
            CHECK(m.at(i, j) <= 1.0 + 1e-12);
            CHECK(m.at(i, j) >= -1.0 - 1e-12);
        }
    CHECK(!m.zero_norm_flag);
}

TEST_CASE("cosine matrix flags zero-norm outputs") {
    Rng rng(5);
    Batch d = rng.normal_batch(2, 2, 1.0);
    Batch zero(2, 2);
    CosineMatrix m = cosine_similarity_matrix(synthetic_trajectory({d, zero}));
    CHECK(m.zero_norm_flag);
    CHECK(m.at(0, 1) == 0.0);
    CHECK(m.at(1, 1) == 0.0);
}

TEST_CASE("adjacent cosine similarity is high on a dense gmm run") {
    // batch large enough that a sample crossing a near-zero output (whose 2-d
    // direction can flip) cannot drag the batch-mean cosine below threshold
    NoiseSchedule s = NoiseSchedule::vp_linear();
    DenoiserOracle o = bench::gmm8();
    TimeGrid g = make_grid(s, 1000, GridSpacing::uniform_t);
    Batch x0 = sample_initial_noise(s, 256, 2, bench::kSeed);
    RunOptions opts;
    opts.record = true;
    Trajectory traj = run_sampler(SolverKind::ddim_noise, o, s, g, x0, opts);
    CosineMatrix m = cosine_similarity_matrix(traj);
    for (size_t i = 0; i + 1 < m.n; ++i) CHECK(m.at(i, i + 1) > 0.95);
}

TEST_CASE("norm trace: zeros and the chi-distribution mean") {
    Batch zero(4, 2);
    Trajectory t;
    t.recorded = true;
    t.times = {1.0, 0.5};
    t.states = {zero, zero};
    for (double v : norm_trace(t)) CHECK(v == 0.0);

    NoiseSchedule ve = NoiseSchedule::ve_karras();
    Batch x0 = sample_initial_noise(ve, 1000, 16, 123);
    Trajectory t2;
    t2.recorded = true;
    t2.times = {ve.t_max()};
    t2.states = {x0};
    double expected = ve.sigma_max() * std::sqrt(16.0);
    CHECK(std::abs(norm_trace(t2)[0] - expected) < 0.05 * expected);
}

TEST_CASE("coordinate trace basics") {
    Batch a(2, 3);
    a.data = {1, 2, 3, 4, 5, 6};
    Trajectory t;
    t.recorded = true;
    t.times = {1.0, 0.5};
    t.states = {a, a};
    auto trace = coordinate_trace(t, 1, 0, 2);
    REQUIRE(trace.size() == 2);
    CHECK(trace[0][0] == 4.0);
    CHECK(trace[0][1] == 6.0);
    CHECK(trace[1][0] == 4.0);
    CHECK_THROWS_AS(coordinate_trace(t, 5, 0, 1), Error);
    CHECK_THROWS_AS(coordinate_trace(t, 0, 0, 7), Error);
}

TEST_CASE("1-d wasserstein: exact values and the unequal-size quantile form") {
    CHECK(wasserstein_1d({0.0}, {1.0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(wasserstein_1d({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(0.0).epsilon(1e-15));

    // {0} vs {-1, 1}: quantile difference is 1 on each half
    CHECK(wasserstein_1d({0.0}, {-1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-12));

    // Monte-Carlo quantile integral as an independent oracle
    std::vector<double> a = {0.1, -0.4, 2.0, 0.7};
    std::vector<double> b = {-1.0, 0.3, 0.5};
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double acc = 0.0;
    int n = 200000;
    for (int k = 0; k < n; ++k) {
        double u = (k + 0.5) / n;
        double qa = sa[std::min(size_t(u * sa.size()), sa.size() - 1)];
        double qb = sb[std::min(size_t(u * sb.size()), sb.size() - 1)];
        acc += (qa - qb) * (qa - qb);
    }
    CHECK(wasserstein_1d(a, b) == doctest::Approx(std::sqrt(acc / n)).epsilon(1e-4));
}

TEST_CASE("sliced wasserstein: identity, translation, pseudometric") {
    Rng rng(8);
    Batch a = rng.normal_batch(200, 3, 1.0);
    CHECK(sliced_wasserstein(a, a, 64, 5) == doctest::Approx(0.0).epsilon(1e-14));

    Batch one(1, 1), zero(1, 1);
    one.data = {1.0};
    CHECK(sliced_wasserstein(zero, one, 16, 5) == doctest::Approx(1.0).epsilon(1e-12));

    // 1-d standard normal vs shift by 1: W2 = 1
    Rng rng2(17);
    Batch n0 = rng2.normal_batch(10000, 1, 1.0);
    Batch n1 = n0;
    for (double& v : n1.data) v += 1.0;
    Batch m0 = rng.normal_batch(10000, 1, 1.0);
    CHECK(std::abs(sliced_wasserstein(m0, n1, 8, 5) - 1.0) < 0.05);

    Batch b = rng.normal_batch(150, 3, 1.3);
    Batch c = rng.normal_batch(120, 3, 0.7);
    double ab = sliced_wasserstein(a, b, 64, 5);
    double ba = sliced_wasserstein(b, a, 64, 5);
    CHECK(std::abs(ab - ba) < 1e-12);
    double ac = sliced_wasserstein(a, c, 64, 5);
    double bc = sliced_wasserstein(b, c, 64, 5);
    CHECK(ac <= ab + bc + 1e-6);

    Batch empty;
    CHECK_THROWS_AS(sliced_wasserstein(empty, a, 8, 5), Error);
    CHECK_THROWS_AS(sliced_wasserstein(a, a, 0, 5), Error);
}

TEST_CASE("convergence order slope") {
    CHECK(convergence_order({{10, 0.1}, {20, 0.025}}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(convergence_order({{10, 0.1}}), Error);
    CHECK_THROWS_AS(convergence_order({{10, 0.1}, {20, -1.0}}), Error);
}

TEST_CASE("distilled endpoints land closer to the dense reference per sample") {
    NoiseSchedule s = NoiseSchedule::vp_linear();
    DenoiserOracle o = bench::gmm8();
    DistillConfig cfg;
    cfg.teacher = cfg.student = SolverKind::ddim_noise;
    cfg.scale_c = 10;
    cfg.student_steps = 10;
    cfg.batch = 128;
    cfg.seed = bench::kSeed;
    cfg.dim = 2;
    auto [ls, report] = distill(cfg, o, s);

    Batch x0 = sample_initial_noise(s, 128, 2, bench::kSeed + 50);  // held out
    TimeGrid dense = make_grid(s, 1000, GridSpacing::uniform_t);
    Batch ref = run_sampler(SolverKind::ddim_noise, o, s, dense, x0).final_state();
    TimeGrid coarse = make_grid(s, 10, GridSpacing::uniform_t);
    Batch base = run_sampler(SolverKind::ddim_noise, o, s, coarse, x0).final_state();
    RunOptions dopt;
    dopt.lambdas = &ls;
    Batch fitted = run_sampler(SolverKind::ddim_noise, o, s, coarse, x0, dopt).final_state();

    size_t closer = 0;
    for (size_t b = 0; b < 128; ++b) {
        double df = 0, db = 0;
        for (size_t j = 0; j < 2; ++j) {
            df += (fitted.at(b, j) - ref.at(b, j)) * (fitted.at(b, j) - ref.at(b, j));
            db += (base.at(b, j) - ref.at(b, j)) * (base.at(b, j) - ref.at(b, j));
        }
        if (df < db) ++closer;
    }
    CHECK(closer >= size_t(0.6 * 128));
}

TEST_CASE("norm trace of a distilled run hugs the dense reference") {
    NoiseSchedule s = NoiseSchedule::vp_linear();
    DenoiserOracle o = bench::gmm8();
    RunOptions rec;
    rec.record = true;

    DistillConfig cfg;
    cfg.teacher = cfg.student = SolverKind::ddim_noise;
    cfg.scale_c = 10;
    cfg.student_steps = 10;
    cfg.batch = 128;
    cfg.seed = bench::kSeed;
    cfg.dim = 2;
    auto [ls, report] = distill(cfg, o, s);

    Batch x0 = sample_initial_noise(s, 128, 2, bench::kSeed);
    TimeGrid dense = make_grid(s, 1000, GridSpacing::uniform_t);
    Trajectory ref = run_sampler(SolverKind::ddim_noise, o, s, dense, x0, rec);
    std::vector<double> ref_trace = norm_trace(ref);

    TimeGrid coarse = make_grid(s, 10, GridSpacing::uniform_t);
    RunOptions drec = rec;
    drec.lambdas = &ls;
    Trajectory fitted = run_sampler(SolverKind::ddim_noise, o, s, coarse, x0, drec);
    std::vector<double> trace = norm_trace(fitted);
    for (size_t i = 0; i < trace.size(); ++i) {
        double r = ref_trace[100 * i];
        CHECK(std::abs(trace[i] - r) < 0.10 * r);
    }
}

TEST_SUITE_END();
