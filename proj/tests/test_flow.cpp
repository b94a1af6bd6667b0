#include <doctest.h>

#include <random>
#include <stdexcept>

#include "mvlab/flow.hpp"

using namespace mvlab;

namespace {

LatentGrid small_grid() {
    LatentGrid g;
    g.temporal_len = 2;
    g.height = 3;
    g.width = 2;
    g.channels = 4;
    return g;
}

}  // namespace

TEST_CASE("interpolation hits both endpoints exactly") {
    std::mt19937_64 rng(1);
    const LatentGrid g = small_grid();
    const LatentVideo x0 = gaussian_latent(g, rng);
    const LatentVideo eps = gaussian_latent(g, rng);

    const FlowState at0 = interpolate(x0, eps, 0.0);
    CHECK((at0.xt.data - x0.data).lpNorm<Eigen::Infinity>() == 0.0);
    const FlowState at1 = interpolate(x0, eps, 1.0);
    CHECK((at1.xt.data - eps.data).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((at1.ut.data - (eps.data - x0.data)).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("velocity is the exact time derivative of the path") {
    std::mt19937_64 rng(2);
    const LatentGrid g = small_grid();
    const LatentVideo x0 = gaussian_latent(g, rng);
    const LatentVideo eps = gaussian_latent(g, rng);
    const double h = 0.0625;  // exact in binary, so the quotient is exact too
    for (const double t : {0.25, 0.5, 0.8125}) {
        const FlowState mid = interpolate(x0, eps, t);
        const FlowState lo = interpolate(x0, eps, t - h);
        const FlowState hi = interpolate(x0, eps, t + h);
        const Eigen::VectorXd fd = (hi.xt.data - lo.xt.data) / (2.0 * h);
        CHECK((fd - mid.ut.data).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("interpolation rejects t outside the unit interval and shape mismatch") {
    std::mt19937_64 rng(3);
    const LatentVideo x0 = gaussian_latent(small_grid(), rng);
    const LatentVideo eps = gaussian_latent(small_grid(), rng);
    CHECK_THROWS_AS(interpolate(x0, eps, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(interpolate(x0, eps, 1.1), std::invalid_argument);

    LatentGrid other = small_grid();
    other.width = 3;
    CHECK_THROWS_AS(interpolate(x0, gaussian_latent(other, rng), 0.5), std::invalid_argument);
}

TEST_CASE("loss is the mean squared velocity error") {
    LatentGrid g;
    g.temporal_len = 1;
    g.height = 1;
    g.width = 2;
    g.channels = 1;
    LatentVideo x0(g), eps(g);
    x0.data << 1.0, -1.0;
    eps.data << 0.0, 3.0;
    const FlowState state = interpolate(x0, eps, 0.5);
    // ut = (-1, 4); pred = (0, 1) gives errors (1, -3), mean square 5.
    LatentVideo pred(g);
    pred.data << 0.0, 1.0;
    CHECK(rf_loss(pred, state) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(rf_loss(state.ut, state) == 0.0);
}

TEST_CASE("timesteps are logit-normal in the open unit interval") {
    SchedulerConfig cfg;
    std::mt19937_64 rng(7);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double t = sample_timestep(cfg, rng);
        REQUIRE(t > 0.0);
        REQUIRE(t < 1.0);
        sum += t;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));

    SchedulerConfig shifted = cfg;
    shifted.location = 2.0;
    std::mt19937_64 rng2(7);
    double shifted_sum = 0.0;
    for (int i = 0; i < n; ++i) shifted_sum += sample_timestep(shifted, rng2);
    CHECK(shifted_sum / n > 0.75);
}

TEST_CASE("timestep draws are reproducible per seed") {
    SchedulerConfig cfg;
    std::mt19937_64 a(123), b(123);
    for (int i = 0; i < 100; ++i) {
        CHECK(sample_timestep(cfg, a) == sample_timestep(cfg, b));
    }
}

TEST_CASE("scheduler config validation") {
    SchedulerConfig cfg;
    cfg.total_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SchedulerConfig{};
    cfg.scale = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("gaussian draws are seed-deterministic and roughly standard") {
    const LatentGrid g = small_grid();
    std::mt19937_64 a(9), b(9);
    const LatentVideo u = gaussian_latent(g, a);
    const LatentVideo v = gaussian_latent(g, b);
    CHECK((u.data - v.data).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(u.data.size() == 48);

    LatentGrid big = g;
    big.height = 32;
    big.width = 32;
    std::mt19937_64 c(10);
    const LatentVideo w = gaussian_latent(big, c);
    CHECK(std::abs(w.data.mean()) < 0.05);
    CHECK(w.data.squaredNorm() / w.data.size() == doctest::Approx(1.0).epsilon(0.05));
}
