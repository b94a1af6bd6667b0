#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mvlab/rope.hpp"

using namespace mvlab;

namespace {

Position random_position(std::mt19937_64& rng, int lo = -8, int hi = 40) {
    std::uniform_int_distribution<int> d(lo, hi);
    return Position{d(rng), d(rng), d(rng)};
}

Eigen::VectorXd random_vec(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

}  // namespace

TEST_CASE("axis split favors the temporal axis with even parts") {
    auto check = [](int dim, int t, int h, int w) {
        const AxisSplit s = default_axis_split(dim);
        CHECK(s.t == t);
        CHECK(s.h == h);
        CHECK(s.w == w);
        CHECK(s.head_dim() == dim);
    };
    check(6, 2, 2, 2);
    check(16, 8, 4, 4);
    check(48, 16, 16, 16);
    check(64, 24, 20, 20);
    CHECK_THROWS_AS(default_axis_split(5), std::invalid_argument);
    CHECK_THROWS_AS(default_axis_split(4), std::invalid_argument);
}

TEST_CASE("frequency ladders are geometric with ratio base^(-2/d)") {
    const FrequencyTable f = rope_frequencies(16);
    REQUIRE(f.t_freqs.size() == 4);
    REQUIRE(f.h_freqs.size() == 2);
    REQUIRE(f.w_freqs.size() == 2);
    CHECK(f.t_freqs[0] == doctest::Approx(1.0));
    for (std::size_t j = 0; j < f.t_freqs.size(); ++j) {
        CHECK(f.t_freqs[j] == doctest::Approx(std::pow(10000.0, -2.0 * j / 8.0)).epsilon(1e-12));
    }
    CHECK(f.h_freqs[1] == doctest::Approx(std::pow(10000.0, -2.0 / 4.0)).epsilon(1e-12));
}

TEST_CASE("rotation at the origin is the identity") {
    std::mt19937_64 rng(1);
    const FrequencyTable f = rope_frequencies(16);
    const Eigen::VectorXd v = random_vec(rng, 16);
    Eigen::VectorXd u = v;
    apply_rope(u, Position{0, 0, 0}, f);
    CHECK((u - v).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("rotation preserves the vector norm") {
    std::mt19937_64 rng(2);
    for (const int dim : {6, 16, 48, 64}) {
        const FrequencyTable f = rope_frequencies(dim);
        for (int trial = 0; trial < 40; ++trial) {
            const Eigen::VectorXd v = random_vec(rng, dim);
            Eigen::VectorXd u = v;
            apply_rope(u, random_position(rng), f);
            CHECK(u.norm() == doctest::Approx(v.norm()).epsilon(1e-12));
        }
    }
}

TEST_CASE("inverse rotation undoes forward rotation") {
    std::mt19937_64 rng(3);
    const FrequencyTable f = rope_frequencies(16);
    for (int trial = 0; trial < 40; ++trial) {
        const Eigen::VectorXd v = random_vec(rng, 16);
        const Position p = random_position(rng);
        Eigen::VectorXd u = v;
        apply_rope(u, p, f);
        apply_rope(u, p, f, RopeDirection::Inverse);
        CHECK((u - v).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("dot products depend only on relative position") {
    std::mt19937_64 rng(4);
    const FrequencyTable f = rope_frequencies(16);
    for (int trial = 0; trial < 40; ++trial) {
        const Eigen::VectorXd q = random_vec(rng, 16);
        const Eigen::VectorXd k = random_vec(rng, 16);
        const Position p = random_position(rng);
        const Position r = random_position(rng);
        const Position s = random_position(rng);

        Eigen::VectorXd q1 = q, k1 = k, q2 = q, k2 = k;
        apply_rope(q1, p, f);
        apply_rope(k1, r, f);
        apply_rope(q2, Position{p.t + s.t, p.h + s.h, p.w + s.w}, f);
        apply_rope(k2, Position{r.t + s.t, r.h + s.h, r.w + s.w}, f);
        CHECK(q1.dot(k1) == doctest::Approx(q2.dot(k2)).epsilon(1e-9));
    }
}

TEST_CASE("matrix application matches per-row application") {
    std::mt19937_64 rng(5);
    LatentGrid grid;
    grid.temporal_len = 2;
    grid.height = 2;
    grid.width = 2;
    grid.channels = 4;
    ReferenceShape refs;
    refs.views_per_subject = {2};
    const TokenLayout layout = build_ts_layout(grid, refs, 3);
    const FrequencyTable f = rope_frequencies(16);

    Eigen::MatrixXd m(layout.size(), 16);
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) = random_vec(rng, 16).transpose();
    Eigen::MatrixXd batched = m;
    apply_rope(batched, layout, f);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::VectorXd row = m.row(i).transpose();
        apply_rope(row, layout.positions[i], f);
        CHECK((batched.row(i).transpose() - row).lpNorm<Eigen::Infinity>() < 1e-15);
    }
}

TEST_CASE("mismatched head dim is rejected") {
    const FrequencyTable f = rope_frequencies(16);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(12);
    CHECK_THROWS_AS(apply_rope(v, Position{1, 1, 1}, f), std::invalid_argument);
}
