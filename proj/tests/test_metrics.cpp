#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mvlab/metrics.hpp"
#include "test_util.hpp"

using namespace mvlab;
using namespace mvlab::testutil;

namespace {

ViewSet random_views(std::mt19937_64& rng, int count, int size = 6) {
    ViewSet vs;
    for (int i = 0; i < count; ++i) vs.images.push_back(random_image(rng, size, size, 3));
    return vs;
}

ViewSet permuted(const ViewSet& vs, std::mt19937_64& rng) {
    std::vector<std::size_t> order(vs.images.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    ViewSet out;
    for (std::size_t i : order) out.images.push_back(vs.images[i]);
    return out;
}

/// Embeds a 2-vector into the first coordinates of the backend output.
EmbeddingBackend planted_embedding(std::vector<Eigen::Vector2d> gen_vecs,
                                   std::vector<Eigen::Vector2d> ref_vecs) {
    // Views are told apart by their first pixel: gen sets use >= 0.5.
    return [gen_vecs, ref_vecs](const Image& img) {
        const bool is_gen = img.pixels[0] >= 0.5;
        const int idx = static_cast<int>(std::lround(img.pixels[1] * 8.0));
        const Eigen::Vector2d v = is_gen ? gen_vecs.at(idx) : ref_vecs.at(idx);
        return Eigen::VectorXd(v.normalized());
    };
}

ViewSet marker_views(bool gen, int count) {
    ViewSet vs;
    for (int i = 0; i < count; ++i) {
        Image img = Image::filled(2, 2, 1, 0.0);
        img.pixels[0] = gen ? 1.0 : 0.0;
        img.pixels[1] = i / 8.0;
        vs.images.push_back(img);
    }
    return vs;
}

}  // namespace

TEST_CASE("similarity matrix matches a hand-computed example") {
    // Gen embeddings: e0=(1,0), e1=(0.7071,0.7071); ref embedding: (1,0).
    const EmbeddingBackend emb = planted_embedding(
        {{1.0, 0.0}, {std::sqrt(0.5), std::sqrt(0.5)}}, {{1.0, 0.0}});
    const ViewSet gen = marker_views(true, 2);
    const ViewSet ref = marker_views(false, 1);
    const Eigen::MatrixXd m = similarity_matrix(gen, ref, emb);
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 1);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(1, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    // v2r averages the row maxima: (1 + 0.7071) / 2.
    CHECK(directional_similarity(m, Direction::GenToRef) ==
          doctest::Approx(0.5 + 0.5 * std::sqrt(0.5)).epsilon(1e-12));
    // r2v takes the single column max.
    CHECK(directional_similarity(m, Direction::RefToGen) == 1.0);
}

TEST_CASE("identical view sets score perfect similarity and zero pair score") {
    std::mt19937_64 rng(1);
    const ViewSet views = random_views(rng, 3);
    const MetricBackends b = toy_backends();
    for (const auto& [name, emb] : b.embeddings) {
        CAPTURE(name);
        const Eigen::MatrixXd m = similarity_matrix(views, views, emb);
        for (Eigen::Index i = 0; i < m.rows(); ++i) CHECK(m(i, i) == 1.0);
        CHECK(directional_similarity(m, Direction::GenToRef) == 1.0);
        CHECK(directional_similarity(m, Direction::RefToGen) == 1.0);
    }
    CHECK(directional_pair_score(views, views, b.pair_score, Direction::GenToRef) == 0.0);
    CHECK(directional_pair_score(views, views, b.pair_score, Direction::RefToGen) == 0.0);
}

TEST_CASE("directional scores are invariant under view permutation") {
    std::mt19937_64 rng(2);
    const MetricBackends b = toy_backends();
    for (int trial = 0; trial < 30; ++trial) {
        const ViewSet gen = random_views(rng, 3 + trial % 3);
        const ViewSet ref = random_views(rng, 2 + trial % 4);
        const ViewSet gen_p = permuted(gen, rng);
        const ViewSet ref_p = permuted(ref, rng);
        for (const auto& [name, emb] : b.embeddings) {
            CAPTURE(name);
            const Eigen::MatrixXd m1 = similarity_matrix(gen, ref, emb);
            const Eigen::MatrixXd m2 = similarity_matrix(gen_p, ref_p, emb);
            for (const Direction d : {Direction::GenToRef, Direction::RefToGen}) {
                CHECK(directional_similarity(m1, d) == directional_similarity(m2, d));
            }
        }
        for (const Direction d : {Direction::GenToRef, Direction::RefToGen}) {
            CHECK(directional_pair_score(gen, ref, b.pair_score, d) ==
                  directional_pair_score(gen_p, ref_p, b.pair_score, d));
        }
    }
}

TEST_CASE("swapping roles swaps the two directions exactly") {
    std::mt19937_64 rng(3);
    const MetricBackends b = toy_backends();
    for (int trial = 0; trial < 30; ++trial) {
        const ViewSet gen = random_views(rng, 2 + trial % 3);
        const ViewSet ref = random_views(rng, 3 + trial % 2);
        for (const auto& [name, emb] : b.embeddings) {
            const Eigen::MatrixXd fwd = similarity_matrix(gen, ref, emb);
            const Eigen::MatrixXd rev = similarity_matrix(ref, gen, emb);
            CHECK(directional_similarity(fwd, Direction::GenToRef) ==
                  directional_similarity(rev, Direction::RefToGen));
        }
        CHECK(directional_pair_score(gen, ref, b.pair_score, Direction::GenToRef) ==
              directional_pair_score(ref, gen, b.pair_score, Direction::RefToGen));

        auto cg = b.point_cloud(gen);
        auto cr = b.point_cloud(ref);
        const double fwd = nn_distance(cg, cr);
        const double rev = nn_distance(cr, cg);
        std::shuffle(cg.begin(), cg.end(), rng);
        std::shuffle(cr.begin(), cr.end(), rng);
        // Reordering points inside either cloud changes nothing, bit for bit.
        CHECK(nn_distance(cg, cr) == fwd);
        CHECK(nn_distance(cr, cg) == rev);
    }
}

TEST_CASE("adding a generated view can only help the ref-to-gen direction") {
    std::mt19937_64 rng(4);
    const MetricBackends b = toy_backends();
    for (int trial = 0; trial < 30; ++trial) {
        ViewSet gen = random_views(rng, 2);
        const ViewSet ref = random_views(rng, 3);
        const auto& emb = b.embeddings[0].second;
        const double before =
            directional_similarity(similarity_matrix(gen, ref, emb), Direction::RefToGen);
        gen.images.push_back(random_image(rng, 6, 6, 3));
        const double after =
            directional_similarity(similarity_matrix(gen, ref, emb), Direction::RefToGen);
        CHECK(after >= before);
    }
}

TEST_CASE("nearest-neighbor distance is zero between identical clouds") {
    std::mt19937_64 rng(5);
    const ViewSet views = random_views(rng, 3);
    const auto cloud = toy_point_cloud()(views);
    REQUIRE(cloud.size() == 3 * 32);
    for (const auto& p : cloud) {
        CHECK(p.minCoeff() >= 0.0);
        CHECK(p.maxCoeff() <= 1.0);
    }
    CHECK(nn_distance(cloud, cloud) == 0.0);
}

TEST_CASE("a view subset yields a point cloud subset with one-sided zero distance") {
    std::mt19937_64 rng(6);
    const ViewSet full = random_views(rng, 4);
    ViewSet sub;
    sub.images = {full.images[1], full.images[3]};
    const auto backend = toy_point_cloud();
    const auto cloud_full = backend(full);
    const auto cloud_sub = backend(sub);
    CHECK(cloud_sub.size() == 2 * 32);
    CHECK(nn_distance(cloud_sub, cloud_full) == 0.0);
    CHECK(nn_distance(cloud_full, cloud_sub) > 0.0);
}

TEST_CASE("evaluate fills every report field with finite sane values") {
    std::mt19937_64 rng(7);
    const ViewSet gen = random_views(rng, 3);
    const ViewSet ref = random_views(rng, 2);
    const ConsistencyReport rep = evaluate(gen, ref, toy_backends());
    CHECK(rep.errors.empty());
    REQUIRE(rep.s_emb_v2r.size() == 2);
    REQUIRE(rep.s_emb_r2v.size() == 2);
    for (const auto& [name, v] : rep.s_emb_v2r) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK(rep.s_pair_v2r >= 0.0);
    CHECK(rep.s_pair_v2r <= 1.0);
    CHECK(rep.d_nn_v2r >= 0.0);
    CHECK(std::isfinite(rep.d_nn_r2v));
    CHECK(rep.similarity_matrices.at("hist").rows() == 3);
    CHECK(rep.pair_scores.cols() == 2);

    const auto named = rep.named_values();
    REQUIRE(named.size() == 8);
    CHECK(named[0].first == "emb_hist_v2r");
    CHECK(named[1].first == "emb_hist_r2v");
    CHECK(named[2].first == "emb_thumb_v2r");
    CHECK(named[3].first == "emb_thumb_r2v");
    CHECK(named[4].first == "pair_v2r");
    CHECK(named[5].first == "pair_r2v");
    CHECK(named[6].first == "nn_v2r");
    CHECK(named[7].first == "nn_r2v");
}

TEST_CASE("evaluating a set against itself is exact for embeddings and pairs") {
    std::mt19937_64 rng(8);
    const ViewSet views = random_views(rng, 3);
    const ConsistencyReport rep = evaluate(views, views, toy_backends());
    for (const auto& [name, v] : rep.s_emb_v2r) CHECK(v == 1.0);
    for (const auto& [name, v] : rep.s_emb_r2v) CHECK(v == 1.0);
    CHECK(rep.s_pair_v2r == 0.0);
    CHECK(rep.s_pair_r2v == 0.0);
    CHECK(rep.d_nn_v2r == 0.0);
    CHECK(rep.d_nn_r2v == 0.0);
}

TEST_CASE("a failing backend poisons only its own metric") {
    std::mt19937_64 rng(9);
    const ViewSet gen = random_views(rng, 2);
    const ViewSet ref = random_views(rng, 2);
    MetricBackends b = toy_backends();
    b.embeddings[0].second = [](const Image&) -> Eigen::VectorXd {
        throw std::runtime_error("backend offline");
    };
    const ConsistencyReport rep = evaluate(gen, ref, b);
    CHECK(std::isnan(rep.s_emb_v2r.at("hist")));
    CHECK(std::isnan(rep.s_emb_r2v.at("hist")));
    CHECK(std::isfinite(rep.s_emb_v2r.at("thumb")));
    CHECK(std::isfinite(rep.s_pair_v2r));
    CHECK(std::isfinite(rep.d_nn_v2r));
    REQUIRE(!rep.errors.empty());
    bool mentions_view = false;
    for (const auto& e : rep.errors) {
        if (e.find("backend offline") != std::string::npos) mentions_view = true;
    }
    CHECK(mentions_view);
}

TEST_CASE("empty view sets are rejected") {
    ViewSet empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
    std::mt19937_64 rng(10);
    const ViewSet views = random_views(rng, 2);
    CHECK_THROWS_AS(similarity_matrix(empty, views, histogram_embedding()), std::invalid_argument);
}

TEST_CASE("eval manifests survive a save/load cycle") {
    const TempDir dir("metrics_manifest");
    std::vector<EvalRecord> records(2);
    records[0] = {"s1", {"g/a.ppm", "g/b.ppm"}, {"r/a.ppm"}, "OC"};
    records[1] = {"s2", {"g/c.ppm"}, {"r/b.ppm", "r/c.ppm"}, "HOI"};
    const std::string path = dir.str("eval.jsonl");
    save_eval_manifest(path, records);
    const auto back = load_eval_manifest(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].sample_id == "s1");
    CHECK(back[0].gen_paths == records[0].gen_paths);
    CHECK(back[1].ref_paths == records[1].ref_paths);
    CHECK(back[1].scene == "HOI");
}
