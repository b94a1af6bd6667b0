#include <doctest.h>

#include <Eigen/Dense>
#include <fstream>

#include "mvlab/common.hpp"
#include "mvlab/io.hpp"
#include "test_util.hpp"

using namespace mvlab;
using namespace mvlab::testutil;

TEST_CASE("fnv1a64 matches the published test vector and seeds chain bytes") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("abc") == 0xe71fa2190541574bULL);
    const char* s = "compose";
    CHECK(fnv1a64(s, 123) == fnv1a64_bytes(s, 7, 123));
    CHECK(fnv1a64(s, 123) != fnv1a64(s, 456));
    // Seeding with the hash of a prefix equals hashing the concatenation.
    CHECK(fnv1a64("def", fnv1a64("abc")) == fnv1a64("abcdef"));
}

TEST_CASE("tensor files round-trip values, shapes, and metadata") {
    const TempDir dir("io_tensors");
    Eigen::MatrixXd a(2, 3);
    a << 1.0, -2.5, 3.25, 0.0, 1e-12, -7e40;
    Eigen::MatrixXd b(1, 1);
    b << 42.0;
    const std::string path = dir.str("model.safetensors");
    save_tensors(path, {{"layer.w", &a}, {"bias", &b}}, {{"config", "{\"k\":1}"}});

    const LoadedTensors loaded = load_tensors(path);
    REQUIRE(loaded.tensors.size() == 2);
    REQUIRE(loaded.tensors.count("layer.w") == 1);
    const Eigen::MatrixXd& a2 = loaded.tensors.at("layer.w");
    REQUIRE(a2.rows() == 2);
    REQUIRE(a2.cols() == 3);
    CHECK((a2 - a).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(loaded.tensors.at("bias")(0, 0) == 42.0);
    CHECK(loaded.metadata.at("config") == "{\"k\":1}");
}

TEST_CASE("loading a missing or truncated tensor file fails") {
    const TempDir dir("io_bad");
    CHECK_THROWS(load_tensors(dir.str("nope.safetensors")));

    std::ofstream out(dir.str("trunc.safetensors"), std::ios::binary);
    out << "xx";
    out.close();
    CHECK_THROWS(load_tensors(dir.str("trunc.safetensors")));
}

TEST_CASE("npy files round-trip shape and payload") {
    const TempDir dir("io_npy");
    const std::string path = dir.str("x.npy");
    save_npy(path, {2, 1, 3}, {1.0, 2.0, 3.0, -4.0, 5.5, 6.0});
    const NpyArray arr = load_npy(path);
    CHECK(arr.shape == std::vector<std::int64_t>{2, 1, 3});
    CHECK(arr.values == std::vector<double>{1.0, 2.0, 3.0, -4.0, 5.5, 6.0});

    // The on-disk header is the standard v1.0 magic.
    std::ifstream in(path, std::ios::binary);
    std::string head(6, '\0');
    in.read(head.data(), 6);
    CHECK(head == "\x93NUMPY");
}

TEST_CASE("npy rejects a payload that disagrees with its shape") {
    const TempDir dir("io_npy_bad");
    CHECK_THROWS_AS(save_npy(dir.str("y.npy"), {2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("text files round-trip and digests track content") {
    const TempDir dir("io_text");
    const std::string path = dir.str("note.txt");
    write_text_file(path, "abc");
    CHECK(read_text_file(path) == "abc");
    CHECK(file_digest_hex(path) == "e71fa2190541574b");

    write_text_file(path, "abd");
    CHECK(file_digest_hex(path) != "e71fa2190541574b");
    CHECK(file_digest_hex(path).size() == 16);

    CHECK_THROWS(read_text_file(dir.str("missing.txt")));
}
