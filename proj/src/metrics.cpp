#include "mvlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "mvlab/common.hpp"
#include "mvlab/io.hpp"

namespace mvlab {

using json = nlohmann::json;

void ViewSet::validate() const {
    MV_CHECK_ARG(!images.empty(), "ViewSet: empty");
    for (const auto& img : images) {
        img.validate();
        MV_CHECK_ARG(img.channels == images.front().channels,
                     "ViewSet: mixed channel counts");
    }
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<Eigen::VectorXd> embed_all(const ViewSet& set, const EmbeddingBackend& backend,
                                       const char* role) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(set.images.size());
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        Eigen::VectorXd e;
        try {
            e = backend(set.images[i]);
        } catch (const std::exception& ex) {
            throw std::runtime_error(std::string("embedding backend failed on ") + role +
                                     " view " + std::to_string(i) + ": " + ex.what());
        }
        MV_CHECK(std::abs(e.norm() - 1.0) <= 1e-6,
                 std::string("embedding backend returned non-unit vector for ") + role +
                     " view " + std::to_string(i));
        out.push_back(std::move(e));
    }
    return out;
}

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data());
}

/// Mean with a canonical summation order so permuting the inputs cannot
/// change the float result.
double sorted_mean(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

}  // namespace

Eigen::MatrixXd similarity_matrix(const ViewSet& gen, const ViewSet& ref,
                                  const EmbeddingBackend& backend) {
    gen.validate();
    ref.validate();
    const auto ge = embed_all(gen, backend, "generated");
    const auto re = embed_all(ref, backend, "reference");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(ge.size()), static_cast<Eigen::Index>(re.size()));
    for (std::size_t n = 0; n < ge.size(); ++n) {
        for (std::size_t r = 0; r < re.size(); ++r) {
            MV_CHECK(ge[n].size() == re[r].size(), "embedding dimensions differ across views");
            const double s = bitwise_equal(ge[n], re[r])
                                 ? 1.0
                                 : std::clamp(ge[n].dot(re[r]), -1.0, 1.0);
            m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r)) = s;
        }
    }
    return m;
}

double directional_similarity(const Eigen::MatrixXd& matrix, Direction dir) {
    MV_CHECK_ARG(matrix.rows() > 0 && matrix.cols() > 0, "directional_similarity: empty matrix");
    std::vector<double> best;
    if (dir == Direction::GenToRef) {
        best.reserve(static_cast<std::size_t>(matrix.rows()));
        for (Eigen::Index n = 0; n < matrix.rows(); ++n) best.push_back(matrix.row(n).maxCoeff());
    } else {
        best.reserve(static_cast<std::size_t>(matrix.cols()));
        for (Eigen::Index r = 0; r < matrix.cols(); ++r) best.push_back(matrix.col(r).maxCoeff());
    }
    return sorted_mean(std::move(best));
}

Eigen::MatrixXd pair_score_matrix(const ViewSet& gen, const ViewSet& ref,
                                  const PairScoreBackend& backend) {
    gen.validate();
    ref.validate();
    const Eigen::Index n_gen = static_cast<Eigen::Index>(gen.images.size());
    const Eigen::Index n_ref = static_cast<Eigen::Index>(ref.images.size());
    Eigen::MatrixXd m(n_gen, n_ref);
    for (Eigen::Index n = 0; n < n_gen; ++n) {
        for (Eigen::Index r = 0; r < n_ref; ++r) {
            double s = 0.0;
            try {
                s = backend(gen.images[static_cast<std::size_t>(n)],
                            ref.images[static_cast<std::size_t>(r)]);
            } catch (const std::exception& ex) {
                throw std::runtime_error("pair backend failed on (generated " +
                                         std::to_string(n) + ", reference " + std::to_string(r) +
                                         "): " + ex.what());
            }
            MV_CHECK(s >= 0.0 && s <= 1.0, "pair backend returned score outside [0,1]");
            m(n, r) = s;
        }
    }
    return m;
}

double directional_pair_score(const Eigen::MatrixXd& scores, Direction dir) {
    MV_CHECK_ARG(scores.rows() > 0 && scores.cols() > 0, "directional_pair_score: empty matrix");
    std::vector<double> best;
    if (dir == Direction::GenToRef) {
        best.reserve(static_cast<std::size_t>(scores.rows()));
        for (Eigen::Index n = 0; n < scores.rows(); ++n) best.push_back(scores.row(n).minCoeff());
    } else {
        best.reserve(static_cast<std::size_t>(scores.cols()));
        for (Eigen::Index r = 0; r < scores.cols(); ++r) best.push_back(scores.col(r).minCoeff());
    }
    return sorted_mean(std::move(best));
}

double directional_pair_score(const ViewSet& gen, const ViewSet& ref,
                              const PairScoreBackend& backend, Direction dir) {
    return directional_pair_score(pair_score_matrix(gen, ref, backend), dir);
}

double nn_distance(const std::vector<Eigen::Vector3d>& source,
                   const std::vector<Eigen::Vector3d>& target) {
    MV_CHECK_ARG(!source.empty() && !target.empty(), "nn_distance: empty cloud");
    std::vector<double> nearest;
    nearest.reserve(source.size());
    for (const auto& p : source) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : target) best = std::min(best, (p - q).norm());
        nearest.push_back(best);
    }
    return sorted_mean(std::move(nearest));
}

std::vector<std::pair<std::string, double>> ConsistencyReport::named_values() const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [name, v2r] : s_emb_v2r) {
        out.emplace_back("emb_" + name + "_v2r", v2r);
        auto it = s_emb_r2v.find(name);
        out.emplace_back("emb_" + name + "_r2v", it != s_emb_r2v.end() ? it->second : kNaN);
    }
    out.emplace_back("pair_v2r", s_pair_v2r);
    out.emplace_back("pair_r2v", s_pair_r2v);
    out.emplace_back("nn_v2r", d_nn_v2r);
    out.emplace_back("nn_r2v", d_nn_r2v);
    return out;
}

ConsistencyReport evaluate(const ViewSet& gen, const ViewSet& ref,
                           const MetricBackends& backends) {
    gen.validate();
    ref.validate();
    ConsistencyReport report;

    for (const auto& [name, backend] : backends.embeddings) {
        try {
            const Eigen::MatrixXd m = similarity_matrix(gen, ref, backend);
            report.s_emb_v2r[name] = directional_similarity(m, Direction::GenToRef);
            report.s_emb_r2v[name] = directional_similarity(m, Direction::RefToGen);
            report.similarity_matrices[name] = m;
        } catch (const std::exception& ex) {
            report.s_emb_v2r[name] = kNaN;
            report.s_emb_r2v[name] = kNaN;
            report.errors.push_back("embedding " + name + ": " + ex.what());
        }
    }

    try {
        report.pair_scores = pair_score_matrix(gen, ref, backends.pair_score);
        report.s_pair_v2r = directional_pair_score(report.pair_scores, Direction::GenToRef);
        report.s_pair_r2v = directional_pair_score(report.pair_scores, Direction::RefToGen);
    } catch (const std::exception& ex) {
        report.s_pair_v2r = kNaN;
        report.s_pair_r2v = kNaN;
        report.errors.push_back(std::string("pair: ") + ex.what());
    }

    try {
        std::vector<Eigen::Vector3d> cloud_gen = backends.point_cloud(gen);
        std::vector<Eigen::Vector3d> cloud_ref = backends.point_cloud(ref);
        MV_CHECK(!cloud_gen.empty() && !cloud_ref.empty(),
                 "point cloud backend returned an empty cloud");
        // Scale both clouds by the reference bounding-box diagonal so the
        // distances are comparable across subjects.
        Eigen::Vector3d lo = cloud_ref.front();
        Eigen::Vector3d hi = cloud_ref.front();
        for (const auto& p : cloud_ref) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const double diag = (hi - lo).norm();
        if (diag > 1e-12) {
            const double inv = 1.0 / diag;
            for (auto& p : cloud_gen) p *= inv;
            for (auto& p : cloud_ref) p *= inv;
        }
        report.d_nn_v2r = nn_distance(cloud_gen, cloud_ref);
        report.d_nn_r2v = nn_distance(cloud_ref, cloud_gen);
    } catch (const std::exception& ex) {
        report.d_nn_v2r = kNaN;
        report.d_nn_r2v = kNaN;
        report.errors.push_back(std::string("cloud: ") + ex.what());
    }
    return report;
}

EmbeddingBackend histogram_embedding() {
    return [](const Image& img) {
        img.validate();
        constexpr int kBins = 8;
        Eigen::VectorXd e = Eigen::VectorXd::Zero(kBins * img.channels);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < img.channels; ++c) {
                    const int bin = std::min(kBins - 1,
                                             static_cast<int>(img.at(y, x, c) * kBins));
                    e[c * kBins + bin] += 1.0;
                }
        const double norm = e.norm();
        MV_CHECK(norm > 0.0, "histogram embedding: degenerate image");
        return Eigen::VectorXd(e / norm);
    };
}

EmbeddingBackend thumbnail_embedding() {
    return [](const Image& img) {
        img.validate();
        constexpr int kSide = 4;
        const Image small = resize_nearest(img, kSide, kSide);
        Eigen::VectorXd e(kSide * kSide);
        for (int y = 0; y < kSide; ++y)
            for (int x = 0; x < kSide; ++x) {
                double gray = 0.0;
                for (int c = 0; c < small.channels; ++c) gray += small.at(y, x, c);
                e[y * kSide + x] = gray / small.channels + 1e-3;
            }
        return Eigen::VectorXd(e / e.norm());
    };
}

PairScoreBackend toy_pair_score() {
    return [embed = histogram_embedding()](const Image& a, const Image& b) {
        if (images_equal(a, b)) return 0.0;
        const Eigen::VectorXd ea = embed(a);
        const Eigen::VectorXd eb = embed(b);
        const double cos = bitwise_equal(ea, eb) ? 1.0 : std::clamp(ea.dot(eb), -1.0, 1.0);
        return std::clamp(1.0 - cos, 0.0, 1.0);
    };
}

PointCloudBackend toy_point_cloud(int points_per_view) {
    MV_CHECK_ARG(points_per_view >= 1, "toy_point_cloud: points_per_view must be >= 1");
    return [points_per_view](const ViewSet& set) {
        set.validate();
        std::vector<Eigen::Vector3d> cloud;
        cloud.reserve(set.images.size() * static_cast<std::size_t>(points_per_view));
        for (const auto& img : set.images) {
            // Seed from the pixel bytes so a view always maps to the same
            // points regardless of its position in the set.
            std::uint64_t seed = fnv1a64_bytes(img.pixels.data(), img.pixels.size() * sizeof(double));
            seed = fnv1a64_bytes(&img.width, sizeof(img.width), seed);
            seed = fnv1a64_bytes(&img.height, sizeof(img.height), seed);
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (int i = 0; i < points_per_view; ++i) {
                const double x = unit(rng);
                const double y = unit(rng);
                const double z = unit(rng);
                cloud.emplace_back(x, y, z);
            }
        }
        return cloud;
    };
}

MetricBackends toy_backends() {
    MetricBackends b;
    b.embeddings.emplace_back("hist", histogram_embedding());
    b.embeddings.emplace_back("thumb", thumbnail_embedding());
    b.pair_score = toy_pair_score();
    b.point_cloud = toy_point_cloud();
    return b;
}

std::vector<EvalRecord> load_eval_manifest(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<EvalRecord> records;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        const json j = json::parse(line);
        EvalRecord rec;
        rec.sample_id = j.at("sample_id").get<std::string>();
        rec.gen_paths = j.at("gen").get<std::vector<std::string>>();
        rec.ref_paths = j.at("ref").get<std::vector<std::string>>();
        rec.scene = j.at("scene").get<std::string>();
        records.push_back(std::move(rec));
    }
    return records;
}

void save_eval_manifest(const std::string& path, const std::vector<EvalRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        const json j{{"sample_id", rec.sample_id},
                     {"gen", rec.gen_paths},
                     {"ref", rec.ref_paths},
                     {"scene", rec.scene}};
        out += j.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

}  // namespace mvlab
