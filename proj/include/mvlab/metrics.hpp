#ifndef MVLAB_METRICS_HPP
#define MVLAB_METRICS_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvlab/image.hpp"

namespace mvlab {

/// Ordered set of subject crops; generated views take size N, references M.
struct ViewSet {
    std::vector<Image> images;

    void validate() const;
};

/// image -> unit-norm feature vector of a fixed dimension.
using EmbeddingBackend = std::function<Eigen::VectorXd(const Image&)>;
/// (image, image) -> score in [0,1], lower means more consistent.
using PairScoreBackend = std::function<double(const Image&, const Image&)>;
/// view set -> 3D points in one shared canonical frame.
using PointCloudBackend = std::function<std::vector<Eigen::Vector3d>(const ViewSet&)>;

enum class Direction { GenToRef, RefToGen };

/// Entry (n, m) = cosine of unit embeddings of generated view n and
/// reference view m, clamped to [-1,1]. Bitwise-equal embeddings score 1
/// exactly.
Eigen::MatrixXd similarity_matrix(const ViewSet& gen, const ViewSet& ref,
                                  const EmbeddingBackend& backend);

/// GenToRef: mean over rows of the row max. RefToGen: mean over columns of
/// the column max.
double directional_similarity(const Eigen::MatrixXd& matrix, Direction dir);

/// Pairwise score table, entry (n, m) = backend(gen n, ref m).
Eigen::MatrixXd pair_score_matrix(const ViewSet& gen, const ViewSet& ref,
                                  const PairScoreBackend& backend);

/// GenToRef: mean over generated views of the min score over references.
/// RefToGen: roles swapped.
double directional_pair_score(const ViewSet& gen, const ViewSet& ref,
                              const PairScoreBackend& backend, Direction dir);
double directional_pair_score(const Eigen::MatrixXd& scores, Direction dir);

/// Mean over source points of the Euclidean distance to the nearest target
/// point.
double nn_distance(const std::vector<Eigen::Vector3d>& source,
                   const std::vector<Eigen::Vector3d>& target);

struct MetricBackends {
    std::vector<std::pair<std::string, EmbeddingBackend>> embeddings;
    PairScoreBackend pair_score;
    PointCloudBackend point_cloud;
};

struct ConsistencyReport {
    /// Keyed by embedding backend name.
    std::map<std::string, double> s_emb_v2r;
    std::map<std::string, double> s_emb_r2v;
    double s_pair_v2r = 0.0;
    double s_pair_r2v = 0.0;
    double d_nn_v2r = 0.0;
    double d_nn_r2v = 0.0;
    std::map<std::string, Eigen::MatrixXd> similarity_matrices;
    Eigen::MatrixXd pair_scores;
    /// One message per metric whose backend failed; its values are NaN.
    std::vector<std::string> errors;

    /// Column order used by report tables and ablation output.
    std::vector<std::pair<std::string, double>> named_values() const;
};

/// Runs every metric; a failing backend poisons only its own values.
/// Point clouds are rescaled by the reference cloud's bounding-box diagonal
/// before measuring so distances are comparable across subjects.
ConsistencyReport evaluate(const ViewSet& gen, const ViewSet& ref,
                           const MetricBackends& backends);

/// Per-channel intensity histogram (8 bins per channel), L2-normalized.
EmbeddingBackend histogram_embedding();
/// Flattened 4x4 nearest-resampled grayscale thumbnail, L2-normalized.
EmbeddingBackend thumbnail_embedding();
/// 1 minus the histogram-embedding cosine, clamped to [0,1]; identical
/// images score 0 exactly.
PairScoreBackend toy_pair_score();
/// Hash-seeded points per view, union over views; a view always contributes
/// the same points, so subsets of a view set yield subsets of the cloud.
PointCloudBackend toy_point_cloud(int points_per_view = 32);

/// histogram + thumbnail embeddings, toy pair score, toy point cloud.
MetricBackends toy_backends();

/// One line per sample: id, generated crop paths, reference crop paths,
/// scene type (OC | HOI).
struct EvalRecord {
    std::string sample_id;
    std::vector<std::string> gen_paths;
    std::vector<std::string> ref_paths;
    std::string scene;
};

std::vector<EvalRecord> load_eval_manifest(const std::string& path);
void save_eval_manifest(const std::string& path, const std::vector<EvalRecord>& records);

}  // namespace mvlab

#endif  // MVLAB_METRICS_HPP
