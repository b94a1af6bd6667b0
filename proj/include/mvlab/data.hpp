#ifndef MVLAB_DATA_HPP
#define MVLAB_DATA_HPP

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "mvlab/layout.hpp"

namespace mvlab {

/// Video latent tensor, T x C x H x W, stored flat in (t, c, h, w) order.
struct LatentVideo {
    LatentGrid grid;
    Eigen::VectorXd data;

    LatentVideo() = default;
    explicit LatentVideo(const LatentGrid& g)
        : grid(g), data(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.temporal_len) *
                                              g.channels * g.height * g.width)) {}

    Eigen::Index index(int t, int c, int h, int w) const {
        return ((static_cast<Eigen::Index>(t) * grid.channels + c) * grid.height + h) *
                   grid.width + w;
    }
    double& at(int t, int c, int h, int w) { return data[index(t, c, h, w)]; }
    double at(int t, int c, int h, int w) const { return data[index(t, c, h, w)]; }

    void validate() const;
};

/// Single reference view latent, C x H x W, stored flat in (c, h, w) order.
struct ReferenceLatent {
    int channels = 1;
    int height = 1;
    int width = 1;
    Eigen::VectorXd data;

    ReferenceLatent() = default;
    ReferenceLatent(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c) * h * w)) {}

    Eigen::Index index(int c, int h, int w) const {
        return (static_cast<Eigen::Index>(c) * height + h) * width + w;
    }
    double& at(int c, int h, int w) { return data[index(c, h, w)]; }
    double at(int c, int h, int w) const { return data[index(c, h, w)]; }
};

/// Ordered subjects, each an ordered list of reference view latents.
struct ReferenceSet {
    std::vector<std::vector<ReferenceLatent>> subjects;

    ReferenceShape shape() const;
    bool empty() const { return subjects.empty(); }
    /// Checks per-view shapes against the video grid's C, H, W and that no
    /// retained subject is empty.
    void validate(const LatentGrid& grid) const;
};

/// Token ids over the toy vocabulary.
struct Prompt {
    std::vector<int> ids;

    void validate(int vocab_size) const;
};

/// Per subject, keeps a random nonempty subset of views (conditional on
/// nonemptiness) and optionally shuffles their order. The subject list
/// itself is never changed.
ReferenceSet augment_references(const ReferenceSet& refs, std::mt19937_64& rng,
                                double drop_prob, bool shuffle);

/// Token features in layout order: video rows are (t, h, w) t-major with the
/// C channels as columns; reference rows follow subject-major, view, h, w.
Eigen::MatrixXd video_token_features(const LatentVideo& video);
Eigen::MatrixXd reference_token_features(const ReferenceSet& refs);
/// Inverse of video_token_features.
LatentVideo video_from_token_rows(const Eigen::MatrixXd& rows, const LatentGrid& grid);

}  // namespace mvlab

#endif  // MVLAB_DATA_HPP
