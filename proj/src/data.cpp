#include "mvlab/data.hpp"

#include <algorithm>
#include <cmath>

#include "mvlab/common.hpp"

namespace mvlab {

void LatentVideo::validate() const {
    grid.validate();
    const Eigen::Index expect =
        static_cast<Eigen::Index>(grid.temporal_len) * grid.channels * grid.height * grid.width;
    MV_CHECK_ARG(data.size() == expect, "LatentVideo: data size does not match grid");
    MV_CHECK(data.allFinite(), "LatentVideo: non-finite values");
}

ReferenceShape ReferenceSet::shape() const {
    ReferenceShape s;
    s.views_per_subject.reserve(subjects.size());
    for (const auto& views : subjects) {
        s.views_per_subject.push_back(static_cast<int>(views.size()));
    }
    return s;
}

void ReferenceSet::validate(const LatentGrid& grid) const {
    for (const auto& views : subjects) {
        MV_CHECK_ARG(!views.empty(), "ReferenceSet: subject with no views");
        for (const auto& v : views) {
            MV_CHECK_ARG(v.channels == grid.channels && v.height == grid.height &&
                             v.width == grid.width,
                         "ReferenceSet: view shape does not match video grid");
            MV_CHECK_ARG(v.data.size() ==
                             static_cast<Eigen::Index>(v.channels) * v.height * v.width,
                         "ReferenceSet: view data size mismatch");
        }
    }
}

void Prompt::validate(int vocab_size) const {
    for (int id : ids) {
        MV_CHECK_ARG(id >= 0 && id < vocab_size, "Prompt: token id out of vocabulary");
    }
}

ReferenceSet augment_references(const ReferenceSet& refs, std::mt19937_64& rng,
                                double drop_prob, bool shuffle) {
    MV_CHECK_ARG(drop_prob >= 0.0 && drop_prob < 1.0, "augment_references: drop_prob in [0,1)");
    ReferenceSet out;
    out.subjects.reserve(refs.subjects.size());
    std::bernoulli_distribution drop(drop_prob);
    for (const auto& views : refs.subjects) {
        MV_CHECK_ARG(!views.empty(), "augment_references: subject with no views");
        const std::size_t m = views.size();
        std::vector<std::size_t> kept;
        // Resample the mask until nonempty: the retained count follows the
        // binomial conditioned on >= 1.
        do {
            kept.clear();
            for (std::size_t j = 0; j < m; ++j) {
                if (!drop(rng)) kept.push_back(j);
            }
        } while (kept.empty());
        if (shuffle) {
            for (std::size_t j = kept.size(); j > 1; --j) {
                std::uniform_int_distribution<std::size_t> pick(0, j - 1);
                std::swap(kept[j - 1], kept[pick(rng)]);
            }
        }
        std::vector<ReferenceLatent> subset;
        subset.reserve(kept.size());
        for (std::size_t j : kept) subset.push_back(views[j]);
        out.subjects.push_back(std::move(subset));
    }
    return out;
}

Eigen::MatrixXd video_token_features(const LatentVideo& video) {
    const LatentGrid& g = video.grid;
    Eigen::MatrixXd rows(g.video_tokens(), g.channels);
    Eigen::Index r = 0;
    for (int t = 0; t < g.temporal_len; ++t) {
        for (int h = 0; h < g.height; ++h) {
            for (int w = 0; w < g.width; ++w, ++r) {
                for (int c = 0; c < g.channels; ++c) {
                    rows(r, c) = video.at(t, c, h, w);
                }
            }
        }
    }
    return rows;
}

Eigen::MatrixXd reference_token_features(const ReferenceSet& refs) {
    Eigen::Index n = 0;
    int channels = 0;
    for (const auto& views : refs.subjects) {
        for (const auto& v : views) {
            n += static_cast<Eigen::Index>(v.height) * v.width;
            channels = v.channels;
        }
    }
    Eigen::MatrixXd rows(n, channels);
    Eigen::Index r = 0;
    for (const auto& views : refs.subjects) {
        for (const auto& v : views) {
            for (int h = 0; h < v.height; ++h) {
                for (int w = 0; w < v.width; ++w, ++r) {
                    for (int c = 0; c < v.channels; ++c) {
                        rows(r, c) = v.at(c, h, w);
                    }
                }
            }
        }
    }
    return rows;
}

LatentVideo video_from_token_rows(const Eigen::MatrixXd& rows, const LatentGrid& grid) {
    MV_CHECK_ARG(rows.rows() == grid.video_tokens() && rows.cols() == grid.channels,
                 "video_from_token_rows: shape mismatch");
    LatentVideo video(grid);
    Eigen::Index r = 0;
    for (int t = 0; t < grid.temporal_len; ++t) {
        for (int h = 0; h < grid.height; ++h) {
            for (int w = 0; w < grid.width; ++w, ++r) {
                for (int c = 0; c < grid.channels; ++c) {
                    video.at(t, c, h, w) = rows(r, c);
                }
            }
        }
    }
    return video;
}

}  // namespace mvlab
