#ifndef MVLAB_ABLATE_HPP
#define MVLAB_ABLATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mvlab/curation.hpp"
#include "mvlab/report.hpp"

namespace mvlab {

/// One benchmark subject: a fixed set of reference views plus the word
/// description used for prompting.
struct BenchmarkFixture {
    std::string id;
    std::string category;
    std::vector<Image> ref_views;
};

/// Runs the mock curation pipeline on object-centric specs and loads each
/// record's reference crops as the fixture views.
std::vector<BenchmarkFixture> make_benchmark(int count, int views, const std::string& asset_dir,
                                             std::uint64_t seed);

struct AblationConfig {
    std::string out_dir;
    std::uint64_t seed = 0;
    int fixtures = 2;
    int train_steps = 30;
    int sample_steps = 6;
    double lr = 1e-2;
    /// Latent and model sizes for the inline-trained toy checkpoints.
    int grid_t = 2;
    int grid_hw = 4;
    int channels = 4;
    int layers = 1;
    int heads = 2;
    int head_dim = 8;
    int ts_delta = 16;

    void validate() const;
};

struct AblationResult {
    /// Rows vanilla / ss / ts.
    MetricTable scheme_table;
    /// Rows views=1..4, temporally shifted layout.
    MetricTable view_table;
};

/// Trains a tiny model per layout scheme on curated mock data, samples each
/// benchmark fixture, and scores decoded frames against the reference views
/// with the toy metric backends. The view sweep drops reference views from
/// the 4-view fixtures in input order. Tables land in cfg.out_dir.
AblationResult run_ablation(const AblationConfig& cfg);

}  // namespace mvlab

#endif  // MVLAB_ABLATE_HPP
