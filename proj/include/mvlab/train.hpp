#ifndef MVLAB_TRAIN_HPP
#define MVLAB_TRAIN_HPP

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mvlab/data.hpp"
#include "mvlab/flow.hpp"
#include "mvlab/model.hpp"

namespace mvlab {

struct TrainSample {
    LatentVideo video;
    ReferenceSet refs;
    Prompt prompt;
};

struct TrainConfig {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Cosine decay floor as a fraction of lr; 1 keeps the rate constant.
    /// Applied by train_loop, which knows the step budget.
    double lr_min_frac = 1.0;
    /// View-level augmentation applied to kept reference sets.
    double view_drop_prob = 0.0;
    bool view_shuffle = false;
    SchedulerConfig scheduler;

    void validate() const;
};

/// First/second moment buffers, one pair per parameter in registration order.
struct AdamState {
    std::vector<Eigen::MatrixXd> m;
    std::vector<Eigen::MatrixXd> v;
    std::int64_t step = 0;
};

/// One optimizer step over the full batch. Per sample: draws (t, eps), forms
/// the interpolant, drops refs and prompt independently with the model's
/// cond_dropout, augments surviving views, and backpropagates the velocity
/// regression loss on video tokens. Returns the batch-mean loss.
double train_step(Denoiser& model, const std::vector<TrainSample>& batch, const TrainConfig& cfg,
                  AdamState& state, std::mt19937_64& rng);

/// Repeats train_step with one rng stream; returns the loss trajectory.
std::vector<double> train_loop(Denoiser& model, const std::vector<TrainSample>& batch,
                               const TrainConfig& cfg, int steps, std::uint64_t seed);

/// Memorization fixtures: x0 ~ sigma * N(0, I), reference views copied from
/// the sample's own frames, prompt = the sample index token. Large sigma
/// separates the initial loss (about 1 + sigma^2) from the memorized
/// floor (about 1), so overfitting is observable within a few hundred steps.
std::vector<TrainSample> synthetic_overfit_batch(const LatentGrid& grid, int count, int views,
                                                 double sigma, int vocab_size,
                                                 std::uint64_t seed);

}  // namespace mvlab

#endif  // MVLAB_TRAIN_HPP
