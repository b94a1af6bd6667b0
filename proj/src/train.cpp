#include "mvlab/train.hpp"

#include <algorithm>
#include <cmath>

#include "mvlab/common.hpp"

namespace mvlab {

void TrainConfig::validate() const {
    MV_CHECK_ARG(lr >= 0.0, "TrainConfig: lr must be >= 0");
    MV_CHECK_ARG(beta1 >= 0.0 && beta1 < 1.0, "TrainConfig: beta1 must be in [0,1)");
    MV_CHECK_ARG(beta2 >= 0.0 && beta2 < 1.0, "TrainConfig: beta2 must be in [0,1)");
    MV_CHECK_ARG(eps > 0.0, "TrainConfig: eps must be > 0");
    MV_CHECK_ARG(view_drop_prob >= 0.0 && view_drop_prob < 1.0,
                 "TrainConfig: view_drop_prob must be in [0,1)");
    MV_CHECK_ARG(lr_min_frac > 0.0 && lr_min_frac <= 1.0,
                 "TrainConfig: lr_min_frac must be in (0,1]");
    scheduler.validate();
}

double train_step(Denoiser& model, const std::vector<TrainSample>& batch, const TrainConfig& cfg,
                  AdamState& state, std::mt19937_64& rng) {
    cfg.validate();
    MV_CHECK_ARG(!batch.empty(), "train_step: empty batch");

    auto& params = model.params().all();
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const auto& p : params) {
            state.m.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
            state.v.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
        }
    }
    MV_CHECK_ARG(state.m.size() == params.size(), "train_step: optimizer state mismatch");

    model.params().zero_grads();
    const double cond_dropout = model.config().cond_dropout;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    double total_loss = 0.0;
    for (const auto& sample : batch) {
        const double t = sample_timestep(cfg.scheduler, rng);
        const LatentVideo eps = gaussian_latent(sample.video.grid, rng);
        const FlowState flow = interpolate(sample.video, eps, t);

        const bool keep_refs = !sample.refs.empty() && unit(rng) >= cond_dropout;
        const bool keep_text = !sample.prompt.ids.empty() && unit(rng) >= cond_dropout;
        ReferenceSet refs;
        if (keep_refs) {
            refs = (cfg.view_drop_prob > 0.0 || cfg.view_shuffle)
                       ? augment_references(sample.refs, rng, cfg.view_drop_prob,
                                            cfg.view_shuffle)
                       : sample.refs;
        }

        DenoiseCache cache;
        const LatentVideo pred =
            model.forward(flow.xt, t, keep_refs ? &refs : nullptr,
                          keep_text ? &sample.prompt : nullptr, cache);
        total_loss += rf_loss(pred, flow);

        LatentVideo dpred = pred;
        dpred.data = (pred.data - flow.ut.data) *
                     (2.0 / static_cast<double>(pred.data.size()) * inv_batch);
        model.backward(dpred, cache);
    }

    if (cfg.lr > 0.0) {
        state.step += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * p.grad;
            state.v[i] = cfg.beta2 * state.v[i].array() +
                         (1.0 - cfg.beta2) * p.grad.array().square();
            const Eigen::ArrayXXd m_hat = state.m[i].array() / bc1;
            const Eigen::ArrayXXd v_hat = state.v[i].array() / bc2;
            p.value.array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    return total_loss * inv_batch;
}

std::vector<double> train_loop(Denoiser& model, const std::vector<TrainSample>& batch,
                               const TrainConfig& cfg, int steps, std::uint64_t seed) {
    MV_CHECK_ARG(steps >= 0, "train_loop: steps must be >= 0");
    cfg.validate();
    std::mt19937_64 rng(seed);
    AdamState state;
    TrainConfig step_cfg = cfg;
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        if (cfg.lr_min_frac < 1.0 && steps > 1) {
            const double cosine =
                0.5 * (1.0 + std::cos(M_PI * static_cast<double>(i) / (steps - 1)));
            step_cfg.lr = cfg.lr * (cfg.lr_min_frac + (1.0 - cfg.lr_min_frac) * cosine);
        }
        losses.push_back(train_step(model, batch, step_cfg, state, rng));
    }
    return losses;
}

std::vector<TrainSample> synthetic_overfit_batch(const LatentGrid& grid, int count, int views,
                                                 double sigma, int vocab_size,
                                                 std::uint64_t seed) {
    grid.validate();
    MV_CHECK_ARG(count >= 1, "synthetic_overfit_batch: count must be >= 1");
    MV_CHECK_ARG(views >= 1, "synthetic_overfit_batch: views must be >= 1");
    MV_CHECK_ARG(sigma > 0.0, "synthetic_overfit_batch: sigma must be > 0");
    MV_CHECK_ARG(vocab_size >= count, "synthetic_overfit_batch: vocab too small for count");
    std::mt19937_64 rng(seed);
    std::vector<TrainSample> batch;
    batch.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        TrainSample sample;
        sample.video = gaussian_latent(grid, rng);
        sample.video.data *= sigma;
        std::vector<ReferenceLatent> subject;
        for (int m = 0; m < views; ++m) {
            const int t = std::min(m, grid.temporal_len - 1);
            ReferenceLatent ref;
            ref.channels = grid.channels;
            ref.height = grid.height;
            ref.width = grid.width;
            ref.data.resize(static_cast<Eigen::Index>(grid.channels) * grid.height * grid.width);
            for (int c = 0; c < grid.channels; ++c)
                for (int h = 0; h < grid.height; ++h)
                    for (int w = 0; w < grid.width; ++w)
                        ref.at(c, h, w) = sample.video.at(t, c, h, w);
            subject.push_back(std::move(ref));
        }
        sample.refs.subjects.push_back(std::move(subject));
        sample.prompt.ids = {i};
        batch.push_back(std::move(sample));
    }
    return batch;
}

}  // namespace mvlab
