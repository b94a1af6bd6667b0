#include "mvlab/flow.hpp"

#include <cmath>

#include "mvlab/common.hpp"

namespace mvlab {

FlowState interpolate(const LatentVideo& x0, const LatentVideo& eps, double t) {
    x0.validate();
    eps.validate();
    MV_CHECK_ARG(x0.data.size() == eps.data.size() &&
                     x0.grid.temporal_len == eps.grid.temporal_len &&
                     x0.grid.channels == eps.grid.channels &&
                     x0.grid.height == eps.grid.height && x0.grid.width == eps.grid.width,
                 "interpolate: x0 and eps shapes differ");
    MV_CHECK_ARG(t >= 0.0 && t <= 1.0, "interpolate: t out of [0,1]");
    FlowState state;
    state.x0 = x0;
    state.eps = eps;
    state.t = t;
    state.xt = LatentVideo(x0.grid);
    state.xt.data = (1.0 - t) * x0.data + t * eps.data;
    state.ut = LatentVideo(x0.grid);
    state.ut.data = eps.data - x0.data;
    return state;
}

void SchedulerConfig::validate() const {
    MV_CHECK_ARG(total_steps >= 1, "SchedulerConfig: total_steps must be >= 1");
    MV_CHECK_ARG(scale > 0.0, "SchedulerConfig: scale must be positive");
}

double sample_timestep(const SchedulerConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    std::normal_distribution<double> normal(cfg.location, cfg.scale);
    const double z = normal(rng);
    return 1.0 / (1.0 + std::exp(-z));
}

double rf_loss(const LatentVideo& pred, const FlowState& state) {
    MV_CHECK_ARG(pred.data.size() == state.ut.data.size(), "rf_loss: shape mismatch");
    const Eigen::VectorXd diff = pred.data - state.ut.data;
    return diff.squaredNorm() / static_cast<double>(diff.size());
}

LatentVideo gaussian_latent(const LatentGrid& grid, std::mt19937_64& rng) {
    LatentVideo out(grid);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < out.data.size(); ++i) {
        out.data[i] = normal(rng);
    }
    return out;
}

}  // namespace mvlab
