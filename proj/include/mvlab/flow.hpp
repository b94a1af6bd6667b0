#ifndef MVLAB_FLOW_HPP
#define MVLAB_FLOW_HPP

#include <random>

#include "mvlab/data.hpp"

namespace mvlab {

/// Straight-line interpolation state between data and noise:
/// xt = (1-t) * x0 + t * eps, with true velocity ut = eps - x0.
struct FlowState {
    LatentVideo x0;
    LatentVideo eps;
    LatentVideo xt;
    LatentVideo ut;
    double t = 0.0;
};

FlowState interpolate(const LatentVideo& x0, const LatentVideo& eps, double t);

/// Timestep sampling config: t in [0,1] relative to total_steps, drawn
/// logit-normal (sigmoid of a Normal(location, scale) draw).
struct SchedulerConfig {
    int total_steps = 1000;
    double location = 0.0;
    double scale = 1.0;

    void validate() const;
};

double sample_timestep(const SchedulerConfig& cfg, std::mt19937_64& rng);

/// Mean squared error between predicted and true velocity.
double rf_loss(const LatentVideo& pred, const FlowState& state);

LatentVideo gaussian_latent(const LatentGrid& grid, std::mt19937_64& rng);

}  // namespace mvlab

#endif  // MVLAB_FLOW_HPP
