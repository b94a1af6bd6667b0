#include "mvlab/sampler.hpp"

#include <random>

#include "mvlab/common.hpp"
#include "mvlab/flow.hpp"

namespace mvlab {

void GuidanceConfig::validate() const {
    MV_CHECK_ARG(steps >= 1, "GuidanceConfig: steps must be >= 1");
}

LatentVideo cfg_combine(const LatentVideo& v_uncond, const LatentVideo& v_ref,
                        const LatentVideo& v_ref_text, const GuidanceConfig& cfg) {
    MV_CHECK_ARG(v_uncond.data.size() == v_ref.data.size() &&
                     v_ref.data.size() == v_ref_text.data.size(),
                 "cfg_combine: prediction shapes differ");
    LatentVideo out = v_uncond;
    // Gathered form of u + wr*(r - u) + wt*(f - r); zero coefficients drop
    // their branch bit-exactly, so wr = wt = 1 returns v_ref_text unchanged.
    out.data = (1.0 - cfg.omega_ref) * v_uncond.data +
               (cfg.omega_ref - cfg.omega_text) * v_ref.data +
               cfg.omega_text * v_ref_text.data;
    return out;
}

SampleResult sample(const DenoiserFn& field, const ReferenceSet* refs, const Prompt* prompt,
                    const LatentGrid& grid, const GuidanceConfig& cfg) {
    cfg.validate();
    grid.validate();

    std::mt19937_64 rng(cfg.seed);
    SampleResult result;
    result.initial_noise = gaussian_latent(grid, rng);
    LatentVideo x = result.initial_noise;

    const double dt = 1.0 / static_cast<double>(cfg.steps);
    for (int i = 0; i < cfg.steps; ++i) {
        const double t = 1.0 - i * dt;
        const LatentVideo v_uncond = field(x, t, nullptr, nullptr);
        const LatentVideo v_ref = field(x, t, refs, nullptr);
        const LatentVideo v_ref_text = field(x, t, refs, prompt);
        result.denoiser_calls += 3;
        const LatentVideo v = cfg_combine(v_uncond, v_ref, v_ref_text, cfg);
        x.data -= dt * v.data;
    }
    MV_CHECK(x.data.allFinite(), "sample: non-finite latent");
    result.latent = std::move(x);
    return result;
}

SampleResult sample(const Denoiser& model, const ReferenceSet* refs, const Prompt* prompt,
                    const LatentGrid& grid, const GuidanceConfig& cfg) {
    DenoiserFn field = [&model](const LatentVideo& xt, double t, const ReferenceSet* r,
                                const Prompt* p) { return model.forward(xt, t, r, p); };
    return sample(field, refs, prompt, grid, cfg);
}

}  // namespace mvlab
