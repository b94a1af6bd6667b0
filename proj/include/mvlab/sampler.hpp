#ifndef MVLAB_SAMPLER_HPP
#define MVLAB_SAMPLER_HPP

#include <cstdint>
#include <functional>

#include "mvlab/data.hpp"
#include "mvlab/model.hpp"

namespace mvlab {

struct GuidanceConfig {
    double omega_ref = 2.5;
    double omega_text = 7.5;
    int steps = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

/// v = v_uncond + omega_ref * (v_ref - v_uncond) + omega_text * (v_ref_text - v_ref).
LatentVideo cfg_combine(const LatentVideo& v_uncond, const LatentVideo& v_ref,
                        const LatentVideo& v_ref_text, const GuidanceConfig& cfg);

/// Velocity field queried by the integrator. Null refs/prompt mean the branch
/// is dropped from the token sequence entirely.
using DenoiserFn = std::function<LatentVideo(const LatentVideo& xt, double t,
                                             const ReferenceSet* refs, const Prompt* prompt)>;

struct SampleResult {
    LatentVideo latent;
    LatentVideo initial_noise;
    int denoiser_calls = 0;
};

/// Euler integration of the guided flow from t=1 (noise) down to t=0.
/// Three field queries per step: unconditional, refs-only, refs+text.
SampleResult sample(const DenoiserFn& field, const ReferenceSet* refs, const Prompt* prompt,
                    const LatentGrid& grid, const GuidanceConfig& cfg);

/// Convenience wrapper binding a Denoiser as the velocity field.
SampleResult sample(const Denoiser& model, const ReferenceSet* refs, const Prompt* prompt,
                    const LatentGrid& grid, const GuidanceConfig& cfg);

}  // namespace mvlab

#endif  // MVLAB_SAMPLER_HPP
