#pragma once

#include <cstdint>
#include <functional>

#include "mvc/caption.hpp"
#include "mvc/mixer.hpp"
#include "mvc/schedule.hpp"
#include "mvc/tensor.hpp"

namespace mvc {

struct GuidanceConfig {
    double w = 7.5;  // Stable Diffusion default guidance scale
};

struct SamplerOptions {
    // The reverse update is the deterministic posterior-mean step as printed;
    // ancestral noise (+sqrt(beta_t) * xi for t > 1) is opt-in.
    bool ancestral_noise = false;
    // The unconditional branch nulls only the text conditioning; enabling this
    // zeroes the image conditioning there as well.
    bool null_image_in_uncond = false;
};

// Denoiser evaluation hook: text == nullptr selects the null-text branch.
using NoisePredictor = std::function<LatentTensor(const LatentTensor& z, int t,
                                                  const EmbeddingMatrix* text,
                                                  const LatentTensor& image_cond)>;

// x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps. The caller supplies eps,
// so the op is pure. Per-element arithmetic runs in double and narrows.
LatentTensor forward_diffuse(const LatentTensor& x0, int t, const LatentTensor& eps,
                             const NoiseSchedule& schedule);

// || eps - predictor(x_t, t, e_T, e_I) ||^2 averaged over elements.
double training_loss(const NoisePredictor& predictor, const LatentTensor& z0, int t,
                     const LatentTensor& eps, const EmbeddingMatrix* text,
                     const LatentTensor& image_cond, const NoiseSchedule& schedule);

// w * eps_cond + (1 - w) * eps_uncond.
LatentTensor cfg_predict(const LatentTensor& eps_cond, const LatentTensor& eps_uncond, double w);

// z_{t-1} = (1/sqrt(alpha_t)) * (z_t - ((1-alpha_t)/sqrt(1-abar_t)) * eps_hat).
LatentTensor reverse_step(const LatentTensor& eps_hat, const LatentTensor& z_t, int t,
                          const NoiseSchedule& schedule);

struct SampleTrace {
    int denoiser_evaluations = 0;
};

// Full reverse loop: z_T ~ N(0, I) from the seeded stream, then for t = T..1
// evaluate the conditional and null-text branches, combine with
// classifier-free guidance and apply the reverse step. The same (text, image)
// conditioning is used at every step.
LatentTensor sample(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                    const MixedConditioning& cond, const LatentTensor& image_cond,
                    const GuidanceConfig& guidance, std::uint64_t seed,
                    const SamplerOptions& options = {}, SampleTrace* trace = nullptr);

// Same loop from a caller-provided z_T (used by tests and the toy runs).
LatentTensor sample_from(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                         const MixedConditioning& cond, const LatentTensor& image_cond,
                         const GuidanceConfig& guidance, LatentTensor z,
                         const SamplerOptions& options = {}, SampleTrace* trace = nullptr,
                         RngStream* ancestral_rng = nullptr);

LatentTensor gaussian_latent(const std::vector<int>& shape, RngStream& rng);

}  // namespace mvc
