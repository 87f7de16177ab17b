#include "mvc/diffusion.hpp"

#include <cmath>

#include "mvc/errors.hpp"

namespace mvc {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    require(T >= 2, ErrorKind::invalid_argument, "schedule needs T >= 2");
    require(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0,
            ErrorKind::invalid_argument, "schedule needs 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(static_cast<std::size_t>(T));
    s.alpha.resize(static_cast<std::size_t>(T));
    s.alpha_bar.resize(static_cast<std::size_t>(T));
    double running = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double beta = beta_start + (beta_end - beta_start) * (t - 1) / T;
        const double alpha = 1.0 - beta;
        running *= alpha;
        s.beta[t - 1] = beta;
        s.alpha[t - 1] = alpha;
        s.alpha_bar[t - 1] = running;
    }
    return s;
}

LatentTensor forward_diffuse(const LatentTensor& x0, int t, const LatentTensor& eps,
                             const NoiseSchedule& schedule) {
    require_same_shape(x0, eps, "forward_diffuse");
    const double abar = schedule.alpha_bar_at(t);
    const double signal = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    LatentTensor out(x0.shape);
    for (std::size_t i = 0; i < x0.v.size(); ++i)
        out.v[i] = static_cast<float>(signal * static_cast<double>(x0.v[i]) +
                                      noise * static_cast<double>(eps.v[i]));
    return out;
}

double training_loss(const NoisePredictor& predictor, const LatentTensor& z0, int t,
                     const LatentTensor& eps, const EmbeddingMatrix* text,
                     const LatentTensor& image_cond, const NoiseSchedule& schedule) {
    const LatentTensor z_t = forward_diffuse(z0, t, eps, schedule);
    const LatentTensor pred = predictor(z_t, t, text, image_cond);
    require_same_shape(pred, eps, "training_loss prediction");
    double acc = 0.0;
    for (std::size_t i = 0; i < eps.v.size(); ++i) {
        const double r = static_cast<double>(eps.v[i]) - static_cast<double>(pred.v[i]);
        acc += r * r;
    }
    return acc / static_cast<double>(eps.v.size());
}

LatentTensor cfg_predict(const LatentTensor& eps_cond, const LatentTensor& eps_uncond, double w) {
    require_same_shape(eps_cond, eps_uncond, "cfg_predict");
    require(w >= 0.0, ErrorKind::invalid_argument, "guidance scale must be nonnegative");
    LatentTensor out(eps_cond.shape);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = static_cast<float>(w * static_cast<double>(eps_cond.v[i]) +
                                      (1.0 - w) * static_cast<double>(eps_uncond.v[i]));
    return out;
}

LatentTensor reverse_step(const LatentTensor& eps_hat, const LatentTensor& z_t, int t,
                          const NoiseSchedule& schedule) {
    require_same_shape(eps_hat, z_t, "reverse_step");
    const double alpha = schedule.alpha_at(t);
    const double abar = schedule.alpha_bar_at(t);
    require(abar < 1.0, ErrorKind::numeric, "reverse_step degenerate at alpha_bar = 1");
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    const double coeff = (1.0 - alpha) / std::sqrt(1.0 - abar);
    LatentTensor out(z_t.shape);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = static_cast<float>(
            inv_sqrt_alpha *
            (static_cast<double>(z_t.v[i]) - coeff * static_cast<double>(eps_hat.v[i])));
    return out;
}

LatentTensor gaussian_latent(const std::vector<int>& shape, RngStream& rng) {
    LatentTensor z(shape);
    for (float& x : z.v) x = static_cast<float>(rng.normal());
    return z;
}

LatentTensor sample_from(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                         const MixedConditioning& cond, const LatentTensor& image_cond,
                         const GuidanceConfig& guidance, LatentTensor z,
                         const SamplerOptions& options, SampleTrace* trace,
                         RngStream* ancestral_rng) {
    require(guidance.w >= 0.0, ErrorKind::config, "guidance scale must be nonnegative");
    LatentTensor null_image;
    if (options.null_image_in_uncond) null_image = LatentTensor(image_cond.shape);
    for (int t = schedule.T; t >= 1; --t) {
        const LatentTensor eps_cond = predictor(z, t, &cond.cond, image_cond);
        const LatentTensor eps_uncond =
            predictor(z, t, nullptr, options.null_image_in_uncond ? null_image : image_cond);
        if (trace) trace->denoiser_evaluations += 2;
        const LatentTensor eps_hat = cfg_predict(eps_cond, eps_uncond, guidance.w);
        z = reverse_step(eps_hat, z, t, schedule);
        if (options.ancestral_noise && t > 1) {
            require(ancestral_rng != nullptr, ErrorKind::config,
                    "ancestral sampling needs an rng stream");
            const double sigma = std::sqrt(schedule.beta_at(t));
            for (float& x : z.v) x = static_cast<float>(x + sigma * ancestral_rng->normal());
        }
        if (!z.all_finite())
            fail(ErrorKind::numeric,
                 "sampling diverged to non-finite values at t=" + std::to_string(t));
    }
    return z;
}

LatentTensor sample(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                    const MixedConditioning& cond, const LatentTensor& image_cond,
                    const GuidanceConfig& guidance, std::uint64_t seed,
                    const SamplerOptions& options, SampleTrace* trace) {
    RngStream rng(seed);
    LatentTensor z = gaussian_latent(image_cond.shape, rng);
    return sample_from(predictor, schedule, cond, image_cond, guidance, std::move(z), options,
                       trace, &rng);
}

}  // namespace mvc
