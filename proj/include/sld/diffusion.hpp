#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sld/autoencoder.hpp"

namespace sld {

// Linear-beta corruption schedule with cached cumulative products and DDPM
// posterior variances. Index 0 is the identity step (alpha_bar[0] = 1,
// post_var[1] = 0 so the last sampling step is deterministic).
struct NoiseSchedule {
  int T = 0;
  double beta_min = 0, beta_max = 0;
  std::vector<double> beta;       // [T+1], beta[0] unused
  std::vector<double> alpha;      // [T+1]
  std::vector<double> alpha_bar;  // [T+1]
  std::vector<double> post_var;   // [T+1]
};

NoiseSchedule build_schedule(int T, double beta_min, double beta_max);

// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) noise; t = 0 copies z0.
Tensor forward_corrupt(const Tensor& z0, int t, const Tensor& noise, const NoiseSchedule& s);

// Per-coordinate affine map fitted on real-segment latents so the diffusion
// prior is unit scale. destandardize participates in gradient flow.
struct Standardizer {
  int latent_len = 0, h_rep = 0;
  std::vector<Real> mean, stddev;  // latent_len * h_rep, stddev floored
  Tensor standardize(const Tensor& z) const;
  Tensor destandardize(const Tensor& z) const;
};

Standardizer fit_standardizer(const Autoencoder& m, const std::vector<std::string>& segments,
                              const Vocab& vocab);

struct DenoiserConfig {
  int h_rep = 16;
  int latent_len = 8;  // rows per slot
  int n_slots = 4;
  int d_model = 64;
  int layers = 4;
  int heads = 4;
  int ffn_mult = 4;
  int h_lm = 64;  // width of the context encoder states
};

// Transformer over the flattened n*latent_len latent tokens, cross-attending
// to context states from the frozen segment encoder. Predicts the clean plan.
struct Denoiser {
  DenoiserConfig cfg;
  ParamStore params;
  LinearLayer proj_in;   // h_rep -> d_model
  Tensor pos;            // constant, (n*latent_len) x d_model
  LinearLayer ctx_proj;  // h_lm -> d_model
  Tensor null_ctx;       // 1 x d_model, used for unconditional passes
  std::vector<DecoderBlock> blocks;
  LayerNormLayer final_ln;
  LinearLayer proj_out;  // d_model -> h_rep

  Denoiser() = default;
  Denoiser(const Denoiser&) = delete;
  Denoiser& operator=(const Denoiser&) = delete;
  Denoiser(Denoiser&&) = default;
  Denoiser& operator=(Denoiser&&) = default;
};

Denoiser make_denoiser(const DenoiserConfig& cfg, const Rng& init);

// Frozen-encoder states over the conditioning tokens (no compression).
Tensor context_states(const Autoencoder& frozen, const std::vector<int>& input_ids, int m_ctx);

// ctx == nullptr runs the unconditional pass against the learned null-context
// token. Output shape equals the input plan shape.
Tensor denoise_predict(const Denoiser& den, const Tensor& z_t, int t, const Tensor* ctx);

// uncond + w * (cond - uncond); w = 0 and w = 1 return exact copies.
Tensor cfg_combine(const Tensor& pred_cond, const Tensor& pred_uncond, Real w);

// DDPM posterior mean plus sigma-scaled noise; t = 1 is deterministic and
// returns the prediction exactly. rng == nullptr disables noise everywhere.
Tensor posterior_step(const Tensor& z_t, const Tensor& z0_hat, int t, const NoiseSchedule& s,
                      Rng* rng);

struct GuidanceConfig {
  Real w = (Real)2.0;
  Real p_uncond = (Real)0.1;
  Real lambda3 = (Real)0.1;
  Real lambda4 = (Real)0.1;
};

// One training example, precomputed against the frozen stage-1 model.
struct PlanExample {
  Tensor z0_std;        // (n*latent_len) x h_rep, standardized, constant
  SegmentBatch batch;   // collated target segments
  Tensor ctx;           // context states, constant
};

PlanExample make_plan_example(const Autoencoder& frozen, const Standardizer& st,
                              const Vocab& vocab, const Example& ex, SegmentMode mode, int n,
                              int m_seg, int m_ctx);

// || g(destd(pred_slot)) - g(destd(true_slot)) ||^2 mean over elements,
// every slot included. Gradients reach the denoiser only.
Tensor loss_rec_term(const Autoencoder& frozen, const Standardizer& st, const Tensor& pred_std,
                     const Tensor& z0_std, int latent_len);

// Teacher-forced NLL of the true tokens decoded from predicted latents,
// summed over real slots and averaged over tokens.
Tensor loss_dec_term(const Autoencoder& frozen, const Standardizer& st, const Tensor& pred_std,
                     const SegmentBatch& batch, int latent_len);

struct DiffusionEpochMetrics {
  double loss_noise = 0;
  double loss_rec = 0;
  double loss_dec = 0;
  double loss_total = 0;
  int steps = 0;
};

struct DiffusionHooks {
  // Runs after each backward pass, before the optimizer step.
  std::function<void(int step)> after_backward;
};

DiffusionEpochMetrics train_diffusion_epoch(Denoiser& den, const Autoencoder& frozen,
                                            const Standardizer& st,
                                            const std::vector<PlanExample>& examples,
                                            const NoiseSchedule& sched, const GuidanceConfig& g,
                                            AdamState& opt, Rng& rng, int batch_size,
                                            const DiffusionHooks* hooks = nullptr);

struct GenerationResult {
  std::string text;
  std::vector<std::string> segments;
  std::vector<Tensor> trajectory;  // standardized plans, T+1 entries when requested
};

GenerationResult sample_plan(const Autoencoder& frozen, const Denoiser& den,
                             const NoiseSchedule& sched, const Standardizer& st,
                             const Vocab& vocab, const std::vector<int>& input_ids,
                             const GuidanceConfig& g, SegmentMode mode, Rng& rng,
                             bool want_trajectory = false);

}  // namespace sld
