#include "sld/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "sld/error.hpp"

namespace sld {

NoiseSchedule build_schedule(int T, double beta_min, double beta_max) {
  if (T < 1) throw ValidationError("build_schedule: T must be >= 1");
  if (!(beta_min > 0) || !(beta_min <= beta_max) || !(beta_max < 1)) {
    throw ValidationError("build_schedule: need 0 < beta_min <= beta_max < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.beta.assign((size_t)T + 1, 0);
  s.alpha.assign((size_t)T + 1, 1);
  s.alpha_bar.assign((size_t)T + 1, 1);
  s.post_var.assign((size_t)T + 1, 0);
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : (double)(t - 1) / (double)(T - 1);
    s.beta[(size_t)t] = beta_min + frac * (beta_max - beta_min);
    s.alpha[(size_t)t] = 1.0 - s.beta[(size_t)t];
    s.alpha_bar[(size_t)t] = s.alpha_bar[(size_t)t - 1] * s.alpha[(size_t)t];
  }
  for (int t = 1; t <= T; ++t) {
    s.post_var[(size_t)t] =
        s.beta[(size_t)t] * (1.0 - s.alpha_bar[(size_t)t - 1]) / (1.0 - s.alpha_bar[(size_t)t]);
  }
  return s;
}

Tensor forward_corrupt(const Tensor& z0, int t, const Tensor& noise, const NoiseSchedule& s) {
  if (t < 0 || t > s.T) {
    throw ValidationError("forward_corrupt: t = " + std::to_string(t) + " outside [0, " +
                          std::to_string(s.T) + "]");
  }
  if (t == 0) return z0.detach(false);
  if (z0.shape() != noise.shape()) {
    throw ValidationError("forward_corrupt: noise shape " + shape_str(noise.shape()) +
                          " does not match " + shape_str(z0.shape()));
  }
  const double ab = s.alpha_bar[(size_t)t];
  const Real c0 = (Real)std::sqrt(ab);
  const Real cn = (Real)std::sqrt(1.0 - ab);
  Tensor out(z0.shape());
  for (int64_t i = 0; i < out.size(); ++i) {
    out.data()[i] = c0 * z0.data()[i] + cn * noise.data()[i];
  }
  return out;
}

Tensor Standardizer::standardize(const Tensor& z) const {
  const int dims = latent_len * h_rep;
  if (z.size() % dims != 0) {
    throw RuntimeFailure("standardize: tensor " + shape_str(z.shape()) +
                         " is not a stack of latents");
  }
  Tensor out(z.shape());
  for (int64_t i = 0; i < z.size(); ++i) {
    const int d = (int)(i % (int64_t)dims);
    out.data()[i] = (z.data()[i] - mean[(size_t)d]) / stddev[(size_t)d];
  }
  return out;
}

Tensor Standardizer::destandardize(const Tensor& z) const {
  const int dims = latent_len * h_rep;
  if (z.size() % dims != 0) {
    throw RuntimeFailure("destandardize: tensor " + shape_str(z.shape()) +
                         " is not a stack of latents");
  }
  Tensor sd(z.shape());
  Tensor mu(z.shape());
  for (int64_t i = 0; i < z.size(); ++i) {
    const int d = (int)(i % (int64_t)dims);
    sd.data()[i] = stddev[(size_t)d];
    mu.data()[i] = mean[(size_t)d];
  }
  return add(mul(z, sd), mu);
}

Standardizer fit_standardizer(const Autoencoder& m, const std::vector<std::string>& segments,
                              const Vocab& vocab) {
  if (segments.empty()) throw ValidationError("fit_standardizer: empty corpus");
  NoGradGuard ng;
  Standardizer st;
  st.latent_len = m.cfg.latent_len;
  st.h_rep = m.cfg.h_rep;
  const int dims = st.latent_len * st.h_rep;
  std::vector<double> sum(dims, 0), sumsq(dims, 0);
  for (const std::string& seg : segments) {
    Tensor z = encode_segment(m, segment_token_ids(vocab, seg, m.cfg.m_seg));
    for (int d = 0; d < dims; ++d) {
      const double v = z.data()[d];
      sum[(size_t)d] += v;
      sumsq[(size_t)d] += v * v;
    }
  }
  const double n = (double)segments.size();
  st.mean.resize((size_t)dims);
  st.stddev.resize((size_t)dims);
  for (int d = 0; d < dims; ++d) {
    const double mu = sum[(size_t)d] / n;
    const double var = std::max(0.0, sumsq[(size_t)d] / n - mu * mu);
    st.mean[(size_t)d] = (Real)mu;
    st.stddev[(size_t)d] = (Real)std::max(std::sqrt(var), 1e-6);
  }
  return st;
}

Denoiser make_denoiser(const DenoiserConfig& cfg, const Rng& init) {
  Denoiser d;
  d.cfg = cfg;
  ParamStore& ps = d.params;
  d.proj_in = make_linear(ps, "den.proj_in", cfg.h_rep, cfg.d_model, init);
  d.pos = sinusoidal_positions(cfg.n_slots * cfg.latent_len, cfg.d_model);
  d.ctx_proj = make_linear(ps, "den.ctx_proj", cfg.h_lm, cfg.d_model, init);
  d.null_ctx = ps.create_normal("den.null_ctx", {1, cfg.d_model}, init, 0.1);
  for (int l = 0; l < cfg.layers; ++l) {
    d.blocks.push_back(make_decoder_block(ps, "den.block" + std::to_string(l), cfg.d_model,
                                          cfg.heads, cfg.ffn_mult, init));
  }
  d.final_ln = make_norm(ps, "den.final", cfg.d_model);
  d.proj_out = make_linear(ps, "den.proj_out", cfg.d_model, cfg.h_rep, init);
  return d;
}

Tensor context_states(const Autoencoder& frozen, const std::vector<int>& input_ids, int m_ctx) {
  NoGradGuard ng;
  std::vector<int> ids = input_ids;
  const int cap = std::min(m_ctx, frozen.cfg.m_seg);
  if ((int)ids.size() > cap) ids.resize((size_t)cap);
  if (ids.empty()) ids.push_back(Vocab::kBos);
  return encode_tokens(frozen, ids);
}

Tensor denoise_predict(const Denoiser& den, const Tensor& z_t, int t, const Tensor* ctx) {
  const int plan_rows = den.cfg.n_slots * den.cfg.latent_len;
  if (z_t.shape() != Shape{plan_rows, den.cfg.h_rep}) {
    throw ValidationError("denoise_predict: plan shape " + shape_str(z_t.shape()) +
                          " does not match configured " + std::to_string(plan_rows) + "x" +
                          std::to_string(den.cfg.h_rep));
  }
  Tensor x = linear(den.proj_in, z_t);
  x = add(x, den.pos);
  Tensor temb = sinusoidal_timestep(t, den.cfg.d_model);
  x = add_rowvec(x, reshape(temb, {den.cfg.d_model}));
  Tensor memory = ctx ? linear(den.ctx_proj, *ctx) : den.null_ctx;
  for (const auto& b : den.blocks) x = decoder_block(b, x, memory, nullptr);
  x = norm(den.final_ln, x);
  return linear(den.proj_out, x);
}

Tensor cfg_combine(const Tensor& pred_cond, const Tensor& pred_uncond, Real w) {
  if (pred_cond.shape() != pred_uncond.shape()) {
    throw ValidationError("cfg_combine: shape mismatch " + shape_str(pred_cond.shape()) + " vs " +
                          shape_str(pred_uncond.shape()));
  }
  if (w == (Real)0) return pred_uncond.detach(false);
  if (w == (Real)1) return pred_cond.detach(false);
  Tensor out(pred_cond.shape());
  for (int64_t i = 0; i < out.size(); ++i) {
    out.data()[i] = pred_uncond.data()[i] + w * (pred_cond.data()[i] - pred_uncond.data()[i]);
  }
  return out;
}

Tensor posterior_step(const Tensor& z_t, const Tensor& z0_hat, int t, const NoiseSchedule& s,
                      Rng* rng) {
  if (t < 1 || t > s.T) {
    throw ValidationError("posterior_step: t = " + std::to_string(t) + " outside [1, " +
                          std::to_string(s.T) + "]");
  }
  if (z_t.shape() != z0_hat.shape()) {
    throw ValidationError("posterior_step: shape mismatch " + shape_str(z_t.shape()) + " vs " +
                          shape_str(z0_hat.shape()));
  }
  // At t = 1 the coefficients reduce algebraically to (1, 0) and the
  // posterior variance is zero: the step returns the prediction exactly.
  if (t == 1) return z0_hat.detach(false);
  const double ab_t = s.alpha_bar[(size_t)t];
  const double ab_prev = s.alpha_bar[(size_t)t - 1];
  const double beta_t = s.beta[(size_t)t];
  const double alpha_t = s.alpha[(size_t)t];
  const Real c0 = (Real)(std::sqrt(ab_prev) * beta_t / (1.0 - ab_t));
  const Real ct = (Real)(std::sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t));
  const Real sigma = (Real)std::sqrt(s.post_var[(size_t)t]);
  Tensor out(z_t.shape());
  for (int64_t i = 0; i < out.size(); ++i) {
    out.data()[i] = c0 * z0_hat.data()[i] + ct * z_t.data()[i];
  }
  if (rng) {
    for (int64_t i = 0; i < out.size(); ++i) out.data()[i] += sigma * (Real)rng->normal();
  }
  return out;
}

PlanExample make_plan_example(const Autoencoder& frozen, const Standardizer& st,
                              const Vocab& vocab, const Example& ex, SegmentMode mode, int n,
                              int m_seg, int m_ctx) {
  NoGradGuard ng;
  PlanExample pe;
  pe.batch = collate_segments(example_segments(ex, mode), n, m_seg, vocab);
  std::vector<Tensor> slots;
  for (int s = 0; s < n; ++s) {
    if (pe.batch.real[(size_t)s]) {
      slots.push_back(encode_segment(frozen, pe.batch.slot_tokens(s)));
    } else {
      slots.push_back(frozen.z_empty.detach(false));
    }
  }
  pe.z0_std = st.standardize(concat_rows(slots));
  pe.ctx = context_states(frozen, vocab.encode(tokenize(ex.input_text)), m_ctx);
  return pe;
}

Tensor loss_rec_term(const Autoencoder& frozen, const Standardizer& st, const Tensor& pred_std,
                     const Tensor& z0_std, int latent_len) {
  const int n = pred_std.rows() / latent_len;
  std::vector<Tensor> mem_pred, mem_true;
  for (int s = 0; s < n; ++s) {
    Tensor zp = st.destandardize(slice_rows(pred_std, s * latent_len, (s + 1) * latent_len));
    Tensor zt = st.destandardize(slice_rows(z0_std, s * latent_len, (s + 1) * latent_len));
    mem_pred.push_back(reconstruct_memory(frozen, zp));
    mem_true.push_back(reconstruct_memory(frozen, zt));
  }
  return mse(concat_rows(mem_pred), concat_rows(mem_true));
}

Tensor loss_dec_term(const Autoencoder& frozen, const Standardizer& st, const Tensor& pred_std,
                     const SegmentBatch& batch, int latent_len) {
  std::vector<Tensor> sums;
  int64_t tokens = 0;
  for (int s = 0; s < batch.n; ++s) {
    if (!batch.real[(size_t)s]) continue;
    Tensor z = st.destandardize(slice_rows(pred_std, s * latent_len, (s + 1) * latent_len));
    Tensor memory = reconstruct_memory(frozen, z);
    const std::vector<int> ids = batch.slot_tokens(s);
    Tensor logits = teacher_logits(frozen, memory, ids);
    std::vector<int> targets(ids.begin() + 1, ids.end());
    sums.push_back(nll_rows(log_softmax_rows(logits), targets, Vocab::kPad, Reduce::kSum));
    tokens += (int64_t)targets.size();
  }
  if (sums.empty()) return Tensor::scalar(0);
  Tensor total = sums[0];
  for (size_t i = 1; i < sums.size(); ++i) total = add(total, sums[i]);
  return scale(total, (Real)(1.0 / (double)tokens));
}

DiffusionEpochMetrics train_diffusion_epoch(Denoiser& den, const Autoencoder& frozen,
                                            const Standardizer& st,
                                            const std::vector<PlanExample>& examples,
                                            const NoiseSchedule& sched, const GuidanceConfig& g,
                                            AdamState& opt, Rng& rng, int batch_size,
                                            const DiffusionHooks* hooks) {
  if (examples.empty()) throw ValidationError("train_diffusion_epoch: no examples");
  if (batch_size < 1) throw ValidationError("train_diffusion_epoch: batch_size must be >= 1");

  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng = rng.fork("shuffle");
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[(size_t)shuffle_rng.below(i)]);
  }

  DiffusionEpochMetrics ep;
  double sum_noise = 0, sum_rec = 0, sum_dec = 0, sum_total = 0;
  int64_t count = 0;

  for (size_t start = 0; start < order.size(); start += (size_t)batch_size) {
    const size_t end = std::min(order.size(), start + (size_t)batch_size);
    den.params.zero_grad();
    std::vector<Tensor> terms;
    for (size_t bi = start; bi < end; ++bi) {
      const PlanExample& pe = examples[order[bi]];
      Rng ex_rng = rng.fork("ex/" + std::to_string(order[bi]) + "/" + std::to_string(start));
      const int t = 1 + (int)ex_rng.below((uint64_t)sched.T);
      Tensor noise = gaussian_tensor(ex_rng, pe.z0_std.shape());
      Tensor z_t = forward_corrupt(pe.z0_std, t, noise, sched);
      const bool uncond = ex_rng.uniform() < (double)g.p_uncond;
      Tensor pred = denoise_predict(den, z_t, t, uncond ? nullptr : &pe.ctx);
      Tensor l_noise = mse(pred, pe.z0_std);
      Tensor term = l_noise;
      sum_noise += l_noise.item();
      if (g.lambda3 > 0) {
        Tensor l_rec = loss_rec_term(frozen, st, pred, pe.z0_std, frozen.cfg.latent_len);
        sum_rec += l_rec.item();
        term = add(term, scale(l_rec, g.lambda3));
      }
      if (g.lambda4 > 0) {
        Tensor l_dec = loss_dec_term(frozen, st, pred, pe.batch, frozen.cfg.latent_len);
        sum_dec += l_dec.item();
        term = add(term, scale(l_dec, g.lambda4));
      }
      sum_total += term.item();
      ++count;
      terms.push_back(term);
    }
    Tensor total = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
    total = scale(total, (Real)(1.0 / (double)terms.size()));
    if (!std::isfinite((double)total.item())) {
      throw RuntimeFailure("train_diffusion_epoch: non-finite loss, aborting");
    }
    backward(total);
    if (hooks && hooks->after_backward) hooks->after_backward(ep.steps);
    adam_update(den.params, opt);
    ++ep.steps;
  }

  ep.loss_noise = sum_noise / (double)count;
  ep.loss_rec = sum_rec / (double)count;
  ep.loss_dec = sum_dec / (double)count;
  ep.loss_total = sum_total / (double)count;
  return ep;
}

GenerationResult sample_plan(const Autoencoder& frozen, const Denoiser& den,
                             const NoiseSchedule& sched, const Standardizer& st,
                             const Vocab& vocab, const std::vector<int>& input_ids,
                             const GuidanceConfig& g, SegmentMode mode, Rng& rng,
                             bool want_trajectory) {
  NoGradGuard ng;
  GenerationResult res;
  const int rows = den.cfg.n_slots * den.cfg.latent_len;
  Tensor z = gaussian_tensor(rng, {rows, den.cfg.h_rep});
  Tensor ctx = context_states(frozen, input_ids, frozen.cfg.m_seg);
  if (want_trajectory) res.trajectory.push_back(z.detach(false));
  for (int t = sched.T; t >= 1; --t) {
    Tensor pred_cond = denoise_predict(den, z, t, &ctx);
    Tensor pred_uncond = denoise_predict(den, z, t, nullptr);
    Tensor z0_hat = cfg_combine(pred_cond, pred_uncond, g.w);
    z = posterior_step(z, z0_hat, t, sched, &rng);
    if (want_trajectory) res.trajectory.push_back(z.detach(false));
  }
  for (int s = 0; s < den.cfg.n_slots; ++s) {
    Tensor z_slot = st.destandardize(slice_rows(z, s * den.cfg.latent_len, (s + 1) * den.cfg.latent_len));
    DecodedSlot slot = decode_latent(frozen, z_slot, vocab);
    if (slot.is_empty) continue;
    res.segments.push_back(slot.text);
  }
  const std::string joiner = segment_joiner(mode);
  for (size_t i = 0; i < res.segments.size(); ++i) {
    if (i) res.text += joiner;
    res.text += res.segments[i];
  }
  return res;
}

}  // namespace sld
