#include "sld/autoencoder.hpp"

#include <cmath>

#include "sld/error.hpp"
#include "sld/metrics.hpp"

namespace sld {

namespace {

// Temporarily stops gradient flow into every parameter under the prefixes.
class GradGate {
 public:
  GradGate(ParamStore& ps, std::initializer_list<const char*> prefixes) {
    for (size_t i = 0; i < ps.size(); ++i) {
      for (const char* p : prefixes) {
        if (ps.path(i).rfind(p, 0) == 0) {
          Tensor t = ps.param(i);
          saved_.emplace_back(t, t.requires_grad());
          t.set_requires_grad(false);
          break;
        }
      }
    }
  }
  ~GradGate() {
    for (auto& [t, had] : saved_) t.set_requires_grad(had);
  }

 private:
  std::vector<std::pair<Tensor, bool>> saved_;
};

}  // namespace

Autoencoder make_autoencoder(const AutoencoderConfig& cfg, const Rng& init) {
  if (cfg.vocab_size < Vocab::kReserved + 1) {
    throw ValidationError("autoencoder: vocab_size too small: " + std::to_string(cfg.vocab_size));
  }
  Autoencoder m;
  m.cfg = cfg;
  ParamStore& ps = m.params;
  const double es = 0.1;

  m.enc_embed = ps.create_normal("enc.embed", {cfg.vocab_size, cfg.h_lm}, init, es);
  m.enc_pos = sinusoidal_positions(cfg.m_seg, cfg.h_lm);
  for (int l = 0; l < cfg.enc_layers; ++l) {
    m.enc_blocks.push_back(
        make_encoder_block(ps, "enc.block" + std::to_string(l), cfg.h_lm, cfg.heads, cfg.ffn_mult, init));
  }
  m.enc_final = make_norm(ps, "enc.final", cfg.h_lm);

  m.cmp_queries = ps.create_normal("cmp.queries", {cfg.latent_len, cfg.h_lm}, init,
                                   1.0 / std::sqrt((double)cfg.h_lm));
  m.cmp_ln1 = make_norm(ps, "cmp.ln1", cfg.h_lm);
  m.cmp_attn = make_mha(ps, "cmp.attn", cfg.h_lm, cfg.heads, init);
  m.cmp_ln2 = make_norm(ps, "cmp.ln2", cfg.h_lm);
  m.cmp_ffn = make_ffn(ps, "cmp.ffn", cfg.h_lm, cfg.ffn_mult, init);
  m.cmp_proj = make_linear(ps, "cmp.proj", cfg.h_lm, cfg.h_rep, init);
  m.cmp_zn_gain = Tensor({cfg.h_rep}, (Real)1);
  m.cmp_zn_bias = Tensor({cfg.h_rep});

  m.rec_proj = make_linear(ps, "rec.proj", cfg.h_rep, cfg.h_lm, init);
  m.rec_queries = ps.create_normal("rec.queries", {cfg.latent_len, cfg.h_lm}, init,
                                   1.0 / std::sqrt((double)cfg.h_lm));
  m.rec_ln1 = make_norm(ps, "rec.ln1", cfg.h_lm);
  m.rec_attn = make_mha(ps, "rec.attn", cfg.h_lm, cfg.heads, init);
  m.rec_ln2 = make_norm(ps, "rec.ln2", cfg.h_lm);
  m.rec_ffn = make_ffn(ps, "rec.ffn", cfg.h_lm, cfg.ffn_mult, init);
  m.rec_final = make_norm(ps, "rec.final", cfg.h_lm);

  m.dec_embed = ps.create_normal("dec.embed", {cfg.vocab_size, cfg.h_lm}, init, es);
  m.dec_pos = sinusoidal_positions(cfg.m_seg, cfg.h_lm);
  for (int l = 0; l < cfg.dec_layers; ++l) {
    m.dec_blocks.push_back(
        make_decoder_block(ps, "dec.block" + std::to_string(l), cfg.h_lm, cfg.heads, cfg.ffn_mult, init));
  }
  m.dec_final = make_norm(ps, "dec.final", cfg.h_lm);
  m.dec_head = make_linear(ps, "dec.head", cfg.h_lm, cfg.vocab_size, init);

  m.z_empty = ps.create_normal("empty.z", {cfg.latent_len, cfg.h_rep}, init, 1.0);
  return m;
}

Tensor encode_tokens(const Autoencoder& m, const std::vector<int>& ids) {
  if (ids.empty() || (int)ids.size() > m.cfg.m_seg) {
    throw ValidationError("encode_tokens: input length " + std::to_string(ids.size()) +
                          " outside [1, " + std::to_string(m.cfg.m_seg) + "]");
  }
  Tensor x = embedding(m.enc_embed, ids);
  x = add(x, slice_rows(m.enc_pos, 0, (int)ids.size()));
  for (const auto& b : m.enc_blocks) x = encoder_block(b, x);
  return norm(m.enc_final, x);
}

Tensor compress_hidden(const Autoencoder& m, const Tensor& hidden) {
  Tensor x = m.cmp_queries;
  x = add(x, mha(m.cmp_attn, norm(m.cmp_ln1, x), hidden, nullptr));
  x = ffn_block(m.cmp_ffn, m.cmp_ln2, x);
  // fixed row norm: keeps latents on a unit scale so perturbation norms,
  // the empty latent and the diffusion prior all live in one geometry
  return layer_norm(linear(m.cmp_proj, x), m.cmp_zn_gain, m.cmp_zn_bias);
}

Tensor encode_segment(const Autoencoder& m, const std::vector<int>& ids) {
  return compress_hidden(m, encode_tokens(m, ids));
}

Tensor reconstruct_memory(const Autoencoder& m, const Tensor& z) {
  if (!all_finite(z)) throw RuntimeFailure("reconstruct_memory: non-finite latent");
  Tensor h = linear(m.rec_proj, z);
  Tensor x = m.rec_queries;
  x = add(x, mha(m.rec_attn, norm(m.rec_ln1, x), h, nullptr));
  x = ffn_block(m.rec_ffn, m.rec_ln2, x);
  return norm(m.rec_final, x);
}

namespace {

Tensor decoder_states(const Autoencoder& m, const Tensor& memory, const std::vector<int>& inputs) {
  Tensor x = embedding(m.dec_embed, inputs);
  x = add(x, slice_rows(m.dec_pos, 0, (int)inputs.size()));
  const Mask causal = Mask::causal((int)inputs.size());
  for (const auto& b : m.dec_blocks) x = decoder_block(b, x, memory, &causal);
  return norm(m.dec_final, x);
}

}  // namespace

Tensor teacher_logits(const Autoencoder& m, const Tensor& memory, const std::vector<int>& ids) {
  if (ids.size() < 2) throw ValidationError("teacher_logits: need at least [BOS, token]");
  if ((int)ids.size() > m.cfg.m_seg) {
    throw ValidationError("teacher_logits: sequence longer than m_seg");
  }
  std::vector<int> inputs(ids.begin(), ids.end() - 1);
  return linear(m.dec_head, decoder_states(m, memory, inputs));
}

std::vector<int> greedy_decode(const Autoencoder& m, const Tensor& memory) {
  NoGradGuard ng;
  std::vector<int> seq{Vocab::kBos};
  while ((int)seq.size() < m.cfg.m_seg) {
    Tensor logits = linear(m.dec_head, decoder_states(m, memory, seq));
    const Real* row = logits.data() + (int64_t)(logits.rows() - 1) * logits.cols();
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    if (best == Vocab::kEos) break;
    seq.push_back(best);
  }
  return std::vector<int>(seq.begin() + 1, seq.end());
}

DecodedSlot decode_latent(const Autoencoder& m, const Tensor& z, const Vocab& vocab) {
  NoGradGuard ng;
  DecodedSlot out;
  out.ids = greedy_decode(m, reconstruct_memory(m, z));
  out.text = detokenize(vocab.decode_words(out.ids));
  const bool marker = !out.ids.empty() && out.ids[0] == Vocab::kEmpty;
  bool near_empty = false;
  double nz = 0, ne = 0;
  for (Real v : z.values()) nz += (double)v * v;
  for (Real v : m.z_empty.values()) ne += (double)v * v;
  if (nz > 1e-24 && ne > 1e-24) {
    double d = 0;
    for (int64_t i = 0; i < z.size(); ++i) d += (double)z.data()[i] * m.z_empty.data()[i];
    near_empty = d / std::sqrt(nz * ne) > 0.9;
  }
  out.is_empty = marker || near_empty;
  return out;
}

Tensor loss_conversion(const Autoencoder& m, const std::vector<int>& ids, double p_sub, Rng& rng,
                       const Vocab& vocab) {
  const std::vector<int> noised = substitute_tokens(ids, p_sub, rng, vocab);
  Tensor z = encode_segment(m, noised);
  Tensor memory = reconstruct_memory(m, z);
  Tensor logits = teacher_logits(m, memory, ids);
  std::vector<int> targets(ids.begin() + 1, ids.end());
  return nll_rows(log_softmax_rows(logits), targets, Vocab::kPad, Reduce::kMean);
}

Tensor loss_contrastive(const Tensor& z, const Tensor& z_pos, const Tensor& z_neg, Real tau) {
  if (tau <= 0) throw ValidationError("loss_contrastive: tau must be positive");
  Tensor sim_pos = cosine(z, z_pos);
  Tensor sim_neg = cosine(z, z_neg);
  return softplus(scale(sub(sim_neg, sim_pos), (Real)(1.0 / tau)));
}

Tensor adversarial_perturbation(Autoencoder& m, const Tensor& z, const std::vector<int>& ids,
                                Real eps_adv) {
  if (eps_adv < 0) throw ValidationError("adversarial_perturbation: eps_adv must be >= 0");
  Tensor r(z.shape());
  if (eps_adv == 0) return r;

  // Gradient w.r.t. the latent under a frozen view of the output-side
  // parameters; this backward runs on its own graph.
  GradGate gate(m.params, {"rec.", "dec."});
  Tensor z_leaf = z.detach(true);
  z_leaf.zero_grad();
  Tensor memory = reconstruct_memory(m, z_leaf);
  Tensor logits = teacher_logits(m, memory, ids);
  std::vector<int> targets(ids.begin() + 1, ids.end());
  Tensor loglik = scale(nll_rows(log_softmax_rows(logits), targets, Vocab::kPad, Reduce::kSum), -1);
  backward(loglik);

  const std::vector<Real>& g = z_leaf.grad();
  double nrm = 0;
  for (Real x : g) nrm += (double)x * x;
  nrm = std::sqrt(nrm);
  if (nrm < 1e-12) return r;
  const double s = -(double)eps_adv / nrm;
  for (int64_t i = 0; i < r.size(); ++i) r.data()[i] = (Real)(s * (double)g[(size_t)i]);
  return r;
}

Tensor loss_adversarial(const Autoencoder& m, const Tensor& z, const Tensor& r_adv,
                        const std::vector<int>& ids) {
  if (z.shape() != r_adv.shape()) {
    throw ValidationError("loss_adversarial: latent/perturbation shape mismatch " +
                          shape_str(z.shape()) + " vs " + shape_str(r_adv.shape()));
  }
  Tensor z_in = add(z.detach(false), r_adv.detach(false));
  Tensor memory = reconstruct_memory(m, z_in);
  Tensor logits = teacher_logits(m, memory, ids);
  std::vector<int> targets(ids.begin() + 1, ids.end());
  return nll_rows(log_softmax_rows(logits), targets, Vocab::kPad, Reduce::kMean);
}

ReprEpochMetrics train_representation_epoch(Autoencoder& m, const std::vector<std::string>& segments,
                                            const TripleSource& triples, const ReprLossConfig& cfg,
                                            AdamState& opt, Rng& rng, const Vocab& vocab,
                                            int batch_size) {
  if (segments.empty()) throw ValidationError("train_representation_epoch: no segments");
  if (batch_size < 1) throw ValidationError("train_representation_epoch: batch_size must be >= 1");
  const bool use_cst = cfg.lambda1 > 0;
  const bool use_adv = cfg.lambda2 > 0;
  if (use_cst && (!triples.paraphrases || !triples.ood_pool || triples.ood_pool->empty())) {
    throw ValidationError("train_representation_epoch: contrastive loss needs paraphrases and OOD pool");
  }

  std::vector<size_t> order(segments.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng = rng.fork("shuffle");
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[(size_t)shuffle_rng.below(i)]);
  }

  ReprEpochMetrics ep;
  double sum_cnv = 0, sum_cst = 0, sum_adv = 0, sum_rep = 0;
  int64_t seg_count = 0;

  for (size_t start = 0; start < order.size(); start += (size_t)batch_size) {
    const size_t end = std::min(order.size(), start + (size_t)batch_size);
    m.params.zero_grad();
    std::vector<Tensor> terms;
    for (size_t bi = start; bi < end; ++bi) {
      const std::string& seg = segments[order[bi]];
      const std::vector<int> ids = segment_token_ids(vocab, seg, m.cfg.m_seg);
      Rng seg_rng = rng.fork("seg/" + std::to_string(order[bi]) + "/" + std::to_string(start));

      Tensor term = loss_conversion(m, ids, cfg.p_sub, seg_rng, vocab);
      sum_cnv += term.item();

      Tensor z_clean;
      if (use_cst || use_adv) z_clean = encode_segment(m, ids);

      if (use_cst) {
        ContrastiveTriple trip =
            make_contrastive_triple(seg, *triples.paraphrases, *triples.ood_pool, seg_rng);
        Tensor z_pos = encode_segment(m, segment_token_ids(vocab, trip.positive, m.cfg.m_seg));
        Tensor z_neg = encode_segment(m, segment_token_ids(vocab, trip.negative, m.cfg.m_seg));
        Tensor lc = loss_contrastive(z_clean, z_pos, z_neg, cfg.tau);
        sum_cst += lc.item();
        term = add(term, scale(lc, cfg.lambda1));
      }

      if (use_adv) {
        Tensor z_base = z_clean.detach(false);
        Tensor r = adversarial_perturbation(m, z_base, ids, cfg.eps_adv);
        Tensor la = loss_adversarial(m, z_base, r, ids);
        sum_adv += la.item();
        term = add(term, scale(la, cfg.lambda2));
      }

      sum_rep += term.item();
      ++seg_count;
      terms.push_back(term);
    }

    // One empty-slot pair per batch so z_empty decodes to the empty marker.
    // Jitter proportional to the latent's own scale widens the decode basin
    // enough to survive imperfect stage-2 predictions.
    {
      double rms = 0;
      for (Real x : m.z_empty.values()) rms += (double)x * x;
      rms = std::sqrt(rms / (double)m.z_empty.size());
      Rng jitter = rng.fork("empty/" + std::to_string(start));
      Tensor noise(m.z_empty.shape());
      for (Real& x : noise.values()) x = (Real)(0.3 * rms * jitter.normal());
      Tensor memory = reconstruct_memory(m, add(m.z_empty, noise));
      const std::vector<int> eids = empty_segment_ids();
      Tensor logits = teacher_logits(m, memory, eids);
      std::vector<int> targets(eids.begin() + 1, eids.end());
      terms.push_back(nll_rows(log_softmax_rows(logits), targets, Vocab::kPad, Reduce::kMean));
    }

    Tensor total = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
    total = scale(total, (Real)(1.0 / (double)terms.size()));
    if (!std::isfinite((double)total.item())) {
      throw RuntimeFailure("train_representation_epoch: non-finite loss, aborting");
    }
    backward(total);
    adam_update(m.params, opt);
    ++ep.steps;
  }

  ep.loss_cnv = sum_cnv / (double)seg_count;
  ep.loss_cst = use_cst ? sum_cst / (double)seg_count : 0.0;
  ep.loss_adv = use_adv ? sum_adv / (double)seg_count : 0.0;
  ep.loss_rep = sum_rep / (double)seg_count;
  return ep;
}

double roundtrip_bleu(const Autoencoder& m, const std::vector<std::string>& segments,
                      const Vocab& vocab) {
  if (segments.empty()) throw ValidationError("roundtrip_bleu: empty slice");
  NoGradGuard ng;
  std::vector<std::vector<std::string>> cands, refs;
  for (const std::string& seg : segments) {
    const std::vector<int> ids = segment_token_ids(vocab, seg, m.cfg.m_seg);
    Tensor memory = reconstruct_memory(m, encode_segment(m, ids));
    cands.push_back(vocab.decode_words(greedy_decode(m, memory)));
    std::vector<int> content(ids.begin() + 1, ids.end() - 1);
    refs.push_back(vocab.decode_words(content));
  }
  return bleu_corpus(cands, refs);
}

double token_accuracy(const std::vector<int>& decoded, const std::vector<int>& target_content) {
  if (target_content.empty()) return decoded.empty() ? 1.0 : 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < target_content.size() && i < decoded.size(); ++i) {
    if (decoded[i] == target_content[i]) ++hits;
  }
  return (double)hits / (double)target_content.size();
}

}  // namespace sld
