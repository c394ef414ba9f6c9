#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sld/adam.hpp"
#include "sld/corpus.hpp"
#include "sld/transformer.hpp"

namespace sld {

struct AutoencoderConfig {
  int vocab_size = 0;
  int h_lm = 64;
  int h_rep = 16;
  int latent_len = 8;  // rows of a segment latent
  int m_seg = 16;
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 4;
  int ffn_mult = 4;
};

// Segment autoencoder: bidirectional encoder -> fixed-size latent via learned
// query cross-attention -> expansion back to decoder memory -> causal decoder
// with a vocab head. Parameter prefixes partition the trainable groups:
//   enc.* cmp.*   encoding and compression ("input" side)
//   rec.* dec.*   reconstruction and decoding ("output" side)
//   empty.z       learned latent for padded slots
struct Autoencoder {
  AutoencoderConfig cfg;
  ParamStore params;

  Tensor enc_embed;  // vocab x h_lm
  Tensor enc_pos;    // constant, m_seg x h_lm
  std::vector<EncoderBlock> enc_blocks;
  LayerNormLayer enc_final;

  Tensor cmp_queries;  // latent_len x h_lm
  LayerNormLayer cmp_ln1;
  MhaParams cmp_attn;
  LayerNormLayer cmp_ln2;
  FfnParams cmp_ffn;
  LinearLayer cmp_proj;  // h_lm -> h_rep
  Tensor cmp_zn_gain, cmp_zn_bias;  // constant row norm pinning latent scale

  LinearLayer rec_proj;  // h_rep -> h_lm
  Tensor rec_queries;    // latent_len x h_lm
  LayerNormLayer rec_ln1;
  MhaParams rec_attn;
  LayerNormLayer rec_ln2;
  FfnParams rec_ffn;
  LayerNormLayer rec_final;

  Tensor dec_embed;  // vocab x h_lm
  Tensor dec_pos;    // constant, m_seg x h_lm
  std::vector<DecoderBlock> dec_blocks;
  LayerNormLayer dec_final;
  LinearLayer dec_head;  // h_lm -> vocab

  Tensor z_empty;  // latent_len x h_rep

  Autoencoder() = default;
  Autoencoder(const Autoencoder&) = delete;
  Autoencoder& operator=(const Autoencoder&) = delete;
  Autoencoder(Autoencoder&&) = default;
  Autoencoder& operator=(Autoencoder&&) = default;
};

Autoencoder make_autoencoder(const AutoencoderConfig& cfg, const Rng& init);

// Per-token contextual states, rows = input length. Input must have between
// 1 and m_seg tokens.
Tensor encode_tokens(const Autoencoder& m, const std::vector<int>& ids);
// Fixed-shape latent regardless of input length.
Tensor compress_hidden(const Autoencoder& m, const Tensor& hidden);
Tensor encode_segment(const Autoencoder& m, const std::vector<int>& ids);
// Decoder memory (latent_len x h_lm).
Tensor reconstruct_memory(const Autoencoder& m, const Tensor& z);
// Teacher-forced logits: row l scores token ids[l+1] given ids[0..l].
Tensor teacher_logits(const Autoencoder& m, const Tensor& memory, const std::vector<int>& ids);
// Content ids after BOS, stopping at EOS or the length cap. EOS not included.
std::vector<int> greedy_decode(const Autoencoder& m, const Tensor& memory);

struct DecodedSlot {
  std::vector<int> ids;
  std::string text;
  bool is_empty = false;  // decode starts with the empty marker or z ~ z_empty
};
DecodedSlot decode_latent(const Autoencoder& m, const Tensor& z, const Vocab& vocab);

struct ReprLossConfig {
  Real lambda1 = (Real)0.1;  // contrastive weight
  Real lambda2 = (Real)0.1;  // adversarial weight
  Real tau = (Real)0.05;
  Real eps_adv = (Real)1.0;
  Real p_sub = (Real)0.05;
};

// Mean token NLL of the clean targets decoded from the latent of the
// substitution-noised input.
Tensor loss_conversion(const Autoencoder& m, const std::vector<int>& ids, double p_sub, Rng& rng,
                       const Vocab& vocab);

// -log( e^{s+/tau} / (e^{s+/tau} + e^{s-/tau}) ) with cosine similarity over
// flattened latents.
Tensor loss_contrastive(const Tensor& z, const Tensor& z_pos, const Tensor& z_neg, Real tau);

// r_adv = -eps * grad / ||grad||, where grad is d(sum log p(target))/dz under
// a frozen view of the reconstruction/decoding parameters. Near-zero
// gradients yield a zero perturbation.
Tensor adversarial_perturbation(Autoencoder& m, const Tensor& z, const std::vector<int>& ids,
                                Real eps_adv);

// Teacher-forced mean NLL decoded from z + r_adv; gradients reach only the
// reconstruction/decoding parameters.
Tensor loss_adversarial(const Autoencoder& m, const Tensor& z, const Tensor& r_adv,
                        const std::vector<int>& ids);

struct TripleSource {
  const std::unordered_map<std::string, std::string>* paraphrases = nullptr;
  const std::vector<std::string>* ood_pool = nullptr;
};

struct ReprEpochMetrics {
  double loss_cnv = 0;
  double loss_cst = 0;
  double loss_adv = 0;
  double loss_rep = 0;
  int steps = 0;
};

ReprEpochMetrics train_representation_epoch(Autoencoder& m, const std::vector<std::string>& segments,
                                            const TripleSource& triples, const ReprLossConfig& cfg,
                                            AdamState& opt, Rng& rng, const Vocab& vocab,
                                            int batch_size);

// Corpus-level smoothed 4-gram BLEU between segments and their greedy
// round-trip decodes.
double roundtrip_bleu(const Autoencoder& m, const std::vector<std::string>& segments,
                      const Vocab& vocab);

// Fraction of target content tokens reproduced at their positions.
double token_accuracy(const std::vector<int>& decoded, const std::vector<int>& target_content);

}  // namespace sld
