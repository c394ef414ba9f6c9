#pragma once

#include <cstdint>
#include <string>

namespace sld {

// Flat key = value configuration with typed validation. Unknown keys are
// rejected; every field carries an explicit range.
struct Config {
  // vocab
  long long min_count = 1;
  // shared shapes
  int h_lm = 64;
  int h_rep = 16;
  int k = 8;       // latent rows per segment
  int n = 4;       // segment slots per plan
  int m_seg = 16;  // per-segment token budget, BOS/EOS included
  int m_ctx = 16;  // conditioning token cap
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 4;
  int ffn_mult = 4;
  // denoiser
  int d_model = 64;
  int den_layers = 4;
  int den_heads = 4;
  // stage 1
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double tau = 0.05;
  double eps_adv = 1.0;
  double p_sub = 0.05;
  double s1_lr = 1e-3;
  int s1_epochs = 30;
  int s1_batch = 16;
  // stage 2
  int T = 200;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  double lambda3 = 0.1;
  double lambda4 = 0.1;
  double p_uncond = 0.1;
  double guidance_w = 2.0;
  double s2_lr = 1e-3;
  int s2_epochs = 400;
  int s2_batch = 10;
  // run
  uint64_t seed = 1;
  std::string mode = "sentence";
  std::string corpus_dir = "corpus";
  std::string ckpt_dir = "ckpt";

  static Config load(const std::string& path);
  void validate() const;
  // Sorted key=value dump; the identity the fingerprint hashes.
  std::string canonical() const;
  uint64_t fingerprint() const;
  void save(const std::string& path) const;
};

}  // namespace sld
