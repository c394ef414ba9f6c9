#pragma once

#include <string>
#include <vector>

#include "sld/ops.hpp"
#include "sld/param_store.hpp"

namespace sld {

// Keep-mask over a score matrix; 0 entries get zero attention weight.
struct Mask {
  int rows = 0, cols = 0;
  std::vector<unsigned char> keep;
  static Mask causal(int len);
};

// Scaled dot-product attention core: softmax(q k^T / sqrt(d)) v. A fully
// masked query row emits zeros.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask);

struct LinearLayer {
  Tensor w;  // [in x out]
  Tensor b;  // [out]
};
Tensor linear(const LinearLayer& l, const Tensor& x);

struct LayerNormLayer {
  Tensor gain, bias;
};
Tensor norm(const LayerNormLayer& l, const Tensor& x);

struct MhaParams {
  int heads = 1;
  LinearLayer wq, wk, wv, wo;
};
// Multi-head attention, queries from q_in, keys/values from kv_in. Both must
// share the block width.
Tensor mha(const MhaParams& p, const Tensor& q_in, const Tensor& kv_in, const Mask* mask);

// Pre-norm residual wiring: x + mha(norm(x), kv, mask).
Tensor mha_block(const MhaParams& p, const LayerNormLayer& ln, const Tensor& x,
                 const Tensor& kv, const Mask* mask);

struct FfnParams {
  LinearLayer up, down;
};
// x + down(gelu(up(norm(x))))
Tensor ffn_block(const FfnParams& p, const LayerNormLayer& ln, const Tensor& x);

struct EncoderBlock {
  LayerNormLayer ln1;
  MhaParams attn;
  LayerNormLayer ln2;
  FfnParams ffn;
};
Tensor encoder_block(const EncoderBlock& b, const Tensor& x);

struct DecoderBlock {
  LayerNormLayer ln1;
  MhaParams self_attn;
  LayerNormLayer ln2;
  MhaParams cross_attn;
  LayerNormLayer ln3;
  FfnParams ffn;
};
Tensor decoder_block(const DecoderBlock& b, const Tensor& x, const Tensor& memory,
                     const Mask* causal);

Tensor sinusoidal_positions(int len, int dim);
Tensor sinusoidal_timestep(int t, int dim);  // [1 x dim]

LinearLayer make_linear(ParamStore& ps, const std::string& path, int in, int out, const Rng& rng);
LayerNormLayer make_norm(ParamStore& ps, const std::string& path, int dim);
MhaParams make_mha(ParamStore& ps, const std::string& path, int width, int heads, const Rng& rng);
FfnParams make_ffn(ParamStore& ps, const std::string& path, int width, int mult, const Rng& rng);
EncoderBlock make_encoder_block(ParamStore& ps, const std::string& path, int width, int heads,
                                int ffn_mult, const Rng& rng);
DecoderBlock make_decoder_block(ParamStore& ps, const std::string& path, int width, int heads,
                                int ffn_mult, const Rng& rng);

}  // namespace sld
