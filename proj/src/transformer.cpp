#include "sld/transformer.hpp"

#include <cmath>

#include "sld/error.hpp"

namespace sld {

Mask Mask::causal(int len) {
  Mask m;
  m.rows = len;
  m.cols = len;
  m.keep.assign((size_t)len * len, 0);
  for (int i = 0; i < len; ++i) {
    for (int j = 0; j <= i; ++j) m.keep[(size_t)i * len + j] = 1;
  }
  return m;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask) {
  if (q.cols() != k.cols()) {
    throw ValidationError("attention: query/key width mismatch " + shape_str(q.shape()) +
                          " vs " + shape_str(k.shape()));
  }
  if (k.rows() != v.rows()) {
    throw ValidationError("attention: key/value length mismatch " + shape_str(k.shape()) +
                          " vs " + shape_str(v.shape()));
  }
  if (mask && (mask->rows != q.rows() || mask->cols != k.rows())) {
    throw ValidationError("attention: mask shape " + std::to_string(mask->rows) + "x" +
                          std::to_string(mask->cols) + " does not match scores " +
                          std::to_string(q.rows()) + "x" + std::to_string(k.rows()));
  }
  Tensor scores = scale(matmul(q, transpose(k)), (Real)(1.0 / std::sqrt((double)q.cols())));
  Tensor probs = mask ? softmax_rows_masked(scores, mask->keep) : softmax_rows(scores);
  return matmul(probs, v);
}

Tensor linear(const LinearLayer& l, const Tensor& x) { return add_rowvec(matmul(x, l.w), l.b); }

Tensor norm(const LayerNormLayer& l, const Tensor& x) { return layer_norm(x, l.gain, l.bias); }

Tensor mha(const MhaParams& p, const Tensor& q_in, const Tensor& kv_in, const Mask* mask) {
  if (q_in.cols() != kv_in.cols()) {
    throw ValidationError("mha: query/memory width mismatch " + shape_str(q_in.shape()) +
                          " vs " + shape_str(kv_in.shape()));
  }
  const int width = (int)p.wq.w.cols();
  const int dh = width / p.heads;
  Tensor q = linear(p.wq, q_in);
  Tensor k = linear(p.wk, kv_in);
  Tensor v = linear(p.wv, kv_in);
  std::vector<Tensor> heads;
  heads.reserve((size_t)p.heads);
  for (int h = 0; h < p.heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    heads.push_back(attention(qh, kh, vh, mask));
  }
  return linear(p.wo, concat_cols(heads));
}

Tensor mha_block(const MhaParams& p, const LayerNormLayer& ln, const Tensor& x,
                 const Tensor& kv, const Mask* mask) {
  return add(x, mha(p, norm(ln, x), kv, mask));
}

Tensor ffn_block(const FfnParams& p, const LayerNormLayer& ln, const Tensor& x) {
  return add(x, linear(p.down, gelu(linear(p.up, norm(ln, x)))));
}

Tensor encoder_block(const EncoderBlock& b, const Tensor& x) {
  Tensor h = norm(b.ln1, x);
  Tensor y = add(x, mha(b.attn, h, h, nullptr));
  return ffn_block(b.ffn, b.ln2, y);
}

Tensor decoder_block(const DecoderBlock& b, const Tensor& x, const Tensor& memory,
                     const Mask* causal) {
  Tensor h = norm(b.ln1, x);
  Tensor y = add(x, mha(b.self_attn, h, h, causal));
  y = add(y, mha(b.cross_attn, norm(b.ln2, y), memory, nullptr));
  return ffn_block(b.ffn, b.ln3, y);
}

Tensor sinusoidal_positions(int len, int dim) {
  Tensor pe({len, dim});
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -(double)i / dim);
      pe.at(pos, i) = (Real)std::sin(pos * freq);
      if (i + 1 < dim) pe.at(pos, i + 1) = (Real)std::cos(pos * freq);
    }
  }
  return pe;
}

Tensor sinusoidal_timestep(int t, int dim) {
  Tensor e({1, dim});
  for (int i = 0; i < dim; i += 2) {
    const double freq = std::pow(10000.0, -(double)i / dim);
    e.at(0, i) = (Real)std::sin(t * freq);
    if (i + 1 < dim) e.at(0, i + 1) = (Real)std::cos(t * freq);
  }
  return e;
}

LinearLayer make_linear(ParamStore& ps, const std::string& path, int in, int out, const Rng& rng) {
  LinearLayer l;
  l.w = ps.create_normal(path + ".w", {in, out}, rng, 1.0 / std::sqrt((double)in));
  l.b = ps.create(path + ".b", {out});
  return l;
}

LayerNormLayer make_norm(ParamStore& ps, const std::string& path, int dim) {
  LayerNormLayer l;
  l.gain = ps.create_const(path + ".gain", {dim}, 1);
  l.bias = ps.create(path + ".bias", {dim});
  return l;
}

MhaParams make_mha(ParamStore& ps, const std::string& path, int width, int heads, const Rng& rng) {
  if (heads < 1 || width % heads != 0) {
    throw ValidationError("mha: width " + std::to_string(width) + " not divisible by heads " +
                          std::to_string(heads));
  }
  MhaParams p;
  p.heads = heads;
  p.wq = make_linear(ps, path + ".wq", width, width, rng);
  p.wk = make_linear(ps, path + ".wk", width, width, rng);
  p.wv = make_linear(ps, path + ".wv", width, width, rng);
  p.wo = make_linear(ps, path + ".wo", width, width, rng);
  return p;
}

FfnParams make_ffn(ParamStore& ps, const std::string& path, int width, int mult, const Rng& rng) {
  FfnParams p;
  p.up = make_linear(ps, path + ".up", width, width * mult, rng);
  p.down = make_linear(ps, path + ".down", width * mult, width, rng);
  return p;
}

EncoderBlock make_encoder_block(ParamStore& ps, const std::string& path, int width, int heads,
                                int ffn_mult, const Rng& rng) {
  EncoderBlock b;
  b.ln1 = make_norm(ps, path + ".ln1", width);
  b.attn = make_mha(ps, path + ".attn", width, heads, rng);
  b.ln2 = make_norm(ps, path + ".ln2", width);
  b.ffn = make_ffn(ps, path + ".ffn", width, ffn_mult, rng);
  return b;
}

DecoderBlock make_decoder_block(ParamStore& ps, const std::string& path, int width, int heads,
                                int ffn_mult, const Rng& rng) {
  DecoderBlock b;
  b.ln1 = make_norm(ps, path + ".ln1", width);
  b.self_attn = make_mha(ps, path + ".self", width, heads, rng);
  b.ln2 = make_norm(ps, path + ".ln2", width);
  b.cross_attn = make_mha(ps, path + ".cross", width, heads, rng);
  b.ln3 = make_norm(ps, path + ".ln3", width);
  b.ffn = make_ffn(ps, path + ".ffn", width, ffn_mult, rng);
  return b;
}

}  // namespace sld
