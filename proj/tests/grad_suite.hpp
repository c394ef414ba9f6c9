// Finite-difference gradient sweeps shared by the 64-bit unit tests and the
// acceptance suite: every differentiable op over random small inputs, then
// the composed training losses on toy shapes.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sld/autoencoder.hpp"
#include "sld/diffusion.hpp"
#include "sld/grad_check.hpp"
#include "sld/ops.hpp"
#include "sld/transformer.hpp"

namespace gradsuite {

using namespace sld;

struct Result {
  std::string name;
  double max_rel_err = 0;
  int checked = 0;
  bool pass = false;
};

constexpr double kTol = 1e-4;

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (Real& x : t.values()) x = (Real)(rng.normal() * scale);
  return t;
}

// Scalar-izes a tensor against fixed random weights so every output element
// affects the loss.
inline std::function<Tensor(const Tensor&)> make_probe(Rng& rng, Shape shape) {
  Tensor w = random_tensor(rng, std::move(shape));
  return [w](const Tensor& t) { return dot(t, w); };
}

// One op family: `build` creates fresh leaves and returns the loss closure.
using CaseBuilder = std::function<std::function<Tensor()>(Rng&, std::vector<Tensor>&)>;

inline Result sweep_op(const std::string& name, const CaseBuilder& build, int trials) {
  Result res;
  res.name = name;
  res.pass = true;
  Rng rng(fnv1a64(name), "sweep");
  for (int t = 0; t < trials; ++t) {
    std::vector<Tensor> leaves;
    auto f = build(rng, leaves);
    GradCheckReport rep = grad_check(f, leaves, kTol, 1e-4, -1, rng.fork(t));
    res.checked += rep.checked;
    if (rep.max_rel_err > res.max_rel_err) res.max_rel_err = rep.max_rel_err;
    res.pass = res.pass && rep.pass;
  }
  return res;
}

inline int rdim(Rng& rng) { return 1 + (int)rng.below(8); }

inline std::vector<Result> run_op_sweeps(int trials) {
  std::vector<Result> out;
  auto leaf = [](Rng& rng, std::vector<Tensor>& leaves, Shape shape, double scale = 1.0) {
    leaves.push_back(random_tensor(rng, std::move(shape), scale));
    return leaves.back();
  };

  out.push_back(sweep_op("add", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c}), b = leaf(rng, L, {r, c});
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(add(a, b)); });
  }, trials));

  out.push_back(sweep_op("sub", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c}), b = leaf(rng, L, {r, c});
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(sub(a, b)); });
  }, trials));

  out.push_back(sweep_op("mul", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c}), b = leaf(rng, L, {r, c});
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(mul(a, b)); });
  }, trials));

  out.push_back(sweep_op("div", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c});
    Tensor b = random_tensor(rng, {r, c});
    for (Real& x : b.values()) x = x >= 0 ? x + (Real)0.5 : x - (Real)0.5;
    L.push_back(b);
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(div(a, b)); });
  }, trials));

  out.push_back(sweep_op("scale", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c});
    const Real s = (Real)(rng.normal() * 2);
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(scale(a, s)); });
  }, trials));

  out.push_back(sweep_op("add_rowvec", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor m = leaf(rng, L, {r, c}), v = leaf(rng, L, {c});
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(add_rowvec(m, v)); });
  }, trials));

  out.push_back(sweep_op("matmul", [&](Rng& rng, std::vector<Tensor>& L) {
    const int m = rdim(rng), k = rdim(rng), n = rdim(rng);
    Tensor a = leaf(rng, L, {m, k}), b = leaf(rng, L, {k, n});
    auto probe = make_probe(rng, {m, n});
    return std::function<Tensor()>([=] { return probe(matmul(a, b)); });
  }, trials));

  out.push_back(sweep_op("transpose", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c});
    auto probe = make_probe(rng, {c, r});
    return std::function<Tensor()>([=] { return probe(transpose(a)); });
  }, trials));

  out.push_back(sweep_op("reshape", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c});
    auto probe = make_probe(rng, {r * c});
    return std::function<Tensor()>([=] { return probe(reshape(a, {r * c})); });
  }, trials));

  out.push_back(sweep_op("slice_concat_rows", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = 2 + (int)rng.below(6), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c});
    const int cut = 1 + (int)rng.below((uint64_t)(r - 1));
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] {
      Tensor top = slice_rows(a, 0, cut);
      Tensor bottom = slice_rows(a, cut, r);
      return probe(concat_rows({bottom, top}));
    });
  }, trials));

  out.push_back(sweep_op("slice_concat_cols", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = 2 + (int)rng.below(6);
    Tensor a = leaf(rng, L, {r, c});
    const int cut = 1 + (int)rng.below((uint64_t)(c - 1));
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] {
      Tensor lhs = slice_cols(a, 0, cut);
      Tensor rhs = slice_cols(a, cut, c);
      return probe(concat_cols({rhs, lhs}));
    });
  }, trials));

  out.push_back(sweep_op("sum", [&](Rng& rng, std::vector<Tensor>& L) {
    Tensor a = leaf(rng, L, {rdim(rng), rdim(rng)});
    return std::function<Tensor()>([=] { return sum(a); });
  }, trials));

  out.push_back(sweep_op("mean", [&](Rng& rng, std::vector<Tensor>& L) {
    Tensor a = leaf(rng, L, {rdim(rng), rdim(rng)});
    return std::function<Tensor()>([=] { return mean(a); });
  }, trials));

  out.push_back(sweep_op("mse", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c}), b = leaf(rng, L, {r, c});
    return std::function<Tensor()>([=] { return mse(a, b); });
  }, trials));

  out.push_back(sweep_op("softmax_rows", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c});
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(softmax_rows(a)); });
  }, trials));

  out.push_back(sweep_op("softmax_rows_masked", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = 1 + (int)rng.below(7);
    Tensor a = leaf(rng, L, {r, c});
    std::vector<unsigned char> keep((size_t)r * c, 0);
    for (int i = 0; i < r; ++i) {
      keep[(size_t)i * c + (size_t)rng.below((uint64_t)c)] = 1;  // at least one kept
      for (int j = 0; j < c; ++j) {
        if (rng.uniform() < 0.5) keep[(size_t)i * c + j] = 1;
      }
    }
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(softmax_rows_masked(a, keep)); });
  }, trials));

  out.push_back(sweep_op("log_softmax_rows", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c});
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(log_softmax_rows(a)); });
  }, trials));

  out.push_back(sweep_op("layer_norm", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = 2 + (int)rng.below(6);
    Tensor x = leaf(rng, L, {r, c}), g = leaf(rng, L, {c}), b = leaf(rng, L, {c});
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(layer_norm(x, g, b)); });
  }, trials));

  out.push_back(sweep_op("gelu", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c});
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(gelu(a)); });
  }, trials));

  out.push_back(sweep_op("softplus", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = rdim(rng);
    Tensor a = leaf(rng, L, {r, c});
    auto probe = make_probe(rng, {r, c});
    return std::function<Tensor()>([=] { return probe(softplus(a)); });
  }, trials));

  out.push_back(sweep_op("embedding", [&](Rng& rng, std::vector<Tensor>& L) {
    const int v = 2 + (int)rng.below(6), h = rdim(rng), m = rdim(rng);
    Tensor table = leaf(rng, L, {v, h});
    std::vector<int> ids((size_t)m);
    for (int& id : ids) id = (int)rng.below((uint64_t)v);
    auto probe = make_probe(rng, {m, h});
    return std::function<Tensor()>([=] { return probe(embedding(table, ids)); });
  }, trials));

  out.push_back(sweep_op("nll_rows", [&](Rng& rng, std::vector<Tensor>& L) {
    const int r = rdim(rng), c = 2 + (int)rng.below(6);
    Tensor logits = leaf(rng, L, {r, c});
    std::vector<int> targets((size_t)r);
    for (int& t : targets) t = (int)rng.below((uint64_t)c);
    return std::function<Tensor()>(
        [=] { return nll_rows(log_softmax_rows(logits), targets, -1, Reduce::kMean); });
  }, trials));

  out.push_back(sweep_op("dot", [&](Rng& rng, std::vector<Tensor>& L) {
    const int n = rdim(rng);
    Tensor a = leaf(rng, L, {n}), b = leaf(rng, L, {n});
    return std::function<Tensor()>([=] { return dot(a, b); });
  }, trials));

  out.push_back(sweep_op("l2norm", [&](Rng& rng, std::vector<Tensor>& L) {
    const int n = 2 + (int)rng.below(6);
    Tensor a = random_tensor(rng, {n});
    a.data()[0] += a.data()[0] >= 0 ? (Real)0.5 : (Real)-0.5;  // keep away from zero norm
    L.push_back(a);
    return std::function<Tensor()>([=] { return l2norm(a); });
  }, trials));

  out.push_back(sweep_op("cosine", [&](Rng& rng, std::vector<Tensor>& L) {
    const int n = 2 + (int)rng.below(6);
    Tensor a = random_tensor(rng, {n}), b = random_tensor(rng, {n});
    a.data()[0] += a.data()[0] >= 0 ? (Real)1 : (Real)-1;
    b.data()[0] += b.data()[0] >= 0 ? (Real)1 : (Real)-1;
    L.push_back(a);
    L.push_back(b);
    return std::function<Tensor()>([=] { return cosine(a, b); });
  }, trials));

  out.push_back(sweep_op("attention", [&](Rng& rng, std::vector<Tensor>& L) {
    const int lq = rdim(rng), lk = rdim(rng), d = 1 + (int)rng.below(7), dv = rdim(rng);
    Tensor q = leaf(rng, L, {lq, d}, 0.7), k = leaf(rng, L, {lk, d}, 0.7);
    Tensor v = leaf(rng, L, {lk, dv});
    auto probe = make_probe(rng, {lq, dv});
    return std::function<Tensor()>([=] { return probe(attention(q, k, v, nullptr)); });
  }, trials));

  return out;
}

// ---- composed losses on toy shapes -----------------------------------------

struct ToyWorld {
  Vocab vocab;
  Autoencoder ae;
  std::vector<int> ids;       // a short real segment
  std::vector<int> pos_ids;   // paraphrase-like segment
  std::vector<int> neg_ids;   // out-of-domain segment
};

inline ToyWorld make_toy_world() {
  ToyWorld w;
  w.vocab = Vocab::build_from_counts(
      {{"a", 9}, {"b", 8}, {"c", 7}, {"d", 6}, {"e", 5}, {"f", 4}}, 1);
  AutoencoderConfig cfg;
  cfg.vocab_size = w.vocab.size();
  cfg.h_lm = 8;
  cfg.h_rep = 4;
  cfg.latent_len = 2;
  cfg.m_seg = 6;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.heads = 2;
  cfg.ffn_mult = 2;
  w.ae = make_autoencoder(cfg, Rng(99, "toy/ae"));
  w.ids = segment_token_ids(w.vocab, "a b c", cfg.m_seg);
  w.pos_ids = segment_token_ids(w.vocab, "a c", cfg.m_seg);
  w.neg_ids = segment_token_ids(w.vocab, "e f e", cfg.m_seg);
  return w;
}

inline std::vector<Tensor> params_under(ParamStore& ps, std::initializer_list<const char*> prefixes) {
  std::vector<Tensor> out;
  for (size_t i = 0; i < ps.size(); ++i) {
    for (const char* p : prefixes) {
      if (ps.path(i).rfind(p, 0) == 0) {
        out.push_back(ps.param(i));
        break;
      }
    }
  }
  return out;
}

inline Result check_loss(const std::string& name, const std::function<Tensor()>& f,
                         std::vector<Tensor> leaves, int max_coords) {
  GradCheckReport rep = grad_check(f, std::move(leaves), kTol, 1e-4, max_coords,
                                   Rng(fnv1a64(name), "coords"));
  Result r;
  r.name = name;
  r.max_rel_err = rep.max_rel_err;
  r.checked = rep.checked;
  r.pass = rep.pass;
  return r;
}

inline std::vector<Result> run_loss_checks() {
  std::vector<Result> out;

  {  // conversion loss: all representation parameters
    ToyWorld w = make_toy_world();
    auto f = [&]() {
      Rng noise(5, "fd/noise");
      return loss_conversion(w.ae, w.ids, 0.3, noise, w.vocab);
    };
    out.push_back(check_loss("loss_conversion", f,
                             params_under(w.ae.params, {"enc.", "cmp.", "rec.", "dec."}), 4));
  }

  {  // contrastive loss: input-side parameters only
    ToyWorld w = make_toy_world();
    auto f = [&]() {
      Tensor za = encode_segment(w.ae, w.ids);
      Tensor zp = encode_segment(w.ae, w.pos_ids);
      Tensor zn = encode_segment(w.ae, w.neg_ids);
      return loss_contrastive(za, zp, zn, (Real)0.5);
    };
    out.push_back(check_loss("loss_contrastive", f, params_under(w.ae.params, {"enc.", "cmp."}), 5));
  }

  {  // adversarial loss at fixed perturbation: output-side parameters only
    ToyWorld w = make_toy_world();
    Tensor z = encode_segment(w.ae, w.ids).detach(false);
    Tensor r_adv = adversarial_perturbation(w.ae, z, w.ids, (Real)0.5);
    auto f = [&, z, r_adv]() { return loss_adversarial(w.ae, z, r_adv, w.ids); };
    out.push_back(check_loss("loss_adversarial", f, params_under(w.ae.params, {"rec.", "dec."}), 5));
  }

  {  // composed representation loss on a 2-token toy segment
    ToyWorld w = make_toy_world();
    std::vector<int> ids2 = segment_token_ids(w.vocab, "a b", w.ae.cfg.m_seg);
    Tensor z0 = encode_segment(w.ae, ids2).detach(false);
    Tensor r_adv = adversarial_perturbation(w.ae, z0, ids2, (Real)0.5);
    auto f = [&, ids2, z0, r_adv]() {
      Rng noise(6, "fd/noise2");
      Tensor l = loss_conversion(w.ae, ids2, 0.25, noise, w.vocab);
      Tensor za = encode_segment(w.ae, ids2);
      Tensor zp = encode_segment(w.ae, w.pos_ids);
      Tensor zn = encode_segment(w.ae, w.neg_ids);
      l = add(l, scale(loss_contrastive(za, zp, zn, (Real)0.5), (Real)0.1));
      l = add(l, scale(loss_adversarial(w.ae, z0, r_adv, ids2), (Real)0.1));
      return l;
    };
    out.push_back(check_loss("loss_representation", f,
                             params_under(w.ae.params, {"enc.", "cmp.", "rec.", "dec."}), 3));
  }

  {  // diffusion losses on a tiny denoiser over a 2-slot plan
    ToyWorld w = make_toy_world();
    w.ae.params.freeze_all(true);
    DenoiserConfig dc;
    dc.h_rep = 4;
    dc.latent_len = 2;
    dc.n_slots = 2;
    dc.d_model = 8;
    dc.layers = 1;
    dc.heads = 2;
    dc.ffn_mult = 2;
    dc.h_lm = 8;
    Denoiser den = make_denoiser(dc, Rng(17, "toy/den"));

    Standardizer st;
    st.latent_len = 2;
    st.h_rep = 4;
    st.mean.assign(8, (Real)0.1);
    st.stddev.assign(8, (Real)1.3);

    Rng data(21, "toy/data");
    Tensor z0 = random_tensor(data, {4, 4});
    Tensor noise = random_tensor(data, {4, 4});
    NoiseSchedule sched = build_schedule(8, 1e-3, 0.3);
    Tensor z_t = forward_corrupt(z0, 5, noise, sched);
    Tensor ctx = random_tensor(data, {3, 8});

    {  // de-noising regression, gradients into denoiser parameters
      auto f = [&]() { return mse(denoise_predict(den, z_t, 5, &ctx), z0); };
      out.push_back(check_loss("loss_noise", f, params_under(den.params, {"den."}), 4));
    }

    SegmentBatch batch = collate_segments({"a b c", "c a"}, 2, 6, w.vocab);

    {  // reconstruction-matching loss wrt the denoiser output
      Tensor pred = random_tensor(data, {4, 4});
      auto f = [&, pred]() { return loss_rec_term(w.ae, st, pred, z0, 2); };
      out.push_back(check_loss("loss_rec", f, {pred}, -1));
    }

    {  // decode loss wrt the denoiser output
      Tensor pred = random_tensor(data, {4, 4});
      auto f = [&, pred]() { return loss_dec_term(w.ae, st, pred, batch, 2); };
      out.push_back(check_loss("loss_dec", f, {pred}, -1));
    }

    {  // full stage-2 objective through the denoiser
      auto f = [&]() {
        Tensor pred = denoise_predict(den, z_t, 5, &ctx);
        Tensor l = mse(pred, z0);
        l = add(l, scale(loss_rec_term(w.ae, st, pred, z0, 2), (Real)0.1));
        l = add(l, scale(loss_dec_term(w.ae, st, pred, batch, 2), (Real)0.1));
        return l;
      };
      out.push_back(check_loss("loss_diffusion", f, params_under(den.params, {"den."}), 3));
    }
  }

  return out;
}

}  // namespace gradsuite
