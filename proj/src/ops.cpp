#include "sld/ops.hpp"

#include <cmath>
#include <cstring>

#include "sld/error.hpp"
#include "sld/kernels.hpp"

namespace sld {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

bool record_for(std::initializer_list<const Tensor*> ins) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : ins) {
    if (t->requires_grad()) return true;
  }
  return false;
}

std::vector<Real>& gbuf(const std::shared_ptr<TensorData>& t) {
  if (t->g.size() != t->v.size()) t->g.assign(t->v.size(), 0);
  return t->g;
}

void attach(Tensor& out, std::vector<Tensor> parents, std::function<void(TensorData&)> bw) {
  out.set_requires_grad(true);
  auto fn = std::make_shared<GradFn>();
  fn->parents.reserve(parents.size());
  for (auto& p : parents) fn->parents.push_back(p.ptr());
  fn->backward = std::move(bw);
  out.ref().fn = std::move(fn);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
  }
}

void check_matrix(const Tensor& t, const char* op) {
  if (t.shape().size() != 2) {
    throw ValidationError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor gaussian_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (Real& x : t.values()) x = (Real)rng.normal();
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (record_for({&a, &b})) {
    attach(out, {a, b}, [](TensorData& o) {
      auto& pa = o.fn->parents[0];
      auto& pb = o.fn->parents[1];
      const int64_t n2 = (int64_t)o.v.size();
      if (pa->requires_grad) {
        auto& g = gbuf(pa);
        for (int64_t i = 0; i < n2; ++i) g[i] += o.g[i];
      }
      if (pb->requires_grad) {
        auto& g = gbuf(pb);
        for (int64_t i = 0; i < n2; ++i) g[i] += o.g[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (record_for({&a, &b})) {
    attach(out, {a, b}, [](TensorData& o) {
      auto& pa = o.fn->parents[0];
      auto& pb = o.fn->parents[1];
      const int64_t n2 = (int64_t)o.v.size();
      if (pa->requires_grad) {
        auto& g = gbuf(pa);
        for (int64_t i = 0; i < n2; ++i) g[i] += o.g[i];
      }
      if (pb->requires_grad) {
        auto& g = gbuf(pb);
        for (int64_t i = 0; i < n2; ++i) g[i] -= o.g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (record_for({&a, &b})) {
    attach(out, {a, b}, [](TensorData& o) {
      auto& pa = o.fn->parents[0];
      auto& pb = o.fn->parents[1];
      const int64_t n2 = (int64_t)o.v.size();
      if (pa->requires_grad) {
        auto& g = gbuf(pa);
        for (int64_t i = 0; i < n2; ++i) g[i] += o.g[i] * pb->v[i];
      }
      if (pb->requires_grad) {
        auto& g = gbuf(pb);
        for (int64_t i = 0; i < n2; ++i) g[i] += o.g[i] * pa->v[i];
      }
    });
  }
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  Tensor out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] / b.data()[i];
  if (record_for({&a, &b})) {
    attach(out, {a, b}, [](TensorData& o) {
      auto& pa = o.fn->parents[0];
      auto& pb = o.fn->parents[1];
      const int64_t n2 = (int64_t)o.v.size();
      if (pa->requires_grad) {
        auto& g = gbuf(pa);
        for (int64_t i = 0; i < n2; ++i) g[i] += o.g[i] / pb->v[i];
      }
      if (pb->requires_grad) {
        auto& g = gbuf(pb);
        for (int64_t i = 0; i < n2; ++i) g[i] -= o.g[i] * pa->v[i] / (pb->v[i] * pb->v[i]);
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, Real c) {
  Tensor out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
  if (record_for({&a})) {
    attach(out, {a}, [c](TensorData& o) {
      auto& pa = o.fn->parents[0];
      if (!pa->requires_grad) return;
      auto& g = gbuf(pa);
      const int64_t n2 = (int64_t)o.v.size();
      for (int64_t i = 0; i < n2; ++i) g[i] += o.g[i] * c;
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  check_matrix(m, "add_rowvec");
  if ((int64_t)v.size() != m.cols()) {
    throw ValidationError("add_rowvec: vector length " + shape_str(v.shape()) +
                          " does not match matrix " + shape_str(m.shape()));
  }
  Tensor out(m.shape());
  const int r = m.rows(), c = m.cols();
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out.data()[(int64_t)i * c + j] = m.data()[(int64_t)i * c + j] + v.data()[j];
  }
  if (record_for({&m, &v})) {
    attach(out, {m, v}, [r, c](TensorData& o) {
      auto& pm = o.fn->parents[0];
      auto& pv = o.fn->parents[1];
      if (pm->requires_grad) {
        auto& g = gbuf(pm);
        const int64_t n2 = (int64_t)o.v.size();
        for (int64_t i = 0; i < n2; ++i) g[i] += o.g[i];
      }
      if (pv->requires_grad) {
        auto& g = gbuf(pv);
        for (int i = 0; i < r; ++i) {
          for (int j = 0; j < c; ++j) g[j] += o.g[(int64_t)i * c + j];
        }
      }
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ValidationError("matmul: inner dimensions disagree " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  kernels::matmul(a.data(), b.data(), out.data(), m, k, n);
  if (record_for({&a, &b})) {
    attach(out, {a, b}, [m, k, n](TensorData& o) {
      auto& pa = o.fn->parents[0];
      auto& pb = o.fn->parents[1];
      if (pa->requires_grad) {
        kernels::matmul_nt_acc(o.g.data(), pb->v.data(), gbuf(pa).data(), m, k, n);
      }
      if (pb->requires_grad) {
        kernels::matmul_tn_acc(pa->v.data(), o.g.data(), gbuf(pb).data(), m, k, n);
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  check_matrix(a, "transpose");
  const int r = a.rows(), c = a.cols();
  Tensor out({c, r});
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out.data()[(int64_t)j * r + i] = a.data()[(int64_t)i * c + j];
  }
  if (record_for({&a})) {
    attach(out, {a}, [r, c](TensorData& o) {
      auto& pa = o.fn->parents[0];
      if (!pa->requires_grad) return;
      auto& g = gbuf(pa);
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) g[(int64_t)i * c + j] += o.g[(int64_t)j * r + i];
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw ValidationError("reshape: element count mismatch " + shape_str(a.shape()) +
                          " -> " + shape_str(shape));
  }
  Tensor out(std::move(shape), a.values());
  if (record_for({&a})) {
    attach(out, {a}, [](TensorData& o) {
      auto& pa = o.fn->parents[0];
      if (!pa->requires_grad) return;
      auto& g = gbuf(pa);
      const int64_t n2 = (int64_t)o.v.size();
      for (int64_t i = 0; i < n2; ++i) g[i] += o.g[i];
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  check_matrix(a, "slice_rows");
  if (r0 < 0 || r1 > a.rows() || r0 >= r1) {
    throw ValidationError("slice_rows: bad range [" + std::to_string(r0) + ", " +
                          std::to_string(r1) + ") for " + shape_str(a.shape()));
  }
  const int c = a.cols();
  Tensor out({r1 - r0, c});
  std::memcpy(out.data(), a.data() + (int64_t)r0 * c, sizeof(Real) * (size_t)(r1 - r0) * c);
  if (record_for({&a})) {
    attach(out, {a}, [r0, c](TensorData& o) {
      auto& pa = o.fn->parents[0];
      if (!pa->requires_grad) return;
      auto& g = gbuf(pa);
      const int64_t n2 = (int64_t)o.v.size();
      for (int64_t i = 0; i < n2; ++i) g[(int64_t)r0 * c + i] += o.g[i];
    });
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no parts");
  const int c = parts[0].cols();
  int rows = 0;
  bool need_grad = false;
  for (const Tensor& p : parts) {
    check_matrix(p, "concat_rows");
    if (p.cols() != c) {
      throw ValidationError("concat_rows: column mismatch " + shape_str(parts[0].shape()) +
                            " vs " + shape_str(p.shape()));
    }
    rows += p.rows();
    need_grad = need_grad || p.requires_grad();
  }
  Tensor out({rows, c});
  int64_t off = 0;
  for (const Tensor& p : parts) {
    std::memcpy(out.data() + off, p.data(), sizeof(Real) * (size_t)p.size());
    off += p.size();
  }
  if (grad_enabled() && need_grad) {
    std::vector<Tensor> ps = parts;
    attach(out, ps, [](TensorData& o) {
      int64_t off2 = 0;
      for (auto& p : o.fn->parents) {
        const int64_t n2 = (int64_t)p->v.size();
        if (p->requires_grad) {
          auto& g = gbuf(p);
          for (int64_t i = 0; i < n2; ++i) g[i] += o.g[off2 + i];
        }
        off2 += n2;
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  check_matrix(a, "slice_cols");
  if (c0 < 0 || c1 > a.cols() || c0 >= c1) {
    throw ValidationError("slice_cols: bad range [" + std::to_string(c0) + ", " +
                          std::to_string(c1) + ") for " + shape_str(a.shape()));
  }
  const int r = a.rows(), c = a.cols(), w = c1 - c0;
  Tensor out({r, w});
  for (int i = 0; i < r; ++i) {
    std::memcpy(out.data() + (int64_t)i * w, a.data() + (int64_t)i * c + c0, sizeof(Real) * (size_t)w);
  }
  if (record_for({&a})) {
    attach(out, {a}, [r, c, c0, w](TensorData& o) {
      auto& pa = o.fn->parents[0];
      if (!pa->requires_grad) return;
      auto& g = gbuf(pa);
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < w; ++j) g[(int64_t)i * c + c0 + j] += o.g[(int64_t)i * w + j];
      }
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no parts");
  const int r = parts[0].rows();
  int cols = 0;
  bool need_grad = false;
  for (const Tensor& p : parts) {
    check_matrix(p, "concat_cols");
    if (p.rows() != r) {
      throw ValidationError("concat_cols: row mismatch " + shape_str(parts[0].shape()) +
                            " vs " + shape_str(p.shape()));
    }
    cols += p.cols();
    need_grad = need_grad || p.requires_grad();
  }
  Tensor out({r, cols});
  int off = 0;
  for (const Tensor& p : parts) {
    const int w = p.cols();
    for (int i = 0; i < r; ++i) {
      std::memcpy(out.data() + (int64_t)i * cols + off, p.data() + (int64_t)i * w,
                  sizeof(Real) * (size_t)w);
    }
    off += w;
  }
  if (grad_enabled() && need_grad) {
    std::vector<Tensor> ps = parts;
    attach(out, ps, [r, cols](TensorData& o) {
      int off2 = 0;
      for (auto& p : o.fn->parents) {
        const int w = p->shape[1];
        if (p->requires_grad) {
          auto& g = gbuf(p);
          for (int i = 0; i < r; ++i) {
            for (int j = 0; j < w; ++j) g[(int64_t)i * w + j] += o.g[(int64_t)i * cols + off2 + j];
          }
        }
        off2 += w;
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0;
  for (Real x : a.values()) acc += x;
  Tensor out = Tensor::scalar((Real)acc);
  if (record_for({&a})) {
    attach(out, {a}, [](TensorData& o) {
      auto& pa = o.fn->parents[0];
      if (!pa->requires_grad) return;
      auto& g = gbuf(pa);
      for (Real& x : g) x += o.g[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  double acc = 0;
  for (Real x : a.values()) acc += x;
  const Real inv = (Real)(1.0 / (double)a.size());
  Tensor out = Tensor::scalar((Real)(acc / (double)a.size()));
  if (record_for({&a})) {
    attach(out, {a}, [inv](TensorData& o) {
      auto& pa = o.fn->parents[0];
      if (!pa->requires_grad) return;
      auto& g = gbuf(pa);
      for (Real& x : g) x += o.g[0] * inv;
    });
  }
  return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
  Tensor d = sub(a, b);
  return mean(mul(d, d));
}

namespace {
Tensor softmax_impl(const Tensor& x, const std::vector<unsigned char>* keep) {
  check_matrix(x, "softmax_rows");
  const int r = x.rows(), c = x.cols();
  if (keep && (int64_t)keep->size() != x.size()) {
    throw ValidationError("softmax_rows: mask of wrong shape, " +
                          std::to_string(keep->size()) + " entries for " + shape_str(x.shape()));
  }
  Tensor out(x.shape());
  kernels::softmax_rows(x.data(), keep ? keep->data() : nullptr, out.data(), r, c);
  if (record_for({&x})) {
    attach(out, {x}, [r, c](TensorData& o) {
      auto& px = o.fn->parents[0];
      if (!px->requires_grad) return;
      auto& g = gbuf(px);
      for (int i = 0; i < r; ++i) {
        const Real* y = o.v.data() + (int64_t)i * c;
        const Real* go = o.g.data() + (int64_t)i * c;
        double dotv = 0;
        for (int j = 0; j < c; ++j) dotv += (double)go[j] * y[j];
        Real* gx = g.data() + (int64_t)i * c;
        for (int j = 0; j < c; ++j) gx[j] += y[j] * (go[j] - (Real)dotv);
      }
    });
  }
  return out;
}
}  // namespace

Tensor softmax_rows(const Tensor& x) { return softmax_impl(x, nullptr); }

Tensor softmax_rows_masked(const Tensor& x, const std::vector<unsigned char>& keep) {
  return softmax_impl(x, &keep);
}

Tensor log_softmax_rows(const Tensor& x) {
  check_matrix(x, "log_softmax_rows");
  const int r = x.rows(), c = x.cols();
  Tensor out(x.shape());
  for (int i = 0; i < r; ++i) {
    const Real* xi = x.data() + (int64_t)i * c;
    Real* yi = out.data() + (int64_t)i * c;
    Real mx = xi[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
    double denom = 0;
    for (int j = 0; j < c; ++j) denom += std::exp((double)(xi[j] - mx));
    const Real lse = mx + (Real)std::log(denom);
    for (int j = 0; j < c; ++j) yi[j] = xi[j] - lse;
  }
  if (record_for({&x})) {
    attach(out, {x}, [r, c](TensorData& o) {
      auto& px = o.fn->parents[0];
      if (!px->requires_grad) return;
      auto& g = gbuf(px);
      for (int i = 0; i < r; ++i) {
        const Real* y = o.v.data() + (int64_t)i * c;
        const Real* go = o.g.data() + (int64_t)i * c;
        double gsum = 0;
        for (int j = 0; j < c; ++j) gsum += go[j];
        Real* gx = g.data() + (int64_t)i * c;
        for (int j = 0; j < c; ++j) gx[j] += go[j] - (Real)(std::exp((double)y[j]) * gsum);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  check_matrix(x, "layer_norm");
  const int r = x.rows(), c = x.cols();
  if (c < 2) throw ValidationError("layer_norm: needs at least 2 columns, got " + shape_str(x.shape()));
  if ((int64_t)gain.size() != c || (int64_t)bias.size() != c) {
    throw ValidationError("layer_norm: gain/bias length must equal columns of " + shape_str(x.shape()));
  }
  Tensor out(x.shape());
  std::vector<Real> row_mean(r), row_inv_std(r);
  kernels::layer_norm_rows(x.data(), gain.data(), bias.data(), out.data(),
                           row_mean.data(), row_inv_std.data(), r, c, kLayerNormEps);
  if (record_for({&x, &gain, &bias})) {
    attach(out, {x, gain, bias},
           [r, c, row_mean, row_inv_std](TensorData& o) {
             auto& px = o.fn->parents[0];
             auto& pgain = o.fn->parents[1];
             auto& pbias = o.fn->parents[2];
             for (int i = 0; i < r; ++i) {
               const Real* xi = px->v.data() + (int64_t)i * c;
               const Real* go = o.g.data() + (int64_t)i * c;
               const double mu = row_mean[i];
               const double inv_std = row_inv_std[i];
               if (pgain->requires_grad) {
                 auto& gg = gbuf(pgain);
                 for (int j = 0; j < c; ++j) gg[j] += go[j] * (Real)(((double)xi[j] - mu) * inv_std);
               }
               if (pbias->requires_grad) {
                 auto& gb = gbuf(pbias);
                 for (int j = 0; j < c; ++j) gb[j] += go[j];
               }
               if (px->requires_grad) {
                 auto& gx = gbuf(px);
                 const Real* gainv = pgain->v.data();
                 double mean_gh = 0, mean_ghx = 0;
                 for (int j = 0; j < c; ++j) {
                   const double gh = (double)go[j] * gainv[j];
                   const double xh = ((double)xi[j] - mu) * inv_std;
                   mean_gh += gh;
                   mean_ghx += gh * xh;
                 }
                 mean_gh /= c;
                 mean_ghx /= c;
                 for (int j = 0; j < c; ++j) {
                   const double gh = (double)go[j] * gainv[j];
                   const double xh = ((double)xi[j] - mu) * inv_std;
                   gx[(int64_t)i * c + j] += (Real)(inv_std * (gh - mean_gh - xh * mean_ghx));
                 }
               }
             }
           });
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) {
    const double v = x.data()[i];
    out.data()[i] = (Real)(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  if (record_for({&x})) {
    attach(out, {x}, [](TensorData& o) {
      auto& px = o.fn->parents[0];
      if (!px->requires_grad) return;
      auto& g = gbuf(px);
      const int64_t n2 = (int64_t)o.v.size();
      for (int64_t i = 0; i < n2; ++i) {
        const double v = px->v[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        g[i] += o.g[i] * (Real)(cdf + v * pdf);
      }
    });
  }
  return out;
}

Tensor softplus(const Tensor& x) {
  Tensor out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) {
    const double v = x.data()[i];
    out.data()[i] = (Real)(std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))));
  }
  if (record_for({&x})) {
    attach(out, {x}, [](TensorData& o) {
      auto& px = o.fn->parents[0];
      if (!px->requires_grad) return;
      auto& g = gbuf(px);
      const int64_t n2 = (int64_t)o.v.size();
      for (int64_t i = 0; i < n2; ++i) {
        const double v = px->v[i];
        g[i] += o.g[i] * (Real)(1.0 / (1.0 + std::exp(-v)));
      }
    });
  }
  return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  check_matrix(table, "embedding");
  const int v = table.rows(), h = table.cols();
  const int m = (int)ids.size();
  if (m == 0) throw ValidationError("embedding: empty id list");
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw ValidationError("embedding: id " + std::to_string(id) + " out of range for table " +
                            shape_str(table.shape()));
    }
  }
  Tensor out({m, h});
  for (int i = 0; i < m; ++i) {
    std::memcpy(out.data() + (int64_t)i * h, table.data() + (int64_t)ids[i] * h,
                sizeof(Real) * (size_t)h);
  }
  if (record_for({&table})) {
    attach(out, {table}, [ids, h](TensorData& o) {
      auto& pt = o.fn->parents[0];
      if (!pt->requires_grad) return;
      auto& g = gbuf(pt);
      for (size_t i = 0; i < ids.size(); ++i) {
        const Real* go = o.g.data() + (int64_t)i * h;
        Real* gt = g.data() + (int64_t)ids[i] * h;
        for (int j = 0; j < h; ++j) gt[j] += go[j];
      }
    });
  }
  return out;
}

Tensor nll_rows(const Tensor& logprobs, const std::vector<int>& targets, int ignore_id,
                Reduce reduce) {
  check_matrix(logprobs, "nll_rows");
  const int r = logprobs.rows(), c = logprobs.cols();
  if ((int)targets.size() != r) {
    throw ValidationError("nll_rows: target count " + std::to_string(targets.size()) +
                          " does not match rows of " + shape_str(logprobs.shape()));
  }
  double acc = 0;
  int counted = 0;
  for (int i = 0; i < r; ++i) {
    const int t = targets[i];
    if (t == ignore_id) continue;
    if (t < 0 || t >= c) {
      throw ValidationError("nll_rows: target " + std::to_string(t) + " out of range for " +
                            shape_str(logprobs.shape()));
    }
    acc -= logprobs.at(i, t);
    ++counted;
  }
  if (counted == 0) throw ValidationError("nll_rows: no counted targets");
  const Real coeff = reduce == Reduce::kMean ? (Real)(1.0 / counted) : (Real)1;
  Tensor out = Tensor::scalar(reduce == Reduce::kMean ? (Real)(acc / counted) : (Real)acc);
  if (record_for({&logprobs})) {
    attach(out, {logprobs}, [targets, ignore_id, coeff, c](TensorData& o) {
      auto& pl = o.fn->parents[0];
      if (!pl->requires_grad) return;
      auto& g = gbuf(pl);
      for (size_t i = 0; i < targets.size(); ++i) {
        const int t = targets[i];
        if (t == ignore_id) continue;
        g[(int64_t)i * c + t] -= o.g[0] * coeff;
      }
    });
  }
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  double acc = 0;
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) acc += (double)a.data()[i] * b.data()[i];
  Tensor out = Tensor::scalar((Real)acc);
  if (record_for({&a, &b})) {
    attach(out, {a, b}, [](TensorData& o) {
      auto& pa = o.fn->parents[0];
      auto& pb = o.fn->parents[1];
      const int64_t n2 = (int64_t)pa->v.size();
      if (pa->requires_grad) {
        auto& g = gbuf(pa);
        for (int64_t i = 0; i < n2; ++i) g[i] += o.g[0] * pb->v[i];
      }
      if (pb->requires_grad) {
        auto& g = gbuf(pb);
        for (int64_t i = 0; i < n2; ++i) g[i] += o.g[0] * pa->v[i];
      }
    });
  }
  return out;
}

Tensor l2norm(const Tensor& a) {
  double acc = 0;
  for (Real x : a.values()) acc += (double)x * x;
  const double nrm = std::sqrt(acc);
  Tensor out = Tensor::scalar((Real)nrm);
  if (record_for({&a})) {
    attach(out, {a}, [nrm](TensorData& o) {
      auto& pa = o.fn->parents[0];
      if (!pa->requires_grad || nrm < 1e-30) return;
      auto& g = gbuf(pa);
      const int64_t n2 = (int64_t)pa->v.size();
      for (int64_t i = 0; i < n2; ++i) g[i] += o.g[0] * (Real)((double)pa->v[i] / nrm);
    });
  }
  return out;
}

Tensor cosine(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine: size mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  }
  Tensor na = l2norm(a);
  Tensor nb = l2norm(b);
  if (na.item() < (Real)1e-12 || nb.item() < (Real)1e-12) {
    throw RuntimeFailure("cosine: undefined for zero-norm tensor");
  }
  return div(dot(a, b), mul(na, nb));
}

}  // namespace sld
