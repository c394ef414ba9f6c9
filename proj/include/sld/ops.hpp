#pragma once

#include <vector>

#include "sld/rng.hpp"
#include "sld/tensor.hpp"

namespace sld {

// I.i.d. standard normal draws from the stream's current position.
Tensor gaussian_tensor(Rng& rng, Shape shape);

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real c);

// m[r x c] + v[c] broadcast over rows.
Tensor add_rowvec(const Tensor& m, const Tensor& v);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor concat_cols(const std::vector<Tensor>& parts);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// mean((a-b)^2) over all elements
Tensor mse(const Tensor& a, const Tensor& b);

Tensor softmax_rows(const Tensor& x);
// keep[i*cols+j] == 0 masks position j of row i out (zero weight). A fully
// masked row yields an all-zero output row.
Tensor softmax_rows_masked(const Tensor& x, const std::vector<unsigned char>& keep);
Tensor log_softmax_rows(const Tensor& x);

constexpr Real kLayerNormEps = (Real)1e-5;
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor gelu(const Tensor& x);
Tensor softplus(const Tensor& x);

// out[i] = table[ids[i]]; backward scatter-adds into the table rows.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

enum class Reduce { kMean, kSum };
// Negative log likelihood over per-row log-probabilities. Rows whose target
// equals ignore_id (< 0 disables) are skipped.
Tensor nll_rows(const Tensor& logprobs, const std::vector<int>& targets,
                int ignore_id = -1, Reduce reduce = Reduce::kMean);

Tensor dot(const Tensor& a, const Tensor& b);
Tensor l2norm(const Tensor& a);
// Cosine similarity over flattened tensors. Throws on (near-)zero norms.
Tensor cosine(const Tensor& a, const Tensor& b);

}  // namespace sld
