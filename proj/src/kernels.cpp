#include "sld/kernels.hpp"

#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sld::kernels {

namespace {
constexpr long long kParallelGrain = 1 << 22;
}

void matmul_serial(const Real* a, const Real* b, Real* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    Real* crow = c + (long long)i * n;
    for (int j = 0; j < n; ++j) crow[j] = 0;
    const Real* arow = a + (long long)i * k;
    for (int p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* brow = b + (long long)p * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_omp(const Real* a, const Real* b, Real* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    Real* crow = c + (long long)i * n;
    for (int j = 0; j < n; ++j) crow[j] = 0;
    const Real* arow = a + (long long)i * k;
    for (int p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* brow = b + (long long)p * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul(const Real* a, const Real* b, Real* c, int m, int k, int n) {
#ifdef _OPENMP
  if ((long long)m * k * n >= kParallelGrain && m > 1) {
    matmul_omp(a, b, c, m, k, n);
    return;
  }
#endif
  matmul_serial(a, b, c, m, k, n);
}

void matmul_nt_acc_serial(const Real* dc, const Real* b, Real* da, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const Real* dcrow = dc + (long long)i * n;
    Real* darow = da + (long long)i * k;
    for (int j = 0; j < k; ++j) {
      const Real* brow = b + (long long)j * n;
      Real acc = 0;
      for (int p = 0; p < n; ++p) acc += dcrow[p] * brow[p];
      darow[j] += acc;
    }
  }
}

void matmul_nt_acc_omp(const Real* dc, const Real* b, Real* da, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const Real* dcrow = dc + (long long)i * n;
    Real* darow = da + (long long)i * k;
    for (int j = 0; j < k; ++j) {
      const Real* brow = b + (long long)j * n;
      Real acc = 0;
      for (int p = 0; p < n; ++p) acc += dcrow[p] * brow[p];
      darow[j] += acc;
    }
  }
}

void matmul_nt_acc(const Real* dc, const Real* b, Real* da, int m, int k, int n) {
#ifdef _OPENMP
  if ((long long)m * k * n >= kParallelGrain && m > 1) {
    matmul_nt_acc_omp(dc, b, da, m, k, n);
    return;
  }
#endif
  matmul_nt_acc_serial(dc, b, da, m, k, n);
}

void matmul_tn_acc_serial(const Real* a, const Real* dc, Real* db, int m, int k, int n) {
  for (int j = 0; j < k; ++j) {
    Real* dbrow = db + (long long)j * n;
    for (int i = 0; i < m; ++i) {
      const Real av = a[(long long)i * k + j];
      const Real* dcrow = dc + (long long)i * n;
      for (int p = 0; p < n; ++p) dbrow[p] += av * dcrow[p];
    }
  }
}

void matmul_tn_acc_omp(const Real* a, const Real* dc, Real* db, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < k; ++j) {
    Real* dbrow = db + (long long)j * n;
    for (int i = 0; i < m; ++i) {
      const Real av = a[(long long)i * k + j];
      const Real* dcrow = dc + (long long)i * n;
      for (int p = 0; p < n; ++p) dbrow[p] += av * dcrow[p];
    }
  }
}

void matmul_tn_acc(const Real* a, const Real* dc, Real* db, int m, int k, int n) {
#ifdef _OPENMP
  if ((long long)m * k * n >= kParallelGrain && k > 1) {
    matmul_tn_acc_omp(a, dc, db, m, k, n);
    return;
  }
#endif
  matmul_tn_acc_serial(a, dc, db, m, k, n);
}

namespace {
inline void softmax_row(const Real* x, const unsigned char* mask, Real* y, int c) {
  Real mx = 0;
  bool any = false;
  for (int j = 0; j < c; ++j) {
    if (mask && !mask[j]) continue;
    if (!any || x[j] > mx) mx = x[j];
    any = true;
  }
  if (!any) {
    for (int j = 0; j < c; ++j) y[j] = 0;
    return;
  }
  double denom = 0;
  for (int j = 0; j < c; ++j) {
    if (mask && !mask[j]) {
      y[j] = 0;
    } else {
      y[j] = std::exp(x[j] - mx);
      denom += y[j];
    }
  }
  const Real inv = (Real)(1.0 / denom);
  for (int j = 0; j < c; ++j) y[j] *= inv;
}

inline void layer_norm_row(const Real* x, const Real* gain, const Real* bias,
                           Real* y, Real* mean_out, Real* inv_std_out, int c, Real eps) {
  double mean = 0;
  for (int j = 0; j < c; ++j) mean += x[j];
  mean /= c;
  double var = 0;
  for (int j = 0; j < c; ++j) {
    const double d = x[j] - mean;
    var += d * d;
  }
  var /= c;
  const double inv_std = 1.0 / std::sqrt(var + (double)eps);
  *mean_out = (Real)mean;
  *inv_std_out = (Real)inv_std;
  for (int j = 0; j < c; ++j) {
    y[j] = (Real)(((double)x[j] - mean) * inv_std) * gain[j] + bias[j];
  }
}
}  // namespace

void softmax_rows_serial(const Real* x, const unsigned char* mask, Real* y, int r, int c) {
  for (int i = 0; i < r; ++i) {
    softmax_row(x + (long long)i * c, mask ? mask + (long long)i * c : nullptr,
                y + (long long)i * c, c);
  }
}

void softmax_rows_omp(const Real* x, const unsigned char* mask, Real* y, int r, int c) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < r; ++i) {
    softmax_row(x + (long long)i * c, mask ? mask + (long long)i * c : nullptr,
                y + (long long)i * c, c);
  }
}

void softmax_rows(const Real* x, const unsigned char* mask, Real* y, int r, int c) {
#ifdef _OPENMP
  if ((long long)r * c >= kParallelGrain && r > 1) {
    softmax_rows_omp(x, mask, y, r, c);
    return;
  }
#endif
  softmax_rows_serial(x, mask, y, r, c);
}

void layer_norm_rows_serial(const Real* x, const Real* gain, const Real* bias,
                            Real* y, Real* row_mean, Real* row_inv_std,
                            int r, int c, Real eps) {
  for (int i = 0; i < r; ++i) {
    layer_norm_row(x + (long long)i * c, gain, bias, y + (long long)i * c,
                   row_mean + i, row_inv_std + i, c, eps);
  }
}

void layer_norm_rows_omp(const Real* x, const Real* gain, const Real* bias,
                         Real* y, Real* row_mean, Real* row_inv_std,
                         int r, int c, Real eps) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < r; ++i) {
    layer_norm_row(x + (long long)i * c, gain, bias, y + (long long)i * c,
                   row_mean + i, row_inv_std + i, c, eps);
  }
}

void layer_norm_rows(const Real* x, const Real* gain, const Real* bias,
                     Real* y, Real* row_mean, Real* row_inv_std,
                     int r, int c, Real eps) {
#ifdef _OPENMP
  if ((long long)r * c >= kParallelGrain && r > 1) {
    layer_norm_rows_omp(x, gain, bias, y, row_mean, row_inv_std, r, c, eps);
    return;
  }
#endif
  layer_norm_rows_serial(x, gain, bias, y, row_mean, row_inv_std, r, c, eps);
}

}  // namespace sld::kernels
