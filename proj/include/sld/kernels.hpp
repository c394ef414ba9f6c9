#pragma once

#ifndef SLD_REAL
#define SLD_REAL float
#endif

namespace sld {
using Real = SLD_REAL;
}

// Dense inner loops. Each kernel has a serial reference and an OpenMP
// version; both compute every output element with the same accumulation
// order, so results are bit-identical and the parallel path is safe for
// reproducible runs. The un-suffixed entry dispatches on problem size.
namespace sld::kernels {

// c[m x n] = a[m x k] * b[k x n]
void matmul_serial(const Real* a, const Real* b, Real* c, int m, int k, int n);
void matmul_omp(const Real* a, const Real* b, Real* c, int m, int k, int n);
void matmul(const Real* a, const Real* b, Real* c, int m, int k, int n);

// da[m x k] += dc[m x n] * b[k x n]^T
void matmul_nt_acc_serial(const Real* dc, const Real* b, Real* da, int m, int k, int n);
void matmul_nt_acc_omp(const Real* dc, const Real* b, Real* da, int m, int k, int n);
void matmul_nt_acc(const Real* dc, const Real* b, Real* da, int m, int k, int n);

// db[k x n] += a[m x k]^T * dc[m x n]
void matmul_tn_acc_serial(const Real* a, const Real* dc, Real* db, int m, int k, int n);
void matmul_tn_acc_omp(const Real* a, const Real* dc, Real* db, int m, int k, int n);
void matmul_tn_acc(const Real* a, const Real* dc, Real* db, int m, int k, int n);

// Row-wise shifted softmax. Rows with keep-mask all zero produce all-zero
// output rows. mask may be null (nothing masked).
void softmax_rows_serial(const Real* x, const unsigned char* mask, Real* y, int r, int c);
void softmax_rows_omp(const Real* x, const unsigned char* mask, Real* y, int r, int c);
void softmax_rows(const Real* x, const unsigned char* mask, Real* y, int r, int c);

// Row-wise layer norm with affine output. Writes per-row mean and 1/std so
// the backward pass can reuse them.
void layer_norm_rows_serial(const Real* x, const Real* gain, const Real* bias,
                            Real* y, Real* row_mean, Real* row_inv_std,
                            int r, int c, Real eps);
void layer_norm_rows_omp(const Real* x, const Real* gain, const Real* bias,
                         Real* y, Real* row_mean, Real* row_inv_std,
                         int r, int c, Real eps);
void layer_norm_rows(const Real* x, const Real* gain, const Real* bias,
                     Real* y, Real* row_mean, Real* row_inv_std,
                     int r, int c, Real eps);

}  // namespace sld::kernels
