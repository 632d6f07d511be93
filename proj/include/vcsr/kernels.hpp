#pragma once

namespace vcsr::detail {

// Row-major f64 matrix kernels. All accumulate into C, which the caller
// zero-initializes. Loop orders are chosen so the inner loop runs over
// contiguous memory and vectorizes.

// C[m x n] += A[m x k] * B[k x n]
void mm_acc(const double* A, const double* B, double* C, int m, int k, int n);

// C[m x n] += A[m x k] * B[n x k]^T
void mm_abt_acc(const double* A, const double* B, double* C, int m, int k, int n);

// C[k x n] += A[m x k]^T * B[m x n]
void mm_atb_acc(const double* A, const double* B, double* C, int m, int k, int n);

}  // namespace vcsr::detail
