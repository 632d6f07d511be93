#include "vcsr/kernels.hpp"

namespace vcsr::detail {

void mm_acc(const double* A, const double* B, double* C, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* __restrict a_row = A + static_cast<long>(i) * k;
    double* __restrict c_row = C + static_cast<long>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double a = a_row[p];
      const double* __restrict b_row = B + static_cast<long>(p) * n;
      for (int j = 0; j < n; ++j) c_row[j] += a * b_row[j];
    }
  }
}

void mm_abt_acc(const double* A, const double* B, double* C, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* __restrict a_row = A + static_cast<long>(i) * k;
    double* __restrict c_row = C + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* __restrict b_row = B + static_cast<long>(j) * k;
      // Eight independent accumulator lanes so the reduction vectorizes while
      // keeping a fixed, reproducible summation order.
      double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      int p = 0;
      for (; p + 8 <= k; p += 8)
        for (int t = 0; t < 8; ++t) acc[t] += a_row[p + t] * b_row[p + t];
      double tail = 0.0;
      for (; p < k; ++p) tail += a_row[p] * b_row[p];
      c_row[j] += (((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                   ((acc[4] + acc[5]) + (acc[6] + acc[7]))) +
                  tail;
    }
  }
}

void mm_atb_acc(const double* A, const double* B, double* C, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* __restrict a_row = A + static_cast<long>(i) * k;
    const double* __restrict b_row = B + static_cast<long>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double a = a_row[p];
      double* __restrict c_row = C + static_cast<long>(p) * n;
      for (int j = 0; j < n; ++j) c_row[j] += a * b_row[j];
    }
  }
}

}  // namespace vcsr::detail
