#pragma once

#include <vector>

namespace vcsr {

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double gamma_q(double a, double x);

// Right-tail p-value of a chi-square statistic. dof <= 0 yields 1 (a
// degenerate table carries no evidence).
double chi_square_p(double stat, int dof);

struct ChiSquareResult {
    double stat = 0.0;
    int dof = 0;
    double p = 1.0;
};

// Pearson independence test on a rows x cols contingency table of counts.
// All-zero rows and columns are dropped before computing expectations.
ChiSquareResult chi_square_independence(const std::vector<std::vector<int64_t>>& table);

}  // namespace vcsr
