#include "vcsr/stats.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace vcsr {

namespace {

// Lower regularized incomplete gamma P(a, x) by series expansion; converges
// quickly for x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma Q(a, x) by continued fraction; for
// x >= a + 1 (Lentz's method).
double gamma_q_cf(double a, double x) {
    constexpr double kTiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q: need a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

double chi_square_p(double stat, int dof) {
    if (dof <= 0) return 1.0;
    if (stat <= 0.0) return 1.0;
    return gamma_q(0.5 * dof, 0.5 * stat);
}

ChiSquareResult chi_square_independence(const std::vector<std::vector<int64_t>>& table) {
    if (table.empty()) return {};
    const size_t cols = table[0].size();
    for (const auto& r : table)
        if (r.size() != cols)
            throw std::invalid_argument("chi_square_independence: ragged table");

    std::vector<double> row_tot(table.size(), 0.0), col_tot(cols, 0.0);
    double total = 0.0;
    for (size_t i = 0; i < table.size(); ++i)
        for (size_t j = 0; j < cols; ++j) {
            if (table[i][j] < 0)
                throw std::invalid_argument("chi_square_independence: negative count");
            row_tot[i] += static_cast<double>(table[i][j]);
            col_tot[j] += static_cast<double>(table[i][j]);
            total += static_cast<double>(table[i][j]);
        }
    if (total == 0.0) return {};

    int live_rows = 0, live_cols = 0;
    for (double r : row_tot) live_rows += r > 0.0;
    for (double c : col_tot) live_cols += c > 0.0;

    ChiSquareResult res;
    res.dof = (live_rows - 1) * (live_cols - 1);
    for (size_t i = 0; i < table.size(); ++i) {
        if (row_tot[i] == 0.0) continue;
        for (size_t j = 0; j < cols; ++j) {
            if (col_tot[j] == 0.0) continue;
            const double expect = row_tot[i] * col_tot[j] / total;
            const double diff = static_cast<double>(table[i][j]) - expect;
            res.stat += diff * diff / expect;
        }
    }
    res.p = chi_square_p(res.stat, res.dof);
    return res;
}

}  // namespace vcsr
