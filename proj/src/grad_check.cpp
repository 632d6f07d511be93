#include "vcsr/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace vcsr {

GradCheckReport grad_check(const std::vector<Tensor>& params, const std::function<Tensor()>& f,
                           double step) {
    if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
    for (const auto& p : params)
        if (!p.defined() || !p.requires_grad())
            throw std::invalid_argument("grad_check: params must be requires_grad leaves");

    for (auto p : params) p.zero_grad();
    Tensor loss = f();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        if (p.has_grad())
            analytic.emplace_back(p.grad().begin(), p.grad().end());
        else
            analytic.emplace_back(p.numel(), 0.0);
    }

    GradCheckReport report;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        auto& vals = p.mutable_values();
        for (size_t ei = 0; ei < vals.size(); ++ei) {
            const double saved = vals[ei];
            vals[ei] = saved + step;
            const double up = f().value();
            vals[ei] = saved - step;
            const double down = f().value();
            vals[ei] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[pi][ei];
            const double rel =
                std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst =
                    "param " + std::to_string(pi) + "[" + std::to_string(ei) + "]";
            }
        }
    }
    return report;
}

}  // namespace vcsr
