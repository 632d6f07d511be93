#include "vcsr/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vcsr {

AdamW::AdamW(std::vector<Tensor> params, double lr, double beta1, double beta2,
             double weight_decay, double eps)
    : params_(std::move(params)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      weight_decay_(weight_decay),
      eps_(eps) {
    if (lr <= 0.0) throw std::invalid_argument("AdamW: lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("AdamW: betas must lie in [0, 1)");
    if (weight_decay < 0.0) throw std::invalid_argument("AdamW: weight_decay must be >= 0");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        if (!p.defined() || !p.requires_grad())
            throw std::invalid_argument("AdamW: parameters must be defined gradient leaves");
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::set_lr(double lr) {
    if (lr <= 0.0) throw std::invalid_argument("AdamW: lr must be positive");
    lr_ = lr;
}

void AdamW::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, step_count_);
    const double bc2 = 1.0 - std::pow(beta2_, step_count_);
    for (size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].has_grad()) continue;  // leaf untouched by this graph
        auto& value = params_[i].mutable_values();
        const auto grad = params_[i].grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < value.size(); ++j) {
            const double g = grad[j];
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            value[j] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * value[j]);
        }
    }
}

PlateauHalver::PlateauHalver(int patience)
    : patience_(patience), best_(-std::numeric_limits<double>::infinity()) {
    if (patience < 1) throw std::invalid_argument("PlateauHalver: patience must be >= 1");
}

bool PlateauHalver::observe(double metric) {
    if (!seen_any_ || metric > best_) {
        best_ = metric;
        seen_any_ = true;
        streak_ = 0;
        return false;
    }
    if (++streak_ >= patience_) {
        streak_ = 0;
        return true;
    }
    return false;
}

}  // namespace vcsr
