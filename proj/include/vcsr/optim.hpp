#pragma once

#include <vector>

#include "vcsr/tensor.hpp"

namespace vcsr {

// Adam with decoupled weight decay. Parameters are updated in place from
// their accumulated gradients; the caller zeroes gradients between steps.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.99,
          double weight_decay = 0.0, double eps = 1e-8);

    void step();
    double lr() const { return lr_; }
    void set_lr(double lr);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, weight_decay_, eps_;
    long step_count_ = 0;
};

// Halves the learning rate when the watched metric fails to strictly improve
// for `patience` consecutive observations.
class PlateauHalver {
public:
    explicit PlateauHalver(int patience);

    // Returns true when the caller should halve the learning rate now.
    bool observe(double metric);
    double best() const { return best_; }

private:
    int patience_;
    int streak_ = 0;
    double best_;
    bool seen_any_ = false;
};

}  // namespace vcsr
