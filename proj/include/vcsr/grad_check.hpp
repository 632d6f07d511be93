#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vcsr/tensor.hpp"

namespace vcsr {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst;  // "<param-index>[<element>]" of the worst element
};

// Compares reverse-mode gradients of the scalar f() against central finite
// differences over every element of every leaf in params. f must rebuild its
// graph from the leaves' current values on each call (it runs 2*N+1 times).
// Relative error is |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const std::vector<Tensor>& params, const std::function<Tensor()>& f,
                           double step = 1e-5);

}  // namespace vcsr
