#pragma once

#include <string>
#include <vector>

#include "vcsr/ops.hpp"
#include "vcsr/params.hpp"
#include "vcsr/tensor.hpp"

namespace vcsr {

// Pre-norm transformer encoder layer: x + MHA(LN(x)), then x + FF(LN(x)),
// feed-forward width 4d. Passing block > 0 restricts self-attention to
// consecutive groups of `block` rows, which batches many independent
// sequences through one call.
class TransformerBlock {
public:
    TransformerBlock(ParamStore& ps, const std::string& prefix, int d, int heads, Rng& rng);

    Tensor forward(const Tensor& x, int block = 0) const;

    int heads() const { return heads_; }

private:
    Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
    Tensor ln1_g_, ln1_b_, ln2_g_, ln2_b_;
    Tensor ff1_w_, ff1_b_, ff2_w_, ff2_b_;
    int heads_;
};

}  // namespace vcsr
