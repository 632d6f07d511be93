#include "vcsr/blocks.hpp"

namespace vcsr {

TransformerBlock::TransformerBlock(ParamStore& ps, const std::string& prefix, int d, int heads,
                                   Rng& rng)
    : wq_(ps.make(prefix + ".attn.wq", {d, d}, Init::kXavier, rng)),
      bq_(ps.make(prefix + ".attn.bq", {d}, Init::kZeros, rng)),
      wk_(ps.make(prefix + ".attn.wk", {d, d}, Init::kXavier, rng)),
      bk_(ps.make(prefix + ".attn.bk", {d}, Init::kZeros, rng)),
      wv_(ps.make(prefix + ".attn.wv", {d, d}, Init::kXavier, rng)),
      bv_(ps.make(prefix + ".attn.bv", {d}, Init::kZeros, rng)),
      wo_(ps.make(prefix + ".attn.wo", {d, d}, Init::kXavier, rng)),
      bo_(ps.make(prefix + ".attn.bo", {d}, Init::kZeros, rng)),
      ln1_g_(ps.make(prefix + ".ln1.g", {d}, Init::kOnes, rng)),
      ln1_b_(ps.make(prefix + ".ln1.b", {d}, Init::kZeros, rng)),
      ln2_g_(ps.make(prefix + ".ln2.g", {d}, Init::kOnes, rng)),
      ln2_b_(ps.make(prefix + ".ln2.b", {d}, Init::kZeros, rng)),
      ff1_w_(ps.make(prefix + ".ff1.w", {d, 4 * d}, Init::kXavier, rng)),
      ff1_b_(ps.make(prefix + ".ff1.b", {4 * d}, Init::kZeros, rng)),
      ff2_w_(ps.make(prefix + ".ff2.w", {4 * d, d}, Init::kXavier, rng)),
      ff2_b_(ps.make(prefix + ".ff2.b", {d}, Init::kZeros, rng)),
      heads_(heads) {}

Tensor TransformerBlock::forward(const Tensor& x, int block) const {
    Tensor h = ops::layer_norm(x, ln1_g_, ln1_b_);
    Tensor q = ops::linear(h, wq_, bq_);
    Tensor k = ops::linear(h, wk_, bk_);
    Tensor v = ops::linear(h, wv_, bv_);
    Tensor attn = ops::multi_head_attention(q, k, v, heads_, block);
    Tensor x1 = ops::add(x, ops::linear(attn, wo_, bo_));
    Tensor h2 = ops::layer_norm(x1, ln2_g_, ln2_b_);
    Tensor ff = ops::linear(ops::relu(ops::linear(h2, ff1_w_, ff1_b_)), ff2_w_, ff2_b_);
    return ops::add(x1, ff);
}

}  // namespace vcsr
