#pragma once

#include <vector>

#include "vcsr/rng.hpp"
#include "vcsr/tensor.hpp"

// Differentiable ops over Tensor. Each op validates shapes eagerly and
// registers an analytic backward closure. Matrices are row-major rank-2,
// vectors rank-1, scalars rank-0.

namespace vcsr {

// Logit value used to mask entries out of a softmax. exp(kMaskLogit - max)
// underflows to exactly 0 for any realistic unmasked max.
inline constexpr double kMaskLogit = -1e30;

namespace ops {

// -- elementwise / broadcast ------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);    // same shape
Tensor sub(const Tensor& a, const Tensor& b);    // same shape
Tensor mul(const Tensor& a, const Tensor& b);    // same shape, elementwise
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);  // elementwise; throws on entries <= 0
Tensor add_rowvec(const Tensor& x, const Tensor& v);  // [n x d] + [d]

// -- shape plumbing ----------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& shape);     // same numel
Tensor row(const Tensor& x, int i);                      // [n x d] -> [d]
Tensor rows(const Tensor& x, int r0, int r1);            // [n x d] -> [r1-r0 x d]
Tensor concat_rows(const std::vector<Tensor>& parts);    // [ni x d] or [d] pieces
Tensor stack_scalars(const std::vector<Tensor>& parts);  // numel-1 pieces -> [n]
Tensor element(const Tensor& v, int i);                  // [n] -> scalar
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);

// -- reductions --------------------------------------------------------------

Tensor sum(const Tensor& a);        // -> scalar
Tensor mean_all(const Tensor& a);   // -> scalar
Tensor mean_rows(const Tensor& x);  // [n x d] -> [d]
Tensor dot(const Tensor& u, const Tensor& v);
Tensor logsumexp(const Tensor& v);  // [n] -> scalar, max-shifted

// -- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // [m x k] * [k x n]
Tensor matvec(const Tensor& a, const Tensor& v);  // [m x k] * [k] -> [m]
Tensor vecmat(const Tensor& v, const Tensor& b);  // [k] * [k x n] -> [n]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // x*W + b

// -- normalization / activations ----------------------------------------------

// Softmax over the last dimension; rank-1 input is one row. Numerically
// stabilized by max subtraction, so kMaskLogit entries get exactly 0.
Tensor softmax_lastdim(const Tensor& x);

// Per-row layer norm with learned gain/bias, epsilon 1e-5.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);

// Gumbel-softmax over a rank-1 logit vector. Draws one Gumbel per entry from
// rng, returns softmax((logits+g)/temperature). With hard=true the forward
// value is the one-hot argmax and gradients flow through the soft weights
// (straight-through). argmax_out, if given, receives the soft argmax index.
Tensor gumbel_softmax(const Tensor& logits, double temperature, bool hard,
                      Rng& rng, int* argmax_out = nullptr);

// -- similarity / losses -------------------------------------------------------

Tensor cosine_similarity(const Tensor& u, const Tensor& v);  // throws on zero norm
Tensor cross_entropy(const Tensor& logits, int target);      // -> scalar

// -- attention ----------------------------------------------------------------

// Multi-head scaled dot-product attention, shared projection-free core:
// callers project q/k/v beforehand. q [nq x d], k,v [nk x d], d % heads == 0.
// When block > 0, nq == nk and rows attend only within consecutive groups of
// `block` rows (nq % block == 0). attn_out, if given, receives the forward
// attention weights per head, laid out head-major [heads][nq x nk_or_block].
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            int heads, int block = 0,
                            std::vector<double>* attn_out = nullptr);

// Pools every block of `block` rows of vals into one row, weighted by
// softmax(scale * keys_block * query) over the block. query [dk],
// keys [n x dk], vals [n x dv], n % block == 0 -> [n/block x dv].
// attn_out, if given, receives the n forward weights.
Tensor attention_pool_blocks(const Tensor& query, const Tensor& keys,
                             const Tensor& vals, int block, double scale,
                             std::vector<double>* attn_out = nullptr);

}  // namespace ops

// Index of the largest value; ties resolve to the lowest index.
int argmax(const std::vector<double>& v);

}  // namespace vcsr
