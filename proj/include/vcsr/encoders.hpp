#pragma once

#include <string>
#include <vector>

#include "vcsr/blocks.hpp"
#include "vcsr/params.hpp"
#include "vcsr/tensor.hpp"

namespace vcsr {

struct QuestionEncoding {
    Tensor q_g;  // [d], the [CLS] output
    Tensor q_l;  // [n_tok x d], remaining token outputs
};

// Embedding table + learned positional embedding + one transformer encoder
// layer. Stands in for a pretrained language model; downstream consumes only
// (q_g, q_l).
class QuestionEncoder {
public:
    QuestionEncoder(ParamStore& ps, const std::string& prefix, int vocab, int d, int heads,
                    int max_len, Rng& rng);

    QuestionEncoding encode(const std::vector<int>& tokens) const;
    // Encodes [CLS] + question[1:] + [SEP] + candidate tokens.
    QuestionEncoding encode_with_candidate(const std::vector<int>& tokens,
                                           const std::vector<int>& candidate) const;

private:
    QuestionEncoding run(const std::vector<int>& ids) const;

    Tensor embed_;  // [vocab x d]
    Tensor pos_;    // [max_len x d]
    TransformerBlock block_;
    int vocab_;
    int max_len_;
};

// Per-frame linear projection from the input feature width to the model width.
class FrameProjector {
public:
    FrameProjector(ParamStore& ps, const std::string& prefix, int d_in, int d, Rng& rng);

    Tensor project(const Tensor& frames) const;  // [N x d_in] -> [N x d]

private:
    Tensor w_, b_;
    int d_in_;
};

}  // namespace vcsr
