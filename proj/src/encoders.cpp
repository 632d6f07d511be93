#include "vcsr/encoders.hpp"

#include <stdexcept>

#include "vcsr/datagen.hpp"
#include "vcsr/ops.hpp"

namespace vcsr {

QuestionEncoder::QuestionEncoder(ParamStore& ps, const std::string& prefix, int vocab, int d,
                                 int heads, int max_len, Rng& rng)
    : embed_(ps.make(prefix + ".embed", {vocab, d}, Init::kNormal002, rng)),
      pos_(ps.make(prefix + ".pos", {max_len, d}, Init::kNormal002, rng)),
      block_(ps, prefix + ".layer0", d, heads, rng),
      vocab_(vocab),
      max_len_(max_len) {}

QuestionEncoding QuestionEncoder::run(const std::vector<int>& ids) const {
    if (ids.size() < 2)
        throw std::invalid_argument("QuestionEncoder: need at least [CLS] plus one token");
    if (static_cast<int>(ids.size()) > max_len_)
        throw std::invalid_argument("QuestionEncoder: " + std::to_string(ids.size()) +
                                    " tokens exceed max length " + std::to_string(max_len_));
    if (ids[0] != kClsToken)
        throw std::invalid_argument("QuestionEncoder: sequence must start with [CLS]");
    for (int id : ids)
        if (id < 0 || id >= vocab_)
            throw std::invalid_argument("QuestionEncoder: token id " + std::to_string(id) +
                                        " outside vocabulary of " + std::to_string(vocab_));
    const int n = static_cast<int>(ids.size());
    Tensor x = ops::add(ops::gather_rows(embed_, ids), ops::rows(pos_, 0, n));
    Tensor out = block_.forward(x);
    return {ops::row(out, 0), ops::rows(out, 1, n)};
}

QuestionEncoding QuestionEncoder::encode(const std::vector<int>& tokens) const {
    return run(tokens);
}

QuestionEncoding QuestionEncoder::encode_with_candidate(const std::vector<int>& tokens,
                                                        const std::vector<int>& candidate) const {
    if (tokens.empty() || tokens[0] != kClsToken)
        throw std::invalid_argument("QuestionEncoder: question must start with [CLS]");
    std::vector<int> ids = tokens;
    ids.push_back(kSepToken);
    ids.insert(ids.end(), candidate.begin(), candidate.end());
    return run(ids);
}

FrameProjector::FrameProjector(ParamStore& ps, const std::string& prefix, int d_in, int d,
                               Rng& rng)
    : w_(ps.make(prefix + ".w", {d_in, d}, Init::kXavier, rng)),
      b_(ps.make(prefix + ".b", {d}, Init::kZeros, rng)),
      d_in_(d_in) {}

Tensor FrameProjector::project(const Tensor& frames) const {
    if (frames.rank() != 2 || frames.dim(1) != d_in_)
        throw std::invalid_argument("FrameProjector: expected [N x " + std::to_string(d_in_) +
                                    "], got " + shape_str(frames.shape()));
    return ops::linear(frames, w_, b_);
}

}  // namespace vcsr
