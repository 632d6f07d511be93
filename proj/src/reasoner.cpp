#include "vcsr/reasoner.hpp"

#include <stdexcept>

#include "vcsr/ops.hpp"

namespace vcsr {

Reasoner::Reasoner(ParamStore& params, const std::string& prefix, const TrainConfig& cfg,
                   int n_answers, int max_tokens, Rng& init_rng)
    : d_(cfg.d),
      heads_(cfg.heads),
      n_answers_(n_answers),
      max_tokens_(max_tokens),
      cls_readout_(cfg.readout == "cls"),
      vc_temperature_(cfg.vc_temperature) {
    if (n_answers < 2) throw std::invalid_argument("reasoner: need at least two answers");
    if (max_tokens < 2) throw std::invalid_argument("reasoner: max_tokens must be >= 2");
    layers_.reserve(cfg.mmt_layers);
    for (int l = 0; l < cfg.mmt_layers; ++l)
        layers_.emplace_back(params, prefix + ".mmt" + std::to_string(l), d_, heads_, init_rng);
    pos_ = params.make(prefix + ".pos", {max_tokens_, d_}, Init::kNormal002, init_rng);
    me_pos_seg_ = params.make(prefix + ".me.pos_seg", {d_}, Init::kNormal002, init_rng);
    me_neg_seg_ = params.make(prefix + ".me.neg_seg", {d_}, Init::kNormal002, init_rng);
    me_pos_frame_ = params.make(prefix + ".me.pos_frame", {d_}, Init::kNormal002, init_rng);
    me_neg_frame_ = params.make(prefix + ".me.neg_frame", {d_}, Init::kNormal002, init_rng);
    me_question_ = params.make(prefix + ".me.question", {d_}, Init::kNormal002, init_rng);
    cls_ = params.make(prefix + ".cls", {d_}, Init::kNormal002, init_rng);
    mc_w_ = params.make(prefix + ".mc.w", {n_answers_, d_}, Init::kXavier, init_rng);
    mc_b_ = params.make(prefix + ".mc.b", {n_answers_}, Init::kZeros, init_rng);
    open_w_ = params.make(prefix + ".open.w", {d_, n_answers_}, Init::kXavier, init_rng);
    open_b_ = params.make(prefix + ".open.b", {n_answers_}, Init::kZeros, init_rng);
}

Tensor Reasoner::type_vector(SceneTokenType type) const {
    switch (type) {
        case SceneTokenType::kPositiveSegment: return me_pos_seg_;
        case SceneTokenType::kNegativeSegment: return me_neg_seg_;
        case SceneTokenType::kPositiveFrame: return me_pos_frame_;
        case SceneTokenType::kNegativeFrame: return me_neg_frame_;
    }
    throw std::invalid_argument("reasoner: unknown token type");
}

Tensor Reasoner::mmt_forward(const std::vector<TypedTokens>& scene, const Tensor& q_l) const {
    if (scene.empty()) throw std::invalid_argument("reasoner: empty scene set");
    std::vector<Tensor> parts;
    parts.reserve(scene.size() + 2);
    if (cls_readout_) parts.push_back(cls_);
    int n_scene = 0;
    for (const TypedTokens& part : scene) {
        Tensor feat = part.features;
        if (feat.rank() == 1) feat = ops::reshape(feat, {1, feat.dim(0)});
        if (feat.rank() != 2 || feat.dim(1) != d_)
            throw std::invalid_argument("reasoner: scene tokens must be [n x d]");
        n_scene += feat.dim(0);
        parts.push_back(ops::add_rowvec(feat, type_vector(part.type)));
    }
    if (q_l.rank() != 2 || q_l.dim(1) != d_)
        throw std::invalid_argument("reasoner: question tokens must be [n x d]");
    parts.push_back(ops::add_rowvec(q_l, me_question_));
    Tensor x = ops::concat_rows(parts);
    const int n_tokens = x.dim(0);
    if (n_tokens > max_tokens_)
        throw std::invalid_argument("reasoner: " + std::to_string(n_tokens) +
                                    " tokens exceed the positional table (" +
                                    std::to_string(max_tokens_) + ")");
    x = ops::add(x, ops::rows(pos_, 0, n_tokens));
    for (const TransformerBlock& layer : layers_) x = layer.forward(x);
    if (cls_readout_) return ops::row(x, 0);
    return ops::mean_rows(ops::rows(x, 0, n_scene));
}

AnswerEmbeddings Reasoner::answer_embeddings(const std::vector<TypedTokens>& c_p,
                                             const std::vector<TypedTokens>& c_n,
                                             const Tensor& q_l, int n_negatives,
                                             Rng& rng) const {
    if (n_negatives < 0) throw std::invalid_argument("reasoner: n_negatives must be >= 0");
    AnswerEmbeddings emb;
    emb.a_p = mmt_forward(c_p, q_l);
    emb.a_n = mmt_forward(c_n, q_l);
    std::vector<TypedTokens> c_g(c_p);
    c_g.insert(c_g.end(), c_n.begin(), c_n.end());
    emb.a_g = mmt_forward(c_g, q_l);
    if (n_negatives == 0) return emb;
    if (c_n.empty()) throw std::invalid_argument("reasoner: sampling negatives from empty C_n");

    // Flatten C_n into typed rows so subsets can mix segments and frames.
    std::vector<TypedTokens> rows;
    for (const TypedTokens& part : c_n) {
        Tensor feat = part.features;
        if (feat.rank() == 1) feat = ops::reshape(feat, {1, feat.dim(0)});
        for (int r = 0; r < feat.dim(0); ++r)
            rows.push_back({ops::row(feat, r), part.type});
    }
    const int n_rows = static_cast<int>(rows.size());
    const int subset = std::min(std::max(n_rows / 2, 1), n_rows);
    emb.negatives.push_back(emb.a_n);
    for (int i = 1; i < n_negatives; ++i) {
        std::vector<TypedTokens> picked;
        picked.reserve(subset);
        for (int r : rng.sample_without_replacement(n_rows, subset)) picked.push_back(rows[r]);
        emb.negatives.push_back(mmt_forward(picked, q_l));
    }
    return emb;
}

Tensor Reasoner::visual_contrastive_loss(const AnswerEmbeddings& emb) const {
    const double inv_temp = 1.0 / vc_temperature_;
    std::vector<Tensor> sims;
    sims.reserve(emb.negatives.size() + 1);
    sims.push_back(ops::scale(ops::dot(emb.a_p, emb.a_g), inv_temp));
    for (const Tensor& neg : emb.negatives)
        sims.push_back(ops::scale(ops::dot(emb.a_p, neg), inv_temp));
    const Tensor stacked = ops::stack_scalars(sims);
    return ops::sub(ops::logsumexp(stacked), ops::element(stacked, 0));
}

std::pair<Tensor, int> Reasoner::predict_mc(const std::vector<Tensor>& a_p_per_candidate) const {
    if (static_cast<int>(a_p_per_candidate.size()) != n_answers_)
        throw std::invalid_argument("predict_mc: got " +
                                    std::to_string(a_p_per_candidate.size()) +
                                    " embeddings for " + std::to_string(n_answers_) + " heads");
    std::vector<Tensor> scores;
    scores.reserve(n_answers_);
    for (int a = 0; a < n_answers_; ++a)
        scores.push_back(ops::add(ops::dot(ops::row(mc_w_, a), a_p_per_candidate[a]),
                                  ops::element(mc_b_, a)));
    Tensor stacked = ops::stack_scalars(scores);
    const auto vals = stacked.values();
    return {stacked, argmax(std::vector<double>(vals.begin(), vals.end()))};
}

std::pair<Tensor, int> Reasoner::predict_open(const Tensor& a_p) const {
    Tensor logits = ops::linear(a_p, open_w_, open_b_);
    const auto vals = logits.values();
    return {logits, argmax(std::vector<double>(vals.begin(), vals.end()))};
}

Tensor Reasoner::total_loss(const Tensor& l_qa, const Tensor& l_vc, const Tensor& l_sp,
                            double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0)
        throw std::invalid_argument("total_loss: alpha and beta must be >= 0");
    return ops::add(l_qa, ops::add(ops::scale(l_vc, alpha), ops::scale(l_sp, beta)));
}

}  // namespace vcsr
