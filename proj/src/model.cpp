#include "vcsr/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "vcsr/ops.hpp"

namespace vcsr {

namespace {

int reasoner_token_budget(const TrainConfig& cfg, int t) {
    return 1 + std::max(4 * cfg.k, t) + cfg.max_question_len;
}

}  // namespace

VcsrModel::VcsrModel(const TrainConfig& cfg, int d_in, int n_frames, int vocab, int n_answers)
    : cfg_(cfg),
      d_in_(d_in),
      n_frames_(n_frames),
      t_(Qgr::segment_count(n_frames, cfg.m)),
      params_(),
      init_rng_(cfg.seed),
      qenc_(params_, "qenc", vocab, cfg.d, cfg.heads, cfg.max_question_len, init_rng_),
      fproj_(params_, "fproj", d_in, cfg.d, init_rng_),
      qgr_(params_, "qgr", cfg, init_rng_),
      css_(params_, "css", cfg, init_rng_),
      reasoner_(params_, "reasoner", cfg, n_answers, reasoner_token_budget(cfg, t_), init_rng_),
      pool_(cfg.pool_capacity) {
    cfg_.validate();
    if (d_in < 1 || vocab < 4) throw std::invalid_argument("model: bad d_in or vocabulary size");
    if (cfg_.use_css && cfg_.k > t_)
        throw std::invalid_argument("model: k=" + std::to_string(cfg_.k) + " exceeds T=" +
                                    std::to_string(t_) + " segments");
}

Tensor VcsrModel::branch(const QuestionEncoding& enc, bool truth_branch, const Tensor& post_isa,
                         const SegmentSet& shared_set, const SyntheticSample& sample,
                         const ForwardOptions& opt, int n_negatives, Rng& rng,
                         ForwardResult& res) {
    const SegmentSet set = cfg_.use_qgr ? qgr_.refine(post_isa, enc.q_g) : shared_set;
    if (!cfg_.use_css) {
        const std::vector<TypedTokens> scene{{set.refined, SceneTokenType::kPositiveSegment}};
        return reasoner_.mmt_forward(scene, enc.q_l);
    }

    const Tensor a_s = css_.segment_attention_scores(set.refined, enc.q_g);
    auto [s_p, indices] = css_.select_positive_segments(set.refined, a_s, cfg_.k,
                                                        opt.temperature, rng, opt.hard,
                                                        opt.stochastic);
    const bool want_contrast = truth_branch && opt.training && cfg_.use_vc;
    std::vector<NegativeRef> negatives;
    Tensor s_n;
    if (want_contrast) {
        negatives = css_.build_negative_set(a_s, indices, pool_, resolved_tau(), cfg_.k,
                                            sample.video_id, rng, cfg_.neg_pool_ratio);
        s_n = css_.gather_negative_segments(set.refined, negatives, pool_);
    }
    const Css::FrameSelection frames = css_.filter_frames(
        set.post_isa, enc.q_g, indices, negatives, pool_, opt.temperature, rng, opt.hard,
        opt.stochastic);

    std::vector<TypedTokens> c_p{{s_p, SceneTokenType::kPositiveSegment},
                                 {frames.f_p, SceneTokenType::kPositiveFrame}};
    Tensor a_p;
    if (want_contrast) {
        const std::vector<TypedTokens> c_n{{s_n, SceneTokenType::kNegativeSegment},
                                           {frames.f_n, SceneTokenType::kNegativeFrame}};
        const AnswerEmbeddings emb =
            reasoner_.answer_embeddings(c_p, c_n, enc.q_l, n_negatives, rng);
        a_p = emb.a_p;
        res.l_vc = reasoner_.visual_contrastive_loss(emb);
    } else {
        a_p = reasoner_.mmt_forward(c_p, enc.q_l);
    }

    if (truth_branch) {
        res.positive_indices = indices;
        res.positive_frames = frames.positive_frames;
        if (opt.training && cfg_.use_sp)
            res.l_sp = css_.semantic_preserving_loss(enc.q_g, frames.f_p, s_p);
        if (opt.update_pool && pool_.capacity() > 0) {
            const auto seg_vals = s_p.values();
            const auto frame_vals = set.post_isa.values();
            const int d = cfg_.d;
            for (size_t i = 0; i < indices.size(); ++i) {
                const int t = indices[i];
                int best = 0;
                for (int j = 1; j < set.m; ++j)
                    if (set.cma_weights[t * set.m + j] > set.cma_weights[t * set.m + best])
                        best = j;
                const long seg_off = static_cast<long>(i) * d;
                const long frame_off = (static_cast<long>(t) * set.m + best) * d;
                pool_.insert(
                    std::vector<double>(seg_vals.begin() + seg_off, seg_vals.begin() + seg_off + d),
                    std::vector<double>(frame_vals.begin() + frame_off,
                                        frame_vals.begin() + frame_off + d),
                    sample.video_id);
            }
        }
    }
    return a_p;
}

ForwardResult VcsrModel::forward(const SyntheticSample& sample, const ForwardOptions& opt,
                                 Rng& rng) {
    if (sample.frames.rank() != 2 || sample.frames.dim(0) != n_frames_ ||
        sample.frames.dim(1) != d_in_)
        throw std::invalid_argument("model: sample frames must be [" +
                                    std::to_string(n_frames_) + " x " + std::to_string(d_in_) +
                                    "]");
    const int n_negatives = opt.n_negatives < 0 ? cfg_.n_negatives : opt.n_negatives;
    const Tensor proj = fproj_.project(sample.frames);
    Tensor post_isa;
    SegmentSet shared_set;
    if (cfg_.use_qgr) {
        post_isa = qgr_.isa(proj);
    } else {
        shared_set = qgr_.forward_mean_pool(proj);
    }

    ForwardResult res;
    if (cfg_.mode == "mc") {
        const int n_cand = static_cast<int>(sample.candidate_tokens.size());
        if (n_cand != reasoner_.n_answers())
            throw std::invalid_argument("model: sample has " + std::to_string(n_cand) +
                                        " candidates, reasoner expects " +
                                        std::to_string(reasoner_.n_answers()));
        if (sample.answer_index < 0 || sample.answer_index >= n_cand)
            throw std::invalid_argument("model: answer index out of range");
        std::vector<Tensor> per_candidate;
        per_candidate.reserve(n_cand);
        for (int a = 0; a < n_cand; ++a) {
            const QuestionEncoding enc = qenc_.encode_with_candidate(
                sample.question_tokens, {sample.candidate_tokens[a]});
            per_candidate.push_back(branch(enc, a == sample.answer_index, post_isa, shared_set,
                                           sample, opt, n_negatives, rng, res));
        }
        auto [scores, predicted] = reasoner_.predict_mc(per_candidate);
        res.scores = scores;
        res.predicted = predicted;
        res.l_qa = ops::cross_entropy(scores, sample.answer_index);
    } else {
        const QuestionEncoding enc = qenc_.encode(sample.question_tokens);
        const Tensor a_p =
            branch(enc, true, post_isa, shared_set, sample, opt, n_negatives, rng, res);
        auto [logits, predicted] = reasoner_.predict_open(a_p);
        res.scores = logits;
        res.predicted = predicted;
        if (sample.answer_id < 0 || sample.answer_id >= reasoner_.n_answers())
            throw std::invalid_argument("model: answer id out of range");
        res.l_qa = ops::cross_entropy(logits, sample.answer_id);
    }
    if (!res.l_vc.defined()) res.l_vc = Tensor::scalar(0.0);
    if (!res.l_sp.defined()) res.l_sp = Tensor::scalar(0.0);
    res.total = Reasoner::total_loss(res.l_qa, res.l_vc, res.l_sp, cfg_.alpha, cfg_.beta);
    return res;
}

}  // namespace vcsr
