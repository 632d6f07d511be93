#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vcsr/blocks.hpp"
#include "vcsr/config.hpp"
#include "vcsr/params.hpp"
#include "vcsr/rng.hpp"
#include "vcsr/tensor.hpp"

namespace vcsr {

// Token source, used to pick the modality vector added to each row.
enum class SceneTokenType {
    kPositiveSegment,
    kNegativeSegment,
    kPositiveFrame,
    kNegativeFrame,
};

struct TypedTokens {
    Tensor features;  // [n x d] or [d]
    SceneTokenType type;
};

struct AnswerEmbeddings {
    Tensor a_p;                     // positive-scene answer embedding
    Tensor a_n;                     // negative-scene answer embedding
    Tensor a_g;                     // global anchor over both scene sets
    std::vector<Tensor> negatives;  // anchor-side negatives a_g^i
};

// Multi-modal transformer reasoner plus the answer heads and the two
// auxiliary objectives that ride on its embeddings.
class Reasoner {
public:
    Reasoner(ParamStore& params, const std::string& prefix, const TrainConfig& cfg,
             int n_answers, int max_tokens, Rng& init_rng);

    // Adds modality vectors, concatenates scene then question tokens, applies
    // positional embeddings and the transformer stack, then reads out one
    // vector over the scene positions (mean, or a learned cls token).
    Tensor mmt_forward(const std::vector<TypedTokens>& scene, const Tensor& q_l) const;

    // a_p / a_n / a_g plus n_negatives anchor-side negatives. The first
    // negative reuses all of c_n; the rest are size-k row subsets of c_n.
    AnswerEmbeddings answer_embeddings(const std::vector<TypedTokens>& c_p,
                                       const std::vector<TypedTokens>& c_n, const Tensor& q_l,
                                       int n_negatives, Rng& rng) const;

    // -log softmax weight of (a_p . a_g) against the negative similarities.
    Tensor visual_contrastive_loss(const AnswerEmbeddings& emb) const;

    // One scalar head per candidate embedding; argmax with ties to the
    // lowest index.
    std::pair<Tensor, int> predict_mc(const std::vector<Tensor>& a_p_per_candidate) const;

    // Single linear vocabulary head over a_p.
    std::pair<Tensor, int> predict_open(const Tensor& a_p) const;

    // L_QA + alpha * L_VC + beta * L_SP.
    static Tensor total_loss(const Tensor& l_qa, const Tensor& l_vc, const Tensor& l_sp,
                             double alpha, double beta);

    int n_answers() const { return n_answers_; }
    int max_tokens() const { return max_tokens_; }

private:
    Tensor type_vector(SceneTokenType type) const;

    int d_ = 0;
    int heads_ = 0;
    int n_answers_ = 0;
    int max_tokens_ = 0;
    bool cls_readout_ = false;
    double vc_temperature_ = 1.0;
    std::vector<TransformerBlock> layers_;
    Tensor pos_;
    Tensor me_pos_seg_, me_neg_seg_, me_pos_frame_, me_neg_frame_, me_question_;
    Tensor cls_;
    Tensor mc_w_, mc_b_;      // per-candidate scalar heads
    Tensor open_w_, open_b_;  // vocabulary head
};

}  // namespace vcsr
