#pragma once

#include <string>
#include <vector>

#include "vcsr/config.hpp"
#include "vcsr/css.hpp"
#include "vcsr/datagen.hpp"
#include "vcsr/encoders.hpp"
#include "vcsr/params.hpp"
#include "vcsr/qgr.hpp"
#include "vcsr/reasoner.hpp"
#include "vcsr/rng.hpp"

namespace vcsr {

struct ForwardOptions {
    bool training = true;     // compute auxiliary losses on the truth branch
    bool stochastic = true;   // Gumbel draws; false = deterministic argmax
    bool hard = true;         // straight-through one-hot vs convex mix
    double temperature = 1.0;
    bool update_pool = false; // push truth-branch segments into the pool
    int n_negatives = -1;     // contrastive subsets; -1 = config value
};

struct ForwardResult {
    Tensor scores;  // [n_answers] candidate scores or vocabulary logits
    int predicted = -1;
    Tensor l_qa, l_vc, l_sp, total;
    std::vector<int> positive_indices;  // truth-branch selected segments
    std::vector<int> positive_frames;   // absolute frame index per positive
};

// Full pipeline: frame projection, question encoding (candidate-conditioned
// in multi-choice mode), segment refinement, causal scene separation, and the
// transformer reasoner with its heads. Ablation flags in the config swap the
// refiner for mean pooling and bypass scene separation.
class VcsrModel {
public:
    VcsrModel(const TrainConfig& cfg, int d_in, int n_frames, int vocab, int n_answers);

    ForwardResult forward(const SyntheticSample& sample, const ForwardOptions& opt, Rng& rng);

    ParamStore& params() { return params_; }
    const TrainConfig& config() const { return cfg_; }
    SegmentPool& pool() { return pool_; }
    int segment_count() const { return t_; }
    int n_answers() const { return reasoner_.n_answers(); }
    double resolved_tau() const { return cfg_.tau < 0.0 ? 1.0 / t_ : cfg_.tau; }

private:
    Tensor branch(const QuestionEncoding& enc, bool truth_branch, const Tensor& post_isa,
                  const SegmentSet& shared_set, const SyntheticSample& sample,
                  const ForwardOptions& opt, int n_negatives, Rng& rng, ForwardResult& res);

    TrainConfig cfg_;
    int d_in_ = 0;
    int n_frames_ = 0;
    int t_ = 0;
    ParamStore params_;
    Rng init_rng_;
    QuestionEncoder qenc_;
    FrameProjector fproj_;
    Qgr qgr_;
    Css css_;
    Reasoner reasoner_;
    SegmentPool pool_;
};

}  // namespace vcsr
