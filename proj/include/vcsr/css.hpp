#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vcsr/config.hpp"
#include "vcsr/params.hpp"
#include "vcsr/rng.hpp"
#include "vcsr/tensor.hpp"

namespace vcsr {

// One cached cross-video segment: detached feature values plus a
// representative frame captured when the segment was inserted.
struct PoolEntry {
    std::vector<double> segment;
    std::vector<double> frame;
    uint64_t video_id = 0;
};

// Fixed-capacity FIFO ring of segment features from other videos.
class SegmentPool {
public:
    explicit SegmentPool(int capacity);

    void insert(std::vector<double> segment, std::vector<double> frame, uint64_t video_id);
    // Slot indices whose source video differs from `exclude_video`.
    std::vector<int> eligible(uint64_t exclude_video) const;
    const PoolEntry& entry(int slot) const;
    int size() const;
    int capacity() const { return capacity_; }

private:
    std::vector<PoolEntry> entries_;
    int capacity_ = 0;
    int write_pos_ = 0;
};

// Where one negative scene came from: a low-attention segment of the query
// video (own_index >= 0) or a pool slot (pool_index >= 0).
struct NegativeRef {
    int own_index = -1;
    int pool_index = -1;
};

struct SceneSelection {
    Tensor a_s;                           // [T] segment attention scores
    Tensor s_p;                           // [k x d] positive segments
    Tensor s_n;                           // [k x d] negative segments
    Tensor f_p;                           // [k x d] positive frames
    Tensor f_n;                           // [k x d] negative frames
    std::vector<int> positive_indices;    // distinct segment ids in [0, T)
    std::vector<int> positive_frames;     // absolute frame index per positive
    std::vector<NegativeRef> negatives;   // provenance per negative
};

// Causal scene separator: question-conditioned segment scoring, repeated
// straight-through Gumbel selection, negative-set assembly and the per
// segment frame filter.
class Css {
public:
    Css(ParamStore& params, const std::string& prefix, const TrainConfig& cfg, Rng& init_rng);

    // softmax(g_q(q_g) . g_s(S*)^T) over segments.
    Tensor segment_attention_scores(const Tensor& s_star, const Tensor& q_g) const;

    // k Gumbel draws over log a_s, masking each chosen logit afterwards so
    // indices never repeat. hard=false keeps the convex combination;
    // sample=false replaces the stochastic draw with argmax.
    std::pair<Tensor, std::vector<int>> select_positive_segments(const Tensor& s_star,
                                                                 const Tensor& a_s, int k,
                                                                 double temperature, Rng& rng,
                                                                 bool hard = true,
                                                                 bool sample = true) const;

    // Candidates: own segments with a_s < tau (positives excluded) plus pool
    // entries from other videos. ratio = -1 samples k uniformly from the
    // union; otherwise round(ratio * k) come from the pool when available.
    std::vector<NegativeRef> build_negative_set(const Tensor& a_s,
                                                const std::vector<int>& positive_indices,
                                                const SegmentPool& pool, double tau, int k,
                                                uint64_t video_id, Rng& rng,
                                                double ratio = -1.0) const;

    // Rows of S* / pool features for the chosen negatives.
    Tensor gather_negative_segments(const Tensor& s_star,
                                    const std::vector<NegativeRef>& negatives,
                                    const SegmentPool& pool) const;

    // One frame from segment `seg`: Gumbel draw over within-segment scores
    // against q_g. Writes the within-segment index if requested.
    Tensor select_frame(const Tensor& post_isa, int seg, const Tensor& q_g, double temperature,
                        Rng& rng, int* frame_in_segment = nullptr, bool hard = true,
                        bool sample = true) const;

    struct FrameSelection {
        Tensor f_p;                        // [k x d]
        Tensor f_n;                        // [k x d]
        std::vector<int> positive_frames;  // absolute frame indices
    };

    // Frames for every positive and negative scene. Own-video negatives take
    // the same Gumbel path; pool negatives reuse their stored frame.
    FrameSelection filter_frames(const Tensor& post_isa, const Tensor& q_g,
                                 const std::vector<int>& positive_indices,
                                 const std::vector<NegativeRef>& negatives,
                                 const SegmentPool& pool, double temperature, Rng& rng,
                                 bool hard = true, bool sample = true) const;

    // Hinge over per-pair 2-way softmax importances: sum_i max(I_f - I_s, 0).
    Tensor semantic_preserving_loss(const Tensor& q_g, const Tensor& f_p,
                                    const Tensor& s_p) const;

private:
    int d_ = 0;
    int m_ = 0;
    Tensor gq_w_, gq_b_;  // segment scoring projections
    Tensor gs_w_, gs_b_;
    Tensor hq_w_, hq_b_;  // frame scoring projections
    Tensor hf_w_, hf_b_;
};

}  // namespace vcsr
