#pragma once

#include <string>
#include <vector>

#include "vcsr/blocks.hpp"
#include "vcsr/config.hpp"
#include "vcsr/params.hpp"
#include "vcsr/tensor.hpp"

namespace vcsr {

// Overlapping stride-1 segments plus their refined features.
struct SegmentSet {
    Tensor refined;    // S* [T x d]
    Tensor post_isa;   // [T*m x d], row t*m+j is frame j of segment t
    int n_segments = 0;  // T = N - m + 1
    int m = 0;
    std::vector<double> cma_weights;  // [T*m] forward attention weights
};

// Question-Guided Refiner. Frames are windowed into T = N - m + 1 segments
// of m frames; each segment is mixed by L layers of multi-head self-attention
// (ISA, batched block-diagonally over all segments at once), then pooled into
// one vector by single-head cross-modal attention against the question.
class Qgr {
public:
    Qgr(ParamStore& ps, const std::string& prefix, const TrainConfig& cfg, Rng& rng);

    // Segment windowing + positional embedding + ISA; question-independent.
    // Returns the [T*m x d] post-ISA frame features.
    Tensor isa(const Tensor& frames) const;

    // CMA pooling of post-ISA features into S*; one row per segment.
    SegmentSet refine(const Tensor& post_isa, const Tensor& q_g) const;

    SegmentSet forward(const Tensor& frames, const Tensor& q_g) const;

    // Ablation path: S* rows are plain means of the raw frame windows, no
    // attention anywhere; post_isa carries the raw windowed frames.
    SegmentSet forward_mean_pool(const Tensor& frames) const;

    static int segment_count(int n_frames, int m);

private:
    Tensor windowed(const Tensor& frames) const;  // [T*m x d]

    Tensor pe_;  // [m x d]
    std::vector<TransformerBlock> layers_;
    Tensor fq_w_, fq_b_, fs_w_, fs_b_;  // CMA projections to width d_k
    int m_;
    int d_k_;
};

}  // namespace vcsr
