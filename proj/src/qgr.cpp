#include "vcsr/qgr.hpp"

#include <cmath>
#include <stdexcept>

#include "vcsr/ops.hpp"

namespace vcsr {

Qgr::Qgr(ParamStore& ps, const std::string& prefix, const TrainConfig& cfg, Rng& rng)
    : pe_(ps.make(prefix + ".pe", {cfg.m, cfg.d}, Init::kNormal002, rng)),
      fq_w_(), fq_b_(), fs_w_(), fs_b_(),
      m_(cfg.m),
      d_k_(cfg.cma_dk > 0 ? cfg.cma_dk : cfg.d) {
    layers_.reserve(cfg.L_isa);
    for (int l = 0; l < cfg.L_isa; ++l)
        layers_.emplace_back(ps, prefix + ".isa" + std::to_string(l), cfg.d, cfg.heads, rng);
    fq_w_ = ps.make(prefix + ".cma.fq.w", {cfg.d, d_k_}, Init::kXavier, rng);
    fq_b_ = ps.make(prefix + ".cma.fq.b", {d_k_}, Init::kZeros, rng);
    fs_w_ = ps.make(prefix + ".cma.fs.w", {cfg.d, d_k_}, Init::kXavier, rng);
    fs_b_ = ps.make(prefix + ".cma.fs.b", {d_k_}, Init::kZeros, rng);
}

int Qgr::segment_count(int n_frames, int m) {
    if (m < 1 || n_frames < m)
        throw std::invalid_argument("segment_count: need 1 <= m <= N, got m=" +
                                    std::to_string(m) + ", N=" + std::to_string(n_frames));
    return n_frames - m + 1;
}

Tensor Qgr::windowed(const Tensor& frames) const {
    const int t = segment_count(frames.dim(0), m_);
    std::vector<Tensor> parts;
    parts.reserve(t);
    for (int i = 0; i < t; ++i) parts.push_back(ops::rows(frames, i, i + m_));
    return ops::concat_rows(parts);
}

Tensor Qgr::isa(const Tensor& frames) const {
    const int t = segment_count(frames.dim(0), m_);
    Tensor x = windowed(frames);
    // One positional embedding per within-segment slot, tiled over segments.
    Tensor x_pe = ops::add(x, ops::concat_rows(std::vector<Tensor>(t, pe_)));
    for (const auto& layer : layers_) x_pe = layer.forward(x_pe, m_);
    return x_pe;
}

SegmentSet Qgr::refine(const Tensor& post_isa, const Tensor& q_g) const {
    if (post_isa.rank() != 2 || post_isa.dim(0) % m_ != 0)
        throw std::invalid_argument("Qgr::refine: post-ISA rows must be a multiple of m");
    SegmentSet set;
    set.m = m_;
    set.n_segments = post_isa.dim(0) / m_;
    set.post_isa = post_isa;
    Tensor q = ops::linear(q_g, fq_w_, fq_b_);
    Tensor keys = ops::linear(post_isa, fs_w_, fs_b_);
    set.refined = ops::attention_pool_blocks(q, keys, post_isa, m_,
                                             1.0 / std::sqrt(static_cast<double>(d_k_)),
                                             &set.cma_weights);
    return set;
}

SegmentSet Qgr::forward(const Tensor& frames, const Tensor& q_g) const {
    return refine(isa(frames), q_g);
}

SegmentSet Qgr::forward_mean_pool(const Tensor& frames) const {
    const int t = segment_count(frames.dim(0), m_);
    SegmentSet set;
    set.m = m_;
    set.n_segments = t;
    set.post_isa = windowed(frames);
    std::vector<Tensor> means;
    means.reserve(t);
    for (int i = 0; i < t; ++i) means.push_back(ops::mean_rows(ops::rows(frames, i, i + m_)));
    set.refined = ops::concat_rows(means);
    set.cma_weights.assign(static_cast<size_t>(t) * m_, 1.0 / m_);
    return set;
}

}  // namespace vcsr
