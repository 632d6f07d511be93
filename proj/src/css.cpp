#include "vcsr/css.hpp"

#include <cmath>
#include <stdexcept>

#include "vcsr/ops.hpp"

namespace vcsr {

SegmentPool::SegmentPool(int capacity) : capacity_(capacity) {
    if (capacity < 0) throw std::invalid_argument("segment pool: capacity must be >= 0");
    entries_.reserve(capacity);
}

void SegmentPool::insert(std::vector<double> segment, std::vector<double> frame,
                         uint64_t video_id) {
    if (capacity_ == 0) return;
    PoolEntry e{std::move(segment), std::move(frame), video_id};
    if (static_cast<int>(entries_.size()) < capacity_) {
        entries_.push_back(std::move(e));
    } else {
        entries_[write_pos_] = std::move(e);
    }
    write_pos_ = (write_pos_ + 1) % capacity_;
}

std::vector<int> SegmentPool::eligible(uint64_t exclude_video) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(entries_.size()); ++i)
        if (entries_[i].video_id != exclude_video) out.push_back(i);
    return out;
}

const PoolEntry& SegmentPool::entry(int slot) const {
    if (slot < 0 || slot >= static_cast<int>(entries_.size()))
        throw std::invalid_argument("segment pool: slot out of range");
    return entries_[slot];
}

int SegmentPool::size() const { return static_cast<int>(entries_.size()); }

Css::Css(ParamStore& params, const std::string& prefix, const TrainConfig& cfg, Rng& init_rng)
    : d_(cfg.d), m_(cfg.m) {
    gq_w_ = params.make(prefix + ".gq.w", {d_, d_}, Init::kXavier, init_rng);
    gq_b_ = params.make(prefix + ".gq.b", {d_}, Init::kZeros, init_rng);
    gs_w_ = params.make(prefix + ".gs.w", {d_, d_}, Init::kXavier, init_rng);
    gs_b_ = params.make(prefix + ".gs.b", {d_}, Init::kZeros, init_rng);
    hq_w_ = params.make(prefix + ".hq.w", {d_, d_}, Init::kXavier, init_rng);
    hq_b_ = params.make(prefix + ".hq.b", {d_}, Init::kZeros, init_rng);
    hf_w_ = params.make(prefix + ".hf.w", {d_, d_}, Init::kXavier, init_rng);
    hf_b_ = params.make(prefix + ".hf.b", {d_}, Init::kZeros, init_rng);
}

Tensor Css::segment_attention_scores(const Tensor& s_star, const Tensor& q_g) const {
    if (s_star.rank() != 2 || s_star.dim(1) != d_)
        throw std::invalid_argument("segment scores: S* must be [T x d]");
    if (s_star.dim(0) < 1) throw std::invalid_argument("segment scores: need at least one segment");
    const Tensor proj_q = ops::linear(q_g, gq_w_, gq_b_);
    const Tensor keys = ops::linear(s_star, gs_w_, gs_b_);
    return ops::softmax_lastdim(ops::matvec(keys, proj_q));
}

namespace {

// Deterministic stand-in for a Gumbel draw: one-hot at the argmax.
Tensor onehot_at(int n, int index) {
    std::vector<double> v(n, 0.0);
    v[index] = 1.0;
    return Tensor::from_data({n}, v);
}

std::vector<double> masked_values(const Tensor& logits, const std::vector<double>& mask) {
    std::vector<double> v(logits.values().begin(), logits.values().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] += mask[i];
    return v;
}

}  // namespace

std::pair<Tensor, std::vector<int>> Css::select_positive_segments(const Tensor& s_star,
                                                                  const Tensor& a_s, int k,
                                                                  double temperature, Rng& rng,
                                                                  bool hard, bool sample) const {
    const int t = a_s.dim(0);
    if (s_star.dim(0) != t) throw std::invalid_argument("segment selection: S* and a_s disagree");
    if (k < 1 || k > t)
        throw std::invalid_argument("segment selection: k must lie in [1, T], got k=" +
                                    std::to_string(k) + " with T=" + std::to_string(t));
    const Tensor log_as = ops::log(a_s);
    std::vector<double> mask(t, 0.0);
    std::vector<Tensor> rows;
    std::vector<int> indices;
    rows.reserve(k);
    indices.reserve(k);
    for (int draw = 0; draw < k; ++draw) {
        const Tensor masked = ops::add(log_as, Tensor::from_data({t}, mask));
        int arg = -1;
        Tensor y;
        if (sample) {
            y = ops::gumbel_softmax(masked, temperature, hard, rng, &arg);
        } else {
            arg = argmax(masked_values(log_as, mask));
            y = onehot_at(t, arg);
        }
        rows.push_back(ops::vecmat(y, s_star));
        indices.push_back(arg);
        mask[arg] = kMaskLogit;
    }
    return {ops::concat_rows(rows), indices};
}

std::vector<NegativeRef> Css::build_negative_set(const Tensor& a_s,
                                                 const std::vector<int>& positive_indices,
                                                 const SegmentPool& pool, double tau, int k,
                                                 uint64_t video_id, Rng& rng,
                                                 double ratio) const {
    const int t = a_s.dim(0);
    std::vector<char> is_positive(t, 0);
    for (int idx : positive_indices) {
        if (idx < 0 || idx >= t)
            throw std::invalid_argument("negative set: positive index out of range");
        is_positive[idx] = 1;
    }
    std::vector<NegativeRef> own;
    for (int i = 0; i < t; ++i)
        if (!is_positive[i] && a_s.at(i) < tau) own.push_back({i, -1});
    std::vector<NegativeRef> from_pool;
    for (int slot : pool.eligible(video_id)) from_pool.push_back({-1, slot});

    const int n_own = static_cast<int>(own.size());
    const int n_pool = static_cast<int>(from_pool.size());
    if (n_own + n_pool < k)
        throw std::runtime_error("negative set: only " + std::to_string(n_own + n_pool) +
                                 " candidates for k=" + std::to_string(k));

    std::vector<NegativeRef> out;
    out.reserve(k);
    if (ratio < 0.0) {
        std::vector<NegativeRef> all(own);
        all.insert(all.end(), from_pool.begin(), from_pool.end());
        for (int pick : rng.sample_without_replacement(static_cast<int>(all.size()), k))
            out.push_back(all[pick]);
        return out;
    }
    int pool_take = std::min(static_cast<int>(std::lround(ratio * k)), n_pool);
    int own_take = k - pool_take;
    if (own_take > n_own) {
        own_take = n_own;
        pool_take = k - own_take;
    }
    for (int pick : rng.sample_without_replacement(n_own, own_take)) out.push_back(own[pick]);
    for (int pick : rng.sample_without_replacement(n_pool, pool_take))
        out.push_back(from_pool[pick]);
    return out;
}

Tensor Css::gather_negative_segments(const Tensor& s_star,
                                     const std::vector<NegativeRef>& negatives,
                                     const SegmentPool& pool) const {
    std::vector<Tensor> rows;
    rows.reserve(negatives.size());
    for (const NegativeRef& ref : negatives) {
        if (ref.own_index >= 0) {
            rows.push_back(ops::row(s_star, ref.own_index));
        } else {
            rows.push_back(Tensor::from_data({d_}, pool.entry(ref.pool_index).segment));
        }
    }
    return ops::concat_rows(rows);
}

Tensor Css::select_frame(const Tensor& post_isa, int seg, const Tensor& q_g, double temperature,
                         Rng& rng, int* frame_in_segment, bool hard, bool sample) const {
    if (post_isa.rank() != 2 || post_isa.dim(0) % m_ != 0)
        throw std::invalid_argument("frame filter: per-segment frames must be [T*m x d]");
    const int t = post_isa.dim(0) / m_;
    if (seg < 0 || seg >= t) throw std::invalid_argument("frame filter: segment index out of range");
    const Tensor frames = ops::rows(post_isa, seg * m_, (seg + 1) * m_);
    const Tensor keys = ops::linear(frames, hf_w_, hf_b_);
    const Tensor proj_q = ops::linear(q_g, hq_w_, hq_b_);
    const Tensor scores = ops::softmax_lastdim(ops::matvec(keys, proj_q));
    int arg = -1;
    Tensor y;
    if (sample) {
        y = ops::gumbel_softmax(ops::log(scores), temperature, hard, rng, &arg);
    } else {
        const auto vals = scores.values();
        arg = argmax(std::vector<double>(vals.begin(), vals.end()));
        y = onehot_at(m_, arg);
    }
    if (frame_in_segment) *frame_in_segment = arg;
    return ops::vecmat(y, frames);
}

Css::FrameSelection Css::filter_frames(const Tensor& post_isa, const Tensor& q_g,
                                       const std::vector<int>& positive_indices,
                                       const std::vector<NegativeRef>& negatives,
                                       const SegmentPool& pool, double temperature, Rng& rng,
                                       bool hard, bool sample) const {
    FrameSelection sel;
    std::vector<Tensor> pos_rows, neg_rows;
    pos_rows.reserve(positive_indices.size());
    neg_rows.reserve(negatives.size());
    for (int seg : positive_indices) {
        int within = -1;
        pos_rows.push_back(select_frame(post_isa, seg, q_g, temperature, rng, &within, hard, sample));
        sel.positive_frames.push_back(seg + within);
    }
    for (const NegativeRef& ref : negatives) {
        if (ref.own_index >= 0) {
            neg_rows.push_back(
                select_frame(post_isa, ref.own_index, q_g, temperature, rng, nullptr, hard, sample));
        } else {
            neg_rows.push_back(Tensor::from_data({d_}, pool.entry(ref.pool_index).frame));
        }
    }
    sel.f_p = ops::concat_rows(pos_rows);
    if (!neg_rows.empty()) sel.f_n = ops::concat_rows(neg_rows);
    return sel;
}

Tensor Css::semantic_preserving_loss(const Tensor& q_g, const Tensor& f_p,
                                     const Tensor& s_p) const {
    if (f_p.dim(0) != s_p.dim(0))
        throw std::invalid_argument("semantic loss: F_p and S_p row counts disagree");
    const int k = f_p.dim(0);
    if (k < 1) throw std::invalid_argument("semantic loss: need at least one pair");
    std::vector<Tensor> terms;
    terms.reserve(k);
    for (int i = 0; i < k; ++i) {
        const Tensor sim_f = ops::cosine_similarity(q_g, ops::row(f_p, i));
        const Tensor sim_s = ops::cosine_similarity(q_g, ops::row(s_p, i));
        const Tensor importance = ops::softmax_lastdim(ops::stack_scalars({sim_f, sim_s}));
        terms.push_back(
            ops::relu(ops::sub(ops::element(importance, 0), ops::element(importance, 1))));
    }
    return ops::sum(ops::stack_scalars(terms));
}

}  // namespace vcsr
