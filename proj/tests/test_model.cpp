#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "vcsr/config.hpp"
#include "vcsr/css.hpp"
#include "vcsr/datagen.hpp"
#include "vcsr/encoders.hpp"
#include "vcsr/grad_check.hpp"
#include "vcsr/model.hpp"
#include "vcsr/ops.hpp"
#include "vcsr/params.hpp"
#include "vcsr/qgr.hpp"
#include "vcsr/reasoner.hpp"
#include "vcsr/rng.hpp"

using namespace vcsr;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, bool requires_grad = true, double lo = -1.0,
                   double hi = 1.0) {
    std::vector<double> data(numel_of(shape));
    for (auto& v : data) v = lo + (hi - lo) * rng.uniform();
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor probe(const Tensor& t, Rng& rng) {
    Tensor w = rand_tensor(t.shape(), rng, false);
    return ops::sum(ops::mul(t, w));
}

void zero_param(ParamStore& ps, const std::string& name) {
    auto& v = ps.get(name).mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
}

void set_identity(ParamStore& ps, const std::string& name, int d) {
    auto& v = ps.get(name).mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
    for (int i = 0; i < d; ++i) v[i * d + i] = 1.0;
}

std::vector<Tensor> leaves(const ParamStore& ps) {
    std::vector<Tensor> out;
    for (const auto& entry : ps.entries()) out.push_back(entry.second);
    return out;
}

bool all_close(const Tensor& a, const Tensor& b, double tol) {
    if (a.numel() != b.numel()) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (std::abs(a.values()[i] - b.values()[i]) > tol) return false;
    return true;
}

TrainConfig micro_cfg() {
    TrainConfig c;
    c.d = 8;
    c.m = 3;
    c.k = 2;
    c.L_isa = 1;
    c.mmt_layers = 1;
    c.heads = 2;
    c.n_negatives = 2;
    c.tau = 0.9;
    c.max_question_len = 8;
    c.pool_capacity = 8;
    c.seed = 7;
    return c;
}

GenSpec micro_gen() {
    GenSpec g;
    g.n_train = 4;
    g.n_eval = 2;
    g.n_frames = 10;
    g.d_in = 6;
    g.n_families = 2;
    g.n_answers = 5;
    g.window_len = 2;
    g.seed = 3;
    return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// question encoder and frame projector

TEST_CASE("question encoding: shapes, determinism, candidate conditioning") {
    ParamStore ps;
    Rng rng(1);
    QuestionEncoder enc(ps, "q", 15, 8, 2, 8, rng);

    const std::vector<int> toks{kClsToken, 5};
    auto e1 = enc.encode(toks);
    CHECK(e1.q_g.rank() == 1);
    CHECK(e1.q_g.dim(0) == 8);
    CHECK(e1.q_l.dim(0) == 1);
    CHECK(e1.q_l.dim(1) == 8);

    auto e2 = enc.encode(toks);
    CHECK(all_close(e1.q_g, e2.q_g, 0.0));

    auto c1 = enc.encode_with_candidate(toks, {7});
    auto c2 = enc.encode_with_candidate(toks, {8});
    CHECK(c1.q_l.dim(0) == 3);  // family, [SEP], candidate
    CHECK_FALSE(all_close(c1.q_g, c2.q_g, 1e-9));
}

TEST_CASE("question encoding: contract violations") {
    ParamStore ps;
    Rng rng(1);
    QuestionEncoder enc(ps, "q", 15, 8, 2, 4, rng);

    CHECK_THROWS_AS(enc.encode({5, 6}), std::invalid_argument);           // no [CLS]
    CHECK_THROWS_AS(enc.encode({kClsToken}), std::invalid_argument);      // too short
    CHECK_THROWS_AS(enc.encode({kClsToken, 15}), std::invalid_argument);  // out of vocab
    CHECK_THROWS_AS(enc.encode({kClsToken, 1, 2, 3, 4}), std::invalid_argument);  // too long
}

TEST_CASE("frame projection maps input width to model width") {
    ParamStore ps;
    Rng rng(2);
    FrameProjector proj(ps, "f", 6, 8, rng);
    Tensor frames = rand_tensor({10, 6}, rng, false);
    Tensor out = proj.project(frames);
    CHECK(out.dim(0) == 10);
    CHECK(out.dim(1) == 8);
    CHECK_THROWS_AS(proj.project(rand_tensor({10, 7}, rng, false)), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// segment refiner

TEST_CASE("segment count is N - m + 1 and rejects short clips") {
    CHECK(Qgr::segment_count(32, 6) == 27);
    CHECK(Qgr::segment_count(10, 3) == 8);
    CHECK(Qgr::segment_count(5, 5) == 1);
    CHECK_THROWS_AS(Qgr::segment_count(4, 5), std::invalid_argument);
    CHECK_THROWS_AS(Qgr::segment_count(4, 0), std::invalid_argument);
}

TEST_CASE("self-attention layers reduce to identity when output paths are zeroed") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(3);
    Qgr qgr(ps, "g", cfg, rng);
    zero_param(ps, "g.isa0.attn.wo");
    zero_param(ps, "g.isa0.ff2.w");

    const int n = 7;
    Tensor frames = rand_tensor({n, cfg.d}, rng, false);
    Tensor post = qgr.isa(frames);
    const Tensor pe = ps.get("g.pe");
    const int t = Qgr::segment_count(n, cfg.m);
    REQUIRE(post.dim(0) == t * cfg.m);
    for (int seg = 0; seg < t; ++seg)
        for (int j = 0; j < cfg.m; ++j)
            for (int c = 0; c < cfg.d; ++c) {
                const double expect = frames.at(seg + j, c) + pe.at(j, c);
                CHECK(post.at(seg * cfg.m + j, c) == doctest::Approx(expect).epsilon(1e-12));
            }
}

TEST_CASE("question pooling with a zeroed query collapses to segment means") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(4);
    Qgr qgr(ps, "g", cfg, rng);
    zero_param(ps, "g.cma.fq.w");

    Tensor post = rand_tensor({4 * cfg.m, cfg.d}, rng, false);
    Tensor q_g = rand_tensor({cfg.d}, rng, false);
    SegmentSet set = qgr.refine(post, q_g);
    REQUIRE(set.n_segments == 4);
    for (double w : set.cma_weights) CHECK(w == doctest::Approx(1.0 / cfg.m).epsilon(1e-12));
    for (int seg = 0; seg < 4; ++seg)
        for (int c = 0; c < cfg.d; ++c) {
            double mean = 0.0;
            for (int j = 0; j < cfg.m; ++j) mean += post.at(seg * cfg.m + j, c);
            mean /= cfg.m;
            CHECK(set.refined.at(seg, c) == doctest::Approx(mean).epsilon(1e-10));
        }
}

TEST_CASE("refined segments stay inside the convex hull of their frames") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(5);
    Qgr qgr(ps, "g", cfg, rng);
    Tensor frames = rand_tensor({9, cfg.d}, rng, false);
    Tensor q_g = rand_tensor({cfg.d}, rng, false);
    SegmentSet set = qgr.forward(frames, q_g);
    for (int seg = 0; seg < set.n_segments; ++seg) {
        double wsum = 0.0;
        for (int j = 0; j < cfg.m; ++j) wsum += set.cma_weights[seg * cfg.m + j];
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-10));
        for (int c = 0; c < cfg.d; ++c) {
            double lo = 1e300, hi = -1e300;
            for (int j = 0; j < cfg.m; ++j) {
                lo = std::min(lo, set.post_isa.at(seg * cfg.m + j, c));
                hi = std::max(hi, set.post_isa.at(seg * cfg.m + j, c));
            }
            CHECK(set.refined.at(seg, c) >= lo - 1e-10);
            CHECK(set.refined.at(seg, c) <= hi + 1e-10);
        }
    }
}

TEST_CASE("mean-pool fallback averages raw frame windows") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(6);
    Qgr qgr(ps, "g", cfg, rng);
    Tensor frames = rand_tensor({8, cfg.d}, rng, false);
    SegmentSet set = qgr.forward_mean_pool(frames);
    REQUIRE(set.n_segments == 6);
    for (int seg = 0; seg < set.n_segments; ++seg)
        for (int c = 0; c < cfg.d; ++c) {
            double mean = 0.0;
            for (int j = 0; j < cfg.m; ++j) mean += frames.at(seg + j, c);
            mean /= cfg.m;
            CHECK(set.refined.at(seg, c) == doctest::Approx(mean).epsilon(1e-12));
            CHECK(set.post_isa.at(seg * cfg.m, c) == frames.at(seg, c));
        }
}

// ---------------------------------------------------------------------------
// scene separator: attention scores

TEST_CASE("segment scores form a distribution, uniform for identical segments") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(7);
    Css css(ps, "c", cfg, rng);

    Tensor row = rand_tensor({cfg.d}, rng, false);
    std::vector<Tensor> rows(5, row);
    Tensor s_star = ops::concat_rows(rows);
    Tensor q_g = rand_tensor({cfg.d}, rng, false);
    Tensor a_s = css.segment_attention_scores(s_star, q_g);

    REQUIRE(a_s.dim(0) == 5);
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        CHECK(a_s.at(i) == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(a_s.at(i) > 0.0);
        CHECK(a_s.at(i) < 1.0);
        sum += a_s.at(i);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    Tensor varied = rand_tensor({5, cfg.d}, rng, false);
    Tensor a2 = css.segment_attention_scores(varied, q_g);
    double sum2 = 0.0;
    for (int i = 0; i < 5; ++i) sum2 += a2.at(i);
    CHECK(sum2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scaling the question preserves the top-scored segment when the query map is linear") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(8);
    Css css(ps, "c", cfg, rng);
    zero_param(ps, "c.gq.b");

    Tensor s_star = rand_tensor({6, cfg.d}, rng, false);
    Tensor q_g = rand_tensor({cfg.d}, rng, false);
    Tensor a1 = css.segment_attention_scores(s_star, q_g);
    Tensor a2 = css.segment_attention_scores(s_star, ops::scale(q_g, 3.7));
    auto vals = [](const Tensor& t) {
        return std::vector<double>(t.values().begin(), t.values().end());
    };
    CHECK(argmax(vals(a1)) == argmax(vals(a2)));
}

// ---------------------------------------------------------------------------
// scene separator: positive selection

TEST_CASE("selecting all segments exhausts the index set") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(9);
    Css css(ps, "c", cfg, rng);
    Tensor s_star = rand_tensor({5, cfg.d}, rng, false);
    Tensor a_s = Tensor::from_data({5}, {0.2, 0.2, 0.2, 0.2, 0.2});
    Rng draw(10);
    auto [s_p, idx] = css.select_positive_segments(s_star, a_s, 5, 1.0, draw);
    std::vector<int> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(css.select_positive_segments(s_star, a_s, 6, 1.0, draw),
                    std::invalid_argument);
}

TEST_CASE("hard selection returns exact segment rows and distinct indices") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(11);
    Css css(ps, "c", cfg, rng);
    Rng draw(12);
    for (int trial = 0; trial < 400; ++trial) {
        Tensor s_star = rand_tensor({6, cfg.d}, draw, false);
        std::vector<double> logits(6);
        for (auto& v : logits) v = draw.normal();
        double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (auto& v : logits) {
            v = std::exp(v - mx);
            z += v;
        }
        for (auto& v : logits) v /= z;
        Tensor a_s = Tensor::from_data({6}, logits);
        auto [s_p, idx] = css.select_positive_segments(s_star, a_s, 3, 0.7, draw);
        std::set<int> uniq(idx.begin(), idx.end());
        CHECK(uniq.size() == 3);
        for (int i = 0; i < 3; ++i) {
            CHECK(idx[i] >= 0);
            CHECK(idx[i] < 6);
            for (int c = 0; c < cfg.d; ++c) CHECK(s_p.at(i, c) == s_star.at(idx[i], c));
        }
    }
}

TEST_CASE("a near-certain segment wins the first draw almost always") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(13);
    Css css(ps, "c", cfg, rng);
    Tensor s_star = rand_tensor({4, cfg.d}, rng, false);
    const double rest = (1.0 - 0.9995) / 3.0;
    Tensor a_s = Tensor::from_data({4}, {0.9995, rest, rest, rest});
    Rng draw(14);
    int hits = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto [s_p, idx] = css.select_positive_segments(s_star, a_s, 1, 0.1, draw);
        if (idx[0] == 0) ++hits;
    }
    CHECK(hits >= 990);
}

TEST_CASE("soft selection mixes rows instead of copying them") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(15);
    Css css(ps, "c", cfg, rng);
    Tensor s_star = rand_tensor({5, cfg.d}, rng, false);
    Tensor a_s = Tensor::from_data({5}, {0.2, 0.2, 0.2, 0.2, 0.2});
    Rng draw(16);
    auto [s_p, idx] = css.select_positive_segments(s_star, a_s, 2, 5.0, draw, false, true);
    // High temperature keeps the mix far from one-hot, so no output row can
    // coincide with a single segment row.
    for (int i = 0; i < 2; ++i) {
        bool matches_some_row = false;
        for (int t = 0; t < 5; ++t) {
            bool same = true;
            for (int c = 0; c < cfg.d && same; ++c)
                same = std::abs(s_p.at(i, c) - s_star.at(t, c)) < 1e-9;
            matches_some_row = matches_some_row || same;
        }
        CHECK_FALSE(matches_some_row);
    }
}

TEST_CASE("deterministic selection picks score order without consuming randomness") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(17);
    Css css(ps, "c", cfg, rng);
    Tensor s_star = rand_tensor({5, cfg.d}, rng, false);
    Tensor a_s = Tensor::from_data({5}, {0.1, 0.4, 0.05, 0.3, 0.15});
    Rng reference(18);
    Rng draw(18);
    auto [s_p, idx] = css.select_positive_segments(s_star, a_s, 3, 1.0, draw, true, false);
    CHECK(idx == std::vector<int>{1, 3, 4});
    CHECK(draw.uniform() == reference.uniform());  // stream untouched by the selection
}

// ---------------------------------------------------------------------------
// scene separator: negatives and the pool

TEST_CASE("negative set drawn from own video when the threshold admits everything") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(19);
    Css css(ps, "c", cfg, rng);
    SegmentPool pool(4);
    Tensor a_s = Tensor::from_data({8}, std::vector<double>(8, 0.125));
    Rng draw(20);
    auto negs = css.build_negative_set(a_s, {0, 1}, pool, 1.0, 3, 42, draw);
    REQUIRE(negs.size() == 3);
    std::set<int> seen;
    for (const auto& n : negs) {
        CHECK(n.pool_index == -1);
        CHECK(n.own_index >= 2);
        CHECK(n.own_index < 8);
        seen.insert(n.own_index);
    }
    CHECK(seen.size() == 3);
}

TEST_CASE("zero threshold forces every negative out of the pool") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(21);
    Css css(ps, "c", cfg, rng);
    SegmentPool pool(8);
    for (int i = 0; i < 5; ++i)
        pool.insert(std::vector<double>(cfg.d, i), std::vector<double>(cfg.d, -i), 100 + i);
    Tensor a_s = Tensor::from_data({6}, std::vector<double>(6, 1.0 / 6));
    Rng draw(22);
    auto negs = css.build_negative_set(a_s, {0}, pool, 0.0, 3, 42, draw);
    REQUIRE(negs.size() == 3);
    for (const auto& n : negs) {
        CHECK(n.own_index == -1);
        CHECK(n.pool_index >= 0);
    }
    CHECK_THROWS_AS(css.build_negative_set(a_s, {0}, SegmentPool(4), 0.0, 1, 42, draw),
                    std::runtime_error);
}

TEST_CASE("pool provenance never points at the query video") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(23);
    Css css(ps, "c", cfg, rng);
    Rng draw(24);
    for (int trial = 0; trial < 200; ++trial) {
        SegmentPool pool(6);
        const int inserted = 2 + static_cast<int>(draw.below(5));
        for (int i = 0; i < inserted; ++i) {
            const uint64_t vid = draw.below(3);  // collides with the query often
            pool.insert({0.5, 0.5}, {0.25, 0.25}, vid);
        }
        const uint64_t query = draw.below(3);
        Tensor a_s = Tensor::from_data({4}, std::vector<double>(4, 0.25));
        int avail = static_cast<int>(pool.eligible(query).size()) + 3;
        const int k = std::min(3, avail);
        auto negs = css.build_negative_set(a_s, {3}, pool, 1.0, k, query, draw);
        for (const auto& n : negs)
            if (n.pool_index >= 0) CHECK(pool.entry(n.pool_index).video_id != query);
    }
}

TEST_CASE("pool ratio splits negatives between own video and pool") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(25);
    Css css(ps, "c", cfg, rng);
    SegmentPool pool(8);
    for (int i = 0; i < 6; ++i)
        pool.insert(std::vector<double>(cfg.d, i), std::vector<double>(cfg.d, i), 900 + i);
    Tensor a_s = Tensor::from_data({8}, std::vector<double>(8, 0.125));
    Rng draw(26);
    auto all_pool = css.build_negative_set(a_s, {0}, pool, 1.0, 4, 42, draw, 1.0);
    for (const auto& n : all_pool) CHECK(n.pool_index >= 0);
    auto all_own = css.build_negative_set(a_s, {0}, pool, 1.0, 4, 42, draw, 0.0);
    for (const auto& n : all_own) CHECK(n.own_index >= 0);
    auto half = css.build_negative_set(a_s, {0}, pool, 1.0, 4, 42, draw, 0.5);
    int from_pool = 0;
    for (const auto& n : half) from_pool += n.pool_index >= 0;
    CHECK(from_pool == 2);
}

TEST_CASE("pool evicts oldest entries first at capacity") {
    SegmentPool pool(3);
    for (int i = 0; i < 5; ++i) pool.insert({1.0 * i}, {2.0 * i}, i);
    CHECK(pool.size() == 3);
    std::set<uint64_t> vids;
    for (int s = 0; s < pool.size(); ++s) vids.insert(pool.entry(s).video_id);
    CHECK(vids == std::set<uint64_t>{2, 3, 4});
    SegmentPool none(0);
    none.insert({1.0}, {1.0}, 7);
    CHECK(none.size() == 0);
}

// ---------------------------------------------------------------------------
// scene separator: frame filter

TEST_CASE("single-frame segments always choose their only frame") {
    TrainConfig cfg = micro_cfg();
    cfg.m = 1;
    ParamStore ps;
    Rng rng(27);
    Css css(ps, "c", cfg, rng);
    SegmentPool pool(0);
    Tensor post = rand_tensor({6, cfg.d}, rng, false);
    Tensor q_g = rand_tensor({cfg.d}, rng, false);
    Rng draw(28);
    auto sel = css.filter_frames(post, q_g, {2, 4, 5}, {}, pool, 0.5, draw);
    CHECK(sel.positive_frames == std::vector<int>{2, 4, 5});
    REQUIRE(sel.f_p.dim(0) == 3);
    for (int c = 0; c < cfg.d; ++c) CHECK(sel.f_p.at(0, c) == post.at(2, c));
}

TEST_CASE("a dominant frame wins its segment almost always") {
    TrainConfig cfg = micro_cfg();
    cfg.d = 4;
    cfg.heads = 2;
    ParamStore ps;
    Rng rng(29);
    Css css(ps, "c", cfg, rng);
    set_identity(ps, "c.hq.w", 4);
    set_identity(ps, "c.hf.w", 4);
    zero_param(ps, "c.hq.b");
    zero_param(ps, "c.hf.b");
    std::vector<double> frames = {
        10, 0, 0, 0,   // frame 0 aligned with the question
        -10, 0, 0, 0,  // frames 1, 2 anti-aligned
        -10, 0, 0, 0,
    };
    Tensor post = Tensor::from_data({3, 4}, frames);
    Tensor q_g = Tensor::from_data({4}, {10, 0, 0, 0});
    Rng draw(30);
    int hits = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        int within = -1;
        (void)css.select_frame(post, 0, q_g, 0.1, draw, &within);
        if (within == 0) ++hits;
    }
    CHECK(hits >= 990);
}

TEST_CASE("frame selection covers positives and splices stored pool frames") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(31);
    Css css(ps, "c", cfg, rng);
    SegmentPool pool(4);
    std::vector<double> stored_frame(cfg.d);
    for (int c = 0; c < cfg.d; ++c) stored_frame[c] = 0.125 * (c + 1);
    pool.insert(std::vector<double>(cfg.d, 0.5), stored_frame, 77);

    const int t = 5;
    Tensor post = rand_tensor({t * cfg.m, cfg.d}, rng, false);
    Tensor q_g = rand_tensor({cfg.d}, rng, false);
    std::vector<NegativeRef> negs{{1, -1}, {-1, 0}};
    Rng draw(32);
    auto sel = css.filter_frames(post, q_g, {0, 3}, negs, pool, 0.8, draw);

    REQUIRE(sel.f_p.dim(0) == 2);
    REQUIRE(sel.f_n.dim(0) == 2);
    REQUIRE(sel.positive_frames.size() == 2);
    CHECK(sel.positive_frames[0] >= 0);
    CHECK(sel.positive_frames[0] < cfg.m);
    CHECK(sel.positive_frames[1] >= 3);
    CHECK(sel.positive_frames[1] < 3 + cfg.m);
    for (int c = 0; c < cfg.d; ++c) CHECK(sel.f_n.at(1, c) == stored_frame[c]);
}

// ---------------------------------------------------------------------------
// scene separator: semantic preserving loss

TEST_CASE("segment-frame hinge: fixed-importance arithmetic") {
    TrainConfig cfg = micro_cfg();
    cfg.d = 2;
    ParamStore ps;
    Rng rng(33);
    Css css(ps, "c", cfg, rng);

    // Cosines chosen so the 2-way softmax lands exactly on (0.7, 0.3).
    const double gap = std::log(7.0 / 3.0);
    const double cf = 0.85, cs = 0.85 - gap;
    Tensor q = Tensor::from_data({2}, {1.0, 0.0});
    Tensor f = Tensor::from_data({1, 2}, {cf, std::sqrt(1 - cf * cf)});
    Tensor s = Tensor::from_data({1, 2}, {cs, std::sqrt(1 - cs * cs)});
    Tensor loss = css.semantic_preserving_loss(q, f, s);
    CHECK(loss.value() == doctest::Approx(0.4).epsilon(1e-9));

    Tensor even = css.semantic_preserving_loss(q, f, f);
    CHECK(even.value() == 0.0);
}

TEST_CASE("segment-frame hinge: inactive hinge has exactly zero gradient") {
    TrainConfig cfg = micro_cfg();
    cfg.d = 3;
    ParamStore ps;
    Rng rng(34);
    Css css(ps, "c", cfg, rng);

    Tensor q = Tensor::from_data({3}, {1.0, 0.0, 0.0}, true);
    // Segments far more question-aligned than their frames.
    Tensor f = Tensor::from_data({2, 3}, {0.1, 1.0, 0.0, 0.0, 1.0, 0.3}, true);
    Tensor s = Tensor::from_data({2, 3}, {1.0, 0.1, 0.0, 1.0, 0.0, 0.1}, true);
    Tensor loss = css.semantic_preserving_loss(q, f, s);
    CHECK(loss.value() == 0.0);
    loss.backward();
    for (double g : q.grad()) CHECK(g == 0.0);
    for (double g : f.grad()) CHECK(g == 0.0);
    for (double g : s.grad()) CHECK(g == 0.0);
}

TEST_CASE("segment-frame hinge stays within [0, k]") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(35);
    Css css(ps, "c", cfg, rng);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(4));
        Tensor q = rand_tensor({cfg.d}, rng, false, -2.0, 2.0);
        Tensor f = rand_tensor({k, cfg.d}, rng, false, -2.0, 2.0);
        Tensor s = rand_tensor({k, cfg.d}, rng, false, -2.0, 2.0);
        const double v = css.semantic_preserving_loss(q, f, s).value();
        CHECK(v >= 0.0);
        CHECK(v <= k);
    }
    Tensor zero = Tensor::from_data({1, cfg.d}, std::vector<double>(cfg.d, 0.0));
    Tensor q = rand_tensor({cfg.d}, rng, false);
    CHECK_THROWS_AS(css.semantic_preserving_loss(q, zero, zero), std::invalid_argument);
}

TEST_CASE("scene separation gradients match finite differences on the soft path") {
    TrainConfig cfg = micro_cfg();
    cfg.d = 6;
    cfg.m = 3;
    cfg.k = 2;
    ParamStore ps;
    Rng rng(36);
    Css css(ps, "c", cfg, rng);
    SegmentPool pool(4);
    Rng fill(37);
    pool.insert(fill.normal_vec(cfg.d), fill.normal_vec(cfg.d), 500);
    pool.insert(fill.normal_vec(cfg.d), fill.normal_vec(cfg.d), 501);

    const int t = 5;
    Tensor s_star = rand_tensor({t, cfg.d}, fill, true, -0.8, 0.8);
    Tensor post = rand_tensor({t * cfg.m, cfg.d}, fill, true, -0.8, 0.8);
    Tensor q_g = rand_tensor({cfg.d}, fill, true, -0.8, 0.8);

    auto f = [&] {
        Rng draw(38);
        Tensor a_s = css.segment_attention_scores(s_star, q_g);
        auto [s_p, idx] = css.select_positive_segments(s_star, a_s, cfg.k, 0.8, draw, false, true);
        auto negs = css.build_negative_set(a_s, idx, pool, 0.9, cfg.k, 42, draw);
        Tensor s_n = css.gather_negative_segments(s_star, negs, pool);
        auto frames = css.filter_frames(post, q_g, idx, negs, pool, 0.8, draw, false, true);
        Tensor loss = css.semantic_preserving_loss(q_g, frames.f_p, s_p);
        Rng pr(39);
        loss = ops::add(loss, ops::scale(probe(s_p, pr), 0.3));
        loss = ops::add(loss, ops::scale(probe(s_n, pr), 0.3));
        loss = ops::add(loss, ops::scale(probe(frames.f_p, pr), 0.3));
        loss = ops::add(loss, ops::scale(probe(frames.f_n, pr), 0.3));
        return loss;
    };
    std::vector<Tensor> params = leaves(ps);
    params.push_back(s_star);
    params.push_back(post);
    params.push_back(q_g);
    CHECK(grad_check(params, f).max_rel_err < 1e-4);
}

// ---------------------------------------------------------------------------
// reasoner

TEST_CASE("reasoner forward: shape, determinism, and contract violations") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(40);
    Reasoner r(ps, "r", cfg, 5, 24, rng);
    Tensor seg = rand_tensor({3, cfg.d}, rng, false);
    Tensor frames = rand_tensor({3, cfg.d}, rng, false);
    Tensor q_l = rand_tensor({2, cfg.d}, rng, false);
    std::vector<TypedTokens> scene{{seg, SceneTokenType::kPositiveSegment},
                                   {frames, SceneTokenType::kPositiveFrame}};
    Tensor a1 = r.mmt_forward(scene, q_l);
    Tensor a2 = r.mmt_forward(scene, q_l);
    CHECK(a1.rank() == 1);
    CHECK(a1.dim(0) == cfg.d);
    CHECK(all_close(a1, a2, 0.0));
    CHECK_THROWS_AS(r.mmt_forward({}, q_l), std::invalid_argument);
    Tensor huge = rand_tensor({30, cfg.d}, rng, false);
    CHECK_THROWS_AS(r.mmt_forward({{huge, SceneTokenType::kPositiveSegment}}, q_l),
                    std::invalid_argument);
}

TEST_CASE("modality vectors distinguish token sources") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(41);
    Reasoner r(ps, "r", cfg, 5, 24, rng);
    Tensor seg = rand_tensor({2, cfg.d}, rng, false);
    Tensor q_l = rand_tensor({2, cfg.d}, rng, false);
    Tensor as_pos = r.mmt_forward({{seg, SceneTokenType::kPositiveSegment}}, q_l);
    Tensor as_neg = r.mmt_forward({{seg, SceneTokenType::kNegativeSegment}}, q_l);
    CHECK_FALSE(all_close(as_pos, as_neg, 1e-9));
}

TEST_CASE("answer embeddings: degenerate sets and subset resampling") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(42);
    Reasoner r(ps, "r", cfg, 5, 24, rng);
    Tensor seg = rand_tensor({2, cfg.d}, rng, false);
    Tensor frm = rand_tensor({2, cfg.d}, rng, false);
    Tensor q_l = rand_tensor({2, cfg.d}, rng, false);
    std::vector<TypedTokens> c_p{{seg, SceneTokenType::kPositiveSegment},
                                 {frm, SceneTokenType::kPositiveFrame}};

    Rng draw(43);
    AnswerEmbeddings same = r.answer_embeddings(c_p, c_p, q_l, 0, draw);
    CHECK(all_close(same.a_p, same.a_n, 0.0));
    CHECK(same.negatives.empty());
    CHECK(r.visual_contrastive_loss(same).value() == 0.0);

    Tensor nseg = rand_tensor({2, cfg.d}, rng, false);
    Tensor nfrm = rand_tensor({2, cfg.d}, rng, false);
    std::vector<TypedTokens> c_n{{nseg, SceneTokenType::kNegativeSegment},
                                 {nfrm, SceneTokenType::kNegativeFrame}};
    AnswerEmbeddings emb = r.answer_embeddings(c_p, c_n, q_l, 3, draw);
    REQUIRE(emb.negatives.size() == 3);
    CHECK(all_close(emb.negatives[0], emb.a_n, 0.0));
    CHECK_FALSE(all_close(emb.negatives[1], emb.negatives[2], 1e-9));

    Rng other(99);
    AnswerEmbeddings emb2 = r.answer_embeddings(c_p, c_n, q_l, 3, other);
    CHECK_FALSE(all_close(emb.negatives[1], emb2.negatives[1], 1e-9));

    CHECK_THROWS_AS(r.answer_embeddings(c_p, {}, q_l, 2, draw), std::invalid_argument);
}

TEST_CASE("contrastive loss closed forms") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(44);
    Reasoner r(ps, "r", cfg, 5, 24, rng);

    Tensor x = rand_tensor({cfg.d}, rng, false);
    Tensor y = rand_tensor({cfg.d}, rng, false);
    AnswerEmbeddings uniform{x, y, y, {y, y, y}};
    CHECK(r.visual_contrastive_loss(uniform).value() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-9));

    AnswerEmbeddings two{x, y, y, {y}};
    CHECK(r.visual_contrastive_loss(two).value() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));

    AnswerEmbeddings none{x, y, y, {}};
    CHECK(r.visual_contrastive_loss(none).value() == 0.0);

    Rng trial(45);
    for (int i = 0; i < 50; ++i) {
        AnswerEmbeddings e{rand_tensor({cfg.d}, trial, false), Tensor(),
                           rand_tensor({cfg.d}, trial, false), {}};
        const int n = static_cast<int>(trial.below(4));
        for (int j = 0; j < n; ++j) e.negatives.push_back(rand_tensor({cfg.d}, trial, false));
        e.a_n = n > 0 ? e.negatives[0] : e.a_g;
        CHECK(r.visual_contrastive_loss(e).value() >= 0.0);
    }
}

TEST_CASE("multi-choice heads score per candidate with lowest-index ties") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(46);
    Reasoner r(ps, "r", cfg, 5, 24, rng);
    zero_param(ps, "r.mc.w");
    auto& bias = ps.get("r.mc.b").mutable_values();
    const std::vector<double> wanted{0.1, 2.3, -1.0, 0.0, 0.0};
    std::copy(wanted.begin(), wanted.end(), bias.begin());

    std::vector<Tensor> embs(5, rand_tensor({cfg.d}, rng, false));
    auto [scores, pick] = r.predict_mc(embs);
    CHECK(pick == 1);
    for (int i = 0; i < 5; ++i) CHECK(scores.at(i) == doctest::Approx(wanted[i]).epsilon(1e-12));

    // Any strictly increasing transform of the scores keeps the winner.
    std::vector<double> warped;
    for (int i = 0; i < 5; ++i) warped.push_back(std::exp(2.0 * scores.at(i) + 1.0));
    CHECK(argmax(warped) == pick);

    std::copy_n(std::vector<double>{1.0, 1.0, 0.0, 1.0, 0.5}.begin(), 5, bias.begin());
    auto [tie_scores, tie_pick] = r.predict_mc(embs);
    CHECK(tie_pick == 0);
    CHECK_THROWS_AS(r.predict_mc(std::vector<Tensor>(4, embs[0])), std::invalid_argument);
}

TEST_CASE("open-ended head: uniform logits fall back to index zero") {
    TrainConfig cfg = micro_cfg();
    ParamStore ps;
    Rng rng(47);
    Reasoner r(ps, "r", cfg, 7, 24, rng);
    Tensor zero_emb = Tensor::from_data({cfg.d}, std::vector<double>(cfg.d, 0.0));
    auto [logits, pick] = r.predict_open(zero_emb);
    CHECK(logits.dim(0) == 7);
    CHECK(pick == 0);
    Tensor ce = ops::cross_entropy(logits, 3);
    CHECK(ce.value() == doctest::Approx(std::log(7.0)).epsilon(1e-9));
}

TEST_CASE("objective aggregation arithmetic") {
    Tensor qa = Tensor::scalar(1.0);
    Tensor vc = Tensor::scalar(2.0);
    Tensor sp = Tensor::scalar(3.0);
    CHECK(Reasoner::total_loss(qa, vc, sp, 0.0125, 0.04).value() ==
          doctest::Approx(1.145).epsilon(1e-12));
    CHECK(Reasoner::total_loss(qa, vc, sp, 0.0, 0.0).value() == 1.0);
    const double base = Reasoner::total_loss(qa, vc, sp, 0.5, 0.5).value();
    CHECK(Reasoner::total_loss(Tensor::scalar(1.1), vc, sp, 0.5, 0.5).value() >= base);
    CHECK(Reasoner::total_loss(qa, Tensor::scalar(2.1), sp, 0.5, 0.5).value() >= base);
    CHECK_THROWS_AS(Reasoner::total_loss(qa, vc, sp, -0.1, 0.0), std::invalid_argument);
}

TEST_CASE("reasoner gradients match finite differences through all layers") {
    TrainConfig cfg = micro_cfg();
    cfg.mmt_layers = 3;
    cfg.heads = 2;
    ParamStore ps;
    Rng rng(48);
    Reasoner r(ps, "r", cfg, 5, 24, rng);
    Tensor seg = rand_tensor({2, cfg.d}, rng, true, -0.8, 0.8);
    Tensor frm = rand_tensor({2, cfg.d}, rng, true, -0.8, 0.8);
    Tensor q_l = rand_tensor({2, cfg.d}, rng, true, -0.8, 0.8);
    auto f = [&] {
        std::vector<TypedTokens> scene{{seg, SceneTokenType::kPositiveSegment},
                                       {frm, SceneTokenType::kPositiveFrame}};
        Rng pr(49);
        return probe(r.mmt_forward(scene, q_l), pr);
    };
    std::vector<Tensor> params = leaves(ps);
    params.push_back(seg);
    params.push_back(frm);
    params.push_back(q_l);
    CHECK(grad_check(params, f).max_rel_err < 1e-4);
}

// ---------------------------------------------------------------------------
// full model

TEST_CASE("full forward: shapes, selection geometry, and determinism") {
    TrainConfig cfg = micro_cfg();
    GenSpec gen = micro_gen();
    auto samples = generate_split(gen, true);
    VcsrModel model(cfg, gen.d_in, gen.n_frames, gen.vocab_size(), gen.n_answers);

    ForwardOptions opt;
    opt.training = true;
    Rng r1(50);
    ForwardResult res = model.forward(samples[0], opt, r1);
    CHECK(res.scores.dim(0) == 5);
    CHECK(res.predicted >= 0);
    CHECK(res.predicted < 5);
    REQUIRE(static_cast<int>(res.positive_indices.size()) == cfg.k);
    std::set<int> uniq(res.positive_indices.begin(), res.positive_indices.end());
    CHECK(static_cast<int>(uniq.size()) == cfg.k);
    for (size_t i = 0; i < res.positive_indices.size(); ++i) {
        const int seg = res.positive_indices[i];
        CHECK(seg >= 0);
        CHECK(seg < model.segment_count());
        CHECK(res.positive_frames[i] >= seg);
        CHECK(res.positive_frames[i] < seg + cfg.m);
    }
    CHECK(std::isfinite(res.total.value()));
    CHECK(res.l_vc.value() >= 0.0);
    CHECK(res.l_sp.value() >= 0.0);

    Rng r2(50);
    VcsrModel clone(cfg, gen.d_in, gen.n_frames, gen.vocab_size(), gen.n_answers);
    ForwardResult res2 = clone.forward(samples[0], opt, r2);
    CHECK(res.total.value() == res2.total.value());

    ForwardOptions eval_opt;
    eval_opt.training = false;
    eval_opt.stochastic = false;
    Rng r3(51);
    ForwardResult e1 = model.forward(samples[0], eval_opt, r3);
    ForwardResult e2 = model.forward(samples[0], eval_opt, r3);
    CHECK(e1.predicted == e2.predicted);
    CHECK(e1.l_qa.value() == e2.l_qa.value());
    CHECK(e1.l_vc.value() == 0.0);
    CHECK(e1.positive_indices == e2.positive_indices);
}

TEST_CASE("full forward rejects mismatched frame geometry") {
    TrainConfig cfg = micro_cfg();
    GenSpec gen = micro_gen();
    auto samples = generate_split(gen, true);
    VcsrModel model(cfg, gen.d_in, gen.n_frames, gen.vocab_size(), gen.n_answers);
    SyntheticSample bad = samples[0];
    Rng rng(52);
    bad.frames = rand_tensor({gen.n_frames, gen.d_in + 1}, rng, false);
    ForwardOptions opt;
    CHECK_THROWS_AS(model.forward(bad, opt, rng), std::invalid_argument);
}

TEST_CASE("ablation flags bypass refinement and scene separation") {
    GenSpec gen = micro_gen();
    auto samples = generate_split(gen, true);

    TrainConfig star = micro_cfg();
    star.use_qgr = false;
    star.use_css = false;
    star.alpha = 0.0;
    star.beta = 0.0;
    VcsrModel model(star, gen.d_in, gen.n_frames, gen.vocab_size(), gen.n_answers);
    ForwardOptions opt;
    opt.training = true;
    Rng rng(53);
    ForwardResult res = model.forward(samples[0], opt, rng);
    CHECK(res.positive_indices.empty());
    CHECK(res.l_vc.value() == 0.0);
    CHECK(res.l_sp.value() == 0.0);
    CHECK(res.total.value() == res.l_qa.value());

    TrainConfig no_qgr = micro_cfg();
    no_qgr.use_qgr = false;
    VcsrModel mean_model(no_qgr, gen.d_in, gen.n_frames, gen.vocab_size(), gen.n_answers);
    Rng rng2(54);
    ForwardResult res2 = mean_model.forward(samples[0], opt, rng2);
    CHECK(std::isfinite(res2.total.value()));
    CHECK(static_cast<int>(res2.positive_indices.size()) == no_qgr.k);
}

TEST_CASE("truth-branch segments are pushed into the pool on request") {
    TrainConfig cfg = micro_cfg();
    GenSpec gen = micro_gen();
    auto samples = generate_split(gen, true);
    VcsrModel model(cfg, gen.d_in, gen.n_frames, gen.vocab_size(), gen.n_answers);
    CHECK(model.pool().size() == 0);
    ForwardOptions opt;
    opt.training = true;
    opt.update_pool = true;
    Rng rng(55);
    (void)model.forward(samples[0], opt, rng);
    CHECK(model.pool().size() == cfg.k);
    CHECK(model.pool().entry(0).video_id == samples[0].video_id);
    (void)model.forward(samples[1], opt, rng);
    CHECK(model.pool().size() == 2 * cfg.k);
}

TEST_CASE("pipeline gradients match finite differences end to end") {
    TrainConfig cfg = micro_cfg();
    GenSpec gen = micro_gen();
    auto samples = generate_split(gen, true);
    VcsrModel model(cfg, gen.d_in, gen.n_frames, gen.vocab_size(), gen.n_answers);

    ForwardOptions opt;
    opt.training = true;
    opt.stochastic = true;
    opt.hard = false;
    opt.temperature = 1.0;
    opt.n_negatives = 2;
    auto f = [&] {
        Rng draw(999);
        return model.forward(samples[0], opt, draw).total;
    };
    GradCheckReport rep = grad_check(leaves(model.params()), f);
    INFO("worst leaf: ", rep.worst);
    CHECK(rep.max_rel_err < 1e-4);
}
