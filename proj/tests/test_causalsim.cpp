#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "vcsr/datagen.hpp"
#include "vcsr/scm.hpp"
#include "vcsr/stats.hpp"

using namespace vcsr;

namespace {

double sum_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

// The adjustment formula before the scene variable is eliminated: an explicit
// scene S with P(s|v) = delta(s, v), summed over p, s, v', s'. Must reduce to
// the two-variable form when scenes are deterministic copies of the video.
std::vector<double> frontdoor_with_deterministic_scene(const DiscreteSCM& scm, int v, int q) {
    const int ns = scm.nv;  // scene variable mirrors the video variable
    std::vector<double> out(scm.na, 0.0);
    for (int p = 0; p < scm.np; ++p) {
        for (int s = 0; s < ns; ++s) {
            const double p_s_given_v = s == v ? 1.0 : 0.0;
            if (p_s_given_v == 0.0) continue;
            const double p_p_given_s = scm.p_p_given_v[static_cast<size_t>(s) * scm.np + p];
            for (int vp = 0; vp < scm.nv; ++vp) {
                const double pv = scm.p_v_marginal(vp);
                if (pv == 0.0) continue;
                for (int sp = 0; sp < ns; ++sp) {
                    const double p_sp_given_vp = sp == vp ? 1.0 : 0.0;
                    if (p_sp_given_vp == 0.0) continue;
                    // P(A|p, s', q) with s' a copy of v': confounder
                    // posterior under v' weighs the answer table.
                    for (int c = 0; c < scm.nc; ++c) {
                        const double post_c =
                            scm.p_c[c] * scm.p_v_given_c[static_cast<size_t>(c) * scm.nv + sp] /
                            pv;
                        for (int a = 0; a < scm.na; ++a)
                            out[a] += p_p_given_s * p_s_given_v * p_sp_given_vp * pv * post_c *
                                      scm.a_given(p, c, q, a);
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("random SCMs validate and emit normalized distributions") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        DiscreteSCM scm = DiscreteSCM::random(3, 4, 4, 2, 5, rng, 1.0 + (t % 3));
        scm.validate();
        for (int v = 0; v < scm.nv; ++v)
            for (int q = 0; q < scm.nq; ++q) {
                for (auto dist : {scm.frontdoor_adjust(v, q), scm.interventional_truth(v, q),
                                  scm.naive_conditional(v, q)}) {
                    CHECK(sum_of(dist) == doctest::Approx(1.0).epsilon(1e-12));
                    for (double x : dist) CHECK(x >= 0.0);
                }
            }
    }
}

TEST_CASE("front-door equals the mutilated-graph truth on random SCMs") {
    Rng rng(7);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        DiscreteSCM scm = DiscreteSCM::random(3, 4, 4, 2, 5, rng);
        for (int v = 0; v < scm.nv; ++v)
            for (int q = 0; q < scm.nq; ++q)
                worst = std::max(worst, total_variation(scm.frontdoor_adjust(v, q),
                                                        scm.interventional_truth(v, q)));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("front-door equals truth on tiny 2x2x2x2x1 SCMs") {
    Rng rng(11);
    for (int t = 0; t < 100; ++t) {
        DiscreteSCM scm = DiscreteSCM::random(2, 2, 2, 1, 2, rng);
        for (int v = 0; v < 2; ++v)
            CHECK(total_variation(scm.frontdoor_adjust(v, 0), scm.interventional_truth(v, 0)) <=
                  1e-12);
    }
}

TEST_CASE("degenerate confounder |C|=1 collapses all three estimates") {
    Rng rng(13);
    DiscreteSCM scm = DiscreteSCM::random(1, 3, 4, 2, 5, rng);
    for (int v = 0; v < scm.nv; ++v)
        for (int q = 0; q < scm.nq; ++q) {
            const auto naive = scm.naive_conditional(v, q);
            CHECK(total_variation(scm.frontdoor_adjust(v, q), naive) <= 1e-12);
            CHECK(total_variation(scm.interventional_truth(v, q), naive) <= 1e-12);
        }
}

TEST_CASE("identical P(P|V) rows erase the causal effect of v") {
    Rng rng(17);
    DiscreteSCM scm = DiscreteSCM::random(3, 4, 4, 2, 5, rng);
    for (int v = 1; v < scm.nv; ++v)
        for (int p = 0; p < scm.np; ++p)
            scm.p_p_given_v[static_cast<size_t>(v) * scm.np + p] = scm.p_p_given_v[p];
    const auto base = scm.frontdoor_adjust(0, 1);
    for (int v = 1; v < scm.nv; ++v)
        CHECK(total_variation(scm.frontdoor_adjust(v, 1), base) <= 1e-12);
}

TEST_CASE("deterministic SCM gives one-hot conditionals") {
    DiscreteSCM scm;
    scm.nc = scm.nv = scm.np = scm.nq = 1;
    scm.na = 3;
    scm.p_c = {1.0};
    scm.p_v_given_c = {1.0};
    scm.p_p_given_v = {1.0};
    scm.p_a = {0.0, 1.0, 0.0};
    scm.validate();
    const auto naive = scm.naive_conditional(0, 0);
    CHECK(naive[0] == 0.0);
    CHECK(naive[1] == 1.0);
    CHECK(naive[2] == 0.0);
}

TEST_CASE("conditioning on a zero-probability video throws") {
    DiscreteSCM scm;
    scm.nc = 1;
    scm.nv = 2;
    scm.np = scm.nq = 1;
    scm.na = 2;
    scm.p_c = {1.0};
    scm.p_v_given_c = {1.0, 0.0};  // v=1 never occurs
    scm.p_p_given_v = {1.0, 1.0};
    scm.p_a = {0.5, 0.5};
    scm.validate();
    CHECK_THROWS_AS(scm.naive_conditional(1, 0), std::invalid_argument);
    // The interventional quantities remain defined.
    CHECK(sum_of(scm.interventional_truth(1, 0)) == doctest::Approx(1.0));
}

TEST_CASE("explicit scene-variable four-sum reduces to the two-variable form") {
    Rng rng(19);
    for (int t = 0; t < 20; ++t) {
        DiscreteSCM scm = DiscreteSCM::random(3, 4, 4, 2, 5, rng);
        for (int v = 0; v < scm.nv; ++v)
            for (int q = 0; q < scm.nq; ++q)
                CHECK(total_variation(frontdoor_with_deterministic_scene(scm, v, q),
                                      scm.frontdoor_adjust(v, q)) <= 1e-12);
    }
}

TEST_CASE("validation rejects malformed tables") {
    Rng rng(23);
    DiscreteSCM scm = DiscreteSCM::random(2, 2, 2, 1, 2, rng);
    SUBCASE("row sum off") {
        scm.p_c[0] += 1e-9;
        CHECK_THROWS_AS(scm.validate(), std::invalid_argument);
    }
    SUBCASE("negative entry") {
        scm.p_p_given_v[0] = -scm.p_p_given_v[0];
        CHECK_THROWS_AS(scm.validate(), std::invalid_argument);
    }
    SUBCASE("size mismatch") {
        scm.p_a.pop_back();
        CHECK_THROWS_AS(scm.validate(), std::invalid_argument);
    }
}

TEST_CASE("scm text format round-trips bit-exactly") {
    Rng rng(29);
    DiscreteSCM scm = DiscreteSCM::random(3, 4, 4, 2, 5, rng, 2.0);
    std::stringstream ss;
    scm.save(ss);
    DiscreteSCM back = DiscreteSCM::load(ss);
    CHECK(back.nc == scm.nc);
    CHECK(back.p_c == scm.p_c);
    CHECK(back.p_v_given_c == scm.p_v_given_c);
    CHECK(back.p_p_given_v == scm.p_p_given_v);
    CHECK(back.p_a == scm.p_a);
}

TEST_CASE("scm loader reports malformed input") {
    SUBCASE("bad magic") {
        std::stringstream ss("bogus C=1 V=1 P=1 Q=1 A=1\n");
        CHECK_THROWS_AS(DiscreteSCM::load(ss), std::runtime_error);
    }
    SUBCASE("wrong row label") {
        std::stringstream ss("scm-v1 C=1 V=1 P=1 Q=1 A=1\nP_WRONG: 1.0\n");
        CHECK_THROWS_AS(DiscreteSCM::load(ss), std::runtime_error);
    }
    SUBCASE("short row") {
        std::stringstream ss("scm-v1 C=1 V=2 P=1 Q=1 A=1\nP_C: 1.0\nP_V|C c=0: 0.5\n");
        CHECK_THROWS_AS(DiscreteSCM::load(ss), std::runtime_error);
    }
}

TEST_CASE("fixture search finds a strongly confounded SCM") {
    auto [scm, tv] = find_confounded_scm(300, 404);
    CHECK(tv > 0.05);
    scm.validate();
    // The found SCM still satisfies the front-door theorem.
    for (int v = 0; v < scm.nv; ++v)
        for (int q = 0; q < scm.nq; ++q)
            CHECK(total_variation(scm.frontdoor_adjust(v, q), scm.interventional_truth(v, q)) <=
                  1e-10);
}

TEST_CASE("chi-square helper matches known values") {
    // P(chi2_1 > 3.841) ~= 0.05, P(chi2_2 > 5.991) ~= 0.05.
    CHECK(chi_square_p(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(chi_square_p(5.991, 2) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(chi_square_p(0.0, 3) == 1.0);
    CHECK(chi_square_p(10.0, 0) == 1.0);

    // Perfectly proportional table: statistic 0.
    ChiSquareResult r = chi_square_independence({{10, 20}, {30, 60}});
    CHECK(r.stat == doctest::Approx(0.0));
    CHECK(r.p == doctest::Approx(1.0));
    // Strong association: tiny p.
    r = chi_square_independence({{50, 0}, {0, 50}});
    CHECK(r.p < 1e-10);
}

TEST_CASE("generated dataset determinism and window geometry") {
    GenSpec spec;
    spec.n_train = 60;
    spec.n_eval = 20;
    spec.n_frames = 20;
    spec.d_in = 16;
    spec.window_len = 3;
    spec.seed = 99;

    auto a = generate_split(spec, true);
    auto b = generate_split(spec, true);
    REQUIRE(a.size() == 60);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].answer_index == b[i].answer_index);
        CHECK(a[i].frames.values()[0] == b[i].frames.values()[0]);
        CHECK(a[i].video_id == b[i].video_id);

        // Windows inside [0, N) and disjoint.
        CHECK(a[i].causal_begin >= 0);
        CHECK(a[i].causal_end <= spec.n_frames);
        CHECK(a[i].conf_begin >= 0);
        CHECK(a[i].conf_end <= spec.n_frames);
        const bool disjoint =
            a[i].conf_end <= a[i].causal_begin || a[i].conf_begin >= a[i].causal_end;
        CHECK(disjoint);

        // Candidates contain the truth at answer_index.
        CHECK(a[i].candidate_tokens.size() == static_cast<size_t>(spec.n_answers));
        CHECK(a[i].candidate_tokens[a[i].answer_index] ==
              spec.answer_token(a[i].family, a[i].answer));
        std::set<int> uniq(a[i].candidate_tokens.begin(), a[i].candidate_tokens.end());
        CHECK(uniq.size() == a[i].candidate_tokens.size());
    }

    auto eval = generate_split(spec, false);
    CHECK(eval.size() == 20);
    CHECK(eval[0].video_id != a[0].video_id);
}

TEST_CASE("oracle classifier is exact on noise-free data") {
    GenSpec spec;
    spec.n_train = 80;
    spec.n_frames = 20;
    spec.d_in = 16;
    spec.window_len = 3;
    spec.sigma = 0.0;
    spec.seed = 5;
    for (const auto& s : generate_split(spec, true))
        CHECK(oracle_nearest_pattern(spec, s) == s.answer);
}

TEST_CASE("oracle classifier stays exact at the default noise level") {
    GenSpec spec;
    spec.n_train = 200;
    spec.n_frames = 28;
    spec.d_in = 32;
    spec.window_len = 3;
    spec.seed = 6;
    int hits = 0;
    for (const auto& s : generate_split(spec, true))
        hits += oracle_nearest_pattern(spec, s) == s.answer;
    CHECK(hits >= 198);  // sigma=0.25 leaves a wide margin
}

TEST_CASE("answer is deterministic in the planted pattern, confounder merely correlates") {
    GenSpec spec;
    spec.n_train = 10000;
    spec.n_frames = 16;
    spec.d_in = 8;
    spec.window_len = 3;
    spec.rho_train = 0.9;
    spec.seed = 31;
    auto samples = generate_split(spec, true);

    // Determinism: the label is the planted answer, always.
    for (const auto& s : samples) CHECK(s.answer_id == s.family * spec.n_answers + s.answer);

    // Conditional independence: within each (family, answer) stratum the
    // label is constant, so the answer-vs-confounder table is degenerate and
    // the test must not fire.
    for (int f = 0; f < spec.n_families; ++f)
        for (int a = 0; a < spec.n_answers; ++a) {
            std::vector<std::vector<int64_t>> table(
                spec.n_answers, std::vector<int64_t>(spec.n_answers, 0));
            for (const auto& s : samples)
                if (s.family == f && s.answer == a) ++table[s.answer][s.conf_label];
            const auto r = chi_square_independence(table);
            CHECK(r.p > 0.01);
        }

    // Marginally the confounder tracks the answer hard at rho=0.9; this shows
    // the chi-square machinery has the power to see dependence when present.
    std::vector<std::vector<int64_t>> marginal(spec.n_answers,
                                               std::vector<int64_t>(spec.n_answers, 0));
    for (const auto& s : samples) ++marginal[s.answer][s.conf_label];
    CHECK(chi_square_independence(marginal).p < 1e-6);

    // Agreement rate matches rho.
    int agree = 0;
    for (const auto& s : samples) agree += s.conf_label == s.answer;
    CHECK(std::abs(agree / double(samples.size()) - spec.rho_train) < 0.02);
}

TEST_CASE("chance scene recall closed form matches Monte Carlo") {
    const int n = 20, m = 4, k = 3, begin = 7, end = 10;
    const double analytic = chance_scene_recall(n, m, k, begin, end);
    const int t = n - m + 1;
    Rng rng(55);
    double acc = 0.0;
    const int trials = 200000;
    for (int it = 0; it < trials; ++it) {
        auto pick = rng.sample_without_replacement(t, k);
        int hits = 0, n_overlap = 0;
        for (int s = 0; s < t; ++s) {
            const bool ov = s + m > begin && s < end;
            n_overlap += ov;
        }
        for (int s : pick)
            if (s + m > begin && s < end) ++hits;
        acc += static_cast<double>(hits) / std::min(k, n_overlap);
    }
    CHECK(std::abs(acc / trials - analytic) < 0.005);
}

TEST_CASE("generator rejects invalid geometry") {
    GenSpec spec;
    spec.window_len = 9;
    spec.n_frames = 16;  // 2w > N
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.window_len = 3;
    spec.rho_train = 1.5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
