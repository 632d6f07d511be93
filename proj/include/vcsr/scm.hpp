#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "vcsr/rng.hpp"

namespace vcsr {

// Discrete structural causal model over C -> V, V -> P, {P, C, Q} -> A.
// The confounder C drives both the video V and the answer A; the scene
// selection P mediates every directed path from V to A, so the front-door
// criterion holds for V -> A by construction. Q is exogenous.
struct DiscreteSCM {
    int nc = 0, nv = 0, np = 0, nq = 0, na = 0;
    std::vector<double> p_c;          // [nc]
    std::vector<double> p_v_given_c;  // [nc x nv], row per c
    std::vector<double> p_p_given_v;  // [nv x np], row per v
    std::vector<double> p_a;          // [np x nc x nq x na], row per (p, c, q)

    double a_given(int p, int c, int q, int a) const {
        return p_a[((static_cast<size_t>(p) * nc + c) * nq + q) * na + a];
    }

    // Checks cardinalities, nonnegativity, and that every row sums to 1
    // within 1e-12. Throws std::invalid_argument.
    void validate() const;

    double p_v_marginal(int v) const;

    // Front-door estimate of P(A | do(V=v), q), composed exactly as the
    // adjustment formula reads: sum_p P(p|v) sum_v' P(v') P(A|p,v',q), with
    // the inner conditional enumerated from the observational joint.
    std::vector<double> frontdoor_adjust(int v, int q) const;

    // Ground truth P(A | do(V=v), q) by graph mutilation: the C -> V edge is
    // cut, so C keeps its prior: sum_c P(c) sum_p P(p|v) P(a|p,c,q).
    std::vector<double> interventional_truth(int v, int q) const;

    // Observational P(A | V=v, q). Throws on a zero-probability v.
    std::vector<double> naive_conditional(int v, int q) const;

    // All rows Dirichlet(1); sharpen > 1 raises each row entry to that power
    // (then renormalizes) for peakier, more confoundable tables.
    static DiscreteSCM random(int nc, int nv, int np, int nq, int na, Rng& rng,
                              double sharpen = 1.0);

    static DiscreteSCM load(std::istream& in);
    static DiscreteSCM load_file(const std::string& path);
    void save(std::ostream& out) const;
    void save_file(const std::string& path) const;
};

// Total-variation distance, 0.5 * sum_a |p[a] - q[a]|.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

// Seeded search over random SCMs (default oracle cardinalities 3/4/4/2/5)
// for the one whose observational conditional strays farthest from the
// interventional truth, maximized over (v, q). Returns the SCM and that
// divergence.
std::pair<DiscreteSCM, double> find_confounded_scm(int trials, uint64_t seed);

}  // namespace vcsr
