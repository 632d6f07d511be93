#include "vcsr/gradsuite.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <utility>

#include "vcsr/datagen.hpp"
#include "vcsr/grad_check.hpp"
#include "vcsr/model.hpp"
#include "vcsr/ops.hpp"
#include "vcsr/rng.hpp"
#include "vcsr/tensor.hpp"

namespace vcsr {

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> data(numel_of(shape));
    for (auto& v : data) v = lo + (hi - lo) * rng.uniform();
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

// Values bounded away from zero so relu's kink is never crossed by the step.
Tensor rand_signed_tensor(Shape shape, Rng& rng, double margin) {
    std::vector<double> data(numel_of(shape));
    for (auto& v : data) {
        double mag = margin + (1.0 - margin) * rng.uniform();
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

// Weighted sum against fixed coefficients so every output element's gradient
// is exercised, not just the row sums.
Tensor probe(const Tensor& t, uint64_t probe_seed) {
    Rng rng(probe_seed);
    std::vector<double> w(t.numel());
    for (auto& v : w) v = -1.0 + 2.0 * rng.uniform();
    return ops::sum(ops::mul(t, Tensor::from_data(t.shape(), std::move(w))));
}

}  // namespace

GradSuiteReport run_grad_suite(uint64_t seed) {
    auto begin = std::chrono::steady_clock::now();
    GradSuiteReport report;

    Rng rng(seed);
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({3, 4}, rng);
    Tensor v4 = rand_tensor({4}, rng);
    Tensor v3 = rand_tensor({3}, rng);
    Tensor m34 = rand_tensor({3, 4}, rng);
    Tensor m45 = rand_tensor({4, 5}, rng);
    Tensor v5 = rand_tensor({5}, rng);
    Tensor pos = rand_tensor({2, 5}, rng, 0.2, 2.0);
    Tensor kinked = rand_signed_tensor({3, 4}, rng, 0.1);
    Tensor gamma = rand_tensor({4}, rng, 0.5, 1.5);
    Tensor beta = rand_tensor({4}, rng);
    Tensor u6 = rand_signed_tensor({6}, rng, 0.2);
    Tensor w6 = rand_signed_tensor({6}, rng, 0.2);
    Tensor logits = rand_tensor({5}, rng, -2.0, 2.0);
    Tensor table = rand_tensor({6, 4}, rng);
    Tensor q2 = rand_tensor({2, 6}, rng);
    Tensor k4 = rand_tensor({4, 6}, rng);
    Tensor val4 = rand_tensor({4, 6}, rng);
    Tensor blocky = rand_tensor({6, 6}, rng);
    Tensor pool_q = rand_tensor({3}, rng);
    Tensor pool_k = rand_tensor({6, 3}, rng);
    Tensor pool_v = rand_tensor({6, 4}, rng);

    auto add_entry = [&](const char* name, std::vector<Tensor> params,
                         const std::function<Tensor()>& f) {
        GradSuiteEntry e;
        e.name = name;
        e.max_rel_err = grad_check(params, f).max_rel_err;
        e.pass = e.max_rel_err < e.tolerance;
        report.entries.push_back(std::move(e));
    };

    add_entry("add", {a, b}, [&] { return probe(ops::add(a, b), 100); });
    add_entry("sub", {a, b}, [&] { return probe(ops::sub(a, b), 101); });
    add_entry("mul", {a, b}, [&] { return probe(ops::mul(a, b), 102); });
    add_entry("scale", {a}, [&] { return probe(ops::scale(a, -1.75), 103); });
    add_entry("relu", {kinked}, [&] { return probe(ops::relu(kinked), 104); });
    add_entry("log", {pos}, [&] { return probe(ops::log(pos), 105); });
    add_entry("add_rowvec", {a, v4}, [&] { return probe(ops::add_rowvec(a, v4), 106); });
    add_entry("reshape", {a}, [&] { return probe(ops::reshape(a, {4, 3}), 107); });
    add_entry("row", {a}, [&] { return probe(ops::row(a, 1), 108); });
    add_entry("rows", {a}, [&] { return probe(ops::rows(a, 1, 3), 109); });
    add_entry("concat_rows", {a, b, v4},
              [&] { return probe(ops::concat_rows({a, b, v4}), 110); });
    add_entry("stack_scalars", {v3}, [&] {
        return probe(ops::stack_scalars({ops::element(v3, 0), ops::element(v3, 1),
                                         ops::element(v3, 2)}),
                     111);
    });
    add_entry("element", {v4}, [&] { return ops::element(v4, 2); });
    add_entry("gather_rows", {table},
              [&] { return probe(ops::gather_rows(table, {4, 0, 2, 0}), 112); });
    add_entry("sum", {a}, [&] { return ops::sum(a); });
    add_entry("mean_all", {a}, [&] { return ops::mean_all(a); });
    add_entry("mean_rows", {a}, [&] { return probe(ops::mean_rows(a), 113); });
    add_entry("dot", {v4, m34}, [&] { return ops::dot(v4, ops::row(m34, 0)); });
    add_entry("logsumexp", {logits}, [&] { return ops::logsumexp(logits); });
    add_entry("matmul", {m34, m45}, [&] { return probe(ops::matmul(m34, m45), 114); });
    add_entry("matvec", {m34, v4}, [&] { return probe(ops::matvec(m34, v4), 115); });
    add_entry("vecmat", {v3, m34}, [&] { return probe(ops::vecmat(v3, m34), 116); });
    add_entry("linear", {a, m45, v5}, [&] { return probe(ops::linear(a, m45, v5), 117); });
    add_entry("softmax_lastdim", {a}, [&] { return probe(ops::softmax_lastdim(a), 118); });
    add_entry("layer_norm", {a, gamma, beta},
              [&] { return probe(ops::layer_norm(a, gamma, beta), 119); });
    add_entry("gumbel_softmax", {logits}, [&] {
        Rng draw(seed + 40);
        return probe(ops::gumbel_softmax(logits, 0.8, false, draw), 120);
    });
    add_entry("cosine_similarity", {u6, w6},
              [&] { return ops::cosine_similarity(u6, w6); });
    add_entry("cross_entropy", {logits}, [&] { return ops::cross_entropy(logits, 3); });
    add_entry("multi_head_attention", {q2, k4, val4}, [&] {
        return probe(ops::multi_head_attention(q2, k4, val4, 2), 121);
    });
    add_entry("multi_head_attention_blocked", {blocky}, [&] {
        return probe(ops::multi_head_attention(blocky, blocky, blocky, 2, 3), 122);
    });
    add_entry("attention_pool_blocks", {pool_q, pool_k, pool_v}, [&] {
        return probe(ops::attention_pool_blocks(pool_q, pool_k, pool_v, 3, 0.7), 123);
    });

    {
        TrainConfig cfg;
        cfg.d = 8;
        cfg.m = 3;
        cfg.k = 2;
        cfg.L_isa = 1;
        cfg.mmt_layers = 1;
        cfg.heads = 2;
        cfg.n_negatives = 2;
        cfg.tau = 0.9;
        cfg.max_question_len = 8;
        cfg.pool_capacity = 8;
        cfg.seed = 7;

        GenSpec gen;
        gen.n_train = 4;
        gen.n_eval = 2;
        gen.n_frames = 10;
        gen.d_in = 6;
        gen.n_families = 2;
        gen.n_answers = 5;
        gen.window_len = 2;
        gen.seed = 3;

        auto samples = generate_split(gen, true);
        VcsrModel model(cfg, gen.d_in, gen.n_frames, gen.vocab_size(), gen.n_answers);
        ForwardOptions opt;
        opt.training = true;
        opt.stochastic = true;
        opt.hard = false;
        opt.temperature = 1.0;
        opt.n_negatives = 2;

        std::vector<Tensor> leaves;
        for (const auto& [name, tensor] : model.params().entries()) leaves.push_back(tensor);
        GradSuiteEntry e;
        e.name = "objective_end_to_end";
        e.max_rel_err = grad_check(leaves, [&] {
                            Rng draw(999);
                            return model.forward(samples[0], opt, draw).total;
                        }).max_rel_err;
        e.pass = e.max_rel_err < e.tolerance;
        report.entries.push_back(std::move(e));
    }

    report.all_pass = true;
    for (const auto& e : report.entries) {
        report.worst = std::max(report.worst, e.max_rel_err);
        if (!e.pass) report.all_pass = false;
    }
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    return report;
}

}  // namespace vcsr
