#include "vcsr/datagen.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vcsr {

namespace {

// Stream tags for derived rngs, so pattern banks, sample draws, and any
// future consumers never collide.
constexpr uint64_t kCausalBankStream = 101;
constexpr uint64_t kConfBankStream = 102;
constexpr uint64_t kFamilyDirStream = 103;
constexpr uint64_t kTrainStream = 201;
constexpr uint64_t kEvalStream = 202;

// Causal patterns mix a per-family direction with a per-answer one, so the
// question (which names the family) points at a single direction while the
// answers within the family stay well separated.
constexpr double kFamilyWeight = 0.6;
constexpr double kAnswerWeight = 0.8;

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double> unit_pattern(Rng rng, int d, double scale) {
    std::vector<double> v = rng.normal_vec(static_cast<size_t>(d));
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x = x / norm * scale;
    return v;
}

}  // namespace

void GenSpec::validate() const {
    if (n_train < 1 || n_eval < 1) throw std::invalid_argument("GenSpec: sample counts must be >= 1");
    if (n_frames < 1 || d_in < 1) throw std::invalid_argument("GenSpec: n_frames and d_in must be >= 1");
    if (n_families < 1 || n_answers < 2)
        throw std::invalid_argument("GenSpec: need >= 1 family and >= 2 answers");
    if (rho_train < 0.0 || rho_train > 1.0 || rho_test < 0.0 || rho_test > 1.0)
        throw std::invalid_argument("GenSpec: rho must lie in [0, 1]");
    if (window_len < 1 || 2 * window_len > n_frames)
        throw std::invalid_argument("GenSpec: window length must satisfy 1 <= w <= N/2");
    if (sigma < 0.0 || pattern_scale <= 0.0)
        throw std::invalid_argument("GenSpec: sigma must be >= 0 and pattern_scale > 0");
}

std::vector<double> causal_pattern(const GenSpec& spec, int family, int answer) {
    if (family < 0 || family >= spec.n_families || answer < 0 || answer >= spec.n_answers)
        throw std::invalid_argument("causal_pattern: family/answer out of range");
    auto family_dir =
        unit_pattern(Rng(spec.seed).derive(kFamilyDirStream, family), spec.d_in, 1.0);
    auto answer_dir = unit_pattern(Rng(spec.seed).derive(kCausalBankStream, family, answer),
                                   spec.d_in, 1.0);
    std::vector<double> v(spec.d_in);
    double norm = 0.0;
    for (int j = 0; j < spec.d_in; ++j) {
        v[j] = kFamilyWeight * family_dir[j] + kAnswerWeight * answer_dir[j];
        norm += v[j] * v[j];
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x = x / norm * spec.pattern_scale;
    return v;
}

std::vector<double> confounder_pattern(const GenSpec& spec, int label) {
    if (label < 0 || label >= spec.n_answers)
        throw std::invalid_argument("confounder_pattern: label out of range");
    return unit_pattern(Rng(spec.seed).derive(kConfBankStream, label), spec.d_in,
                        spec.pattern_scale);
}

std::vector<SyntheticSample> generate_split(const GenSpec& spec, bool train) {
    spec.validate();
    const int n_samples = train ? spec.n_train : spec.n_eval;
    const double rho = train ? spec.rho_train : spec.rho_test;
    const uint64_t stream = train ? kTrainStream : kEvalStream;
    const int n = spec.n_frames, d = spec.d_in, w = spec.window_len;

    // Pattern banks are shared across splits.
    std::vector<std::vector<double>> causal_bank(
        static_cast<size_t>(spec.n_families) * spec.n_answers);
    for (int f = 0; f < spec.n_families; ++f)
        for (int a = 0; a < spec.n_answers; ++a)
            causal_bank[static_cast<size_t>(f) * spec.n_answers + a] = causal_pattern(spec, f, a);
    std::vector<std::vector<double>> conf_bank(spec.n_answers);
    for (int z = 0; z < spec.n_answers; ++z) conf_bank[z] = confounder_pattern(spec, z);

    std::vector<SyntheticSample> out;
    out.reserve(n_samples);
    Rng base(spec.seed);
    for (int idx = 0; idx < n_samples; ++idx) {
        Rng rng = base.derive(stream, static_cast<uint64_t>(idx));
        SyntheticSample s;
        s.family = static_cast<int>(rng.below(spec.n_families));
        s.answer = static_cast<int>(rng.below(spec.n_answers));
        s.answer_id = s.family * spec.n_answers + s.answer;
        s.video_id = (stream << 32) | static_cast<uint64_t>(idx);

        s.causal_begin = static_cast<int>(rng.below(n - w + 1));
        s.causal_end = s.causal_begin + w;
        // Confounder window drawn uniformly over starts that do not touch the
        // causal window.
        std::vector<int> starts;
        for (int c = 0; c + w <= n; ++c)
            if (c + w <= s.causal_begin || c >= s.causal_end) starts.push_back(c);
        s.conf_begin = starts[rng.below(static_cast<int64_t>(starts.size()))];
        s.conf_end = s.conf_begin + w;

        if (rng.uniform() < rho) {
            s.conf_label = s.answer;
        } else {
            s.conf_label = static_cast<int>(rng.below(spec.n_answers - 1));
            if (s.conf_label >= s.answer) ++s.conf_label;
        }

        std::vector<double> frames(static_cast<size_t>(n) * d);
        for (auto& v : frames) v = spec.sigma * rng.normal();
        const auto& cp = causal_bank[static_cast<size_t>(s.family) * spec.n_answers + s.answer];
        for (int f = s.causal_begin; f < s.causal_end; ++f)
            for (int j = 0; j < d; ++j) frames[static_cast<size_t>(f) * d + j] += cp[j];
        const auto& zp = conf_bank[s.conf_label];
        for (int f = s.conf_begin; f < s.conf_end; ++f)
            for (int j = 0; j < d; ++j) frames[static_cast<size_t>(f) * d + j] += zp[j];
        // Quantize at the source so in-memory samples match a file round trip
        // bit for bit.
        for (auto& v : frames) v = quantize_f32(v);
        s.frames = Tensor::from_data({n, d}, std::move(frames));

        s.question_tokens = {kClsToken, spec.family_token(s.family)};
        s.candidate_tokens.resize(spec.n_answers);
        std::vector<int> order(spec.n_answers);
        for (int a = 0; a < spec.n_answers; ++a) order[a] = a;
        rng.shuffle(order);
        for (int pos = 0; pos < spec.n_answers; ++pos) {
            s.candidate_tokens[pos] = spec.answer_token(s.family, order[pos]);
            if (order[pos] == s.answer) s.answer_index = pos;
        }
        out.push_back(std::move(s));
    }
    return out;
}

int oracle_nearest_pattern(const GenSpec& spec, const SyntheticSample& sample) {
    const int d = spec.d_in;
    std::vector<double> mean(d, 0.0);
    for (int f = sample.causal_begin; f < sample.causal_end; ++f)
        for (int j = 0; j < d; ++j) mean[j] += sample.frames.at(f, j);
    for (auto& v : mean) v /= (sample.causal_end - sample.causal_begin);

    int best = -1;
    double best_dist = 0.0;
    for (int a = 0; a < spec.n_answers; ++a) {
        const auto pat = causal_pattern(spec, sample.family, a);
        double dist = 0.0;
        for (int j = 0; j < d; ++j) dist += (mean[j] - pat[j]) * (mean[j] - pat[j]);
        if (best < 0 || dist < best_dist) {
            best = a;
            best_dist = dist;
        }
    }
    return best;
}

int overlapping_segments(int n_frames, int m, int begin, int end) {
    if (m < 1 || m > n_frames) throw std::invalid_argument("overlapping_segments: bad m");
    if (begin < 0 || begin >= end || end > n_frames)
        throw std::invalid_argument("overlapping_segments: bad window");
    const int t = n_frames - m + 1;
    // Segment s covers frames [s, s+m); it intersects [begin, end) iff
    // s > begin - m and s < end.
    const int lo = std::max(0, begin - m + 1);
    const int hi = std::min(t - 1, end - 1);
    return hi - lo + 1;
}

double chance_scene_recall(int n_frames, int m, int k, int begin, int end) {
    const int n_overlap = overlapping_segments(n_frames, m, begin, end);
    const int t = n_frames - m + 1;
    if (k < 1 || k > t) throw std::invalid_argument("chance_scene_recall: bad k");
    // k distinct uniform picks from t segments hit on average k * n_o / t.
    const double expected_hits = static_cast<double>(k) * n_overlap / t;
    return expected_hits / std::min(k, n_overlap);
}

}  // namespace vcsr
