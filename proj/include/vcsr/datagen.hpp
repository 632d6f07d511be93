#pragma once

#include <cstdint>
#include <vector>

#include "vcsr/rng.hpp"
#include "vcsr/tensor.hpp"

namespace vcsr {

// Reserved vocabulary ids; family and answer tokens follow.
inline constexpr int kClsToken = 0;
inline constexpr int kSepToken = 1;
inline constexpr int kPadToken = 2;
inline constexpr int kReservedTokens = 3;

// Synthetic confounded video-QA generator. Each sample plants a causal
// pattern (fixed per family and answer) over one frame window and a
// confounder pattern over a disjoint window. The answer is a deterministic
// function of the causal pattern; the confounder label merely agrees with it
// with probability rho, so rho_train >> rho_test creates a spurious shortcut
// that inverts at test time.
struct GenSpec {
    int n_train = 2000;
    int n_eval = 500;
    int n_frames = 28;   // N
    int d_in = 32;
    int n_families = 4;  // question families
    int n_answers = 5;   // answers per family == MC candidate count
    double rho_train = 0.9;
    double rho_test = 0.1;
    int window_len = 3;
    double sigma = 0.25;         // frame noise scale
    double pattern_scale = 1.0;  // planted pattern norm
    uint64_t seed = 1;
    bool open_ended = false;

    void validate() const;
    int vocab_size() const { return kReservedTokens + n_families + n_families * n_answers; }
    int family_token(int family) const { return kReservedTokens + family; }
    int answer_token(int family, int answer) const {
        return kReservedTokens + n_families + family * n_answers + answer;
    }
    int answer_vocab() const { return n_families * n_answers; }
};

struct SyntheticSample {
    Tensor frames;                      // [N x d_in], values quantized to f32
    std::vector<int> question_tokens;   // [CLS, family token]
    std::vector<int> candidate_tokens;  // answer tokens in per-sample order (MC)
    int answer_index = 0;               // position of the truth in candidate_tokens
    int answer_id = 0;                  // global answer id (open-ended target)
    int causal_begin = 0, causal_end = 0;
    int conf_begin = 0, conf_end = 0;
    int family = 0;
    int answer = 0;  // within-family answer index
    int conf_label = 0;
    uint64_t video_id = 0;
};

// Planted pattern vectors, unit norm times pattern_scale, deterministic in
// (seed, family, answer) / (seed, label).
std::vector<double> causal_pattern(const GenSpec& spec, int family, int answer);
std::vector<double> confounder_pattern(const GenSpec& spec, int label);

// Generates one split; train toggles between (n_train, rho_train) and
// (n_eval, rho_test). Samples depend only on (seed, split, index).
std::vector<SyntheticSample> generate_split(const GenSpec& spec, bool train);

// Classifies the within-family answer from the mean frame over the true
// causal window by nearest planted pattern. Exact on noise-free data.
int oracle_nearest_pattern(const GenSpec& spec, const SyntheticSample& sample);

// Number of the T = N - m + 1 stride-1 segments whose frame span intersects
// the window [begin, end).
int overlapping_segments(int n_frames, int m, int begin, int end);

// Expected scene recall of k uniformly drawn distinct segments against the
// planted window: E[overlap] / min(k, n_overlap), with n_overlap the count of
// the T = N - m + 1 segments that intersect [begin, end).
double chance_scene_recall(int n_frames, int m, int k, int begin, int end);

}  // namespace vcsr
