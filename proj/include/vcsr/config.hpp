#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace vcsr {

// Full training configuration. Two built-in profiles: `paper_profile`
// carries the published defaults (d=512, lr=1e-5, 50 epochs); `desk_profile`
// shrinks width, raises lr, and shortens training so the whole pipeline runs
// on a laptop CPU in minutes.
struct TrainConfig {
    // model geometry
    int d = 512;
    int m = 6;          // frames per segment
    int k = 4;          // positive/negative scenes selected
    int L_isa = 2;      // self-attention layers per segment
    int mmt_layers = 3;
    int heads = 8;
    int cma_dk = 0;     // CMA key width; 0 means d
    int n_negatives = 4;          // contrastive negative subsets
    double tau = -1.0;            // negative-set score threshold; -1 means auto (1/T)
    double neg_pool_ratio = -1.0; // fraction of negatives drawn from the pool; -1 means
                                  // uniform over the combined candidate set
    double alpha = 0.0125;
    double beta = 0.04;
    double temp_start = 1.0;  // gumbel temperature, linear decay per epoch
    double temp_end = 0.3;
    double vc_temperature = 1.0;  // divides contrastive dot products
    std::string readout = "mean";  // answer embedding readout: mean | cls

    // optimizer / schedule
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double weight_decay = 0.0;
    int epochs = 50;
    int plateau_patience = 5;
    int batch_size = 32;
    uint64_t seed = 1;

    // ablation switches
    bool use_qgr = true;
    bool use_css = true;
    bool use_vc = true;
    bool use_sp = true;

    std::string mode = "mc";  // mc | open

    // plumbing
    int pool_capacity = 512;
    int max_question_len = 16;

    static TrainConfig paper_profile() { return {}; }
    static TrainConfig desk_profile();

    void validate() const;

    // Flat key=value round trip. Unknown keys and malformed values throw.
    void set(const std::string& key, const std::string& value);
    void save(std::ostream& out) const;
    void save_file(const std::string& path) const;
    // Applies key=value lines from the file over *this.
    void load_file(const std::string& path);
};

}  // namespace vcsr
