#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vcsr/config.hpp"
#include "vcsr/dataset.hpp"
#include "vcsr/model.hpp"

namespace vcsr {

struct MetricsRecord {
    int epoch = 0;
    std::string split;
    double loss_total = 0.0;
    double loss_qa = 0.0;
    double loss_vc = 0.0;
    double loss_sp = 0.0;
    double accuracy = 0.0;
    double scene_recall = -1.0;   // -1 when scene separation is disabled
    double chance_recall = -1.0;  // analytic baseline for scene_recall
    double lr = 0.0;

    std::string to_json_line() const;
};

struct EvalReport {
    double accuracy = 0.0;
    double mean_loss_qa = 0.0;
    double scene_recall = -1.0;
    double chance_recall = -1.0;
    std::vector<double> per_family_accuracy;
    int n = 0;
};

struct TrainReport {
    std::vector<MetricsRecord> trace;  // train and val records, epoch order
    std::string best_checkpoint;
    double best_val_accuracy = 0.0;
    int best_epoch = -1;
};

// Linear interpolation from temp_start to temp_end across the epochs.
double gumbel_temperature(const TrainConfig& cfg, int epoch);

// Recall of one selection against the planted window: overlapping picks over
// min(|selected|, segments that could overlap).
double scene_recall_one(const std::vector<int>& selected, int n_frames, int m, int begin,
                        int end);

// Deterministic argmax evaluation with frozen parameters.
EvalReport evaluate(VcsrModel& model, const std::vector<SyntheticSample>& samples);

// Full training loop: batched AdamW on the total objective, per-epoch train
// and validation metrics (appended to <out_dir>/metrics.jsonl), learning rate
// halved when validation accuracy plateaus, best checkpoint kept. Aborts with
// a diagnostic on non-finite loss. Identical seeds give identical traces.
TrainReport train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& val_ds,
                  const std::string& out_dir, std::ostream* log = nullptr);

struct AblationRow {
    std::string name;
    double accuracy = 0.0;
    double scene_recall = -1.0;
    double chance_recall = -1.0;
    double best_val_accuracy = 0.0;
};

// Trains and evaluates the standard variant grid: full, w/o QGR, w/o CSS,
// w/o L_SP, w/o L_VC.
std::vector<AblationRow> run_ablation_grid(const TrainConfig& base, const Dataset& train_ds,
                                           const Dataset& val_ds, const std::string& out_dir,
                                           std::ostream* log = nullptr);

// Candidate count (mc) or answer vocabulary size (open) implied by the data.
int answer_count_for(const Dataset& ds);

}  // namespace vcsr
