#include "vcsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "vcsr/checkpoint.hpp"
#include "vcsr/ops.hpp"
#include "vcsr/optim.hpp"

namespace vcsr {

namespace {

std::vector<Tensor> trainable_leaves(ParamStore& store) {
    std::vector<Tensor> out;
    out.reserve(store.entries().size());
    for (const auto& [name, tensor] : store.entries()) out.push_back(tensor);
    return out;
}

int target_of(const TrainConfig& cfg, const SyntheticSample& s) {
    return cfg.mode == "mc" ? s.answer_index : s.answer_id;
}

void check_headers(const Dataset& train_ds, const Dataset& val_ds) {
    const auto& a = train_ds.header;
    const auto& b = val_ds.header;
    if (a.d_in != b.d_in || a.n_frames != b.n_frames || a.mode != b.mode ||
        a.vocab_size != b.vocab_size) {
        throw std::invalid_argument("train and validation datasets have mismatched headers");
    }
    if (train_ds.samples.empty()) throw std::invalid_argument("training dataset is empty");
    if (val_ds.samples.empty()) throw std::invalid_argument("validation dataset is empty");
}

}  // namespace

std::string MetricsRecord::to_json_line() const {
    nlohmann::json j;
    j["epoch"] = epoch;
    j["split"] = split;
    j["loss_total"] = loss_total;
    j["loss_qa"] = loss_qa;
    j["loss_vc"] = loss_vc;
    j["loss_sp"] = loss_sp;
    j["accuracy"] = accuracy;
    j["scene_recall"] = scene_recall;
    j["chance_recall"] = chance_recall;
    j["lr"] = lr;
    return j.dump();
}

double gumbel_temperature(const TrainConfig& cfg, int epoch) {
    if (epoch < 0) throw std::invalid_argument("gumbel_temperature: epoch must be >= 0");
    if (cfg.epochs <= 1) return cfg.temp_start;
    double frac = static_cast<double>(std::min(epoch, cfg.epochs - 1)) / (cfg.epochs - 1);
    return cfg.temp_start + (cfg.temp_end - cfg.temp_start) * frac;
}

double scene_recall_one(const std::vector<int>& selected, int n_frames, int m, int begin,
                        int end) {
    if (selected.empty()) throw std::invalid_argument("scene_recall_one: empty selection");
    int n_overlap = overlapping_segments(n_frames, m, begin, end);
    if (n_overlap == 0) return 0.0;
    std::vector<int> distinct(selected);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    int hits = 0;
    for (int t : distinct) {
        if (t + m > begin && t < end) ++hits;
    }
    int denom = std::min(static_cast<int>(distinct.size()), n_overlap);
    return static_cast<double>(hits) / denom;
}

int answer_count_for(const Dataset& ds) {
    if (ds.samples.empty()) throw std::invalid_argument("answer_count_for: empty dataset");
    if (ds.header.mode == "mc") {
        size_t n = ds.samples.front().candidate_tokens.size();
        for (const auto& s : ds.samples) {
            if (s.candidate_tokens.size() != n) {
                throw std::invalid_argument("answer_count_for: inconsistent candidate counts");
            }
        }
        return static_cast<int>(n);
    }
    int max_id = 0;
    for (const auto& s : ds.samples) max_id = std::max(max_id, s.answer_id);
    return max_id + 1;
}

EvalReport evaluate(VcsrModel& model, const std::vector<SyntheticSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
    ForwardOptions opt;
    opt.training = false;
    opt.stochastic = false;
    opt.hard = true;
    opt.update_pool = false;
    Rng unused(0);

    EvalReport report;
    report.n = static_cast<int>(samples.size());
    const TrainConfig& cfg = model.config();
    std::vector<int> family_correct, family_total;
    double recall_sum = 0.0, chance_sum = 0.0;
    int recall_n = 0;

    for (const auto& s : samples) {
        ForwardResult res = model.forward(s, opt, unused);
        if (res.predicted == target_of(cfg, s)) report.accuracy += 1.0;
        report.mean_loss_qa += res.l_qa.value();
        if (s.family >= static_cast<int>(family_total.size())) {
            family_correct.resize(s.family + 1, 0);
            family_total.resize(s.family + 1, 0);
        }
        family_total[s.family] += 1;
        if (res.predicted == target_of(cfg, s)) family_correct[s.family] += 1;
        if (!res.positive_indices.empty()) {
            int m = cfg.m;
            recall_sum += scene_recall_one(res.positive_indices, s.frames.shape()[0], m,
                                           s.causal_begin, s.causal_end);
            chance_sum += chance_scene_recall(s.frames.shape()[0], m,
                                              static_cast<int>(res.positive_indices.size()),
                                              s.causal_begin, s.causal_end);
            ++recall_n;
        }
    }

    report.accuracy /= report.n;
    report.mean_loss_qa /= report.n;
    if (recall_n > 0) {
        report.scene_recall = recall_sum / recall_n;
        report.chance_recall = chance_sum / recall_n;
    }
    report.per_family_accuracy.resize(family_total.size(), 0.0);
    for (size_t f = 0; f < family_total.size(); ++f) {
        if (family_total[f] > 0) {
            report.per_family_accuracy[f] =
                static_cast<double>(family_correct[f]) / family_total[f];
        }
    }
    return report;
}

TrainReport train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& val_ds,
                  const std::string& out_dir, std::ostream* log) {
    cfg.validate();
    check_headers(train_ds, val_ds);
    if (cfg.mode != train_ds.header.mode) {
        throw std::invalid_argument("train: config mode does not match dataset mode");
    }
    std::filesystem::create_directories(out_dir);

    int n_answers = answer_count_for(train_ds);
    if (cfg.mode == "open") n_answers = std::max(n_answers, answer_count_for(val_ds));

    VcsrModel model(cfg, train_ds.header.d_in, train_ds.header.n_frames,
                    train_ds.header.vocab_size, n_answers);
    AdamW opt(trainable_leaves(model.params()), cfg.lr, cfg.beta1, cfg.beta2, cfg.weight_decay);
    PlateauHalver plateau(cfg.plateau_patience);
    Rng root(cfg.seed);

    std::ofstream metrics(out_dir + "/metrics.jsonl", std::ios::app);
    if (!metrics) throw std::runtime_error("train: cannot open " + out_dir + "/metrics.jsonl");

    TrainReport report;
    report.best_val_accuracy = -1.0;
    std::string ckpt_path = out_dir + "/best.ckpt";
    double lr_now = cfg.lr;
    size_t n = train_ds.samples.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double temp = gumbel_temperature(cfg, epoch);
        Rng shuffle_rng = root.derive(801, static_cast<uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        double sum_total = 0.0, sum_qa = 0.0, sum_vc = 0.0, sum_sp = 0.0;
        double recall_sum = 0.0, chance_sum = 0.0;
        int correct = 0, recall_n = 0;

        for (size_t start = 0; start < n; start += cfg.batch_size) {
            size_t stop = std::min(n, start + cfg.batch_size);
            model.params().zero_grads();
            for (size_t i = start; i < stop; ++i) {
                const SyntheticSample& s = train_ds.samples[order[i]];
                Rng sample_rng = root.derive(802, s.video_id, static_cast<uint64_t>(epoch));
                ForwardOptions fopt;
                fopt.training = true;
                fopt.stochastic = true;
                fopt.hard = true;
                fopt.temperature = temp;
                fopt.update_pool = true;
                ForwardResult res = model.forward(s, fopt, sample_rng);
                double total_v = res.total.value();
                if (!std::isfinite(total_v)) {
                    throw std::runtime_error(
                        "train: non-finite loss at epoch " + std::to_string(epoch) +
                        ", video " + std::to_string(s.video_id));
                }
                sum_total += total_v;
                sum_qa += res.l_qa.value();
                sum_vc += res.l_vc.value();
                sum_sp += res.l_sp.value();
                if (res.predicted == target_of(cfg, s)) ++correct;
                if (!res.positive_indices.empty()) {
                    recall_sum += scene_recall_one(res.positive_indices, s.frames.shape()[0],
                                                   cfg.m, s.causal_begin, s.causal_end);
                    chance_sum +=
                        chance_scene_recall(s.frames.shape()[0], cfg.m,
                                            static_cast<int>(res.positive_indices.size()),
                                            s.causal_begin, s.causal_end);
                    ++recall_n;
                }
                Tensor scaled = ops::scale(res.total, 1.0 / static_cast<double>(stop - start));
                scaled.backward();
            }
            opt.step();
        }

        MetricsRecord train_rec;
        train_rec.epoch = epoch;
        train_rec.split = "train";
        train_rec.loss_total = sum_total / n;
        train_rec.loss_qa = sum_qa / n;
        train_rec.loss_vc = sum_vc / n;
        train_rec.loss_sp = sum_sp / n;
        train_rec.accuracy = static_cast<double>(correct) / n;
        if (recall_n > 0) {
            train_rec.scene_recall = recall_sum / recall_n;
            train_rec.chance_recall = chance_sum / recall_n;
        }
        train_rec.lr = lr_now;
        metrics << train_rec.to_json_line() << "\n";
        report.trace.push_back(train_rec);

        EvalReport val = evaluate(model, val_ds.samples);
        MetricsRecord val_rec;
        val_rec.epoch = epoch;
        val_rec.split = "val";
        val_rec.loss_total = val.mean_loss_qa;
        val_rec.loss_qa = val.mean_loss_qa;
        val_rec.loss_vc = 0.0;
        val_rec.loss_sp = 0.0;
        val_rec.accuracy = val.accuracy;
        val_rec.scene_recall = val.scene_recall;
        val_rec.chance_recall = val.chance_recall;
        val_rec.lr = lr_now;
        metrics << val_rec.to_json_line() << "\n";
        metrics.flush();
        report.trace.push_back(val_rec);

        if (log) {
            (*log) << "epoch " << epoch << " train_loss " << train_rec.loss_total
                   << " val_acc " << val.accuracy << " val_recall " << val.scene_recall
                   << " lr " << lr_now << "\n";
        }

        if (val.accuracy > report.best_val_accuracy) {
            report.best_val_accuracy = val.accuracy;
            report.best_epoch = epoch;
            save_checkpoint(ckpt_path, cfg, model.params());
            report.best_checkpoint = ckpt_path;
        }
        if (plateau.observe(val.accuracy)) {
            lr_now *= 0.5;
            opt.set_lr(lr_now);
        }
    }
    return report;
}

std::vector<AblationRow> run_ablation_grid(const TrainConfig& base, const Dataset& train_ds,
                                           const Dataset& val_ds, const std::string& out_dir,
                                           std::ostream* log) {
    struct Variant {
        std::string name;
        std::string slug;
        void (*mutate)(TrainConfig&);
    };
    const Variant variants[] = {
        {"full", "full", [](TrainConfig&) {}},
        {"w/o QGR", "no-qgr", [](TrainConfig& c) { c.use_qgr = false; }},
        {"w/o CSS", "no-css", [](TrainConfig& c) { c.use_css = false; }},
        {"w/o L_SP", "no-lsp", [](TrainConfig& c) { c.use_sp = false; }},
        {"w/o L_VC", "no-lvc", [](TrainConfig& c) { c.use_vc = false; }},
    };

    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        TrainConfig cfg = base;
        v.mutate(cfg);
        std::string dir = out_dir + "/" + v.slug;
        if (log) (*log) << "ablation variant: " << v.name << "\n";
        TrainReport rep = train(cfg, train_ds, val_ds, dir, log);

        Checkpoint ckpt = load_checkpoint(rep.best_checkpoint);
        VcsrModel model(cfg, train_ds.header.d_in, train_ds.header.n_frames,
                        train_ds.header.vocab_size,
                        cfg.mode == "open"
                            ? std::max(answer_count_for(train_ds), answer_count_for(val_ds))
                            : answer_count_for(train_ds));
        apply_checkpoint(ckpt, model.params());
        EvalReport ev = evaluate(model, val_ds.samples);

        AblationRow row;
        row.name = v.name;
        row.accuracy = ev.accuracy;
        row.scene_recall = ev.scene_recall;
        row.chance_recall = ev.chance_recall;
        row.best_val_accuracy = rep.best_val_accuracy;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace vcsr
