#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdlab/losses.hpp"
#include "vdlab/model.hpp"
#include "vdlab/packing.hpp"

namespace vdlab {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // decoupled
};

struct TrainConfig {
    Regime regime = Regime::Classification;
    LossConfig loss;
    std::optional<LoraConfig> lora;  // absent = full finetune
    double lr_max = 1e-4;
    int epochs = 50;
    int context_size = 256;
    std::optional<std::size_t> max_funcs_per_batch;
    std::uint64_t seed = 0;
    AdamConfig adam;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;  // mean loss per packed sequence
    double val_roc_auc = 0.0;
    double val_f1 = 0.0;
    double threshold = 0.5;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // argmax validation ROC AUC, earliest on ties
};

struct TrainResult {
    LanguageModel best_model;
    TrainHistory history;
};

// lr_max * (1 + cos(pi * step / total_steps)) / 2
double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max);

int select_best(const TrainHistory& history);

// Finetuning loop: one optimizer step per packed sequence, re-packing with an
// epoch-derived seed, validation scoring after every epoch, best checkpoint
// kept by validation ROC AUC.
TrainResult train(LanguageModel model, std::span<const FunctionSample> train_samples,
                  std::span<const FunctionSample> val_samples, const TrainConfig& cfg);

void write_history_jsonl(const TrainHistory& history, const std::string& path);

}  // namespace vdlab
