#include "vdlab/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "vdlab/metrics.hpp"

namespace vdlab {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (lr_max <= 0.0) throw std::invalid_argument("lr_max must be positive");
    if (context_size < 8) throw std::invalid_argument("context_size must be >= 8");
    loss.validate();
    if (lora) lora->validate();
    if (loss.objective != regime)
        throw std::invalid_argument("loss objective does not match training regime");
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max) {
    if (total_steps == 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
    if (step > total_steps) throw std::invalid_argument("cosine_lr: step exceeds total_steps");
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

int select_best(const TrainHistory& history) {
    if (history.epochs.empty()) throw std::invalid_argument("select_best: empty history");
    int best = 0;
    for (std::size_t i = 1; i < history.epochs.size(); ++i)
        if (history.epochs[i].val_roc_auc > history.epochs[best].val_roc_auc)
            best = static_cast<int>(i);
    return best;
}

namespace {

// Per-parameter Adam moments.
struct AdamState {
    Tensor m, v;
    explicit AdamState(const Tensor& like) : m(like.shape()), v(like.shape()) {}
};

std::uint64_t epoch_seed(std::uint64_t base, int epoch) {
    // splitmix64 step over (base, epoch)
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

void adam_step(std::vector<Parameter*>& params, std::vector<AdamState>& states, double lr,
               const AdamConfig& cfg, std::size_t t) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Parameter& par = *params[p];
        AdamState& st = states[p];
        for (std::size_t i = 0; i < par.value.size(); ++i) {
            const double g = par.grad[i];
            st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
            st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = st.m[i] / bc1;
            const double vhat = st.v[i] / bc2;
            par.value[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * par.value[i]);
        }
    }
}

}  // namespace

TrainResult train(LanguageModel model, std::span<const FunctionSample> train_samples,
                  std::span<const FunctionSample> val_samples, const TrainConfig& cfg) {
    cfg.validate();
    if (train_samples.empty() || val_samples.empty())
        throw std::invalid_argument("train: empty train or validation set");
    {
        std::unordered_set<std::string> ids;
        for (const auto& s : train_samples) ids.insert(s.id);
        for (const auto& s : val_samples)
            if (ids.count(s.id))
                throw std::invalid_argument("train: sample " + s.id + " appears in train and val");
    }
    if (model.config().context_size != cfg.context_size)
        throw std::invalid_argument("train: model context_size " +
                                    std::to_string(model.config().context_size) +
                                    " differs from config " + std::to_string(cfg.context_size));
    if (cfg.lora && !model.lora()) model.apply_lora(*cfg.lora);

    auto trainables = model.trainable_parameters();
    if (trainables.empty()) throw std::invalid_argument("train: no trainable parameters");
    std::vector<AdamState> states;
    states.reserve(trainables.size());
    for (auto* p : trainables) states.emplace_back(p->value);

    // Total planned steps for the cosine schedule: epoch 0's packing decides
    // the per-epoch step count (re-packs of the same corpus shift it only
    // marginally).
    const auto ctx = static_cast<std::size_t>(cfg.context_size);
    const std::size_t steps_per_epoch =
        pack(train_samples, cfg.regime, ctx, cfg.max_funcs_per_batch, epoch_seed(cfg.seed, 0)).size();
    const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(cfg.epochs);

    std::mt19937_64 dropout_rng(epoch_seed(cfg.seed, -1));
    TrainResult result{model.clone(), {}};
    double best_auc = -1.0;
    std::size_t step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto sequences =
            pack(train_samples, cfg.regime, ctx, cfg.max_funcs_per_batch, epoch_seed(cfg.seed, epoch));
        double loss_sum = 0.0;
        for (std::size_t si = 0; si < sequences.size(); ++si) {
            const auto& seq = sequences[si];
            Graph g;
            auto logits = model.build_logits(g, seq.tokens, /*training=*/true, &dropout_rng);
            Graph::NodeId loss = cfg.regime == Regime::Ntp
                                     ? ntp_loss_node(g, logits, seq.tokens)
                                     : classification_loss_node(g, logits, seq, cfg.loss);
            const double loss_val = g.value(loss)[0];
            if (!std::isfinite(loss_val))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", sequence " + std::to_string(si) + " (first sample " +
                                         seq.entries.front().sample_id + ")");
            loss_sum += loss_val;
            model.zero_grads();
            g.backward(loss);
            const double lr = cosine_lr(std::min(step, total_steps), total_steps, cfg.lr_max);
            adam_step(trainables, states, lr, cfg.adam, step + 1);
            ++step;
        }

        ScoredSet val_scores;
        for (const auto& s : val_samples) val_scores.add(model.predict_vuln_prob(s), s.label);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(sequences.size());
        rec.val_roc_auc = roc_auc(val_scores);
        const auto thr = optimal_threshold(val_scores);
        rec.val_f1 = thr.f1;
        rec.threshold = thr.threshold;
        result.history.epochs.push_back(rec);

        if (rec.val_roc_auc > best_auc) {
            best_auc = rec.val_roc_auc;
            result.best_model = model.clone();
        }
    }
    result.history.best_epoch = select_best(result.history);
    return result;
}

void write_history_jsonl(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& r : history.epochs) {
        nlohmann::json j{{"epoch", r.epoch},
                         {"train_loss", r.train_loss},
                         {"val_roc_auc", r.val_roc_auc},
                         {"val_f1", r.val_f1},
                         {"threshold", r.threshold},
                         {"best", r.epoch == history.best_epoch}};
        out << j.dump() << "\n";
    }
}

}  // namespace vdlab
