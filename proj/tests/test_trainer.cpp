#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "vdlab/datasetgen.hpp"
#include "vdlab/trainer.hpp"

using namespace vdlab;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.context_size = 32;
    return cfg;
}

// Tiny separable corpus: positives carry a '#', negatives don't.
std::vector<FunctionSample> sentinel_samples(std::size_t n, const std::string& prefix) {
    std::vector<FunctionSample> out;
    std::mt19937_64 rng(std::hash<std::string>{}(prefix));
    std::uniform_int_distribution<int> ch('a', 'z');
    for (std::size_t i = 0; i < n; ++i) {
        FunctionSample s;
        s.id = prefix + std::to_string(i);
        s.label = i % 2 == 0 ? 1 : 0;
        s.partition = s.label == 1 ? Partition::P1 : Partition::P2;
        for (int j = 0; j < 12; ++j) s.code.push_back(static_cast<char>(ch(rng)));
        if (s.label == 1) s.code.insert(4, "###");
        out.push_back(std::move(s));
    }
    return out;
}

TrainConfig quick_config(int epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.context_size = 32;
    cfg.lr_max = 3e-3;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("cosine schedule endpoints") {
    CHECK(cosine_lr(0, 100, 0.5) == 0.5);
    CHECK(std::fabs(cosine_lr(100, 100, 0.5)) <= 1e-18);
    CHECK(cosine_lr(50, 100, 0.5) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_lr(0, 0, 0.5), std::invalid_argument);
}

TEST_CASE("select_best picks the earliest argmax") {
    TrainHistory h;
    h.epochs = {{0, 0, 0.6, 0, 0}, {1, 0, 0.8, 0, 0}, {2, 0, 0.7, 0, 0}};
    CHECK(select_best(h) == 1);
    h.epochs = {{0, 0, 0.7, 0, 0}, {1, 0, 0.7, 0, 0}};
    CHECK(select_best(h) == 0);
    h.epochs = {{0, 0, 0.5, 0, 0}};
    CHECK(select_best(h) == 0);
    h.epochs.clear();
    CHECK_THROWS_AS(select_best(h), std::invalid_argument);
}

TEST_CASE("overlapping train/val ids are rejected") {
    auto train_set = sentinel_samples(6, "a");
    auto val_set = sentinel_samples(4, "a");  // same ids
    auto model = LanguageModel::init(tiny_config(), 1);
    CHECK_THROWS_AS(train(std::move(model), train_set, val_set, quick_config(1)),
                    std::invalid_argument);
}

TEST_CASE("history length equals configured epochs") {
    auto model = LanguageModel::init(tiny_config(), 1);
    auto result =
        train(std::move(model), sentinel_samples(8, "t"), sentinel_samples(6, "v"), quick_config(3));
    CHECK(result.history.epochs.size() == 3);
    CHECK(result.history.best_epoch == select_best(result.history));
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    const auto ts = sentinel_samples(8, "t");
    const auto vs = sentinel_samples(6, "v");
    auto run = [&] {
        return train(LanguageModel::init(tiny_config(), 2), ts, vs, quick_config(2));
    };
    const auto r1 = run(), r2 = run();
    REQUIRE(r1.history.epochs.size() == r2.history.epochs.size());
    for (std::size_t i = 0; i < r1.history.epochs.size(); ++i) {
        CHECK(r1.history.epochs[i].train_loss == r2.history.epochs[i].train_loss);
        CHECK(r1.history.epochs[i].val_roc_auc == r2.history.epochs[i].val_roc_auc);
        CHECK(r1.history.epochs[i].threshold == r2.history.epochs[i].threshold);
    }
}

TEST_CASE("frozen base weights never change under lora training") {
    auto model = LanguageModel::init(tiny_config(), 3);
    TrainConfig cfg = quick_config(2);
    LoraConfig lora;
    lora.rank = 4;
    lora.dropout = 0.0;
    cfg.lora = lora;

    auto snapshot = [](const LanguageModel& m) {
        std::vector<std::vector<double>> out;
        for (const auto* p : m.parameters())
            out.emplace_back(p->value.values().begin(), p->value.values().end());
        return out;
    };
    auto reference = LanguageModel::init(tiny_config(), 3);
    const auto before = snapshot(reference);

    auto result =
        train(std::move(model), sentinel_samples(8, "t"), sentinel_samples(6, "v"), cfg);
    const auto& trained = result.best_model;
    const auto params = trained.parameters();
    bool adapters_moved = false;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const auto vals = params[i]->value.values();
        for (std::size_t j = 0; j < before[i].size(); ++j) CHECK(vals[j] == before[i][j]);
    }
    for (const auto* p : params)
        if (p->name.find("lora_b") != std::string::npos)
            for (double v : p->value.values())
                if (v != 0.0) adapters_moved = true;
    CHECK(adapters_moved);
}

TEST_CASE("one small step decreases the first-batch loss") {
    auto model = LanguageModel::init(tiny_config(), 4);
    const auto ts = sentinel_samples(8, "t");
    const auto seqs = pack(ts, Regime::Classification, 32, std::nullopt, 1);
    LossConfig lcfg;

    auto batch_loss = [&](LanguageModel& m) {
        Graph g;
        auto logits = m.build_logits(g, seqs[0].tokens);
        return g.value(classification_loss_node(g, logits, seqs[0], lcfg))[0];
    };
    const double before = batch_loss(model);
    Graph g;
    auto logits = model.build_logits(g, seqs[0].tokens);
    model.zero_grads();
    g.backward(classification_loss_node(g, logits, seqs[0], lcfg));
    const double lr = 1e-5;
    for (auto* p : model.trainable_parameters())
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr * p->grad[i];
    CHECK(batch_loss(model) < before);
}

TEST_CASE("non-finite loss aborts with the sequence named") {
    auto model = LanguageModel::init(tiny_config(), 5);
    // blow up a weight so the forward pass produces non-finite logits
    for (auto& v : model.param("head").value.values()) v = 1e308;
    CHECK_THROWS_AS(
        train(std::move(model), sentinel_samples(8, "t"), sentinel_samples(6, "v"), quick_config(1)),
        std::runtime_error);
}
