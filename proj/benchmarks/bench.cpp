#include <benchmark/benchmark.h>

#include <random>

#include "vdlab/datasetgen.hpp"
#include "vdlab/losses.hpp"
#include "vdlab/metrics.hpp"
#include "vdlab/model.hpp"
#include "vdlab/packing.hpp"

namespace {

using namespace vdlab;

void BM_MatMul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0.0, 1.0);
    Parameter a("a", Tensor({n, n}));
    Parameter b("b", Tensor({n, n}));
    for (auto& v : a.value.values()) v = d(rng);
    for (auto& v : b.value.values()) v = d(rng);
    for (auto _ : state) {
        Graph g;
        benchmark::DoNotOptimize(g.value(g.matmul(g.param(a), g.param(b))));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatMul)->Arg(64)->Arg(128)->Arg(256);

void BM_ForwardPass(benchmark::State& state) {
    ModelConfig cfg;
    cfg.context_size = static_cast<int>(state.range(0));
    auto model = LanguageModel::init(cfg, 1);
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> tok(0, 255);
    std::vector<int> tokens(static_cast<std::size_t>(cfg.context_size));
    for (auto& t : tokens) t = tok(rng);
    for (auto _ : state) {
        Graph g;
        benchmark::DoNotOptimize(g.value(model.build_logits(g, tokens)));
    }
}
BENCHMARK(BM_ForwardPass)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
    ModelConfig cfg;
    cfg.context_size = static_cast<int>(state.range(0));
    auto model = LanguageModel::init(cfg, 1);
    FunctionSample s;
    s.id = "b";
    s.code = std::string(static_cast<std::size_t>(cfg.context_size) / 2, 'x');
    s.label = 1;
    s.partition = Partition::P1;
    const auto seq = eval_layout(s, static_cast<std::size_t>(cfg.context_size));
    LossConfig lcfg;
    for (auto _ : state) {
        Graph g;
        auto logits = model.build_logits(g, seq.tokens);
        model.zero_grads();
        g.backward(classification_loss_node(g, logits, seq, lcfg));
    }
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Pack(benchmark::State& state) {
    SynthSpec spec;
    spec.seed = 3;
    spec.n_neg_hard = static_cast<std::size_t>(state.range(0));
    const auto commits = synth_corpus(spec);
    std::vector<FunctionSample> samples;
    for (const auto& c : commits) {
        auto ex = extract_pairs(c);
        for (auto& f : ex.p3) samples.push_back(std::move(f));
    }
    for (auto _ : state)
        benchmark::DoNotOptimize(pack(samples, Regime::Classification, 2048, std::nullopt, 1));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(samples.size()));
}
BENCHMARK(BM_Pack)->Arg(1000)->Arg(10000);

void BM_RocAuc(benchmark::State& state) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> lbl(0, 1);
    ScoredSet set;
    for (std::int64_t i = 0; i < state.range(0); ++i) set.add(u(rng), lbl(rng));
    for (auto _ : state) benchmark::DoNotOptimize(roc_auc(set));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
