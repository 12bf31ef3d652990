#include <benchmark/benchmark.h>

#include "micacl/databag.hpp"
#include "micacl/mccl.hpp"
#include "micacl/model.hpp"
#include "micacl/optim.hpp"

using namespace micacl;

namespace {

struct BenchSetup {
    ModelConfig cfg;
    ModelParams params;
    Tensor batch;
    std::vector<int> labels;
    ClassStats stats;

    explicit BenchSetup(int batch_size) {
        Rng rng(1);
        params = ModelParams::init(cfg, rng);
        batch = Tensor::uniform({batch_size, cfg.T, cfg.C_in}, -1, 1, rng);
        labels.resize(static_cast<std::size_t>(batch_size));
        for (std::size_t i = 0; i < labels.size(); ++i)
            labels[i] = static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.K)));
        stats.tau0 = cfg.tau0;
        stats.counts = {51, 32, 20, 13, 8, 5, 3};
    }
};

void BM_ForwardModel(benchmark::State& state) {
    BenchSetup s(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        const ModelOut out = forward_model(s.batch, s.params, s.cfg);
        benchmark::DoNotOptimize(out.logits.values().data());
    }
}
BENCHMARK(BM_ForwardModel)->Arg(4)->Arg(16);

void BM_TrainStep(benchmark::State& state) {
    BenchSetup s(static_cast<int>(state.range(0)));
    auto named = s.params.named_parameters();
    OptimState opt = OptimState::init(named, OptimConfig{});
    for (auto _ : state) {
        const ModelOut out = forward_model(s.batch, s.params, s.cfg);
        Tensor loss = total_loss(mccl_loss(out.bag_embed, s.labels, s.stats, out.logits.detach(),
                                           s.params.scale_set),
                                 cet_loss(out.logits, s.labels));
        for (auto& [n, p] : named) p.zero_grad();
        backward(loss);
        adamw_step(named, opt, 4e-4);
        benchmark::DoNotOptimize(loss.item());
    }
}
BENCHMARK(BM_TrainStep)->Arg(16);

void BM_McclLoss(benchmark::State& state) {
    BenchSetup s(static_cast<int>(state.range(0)));
    const ModelOut out = forward_model(s.batch, s.params, s.cfg);
    Tensor embed = out.bag_embed.detach();
    Tensor logits = out.logits.detach();
    for (auto _ : state) {
        Tensor loss = mccl_loss(embed, s.labels, s.stats, logits, s.params.scale_set);
        benchmark::DoNotOptimize(loss.item());
    }
}
BENCHMARK(BM_McclLoss)->Arg(16)->Arg(64);

void BM_GenDataset(benchmark::State& state) {
    DatasetSpec spec;
    for (auto _ : state) {
        spec.seed += 1;
        const Dataset ds = gen_dataset(spec);
        benchmark::DoNotOptimize(ds.bags.back().instances.data());
    }
}
BENCHMARK(BM_GenDataset);

}  // namespace

BENCHMARK_MAIN();
