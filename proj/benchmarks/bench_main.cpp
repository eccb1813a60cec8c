#include <benchmark/benchmark.h>

#include "dspear/replay.hpp"
#include "dspear/sac.hpp"

using namespace dspear;

namespace {

ReplayBuffer filled_buffer(std::size_t size, std::size_t sdim, std::size_t adim) {
  ReplayBuffer buf(size, sdim, adim, 1);
  Rng rng(2);
  std::vector<double> s(sdim), a(adim), s2(sdim);
  std::vector<std::size_t> slots;
  std::vector<double> prio;
  for (std::size_t i = 0; i < size; ++i) {
    for (auto& x : s) x = rng.uniform(-1.0, 1.0);
    for (auto& x : a) x = rng.uniform(-1.0, 1.0);
    for (auto& x : s2) x = rng.uniform(-1.0, 1.0);
    slots.push_back(buf.insert(s, a, rng.uniform(), s2, false));
    prio.push_back(rng.uniform(0.0, 2.0));
  }
  buf.update_priorities(slots, prio);
  return buf;
}

void BM_AssembleBatches(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ReplayBuffer buf = filled_buffer(50'000, 5, 2);
  AnchorController ctl(0.5, 1e-6);
  AssemblyOptions opt;
  opt.batch_size = n;
  for (auto _ : state) benchmark::DoNotOptimize(assemble_batches(buf, ctl, opt));
}
BENCHMARK(BM_AssembleBatches)->Arg(64)->Arg(256);

void BM_MaxPriorityInsert(benchmark::State& state) {
  ReplayBuffer buf = filled_buffer(100'000, 5, 2);
  const std::vector<double> s(5, 0.1), a(2, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(buf.insert(s, a, 1.0, s, false));
}
BENCHMARK(BM_MaxPriorityInsert);

void BM_NetForwardBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const DenseNet net = DenseNet::uniform_init({7, hidden, hidden, 1}, rng);
  Matrix x = Matrix::Random(7, 256);
  const Matrix g = Matrix::Ones(1, 256);
  for (auto _ : state) {
    const Tape tape = net.forward_tape(x);
    benchmark::DoNotOptimize(net.backward(tape, g, true));
  }
}
BENCHMARK(BM_NetForwardBackward)->Arg(64)->Arg(256);

void BM_SacUpdate(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  SacOptions opt;
  opt.state_dim = 5;
  opt.action_dim = 2;
  opt.hidden = {hidden, hidden};
  SacLearner learner(opt, 4);
  ReplayBuffer buf = filled_buffer(10'000, 5, 2);
  const auto idx = sample_distinct(buf.size(), 256, buf.rng());
  const TransitionBatch batch = buf.gather(idx);
  for (auto _ : state) {
    benchmark::DoNotOptimize(learner.critic_update(batch));
    benchmark::DoNotOptimize(learner.actor_update(batch));
    benchmark::DoNotOptimize(learner.temperature_update(batch));
    learner.polyak_update(opt.tau);
  }
}
BENCHMARK(BM_SacUpdate)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
