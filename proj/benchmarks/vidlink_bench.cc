#include <benchmark/benchmark.h>

#include "vidlink/netem.h"
#include "vidlink/scenario.h"
#include "vidlink/simulation.h"
#include "vidlink/transport.h"

namespace vidlink {
namespace {

void BM_Packetize(benchmark::State& state) {
  FrameDescriptor f;
  f.size = static_cast<uint32_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(Packetize(f, kDefaultMtu));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Packetize)->Arg(1200)->Arg(83333)->Arg(303030);

void BM_EncodeDecode(benchmark::State& state) {
  FrameDescriptor f;
  f.size = 83333;
  const auto packets = Packetize(f, kDefaultMtu);
  for (auto _ : state) {
    for (const MediaPacket& p : packets)
      benchmark::DoNotOptimize(DecodeMediaPacket(Encode(p)));
  }
  state.SetItemsProcessed(state.iterations() * packets.size());
}
BENCHMARK(BM_EncodeDecode);

void BM_BottleneckLink(benchmark::State& state) {
  const CapacitySchedule schedule(
      {{0, 20e6}, {0.5, 8e6}, {1.0, 15e6}, {1.5, 30e6}});
  for (auto _ : state) {
    BottleneckLink link(schedule, LinkParams{});
    double t = 0.0;
    for (int i = 0; i < 2000; ++i) {
      link.Offer(1220, t);
      t += 0.0005;
      benchmark::DoNotOptimize(link.AdvanceTo(t));
    }
  }
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_BottleneckLink);

void BM_FullSimulation(benchmark::State& state) {
  Scenario s = LoadScenario("paper-default");
  s.adaptation_enabled = state.range(0) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(RunSim(s));
}
BENCHMARK(BM_FullSimulation)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace vidlink

BENCHMARK_MAIN();
