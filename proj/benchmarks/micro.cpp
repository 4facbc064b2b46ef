// Microbenchmarks for the per-frame hot paths: channel sweep, detector
// simulation, wire codec, network forward passes, optimizer update, tracking.
// Build with -DSEMBEAM_BUILD_BENCHMARKS=ON and run benchmarks/sembeam_bench.

#include <benchmark/benchmark.h>

#include <array>
#include <cstdint>
#include <vector>

#include "sembeam/channel.hpp"
#include "sembeam/networks.hpp"
#include "sembeam/nn.hpp"
#include "sembeam/rng.hpp"
#include "sembeam/scene.hpp"
#include "sembeam/semantics.hpp"
#include "sembeam/track.hpp"

using namespace sembeam;

namespace {

scene::Frame demo_frame(int vehicles) {
  scene::Frame f;
  f.t = 0;
  f.transmitter_id = 0;
  for (int i = 0; i < vehicles; ++i) {
    scene::VehicleState v;
    v.id = i;
    v.position = {-20.0 + 8.0 * i, 20.0};
    v.velocity = {10.0, 0.0};
    v.color = i == 0 ? std::array<std::uint8_t, 3>{200, 40, 40}
                     : std::array<std::uint8_t, 3>{90, 90, 100};
    v.is_transmitter = i == 0;
    f.vehicles.push_back(v);
  }
  return f;
}

semantics::SemanticMessage demo_message() {
  scene::CameraModel cam;
  semantics::DetectorParams det;
  det.sigma_px = 2.0;
  det.mask_width = 32;
  det.mask_height = 32;
  return semantics::simulate_detector(cam, demo_frame(6), det, 1, 7);
}

void BM_PowerVector(benchmark::State& state) {
  scene::WorldConfig world;
  channel::UlaConfig proto;  // 16 elements, 64 beams, three arrays
  const auto ulas = channel::make_bs_ulas(world, proto);
  std::array<channel::Codebook, channel::kUlaCount> books;
  for (std::size_t u = 0; u < books.size(); ++u) books[u] = channel::make_codebook(ulas[u]);
  const channel::ChannelConfig ch;
  double x = -30.0;
  for (auto _ : state) {
    x = x > 30.0 ? -30.0 : x + 0.05;
    benchmark::DoNotOptimize(
        channel::compute_power_vector(ch, ulas, books, {0.0, 0.0}, {x, 20.0}, nullptr));
  }
}
BENCHMARK(BM_PowerVector);

void BM_DetectorFrame(benchmark::State& state) {
  scene::CameraModel cam;
  semantics::DetectorParams det;
  det.sigma_px = 2.0;
  det.p_miss = 0.03;
  det.lambda_fp = 0.05;
  det.mask_width = 32;
  det.mask_height = 32;
  const scene::Frame frame = demo_frame(static_cast<int>(state.range(0)));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(semantics::simulate_detector(cam, frame, det, 1, seed++));
  }
}
BENCHMARK(BM_DetectorFrame)->Arg(3)->Arg(6);

void BM_EncodeMessage(benchmark::State& state) {
  const auto msg = demo_message();
  for (auto _ : state) benchmark::DoNotOptimize(semantics::encode_message(msg));
}
BENCHMARK(BM_EncodeMessage);

void BM_DecodeMessage(benchmark::State& state) {
  const auto bytes = semantics::encode_message(demo_message());
  for (auto _ : state) {
    benchmark::DoNotOptimize(semantics::decode_message(bytes.data(), bytes.size(), 32, 32));
  }
}
BENCHMARK(BM_DecodeMessage);

void BM_LeNetForward(benchmark::State& state) {
  nn::LeNet::Spec spec;
  spec.in_h = 32;
  spec.in_w = 32;
  spec.out = 64;
  nn::LeNet net(spec, 1);
  nn::Tensor x({static_cast<int>(state.range(0)), 1, 32, 32});
  Rng rng(2);
  for (auto& v : x.v) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_LeNetForward)->Arg(1)->Arg(8);

void BM_BBoxLstmForward(benchmark::State& state) {
  nn::BBoxLstm::Spec spec;  // 4 -> 64 hidden over 5 steps
  spec.out = 64;
  nn::BBoxLstm net(spec, 3);
  nn::Tensor x({8, 5, 4});
  Rng rng(4);
  for (auto& v : x.v) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_BBoxLstmForward);

void BM_MaskLstmForward(benchmark::State& state) {
  nn::MaskLstm::Spec spec;
  spec.in_h = 32;
  spec.in_w = 32;
  spec.out = 64;
  nn::MaskLstm net(spec, 5);
  nn::Tensor x({8, 5, 32, 32});
  Rng rng(6);
  for (auto& v : x.v) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_MaskLstmForward);

void BM_AdamStep(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<double> params(n), grads(n);
  Rng rng(7);
  for (std::size_t i = 0; i < n; ++i) {
    params[i] = rng.normal() * 0.1;
    grads[i] = rng.normal() * 0.01;
  }
  nn::AdamState opt(n);
  for (auto _ : state) {
    nn::adam_step(params, grads, opt, 1e-3);
    benchmark::DoNotOptimize(params.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_AdamStep)->Arg(1 << 14)->Arg(1 << 18);

void BM_TrackWindow(benchmark::State& state) {
  std::vector<semantics::SemanticMessage> msgs;
  scene::CameraModel cam;
  semantics::DetectorParams det;
  det.sigma_px = 2.0;
  det.mask_width = 32;
  det.mask_height = 32;
  auto frame = demo_frame(6);
  for (int t = 0; t < 5; ++t) {
    frame.t = t;
    for (auto& v : frame.vehicles) v.position.x += v.velocity.x * 0.1;
    msgs.push_back(semantics::simulate_detector(cam, frame, det, 1, 9));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(track::track_sequence(msgs, 0, track::TrackMode::kMask));
  }
}
BENCHMARK(BM_TrackWindow);

}  // namespace

BENCHMARK_MAIN();
