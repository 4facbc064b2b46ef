#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "sembeam/rng.hpp"
#include "sembeam/track.hpp"
#include "sembeam/util.hpp"

using namespace sembeam;
using namespace sembeam::track;

namespace {

semantics::Detection det_at(double x, double y, std::array<std::uint8_t, 3> color = {127, 127, 127},
                            int truth_id = -1) {
  semantics::Detection d;
  d.bbox = {static_cast<float>(x), static_cast<float>(y), 40.0f, 30.0f};
  d.color = color;
  d.truth_id = truth_id;
  return d;
}

semantics::SemanticMessage msg_of(std::vector<semantics::Detection> dets) {
  semantics::SemanticMessage m;
  m.detections = std::move(dets);
  return m;
}

scene::WorldConfig three_camera_world() {
  scene::WorldConfig world;
  world.roads = {{{-60.0, 20.0}, {60.0, 20.0}}};
  world.bs_position = {0.0, 0.0};
  world.bs_heading_rad = 0.0;
  world.cameras.resize(3);
  world.cameras[0].position = {0.0, 0.0};
  world.cameras[1].position = {0.0, -12.0};  // bearing +90: right region
  world.cameras[2].position = {0.0, 12.0};   // bearing -90: left region
  world.frame_count = 1;
  return world;
}

}  // namespace

TEST_SUITE("track") {

TEST_CASE("match_detection returns the nearest center, ties to the lower index") {
  const auto msg = msg_of({det_at(100, 200), det_at(400, 220)});
  CHECK(match_detection({110.0, 195.0}, msg) == 0);
  CHECK(match_detection({390.0, 230.0}, msg) == 1);

  const auto tie = msg_of({det_at(90, 100), det_at(110, 100)});
  CHECK(match_detection({100.0, 100.0}, tie) == 0);

  const semantics::SemanticMessage empty;
  CHECK_THROWS_WITH_AS((void)match_detection({0.0, 0.0}, empty), "no candidates", NumericError);
}

TEST_CASE("color_filter keeps colors within the radius and never empties") {
  const std::array<std::uint8_t, 3> tx{200, 40, 40};
  // Distances: 0, sqrt(125) ~ 11.2, sqrt(525) ~ 22.9.
  const auto msg = msg_of({det_at(0, 0, {200, 40, 40}), det_at(1, 0, {210, 45, 40}),
                           det_at(2, 0, {220, 50, 45})});
  CHECK(color_filter(tx, msg, 20.0) == std::vector<int>{0, 1});
  CHECK(color_filter(tx, msg, 11.0) == std::vector<int>{0});
  CHECK(color_filter(tx, msg, 23.0) == std::vector<int>{0, 1, 2});

  // The boundary itself is kept.
  const auto edge = msg_of({det_at(0, 0, {220, 40, 40})});
  CHECK(color_filter(tx, edge, 20.0) == std::vector<int>{0});

  // When nothing passes, the filter falls back to every candidate.
  const auto far = msg_of({det_at(0, 0, {10, 10, 10}), det_at(1, 0, {20, 200, 20})});
  CHECK(color_filter(tx, far, 20.0) == std::vector<int>{0, 1});

  // eps = 0 keeps exact matches only.
  CHECK(color_filter(tx, msg, 0.0) == std::vector<int>{0});
}

TEST_CASE("track_sequence failure modes") {
  CHECK_FALSE(track_sequence({}, 0, TrackMode::kBBox).ok);

  std::vector<semantics::SemanticMessage> w{msg_of({det_at(10, 10)})};
  CHECK_FALSE(track_sequence(w, 1, TrackMode::kBBox).ok);
  CHECK_FALSE(track_sequence(w, -1, TrackMode::kBBox).ok);

  std::vector<semantics::SemanticMessage> gap{msg_of({det_at(10, 10)}), msg_of({}),
                                              msg_of({det_at(12, 10)})};
  const TrackResult res = track_sequence(gap, 0, TrackMode::kBBox);
  CHECK_FALSE(res.ok);
  CHECK(res.reason == "frame without detections");
  CHECK(res.indices.empty());
}

TEST_CASE("track_sequence follows nearest centers frame to frame") {
  // The anchored vehicle drifts right; a decoy sits far away.
  std::vector<semantics::SemanticMessage> w{
      msg_of({det_at(100, 100), det_at(500, 400)}),
      msg_of({det_at(510, 398), det_at(112, 101)}),
      msg_of({det_at(125, 103), det_at(520, 395)}),
  };
  const TrackResult res = track_sequence(w, 0, TrackMode::kBBox);
  REQUIRE(res.ok);
  CHECK(res.indices == std::vector<int>{0, 1, 0});
}

TEST_CASE("track_sequence matches a brute-force oracle on randomized windows") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int r = 2 + static_cast<int>(rng.uniform_index(4));
    std::vector<semantics::SemanticMessage> w;
    for (int t = 0; t < r; ++t) {
      const int n = 1 + static_cast<int>(rng.uniform_index(6));
      std::vector<semantics::Detection> dets;
      for (int i = 0; i < n; ++i) {
        const std::array<std::uint8_t, 3> color{
            static_cast<std::uint8_t>(rng.uniform_index(4) * 60),
            static_cast<std::uint8_t>(rng.uniform_index(4) * 60),
            static_cast<std::uint8_t>(rng.uniform_index(4) * 60)};
        dets.push_back(det_at(rng.uniform(0.0, 1280.0), rng.uniform(0.0, 720.0), color));
      }
      w.push_back(msg_of(std::move(dets)));
    }
    const int first = static_cast<int>(rng.uniform_index(w.front().detections.size()));

    for (const TrackMode mode : {TrackMode::kBBox, TrackMode::kMask}) {
      const TrackResult got = track_sequence(w, first, mode);
      REQUIRE(got.ok);

      // Oracle: per frame, the closest candidate to the previous pick, ties
      // to the lower index; mask mode restricts candidates by color first.
      std::vector<int> expect{first};
      Vec2 prev = w.front().detections[static_cast<std::size_t>(first)].center();
      const auto anchor_color = w.front().detections[static_cast<std::size_t>(first)].color;
      for (std::size_t t = 1; t < w.size(); ++t) {
        std::vector<int> cand;
        if (mode == TrackMode::kMask) {
          cand = color_filter(anchor_color, w[t]);
        } else {
          for (int i = 0; i < static_cast<int>(w[t].detections.size()); ++i) cand.push_back(i);
        }
        int best = -1;
        double best_d = 0.0;
        for (int i : cand) {
          const double d = distance(prev, w[t].detections[static_cast<std::size_t>(i)].center());
          if (best < 0 || d < best_d) {
            best = i;
            best_d = d;
          }
        }
        expect.push_back(best);
        prev = w[t].detections[static_cast<std::size_t>(best)].center();
      }
      CHECK(got.indices == expect);
    }
  }
}

TEST_CASE("the color filter can hold a track through a crossing") {
  // Two vehicles swap sides between frames; centers alone follow the wrong
  // one, the color gate keeps the anchored vehicle.
  const std::array<std::uint8_t, 3> red{200, 40, 40};
  const std::array<std::uint8_t, 3> blue{40, 40, 200};
  std::vector<semantics::SemanticMessage> w{
      msg_of({det_at(300, 200, red), det_at(340, 200, blue)}),
      msg_of({det_at(345, 200, red), det_at(305, 200, blue)}),
  };
  const TrackResult bare = track_sequence(w, 0, TrackMode::kBBox);
  REQUIRE(bare.ok);
  CHECK(w[1].detections[static_cast<std::size_t>(bare.indices[1])].color == blue);

  const TrackResult gated = track_sequence(w, 0, TrackMode::kMask);
  REQUIRE(gated.ok);
  CHECK(w[1].detections[static_cast<std::size_t>(gated.indices[1])].color == red);
}

TEST_CASE("select_node follows the strongest array") {
  channel::PowerVector p;
  p.beams_per_ula = 4;
  p.global.assign(12, 0.0);
  p.global[2] = 1.0;
  CHECK(select_node(p) == 0);
  p.global[6] = 2.0;
  CHECK(select_node(p) == 1);
  p.global[11] = 3.0;
  CHECK(select_node(p) == 2);
}

TEST_CASE("select_node agrees with the subregion of the strongest direction") {
  // A single planar wave from the vehicle's bearing dominates exactly one
  // array; that array's id must equal the vehicle's subregion.
  const auto world = three_camera_world();
  channel::UlaConfig base;
  base.elements = 8;
  base.beams = 16;
  const auto ulas = channel::make_bs_ulas(world, base);
  std::array<channel::Codebook, channel::kUlaCount> books;
  for (std::size_t i = 0; i < books.size(); ++i) books[i] = channel::make_codebook(ulas[i]);
  const channel::ChannelConfig ch;
  Rng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double ang = rng.uniform(-kPi, kPi);
    const double d = rng.uniform(15.0, 80.0);
    const Vec2 pos{world.bs_position.x + d * std::cos(ang),
                   world.bs_position.y + d * std::sin(ang)};
    const channel::PowerVector p =
        channel::compute_power_vector(ch, ulas, books, world.bs_position, pos);
    double mx = 0.0;
    for (double v : p.global) mx = std::max(mx, v);
    if (mx <= 0.0) continue;  // no array covers the bearing
    CHECK(select_node(p) == scene::subregion_of(world, pos));
    ++checked;
  }
  // The three 90-degree arrays cover 270 of 360 degrees of bearing.
  CHECK(checked > 650);
}

TEST_CASE("truth_index finds the detection behind a vehicle") {
  const auto msg = msg_of({det_at(0, 0, {1, 1, 1}, 7), det_at(1, 1, {1, 1, 1}, 3)});
  CHECK(truth_index(msg, 3) == 1);
  CHECK(truth_index(msg, 7) == 0);
  CHECK(truth_index(msg, 99) == -1);
}

TEST_CASE("ula_for_camera maps node cameras to their covering array") {
  const auto world = three_camera_world();
  CHECK(ula_for_camera(world, 1) == 1);
  CHECK(ula_for_camera(world, 2) == 2);
  CHECK_THROWS_AS((void)ula_for_camera(world, 0), ConfigError);
  CHECK_THROWS_AS((void)ula_for_camera(world, 3), ConfigError);
}

TEST_CASE("scene_bounds covers the roads and the basestation") {
  scene::WorldConfig world;
  world.roads = {{{-50.0, 10.0}, {40.0, 10.0}}, {{0.0, -20.0}, {0.0, 30.0}}};
  world.bs_position = {60.0, 0.0};
  const SceneBounds b = scene_bounds(world);
  CHECK(b.min_x == -50.0);
  CHECK(b.min_y == -20.0);
  CHECK(b.ext_x == 110.0);
  CHECK(b.ext_y == 50.0);
}

TEST_CASE("build_ident_dataset keeps only clean single-transmitter frames") {
  scene::Frame f;
  f.t = 0;
  f.transmitter_id = 0;
  scene::VehicleState tx;
  tx.id = 0;
  tx.is_transmitter = true;
  tx.position = {30.0, 5.0};
  f.vehicles = {tx};
  std::vector<scene::Frame> frames(4, f);
  for (int t = 0; t < 4; ++t) frames[static_cast<std::size_t>(t)].t = t;

  std::vector<semantics::SemanticMessage> msgs(4);
  msgs[0] = msg_of({det_at(640, 360, {1, 1, 1}, 0)});             // qualifies
  msgs[1] = msg_of({det_at(100, 100, {1, 1, 1}, 0), det_at(5, 5)});  // two detections
  msgs[2] = msg_of({det_at(200, 200, {1, 1, 1}, 3)});             // clutter only
  msgs[3] = msg_of({det_at(320, 180, {1, 1, 1}, 0)});             // qualifies

  std::vector<channel::PowerVector> powers(4);
  for (auto& p : powers) {
    p.beams_per_ula = 4;
    p.global.assign(12, 0.0);
  }
  powers[0].global[5] = 2.0;  // ula 1 slice {0,2,0,0}
  powers[3].global[4] = 1.0;
  powers[3].global[7] = 0.5;

  scene::CameraModel cam;  // 1280x720
  const SceneBounds bounds{0.0, 0.0, 100.0, 50.0};

  const IdentDataset power_ds =
      build_ident_dataset(frames, msgs, powers, cam, 1, IdentKind::kPower, bounds);
  REQUIRE(power_ds.size() == 2);
  CHECK(power_ds.x.shape == std::vector<int>{2, 4});
  CHECK(power_ds.x.v == std::vector<double>{0, 1, 0, 0, 1, 0, 0, 0.5});
  CHECK(power_ds.y.v[0] == doctest::Approx(0.5));
  CHECK(power_ds.y.v[1] == doctest::Approx(0.5));
  CHECK(power_ds.y.v[2] == doctest::Approx(320.0 / 1280.0));
  CHECK(power_ds.y.v[3] == doctest::Approx(180.0 / 720.0));

  // A qualifying frame with no power on the array is skipped in power mode
  // but kept in position mode.
  powers[3].global.assign(12, 0.0);
  const IdentDataset pruned =
      build_ident_dataset(frames, msgs, powers, cam, 1, IdentKind::kPower, bounds);
  CHECK(pruned.size() == 1);

  const IdentDataset pos_ds =
      build_ident_dataset(frames, msgs, powers, cam, 0, IdentKind::kPosition, bounds);
  REQUIRE(pos_ds.size() == 2);
  CHECK(pos_ds.x.v == std::vector<double>{0.3, 0.1, 0.3, 0.1});

  // No qualifying frame at all is an error.
  std::vector<semantics::SemanticMessage> bad(4, msg_of({}));
  CHECK_THROWS_WITH_AS(
      (void)build_ident_dataset(frames, bad, powers, cam, 1, IdentKind::kPower, bounds),
      "no single-transmitter frames to learn from", NumericError);

  std::vector<channel::PowerVector> short_powers(3);
  CHECK_THROWS_AS(
      (void)build_ident_dataset(frames, msgs, short_powers, cam, 1, IdentKind::kPower, bounds),
      ConfigError);
}

TEST_CASE("identifier scaling, clipping, and checkpoint round-trip") {
  scene::CameraModel cam;
  const SceneBounds bounds{-10.0, -20.0, 40.0, 80.0};
  IdentifierModel model(IdentKind::kPower, 1, 4, cam, bounds, 77);

  const std::vector<double> raw{0.5, 2.0, 1.0, 0.0};
  CHECK(model.normalize_input(raw) == std::vector<double>{0.25, 1.0, 0.5, 0.0});
  const std::vector<double> zeros(4, 0.0);
  CHECK(model.normalize_input(zeros) == zeros);
  const std::vector<double> wrong(3, 0.0);
  CHECK_THROWS_AS((void)model.normalize_input(wrong), ConfigError);

  IdentifierModel pos_model(IdentKind::kPosition, 0, 2, cam, bounds, 78);
  const std::vector<double> at{0.0, 0.0};
  CHECK(pos_model.normalize_input(at) == std::vector<double>{0.25, 0.25});
  CHECK_THROWS_AS(IdentifierModel(IdentKind::kPosition, 0, 4, cam, bounds, 79), ConfigError);

  // Zeroed weights with a large output bias pin the prediction to the image
  // border: predict_center clips to [0,W]x[0,H].
  auto blocks = model.net().param_blocks();
  for (nn::Tensor* b : blocks) b->fill(0.0);
  blocks.back()->v = {5.0, -3.0};
  const Vec2 clipped = model.predict_center(raw);
  CHECK(clipped.x == 1280.0);
  CHECK(clipped.y == 0.0);

  const nn::Checkpoint c = model.to_checkpoint();
  const IdentifierModel back = IdentifierModel::from_checkpoint(c);
  CHECK(back.kind() == IdentKind::kPower);
  CHECK(back.ula() == 1);
  CHECK(back.input_dim() == 4);
  const Vec2 again = back.predict_center(raw);
  CHECK(again.x == clipped.x);
  CHECK(again.y == clipped.y);

  nn::Checkpoint wrong_kind = c;
  wrong_kind.kind = nn::ModelKind::kLeNet;
  CHECK_THROWS_AS((void)IdentifierModel::from_checkpoint(wrong_kind), ConfigError);
  nn::Checkpoint missing = c;
  missing.meta.erase(missing.meta.begin());  // drops ident_kind
  CHECK_THROWS_AS((void)IdentifierModel::from_checkpoint(missing), ConfigError);
}

TEST_CASE("the identifier learns a linear power-to-center map") {
  // Training rows follow the dataset builder's invariant (each row already
  // divided by its max, so the strongest beam reads 1.0); the last beam is
  // pinned to that max so the center stays a linear function of the rest.
  scene::CameraModel cam;
  const SceneBounds bounds;
  Rng rng(31);
  const int n = 128;
  IdentDataset ds;
  ds.x = nn::Tensor({n, 4});
  ds.y = nn::Tensor({n, 2});
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(0.2, 0.8);
    const double v = rng.uniform(0.2, 0.8);
    ds.x.v[static_cast<std::size_t>(4 * i) + 0] = u;
    ds.x.v[static_cast<std::size_t>(4 * i) + 1] = 1.0 - u;
    ds.x.v[static_cast<std::size_t>(4 * i) + 2] = v;
    ds.x.v[static_cast<std::size_t>(4 * i) + 3] = 1.0;
    ds.y.v[static_cast<std::size_t>(2 * i) + 0] = u;
    ds.y.v[static_cast<std::size_t>(2 * i) + 1] = v;
  }
  IdentifierModel model(IdentKind::kPower, 0, 4, cam, bounds, 5);
  nn::TrainSpec spec;
  spec.batch_size = 16;
  spec.lr = 1e-3;
  spec.epochs = 40;
  spec.shuffle_seed = 9;
  const nn::TrainLog log = train_identifier(model, ds, nullptr, spec);
  CHECK(log.train_loss.back() < 0.1 * log.train_loss.front());

  // predict_center takes raw powers at whatever scale the channel produced;
  // scaling a row must not move the prediction.
  double worst = 0.0;
  for (int i = 0; i < 16; ++i) {
    std::vector<double> raw(ds.x.v.begin() + 4 * i, ds.x.v.begin() + 4 * i + 4);
    for (double& p : raw) p *= 3.0;
    const Vec2 got = model.predict_center(raw);
    const double ex = ds.y.v[static_cast<std::size_t>(2 * i)] * 1280.0;
    const double ey = ds.y.v[static_cast<std::size_t>(2 * i) + 1] * 720.0;
    worst = std::max(worst, std::hypot(got.x - ex, got.y - ey));
  }
  CHECK(worst < 60.0);
}

TEST_CASE("track traces serialize as CSV") {
  const std::vector<TraceRow> rows{{0, 2, 2, 0.0}, {1, 0, 1, 3.5}};
  const std::string path = "/tmp/sembeam_test_trace.csv";
  write_track_trace(path, rows);
  CHECK(read_file(path) == "frame,chosen,truth,distance\n0,2,2,0\n1,0,1,3.5\n");
}

}  // TEST_SUITE
