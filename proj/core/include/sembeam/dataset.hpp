#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sembeam/channel.hpp"
#include "sembeam/scene.hpp"
#include "sembeam/semantics.hpp"

namespace sembeam::dataset {

/// Tracked transmitter features for one frame of a window. The bbox comes
/// from the center-association track, mask and color from the color-filtered
/// track; tx_position is simulation truth kept for analysis only.
struct FrameFeature {
  std::array<float, 4> bbox{};  // x_c, y_c, w, h in pixels
  semantics::MaskGrid mask;
  std::array<std::uint8_t, 3> color{};
  Vec2 tx_position;

  bool operator==(const FrameFeature&) const = default;
};

/// One sliding-window training sample for a node: r tracked frames, the
/// window's first-frame receive powers (full vector; the node's slice is a
/// view into it), and the optimal per-array beam at the last frame as label.
struct SequenceSample {
  int node = 0;  // camera index of the serving node
  int ula = 0;
  int t0 = 0;  // scenario frame index of the first window frame
  std::vector<FrameFeature> frames;
  int beams_per_ula = 0;
  std::vector<double> power_global;
  int label = 0;

  double distance_m = 0.0;    // node to transmitter at the last frame
  double mean_objects = 0.0;  // mean detection count over the window

  bool operator==(const SequenceSample&) const = default;
  int steps() const { return static_cast<int>(frames.size()); }
  std::span<const double> power_slice() const {
    return {power_global.data() + static_cast<std::size_t>(ula) *
                                      static_cast<std::size_t>(beams_per_ula),
            static_cast<std::size_t>(beams_per_ula)};
  }
};

/// Sliding-window start indices over n frames: 0 .. n-r, stride 1.
int window_count(int n, int r);
std::vector<int> window_starts(int n, int r);

/// True when the transmitter appears among the node's detections in every
/// frame of the window starting at t0.
bool tx_visible_throughout(const std::vector<scene::Frame>& frames,
                           const std::vector<semantics::SemanticMessage>& messages, int t0,
                           int r);

struct BuildStats {
  int windows = 0;        // raw window count n-r+1
  int in_view = 0;        // windows surviving the field-of-view filter
  int labeled = 0;        // windows whose last frame has coverage on the node's array
  int tracked = 0;        // windows where both trackers completed
  int samples = 0;        // final sample count
};

/// Builds every usable window for one node: field-of-view filter, label from
/// the last frame's strongest beam (windows served by a different array are
/// dropped), ground-truth first-frame identification, then both trackers.
std::vector<SequenceSample> build_sequences(
    const scene::WorldConfig& world, int camera_index, int r,
    const std::vector<scene::Frame>& frames,
    const std::vector<semantics::SemanticMessage>& messages,
    const std::vector<channel::PowerVector>& powers, BuildStats* stats = nullptr);

struct SplitSpec {
  int train_pct = 70;
  int val_pct = 20;
  int test_pct = 10;
  std::uint64_t seed = 1;
  /// Contiguous time blocks instead of a shuffle; avoids overlapping windows
  /// straddling the split boundary.
  bool block = false;
};

struct SplitResult {
  std::vector<SequenceSample> train, val, test;
};

/// Validation and test sizes are floors of their percentages; the remainder
/// goes to training. Partitions are disjoint and exhaustive.
SplitResult split(const std::vector<SequenceSample>& samples, const SplitSpec& spec);

/// Line-delimited records, one key=value document per line, versioned header
/// line, floats at 17 significant digits. Lossless round-trip.
void save_records(const std::string& path, const std::vector<SequenceSample>& samples);
std::vector<SequenceSample> load_records(const std::string& path);

}  // namespace sembeam::dataset
