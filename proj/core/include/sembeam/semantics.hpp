#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sembeam/scene.hpp"

namespace sembeam::semantics {

/// Binary occupancy grid covering the full image, row-major, one byte per
/// cell holding 0 or 1.
struct MaskGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  MaskGrid() = default;
  MaskGrid(int w, int h)
      : width(w), height(h),
        bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  std::uint8_t at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }
  void set(int x, int y, std::uint8_t v) {
    bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
         static_cast<std::size_t>(x)] = v;
  }
  int popcount() const;
  bool operator==(const MaskGrid&) const = default;
};

struct RleRun {
  std::uint8_t value = 0;
  std::uint32_t length = 0;
  bool operator==(const RleRun&) const = default;
};

/// One detected object. truth_id identifies the simulated vehicle behind the
/// detection (-1 for false positives); it never goes on the wire.
struct Detection {
  std::array<float, 4> bbox{};  // x_c, y_c, w, h in pixels
  std::uint8_t cls = 0;
  float confidence = 0.0f;
  std::array<std::uint8_t, 3> color{};
  MaskGrid mask;
  int truth_id = -1;

  bool operator==(const Detection&) const = default;
  Vec2 center() const { return {bbox[0], bbox[1]}; }
};

struct SemanticMessage {
  std::uint8_t node_id = 0;
  std::uint32_t timestamp = 0;
  std::vector<Detection> detections;

  bool operator==(const SemanticMessage&) const = default;
};

struct DetectorParams {
  double p_miss = 0.0;       // probability a visible vehicle is dropped
  double sigma_px = 0.0;     // bbox jitter per coordinate, pixels
  double lambda_fp = 0.0;    // mean false positives per frame
  double sigma_color = 0.0;  // per-detection color noise
  double sigma_illum = 0.0;  // per-frame illumination offset shared by all detections
  int mask_width = 64;
  int mask_height = 64;
  double conf_mean = 0.85;
  double conf_sd = 0.05;
};

/// Grid cells whose centers fall inside the ellipse inscribed in the bbox.
/// The cell under the bbox center is always set, so any on-screen bbox
/// produces a nonempty mask.
MaskGrid rasterize_mask(const scene::BBox& bbox, int img_w, int img_h,
                        int mask_w, int mask_h);

/// Row-major run-length encoding; the first run carries the value of cell 0.
std::vector<RleRun> rle_encode(const MaskGrid& mask);
MaskGrid rle_decode(const std::vector<RleRun>& runs, int width, int height);

/// Simulated object detector for one camera and frame. Output is a pure
/// function of (frame, node_id, seed): misses, bbox jitter, confidence,
/// color noise plus a shared illumination offset, and Poisson false
/// positives, in that draw order. Masks are rasterized from the jittered,
/// clipped boxes.
SemanticMessage simulate_detector(const scene::CameraModel& cam, const scene::Frame& frame,
                                  const DetectorParams& params, int node_id,
                                  std::uint64_t seed);

/// Serialized size in bytes of the exact wire encoding.
std::size_t message_bytes(const SemanticMessage& msg);

constexpr std::size_t kWireHeaderBytes = 12;

/// Little-endian wire codec. Layout: magic u32, version u8, node id u8,
/// timestamp u32, count u16; per detection bbox 4xf32, class u8,
/// confidence f32, color 3xu8, run count u16, leading value u8, run
/// lengths u16 each. Mask dimensions are fixed by configuration and are
/// supplied to the decoder.
std::vector<std::uint8_t> encode_message(const SemanticMessage& msg);
SemanticMessage decode_message(const std::uint8_t* data, std::size_t size,
                               int mask_w, int mask_h, std::size_t* consumed = nullptr);

/// Bytes of an uncompressed image of the same scene.
constexpr std::size_t raw_image_bytes(int width, int height, int channels = 3) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
         static_cast<std::size_t>(channels);
}

/// Human-readable dump for debugging.
std::string dump_message(const SemanticMessage& msg);

}  // namespace sembeam::semantics
