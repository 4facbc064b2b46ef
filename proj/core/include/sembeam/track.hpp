#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sembeam/channel.hpp"
#include "sembeam/networks.hpp"
#include "sembeam/scene.hpp"
#include "sembeam/semantics.hpp"

namespace sembeam::track {

/// What the identifier network reads: the per-beam receive powers of the
/// node's array, or the transmitter's planar position (the baseline that
/// assumes position knowledge).
enum class IdentKind : std::uint8_t { kPower = 0, kPosition = 1 };

enum class TrackMode : std::uint8_t { kBBox = 0, kMask = 1 };

/// Axis-aligned bounds of the drivable area, used to scale position inputs.
struct SceneBounds {
  double min_x = 0.0, min_y = 0.0;
  double ext_x = 1.0, ext_y = 1.0;
};

SceneBounds scene_bounds(const scene::WorldConfig& world);

/// Normalized training pairs: inputs x [N,in], center targets y [N,2] in
/// [0,1] image coordinates.
struct IdentDataset {
  nn::Tensor x;
  nn::Tensor y;

  std::size_t size() const { return x.shape.empty() ? 0 : static_cast<std::size_t>(x.dim(0)); }
};

/// Center regressor: two hidden layers of 512, output is the predicted
/// transmitter bbox center. Inputs are max-scaled powers or bounds-scaled
/// positions; outputs train against [0,1] coordinates and read back in
/// pixels.
class IdentifierModel {
 public:
  IdentifierModel(IdentKind kind, int ula, int input_dim, const scene::CameraModel& cam,
                  const SceneBounds& bounds, std::uint64_t init_seed);

  IdentKind kind() const { return kind_; }
  int ula() const { return ula_; }
  int input_dim() const { return net_.spec().in; }
  nn::Fcnn& net() { return net_; }
  const nn::Fcnn& net() const { return net_; }

  /// Scales one raw input (powers by their max, positions to the bounds)
  /// into the network's domain.
  std::vector<double> normalize_input(std::span<const double> raw) const;

  /// Forward pass on one raw input; result clipped to [0,W]x[0,H].
  Vec2 predict_center(std::span<const double> raw) const;

  nn::Checkpoint to_checkpoint() const;
  static IdentifierModel from_checkpoint(const nn::Checkpoint& c);

 private:
  IdentKind kind_;
  int ula_;
  double img_w_, img_h_;
  SceneBounds bounds_;
  nn::Fcnn net_;
};

/// Keeps the frames whose message holds exactly one detection and that
/// detection is the transmitter; pairs the frame's input (power slice of the
/// given array, or true transmitter position) with the detection center.
/// Throws when no frame qualifies.
IdentDataset build_ident_dataset(const std::vector<scene::Frame>& frames,
                                 const std::vector<semantics::SemanticMessage>& messages,
                                 const std::vector<channel::PowerVector>& powers,
                                 const scene::CameraModel& cam, int ula, IdentKind kind,
                                 const SceneBounds& bounds);

nn::TrainLog train_identifier(IdentifierModel& model, const IdentDataset& train,
                              const IdentDataset* val, const nn::TrainSpec& spec);

/// Index of the detection whose center is closest to b (Euclidean); ties go
/// to the lowest index. Throws NumericError("no candidates") on an empty
/// message.
int match_detection(const Vec2& b, const semantics::SemanticMessage& msg);

/// Indices of detections whose color lies within eps (Euclidean over the
/// 3-vector) of the transmitter color. Never returns an empty set: when
/// every detection fails the test, all indices come back unfiltered.
std::vector<int> color_filter(const std::array<std::uint8_t, 3>& tx_color,
                              const semantics::SemanticMessage& msg, double eps = 20.0);

struct TrackResult {
  bool ok = false;
  std::string reason;
  std::vector<int> indices;  // one detection index per frame when ok
};

/// Follows the transmitter from a known first-frame detection across the
/// window by nearest-neighbor center association. Mask mode restricts the
/// candidates of each frame with color_filter keyed on the first detection's
/// color. A frame without detections fails the track (ok = false).
TrackResult track_sequence(std::span<const semantics::SemanticMessage> msgs, int first_index,
                           TrackMode mode, double color_eps = 20.0);

/// Sensing source serving the strongest beam: front array reads the
/// basestation camera (0), right array node 1, left array node 2. Camera
/// order in WorldConfig follows the same convention.
int select_node(const channel::PowerVector& p);

/// First detection produced by the given simulated vehicle, -1 when absent.
int truth_index(const semantics::SemanticMessage& msg, int vehicle_id);

/// Array whose field of view covers the camera's position (== the camera's
/// subregion id; regions and arrays share the front/right/left order).
int ula_for_camera(const scene::WorldConfig& world, int camera_index);

struct TraceRow {
  int frame = 0;
  int chosen = -1;
  int truth = -1;
  double distance = 0.0;
};

/// Debug export: frame, chosen index, truth index, association distance.
void write_track_trace(const std::string& path, std::span<const TraceRow> rows);

}  // namespace sembeam::track
