#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "sembeam/util.hpp"

namespace sembeam::scene {

enum class VehicleClass : std::uint8_t { kCar = 0, kBus = 1, kTruck = 2, kBike = 3 };

constexpr int kVehicleClassCount = 4;

/// Footprint (length, width, height) in meters for each vehicle class.
std::array<double, 3> class_footprint(VehicleClass c);

/// Pinhole camera on a pole: planar position plus mount height, yaw in the
/// world plane, horizontal field of view. Pixel y grows downward, the optical
/// axis is horizontal.
struct CameraModel {
  int width = 1280;
  int height = 720;
  double fov_rad = deg2rad(90.0);
  Vec2 position;
  double mount_height = 6.0;
  double yaw_rad = 0.0;

  double focal() const { return (width / 2.0) / std::tan(fov_rad / 2.0); }
  bool operator==(const CameraModel&) const = default;
};

/// Planar world layout. Camera 0 belongs to the basestation, cameras 1..N to
/// the distributed nodes; node positions are the camera positions.
struct WorldConfig {
  std::vector<std::vector<Vec2>> roads;
  Vec2 bs_position;
  double bs_heading_rad = 0.0;
  /// Sector boundary bearings in radians, ascending, in (-pi, pi]. Bearings
  /// are measured from the basestation heading, positive to its right.
  /// Region 0 = [b0,b1) front, region 1 = [b1,b2) right, region 2 = rest.
  std::array<double, 3> sector_boundaries_rad{deg2rad(-45.0), deg2rad(45.0), kPi};
  std::vector<CameraModel> cameras;
  double dt = 0.1;
  int frame_count = 0;

  Vec2 node_position(int node) const { return cameras.at(static_cast<std::size_t>(node)).position; }
  int node_count() const { return static_cast<int>(cameras.size()) - 1; }
};

struct TrafficParams {
  double mean_clutter = 3.0;
  double tx_speed_min = 8.0;
  double tx_speed_max = 13.0;
  double clutter_speed_min = 6.0;
  double clutter_speed_max = 14.0;
  std::vector<double> lane_offsets{-3.0, 0.0, 3.0};
  /// Relative spawn weight per vehicle class (car, bus, truck, bike).
  std::vector<double> class_weights{0.7, 0.1, 0.1, 0.1};
  std::array<std::uint8_t, 3> tx_color{200, 40, 40};
};

struct VehicleState {
  int id = 0;
  VehicleClass cls = VehicleClass::kCar;
  std::array<double, 3> footprint{4.5, 1.8, 1.5};
  Vec2 position;
  Vec2 velocity;
  std::array<std::uint8_t, 3> color{127, 127, 127};
  bool is_transmitter = false;

  bool operator==(const VehicleState&) const = default;
};

struct Frame {
  int t = 0;
  std::vector<VehicleState> vehicles;
  int transmitter_id = 0;

  bool operator==(const Frame&) const = default;
  const VehicleState& transmitter() const;
};

/// Axis-aligned pixel box, center/size form.
struct BBox {
  double x_c = 0.0;
  double y_c = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const BBox&) const = default;
  double diagonal() const { return std::hypot(w, h); }
};

/// Bearing of a point as seen from the basestation: signed angle from the
/// heading in radians, positive toward the right-hand side, in (-pi, pi].
double bearing_from_bs(const WorldConfig& world, const Vec2& p);

/// Maps a planar position to its subregion id. The boundary bearings split
/// the full circle; a point exactly on a boundary goes to the lower of the
/// two adjacent region ids.
int subregion_of(const WorldConfig& world, const Vec2& p);

/// Projects a vehicle's upright cuboid into the camera and returns the
/// bounding box clipped to the image, or nothing when the cuboid center is
/// behind the camera plane (any corner at or behind the near plane counts)
/// or the clipped box is empty.
std::optional<BBox> project_to_camera(const CameraModel& cam, const VehicleState& v);

/// Simulates frame_count frames of traffic: one transmitter looping along
/// road 0 plus constant-velocity clutter spawned to hold the configured mean
/// count. Purely a function of (world, traffic, seed).
std::vector<Frame> generate_scenario(const WorldConfig& world, const TrafficParams& traffic,
                                     std::uint64_t seed);

}  // namespace sembeam::scene
