#include "sembeam/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sembeam/rng.hpp"

namespace sembeam::scene {
namespace {

/// Arc-length parameterization of a polyline.
struct Route {
  std::vector<Vec2> pts;
  std::vector<double> cum;  // cum[i] = length up to vertex i
  double length = 0.0;

  explicit Route(const std::vector<Vec2>& p) : pts(p) {
    if (pts.size() < 2) throw ConfigError("road polyline needs at least 2 points");
    cum.resize(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      cum[i] = cum[i - 1] + distance(pts[i - 1], pts[i]);
    }
    length = cum.back();
    if (length <= 0.0) throw ConfigError("road polyline has zero length");
  }

  /// Point and unit tangent at arc length s (clamped to [0, length]).
  std::pair<Vec2, Vec2> at(double s) const {
    s = std::clamp(s, 0.0, length);
    std::size_t i = 1;
    while (i + 1 < pts.size() && cum[i] < s) ++i;
    const Vec2 a = pts[i - 1];
    const Vec2 b = pts[i];
    const double seg = cum[i] - cum[i - 1];
    const double f = seg > 0.0 ? (s - cum[i - 1]) / seg : 0.0;
    Vec2 d = b - a;
    const double n = d.norm();
    if (n > 0.0) d = d * (1.0 / n);
    return {a + (b - a) * f, d};
  }
};

struct MovingVehicle {
  int id = 0;
  int road = 0;
  double s = 0.0;
  double speed = 0.0;
  double lane = 0.0;
  VehicleClass cls = VehicleClass::kCar;
  std::array<std::uint8_t, 3> color{};
};

VehicleClass draw_class(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) throw ConfigError("class weights must have positive sum");
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size() && i < kVehicleClassCount; ++i) {
    u -= weights[i];
    if (u < 0.0) return static_cast<VehicleClass>(i);
  }
  return VehicleClass::kCar;
}

std::array<std::uint8_t, 3> draw_color(Rng& rng) {
  return {static_cast<std::uint8_t>(rng.uniform_index(256)),
          static_cast<std::uint8_t>(rng.uniform_index(256)),
          static_cast<std::uint8_t>(rng.uniform_index(256))};
}

VehicleState materialize(const MovingVehicle& m, const std::vector<Route>& routes,
                         bool is_tx) {
  const auto [p, dir] = routes[static_cast<std::size_t>(m.road)].at(m.s);
  const Vec2 normal{-dir.y, dir.x};
  VehicleState v;
  v.id = m.id;
  v.cls = m.cls;
  v.footprint = class_footprint(m.cls);
  v.position = p + normal * m.lane;
  v.velocity = dir * m.speed;
  v.color = m.color;
  v.is_transmitter = is_tx;
  return v;
}

}  // namespace

std::array<double, 3> class_footprint(VehicleClass c) {
  switch (c) {
    case VehicleClass::kCar: return {4.5, 1.8, 1.5};
    case VehicleClass::kBus: return {10.0, 2.5, 3.0};
    case VehicleClass::kTruck: return {7.0, 2.4, 2.8};
    case VehicleClass::kBike: return {1.8, 0.6, 1.6};
  }
  return {4.5, 1.8, 1.5};
}

const VehicleState& Frame::transmitter() const {
  for (const auto& v : vehicles) {
    if (v.is_transmitter) return v;
  }
  throw NumericError("frame has no transmitter");
}

double bearing_from_bs(const WorldConfig& world, const Vec2& p) {
  const Vec2 d = p - world.bs_position;
  return wrap_angle(world.bs_heading_rad - std::atan2(d.y, d.x));
}

int subregion_of(const WorldConfig& world, const Vec2& p) {
  const double b = bearing_from_bs(world, p);
  const auto& [b0, b1, b2] = world.sector_boundaries_rad;
  // A boundary bearing belongs to the lower-numbered adjacent region.
  if (b == b0 || b == b1) return 0;
  if (b == b2) return 1;
  if (b > b0 && b < b1) return 0;
  if (b > b1 && b < b2) return 1;
  return 2;
}

std::optional<BBox> project_to_camera(const CameraModel& cam, const VehicleState& v) {
  constexpr double kNear = 0.05;
  Vec2 dir = v.velocity;
  const double vn = dir.norm();
  dir = vn > 1e-12 ? dir * (1.0 / vn) : Vec2{1.0, 0.0};
  const Vec2 nrm{-dir.y, dir.x};

  const Vec2 fwd{std::cos(cam.yaw_rad), std::sin(cam.yaw_rad)};
  const Vec2 right{std::sin(cam.yaw_rad), -std::cos(cam.yaw_rad)};

  if ((v.position - cam.position).dot(fwd) <= kNear) return std::nullopt;

  const double hl = v.footprint[0] / 2.0;
  const double hw = v.footprint[1] / 2.0;
  const double hh = v.footprint[2];
  const double focal = cam.focal();

  double umin = std::numeric_limits<double>::infinity();
  double umax = -umin;
  double vmin = umin;
  double vmax = -umin;
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      const Vec2 corner = v.position + dir * (sx * hl) + nrm * (sy * hw);
      const Vec2 d = corner - cam.position;
      const double depth = d.dot(fwd);
      if (depth <= kNear) return std::nullopt;
      const double u = cam.width / 2.0 + focal * d.dot(right) / depth;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      for (double z : {0.0, hh}) {
        const double vv = cam.height / 2.0 + focal * (cam.mount_height - z) / depth;
        vmin = std::min(vmin, vv);
        vmax = std::max(vmax, vv);
      }
    }
  }

  const double x0 = std::clamp(umin, 0.0, static_cast<double>(cam.width));
  const double x1 = std::clamp(umax, 0.0, static_cast<double>(cam.width));
  const double y0 = std::clamp(vmin, 0.0, static_cast<double>(cam.height));
  const double y1 = std::clamp(vmax, 0.0, static_cast<double>(cam.height));
  if (x1 - x0 <= 0.0 || y1 - y0 <= 0.0) return std::nullopt;
  return BBox{(x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0};
}

std::vector<Frame> generate_scenario(const WorldConfig& world, const TrafficParams& traffic,
                                     std::uint64_t seed) {
  if (world.roads.empty()) throw ConfigError("world has no roads");
  if (world.frame_count <= 0) throw ConfigError("frame_count must be positive");
  if (traffic.lane_offsets.empty()) throw ConfigError("traffic needs at least one lane");
  if (traffic.clutter_speed_min <= 0.0 || traffic.clutter_speed_max < traffic.clutter_speed_min ||
      traffic.tx_speed_min <= 0.0 || traffic.tx_speed_max < traffic.tx_speed_min) {
    throw ConfigError("traffic speed ranges must be positive and ordered");
  }

  std::vector<Route> routes;
  routes.reserve(world.roads.size());
  double total_len = 0.0;
  for (const auto& r : world.roads) {
    routes.emplace_back(r);
    total_len += routes.back().length;
  }

  Rng rng(seed);
  auto draw_lane = [&] {
    return traffic.lane_offsets[rng.uniform_index(traffic.lane_offsets.size())];
  };
  auto draw_road = [&] {
    double u = rng.uniform() * total_len;
    for (std::size_t i = 0; i < routes.size(); ++i) {
      u -= routes[i].length;
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(routes.size()) - 1;
  };

  // Spawn rate holding the steady-state clutter count at mean_clutter: with
  // length-weighted road choice a vehicle lives L_road / (v dt) frames, so
  // rate = mean / E[lifetime].
  const double a = traffic.clutter_speed_min;
  const double b = traffic.clutter_speed_max;
  const double inv_speed_mean = b > a ? std::log(b / a) / (b - a) : 1.0 / a;
  double len_sq = 0.0;
  for (const auto& r : routes) len_sq += r.length * r.length;
  const double mean_len = len_sq / total_len;
  const double spawn_rate = traffic.mean_clutter * world.dt / (mean_len * inv_speed_mean);

  MovingVehicle tx;
  tx.id = 0;
  tx.road = 0;
  tx.s = 0.0;
  tx.speed = rng.uniform(traffic.tx_speed_min, traffic.tx_speed_max);
  tx.lane = draw_lane();
  tx.cls = VehicleClass::kCar;
  tx.color = traffic.tx_color;

  int next_id = 1;
  std::vector<MovingVehicle> clutter;
  auto spawn_clutter = [&](double s) {
    MovingVehicle m;
    m.id = next_id++;
    m.road = draw_road();
    m.s = s < 0.0 ? rng.uniform() * routes[static_cast<std::size_t>(m.road)].length : s;
    m.speed = rng.uniform(traffic.clutter_speed_min, traffic.clutter_speed_max);
    m.lane = draw_lane();
    m.cls = draw_class(rng, traffic.class_weights);
    m.color = draw_color(rng);
    clutter.push_back(m);
  };

  // Start at steady state so the mean count holds from frame 0.
  const int k0 = rng.poisson(traffic.mean_clutter);
  for (int i = 0; i < k0; ++i) spawn_clutter(-1.0);

  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(world.frame_count));
  for (int t = 0; t < world.frame_count; ++t) {
    if (t > 0) {
      tx.s += tx.speed * world.dt;
      const double road_len = routes[0].length;
      while (tx.s >= road_len) {
        tx.s -= road_len;
        tx.speed = rng.uniform(traffic.tx_speed_min, traffic.tx_speed_max);
        tx.lane = draw_lane();
      }
      for (auto& m : clutter) m.s += m.speed * world.dt;
      std::erase_if(clutter, [&](const MovingVehicle& m) {
        return m.s >= routes[static_cast<std::size_t>(m.road)].length;
      });
      const int births = rng.poisson(spawn_rate);
      for (int i = 0; i < births; ++i) spawn_clutter(0.0);
    }

    Frame f;
    f.t = t;
    f.transmitter_id = tx.id;
    f.vehicles.push_back(materialize(tx, routes, true));
    for (const auto& m : clutter) f.vehicles.push_back(materialize(m, routes, false));
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace sembeam::scene
