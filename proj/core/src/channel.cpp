#include "sembeam/channel.hpp"

#include <algorithm>
#include <cmath>

namespace sembeam::channel {

bool Channel::is_zero() const {
  for (const auto& v : h) {
    if (v != Complex{0.0, 0.0}) return false;
  }
  return true;
}

std::vector<Complex> steering_vector(int elements, double theta_rad, double spacing) {
  if (elements <= 0) throw ConfigError("steering vector needs at least one element");
  if (std::abs(theta_rad) >= kPi / 2.0) {
    throw ConfigError("steering angle must lie in (-pi/2, pi/2)");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(elements));
  const double phase_step = -2.0 * kPi * spacing * std::sin(theta_rad);
  std::vector<Complex> a(static_cast<std::size_t>(elements));
  for (int m = 0; m < elements; ++m) {
    a[static_cast<std::size_t>(m)] = std::polar(scale, phase_step * m);
  }
  return a;
}

Codebook make_codebook(const UlaConfig& ula) {
  if (ula.beams <= 0) throw ConfigError("codebook needs at least one beam");
  if (ula.fov_rad <= 0.0 || ula.fov_rad >= kPi) {
    throw ConfigError("array field of view must lie in (0, pi)");
  }
  Codebook cb;
  cb.elements = ula.elements;
  cb.beams = ula.beams;
  cb.spacing = ula.spacing;
  cb.fov_rad = ula.fov_rad;
  cb.f.reserve(static_cast<std::size_t>(ula.beams) * static_cast<std::size_t>(ula.elements));
  for (int q = 0; q < ula.beams; ++q) {
    const auto a = steering_vector(ula.elements, cb.beam_angle(q), ula.spacing);
    cb.f.insert(cb.f.end(), a.begin(), a.end());
  }
  return cb;
}

std::array<UlaConfig, kUlaCount> make_bs_ulas(const scene::WorldConfig& world,
                                              const UlaConfig& prototype) {
  std::array<UlaConfig, kUlaCount> out{prototype, prototype, prototype};
  out[0].yaw_rad = wrap_angle(world.bs_heading_rad);
  out[1].yaw_rad = wrap_angle(world.bs_heading_rad - kPi / 2.0);  // right
  out[2].yaw_rad = wrap_angle(world.bs_heading_rad + kPi / 2.0);  // left
  return out;
}

Channel channel_from_geometry(const ChannelConfig& cfg, const UlaConfig& ula,
                              const Vec2& array_position, const Vec2& user_position) {
  if (cfg.subcarriers <= 0) throw ConfigError("subcarrier count must be positive");
  Channel ch;
  ch.subcarriers = cfg.subcarriers;
  ch.elements = ula.elements;
  ch.h.assign(static_cast<std::size_t>(cfg.subcarriers) * static_cast<std::size_t>(ula.elements),
              Complex{0.0, 0.0});

  const Vec2 d = user_position - array_position;
  const double dist = d.norm();
  if (dist < 1e-9) throw NumericError("user collocated with the array");
  const double phi = wrap_angle(std::atan2(d.y, d.x) - ula.yaw_rad);
  if (std::abs(phi) > ula.fov_rad / 2.0) return ch;  // outside FOV: zero channel

  const double gain = cfg.ref_gain * std::pow(cfg.ref_distance / dist, cfg.pathloss_exp / 2.0);
  const auto a = steering_vector(ula.elements, phi, ula.spacing);
  const double scale = gain * std::sqrt(static_cast<double>(ula.elements));
  for (int k = 0; k < cfg.subcarriers; ++k) {
    for (int m = 0; m < ula.elements; ++m) {
      ch.h[static_cast<std::size_t>(k) * ula.elements + m] =
          scale * std::conj(a[static_cast<std::size_t>(m)]);
    }
  }
  return ch;
}

std::vector<double> receive_power(const Channel& h, const Codebook& cb) {
  if (h.elements != cb.elements) throw ConfigError("channel and codebook element counts differ");
  std::vector<double> p(static_cast<std::size_t>(cb.beams), 0.0);
  for (int q = 0; q < cb.beams; ++q) {
    const auto f = cb.row(q);
    double acc = 0.0;
    for (int k = 0; k < h.subcarriers; ++k) {
      const auto hk = h.row(k);
      Complex s{0.0, 0.0};
      for (int m = 0; m < h.elements; ++m) s += hk[m] * f[static_cast<std::size_t>(m)];
      acc += std::norm(s);
    }
    p[static_cast<std::size_t>(q)] = acc / h.subcarriers;
  }
  return p;
}

PowerVector compute_power_vector(const ChannelConfig& cfg,
                                 const std::array<UlaConfig, kUlaCount>& ulas,
                                 const std::array<Codebook, kUlaCount>& codebooks,
                                 const Vec2& bs_position, const Vec2& user_position,
                                 Rng* rng) {
  PowerVector pv;
  pv.beams_per_ula = codebooks[0].beams;
  pv.global.reserve(static_cast<std::size_t>(kUlaCount) * codebooks[0].beams);
  for (int u = 0; u < kUlaCount; ++u) {
    if (codebooks[static_cast<std::size_t>(u)].beams != pv.beams_per_ula) {
      throw ConfigError("all arrays must share one codebook size");
    }
    const Channel ch = channel_from_geometry(cfg, ulas[static_cast<std::size_t>(u)],
                                             bs_position, user_position);
    auto p = receive_power(ch, codebooks[static_cast<std::size_t>(u)]);
    pv.global.insert(pv.global.end(), p.begin(), p.end());
  }
  if (cfg.power_noise > 0.0 && rng != nullptr) {
    for (auto& v : pv.global) v = std::max(0.0, v + rng->normal(0.0, cfg.power_noise));
  }
  return pv;
}

BeamChoice optimal_beam(const PowerVector& p) {
  if (p.global.empty()) throw ConfigError("empty power vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.global.size()); ++i) {
    if (p.global[static_cast<std::size_t>(i)] > p.global[static_cast<std::size_t>(best)]) best = i;
  }
  const double power = p.global[static_cast<std::size_t>(best)];
  if (power <= 0.0) throw NumericError("no coverage: all receive powers are zero");
  return BeamChoice{best / p.beams_per_ula, best % p.beams_per_ula, best, power};
}

Complex simulate_received_symbol(std::span<const Complex> h_row, std::span<const Complex> f,
                                 Complex x, double noise_var, Rng& rng) {
  if (h_row.size() != f.size()) throw ConfigError("channel and beam dimension mismatch");
  Complex s{0.0, 0.0};
  for (std::size_t m = 0; m < h_row.size(); ++m) s += h_row[m] * f[m];
  Complex v{0.0, 0.0};
  if (noise_var > 0.0) {
    const double sd = std::sqrt(noise_var / 2.0);
    v = Complex{rng.normal(0.0, sd), rng.normal(0.0, sd)};
  }
  return s * x + v;
}

}  // namespace sembeam::channel
