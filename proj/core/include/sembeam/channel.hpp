#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "sembeam/rng.hpp"
#include "sembeam/scene.hpp"
#include "sembeam/util.hpp"

namespace sembeam::channel {

using Complex = std::complex<double>;

/// Uniform linear array mounted at the basestation. yaw_rad is the world
/// angle of the broadside direction; beams sweep fov_rad around it.
struct UlaConfig {
  int elements = 16;      // M
  int beams = 64;         // Q, per array
  double spacing = 0.5;   // element spacing in wavelengths
  double fov_rad = deg2rad(90.0);
  double yaw_rad = 0.0;
};

/// Narrowband LOS channel parameters. The cyclic prefix length is carried for
/// configuration compatibility and does not enter the frequency-flat model.
struct ChannelConfig {
  int subcarriers = 1;        // K
  int cyclic_prefix = 0;      // D, unused by the LOS model
  double tx_power = 1.0;      // P
  double noise_var = 0.0;     // sigma^2 of the receive symbol noise
  double pathloss_exp = 2.0;
  double ref_distance = 1.0;  // distance where the gain equals ref_gain
  double ref_gain = 1.0;
  double power_noise = 0.0;   // optional additive noise on measured powers
};

/// Beam-steering codebook: beams x elements matrix of unit-norm vectors.
struct Codebook {
  int elements = 0;
  int beams = 0;
  double spacing = 0.5;
  double fov_rad = 0.0;
  std::vector<Complex> f;  // row-major, beams rows

  std::span<const Complex> row(int q) const {
    return {f.data() + static_cast<std::size_t>(q) * static_cast<std::size_t>(elements),
            static_cast<std::size_t>(elements)};
  }
  /// Steering angle of beam q: -fov/2 + (q + 0.5) * fov / beams.
  double beam_angle(int q) const {
    return -fov_rad / 2.0 + (q + 0.5) * fov_rad / beams;
  }
};

/// K x M channel matrix; LOS rows are identical across subcarriers.
struct Channel {
  int subcarriers = 0;
  int elements = 0;
  std::vector<Complex> h;  // row-major, subcarriers rows

  std::span<const Complex> row(int k) const {
    return {h.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(elements),
            static_cast<std::size_t>(elements)};
  }
  bool is_zero() const;
};

constexpr int kUlaCount = 3;  // front, right, left, in that order everywhere

/// Per-beam receive powers of all arrays, front/right/left slices
/// concatenated into one global vector.
struct PowerVector {
  int beams_per_ula = 0;
  std::vector<double> global;  // size 3 * beams_per_ula

  std::span<const double> slice(int ula) const {
    return {global.data() + static_cast<std::size_t>(ula) * static_cast<std::size_t>(beams_per_ula),
            static_cast<std::size_t>(beams_per_ula)};
  }
};

struct BeamChoice {
  int ula = 0;          // 0 front, 1 right, 2 left
  int index = 0;        // per-ULA beam index in [0, Q)
  int global_index = 0; // index into PowerVector::global
  double power = 0.0;
};

/// Unit-norm steering vector: entry m = (1/sqrt(M)) exp(-j 2 pi spacing m sin theta).
std::vector<Complex> steering_vector(int elements, double theta_rad, double spacing);

Codebook make_codebook(const UlaConfig& ula);

/// Front/right/left arrays derived from the basestation heading; the right
/// array broadside sits at bearing +90 degrees, the left at -90.
std::array<UlaConfig, kUlaCount> make_bs_ulas(const scene::WorldConfig& world,
                                              const UlaConfig& prototype);

/// LOS channel toward a planar user position: h_k = g(d) sqrt(M) conj(a(phi))
/// for every subcarrier, and all-zero when the user is outside the array
/// field of view (boundary inclusive). g(d) = ref_gain (ref_distance/d)^(exp/2).
Channel channel_from_geometry(const ChannelConfig& cfg, const UlaConfig& ula,
                              const Vec2& array_position, const Vec2& user_position);

/// p_q = (1/K) sum_k |h_k^T f_q|^2.
std::vector<double> receive_power(const Channel& h, const Codebook& cb);

/// Powers of all three arrays for one user. When cfg.power_noise > 0 and an
/// rng is supplied, adds clamped Gaussian measurement noise per entry.
PowerVector compute_power_vector(const ChannelConfig& cfg,
                                 const std::array<UlaConfig, kUlaCount>& ulas,
                                 const std::array<Codebook, kUlaCount>& codebooks,
                                 const Vec2& bs_position, const Vec2& user_position,
                                 Rng* rng = nullptr);

/// Global argmax over the concatenated powers; ties go to the lowest global
/// index. Throws NumericError when every entry is zero (no coverage).
BeamChoice optimal_beam(const PowerVector& p);

/// y = h_k^T f x + v with v ~ CN(0, noise_var).
Complex simulate_received_symbol(std::span<const Complex> h_row, std::span<const Complex> f,
                                 Complex x, double noise_var, Rng& rng);

}  // namespace sembeam::channel
