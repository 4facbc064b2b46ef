#include "sembeam/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <sstream>

#include "sembeam/rng.hpp"

namespace sembeam::semantics {
namespace {

constexpr std::uint32_t kMagic = 0x314D4553;  // "SEM1" on the wire
constexpr std::uint8_t kVersion = 1;

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32(out, bits);
}

struct Reader {
  const std::uint8_t* p;
  std::size_t left;

  std::uint8_t u8() {
    need(1);
    --left;
    return *p++;
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    p += 2;
    left -= 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  void need(std::size_t n) const {
    if (left < n) throw ConfigError("truncated semantic message");
  }
};

float clampf(double v, double lo, double hi) {
  return static_cast<float>(std::clamp(v, lo, hi));
}

std::uint8_t clamp_color(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
}

/// Applies jitter and clips the box to the image; empty result means the
/// detection fell entirely off screen.
std::optional<scene::BBox> jitter_and_clip(const scene::BBox& b, double sigma_px,
                                           int img_w, int img_h, Rng& rng) {
  double x_c = b.x_c, y_c = b.y_c, w = b.w, h = b.h;
  if (sigma_px > 0.0) {
    x_c += rng.normal(0.0, sigma_px);
    y_c += rng.normal(0.0, sigma_px);
    w += rng.normal(0.0, sigma_px);
    h += rng.normal(0.0, sigma_px);
  }
  w = std::max(w, 1.0);
  h = std::max(h, 1.0);
  const double x0 = std::clamp(x_c - w / 2.0, 0.0, static_cast<double>(img_w));
  const double x1 = std::clamp(x_c + w / 2.0, 0.0, static_cast<double>(img_w));
  const double y0 = std::clamp(y_c - h / 2.0, 0.0, static_cast<double>(img_h));
  const double y1 = std::clamp(y_c + h / 2.0, 0.0, static_cast<double>(img_h));
  if (x1 - x0 <= 0.0 || y1 - y0 <= 0.0) return std::nullopt;
  return scene::BBox{(x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0};
}

}  // namespace

int MaskGrid::popcount() const {
  int n = 0;
  for (auto b : bits) n += b;
  return n;
}

MaskGrid rasterize_mask(const scene::BBox& bbox, int img_w, int img_h,
                        int mask_w, int mask_h) {
  if (mask_w <= 0 || mask_h <= 0) throw ConfigError("mask grid dimensions must be positive");
  MaskGrid m(mask_w, mask_h);
  const double rx = bbox.w / 2.0;
  const double ry = bbox.h / 2.0;
  const double cell_w = static_cast<double>(img_w) / mask_w;
  const double cell_h = static_cast<double>(img_h) / mask_h;
  if (rx > 0.0 && ry > 0.0) {
    for (int j = 0; j < mask_h; ++j) {
      const double py = (j + 0.5) * cell_h;
      const double dy = (py - bbox.y_c) / ry;
      if (std::abs(dy) > 1.0) continue;
      for (int i = 0; i < mask_w; ++i) {
        const double px = (i + 0.5) * cell_w;
        const double dx = (px - bbox.x_c) / rx;
        if (dx * dx + dy * dy <= 1.0) m.set(i, j, 1);
      }
    }
  }
  const int ci = std::clamp(static_cast<int>(bbox.x_c / cell_w), 0, mask_w - 1);
  const int cj = std::clamp(static_cast<int>(bbox.y_c / cell_h), 0, mask_h - 1);
  m.set(ci, cj, 1);
  return m;
}

std::vector<RleRun> rle_encode(const MaskGrid& mask) {
  std::vector<RleRun> runs;
  if (mask.bits.empty()) return runs;
  RleRun cur{mask.bits[0], 0};
  for (auto b : mask.bits) {
    if (b == cur.value) {
      ++cur.length;
    } else {
      runs.push_back(cur);
      cur = {b, 1};
    }
  }
  runs.push_back(cur);
  return runs;
}

MaskGrid rle_decode(const std::vector<RleRun>& runs, int width, int height) {
  MaskGrid m(width, height);
  std::size_t pos = 0;
  const std::size_t total = m.bits.size();
  for (const auto& r : runs) {
    if (r.value > 1) throw ConfigError("run value is not binary");
    if (pos + r.length > total) throw ConfigError("run lengths exceed mask size");
    std::fill_n(m.bits.begin() + static_cast<std::ptrdiff_t>(pos), r.length, r.value);
    pos += r.length;
  }
  if (pos != total) throw ConfigError("run lengths do not cover the mask");
  return m;
}

SemanticMessage simulate_detector(const scene::CameraModel& cam, const scene::Frame& frame,
                                  const DetectorParams& params, int node_id,
                                  std::uint64_t seed) {
  Rng base(seed);
  Rng rng = base.fork((static_cast<std::uint64_t>(node_id) << 32) ^
                      static_cast<std::uint64_t>(static_cast<std::uint32_t>(frame.t)));

  SemanticMessage msg;
  msg.node_id = static_cast<std::uint8_t>(node_id);
  msg.timestamp = static_cast<std::uint32_t>(frame.t);

  std::array<double, 3> illum{0.0, 0.0, 0.0};
  if (params.sigma_illum > 0.0) {
    for (auto& v : illum) v = rng.normal(0.0, params.sigma_illum);
  }

  for (const auto& veh : frame.vehicles) {
    const auto box = scene::project_to_camera(cam, veh);
    if (!box) continue;
    if (params.p_miss > 0.0 && rng.uniform() < params.p_miss) continue;
    const auto noisy = jitter_and_clip(*box, params.sigma_px, cam.width, cam.height, rng);
    if (!noisy) continue;

    Detection d;
    d.bbox = {static_cast<float>(noisy->x_c), static_cast<float>(noisy->y_c),
              static_cast<float>(noisy->w), static_cast<float>(noisy->h)};
    d.cls = static_cast<std::uint8_t>(veh.cls);
    d.confidence = clampf(rng.normal(params.conf_mean, params.conf_sd), 0.0, 1.0);
    for (int c = 0; c < 3; ++c) {
      double noise = params.sigma_color > 0.0 ? rng.normal(0.0, params.sigma_color) : 0.0;
      d.color[static_cast<std::size_t>(c)] =
          clamp_color(veh.color[static_cast<std::size_t>(c)] + illum[static_cast<std::size_t>(c)] + noise);
    }
    d.mask = rasterize_mask(*noisy, cam.width, cam.height, params.mask_width, params.mask_height);
    d.truth_id = veh.id;
    msg.detections.push_back(std::move(d));
  }

  const int fps = params.lambda_fp > 0.0 ? rng.poisson(params.lambda_fp) : 0;
  for (int i = 0; i < fps; ++i) {
    scene::BBox fb;
    fb.w = rng.uniform(12.0, 160.0);
    fb.h = rng.uniform(8.0, 120.0);
    fb.x_c = rng.uniform(fb.w / 2.0, cam.width - fb.w / 2.0);
    fb.y_c = rng.uniform(fb.h / 2.0, cam.height - fb.h / 2.0);
    Detection d;
    d.bbox = {static_cast<float>(fb.x_c), static_cast<float>(fb.y_c),
              static_cast<float>(fb.w), static_cast<float>(fb.h)};
    d.cls = static_cast<std::uint8_t>(rng.uniform_index(scene::kVehicleClassCount));
    d.confidence = clampf(rng.uniform(0.3, 0.7), 0.0, 1.0);
    d.color = {static_cast<std::uint8_t>(rng.uniform_index(256)),
               static_cast<std::uint8_t>(rng.uniform_index(256)),
               static_cast<std::uint8_t>(rng.uniform_index(256))};
    d.mask = rasterize_mask(fb, cam.width, cam.height, params.mask_width, params.mask_height);
    d.truth_id = -1;
    msg.detections.push_back(std::move(d));
  }
  return msg;
}

std::size_t message_bytes(const SemanticMessage& msg) {
  std::size_t n = kWireHeaderBytes;
  for (const auto& d : msg.detections) {
    n += 16 + 1 + 4 + 3 + 2 + 1 + 2 * rle_encode(d.mask).size();
  }
  return n;
}

std::vector<std::uint8_t> encode_message(const SemanticMessage& msg) {
  if (msg.detections.size() > 0xffff) throw ConfigError("too many detections for the wire format");
  std::vector<std::uint8_t> out;
  put_u32(out, kMagic);
  put_u8(out, kVersion);
  put_u8(out, msg.node_id);
  put_u32(out, msg.timestamp);
  put_u16(out, static_cast<std::uint16_t>(msg.detections.size()));
  for (const auto& d : msg.detections) {
    const std::size_t cells =
        static_cast<std::size_t>(d.mask.width) * static_cast<std::size_t>(d.mask.height);
    if (cells == 0 || cells > 0xffff) {
      throw ConfigError("mask grid size unsupported by the wire format");
    }
    for (float v : d.bbox) put_f32(out, v);
    put_u8(out, d.cls);
    put_f32(out, d.confidence);
    for (auto c : d.color) put_u8(out, c);
    const auto runs = rle_encode(d.mask);
    if (runs.size() > 0xffff) throw ConfigError("too many mask runs for the wire format");
    put_u16(out, static_cast<std::uint16_t>(runs.size()));
    put_u8(out, runs.empty() ? 0 : runs.front().value);
    for (const auto& r : runs) put_u16(out, static_cast<std::uint16_t>(r.length));
  }
  return out;
}

SemanticMessage decode_message(const std::uint8_t* data, std::size_t size,
                               int mask_w, int mask_h, std::size_t* consumed) {
  Reader rd{data, size};
  if (rd.u32() != kMagic) throw ConfigError("bad semantic message magic");
  const auto version = rd.u8();
  if (version != kVersion) {
    throw ConfigError("unsupported semantic message version " + std::to_string(version));
  }
  SemanticMessage msg;
  msg.node_id = rd.u8();
  msg.timestamp = rd.u32();
  const auto count = rd.u16();
  msg.detections.reserve(count);
  for (int i = 0; i < count; ++i) {
    Detection d;
    for (auto& v : d.bbox) v = rd.f32();
    d.cls = rd.u8();
    d.confidence = rd.f32();
    for (auto& c : d.color) c = rd.u8();
    const auto run_count = rd.u16();
    std::uint8_t value = rd.u8();
    if (value > 1) throw ConfigError("mask run value must be 0 or 1");
    std::vector<RleRun> runs;
    runs.reserve(run_count);
    for (int r = 0; r < run_count; ++r) {
      runs.push_back(RleRun{value, rd.u16()});
      value ^= 1;
    }
    d.mask = rle_decode(runs, mask_w, mask_h);
    msg.detections.push_back(std::move(d));
  }
  if (consumed != nullptr) *consumed = size - rd.left;
  return msg;
}

std::string dump_message(const SemanticMessage& msg) {
  std::ostringstream os;
  os << "message node=" << static_cast<int>(msg.node_id) << " t=" << msg.timestamp
     << " detections=" << msg.detections.size() << " bytes=" << message_bytes(msg) << "\n";
  for (std::size_t i = 0; i < msg.detections.size(); ++i) {
    const auto& d = msg.detections[i];
    os << "  [" << i << "] bbox=(" << d.bbox[0] << ", " << d.bbox[1] << ", " << d.bbox[2]
       << ", " << d.bbox[3] << ") class=" << static_cast<int>(d.cls)
       << " conf=" << d.confidence << " color=(" << static_cast<int>(d.color[0]) << ", "
       << static_cast<int>(d.color[1]) << ", " << static_cast<int>(d.color[2])
       << ") mask=" << d.mask.width << "x" << d.mask.height << " on=" << d.mask.popcount()
       << "\n";
  }
  return os.str();
}

}  // namespace sembeam::semantics
