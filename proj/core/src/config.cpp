#include "sembeam/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace sembeam::config {

namespace {

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(context + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

KeyValues KeyValues::parse_text(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + " line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + " line " + std::to_string(lineno) + ": empty key");
    }
    if (kv.find(key) != nullptr) {
      throw ConfigError(origin + " line " + std::to_string(lineno) + ": duplicate key '" + key +
                        "'");
    }
    kv.entries_.emplace_back(key, Entry{value, lineno, false});
  }
  return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
  return parse_text(read_file(path), path);
}

KeyValues::Entry* KeyValues::find(const std::string& key) {
  for (auto& [k, e] : entries_) {
    if (k == key) return &e;
  }
  return nullptr;
}

const KeyValues::Entry* KeyValues::find(const std::string& key) const {
  for (const auto& [k, e] : entries_) {
    if (k == key) return &e;
  }
  return nullptr;
}

void KeyValues::fail(const std::string& key, const std::string& what) const {
  throw ConfigError(origin_ + ": key '" + key + "': " + what);
}

bool KeyValues::has(const std::string& key) const { return find(key) != nullptr; }

void KeyValues::set(const std::string& key, const std::string& value) {
  if (Entry* e = find(key)) {
    e->value = value;
    e->used = false;
  } else {
    entries_.emplace_back(key, Entry{value, 0, false});
  }
}

std::string KeyValues::get_string(const std::string& key) {
  Entry* e = find(key);
  if (e == nullptr) fail(key, "missing");
  e->used = true;
  return e->value;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) {
  return has(key) ? get_string(key) : fallback;
}

double KeyValues::get_double(const std::string& key) {
  return to_double(get_string(key), origin_ + ": key '" + key + "'");
}

double KeyValues::get_double(const std::string& key, double fallback) {
  return has(key) ? get_double(key) : fallback;
}

long KeyValues::get_int(const std::string& key) {
  const std::string s = get_string(key);
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(key, "bad integer '" + s + "'");
  }
  return v;
}

long KeyValues::get_int(const std::string& key, long fallback) {
  return has(key) ? get_int(key) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const std::string s = get_string(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(key, "bad boolean '" + s + "'");
}

std::vector<double> KeyValues::get_list(const std::string& key) {
  const std::string s = get_string(key);
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(',', start);
    const std::string part = trim(s.substr(start, p == std::string::npos ? p : p - start));
    out.push_back(to_double(part, origin_ + ": key '" + key + "'"));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

std::vector<double> KeyValues::get_list(const std::string& key,
                                        const std::vector<double>& fallback) {
  return has(key) ? get_list(key) : fallback;
}

std::vector<std::string> KeyValues::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  }
  return out;
}

void KeyValues::finish() const {
  for (const auto& [k, e] : entries_) {
    if (!e.used) {
      throw ConfigError(origin_ + " line " + std::to_string(e.line) + ": unknown key '" + k +
                        "'");
    }
  }
}

namespace {

std::vector<Vec2> parse_polyline(const std::string& value, const std::string& context) {
  std::vector<Vec2> points;
  std::istringstream in(value);
  std::string tok;
  while (in >> tok) {
    const std::size_t comma = tok.find(',');
    if (comma == std::string::npos) {
      throw ConfigError(context + ": expected x,y pairs separated by spaces");
    }
    points.push_back({to_double(tok.substr(0, comma), context),
                      to_double(tok.substr(comma + 1), context)});
  }
  if (points.size() < 2) throw ConfigError(context + ": a road needs at least two points");
  return points;
}

nn::TrainSpec spec_from(KeyValues& kv, const std::string& name, const nn::TrainSpec& defaults,
                        std::uint64_t seed) {
  nn::TrainSpec s = defaults;
  const std::string p = "train." + name + ".";
  s.batch_size = static_cast<int>(kv.get_int(p + "batch", s.batch_size));
  s.lr = kv.get_double(p + "lr", s.lr);
  s.epochs = static_cast<int>(kv.get_int(p + "epochs", s.epochs));
  std::vector<double> decay_defaults(s.decay_epochs.begin(), s.decay_epochs.end());
  s.decay_epochs.clear();
  for (double d : kv.get_list(p + "decay", decay_defaults)) {
    s.decay_epochs.push_back(static_cast<int>(d));
  }
  s.decay_factor = kv.get_double(p + "factor", s.decay_factor);
  s.shuffle_seed = seed ^ fnv1a64(name);
  return s;
}

std::array<std::uint8_t, 3> to_color(const std::vector<double>& v, const std::string& context) {
  if (v.size() != 3) throw ConfigError(context + ": a color needs three channels");
  std::array<std::uint8_t, 3> c{};
  for (int i = 0; i < 3; ++i) {
    if (v[static_cast<std::size_t>(i)] < 0 || v[static_cast<std::size_t>(i)] > 255) {
      throw ConfigError(context + ": color channel out of byte range");
    }
    c[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v[static_cast<std::size_t>(i)]);
  }
  return c;
}

}  // namespace

std::uint64_t ExperimentConfig::seed_for(const std::string& purpose) const {
  return seed ^ fnv1a64(purpose);
}

ExperimentConfig experiment_from_keyvalues(KeyValues& kv) {
  ExperimentConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  cfg.output_dir = kv.get_string("output", "out");

  // World
  cfg.world.frame_count = static_cast<int>(kv.get_int("frames"));
  cfg.world.dt = kv.get_double("dt", 0.1);
  cfg.world.bs_position = {kv.get_double("bs.x", 0.0), kv.get_double("bs.y", 0.0)};
  cfg.world.bs_heading_rad = deg2rad(kv.get_double("bs.heading_deg", 0.0));
  cfg.world.sector_boundaries_rad = {deg2rad(kv.get_double("sector.b0_deg", -45.0)),
                                     deg2rad(kv.get_double("sector.b1_deg", 45.0)),
                                     deg2rad(kv.get_double("sector.b2_deg", 180.0))};
  for (int i = 0;; ++i) {
    const std::string key = "road" + std::to_string(i);
    if (!kv.has(key)) break;
    cfg.world.roads.push_back(parse_polyline(kv.get_string(key), "key '" + key + "'"));
  }
  if (cfg.world.roads.empty()) throw ConfigError("config defines no roads");
  for (int i = 0;; ++i) {
    const std::string p = "camera" + std::to_string(i) + ".";
    if (!kv.has(p + "x")) break;
    scene::CameraModel cam;
    cam.position = {kv.get_double(p + "x"), kv.get_double(p + "y")};
    cam.yaw_rad = deg2rad(kv.get_double(p + "yaw_deg"));
    cam.fov_rad = deg2rad(kv.get_double(p + "fov_deg", 90.0));
    cam.width = static_cast<int>(kv.get_int(p + "width", 1280));
    cam.height = static_cast<int>(kv.get_int(p + "height", 720));
    cam.mount_height = kv.get_double(p + "mount", 6.0);
    cfg.world.cameras.push_back(cam);
  }
  if (cfg.world.cameras.size() < 2) {
    throw ConfigError("config needs the basestation camera plus at least one node");
  }

  // Traffic
  cfg.traffic.mean_clutter = kv.get_double("traffic.mean_clutter", 3.0);
  cfg.traffic.tx_speed_min = kv.get_double("traffic.tx_speed_min", 8.0);
  cfg.traffic.tx_speed_max = kv.get_double("traffic.tx_speed_max", 13.0);
  cfg.traffic.clutter_speed_min = kv.get_double("traffic.clutter_speed_min", 6.0);
  cfg.traffic.clutter_speed_max = kv.get_double("traffic.clutter_speed_max", 14.0);
  cfg.traffic.lane_offsets = kv.get_list("traffic.lanes", cfg.traffic.lane_offsets);
  cfg.traffic.class_weights = kv.get_list("traffic.class_weights", cfg.traffic.class_weights);
  cfg.traffic.tx_color = to_color(
      kv.get_list("traffic.tx_color", {static_cast<double>(cfg.traffic.tx_color[0]),
                                       static_cast<double>(cfg.traffic.tx_color[1]),
                                       static_cast<double>(cfg.traffic.tx_color[2])}),
      "key 'traffic.tx_color'");

  // Detector
  cfg.detector.p_miss = kv.get_double("detector.p_miss", 0.0);
  cfg.detector.sigma_px = kv.get_double("detector.sigma_px", 0.0);
  cfg.detector.lambda_fp = kv.get_double("detector.lambda_fp", 0.0);
  cfg.detector.sigma_color = kv.get_double("detector.sigma_color", 0.0);
  cfg.detector.sigma_illum = kv.get_double("detector.sigma_illum", 0.0);
  cfg.detector.mask_width = static_cast<int>(kv.get_int("detector.mask_w", 64));
  cfg.detector.mask_height = static_cast<int>(kv.get_int("detector.mask_h", 64));
  cfg.detector.conf_mean = kv.get_double("detector.conf_mean", 0.85);
  cfg.detector.conf_sd = kv.get_double("detector.conf_sd", 0.05);

  // Channel and arrays
  cfg.channel_cfg.subcarriers = static_cast<int>(kv.get_int("channel.subcarriers", 1));
  cfg.channel_cfg.cyclic_prefix = static_cast<int>(kv.get_int("channel.cyclic_prefix", 0));
  cfg.channel_cfg.tx_power = kv.get_double("channel.tx_power", 1.0);
  cfg.channel_cfg.noise_var = kv.get_double("channel.noise_var", 0.0);
  cfg.channel_cfg.pathloss_exp = kv.get_double("channel.pathloss_exp", 2.0);
  cfg.channel_cfg.ref_distance = kv.get_double("channel.ref_distance", 1.0);
  cfg.channel_cfg.ref_gain = kv.get_double("channel.ref_gain", 1.0);
  cfg.channel_cfg.power_noise = kv.get_double("channel.power_noise", 0.0);
  cfg.ula.elements = static_cast<int>(kv.get_int("ula.elements", 16));
  cfg.ula.beams = static_cast<int>(kv.get_int("ula.beams", 64));
  cfg.ula.spacing = kv.get_double("ula.spacing", 0.5);
  cfg.ula.fov_rad = deg2rad(kv.get_double("ula.fov_deg", 90.0));

  // Windowing, splits, evaluation
  cfg.assoc_threshold_px = kv.get_double("eval.assoc_threshold_px", 0.0);
  cfg.r = static_cast<int>(kv.get_int("window.r", 5));
  cfg.split.train_pct = static_cast<int>(kv.get_int("split.train", 70));
  cfg.split.val_pct = static_cast<int>(kv.get_int("split.val", 20));
  cfg.split.test_pct = static_cast<int>(kv.get_int("split.test", 10));
  cfg.split.seed = static_cast<std::uint64_t>(kv.get_int("split.seed", 1));
  cfg.split.block = kv.get_bool("split.block", false);

  // Per-model training schedules and their default hyperparameters.
  nn::TrainSpec ident_defaults;
  ident_defaults.batch_size = 50;
  ident_defaults.lr = 1e-2;
  ident_defaults.decay_epochs = {30, 70};
  ident_defaults.decay_factor = 0.1;
  ident_defaults.epochs = 100;
  cfg.identifier_spec = spec_from(kv, "identifier", ident_defaults, cfg.seed);
  cfg.baseline_spec = spec_from(kv, "baseline", ident_defaults, cfg.seed);
  for (beam::BeamModelKind kind :
       {beam::BeamModelKind::kBBoxFcnn, beam::BeamModelKind::kMaskLeNet,
        beam::BeamModelKind::kBBoxLstm, beam::BeamModelKind::kMaskLstm}) {
    cfg.beam_specs[kind] =
        spec_from(kv, beam::kind_name(kind), beam::default_train_spec(kind), cfg.seed);
  }

  kv.finish();

  if (cfg.r < 1) throw ConfigError("window.r must be positive");
  if (cfg.world.frame_count < cfg.r) throw ConfigError("too few frames for one window");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  KeyValues kv = KeyValues::parse_file(path);
  return experiment_from_keyvalues(kv);
}

}  // namespace sembeam::config
