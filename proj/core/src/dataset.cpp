#include "sembeam/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "sembeam/track.hpp"

namespace sembeam::dataset {

namespace {
constexpr const char* kHeader = "#sembeam-sequences 1";
}

int window_count(int n, int r) {
  if (r < 1) throw ConfigError("window length must be positive");
  return std::max(0, n - r + 1);
}

std::vector<int> window_starts(int n, int r) {
  const int count = window_count(n, r);
  std::vector<int> starts(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) starts[static_cast<std::size_t>(i)] = i;
  return starts;
}

bool tx_visible_throughout(const std::vector<scene::Frame>& frames,
                           const std::vector<semantics::SemanticMessage>& messages, int t0,
                           int r) {
  for (int i = 0; i < r; ++i) {
    const std::size_t t = static_cast<std::size_t>(t0 + i);
    if (track::truth_index(messages[t], frames[t].transmitter_id) < 0) return false;
  }
  return true;
}

std::vector<SequenceSample> build_sequences(
    const scene::WorldConfig& world, int camera_index, int r,
    const std::vector<scene::Frame>& frames,
    const std::vector<semantics::SemanticMessage>& messages,
    const std::vector<channel::PowerVector>& powers, BuildStats* stats) {
  if (frames.size() != messages.size() || frames.size() != powers.size()) {
    throw ConfigError("frames, messages, and powers must align");
  }
  const int ula = track::ula_for_camera(world, camera_index);
  const Vec2 node_pos = world.node_position(camera_index);
  const int n = static_cast<int>(frames.size());

  BuildStats st;
  st.windows = window_count(n, r);
  std::vector<SequenceSample> out;
  for (int t0 = 0; t0 + r <= n; ++t0) {
    if (!tx_visible_throughout(frames, messages, t0, r)) continue;
    ++st.in_view;

    const std::size_t last = static_cast<std::size_t>(t0 + r - 1);
    channel::BeamChoice choice;
    try {
      choice = channel::optimal_beam(powers[last]);
    } catch (const NumericError&) {
      continue;  // transmitter out of every array's coverage at the label frame
    }
    if (choice.ula != ula) continue;
    ++st.labeled;

    const int first =
        track::truth_index(messages[static_cast<std::size_t>(t0)], frames[static_cast<std::size_t>(t0)].transmitter_id);
    const std::span<const semantics::SemanticMessage> window(
        messages.data() + t0, static_cast<std::size_t>(r));
    const auto bbox_track = track::track_sequence(window, first, track::TrackMode::kBBox);
    const auto mask_track = track::track_sequence(window, first, track::TrackMode::kMask);
    if (!bbox_track.ok || !mask_track.ok) continue;
    ++st.tracked;

    SequenceSample s;
    s.node = camera_index;
    s.ula = ula;
    s.t0 = t0;
    s.beams_per_ula = powers[last].beams_per_ula;
    s.power_global = powers[static_cast<std::size_t>(t0)].global;
    s.label = choice.index;
    s.frames.reserve(static_cast<std::size_t>(r));
    double objects = 0.0;
    for (int i = 0; i < r; ++i) {
      const std::size_t t = static_cast<std::size_t>(t0 + i);
      const auto& msg = messages[t];
      FrameFeature f;
      f.bbox = msg.detections[static_cast<std::size_t>(bbox_track.indices[static_cast<std::size_t>(i)])].bbox;
      const auto& masked =
          msg.detections[static_cast<std::size_t>(mask_track.indices[static_cast<std::size_t>(i)])];
      f.mask = masked.mask;
      f.color = masked.color;
      f.tx_position = frames[t].transmitter().position;
      objects += static_cast<double>(msg.detections.size());
      s.frames.push_back(std::move(f));
    }
    s.mean_objects = objects / r;
    s.distance_m = distance(node_pos, s.frames.back().tx_position);
    out.push_back(std::move(s));
    ++st.samples;
  }
  if (stats != nullptr) *stats = st;
  return out;
}

SplitResult split(const std::vector<SequenceSample>& samples, const SplitSpec& spec) {
  if (samples.empty()) throw ConfigError("cannot split an empty dataset");
  if (spec.train_pct <= 0 || spec.val_pct <= 0 || spec.test_pct <= 0 ||
      spec.train_pct + spec.val_pct + spec.test_pct != 100) {
    throw ConfigError("split ratios must be positive and sum to 100");
  }
  const int n = static_cast<int>(samples.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  if (!spec.block) {
    Rng rng(spec.seed);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
  }
  const int val_n = n * spec.val_pct / 100;
  const int test_n = n * spec.test_pct / 100;
  const int train_n = n - val_n - test_n;
  SplitResult res;
  res.train.reserve(static_cast<std::size_t>(train_n));
  res.val.reserve(static_cast<std::size_t>(val_n));
  res.test.reserve(static_cast<std::size_t>(test_n));
  for (int i = 0; i < n; ++i) {
    const SequenceSample& s = samples[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    if (i < train_n) {
      res.train.push_back(s);
    } else if (i < train_n + val_n) {
      res.val.push_back(s);
    } else {
      res.test.push_back(s);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Record codec
// ---------------------------------------------------------------------------

namespace {

void append_csv(std::ostream& out, std::span<const double> vals) {
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i > 0) out << ',';
    out << format_double(vals[i]);
  }
}

void append_sample(std::ostream& out, const SequenceSample& s) {
  out << "node=" << s.node << " ula=" << s.ula << " t0=" << s.t0 << " r=" << s.steps()
      << " q=" << s.beams_per_ula << " label=" << s.label
      << " dist=" << format_double(s.distance_m) << " objs=" << format_double(s.mean_objects)
      << " power=";
  append_csv(out, s.power_global);
  for (int i = 0; i < s.steps(); ++i) {
    const FrameFeature& f = s.frames[static_cast<std::size_t>(i)];
    out << " f" << i << ".bbox=";
    for (int j = 0; j < 4; ++j) {
      if (j > 0) out << ',';
      out << format_double(f.bbox[static_cast<std::size_t>(j)]);
    }
    out << " f" << i << ".color=" << static_cast<int>(f.color[0]) << ','
        << static_cast<int>(f.color[1]) << ',' << static_cast<int>(f.color[2]);
    out << " f" << i << ".pos=" << format_double(f.tx_position.x) << ','
        << format_double(f.tx_position.y);
    out << " f" << i << ".mask=" << f.mask.width << ',' << f.mask.height;
    const auto runs = semantics::rle_encode(f.mask);
    if (!runs.empty()) {
      out << ',' << static_cast<int>(runs.front().value);
      for (const auto& run : runs) out << ',' << run.length;
    }
  }
  out << '\n';
}

[[noreturn]] void fail(int lineno, const std::string& what) {
  throw ConfigError("record file line " + std::to_string(lineno) + ": " + what);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    if (p == std::string::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

double parse_double(const std::string& s, int lineno) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(lineno, "bad number '" + s + "'");
  }
  return v;
}

long parse_int(const std::string& s, int lineno) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(lineno, "bad integer '" + s + "'");
  }
  return v;
}

std::vector<double> parse_csv(const std::string& s, int lineno) {
  if (s.empty()) return {};
  std::vector<double> out;
  for (const std::string& part : split_on(s, ',')) out.push_back(parse_double(part, lineno));
  return out;
}

SequenceSample parse_sample(const std::string& line, int lineno) {
  std::vector<std::pair<std::string, std::string>> kv;
  for (const std::string& tok : split_on(line, ' ')) {
    const std::size_t eq = tok.find('=');
    if (tok.empty() || eq == std::string::npos || eq == 0) {
      fail(lineno, "malformed token '" + tok + "'");
    }
    kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    for (const auto& [k, v] : kv) {
      if (k == key) return v;
    }
    fail(lineno, "missing key '" + key + "'");
  };

  SequenceSample s;
  s.node = static_cast<int>(parse_int(get("node"), lineno));
  s.ula = static_cast<int>(parse_int(get("ula"), lineno));
  s.t0 = static_cast<int>(parse_int(get("t0"), lineno));
  const int r = static_cast<int>(parse_int(get("r"), lineno));
  s.beams_per_ula = static_cast<int>(parse_int(get("q"), lineno));
  s.label = static_cast<int>(parse_int(get("label"), lineno));
  s.distance_m = parse_double(get("dist"), lineno);
  s.mean_objects = parse_double(get("objs"), lineno);
  s.power_global = parse_csv(get("power"), lineno);

  if (r < 1) fail(lineno, "window needs at least one frame");
  if (s.beams_per_ula < 1) fail(lineno, "beam count must be positive");
  if (s.ula < 0 || s.ula >= channel::kUlaCount) fail(lineno, "array id out of range");
  if (s.label < 0 || s.label >= s.beams_per_ula) fail(lineno, "label out of beam range");
  if (s.distance_m < 0.0) fail(lineno, "negative distance");
  if (s.mean_objects < 1.0) fail(lineno, "object count below one");
  if (s.power_global.size() !=
      static_cast<std::size_t>(channel::kUlaCount) * static_cast<std::size_t>(s.beams_per_ula)) {
    fail(lineno, "power vector length mismatch");
  }

  const std::size_t expected_keys = 9 + 4 * static_cast<std::size_t>(r);
  if (kv.size() != expected_keys) fail(lineno, "unexpected key count");

  s.frames.reserve(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const std::string prefix = "f" + std::to_string(i) + ".";
    FrameFeature f;
    const auto bbox = parse_csv(get(prefix + "bbox"), lineno);
    if (bbox.size() != 4) fail(lineno, "bbox needs four values");
    for (int j = 0; j < 4; ++j) f.bbox[static_cast<std::size_t>(j)] = static_cast<float>(bbox[static_cast<std::size_t>(j)]);
    const auto color = parse_csv(get(prefix + "color"), lineno);
    if (color.size() != 3) fail(lineno, "color needs three values");
    for (int j = 0; j < 3; ++j) {
      const double c = color[static_cast<std::size_t>(j)];
      if (c < 0 || c > 255 || c != static_cast<double>(static_cast<int>(c))) {
        fail(lineno, "color channel out of byte range");
      }
      f.color[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(c);
    }
    const auto pos = parse_csv(get(prefix + "pos"), lineno);
    if (pos.size() != 2) fail(lineno, "position needs two values");
    f.tx_position = {pos[0], pos[1]};

    const auto mask_vals = parse_csv(get(prefix + "mask"), lineno);
    if (mask_vals.size() < 2) fail(lineno, "mask needs dimensions");
    const int mw = static_cast<int>(mask_vals[0]);
    const int mh = static_cast<int>(mask_vals[1]);
    if (mw < 0 || mh < 0) fail(lineno, "negative mask dimensions");
    std::vector<semantics::RleRun> runs;
    if (mask_vals.size() > 2) {
      std::uint8_t value = mask_vals[2] != 0.0 ? 1 : 0;
      for (std::size_t j = 3; j < mask_vals.size(); ++j) {
        runs.push_back({value, static_cast<std::uint32_t>(mask_vals[j])});
        value = value == 0 ? 1 : 0;
      }
    }
    try {
      f.mask = semantics::rle_decode(runs, mw, mh);
    } catch (const ConfigError& e) {
      fail(lineno, e.what());
    }
    s.frames.push_back(std::move(f));
  }
  return s;
}

}  // namespace

void save_records(const std::string& path, const std::vector<SequenceSample>& samples) {
  std::ostringstream out;
  out << kHeader << '\n';
  for (const SequenceSample& s : samples) append_sample(out, s);
  write_file(path, out.str());
}

std::vector<SequenceSample> load_records(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw ConfigError("record file line 1: expected header '" + std::string(kHeader) + "'");
  }
  std::vector<SequenceSample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) fail(lineno, "empty record");
    out.push_back(parse_sample(line, lineno));
  }
  return out;
}

}  // namespace sembeam::dataset
