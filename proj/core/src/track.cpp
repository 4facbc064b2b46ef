#include "sembeam/track.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sembeam::track {

SceneBounds scene_bounds(const scene::WorldConfig& world) {
  bool any = false;
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
  auto take = [&](const Vec2& p) {
    if (!any) {
      min_x = max_x = p.x;
      min_y = max_y = p.y;
      any = true;
      return;
    }
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  };
  for (const auto& road : world.roads) {
    for (const Vec2& p : road) take(p);
  }
  take(world.bs_position);
  SceneBounds b;
  b.min_x = min_x;
  b.min_y = min_y;
  b.ext_x = std::max(max_x - min_x, 1e-9);
  b.ext_y = std::max(max_y - min_y, 1e-9);
  return b;
}

IdentifierModel::IdentifierModel(IdentKind kind, int ula, int input_dim,
                                 const scene::CameraModel& cam, const SceneBounds& bounds,
                                 std::uint64_t init_seed)
    : kind_(kind),
      ula_(ula),
      img_w_(cam.width),
      img_h_(cam.height),
      bounds_(bounds),
      net_(nn::Fcnn::Spec{input_dim, 512, 512, 2, nn::LossKind::kMse}, init_seed) {
  if (kind == IdentKind::kPosition && input_dim != 2) {
    throw ConfigError("position identifier takes a 2-vector");
  }
}

std::vector<double> IdentifierModel::normalize_input(std::span<const double> raw) const {
  if (static_cast<int>(raw.size()) != net_.spec().in) {
    throw ConfigError("identifier input dimension mismatch");
  }
  std::vector<double> out(raw.begin(), raw.end());
  if (kind_ == IdentKind::kPower) {
    double mx = 0.0;
    for (double v : out) mx = std::max(mx, v);
    if (mx > 0.0) {
      for (double& v : out) v /= mx;
    }
  } else {
    out[0] = (out[0] - bounds_.min_x) / bounds_.ext_x;
    out[1] = (out[1] - bounds_.min_y) / bounds_.ext_y;
  }
  return out;
}

Vec2 IdentifierModel::predict_center(std::span<const double> raw) const {
  const std::vector<double> in = normalize_input(raw);
  nn::Tensor x({1, net_.spec().in});
  std::copy(in.begin(), in.end(), x.v.begin());
  const nn::Tensor out = net_.forward(x);
  return {std::clamp(out[0] * img_w_, 0.0, img_w_), std::clamp(out[1] * img_h_, 0.0, img_h_)};
}

nn::Checkpoint IdentifierModel::to_checkpoint() const {
  nn::Checkpoint c;
  c.kind = nn::ModelKind::kFcnn;
  const auto& s = net_.spec();
  c.dims = {s.in, s.hidden1, s.hidden2, s.out, static_cast<std::int64_t>(s.loss)};
  c.meta = {{"ident_kind", static_cast<double>(kind_)},
            {"ula", static_cast<double>(ula_)},
            {"img_w", img_w_},
            {"img_h", img_h_},
            {"min_x", bounds_.min_x},
            {"min_y", bounds_.min_y},
            {"ext_x", bounds_.ext_x},
            {"ext_y", bounds_.ext_y}};
  c.params = nn::flatten(const_cast<nn::Fcnn&>(net_).param_blocks());
  return c;
}

IdentifierModel IdentifierModel::from_checkpoint(const nn::Checkpoint& c) {
  if (c.kind != nn::ModelKind::kFcnn || c.dims.size() != 5) {
    throw ConfigError("not an identifier model file");
  }
  const auto need = [&](const std::string& key) {
    const auto v = c.find_meta(key);
    if (!v) throw ConfigError("identifier model file lacks " + key);
    return *v;
  };
  scene::CameraModel cam;
  cam.width = static_cast<int>(need("img_w"));
  cam.height = static_cast<int>(need("img_h"));
  SceneBounds bounds{need("min_x"), need("min_y"), need("ext_x"), need("ext_y")};
  IdentifierModel m(static_cast<IdentKind>(static_cast<int>(need("ident_kind"))),
                    static_cast<int>(need("ula")), static_cast<int>(c.dims[0]), cam, bounds, 0);
  nn::unflatten(c.params, m.net_.param_blocks());
  return m;
}

IdentDataset build_ident_dataset(const std::vector<scene::Frame>& frames,
                                 const std::vector<semantics::SemanticMessage>& messages,
                                 const std::vector<channel::PowerVector>& powers,
                                 const scene::CameraModel& cam, int ula, IdentKind kind,
                                 const SceneBounds& bounds) {
  if (frames.size() != messages.size() || frames.size() != powers.size()) {
    throw ConfigError("frames, messages, and powers must align");
  }
  std::vector<double> xs, ys;
  int count = 0;
  const int in_dim = kind == IdentKind::kPower
                         ? (powers.empty() ? 0 : powers.front().beams_per_ula)
                         : 2;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& msg = messages[t];
    if (msg.detections.size() != 1) continue;
    const auto& det = msg.detections.front();
    if (det.truth_id != frames[t].transmitter_id) continue;

    std::vector<double> raw;
    if (kind == IdentKind::kPower) {
      const auto slice = powers[t].slice(ula);
      raw.assign(slice.begin(), slice.end());
      double mx = 0.0;
      for (double v : raw) mx = std::max(mx, v);
      if (mx <= 0.0) continue;  // transmitter outside this array's coverage
      for (double& v : raw) v /= mx;
    } else {
      const Vec2 p = frames[t].transmitter().position;
      raw = {(p.x - bounds.min_x) / bounds.ext_x, (p.y - bounds.min_y) / bounds.ext_y};
    }
    xs.insert(xs.end(), raw.begin(), raw.end());
    ys.push_back(det.bbox[0] / cam.width);
    ys.push_back(det.bbox[1] / cam.height);
    ++count;
  }
  if (count == 0) throw NumericError("no single-transmitter frames to learn from");
  IdentDataset ds;
  ds.x = nn::Tensor({count, in_dim});
  ds.x.v = std::move(xs);
  ds.y = nn::Tensor({count, 2});
  ds.y.v = std::move(ys);
  return ds;
}

namespace {

/// Adapts (IdentifierModel, IdentDataset) to the shared training loop.
struct IdentBatcher {
  nn::Fcnn* net;

  std::vector<nn::Tensor*> param_blocks() { return net->param_blocks(); }
  std::vector<nn::Tensor*> grad_blocks() { return net->grad_blocks(); }
  void zero_grads() { net->zero_grads(); }
  double batch_grad(const IdentDataset& ds, std::span<const int> idx) {
    return net->loss_and_grad(nn::gather_rows(ds.x, idx), nn::gather_rows(ds.y, idx));
  }
  double batch_loss(const IdentDataset& ds, std::span<const int> idx) const {
    return net->loss(nn::gather_rows(ds.x, idx), nn::gather_rows(ds.y, idx));
  }
};

}  // namespace

nn::TrainLog train_identifier(IdentifierModel& model, const IdentDataset& train,
                              const IdentDataset* val, const nn::TrainSpec& spec) {
  IdentBatcher batcher{&model.net()};
  nn::Optimizer opt(batcher.param_blocks());
  return nn::train_model(batcher, opt, train, val, spec);
}

int match_detection(const Vec2& b, const semantics::SemanticMessage& msg) {
  if (msg.detections.empty()) throw NumericError("no candidates");
  int best = 0;
  double best_d = distance(b, msg.detections.front().center());
  for (int i = 1; i < static_cast<int>(msg.detections.size()); ++i) {
    const double d = distance(b, msg.detections[static_cast<std::size_t>(i)].center());
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<int> color_filter(const std::array<std::uint8_t, 3>& tx_color,
                              const semantics::SemanticMessage& msg, double eps) {
  std::vector<int> kept;
  for (int i = 0; i < static_cast<int>(msg.detections.size()); ++i) {
    const auto& c = msg.detections[static_cast<std::size_t>(i)].color;
    double d2 = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double diff = static_cast<double>(tx_color[static_cast<std::size_t>(j)]) -
                          static_cast<double>(c[static_cast<std::size_t>(j)]);
      d2 += diff * diff;
    }
    if (std::sqrt(d2) <= eps) kept.push_back(i);
  }
  if (kept.empty()) {
    kept.resize(msg.detections.size());
    for (int i = 0; i < static_cast<int>(kept.size()); ++i) kept[static_cast<std::size_t>(i)] = i;
  }
  return kept;
}

TrackResult track_sequence(std::span<const semantics::SemanticMessage> msgs, int first_index,
                           TrackMode mode, double color_eps) {
  TrackResult res;
  if (msgs.empty()) {
    res.reason = "empty window";
    return res;
  }
  const auto& first = msgs.front();
  if (first_index < 0 || first_index >= static_cast<int>(first.detections.size())) {
    res.reason = "first-frame index out of range";
    return res;
  }
  const auto& anchor = first.detections[static_cast<std::size_t>(first_index)];
  const std::array<std::uint8_t, 3> tx_color = anchor.color;
  Vec2 center = anchor.center();
  res.indices.push_back(first_index);

  for (std::size_t t = 1; t < msgs.size(); ++t) {
    const auto& msg = msgs[t];
    if (msg.detections.empty()) {
      res.indices.clear();
      res.reason = "frame without detections";
      return res;
    }
    std::vector<int> candidates;
    if (mode == TrackMode::kMask) {
      candidates = color_filter(tx_color, msg, color_eps);
    } else {
      candidates.resize(msg.detections.size());
      for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
        candidates[static_cast<std::size_t>(i)] = i;
      }
    }
    int best = candidates.front();
    double best_d = distance(center, msg.detections[static_cast<std::size_t>(best)].center());
    for (std::size_t c = 1; c < candidates.size(); ++c) {
      const int i = candidates[c];
      const double d = distance(center, msg.detections[static_cast<std::size_t>(i)].center());
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    center = msg.detections[static_cast<std::size_t>(best)].center();
    res.indices.push_back(best);
  }
  res.ok = true;
  return res;
}

int select_node(const channel::PowerVector& p) { return channel::optimal_beam(p).ula; }

int truth_index(const semantics::SemanticMessage& msg, int vehicle_id) {
  for (int i = 0; i < static_cast<int>(msg.detections.size()); ++i) {
    if (msg.detections[static_cast<std::size_t>(i)].truth_id == vehicle_id) return i;
  }
  return -1;
}

int ula_for_camera(const scene::WorldConfig& world, int camera_index) {
  if (camera_index <= 0 || camera_index >= static_cast<int>(world.cameras.size())) {
    throw ConfigError("camera index does not name a distributed node");
  }
  return scene::subregion_of(world, world.cameras[static_cast<std::size_t>(camera_index)].position);
}

void write_track_trace(const std::string& path, std::span<const TraceRow> rows) {
  std::ostringstream out;
  out << "frame,chosen,truth,distance\n";
  for (const TraceRow& r : rows) {
    out << r.frame << ',' << r.chosen << ',' << r.truth << ',' << format_double(r.distance)
        << '\n';
  }
  write_file(path, out.str());
}

}  // namespace sembeam::track
