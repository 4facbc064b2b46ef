#include "sembeam/pipeline.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "sembeam/beam.hpp"
#include "sembeam/dataset.hpp"
#include "sembeam/metrics.hpp"
#include "sembeam/networks.hpp"
#include "sembeam/track.hpp"

namespace sembeam::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kPowersMagic = 0x57504253;    // "SBPW"
constexpr std::uint32_t kMessagesMagic = 0x314D4553;  // "SEM1"
constexpr std::uint32_t kModelMagic = 0x50434253;     // "SBCP"

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double read_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string frames_text(const std::vector<scene::Frame>& frames) {
  std::ostringstream out;
  out << "#sembeam-frames 1\n";
  for (const auto& f : frames) {
    out << "t=" << f.t << " tx=" << f.transmitter_id;
    for (const auto& v : f.vehicles) {
      out << " v=" << v.id << ',' << static_cast<int>(v.cls) << ','
          << format_double(v.position.x) << ',' << format_double(v.position.y) << ','
          << format_double(v.velocity.x) << ',' << format_double(v.velocity.y) << ','
          << static_cast<int>(v.color[0]) << ',' << static_cast<int>(v.color[1]) << ','
          << static_cast<int>(v.color[2]) << ',' << (v.is_transmitter ? 1 : 0);
    }
    out << '\n';
  }
  return out.str();
}

std::vector<std::uint8_t> powers_blob(const std::vector<channel::PowerVector>& powers) {
  std::vector<std::uint8_t> out;
  put_u32(out, kPowersMagic);
  out.push_back(1);  // version
  put_u32(out, static_cast<std::uint32_t>(powers.size()));
  put_u32(out, powers.empty() ? 0 : static_cast<std::uint32_t>(powers.front().beams_per_ula));
  for (const auto& p : powers) {
    for (double v : p.global) put_f64(out, v);
  }
  return out;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

struct CompressionStats {
  double mean_ratio = 0.0;
  std::vector<double> per_frame;
};

void write_manifest(const std::string& out_dir, const std::vector<std::string>& artifact_names,
                    const std::map<int, CompressionStats>& compression) {
  std::ostringstream j;
  j << "{\n";
  j << "  \"format\": \"sembeam-manifest-1\",\n";
  j << "  \"artifacts\": {\n";
  for (std::size_t i = 0; i < artifact_names.size(); ++i) {
    const std::string& name = artifact_names[i];
    const std::string path = out_dir + "/" + name;
    const std::string content = read_file(path);
    j << "    \"" << name << "\": {\"bytes\": " << content.size() << ", \"fnv1a64\": \""
      << hex64(fnv1a64(content)) << "\"}";
    j << (i + 1 < artifact_names.size() ? ",\n" : "\n");
  }
  j << "  },\n";
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& [node, st] : compression) {
    total += st.mean_ratio * static_cast<double>(st.per_frame.size());
    count += st.per_frame.size();
  }
  j << "  \"compression\": {\n";
  j << "    \"mean_ratio\": " << format_double(count > 0 ? total / static_cast<double>(count) : 0.0)
    << ",\n";
  j << "    \"nodes\": {\n";
  for (auto it = compression.begin(); it != compression.end(); ++it) {
    j << "      \"" << it->first << "\": {\"mean_ratio\": " << format_double(it->second.mean_ratio)
      << ", \"per_frame\": [";
    for (std::size_t i = 0; i < it->second.per_frame.size(); ++i) {
      if (i > 0) j << ", ";
      j << format_double(it->second.per_frame[i]);
    }
    j << "]}" << (std::next(it) != compression.end() ? ",\n" : "\n");
  }
  j << "    }\n  }\n}\n";
  write_file(out_dir + "/manifest.json", j.str());
}

std::string node_suffix(int node) { return "_node" + std::to_string(node) + "."; }

}  // namespace

std::string records_path(const std::string& out_dir, int node) {
  return out_dir + "/records" + node_suffix(node) + "txt";
}

std::string messages_path(const std::string& out_dir, int node) {
  return out_dir + "/messages" + node_suffix(node) + "bin";
}

std::string checkpoint_path(const std::string& out_dir, const std::string& model, int node) {
  return out_dir + "/models/" + model + node_suffix(node) + "ckpt";
}

GeneratedData run_simulation(const config::ExperimentConfig& cfg) {
  GeneratedData d;
  d.frames = scene::generate_scenario(cfg.world, cfg.traffic, cfg.seed_for("scenario"));
  d.ulas = channel::make_bs_ulas(cfg.world, cfg.ula);
  for (int u = 0; u < channel::kUlaCount; ++u) {
    d.codebooks[static_cast<std::size_t>(u)] =
        channel::make_codebook(d.ulas[static_cast<std::size_t>(u)]);
  }
  const Rng power_base(cfg.seed_for("power"));
  d.powers.reserve(d.frames.size());
  for (const auto& f : d.frames) {
    Rng frame_rng = power_base.fork(static_cast<std::uint64_t>(f.t));
    d.powers.push_back(channel::compute_power_vector(
        cfg.channel_cfg, d.ulas, d.codebooks, cfg.world.bs_position, f.transmitter().position,
        cfg.channel_cfg.power_noise > 0.0 ? &frame_rng : nullptr));
  }
  const std::uint64_t det_seed = cfg.seed_for("detector");
  for (int cam = 1; cam < static_cast<int>(cfg.world.cameras.size()); ++cam) {
    auto& msgs = d.messages[cam];
    msgs.reserve(d.frames.size());
    for (const auto& f : d.frames) {
      msgs.push_back(semantics::simulate_detector(
          cfg.world.cameras[static_cast<std::size_t>(cam)], f, cfg.detector, cam, det_seed));
    }
  }
  return d;
}

void cmd_generate(const config::ExperimentConfig& cfg, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out_dir);

  const GeneratedData d = run_simulation(cfg);
  std::vector<std::string> artifacts;

  write_file(out_dir + "/frames.txt", frames_text(d.frames));
  artifacts.push_back("frames.txt");

  write_bytes(out_dir + "/powers.bin", powers_blob(d.powers));
  artifacts.push_back("powers.bin");

  std::map<int, CompressionStats> compression;
  for (const auto& [cam, msgs] : d.messages) {
    const auto& camera = cfg.world.cameras[static_cast<std::size_t>(cam)];
    const double raw = static_cast<double>(semantics::raw_image_bytes(camera.width, camera.height));
    std::vector<std::uint8_t> blob;
    CompressionStats st;
    st.per_frame.reserve(msgs.size());
    for (const auto& msg : msgs) {
      const auto bytes = semantics::encode_message(msg);
      blob.insert(blob.end(), bytes.begin(), bytes.end());
      st.per_frame.push_back(static_cast<double>(bytes.size()) / raw);
      st.mean_ratio += st.per_frame.back();
    }
    if (!msgs.empty()) st.mean_ratio /= static_cast<double>(msgs.size());
    compression[cam] = std::move(st);

    write_bytes(messages_path(out_dir, cam), blob);
    artifacts.push_back("messages" + node_suffix(cam) + "bin");

    dataset::BuildStats stats;
    const auto samples =
        dataset::build_sequences(cfg.world, cam, cfg.r, d.frames, msgs, d.powers, &stats);
    dataset::save_records(records_path(out_dir, cam), samples);
    artifacts.push_back("records" + node_suffix(cam) + "txt");
    std::cout << "node " << cam << ": " << stats.windows << " windows, " << stats.in_view
              << " with the transmitter in view, " << stats.labeled << " on this node's array, "
              << stats.samples << " sequences\n";
  }

  write_manifest(out_dir, artifacts, compression);
  std::cout << "wrote " << out_dir << "/manifest.json\n";
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& all_model_names() {
  static const std::vector<std::string> names = {"identifier", "baseline",   "bbox-fcnn",
                                                 "mask-lenet", "bbox-lstm",  "mask-lstm"};
  return names;
}

/// Caches the simulation and per-node record splits across the models
/// trained in one command.
struct TrainContext {
  const config::ExperimentConfig& cfg;
  const std::string& out_dir;
  std::optional<GeneratedData> sim;
  std::map<int, dataset::SplitResult> splits;

  const GeneratedData& simulation() {
    if (!sim) sim = run_simulation(cfg);
    return *sim;
  }
  const dataset::SplitResult& split_for(int node) {
    auto it = splits.find(node);
    if (it == splits.end()) {
      const auto records = dataset::load_records(records_path(out_dir, node));
      it = splits.emplace(node, dataset::split(records, cfg.split)).first;
    }
    return it->second;
  }
};

void write_loss_csv(const std::string& path, const nn::TrainLog& log) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t i = 0; i < log.train_loss.size(); ++i) {
    out << i << ',' << format_double(log.train_loss[i]) << ',';
    if (i < log.val_loss.size()) out << format_double(log.val_loss[i]);
    out << '\n';
  }
  write_file(path, out.str());
}

std::uint64_t node_mix(int node) {
  return static_cast<std::uint64_t>(node) * 0x9e3779b97f4a7c15ull;
}

void train_one(TrainContext& ctx, const std::string& name, int node) {
  const auto& cfg = ctx.cfg;
  const int ula = track::ula_for_camera(cfg.world, node);
  const std::string tag = name + "-init-" + std::to_string(node);
  nn::TrainLog log;

  if (name == "identifier" || name == "baseline") {
    const bool power = name == "identifier";
    const auto& d = ctx.simulation();
    const auto bounds = track::scene_bounds(cfg.world);
    const auto& cam = cfg.world.cameras[static_cast<std::size_t>(node)];
    const auto ds = track::build_ident_dataset(
        d.frames, d.messages.at(node), d.powers, cam, ula,
        power ? track::IdentKind::kPower : track::IdentKind::kPosition, bounds);
    track::IdentifierModel model(power ? track::IdentKind::kPower : track::IdentKind::kPosition,
                                 ula, power ? cfg.ula.beams : 2, cam, bounds, cfg.seed_for(tag));
    nn::TrainSpec spec = power ? cfg.identifier_spec : cfg.baseline_spec;
    spec.shuffle_seed ^= node_mix(node);
    log = track::train_identifier(model, ds, nullptr, spec);
    nn::save_checkpoint(checkpoint_path(ctx.out_dir, name, node), model.to_checkpoint());
    std::cout << name << " node " << node << ": " << ds.size() << " samples, final loss "
              << log.train_loss.back() << "\n";
  } else {
    const beam::BeamModelKind kind = beam::kind_from_name(name);
    const auto& parts = ctx.split_for(node);
    if (parts.train.empty()) throw ConfigError("empty training split for node " + std::to_string(node));
    const auto& cam = cfg.world.cameras[static_cast<std::size_t>(node)];
    beam::BeamModelMeta meta;
    meta.node = node;
    meta.ula = ula;
    meta.q = cfg.ula.beams;
    meta.r = cfg.r;
    meta.mask_w = cfg.detector.mask_width;
    meta.mask_h = cfg.detector.mask_height;
    meta.img_w = cam.width;
    meta.img_h = cam.height;
    beam::BeamModel model(kind, meta, cfg.seed_for(tag));
    nn::TrainSpec spec = cfg.beam_specs.at(kind);
    spec.shuffle_seed ^= node_mix(node);
    log = beam::train_beam_model(model, parts.train, parts.val, spec);
    nn::save_checkpoint(checkpoint_path(ctx.out_dir, name, node), model.to_checkpoint());
    std::cout << name << " node " << node << ": " << parts.train.size() << " train / "
              << parts.val.size() << " val, final loss " << log.train_loss.back();
    if (!log.val_loss.empty()) std::cout << " (val " << log.val_loss.back() << ")";
    std::cout << "\n";
  }
  write_loss_csv(ctx.out_dir + "/models/loss_" + name + node_suffix(node) + "csv", log);
}

}  // namespace

void cmd_train(const config::ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& model, int node) {
  std::error_code ec;
  fs::create_directories(out_dir + "/models", ec);
  if (ec) throw ConfigError("cannot create output directory " + out_dir + "/models");

  std::vector<std::string> names;
  if (model == "all") {
    names = all_model_names();
  } else {
    const auto& known = all_model_names();
    if (std::find(known.begin(), known.end(), model) == known.end()) {
      throw ConfigError("unknown model '" + model + "'");
    }
    names = {model};
  }
  std::vector<int> nodes;
  const int node_count = static_cast<int>(cfg.world.cameras.size()) - 1;
  if (node < 0) {
    for (int i = 1; i <= node_count; ++i) nodes.push_back(i);
  } else {
    if (node < 1 || node > node_count) throw ConfigError("node out of range");
    nodes = {node};
  }

  TrainContext ctx{cfg, out_dir};
  for (int n : nodes) {
    for (const std::string& name : names) train_one(ctx, name, n);
  }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

constexpr int kScoreChunk = 256;

nn::Tensor all_scores(const beam::BeamModel& model,
                      const std::vector<dataset::SequenceSample>& samples) {
  const int n = static_cast<int>(samples.size());
  nn::Tensor scores({n, model.meta().q});
  std::vector<int> idx;
  for (int start = 0; start < n; start += kScoreChunk) {
    const int bs = std::min(kScoreChunk, n - start);
    idx.resize(static_cast<std::size_t>(bs));
    for (int i = 0; i < bs; ++i) idx[static_cast<std::size_t>(i)] = start + i;
    const nn::Tensor chunk = model.scores_batch(samples, idx);
    std::copy(chunk.v.begin(), chunk.v.end(),
              scores.v.begin() + static_cast<std::size_t>(start) * model.meta().q);
  }
  return scores;
}

}  // namespace

void cmd_eval(const config::ExperimentConfig& cfg, const std::string& out_dir) {
  const std::string report = out_dir + "/report";
  std::error_code ec;
  fs::create_directories(report, ec);
  if (ec) throw ConfigError("cannot create report directory " + report);

  const GeneratedData d = run_simulation(cfg);

  std::vector<metrics::TopkCsvRow> topk_rows;
  std::vector<metrics::AssociationCsvRow> assoc_rows;
  std::vector<metrics::DistanceCsvRow> dist_rows;
  std::vector<metrics::ObjectsCsvRow> object_rows;
  std::vector<metrics::ConfusionCsvRow> confusion_rows;
  std::ostringstream summary;

  const int node_count = static_cast<int>(cfg.world.cameras.size()) - 1;
  for (int node = 1; node <= node_count; ++node) {
    const auto records = dataset::load_records(records_path(out_dir, node));
    const auto parts = dataset::split(records, cfg.split);
    if (parts.test.empty()) {
      throw ConfigError("empty test split for node " + std::to_string(node));
    }
    const auto& test = parts.test;
    const int n_test = static_cast<int>(test.size());

    std::vector<double> distances, mean_objects;
    distances.reserve(test.size());
    mean_objects.reserve(test.size());
    for (const auto& s : test) {
      distances.push_back(s.distance_m);
      mean_objects.push_back(s.mean_objects);
    }

    for (const beam::BeamModelKind kind :
         {beam::BeamModelKind::kBBoxFcnn, beam::BeamModelKind::kMaskLeNet,
          beam::BeamModelKind::kBBoxLstm, beam::BeamModelKind::kMaskLstm}) {
      const std::string name = beam::kind_name(kind);
      const auto model = beam::BeamModel::from_checkpoint(
          nn::load_checkpoint(checkpoint_path(out_dir, name, node)));
      const nn::Tensor scores = all_scores(model, test);

      std::vector<int> labels(test.size());
      for (std::size_t i = 0; i < test.size(); ++i) labels[i] = test[i].label;

      metrics::TopkCsvRow row;
      row.model = name;
      row.node = node;
      row.samples = n_test;
      row.top1 = metrics::top_k_accuracy(scores, labels, 1);
      row.top2 = metrics::top_k_accuracy(scores, labels, std::min(2, model.meta().q));
      row.top3 = metrics::top_k_accuracy(scores, labels, std::min(3, model.meta().q));
      const std::vector<int> top1 = metrics::top1_predictions(scores);
      const metrics::Confusion confusion =
          metrics::confusion_matrix(top1, labels, model.meta().q);
      row.diag_fraction = confusion.diagonal_fraction();
      topk_rows.push_back(row);

      std::vector<bool> hit(test.size());
      for (std::size_t i = 0; i < test.size(); ++i) hit[i] = top1[i] == labels[i];
      for (const auto& bin : metrics::accuracy_by_distance(distances, hit, 10.0)) {
        dist_rows.push_back({name, node, bin});
      }
      for (const auto& cat : metrics::accuracy_by_object_count(mean_objects, hit)) {
        object_rows.push_back({name, node, cat});
      }
      for (int t = 0; t < model.meta().q; ++t) {
        for (int p = 0; p < model.meta().q; ++p) {
          if (confusion.at(t, p) > 0) {
            confusion_rows.push_back({name, node, t, p, confusion.at(t, p)});
          }
        }
      }

      std::vector<std::vector<int>> top3(test.size());
      for (std::size_t i = 0; i < test.size(); ++i) {
        const std::span<const double> srow(
            scores.v.data() + i * static_cast<std::size_t>(model.meta().q),
            static_cast<std::size_t>(model.meta().q));
        top3[i] = beam::top_k(srow, std::min(3, model.meta().q));
      }
      beam::write_predictions(report + "/predictions_" + name + node_suffix(node) + "csv", test,
                              top3);

      summary << "node " << node << ' ' << name << ": top1 " << row.top1 << " top2 " << row.top2
              << " top3 " << row.top3 << " (" << n_test << " sequences)\n";
    }

    // Association study: power-aided identify-then-track vs position-aided
    // per-frame identification.
    const auto ident = track::IdentifierModel::from_checkpoint(
        nn::load_checkpoint(checkpoint_path(out_dir, "identifier", node)));
    const auto base = track::IdentifierModel::from_checkpoint(
        nn::load_checkpoint(checkpoint_path(out_dir, "baseline", node)));
    const auto& msgs = d.messages.at(node);

    std::vector<double> diagonals;
    for (const auto& s : test) {
      for (const auto& f : s.frames) diagonals.push_back(std::hypot(f.bbox[2], f.bbox[3]));
    }
    const double threshold = cfg.assoc_threshold_px > 0.0 ? cfg.assoc_threshold_px
                                                          : 0.5 * metrics::median(diagonals);

    std::vector<metrics::AssociationInput> inputs;
    std::int64_t track_failures = 0;
    for (const auto& s : test) {
      if (s.t0 < 0 || s.t0 + s.steps() > static_cast<int>(msgs.size())) {
        throw ConfigError("record window lies outside the simulated scenario");
      }
      const std::span<const semantics::SemanticMessage> window(
          msgs.data() + s.t0, static_cast<std::size_t>(s.steps()));

      metrics::AssociationInput in;
      const auto power_slice = d.powers[static_cast<std::size_t>(s.t0)].slice(s.ula);
      const Vec2 c0 = ident.predict_center(power_slice);
      const int first = track::match_detection(c0, window[0]);
      const auto tr = track::track_sequence(window, first, track::TrackMode::kBBox);
      if (!tr.ok) {
        ++track_failures;
        continue;
      }
      in.power_track = tr.indices;

      bool usable = true;
      for (int t = 0; t < s.steps(); ++t) {
        const Vec2 pos = s.frames[static_cast<std::size_t>(t)].tx_position;
        const double raw[2] = {pos.x, pos.y};
        const Vec2 c = base.predict_center(raw);
        if (window[static_cast<std::size_t>(t)].detections.empty()) {
          usable = false;
          break;
        }
        const int idx = track::match_detection(c, window[static_cast<std::size_t>(t)]);
        in.position_track.push_back(idx);
        in.position_err.push_back(
            distance(c, window[static_cast<std::size_t>(t)]
                            .detections[static_cast<std::size_t>(idx)]
                            .center()));
      }
      if (!usable) {
        ++track_failures;
        continue;
      }
      inputs.push_back(std::move(in));
    }
    metrics::AssociationReport rep = metrics::association_accuracy(inputs, threshold);
    rep.excluded += track_failures;
    for (int f = 2; f <= cfg.r; ++f) {
      metrics::AssociationCsvRow row;
      row.node = node;
      row.frame = f;
      row.accuracy = f - 2 < static_cast<int>(rep.accuracy.size())
                         ? rep.accuracy[static_cast<std::size_t>(f - 2)]
                         : 0.0;
      row.qualifying = rep.qualifying;
      row.excluded = rep.excluded;
      assoc_rows.push_back(row);
    }
    summary << "node " << node << " association: qualifying " << rep.qualifying << ", excluded "
            << rep.excluded;
    if (!rep.accuracy.empty()) {
      summary << ", frame-" << cfg.r << " accuracy " << rep.accuracy.back();
    }
    summary << "\n";
  }

  metrics::write_topk_csv(report + "/topk.csv", topk_rows);
  metrics::write_association_csv(report + "/association.csv", assoc_rows);
  metrics::write_by_distance_csv(report + "/by_distance.csv", dist_rows);
  metrics::write_by_objects_csv(report + "/by_objects.csv", object_rows);
  metrics::write_confusion_csv(report + "/confusion.csv", confusion_rows);

  std::cout << summary.str();
  std::cout << "wrote report CSVs to " << report << "\n";
}

void cmd_pipeline(const config::ExperimentConfig& cfg, const std::string& out_dir) {
  const auto run_stage = [&](const char* stage, auto f) {
    try {
      f();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(stage) + ": " + e.what());
    } catch (const NumericError& e) {
      throw NumericError(std::string(stage) + ": " + e.what());
    }
  };
  run_stage("generate", [&] { cmd_generate(cfg, out_dir); });
  run_stage("train", [&] { cmd_train(cfg, out_dir, "all", -1); });
  run_stage("eval", [&] { cmd_eval(cfg, out_dir); });
}

// ---------------------------------------------------------------------------
// Inspection
// ---------------------------------------------------------------------------

void cmd_inspect(const std::string& path, const config::ExperimentConfig* cfg) {
  const std::string content = read_file(path);
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(content.data());

  if (content.size() >= 4) {
    const std::uint32_t magic = read_u32(bytes);
    if (magic == kMessagesMagic) {
      if (cfg == nullptr) {
        throw ConfigError("message streams need --config for the mask dimensions");
      }
      std::size_t off = 0;
      std::size_t count = 0;
      while (off < content.size()) {
        std::size_t consumed = 0;
        const auto msg = semantics::decode_message(bytes + off, content.size() - off,
                                                   cfg->detector.mask_width,
                                                   cfg->detector.mask_height, &consumed);
        if (count < 5) {
          std::cout << semantics::dump_message(msg);
        } else if (count == 5) {
          std::cout << "...\n";
        }
        off += consumed;
        ++count;
      }
      std::cout << count << " messages, " << content.size() << " bytes\n";
      return;
    }
    if (magic == kModelMagic) {
      const auto c = nn::deserialize_checkpoint(bytes, content.size());
      std::cout << "model kind " << static_cast<int>(c.kind) << "\ndims:";
      for (auto dim : c.dims) std::cout << ' ' << dim;
      std::cout << "\nmeta:\n";
      for (const auto& [k, v] : c.meta) std::cout << "  " << k << " = " << v << "\n";
      std::cout << c.params.size() << " parameters, optimizer state "
                << (c.has_opt ? "present" : "absent") << "\n";
      return;
    }
    if (magic == kPowersMagic) {
      if (content.size() < 13) throw ConfigError("truncated power dump");
      const std::uint32_t frames = read_u32(bytes + 5);
      const std::uint32_t q = read_u32(bytes + 9);
      std::cout << "power dump: " << frames << " frames, " << q << " beams per array\n";
      const std::size_t want = 13 + static_cast<std::size_t>(frames) * 3 * q * 8;
      if (content.size() != want) throw ConfigError("power dump size mismatch");
      if (frames > 0) {
        double mx = 0.0;
        int arg = 0;
        for (std::uint32_t i = 0; i < 3 * q; ++i) {
          const double v = read_f64(bytes + 13 + i * 8);
          if (v > mx) {
            mx = v;
            arg = static_cast<int>(i);
          }
        }
        std::cout << "frame 0 strongest beam: global index " << arg << ", power "
                  << format_double(mx) << "\n";
      }
      return;
    }
  }

  // Text artifacts
  if (content.rfind("#sembeam-sequences", 0) == 0) {
    const auto samples = dataset::load_records(path);
    std::cout << samples.size() << " records\n";
    if (!samples.empty()) {
      const auto& s = samples.front();
      std::cout << "first: node " << s.node << ", array " << s.ula << ", t0 " << s.t0 << ", r "
                << s.steps() << ", label " << s.label << ", distance "
                << format_double(s.distance_m) << " m\n";
    }
    return;
  }
  if (content.rfind("#sembeam-frames", 0) == 0) {
    std::size_t lines = 0;
    for (char ch : content) {
      if (ch == '\n') ++lines;
    }
    std::cout << (lines > 0 ? lines - 1 : 0) << " frames\n";
    return;
  }
  if (!content.empty() && content.front() == '{') {
    std::cout << content;
    return;
  }
  throw ConfigError("unrecognized artifact: " + path);
}

}  // namespace sembeam::pipeline
