#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sembeam/beam.hpp"
#include "sembeam/channel.hpp"
#include "sembeam/dataset.hpp"
#include "sembeam/networks.hpp"
#include "sembeam/scene.hpp"
#include "sembeam/semantics.hpp"

namespace sembeam::config {

/// Flat `key = value` file: one pair per line, '#' comments, duplicate or
/// unrecognized keys rejected. Values keep internal spaces (road polylines).
class KeyValues {
 public:
  static KeyValues parse_file(const std::string& path);
  static KeyValues parse_text(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const;
  /// Replaces or adds a value before typed reads (CLI overrides).
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key);
  double get_double(const std::string& key, double fallback);
  long get_int(const std::string& key);
  long get_int(const std::string& key, long fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_list(const std::string& key);
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback);

  /// All keys sharing a prefix, in file order (for roadN / cameraN scans).
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  /// Throws when any key was never consumed by a typed read.
  void finish() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
  };
  std::string origin_;
  std::vector<std::pair<std::string, Entry>> entries_;  // file order

  Entry* find(const std::string& key);
  const Entry* find(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
};

/// Everything one experiment needs: world and traffic layout, detector and
/// channel noise, windowing, splits, per-model training schedules, seeds.
struct ExperimentConfig {
  scene::WorldConfig world;
  scene::TrafficParams traffic;
  semantics::DetectorParams detector;
  channel::ChannelConfig channel_cfg;
  channel::UlaConfig ula;  // prototype; per-array yaws derive from the heading
  int r = 5;
  dataset::SplitSpec split;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  /// Association exclusion threshold in pixels; 0 selects half the median
  /// tracked bbox diagonal of the test split.
  double assoc_threshold_px = 0.0;
  nn::TrainSpec identifier_spec;
  nn::TrainSpec baseline_spec;
  std::map<beam::BeamModelKind, nn::TrainSpec> beam_specs;

  /// Deterministic per-purpose seed streams derived from the master seed.
  std::uint64_t seed_for(const std::string& purpose) const;
};

ExperimentConfig experiment_from_keyvalues(KeyValues& kv);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace sembeam::config
