#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "sembeam/channel.hpp"
#include "sembeam/config.hpp"
#include "sembeam/scene.hpp"
#include "sembeam/semantics.hpp"

namespace sembeam::pipeline {

/// Everything the simulation stage produces, kept in memory so later stages
/// can rebuild it deterministically from the config instead of re-parsing
/// artifacts. messages maps camera index (nodes only) to per-frame messages.
struct GeneratedData {
  std::vector<scene::Frame> frames;
  std::array<channel::UlaConfig, channel::kUlaCount> ulas;
  std::array<channel::Codebook, channel::kUlaCount> codebooks;
  std::vector<channel::PowerVector> powers;
  std::map<int, std::vector<semantics::SemanticMessage>> messages;
};

GeneratedData run_simulation(const config::ExperimentConfig& cfg);

/// Writes frames.txt, per-node message streams and windowed records,
/// powers.bin, and manifest.json with content hashes and the per-frame
/// message-to-raw-image compression ratios.
void cmd_generate(const config::ExperimentConfig& cfg, const std::string& out_dir);

/// Trains one model (or "all") for one node (or every node, node = -1) from
/// the generated records; writes checkpoints and loss-curve CSVs under
/// out_dir/models. Known names: identifier, baseline, bbox-fcnn, mask-lenet,
/// bbox-lstm, mask-lstm.
void cmd_train(const config::ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& model, int node);

/// Evaluates every beam model on the test split plus the association study;
/// writes the five report CSVs under out_dir/report and prints a summary.
void cmd_eval(const config::ExperimentConfig& cfg, const std::string& out_dir);

/// generate, then all models for all nodes, then eval; any stage failure is
/// rethrown with the stage name prefixed.
void cmd_pipeline(const config::ExperimentConfig& cfg, const std::string& out_dir);

/// Pretty-prints any artifact this toolchain writes (model files, message
/// streams, power dumps, record files, manifests). Message streams need the
/// config for the mask dimensions.
void cmd_inspect(const std::string& path, const config::ExperimentConfig* cfg);

// Artifact naming shared by the stages.
std::string records_path(const std::string& out_dir, int node);
std::string messages_path(const std::string& out_dir, int node);
std::string checkpoint_path(const std::string& out_dir, const std::string& model, int node);

}  // namespace sembeam::pipeline
