#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sembeam/dataset.hpp"
#include "sembeam/networks.hpp"

namespace sembeam::beam {

/// The four predictors: single-instance bbox regressor-classifier and mask
/// classifier, and their r-step sequence counterparts.
enum class BeamModelKind : std::uint8_t {
  kBBoxFcnn = 0,
  kMaskLeNet = 1,
  kBBoxLstm = 2,
  kMaskLstm = 3,
};

const char* kind_name(BeamModelKind kind);
BeamModelKind kind_from_name(const std::string& name);
bool kind_uses_masks(BeamModelKind kind);
bool kind_uses_sequence(BeamModelKind kind);

/// Table hyperparameters for each model family (sequence models and their
/// single-instance baselines share schedules with their input family).
nn::TrainSpec default_train_spec(BeamModelKind kind);

/// What a beam model needs to know about its data beyond the network: image
/// scale for bbox normalization and the expected mask geometry.
struct BeamModelMeta {
  int node = 0;
  int ula = 0;
  int q = 64;
  int r = 5;
  int mask_w = 64;
  int mask_h = 64;
  double img_w = 1280.0;
  double img_h = 720.0;
};

/// A trained (or trainable) beam predictor. Inputs are SequenceSamples; the
/// kind decides which fields feed the network and how they are normalized:
/// bbox centers and sizes divide by the image dimensions, masks enter as 0/1
/// grids. Single-instance kinds read only the last frame.
class BeamModel {
 public:
  BeamModel(BeamModelKind kind, const BeamModelMeta& meta, std::uint64_t init_seed);

  BeamModelKind kind() const { return kind_; }
  const BeamModelMeta& meta() const { return meta_; }

  /// Kind-specific input tensor for the selected samples.
  nn::Tensor batch_inputs(std::span<const dataset::SequenceSample> samples,
                          std::span<const int> idx) const;
  static std::vector<int> batch_labels(std::span<const dataset::SequenceSample> samples,
                                       std::span<const int> idx);

  /// Score vectors, one row per selected sample.
  nn::Tensor scores_batch(std::span<const dataset::SequenceSample> samples,
                          std::span<const int> idx) const;
  std::vector<double> scores(const dataset::SequenceSample& s) const;

  nn::Checkpoint to_checkpoint() const;
  static BeamModel from_checkpoint(const nn::Checkpoint& c);

  // Training-loop model concept; the dataset is a span of samples.
  struct Batchable {
    BeamModel* model;
    std::span<const dataset::SequenceSample> samples;
    std::size_t size() const { return samples.size(); }
  };
  std::vector<nn::Tensor*> param_blocks();
  std::vector<nn::Tensor*> grad_blocks();
  void zero_grads();
  double batch_grad(std::span<const dataset::SequenceSample> samples, std::span<const int> idx);
  double batch_loss(std::span<const dataset::SequenceSample> samples,
                    std::span<const int> idx) const;

 private:
  void check_sample(const dataset::SequenceSample& s) const;

  BeamModelKind kind_;
  BeamModelMeta meta_;
  std::variant<nn::Fcnn, nn::LeNet, nn::BBoxLstm, nn::MaskLstm> net_;
};

/// Cross-entropy training with the given schedule; deterministic per seed.
nn::TrainLog train_beam_model(BeamModel& model, std::span<const dataset::SequenceSample> train,
                              std::span<const dataset::SequenceSample> val,
                              const nn::TrainSpec& spec);

/// Indices of the k largest scores, descending, ties to the lower index.
std::vector<int> top_k(std::span<const double> scores, int k);

/// Prediction dump: one row per sample with label and top-3 indices.
void write_predictions(const std::string& path,
                       std::span<const dataset::SequenceSample> samples,
                       const std::vector<std::vector<int>>& top3);

}  // namespace sembeam::beam
